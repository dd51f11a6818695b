"""
Merge-selection policies for the terrace construction.
"""

from abc import ABC, abstractmethod
from typing import Dict, Sequence

from ..exceptions import ConfigError


class MergePolicy(ABC):
    """Chooses which speed descent c_(J-1) > c_J to resolve next."""

    name = 'abstract'

    @abstractmethod
    def select(self, descents: Sequence[int]) -> int:
        """
        Pick one descent.

        Args:
            descents: Indices J (into the current front list) with c_(J-1) > c_J

        Returns:
            The chosen J
        """
        pass


class LeftmostFirst(MergePolicy):
    """Resolve the descent closest to the upper state first."""

    name = 'leftmost'

    def select(self, descents: Sequence[int]) -> int:
        return min(descents)


class RightmostFirst(MergePolicy):
    """Resolve the descent closest to 0 first."""

    name = 'rightmost'

    def select(self, descents: Sequence[int]) -> int:
        return max(descents)


MERGE_POLICIES: Dict[str, type] = {
    'leftmost': LeftmostFirst,
    'rightmost': RightmostFirst,
}


def make_merge_policy(name: str) -> MergePolicy:
    if name not in MERGE_POLICIES:
        raise ConfigError(f"Merge policy '{name}' not supported. Available: {list(MERGE_POLICIES)}")
    return MERGE_POLICIES[name]()

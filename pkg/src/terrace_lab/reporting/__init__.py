"""
Artifact writing and run manifests.
"""

from .artifacts import ArtifactWriter, RunManifest, config_hash, read_speed_field_csv

__all__ = ['ArtifactWriter', 'RunManifest', 'config_hash', 'read_speed_field_csv']

"""
YAML experiment files: parsing and validation into frozen settings objects.

A file has exactly three sections::

    problem:
      dimension: 1
      diffusion: identity
      reaction: {kind: cubic, a: 0.3}
    grid:
      points_per_period: 20
      extent_periods: 80
    run:
      horizon: 60
      tolerances: {zero_speed_tol: 5.0e-3}

Unknown keys anywhere are rejected with their dotted path.
"""

from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .. import config as defaults
from ..exceptions import ConfigError
from .periodic_problem import DiffusionEntry, DiffusionMode, DiffusionSpec, PeriodicProblem
from .reaction import ModulationTerm, ReactionSpec, _as_float

TOP_LEVEL_KEYS = ('problem', 'grid', 'run')


@dataclass(frozen=True)
class Tolerances:
    steady_tol: float = defaults.STEADY_TOL
    tol_marginal: float = defaults.TOL_MARGINAL
    dedup_tol: float = defaults.DEDUP_TOL
    zero_speed_tol: float = defaults.ZERO_SPEED_TOL
    eps_overshoot: float = defaults.EPS_OVERSHOOT
    comparison_tol: float = defaults.COMPARISON_TOL
    geom_tol: float = defaults.GEOM_TOL
    angle_tol: float = defaults.ANGLE_TOL
    r2_min: float = defaults.R2_MIN
    monotone_tol: float = defaults.MONOTONE_TOL
    prof_tol: float = defaults.PROF_TOL
    profile_match_tol: float = defaults.PROFILE_MATCH_TOL
    speed_se_max: float = defaults.SPEED_SE_MAX
    merge_floor: float = defaults.MERGE_FLOOR
    split_floor: float = defaults.SPLIT_FLOOR
    speed_match_floor: float = defaults.SPEED_MATCH_FLOOR
    boundary_margin: int = defaults.BOUNDARY_MARGIN
    contamination_tol: float = defaults.CONTAMINATION_TOL
    cfl_safety: float = defaults.CFL_SAFETY
    reaction_limit: float = defaults.REACTION_LIMIT
    c_disc: float = defaults.C_DISC
    delta_min: float = defaults.DELTA_MIN
    relax_tol: float = defaults.RELAX_TOL


@dataclass(frozen=True)
class GridSettings:
    points_per_period: int = 20
    extent_periods: int = 80


@dataclass(frozen=True)
class SpreadSettings:
    radius: float = 8.0
    times: Tuple[float, ...] = (100.0, 200.0)
    extent_periods: int = 0
    epsilon: float = 0.1


@dataclass(frozen=True)
class CertificateSettings:
    epsilon: float = 0.05
    eta: float = 1e-3
    times: Tuple[float, ...] = (0.0, 1.0, 2.0, 5.0, 10.0)


@dataclass(frozen=True)
class RunSettings:
    horizon: float = 60.0
    dt: Optional[float] = None
    cadence: int = 10
    direction: Tuple[int, ...] = ()
    directions: Tuple[Tuple[int, ...], ...] = ()
    probe_levels: Tuple[float, ...] = tuple(round(0.05 * k, 10) for k in range(1, 20))
    relaxation_horizon: float = 2000.0
    linear_solver: str = 'direct'
    datum_offset: float = 0.0
    profile_half_width: float = 10.0
    spread: SpreadSettings = field(default_factory=SpreadSettings)
    certificate: CertificateSettings = field(default_factory=CertificateSettings)
    tolerances: Tolerances = field(default_factory=Tolerances)


@dataclass(frozen=True)
class LabConfig:
    problem: PeriodicProblem
    grid: GridSettings
    run: RunSettings

    @property
    def direction(self) -> Tuple[int, ...]:
        if self.run.direction:
            return self.run.direction
        return (1,) if self.problem.dimension == 1 else (1, 0)


def _check_keys(mapping: Any, allowed, path: str) -> Dict[str, Any]:
    if mapping is None:
        return {}
    if not isinstance(mapping, dict):
        raise ConfigError(f"'{path}' must be a mapping")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key '{path}.{unknown[0]}'" if path else f"unknown key '{unknown[0]}'")
    return mapping


def _int_vector(value, path: str) -> Tuple[int, ...]:
    if isinstance(value, int):
        value = [value]
    try:
        vec = tuple(int(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{path}' must be a list of integers") from exc
    if any(v != w for v, w in zip(vec, value)):
        raise ConfigError(f"'{path}' must be a list of integers")
    return vec


def _as_int(value) -> int:
    """Integer from YAML; fractional values such as 20.5 are rejected, not truncated."""
    if isinstance(value, bool):
        raise ValueError("boolean where an integer is expected")
    number = float(value) if isinstance(value, str) else value
    if isinstance(number, float) and not number.is_integer():
        raise ValueError(f"{value!r} is not an integer")
    return int(number)


def _parse_flat(cls, mapping, path: str):
    """Build a flat dataclass from a mapping, coercing to the default's type."""
    mapping = _check_keys(mapping, [f.name for f in fields(cls)], path)
    kwargs = {}
    for f in fields(cls):
        if f.name not in mapping:
            continue
        value = mapping[f.name]
        default = f.default
        try:
            if isinstance(default, bool):
                kwargs[f.name] = bool(value)
            elif isinstance(default, int):
                kwargs[f.name] = _as_int(value)
            elif isinstance(default, float):
                kwargs[f.name] = _as_float(value)
            elif isinstance(default, tuple):
                kwargs[f.name] = tuple(_as_float(v) for v in value)
            else:
                kwargs[f.name] = value
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for '{path}.{f.name}': {value!r}") from exc
    return cls(**kwargs)


def _parse_modulation(items, path: str) -> Tuple[ModulationTerm, ...]:
    terms = []
    for i, item in enumerate(items or []):
        item_path = f"{path}[{i}]"
        item = _check_keys(item, ('amplitude', 'wavevector', 'polynomial'), item_path)
        if 'wavevector' not in item or 'polynomial' not in item:
            raise ConfigError(f"'{item_path}' needs wavevector and polynomial")
        terms.append(ModulationTerm(
            amplitude=_as_float(item.get('amplitude', 1.0)),
            wavevector=_int_vector(item['wavevector'], f"{item_path}.wavevector"),
            coefficients=tuple(_as_float(c) for c in item['polynomial']),
        ))
    return tuple(terms)


def _parse_reaction(mapping, path: str) -> ReactionSpec:
    mapping = _check_keys(mapping, ('kind', 'a', 'roots', 'scale', 'coefficients', 'modulation'), path)
    kind = mapping.get('kind')
    modulation = _parse_modulation(mapping.get('modulation'), f"{path}.modulation")
    scale = mapping.get('scale', 1.0)
    if kind == 'cubic':
        if 'a' not in mapping:
            raise ConfigError(f"'{path}.a' is required for a cubic reaction")
        return ReactionSpec.cubic(mapping['a'], scale, modulation)
    if kind == 'quintic':
        return ReactionSpec.quintic(mapping.get('roots', ()), scale, modulation)
    if kind == 'roots':
        return ReactionSpec.from_roots(mapping.get('roots', ()), scale, modulation)
    if kind == 'polynomial':
        if 'coefficients' not in mapping:
            raise ConfigError(f"'{path}.coefficients' is required for a polynomial reaction")
        return ReactionSpec.from_coefficients(mapping['coefficients'], modulation)
    raise ConfigError(f"'{path}.kind' must be one of cubic, quintic, roots, polynomial; got {kind!r}")


def _parse_diffusion(value, dimension: int, path: str) -> DiffusionSpec:
    if value is None or value == 'identity':
        return DiffusionSpec.identity(dimension)
    if isinstance(value, dict):
        value = _check_keys(value, ('entries',), path).get('entries')
        path = f"{path}.entries"
    if not isinstance(value, list):
        raise ConfigError(f"'{path}' must be 'identity' or a list of diagonal entries")
    entries = []
    for i, item in enumerate(value):
        item_path = f"{path}[{i}]"
        item = _check_keys(item, ('constant', 'modes'), item_path)
        modes = []
        for j, mode in enumerate(item.get('modes') or []):
            mode_path = f"{item_path}.modes[{j}]"
            mode = _check_keys(mode, ('amplitude', 'wavevector'), mode_path)
            modes.append(DiffusionMode(
                _as_float(mode.get('amplitude', 0.0)),
                _int_vector(mode.get('wavevector', [1] * dimension), f"{mode_path}.wavevector"),
            ))
        entries.append(DiffusionEntry(_as_float(item.get('constant', 1.0)), tuple(modes)))
    return DiffusionSpec(tuple(entries))


def _parse_problem(mapping, probe_points: int) -> PeriodicProblem:
    mapping = _check_keys(mapping, ('dimension', 'diffusion', 'reaction'), 'problem')
    if 'dimension' not in mapping or 'reaction' not in mapping:
        raise ConfigError("'problem' needs dimension and reaction")
    dimension = mapping['dimension']
    if dimension not in (1, 2):
        raise ConfigError(f"problem.dimension must be 1 or 2, got {dimension!r}")
    diffusion = _parse_diffusion(mapping.get('diffusion'), dimension, 'problem.diffusion')
    reaction = _parse_reaction(mapping['reaction'], 'problem.reaction')
    return PeriodicProblem(dimension, diffusion, reaction, probe_points=probe_points)


def _parse_run(mapping) -> RunSettings:
    nested = ('spread', 'certificate', 'tolerances')
    allowed = [f.name for f in fields(RunSettings)]
    mapping = dict(_check_keys(mapping, allowed, 'run'))
    sub = {name: mapping.pop(name, None) for name in nested}
    vectors = {}
    if 'direction' in mapping:
        vectors['direction'] = _int_vector(mapping.pop('direction'), 'run.direction')
    if 'directions' in mapping:
        vectors['directions'] = tuple(
            _int_vector(v, f'run.directions[{i}]') for i, v in enumerate(mapping.pop('directions') or [])
        )
    if mapping.get('dt') is not None:
        mapping['dt'] = _as_float(mapping['dt'])
    dt = mapping.pop('dt', None)
    solver = mapping.pop('linear_solver', 'direct')
    if solver not in ('direct', 'cg'):
        raise ConfigError(f"run.linear_solver must be 'direct' or 'cg', got {solver!r}")
    run = _parse_flat(RunSettings, mapping, 'run')
    return replace(
        run,
        dt=dt,
        linear_solver=solver,
        spread=_parse_flat(SpreadSettings, sub['spread'], 'run.spread'),
        certificate=_parse_flat(CertificateSettings, sub['certificate'], 'run.certificate'),
        tolerances=_parse_flat(Tolerances, sub['tolerances'], 'run.tolerances'),
        **vectors,
    )


def load_config(config_text: str) -> LabConfig:
    """
    Parse and validate an experiment file.

    Args:
        config_text: YAML text

    Returns:
        Validated LabConfig

    Raises:
        ConfigError: On syntax errors, unknown keys, bad values or
            non-elliptic diffusion
    """
    try:
        document = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    document = _check_keys(document, TOP_LEVEL_KEYS, '')
    if 'problem' not in document:
        raise ConfigError("config needs a 'problem' section")
    grid = _parse_flat(GridSettings, document.get('grid'), 'grid')
    if grid.points_per_period < 2 or grid.extent_periods < 1:
        raise ConfigError("grid.points_per_period must be >= 2 and grid.extent_periods >= 1")
    probe_points = max(grid.points_per_period, defaults.PROBE_POINTS_PER_PERIOD)
    problem = _parse_problem(document['problem'], probe_points)
    return LabConfig(problem=problem, grid=grid, run=_parse_run(document.get('run')))


def load_problem(config_text: str) -> PeriodicProblem:
    """Parse a config and return only its validated problem."""
    return load_config(config_text).problem


def read_config_file(path: str) -> Tuple[str, LabConfig]:
    """Read a config file, returning its raw text (for hashing) and the parsed config."""
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return text, load_config(text)


def direction_list(run: RunSettings) -> List[Tuple[int, ...]]:
    """Directions for sweeps, defaulting to a 16-direction rational fan."""
    if run.directions:
        return list(run.directions)
    fan = [(1, 0), (2, 1), (1, 1), (1, 2)]
    out = []
    for quarter in range(4):
        for x, y in fan:
            for _ in range(quarter):
                x, y = -y, x
            out.append((x, y))
    return out

"""
Command-line entry point.

Every subcommand reads one YAML experiment file (``--config``), lets a few
flags override it, runs one pipeline and writes its artifacts plus a
``manifest.json`` into the output directory. Fatal diagnostics are mapped to
exit codes: 2 for configuration errors, 3 for numerical diagnostics and 4 for
resource failures.
"""

import argparse
import dataclasses
import sys
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .config import logger, set_log_level
from .exceptions import ConfigError, TerraceLabError
from .evolve import SnapshotWriter, evolve, planar_datum
from .fronts import (
    FrontSettings,
    bistable_speed,
    counter_propagation_check,
    directional_domain,
    shoot_bistable_profile,
)
from .problem import LatticeDirection, ReactionSpec
from .problem.schema import LabConfig, direction_list, read_config_file
from .reporting import ArtifactWriter, RunManifest, config_hash, read_speed_field_csv
from .spectral import StateLattice, enumerate_stable_states, require_classified
from .terrace import (
    MERGE_POLICIES,
    build_terrace,
    build_terraces,
    compare_terraces,
    merge_order_invariance_check,
    observe_terrace_from_cauchy,
)
from .verify import (
    glued_supersolution_residual,
    perturbation_residual,
    shape_bracket,
    shape_match,
    spreading_run,
)
from .visualization import Plotter
from .wulff import (
    SpeedField,
    c_of_p,
    corner_demo,
    freidlin_gartner,
    speed_consistency_check,
    spreading_shape_recursion,
    upsilon,
    uppermost_speeds,
    wulff_refinement_study,
    wulff_shape,
)
from .wulff.spreading import CORNER_DIRECTION


class RunContext:
    """Parsed config, flag overrides and the artifact writer of one invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.inputs: List[str] = []
        self.config_text = ''
        self.config: Optional[LabConfig] = None
        if getattr(args, 'config', None):
            self.config_text, config = read_config_file(args.config)
            self.inputs.append(args.config)
            self.config = self._override(config)
        self.writer = ArtifactWriter(args.output_dir)
        self.plotter = Plotter()
        self._lattice: Optional[StateLattice] = None
        self._terraces: Dict[str, Dict[Tuple[int, ...], object]] = {}

    def _override(self, config: LabConfig) -> LabConfig:
        run = config.run
        if self.args.horizon is not None:
            run = dataclasses.replace(run, horizon=self.args.horizon)
        direction = getattr(self.args, 'dir', None)
        if direction:
            parsed = LatticeDirection.parse(direction)
            if parsed.dimension != config.problem.dimension:
                raise ConfigError(f"--dir {direction} does not match dimension {config.problem.dimension}")
            run = dataclasses.replace(run, direction=parsed.components)
        return dataclasses.replace(config, run=run)

    def require_config(self) -> LabConfig:
        if self.config is None:
            raise ConfigError(f"command '{self.args.command}' needs --config")
        return self.config

    @property
    def jobs(self) -> int:
        return self.args.jobs

    @property
    def settings(self) -> FrontSettings:
        return FrontSettings.from_config(self.require_config())

    @property
    def direction(self) -> LatticeDirection:
        return LatticeDirection(self.require_config().direction)

    @property
    def lattice(self) -> StateLattice:
        if self._lattice is None:
            config = self.require_config()
            self._lattice = enumerate_stable_states(
                config.problem, config.run.probe_levels, config.grid.points_per_period,
                config.run.tolerances, config.run.relaxation_horizon, self.jobs)
        return self._lattice

    def terraces(self, lattice: Optional[StateLattice] = None) -> Dict[Tuple[int, ...], object]:
        config = self.require_config()
        if config.problem.dimension != 2:
            raise ConfigError("speed fields over directions need a 2D problem")
        lattice = lattice or self.lattice
        require_classified(lattice)
        if lattice.top.id not in self._terraces:
            self._terraces[lattice.top.id] = build_terraces(config.problem, lattice, direction_list(config.run),
                                                            self.settings, self.args.policy, self.jobs)
        return self._terraces[lattice.top.id]


def _profile_oracle(config: LabConfig, front) -> Optional[pd.DataFrame]:
    """Shooting profile on the measured z window for homogeneous problems."""
    problem = config.problem
    if not (problem.is_homogeneous and isinstance(problem.reaction, ReactionSpec)) or front.profile is None:
        return None
    unit = LatticeDirection(front.direction).unit
    diffusivity = float(sum(entry.constant * e * e for entry, e in zip(problem.diffusion.entries, unit)))
    shot = shoot_bistable_profile(problem.reaction, front.upper.mean, front.lower.mean, diffusivity)
    z = front.profile.z
    return pd.DataFrame({'z': z, 'U': shot(z - front.profile.center), 'c_shooting': shot.speed})


def _write_profile(ctx: RunContext, front, name: str, oracle: Optional[pd.DataFrame] = None) -> None:
    if front.profile is None:
        return
    frame = front.profile.to_frame()
    if oracle is not None:
        frame['U_shooting'] = oracle['U'].to_numpy()
    ctx.writer.write_csv(frame, f'{name}.csv')
    fig = ctx.plotter.profile_plot(frame, oracle=oracle, title=f'Front {front.upper.id} -> {front.lower.id}')
    ctx.writer.write_figure(ctx.plotter, fig, f'{name}.svg')


def cmd_states(ctx: RunContext) -> None:
    lattice = ctx.lattice
    ctx.writer.write_json(lattice.to_dict(), 'lattice.json')
    logger.info(f"Lattice: {[s.id for s in lattice.stable]} (M={lattice.size})")


def _counter_propagation(ctx: RunContext) -> None:
    config = ctx.require_config()
    lattice = ctx.lattice
    unstable = lattice.by_id(ctx.args.unstable)
    above = [s for s in lattice.stable if s.mean > unstable.mean]
    below = [s for s in lattice.stable if s.mean < unstable.mean]
    if not above or not below:
        raise ConfigError(f"state {unstable.id} has no stable neighbour on both sides")
    report = counter_propagation_check(config.problem, unstable, above[-1], below[0], lattice.top,
                                       ctx.direction, ctx.settings)
    ctx.writer.write_json(report.to_dict(), 'counter_propagation.json')


def cmd_evolve(ctx: RunContext) -> None:
    """Evolve the planar datum of two states and write snapshots of the solution."""
    config = ctx.require_config()
    lattice = ctx.lattice
    upper = lattice.by_id(ctx.args.upper) if ctx.args.upper else lattice.top
    lower = lattice.by_id(ctx.args.lower) if ctx.args.lower else lattice.bottom
    settings = ctx.settings
    domain = directional_domain(config.problem, ctx.direction, settings.points_per_period,
                                settings.extent_periods)
    u0 = planar_datum(domain, upper.cell_field(), lower.cell_field(), ctx.direction.unit, settings.datum_offset)
    writer = SnapshotWriter(ctx.writer, domain, cadence=ctx.args.every)
    trajectory = evolve(config.problem, domain, u0, settings.horizon, [writer], dt=settings.dt,
                        tolerances=config.run.tolerances, solver=settings.linear_solver)
    logger.info(f"Evolved {trajectory.steps} steps of dt={trajectory.dt:.4g}")


def cmd_front(ctx: RunContext) -> None:
    if ctx.args.unstable:
        _counter_propagation(ctx)
        return
    config = ctx.require_config()
    lattice = ctx.lattice
    upper = lattice.by_id(ctx.args.upper) if ctx.args.upper else lattice.top
    lower = lattice.by_id(ctx.args.lower) if ctx.args.lower else lattice.bottom
    front = bistable_speed(config.problem, ctx.direction, upper, lower, ctx.settings,
                           intermediate=lattice.between(upper, lower))
    payload = front.to_dict()
    oracle = _profile_oracle(config, front)
    if oracle is not None:
        payload['c_shooting'] = float(oracle['c_shooting'].iloc[0])
        logger.info(f"Shooting oracle speed {payload['c_shooting']:.6f}, measured {front.c:.6f}")
    ctx.writer.write_json(payload, 'front.json')
    _write_profile(ctx, front, 'profile', oracle)


def cmd_terrace(ctx: RunContext) -> None:
    config = ctx.require_config()
    lattice = ctx.lattice
    terrace = build_terrace(config.problem, lattice, ctx.direction, ctx.settings,
                            ctx.args.policy, jobs=ctx.jobs)
    ctx.writer.write_json(terrace.to_dict(), 'terrace.json')
    for k, front in enumerate(terrace.fronts):
        _write_profile(ctx, front, f'profile_{k}')

    if ctx.args.check_order:
        report = merge_order_invariance_check(config.problem, lattice, ctx.direction, ctx.settings,
                                              tuple(sorted(MERGE_POLICIES)), ctx.jobs)
        ctx.writer.write_json(report.to_dict(), 'merge_order.json')
        report.raise_for_failure()

    if ctx.args.observe:
        observed = observe_terrace_from_cauchy(config.problem, lattice, ctx.direction, ctx.settings)
        ctx.writer.write_json(observed.to_dict(), 'terrace_observed.json')
        report = compare_terraces(terrace, observed, config.run.tolerances)
        ctx.writer.write_json(report.to_dict(), 'terrace_match.json')
        report.raise_for_failure()


def _speed_field(ctx: RunContext) -> SpeedField:
    if ctx.args.field:
        ctx.inputs.append(ctx.args.field)
        return read_speed_field_csv(ctx.args.field)
    terraces = ctx.terraces()
    if ctx.args.state:
        return c_of_p(terraces, ctx.lattice.by_id(ctx.args.state), ctx.config.run.tolerances)
    return uppermost_speeds(terraces)


def _parse_point(text: str) -> Tuple[float, float]:
    try:
        x, y = (float(part) for part in text.split(','))
    except ValueError as exc:
        raise ConfigError(f"cannot parse direction '{text}' as 'x,y'") from exc
    if x == 0.0 and y == 0.0:
        raise ConfigError("--fg direction must be nonzero")
    return x, y


def cmd_wulff(ctx: RunContext) -> None:
    field_ = _speed_field(ctx)
    tol = ctx.config.run.tolerances.geom_tol if ctx.config else 1e-9
    shape = wulff_shape(field_, tol)
    ctx.writer.write_csv(field_.to_frame(), 'speed_field.csv')
    ctx.writer.write_csv(shape.to_frame(), 'wulff_polygon.csv')
    ctx.writer.write_figure(ctx.plotter, ctx.plotter.speed_plot(field_.to_frame()), 'speed_field.svg')
    ctx.writer.write_figure(ctx.plotter, ctx.plotter.polygon_plot(shape.to_frame()), 'wulff.svg')

    payload = {
        'provenance': field_.provenance,
        'directions': field_.size,
        'area': float(shape.area()),
        'vertices': shape.as_array().tolist(),
    }
    if field_.size >= 6:
        payload['refinement'] = wulff_refinement_study(field_, tol).to_dict()
    if ctx.args.fg:
        direction = _parse_point(ctx.args.fg)
        norm = float(np.hypot(*direction))
        value, argmin = freidlin_gartner(field_, (direction[0] / norm, direction[1] / norm))
        payload['freidlin_gartner'] = {'e': list(direction), 'w': float(value),
                                       'argmin': [float(c) for c in argmin]}
        print(f"w({ctx.args.fg}) = {float(value):.12g}")
    ctx.writer.write_json(payload, 'wulff.json')

    if ctx.args.consistency:
        config = ctx.require_config()
        lattice = ctx.lattice
        by_state = {state.id: ctx.terraces(lattice.below(state)) for state in lattice.stable[:-1]}
        report = speed_consistency_check(lattice, by_state, config.run.tolerances)
        ctx.writer.write_json(report.to_dict(), 'speed_consistency.json')
        report.raise_for_failure()


def _lower_shapes(ctx: RunContext, count: int) -> List:
    """Lower spreading shapes built from the states p_0 .. p_{count-1}."""
    lattice = ctx.lattice
    upsilons = []
    for state in lattice.stable[:count]:
        field_ = uppermost_speeds(ctx.terraces(lattice.below(state)))
        upsilons.append(upsilon(field_, ctx.config.run.tolerances).shape)
    return spreading_shape_recursion(upsilons, ctx.config.run.tolerances)


def cmd_spread(ctx: RunContext) -> None:
    config = ctx.require_config()
    run = config.run
    if ctx.args.bracket and ctx.args.field:
        raise ConfigError("--bracket needs terraces from the config; drop --field")
    epsilon = ctx.args.epsilon if ctx.args.epsilon is not None else run.spread.epsilon
    lattice = ctx.lattice
    require_classified(lattice)
    shapes = spreading_run(config.problem, lattice, config.grid.points_per_period, run.spread,
                           times=ctx.args.times, dt=run.dt, tolerances=run.tolerances,
                           linear_solver=run.linear_solver)

    terraces = None
    fixed = None
    if ctx.args.field:
        ctx.inputs.append(ctx.args.field)
        fixed = wulff_shape(read_speed_field_csv(ctx.args.field), run.tolerances.geom_tol)
    else:
        terraces = ctx.terraces()

    lower_shapes: List = []
    if ctx.args.bracket:
        lower_shapes = _lower_shapes(ctx, lattice.size)

    reports = []
    for shape in shapes:
        lower_state = lattice.by_id(shape.lower_id)
        if fixed is not None:
            predicted = fixed
        else:
            predicted = wulff_shape(c_of_p(terraces, lower_state, run.tolerances), run.tolerances.geom_tol)
        tag = f't{shape.time:g}_{shape.upper_id}_{shape.lower_id}'
        ctx.writer.write_csv(shape.to_frame(), f'outline_{tag}.csv')
        if ctx.args.bracket:
            k = lattice.index(lower_state)
            report = shape_bracket(shape, lower_shapes[k - 1], predicted, epsilon)
        else:
            report = shape_match(shape, predicted, epsilon)
        entry = shape.to_dict()
        entry.update(report.to_dict())
        reports.append(entry)

        outline = pd.DataFrame(shape.outline, columns=['x', 'y']).assign(label=f't={shape.time:g}')
        overlays = {'W': predicted.to_frame()}
        if ctx.args.bracket:
            overlays['lower'] = lower_shapes[lattice.index(lower_state) - 1].to_frame()
        fig = ctx.plotter.overlay_plot(outline, overlays, title=f'{shape.upper_id} -> {shape.lower_id}')
        ctx.writer.write_figure(ctx.plotter, fig, f'overlay_{tag}.svg')
        if not report.passed:
            logger.warning(f"Shape at t={shape.time:g} ({shape.upper_id} -> {shape.lower_id}) "
                           f"outside the {epsilon:g} sandwich")
    ctx.writer.write_json({'epsilon': epsilon, 'reports': reports}, 'shape_match.json')


def cmd_corner_demo(ctx: RunContext) -> None:
    tolerances = ctx.config.run.tolerances if ctx.config else None
    report = corner_demo(tolerances)
    ctx.writer.write_json(report.to_dict(), 'corner_demo.json')
    ctx.writer.write_csv(report.shape.to_frame(), 'corner_polygon.csv')
    fig = ctx.plotter.polygon_plot(report.shape.to_frame(), title='Corner field',
                                   line=([float(c) for c in CORNER_DIRECTION], float(report.requested_speed)))
    ctx.writer.write_figure(ctx.plotter, fig, 'corner_demo.svg')


def cmd_certify(ctx: RunContext) -> None:
    config = ctx.require_config()
    run = config.run
    lattice = ctx.lattice
    if ctx.args.certificate == 'perturbation':
        states = [lattice.by_id(ctx.args.state)] if ctx.args.state else list(lattice.stable)
        reports = [perturbation_residual(config.problem, state, times=run.certificate.times,
                                         tolerances=run.tolerances) for state in states]
        ctx.writer.write_json({'reports': [r.to_dict() for r in reports]}, 'certificate_perturbation.json')
        for report in reports:
            report.raise_for_failure()
        return

    terrace = build_terrace(config.problem, lattice, ctx.direction, ctx.settings, ctx.args.policy, jobs=ctx.jobs)
    epsilon = ctx.args.epsilon if ctx.args.epsilon is not None else run.certificate.epsilon
    eta = ctx.args.eta if ctx.args.eta is not None else run.certificate.eta
    report = glued_supersolution_residual(config.problem, terrace, epsilon, eta,
                                          run.certificate.times, run.tolerances)
    ctx.writer.write_json(report.to_dict(), 'certificate_glued.json')
    report.raise_for_failure()


COMMANDS = {
    'states': cmd_states,
    'evolve': cmd_evolve,
    'front': cmd_front,
    'terrace': cmd_terrace,
    'wulff': cmd_wulff,
    'spread': cmd_spread,
    'corner-demo': cmd_corner_demo,
    'certify': cmd_certify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='YAML experiment file')
    common.add_argument('--output-dir', type=str, default=None,
                        help='Artifact directory (default: $TERRACE_LAB_OUTPUT_DIR or ./results)')
    common.add_argument('--jobs', type=int, default=1, help='Worker processes over directions and probes')
    common.add_argument('--log-level', type=str, default=None, help='Override TERRACE_LAB_LOG_LEVEL')
    common.add_argument('--horizon', type=float, default=None, help='Override run.horizon')
    common.add_argument('--policy', choices=sorted(MERGE_POLICIES), default='leftmost',
                        help='Merge order used when building terraces')

    parser = argparse.ArgumentParser(prog='terrace-lab',
                                     description='Fronts, terraces and spreading shapes of periodic '
                                                 'multistable reaction-diffusion equations.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('states', parents=[common], help='Enumerate the stable periodic states')

    run = sub.add_parser('evolve', parents=[common], help='Evolve a planar datum and write snapshots')
    run.add_argument('--dir', type=str, default=None)
    run.add_argument('--upper', type=str, default=None)
    run.add_argument('--lower', type=str, default=None)
    run.add_argument('--every', type=int, default=100, help='Steps between snapshots')

    front = sub.add_parser('front', parents=[common], help='Measure one bistable front')
    front.add_argument('--dir', type=str, default=None, help="Lattice direction, e.g. '1' or '1,0'")
    front.add_argument('--upper', type=str, default=None, help='State behind the front (default: top)')
    front.add_argument('--lower', type=str, default=None, help='State ahead of the front (default: 0)')
    front.add_argument('--unstable', type=str, default=None,
                       help='Check that both stable neighbours of this unstable state invade it')

    terrace = sub.add_parser('terrace', parents=[common], help='Build the propagating terrace')
    terrace.add_argument('--dir', type=str, default=None)
    terrace.add_argument('--observe', action='store_true', help='Cross-check against a Cauchy run')
    terrace.add_argument('--check-order', action='store_true', help='Compare every merge order')

    wulff = sub.add_parser('wulff', parents=[common], help='Wulff shape of a speed field')
    wulff.add_argument('--field', type=str, default=None, help='CSV with angle_degrees, speed[, se]')
    wulff.add_argument('--state', type=str, default=None, help='Use c[p] for this state id')
    wulff.add_argument('--fg', type=str, default=None, help="Evaluate w(e) at e given as 'x,y'")
    wulff.add_argument('--consistency', action='store_true',
                       help='Cross-check c[p] against the terraces of every sub-problem')

    spread = sub.add_parser('spread', parents=[common], help='Spreading shapes from compact data')
    spread.add_argument('--times', type=float, nargs='+', default=None)
    spread.add_argument('--epsilon', type=float, default=None)
    spread.add_argument('--field', type=str, default=None, help='Predict from a speed field CSV')
    spread.add_argument('--bracket', action='store_true',
                        help='Report the lower/upper bracket instead of a single predicted shape')

    sub.add_parser('corner-demo', parents=[common], help='Corner geometry of a three-speed field')

    certify = sub.add_parser('certify', parents=[common], help='Residual certificates')
    certify.add_argument('--certificate', choices=['perturbation', 'glued'], required=True)
    certify.add_argument('--state', type=str, default=None)
    certify.add_argument('--epsilon', type=float, default=None)
    certify.add_argument('--eta', type=float, default=None)
    certify.add_argument('--dir', type=str, default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        try:
            set_log_level(args.log_level)
        except ValueError:
            logger.error(f"unknown log level '{args.log_level}'")
            return ConfigError.exit_code
    if args.jobs < 1:
        logger.error("--jobs must be at least 1")
        return ConfigError.exit_code

    start = time.perf_counter()
    ctx = None
    status = 0
    try:
        ctx = RunContext(args)
        COMMANDS[args.command](ctx)
    except TerraceLabError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        status = exc.exit_code
    finally:
        if ctx is not None:
            manifest = RunManifest(
                config_hash=config_hash(ctx.config_text),
                command=' '.join(['terrace-lab'] + list(argv if argv is not None else sys.argv[1:])),
                inputs=ctx.inputs,
                wall_time=round(time.perf_counter() - start, 3),
                version=__version__,
            )
            manifest.write(ctx.writer)
    return status


if __name__ == '__main__':
    sys.exit(main())

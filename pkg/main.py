"""
Command-line entry point for AttractorLab.
"""

import argparse
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from config.config_manager import load_config
from config.constants import ForceName, NormKind, ScenarioName
from core.scenario_manager import run_scenario
from lab.classes import classify
from lab.compactness import TrajectoryCloud, verdict
from lab.gallery import ForceSpec, default_setup, generate, list_forces
from ui.console_interface import ConsoleInterface
from utils.error_handler import LabError, handle_error
from utils.logger import LoggerMixin, set_verbosity
from utils.signal_io import read_signal, write_curve, write_curves, write_entropy, write_json, write_signal

# Load environment variables from .env file
load_dotenv()

_OVERRIDE_FLAGS = ('nmax', 'dt', 'modes', 'L', 'alpha', 'gamma', 'p', 't_end', 'width')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='attractorlab',
                                     description='Numerical lab for strong uniform attractors')
    parser.add_argument('--verbose', action='store_true', help='Log at DEBUG level')
    verbs = parser.add_subparsers(dest='verb', required=True)

    def add_parameters(sub: argparse.ArgumentParser) -> None:
        sub.add_argument('--config', help='Flat key = value configuration file')
        sub.add_argument('--out', default='out', help='Output directory (file for gallery emit)')
        sub.add_argument('--nmax', type=int, help='Highest forced mode')
        sub.add_argument('--dt', type=float, help='Time step')
        sub.add_argument('--modes', type=int, help='Sine modes or line grid points')
        sub.add_argument('--L', dest='L', type=float, help='Half length of the line grid')
        sub.add_argument('--alpha', type=float, help='Damping alpha')
        sub.add_argument('--gamma', type=float, help='Wave damping gamma')
        sub.add_argument('--p', type=float, help='Lebesgue exponent in time')
        sub.add_argument('--t-end', dest='t_end', type=float, help='Final time or span')
        sub.add_argument('--width', type=float, help='Bump width')
        sub.add_argument('--seedless', action='store_true', help='Assert that no randomness is used')

    run = verbs.add_parser('run', help='Run a named scenario')
    run.add_argument('scenario', choices=[name.value for name in ScenarioName])
    run.add_argument('--save-trajectory', action='store_true', help='Also write the solution trajectory')
    add_parameters(run)

    gallery = verbs.add_parser('gallery', help='List or emit built-in forces')
    gallery.add_argument('action', choices=['list', 'emit'])
    gallery.add_argument('force', nargs='?', choices=[name.value for name in ForceName])
    gallery.add_argument('--force', dest='force_flag', choices=[name.value for name in ForceName],
                         help='Force to emit (same as the positional name)')
    add_parameters(gallery)

    classify_verb = verbs.add_parser('classify', help='Classify a signal file')
    classify_verb.add_argument('signal')
    classify_verb.add_argument('--norm', choices=[kind.value for kind in NormKind], help='Spatial norm')
    add_parameters(classify_verb)

    probe = verbs.add_parser('probe', help='Compactness probe of a trajectory file')
    probe.add_argument('trajectory')
    probe.add_argument('--stride', type=int, default=1, help='Use every k-th sample')
    probe.add_argument('--norm', choices=[kind.value for kind in NormKind], help='Spatial norm')
    add_parameters(probe)
    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {name: getattr(args, name) for name in _OVERRIDE_FLAGS if getattr(args, name, None) is not None}
    if getattr(args, 'seedless', False):
        overrides['seedless'] = True
    return overrides


class AttractorLabApp(LoggerMixin):
    """Dispatches CLI verbs to the scenario manager and the lab modules."""

    def __init__(self):
        super().__init__()
        self.ui = ConsoleInterface()

    def run(self, argv: Optional[List[str]] = None) -> int:
        args = build_parser().parse_args(argv)
        set_verbosity(args.verbose)
        self.ui.display_welcome_message(args.verb)
        try:
            config = load_config(args.config, collect_overrides(args))
            handler = {
                'run': self._run,
                'gallery': self._gallery,
                'classify': self._classify,
                'probe': self._probe,
            }[args.verb]
            return handler(args, config)
        except LabError as e:
            self.ui.display_error(handle_error(e, args.verb))
            return 1
        except ValueError as e:
            self.ui.display_error(str(e))
            return 1
        except KeyboardInterrupt:
            self.ui.display_warning("Interrupted by user")
            return 130

    def _run(self, args, config) -> int:
        self.ui.display_status(f"Running {args.scenario}...", "loading")
        result = run_scenario(args.scenario, config, args.out, args.save_trajectory)
        self.ui.display_result(result.summary_lines())
        if result.passed:
            self.ui.display_status(f"All checks passed; reports in {args.out}", "success")
            return 0
        failed = [check.label for check in result.checks if not check.passed]
        self.ui.display_error(f"Failed checks: {'; '.join(failed)}")
        return 1

    def _gallery(self, args, config) -> int:
        if args.action == 'list':
            self.ui.display_force_list(list_forces())
            return 0
        name = args.force or args.force_flag
        if name is None:
            self.ui.display_error("gallery emit needs a force name")
            return 2
        if args.force and args.force_flag and args.force != args.force_flag:
            self.ui.display_error(f"conflicting force names {args.force} and {args.force_flag}")
            return 2
        params = config.scenario
        spec_kwargs = {key: params.resolve(name, None) for key, name in
                       (('n_max', 'nmax'), ('L', 'L'), ('width', 'width'), ('alpha', 'alpha'))}
        spec = ForceSpec(ForceName(name), **{k: v for k, v in spec_kwargs.items() if v is not None})
        grid, basis = default_setup(spec, span=params.t_end, dt=params.dt, modes=params.modes)
        force = generate(spec, grid, basis)
        target = args.out if args.out.endswith('.csv') else os.path.join(args.out, f"{name}.csv")
        write_signal(force, target)
        self.ui.display_status(f"Wrote {grid.count} samples of {name} to {target}", "success")
        return 0

    def _classify(self, args, config) -> int:
        signal = read_signal(args.signal)
        space = NormKind(args.norm) if args.norm else None
        report = classify(signal, config.scenario.p, config.class_thresholds, space)
        self.ui.display_class_report(report, args.signal)
        write_json(os.path.join(args.out, 'class_report.json'), report.to_dict())
        curves = {name.value: item.curve for name, item in report.verdicts.items() if item.curve is not None}
        write_curves(os.path.join(args.out, 'curves.csv'), curves)
        return 0

    def _probe(self, args, config) -> int:
        if args.stride < 1:
            self.ui.display_error("--stride must be a positive integer")
            return 2
        trajectory = read_signal(args.trajectory)
        indices = range(0, trajectory.grid.count, args.stride)
        space = NormKind(args.norm) if args.norm else None
        cloud = TrajectoryCloud.from_signal(trajectory, indices, space)
        report = verdict(cloud, config.compactness_thresholds)
        self.ui.display_compactness_report(report, args.trajectory)
        write_json(os.path.join(args.out, 'compactness.json'), report.to_dict())
        write_curves(os.path.join(args.out, 'curves.csv'), {'tail': report.tail_curve})
        write_curve(os.path.join(args.out, 'tail.csv'), report.tail_curve)
        write_entropy(os.path.join(args.out, 'entropy.csv'), report.entropy_counts)
        return 0


def main(argv: Optional[List[str]] = None) -> int:
    return AttractorLabApp().run(argv)


if __name__ == "__main__":
    sys.exit(main())

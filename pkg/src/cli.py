"""
Command-line front end
Parses run configuration, dispatches subcommands and maps errors to exit codes

Exit codes: 0 success, 2 constraint failure, 3 integrator event or
underflow, 4 configuration error. Every failure also writes one JSON
diagnostic line to standard error.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional

from src import settings
from src.conserved import energy_quadrature, snapshot
from src.configuration import validate
from src.data_loader import DataLoader, dumps
from src.dynamics import IntegratorOptions, SolitonIntegrator
from src.errors import ConfigError, ConstraintViolation, HWMError
from src.experiments import ExperimentSpec, run_separation_probe, run_two_soliton_probe, sweep
from src.field import field_scan

logger = logging.getLogger(__name__)

COMMANDS = ('validate', 'integrate', 'probe', 'sweep', 'field-scan', 'energy-check')
PROBES = ('two-soliton', 'separation')
EVENT_EXIT_CODE = 3
ENERGY_AGREEMENT = 1e-4


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors are configuration errors"""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """One CLI invocation after parsing and range checks"""

    command: str
    input_path: str
    output_dir: str = 'output'
    probe: Optional[str] = None
    t_end: Optional[float] = None
    tol: Optional[float] = None
    xmin: float = -10.0
    xmax: float = 10.0
    n: int = 201
    seed: Optional[int] = None
    log_level: str = 'WARNING'

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not Path(self.input_path).is_file():
            raise ConfigError(f"input file not found: {self.input_path}", path=self.input_path)
        if self.tol is not None:
            settings.check_tolerance('tol', self.tol)
        if self.t_end is not None:
            settings.check_positive('t_end', self.t_end)
        if self.command == 'field-scan':
            if not self.xmax > self.xmin:
                raise ConfigError("--xmax must exceed --xmin")
            if self.n < 2:
                raise ConfigError("--n must be at least 2")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> 'RunConfig':
        return cls(command=args.command, input_path=args.input, output_dir=args.out,
                   probe=getattr(args, 'probe', None), t_end=getattr(args, 't_end', None),
                   tol=getattr(args, 'tol', None), xmin=getattr(args, 'xmin', -10.0),
                   xmax=getattr(args, 'xmax', 10.0), n=getattr(args, 'n', 201),
                   seed=getattr(args, 'seed', None), log_level=args.log_level)

    def to_dict(self) -> Dict:
        return asdict(self)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='hwm', description="Half-wave maps rational soliton simulator")
    common = _Parser(add_help=False)
    common.add_argument('--out', default='output', help="output directory")
    common.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    p = subparsers.add_parser('validate', parents=[common], help="check admissibility of a state")
    p.add_argument('input')
    p.add_argument('--tol', type=float)

    p = subparsers.add_parser('integrate', parents=[common], help="integrate a state")
    p.add_argument('input')
    p.add_argument('--t-end', type=float, required=True)
    p.add_argument('--tol', type=float)

    p = subparsers.add_parser('probe', parents=[common], help="run a theorem probe")
    p.add_argument('probe', choices=PROBES)
    p.add_argument('input')
    p.add_argument('--t-end', type=float, help="override the horizon")
    p.add_argument('--tol', type=float)
    p.add_argument('--seed', type=int)

    p = subparsers.add_parser('sweep', parents=[common], help="run a parameter sweep")
    p.add_argument('input')
    p.add_argument('--t-end', type=float, help="override the horizon")
    p.add_argument('--seed', type=int)

    p = subparsers.add_parser('field-scan', parents=[common], help="tabulate m and the residual")
    p.add_argument('input')
    p.add_argument('--xmin', type=float, default=-10.0)
    p.add_argument('--xmax', type=float, default=10.0)
    p.add_argument('--n', type=int, default=201)

    p = subparsers.add_parser('energy-check', parents=[common], help="compare energy evaluations")
    p.add_argument('input')
    return parser


def _emit(doc: Dict):
    print(dumps(doc))


def _spec_overrides(config: RunConfig) -> Dict:
    overrides = {}
    if config.t_end is not None:
        overrides['horizon'] = config.t_end
    if config.seed is not None:
        overrides['seed'] = config.seed
    if config.tol is not None:
        overrides['rtol'] = config.tol
        overrides['atol'] = max(config.tol / 100.0, settings.TOLERANCE_RANGE[0])
    return overrides


def cmd_validate(config: RunConfig, loader: DataLoader) -> int:
    state = loader.load_state(config.input_path)
    report = validate(state, config.tol or settings.EPS_CONSTRAINT)
    loader.write_json(report.to_dict(), 'validation.json')
    _emit(report.to_dict())
    if not report.admissible:
        raise ConstraintViolation(f"state not admissible (max residual {report.max_residual:.3e})",
                                  report=report.to_dict())
    return 0


def _event_exit(event) -> int:
    """Report an integrator event on stderr; returns the process exit code"""
    if event is None:
        return 0
    diagnostic = {'error': event.kind.value, 'message': f"integration stopped at t={event.time:.12g}",
                  'exit_code': EVENT_EXIT_CODE}
    diagnostic.update(event.to_dict())
    print(dumps(diagnostic), file=sys.stderr)
    return EVENT_EXIT_CODE


def cmd_integrate(config: RunConfig, loader: DataLoader) -> int:
    state = loader.load_state(config.input_path)
    options = IntegratorOptions()
    if config.tol is not None:
        options = options.with_tolerance(config.tol)
    record = SolitonIntegrator(options).integrate(state, config.t_end)
    loader.write_trajectory(record, Path(config.output_dir) / 'trajectory.jsonl')
    loader.write_table(record.to_frame(), 'trajectory.csv')
    summary = {
        'samples': len(record.samples),
        'final_t': record.final.t,
        'event': record.event.to_dict() if record.event else None,
        'drift': record.drift(),
        'stats': record.stats,
    }
    loader.write_json(summary, 'summary.json')
    _emit(summary)
    return _event_exit(record.event)


def cmd_probe(config: RunConfig, loader: DataLoader) -> int:
    spec = loader.load_spec(config.input_path).with_overrides(_spec_overrides(config))
    spec.output_dir = config.output_dir
    runner = run_two_soliton_probe if config.probe == 'two-soliton' else run_separation_probe
    report = runner(spec)
    print(report.to_text())
    # reports are written before an event turns into exit code 3
    return _event_exit(report.event)


def cmd_sweep(config: RunConfig, loader: DataLoader) -> int:
    template_doc, grid = loader.load_grid(config.input_path)
    template = ExperimentSpec.from_dict(template_doc).with_overrides(_spec_overrides(config))
    template.output_dir = config.output_dir
    df = sweep(template, grid)
    _emit({
        'cells': len(df),
        'failed': int((df['status'] == 'error').sum()),
        'table': f"{template.name}_sweep.csv",
    })
    return 0


def cmd_field_scan(config: RunConfig, loader: DataLoader) -> int:
    state = loader.load_state(config.input_path)
    df = field_scan(state, config.xmin, config.xmax, config.n)
    path = loader.write_table(df, 'field_scan.csv')
    _emit({'rows': len(df), 'max_residual': float(df['residual_norm'].max()), 'table': path.name})
    return 0


def cmd_energy_check(config: RunConfig, loader: DataLoader) -> int:
    state = loader.load_state(config.input_path)
    algebraic = snapshot(state).energy_algebraic
    quadrature = energy_quadrature(state)
    difference = abs(algebraic - quadrature)
    result = {
        'energy_algebraic': algebraic,
        'energy_quadrature': quadrature,
        'difference': difference,
        'agree': bool(difference <= ENERGY_AGREEMENT * max(1.0, abs(algebraic))),
    }
    loader.write_json(result, 'energy.json')
    _emit(result)
    return 0


HANDLERS = {
    'validate': cmd_validate,
    'integrate': cmd_integrate,
    'probe': cmd_probe,
    'sweep': cmd_sweep,
    'field-scan': cmd_field_scan,
    'energy-check': cmd_energy_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
        config = RunConfig.from_args(args)
        logging.basicConfig(level=getattr(logging, config.log_level), stream=sys.stderr,
                            format='%(asctime)s %(levelname)s %(name)s: %(message)s', force=True)
        loader = DataLoader(config.output_dir)
        loader.write_provenance([config.input_path])
        loader.write_json(config.to_dict(), Path('provenance') / 'run_config.json')
        logger.info("running %s on %s", config.command, config.input_path)
        return HANDLERS[config.command](config, loader)
    except HWMError as e:
        print(json.dumps(e.to_diagnostic(), sort_keys=True), file=sys.stderr)
        return e.exit_code


if __name__ == '__main__':
    sys.exit(main())

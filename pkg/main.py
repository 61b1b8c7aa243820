import argparse
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from core.errors import ArtifactFormatError, DimensionMismatchError, SgmError
from core.evaluation import f1_score, generate_ground_truth, nmse
from core.experiment import (ExperimentConfig, derive_seed, emit_plot_data,
                             load_report, run_experiment, SUMMARY_HEADER)
from core.inference import InferenceOptions, infer
from core.sgm_model import assemble_full_precision, sample
from core.simplicial_complex import random_complex
from utils.artifacts import (TOOL_VERSION, load_complex, load_params,
                             load_result, load_samples_csv, save_complex,
                             save_params, save_samples_csv, write_json,
                             write_rows_csv)
from utils.config import ConfigManager, load_yaml
from utils.logger import LoggerManager, get_logger, setup_exception_hook

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

DEFAULT_SEED = 0

logger = get_logger(__name__)


class UsageError(Exception):
    """Raised by the argument parser instead of exiting."""

    def __init__(self, message: str, usage: str):
        super().__init__(message)
        self.usage = usage


class CliArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError(message, self.format_usage())


def _params_path(complex_path: str) -> str:
    """``c.json`` -> ``c.params.json``."""
    root, ext = os.path.splitext(complex_path)
    return f"{root}.params{ext or '.json'}"


def _thresholds(value: str) -> List[float]:
    try:
        values = [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got '{value}'")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("thresholds must be positive")
    return values


def _probability(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: '{value}'")
    if not 0.0 <= number <= 1.0:
        raise argparse.ArgumentTypeError(f"{number} is not in [0, 1]")
    return number


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: '{value}'")
    if number < 1:
        raise argparse.ArgumentTypeError(f"{number} must be at least 1")
    return number


def _resolve_seed(args: argparse.Namespace) -> int:
    seed = DEFAULT_SEED if args.seed is None else args.seed
    logger.info("Resolved seed: %d%s", seed,
                " (default)" if args.seed is None else "")
    return seed


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(
        prog='sgm',
        description='Simplicial Gaussian model toolkit: generate complexes, '
        'sample edge signals, infer parameters and run recovery '
        'experiments.')
    parser.add_argument('--version',
                        action='version',
                        version=f'%(prog)s {TOOL_VERSION}')
    parser.add_argument('--log-level',
                        default=None,
                        help='DEBUG, INFO, WARNING or ERROR '
                        '(default: [logging] level of config.ini)')
    parser.add_argument('--config-dir',
                        default=None,
                        help='directory holding config.ini')
    sub = parser.add_subparsers(dest='command',
                                metavar='COMMAND',
                                parser_class=CliArgumentParser)
    sub.required = True

    p = sub.add_parser('generate', help='draw a random complex and '
                       'ground-truth parameters')
    p.add_argument('--vertices', type=_positive_int, required=True)
    p.add_argument('--edge-prob', type=_probability, required=True)
    p.add_argument('--fill', type=_probability, required=True)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--out', required=True, help='complex JSON path; '
                   'parameters go to the sibling *.params.json')
    p.add_argument('--d-low', type=float, default=None)
    p.add_argument('--d-high', type=float, default=None)
    p.add_argument('--k-margin', type=float, default=None)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser('sample', help='draw edge observations')
    p.add_argument('--complex', required=True)
    p.add_argument('--params', required=True)
    p.add_argument('--samples', type=_positive_int, required=True)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser('infer', help='estimate parameters from samples')
    p.add_argument('--complex', required=True)
    p.add_argument('--data', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--tol', type=float, default=None,
                   help='relative objective tolerance')
    p.add_argument('--max-iters', type=_positive_int, default=None)
    p.add_argument('--thresholds', type=_thresholds, default=None)
    p.add_argument('--solver', choices=('block', 'joint'), default=None)
    p.add_argument('--method', choices=('newton', 'gradient'), default=None)
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser('eval', help='score an inference result')
    p.add_argument('--result', required=True)
    p.add_argument('--truth', required=True)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser('experiment', help='run a recovery sweep')
    p.add_argument('--config', required=True, dest='experiment_config')
    p.add_argument('--out-dir', required=True)
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser('plot-data', help='rebuild the summary CSV from an '
                       'experiment directory')
    p.add_argument('--report', required=True)
    p.add_argument('--out', required=True)
    p.set_defaults(handler=cmd_plot_data)
    return parser


def cmd_generate(args: argparse.Namespace, config: ConfigManager) -> None:
    seed = _resolve_seed(args)
    defaults = config.experiment
    d_range = (defaults['d_range'][0] if args.d_low is None else args.d_low,
               defaults['d_range'][1] if args.d_high is None else args.d_high)
    k_margin = defaults['k_margin'] if args.k_margin is None else args.k_margin

    complex_, flags = random_complex(args.vertices, args.edge_prob, args.fill,
                                     seed)
    truth = generate_ground_truth(complex_, flags, d_range, k_margin,
                                  derive_seed(seed, 'truth'))
    resolved = {
        'command': 'generate',
        'vertices': args.vertices,
        'edge_prob': args.edge_prob,
        'fill': args.fill,
        'seed': seed,
        'd_range': list(d_range),
        'k_margin': k_margin,
    }
    save_complex(args.out, complex_, flags, resolved)
    save_params(_params_path(args.out), truth, resolved)
    logger.info("Generated %d vertices, %d edges, %d candidate triangles "
                "(%d filled).", complex_.n_vertices, complex_.n_edges,
                complex_.n_triangles, int(np.sum(flags)))


def cmd_sample(args: argparse.Namespace, config: ConfigManager) -> None:
    seed = _resolve_seed(args)
    complex_, _ = load_complex(args.complex)
    params = load_params(args.params)
    omega = assemble_full_precision(complex_, params)
    draws = sample(omega, args.samples, seed).edge_block()
    save_samples_csv(args.out, draws, {
        'command': 'sample',
        'complex': args.complex,
        'params': args.params,
        'samples': args.samples,
        'seed': seed,
    })
    logger.info("Wrote %d edge samples to %s.", args.samples, args.out)


def cmd_infer(args: argparse.Namespace, config: ConfigManager) -> None:
    # inference is deterministic; the seed is logged for the run record
    logger.info("Resolved seed: none (deterministic solver)")
    values: Dict[str, Any] = dict(config.inference)
    overrides = {
        'objective_tolerance': args.tol,
        'max_outer_iterations': args.max_iters,
        'thresholds': args.thresholds,
        'solver': args.solver,
        'method': args.method,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    opts = InferenceOptions.from_mapping(values)

    complex_, _ = load_complex(args.complex)
    data = load_samples_csv(args.data)
    result = infer(data, complex_, opts)
    resolved = {'command': 'infer', 'complex': args.complex,
                'data': args.data}
    resolved.update(opts.to_dict())
    write_json(args.out, result.to_dict(), resolved)
    logger.info("k_hat = %.6g; %d sweeps; converged=%s.", result.k_hat,
                result.iterations, result.converged)


def cmd_eval(args: argparse.Namespace, config: ConfigManager) -> None:
    logger.info("Resolved seed: none (evaluation only)")
    result = load_result(args.result)
    truth = load_params(args.truth)
    estimate = (result['d_V_hat'], result['d_T_hat'], result['k_hat'])
    if len(result['d_T_hat']) != truth.d_t.shape[0]:
        raise DimensionMismatchError("result triangles", truth.d_t.shape[0],
                                     len(result['d_T_hat']))
    true_set = set(int(i) for i in truth.filled_triangles)
    active = result.get('active_triangles', {})
    metrics = {
        'nmse': nmse(estimate, truth),
        'f1': {
            threshold: f1_score(true_set, indices)
            for threshold, indices in sorted(active.items(),
                                             key=lambda kv: float(kv[0]))
        },
        'n_true_triangles': len(true_set),
    }
    write_json(args.out, metrics, {
        'command': 'eval',
        'result': args.result,
        'truth': args.truth,
    })
    logger.info("NMSE = %.6g.", metrics['nmse'])


def _load_experiment_config(path: str,
                            config: ConfigManager) -> ExperimentConfig:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Experiment config not found: {path}")
    data = load_yaml(path)
    if not data:
        raise ArtifactFormatError(path, "empty or not a mapping")
    defaults = dict(config.experiment)
    defaults['thresholds'] = config.inference['thresholds']
    defaults['inference'] = dict(config.inference)
    try:
        return ExperimentConfig.from_mapping(data, defaults)
    except (TypeError, ValueError) as exc:
        raise ArtifactFormatError(path, str(exc)) from exc


def cmd_experiment(args: argparse.Namespace, config: ConfigManager) -> None:
    experiment = _load_experiment_config(args.experiment_config, config)
    logger.info("Resolved seed: base_seed=%d", experiment.base_seed)
    report = run_experiment(experiment, threads=config.runtime['threads'])
    emit_plot_data(report, args.out_dir,
                   {'command': 'experiment',
                    'config_file': args.experiment_config})


def cmd_plot_data(args: argparse.Namespace, config: ConfigManager) -> None:
    logger.info("Resolved seed: none (report conversion)")
    defaults = dict(config.experiment)
    defaults['base_seed'] = 0
    report = load_report(args.report, ExperimentConfig.from_mapping(defaults))
    write_rows_csv(args.out, SUMMARY_HEADER, report.summary_rows(), {
        'command': 'plot-data',
        'report': args.report,
    })
    logger.info("Wrote %d summary rows to %s.", len(report.summary_rows()),
                args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the sgm command line; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(exc.usage)
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return EXIT_USAGE

    script_dir = os.path.dirname(os.path.abspath(__file__))
    config = ConfigManager(
        config_dir=args.config_dir or os.path.join(script_dir, 'config'))
    log_config = config.logging
    try:
        LoggerManager(log_dir=log_config['log_dir'],
                      level=args.log_level or log_config['level'],
                      file_logging=log_config['file_logging'])
    except ValueError as exc:
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return EXIT_USAGE
    setup_exception_hook()

    try:
        args.handler(args, config)
    except (SgmError, OSError, ValueError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        logger.debug("Traceback:", exc_info=True)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

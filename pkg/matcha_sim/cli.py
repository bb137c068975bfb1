"""
matcha-sim Command Line
Entry point for the matcha-sim console script
"""

import argparse
import logging
import sys
from typing import List, Optional

from matcha_sim._version import __version__
from matcha_sim.config import get_config, print_environment_help
from matcha_sim.constants import ExitCodes
from matcha_sim.experiments.commands import cmd_compare, cmd_decompose, cmd_sweep, cmd_train, handle_usage

LOG_LEVELS = ['debug', 'info', 'warning', 'error']


def _budget_list(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"budgets must be comma-separated numbers, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='matcha-sim',
        description='matcha-sim - Matching-decomposition sampling for communication-efficient decentralized SGD')
    parser.add_argument('--log-level', choices=LOG_LEVELS, default=None,
                        help='Set logging level (default: MATCHA_LOG_LEVEL or info)')
    parser.add_argument('--version', action='store_true',
                        help='Show version information and exit')

    # shared by the experiment subcommands
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--graph', type=str, metavar='FILE',
                        help='Graph JSON file {"m": int, "edges": [[i, j], ...]}')
    common.add_argument('--config', type=str, metavar='FILE',
                        help='Experiment config JSON (see docs/usage/config.md)')
    common.add_argument('--out', type=str, metavar='DIR',
                        help='Output directory (default: MATCHA_OUTPUT_DIR or config output_dir)')
    common.add_argument('--seed', type=int,
                        help='decompose/sweep: graph generator seed; train: replaces the run seed list')

    sub = parser.add_subparsers(dest='command')
    sub.add_parser('decompose', parents=[common], help='Write the matching decomposition of a graph')

    sweep = sub.add_parser('sweep', parents=[common], help='Spectral norm versus communication budget')
    sweep.add_argument('--budgets', type=_budget_list, metavar='C1,C2,...',
                       help='Budgets in (0, 1] (default: config budgets)')

    train = sub.add_parser('train', parents=[common], help='Run decentralized SGD for every policy/budget/seed')
    train.add_argument('--workers', type=int, help='Parallel runs (default: MATCHA_WORKERS)')

    compare = sub.add_parser('compare', help='Time-to-target summary of a training manifest')
    compare.add_argument('manifest', type=str, help='manifest.json written by train')
    compare.add_argument('--out', type=str, metavar='DIR', help='Output directory (default: manifest directory)')
    compare.add_argument('--target', type=float, help='Target loss of x_bar')

    sub.add_parser('usage', help='Print the usage guide')
    sub.add_parser('env', help='List environment variables')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.version:
        print(f"matcha-sim v{__version__}")
        return ExitCodes.SUCCESS

    level = (args.log_level or get_config().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )

    if args.command == 'decompose':
        return cmd_decompose(graph=args.graph, out=args.out, config=args.config, seed=args.seed)
    if args.command == 'sweep':
        return cmd_sweep(graph=args.graph, budgets=args.budgets, out=args.out, config=args.config,
                         seed=args.seed)
    if args.command == 'train':
        return cmd_train(config=args.config, graph=args.graph, seed=args.seed, out=args.out, workers=args.workers)
    if args.command == 'compare':
        return cmd_compare(manifest=args.manifest, out=args.out, target=args.target)
    if args.command == 'usage':
        return handle_usage()
    if args.command == 'env':
        print_environment_help()
        return ExitCodes.SUCCESS

    parser.print_help()
    return ExitCodes.INVALID_CONFIG


if __name__ == '__main__':
    sys.exit(main())

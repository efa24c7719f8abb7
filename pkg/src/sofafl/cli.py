"""Command line entry point: ``sofafl {run,baseline,ablate,compare,plotdata}``.

Exit codes: 0 success, 2 usage, 3 config, 4 data, 5 internal invariant failure.
"""

from __future__ import annotations

import argparse
import logging
import pathlib
import sys

from .baselines import run_hypcluster
from .config import ConfigError, RunConfig
from .data import DataError, Dataset, load_mnist, synthetic_dataset
from .experiments import run_ablation
from .orchestrator import InvariantError, run_sofa
from .outputs import (write_ablation_table, write_baseline_outputs, write_comparison,
                      write_loss_curves, write_sofa_outputs)

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4, 5

SYNTHETIC_SAMPLES = 2000
SYNTHETIC_DIM = 32


def _data_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=pathlib.Path, help="JSON config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", type=pathlib.Path, default=pathlib.Path("runs"), help="output directory")
    p.add_argument("--mnist-dir", type=pathlib.Path, help="directory with MNIST IDX files")
    p.add_argument("--synthetic", action="store_true", help="use a synthetic Gaussian dataset")
    p.add_argument("--full-mnist", action="store_true", help="use every MNIST sample, not a 4000 subset")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sofafl", description="Self-organising hierarchical FL simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    data = _data_flags()
    sub.add_parser("run", parents=[data], help="run SOFA-FL")
    base = sub.add_parser("baseline", parents=[data], help="run HypCluster (k=1 is FedAvg)")
    base.add_argument("--k", type=int, required=True)
    sub.add_parser("ablate", parents=[data], help="the four data-sharing configurations")
    cmp_ = sub.add_parser("compare", help="per-client side-by-side CSV of two reports")
    cmp_.add_argument("report_a", type=pathlib.Path)
    cmp_.add_argument("report_b", type=pathlib.Path)
    cmp_.add_argument("--out", type=pathlib.Path, default=pathlib.Path("compare.csv"))
    plot = sub.add_parser("plotdata", help="loss-curve CSV from a run directory")
    plot.add_argument("run_dir", type=pathlib.Path)
    plot.add_argument("--out", type=pathlib.Path, default=None)
    return parser


def _load_config(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def _load_data(args, config: RunConfig) -> Dataset:
    if args.synthetic:
        return synthetic_dataset(SYNTHETIC_SAMPLES, SYNTHETIC_DIM, 10, config.seed)
    if args.mnist_dir is None:
        raise DataError("no data source: pass --mnist-dir DIR (MNIST IDX files) or --synthetic")
    if not args.mnist_dir.is_dir():
        raise DataError(f"MNIST directory {args.mnist_dir} does not exist")
    # the subset is fixed data; the run seed varies partition, init and training
    return load_mnist(args.mnist_dir, subset=None if args.full_mnist else 4000)


def _dispatch(args) -> None:
    if args.command == "compare":
        print(write_comparison(args.report_a, args.report_b, args.out))
        return
    if args.command == "plotdata":
        print(write_loss_curves(args.run_dir, args.out or args.run_dir / "loss_curves.csv"))
        return

    config = _load_config(args)
    data = _load_data(args, config)
    if args.command == "run":
        print(write_sofa_outputs(args.out, run_sofa(config, data)))
    elif args.command == "baseline":
        if args.k < 1:
            raise ConfigError("k", "must be >= 1")
        result = run_hypcluster(config, args.k, data)
        print(write_baseline_outputs(args.out / result.label, result))
    elif args.command == "ablate":
        rows = run_ablation(config, data)
        for i, row in enumerate(rows):
            write_sofa_outputs(args.out / f"ablation_{i}", row.result, label=row.label)
        table = write_ablation_table(args.out / "ablation.csv", [r.summary() for r in rows])
        for r in rows:
            print(f"{r.label:40s} client_avg={r.client_average:.4f} total_avg={r.total_average:.4f}")
        print(table)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantError as exc:
        print(f"internal invariant failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: gen-data, encode-debug, train, evaluate, twin-study, report.
Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 numerical failure. The CSIFORGE_THREADS environment variable caps BLAS
worker threads (default 1, keeping runs deterministic).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _cap_threads() -> None:
    n = os.environ.get("CSIFORGE_THREADS", "1")
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, n)


_cap_threads()  # must run before numpy loads its BLAS

import numpy as np  # noqa: E402

from . import codebook as cb  # noqa: E402
from . import dataio  # noqa: E402
from .channel import generate_dataset  # noqa: E402
from .config import ConfigError, load_config  # noqa: E402
from .training import (  # noqa: E402
    DecoderScheme,
    NumericalError,
    TRAINED_SCHEMES,
    prepare_datasets,
    run_experiment,
    train,
    twin_transfer_experiment,
)

logger = logging.getLogger(__name__)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="flat JSON config file")
    p.add_argument(
        "--set",
        "-s",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-key config override (repeatable)",
    )
    p.add_argument("--out", type=Path, required=True, help="output directory")


def _echo_config(resolved: dict, config, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = dict(resolved)
    resolved["config_hash"] = config.config_hash()
    (out_dir / "resolved_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n"
    )


def cmd_gen_data(args) -> int:
    config, resolved = load_config(args.config, args.overrides)
    with dataio.OutputLock(args.out):
        _echo_config(resolved, config, args.out)
        train_ds, test_ds = prepare_datasets(config)
        dataio.save_dataset(train_ds, args.out / "train.csif")
        dataio.save_dataset(test_ds, args.out / "test.csif")
    print(f"wrote {config.n_train} train / {config.n_test} test samples to {args.out}")
    return EXIT_OK


def cmd_encode_debug(args) -> int:
    config, _ = load_config(args.config, args.overrides)
    ds = generate_dataset(
        config.scenario, 1, 1, seed=config.data_seed, nmse_db=config.nmse_db
    )
    est = ds.records[0].estimated_channels[0]
    k = config.scenario.n_subcarriers
    n_sb = (
        config.codebook.n_subbands
        if isinstance(config.codebook, cb.CodebookConfigTypeII)
        else 1
    )
    sb_map = cb.build_subband_map(k, n_sb)
    report = cb.encode(est, config.codebook, sb_map)
    packed = cb.pack_bits(report, config.codebook, config.scenario.n_tx)
    print(cb.describe_report(report, config.codebook, config.scenario.n_tx))
    print(f"packed: {packed.hex()}")
    return EXIT_OK


def cmd_train(args) -> int:
    config, resolved = load_config(args.config, args.overrides)
    if config.scheme not in TRAINED_SCHEMES:
        raise ConfigError(
            f"scheme {config.scheme.value} has no trainable decoder; pick one "
            f"of {[s.value for s in TRAINED_SCHEMES]}"
        )
    with dataio.OutputLock(args.out):
        _echo_config(resolved, config, args.out)
        if args.dataset is not None:
            train_ds = dataio.load_dataset(args.dataset)
        else:
            train_ds, _ = prepare_datasets(config)
        result = train(config, train_ds)
        dataio.save_checkpoint(result.net, args.out / "decoder.csiw")
        curve = "\n".join(
            f"{i},{loss!r},{rate!r}"
            for i, (loss, rate) in enumerate(
                zip(result.train_losses, result.val_rates)
            )
        )
        (args.out / "loss_curve.csv").write_text(
            "epoch,train_loss,val_rate\n" + curve + "\n"
        )
    print(
        f"trained {config.scheme.value} for {config.epochs} epoch(s); "
        f"best epoch {result.best_epoch}; checkpoint at {args.out / 'decoder.csiw'}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config, resolved = load_config(args.config, args.overrides)
    with dataio.OutputLock(args.out):
        _echo_config(resolved, config, args.out)
        report = run_experiment(config)
        dataio.emit_report(report, args.out)
    for row in report.rows:
        print(
            f"{row.method:18s} {row.codebook:14s} overhead={row.overhead_bits:3d} "
            f"rate={row.mean_rate:.4f} ±{row.ci95:.4f} (n={row.n})"
        )
    return EXIT_OK


def cmd_twin_study(args) -> int:
    config, resolved = load_config(args.config, args.overrides)
    if config.scheme not in TRAINED_SCHEMES:
        config = dataclasses.replace(config, scheme=DecoderScheme.TWO_STAGE_RATE)
    with dataio.OutputLock(args.out):
        _echo_config(resolved, config, args.out)
        report = twin_transfer_experiment(config)
        dataio.emit_report(report, args.out, stem="twin_study")
    for row in report.rows:
        print(
            f"{row.method:18s} rate={row.mean_rate:.4f} ±{row.ci95:.4f} (n={row.n})"
        )
    return EXIT_OK


def cmd_report(args) -> int:
    report = dataio.report_from_csv(Path(args.csv).read_text())
    out_dir = args.out if args.out else Path(args.csv).parent
    dataio.emit_report(report, out_dir, stem=Path(args.csv).stem)
    print(dataio.report_to_dat(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csiforge",
        description="Compressed-CSI feedback simulator and training harness",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate and persist train/test datasets")
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("encode-debug", help="print one decoded feedback report")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--set", "-s", dest="overrides", action="append", default=[])
    p.set_defaults(func=cmd_encode_debug)

    p = sub.add_parser("train", help="train a decoder and save a checkpoint")
    _add_common(p)
    p.add_argument("--dataset", type=Path, default=None, help="pre-generated .csif")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="train (if needed) and report sum rates")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("twin-study", help="train on degraded replicas, test on target")
    _add_common(p)
    p.set_defaults(func=cmd_twin_study)

    p = sub.add_parser("report", help="re-emit plot data from a report CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (dataio.DataFormatError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Command line front-end.

Subcommands cover the full workflow: corpus evaluation, password search,
per-digit function selection, PIN statistics, synthetic corpus generation,
network training, and serving the authentication API.
"""

from __future__ import annotations

import argparse
import json
import sys

from .capture import load_dataset, write_dataset
from .evaluation import (
    adapted_subsets,
    build_digit_table,
    dtw_adapted_system,
    dtw_baseline_system,
    normalized_matrices,
    pin_distribution,
    run_digit_table,
    search_passwords,
    select_functions,
    write_digit_csv,
    write_password_csv,
)
from .rnn import (
    NetworkConfig,
    PairSet,
    TrainConfig,
    build_pairs,
    init_network,
    load_checkpoint,
    pair_scorer,
    save_checkpoint,
    save_loss_csv,
    train,
)
from .synth import synthetic_dataset

SYSTEMS = ("dtw-baseline", "dtw-adapted", "blstm")


def _parse_digits(text: str) -> list[int] | None:
    if text == "all":
        return None
    digits = sorted({int(part) for part in text.split(",") if part != ""})
    if not digits or any(not 0 <= d <= 9 for d in digits):
        raise argparse.ArgumentTypeError(f"bad digit list {text!r}")
    return digits


def _add_data_arg(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="corpus root directory")
    p.add_argument("--dev-users", type=int, default=50,
                   help="first N users form the development split")


def _load(args) -> tuple:
    ds = load_dataset(args.data, dev_user_count=args.dev_users)
    return ds, normalized_matrices(ds)


def _build_system(args, ds, matrices):
    """Returns (system, subsets) for the requested scorer."""
    if args.system == "dtw-baseline":
        return dtw_baseline_system(), None
    if args.system == "dtw-adapted":
        subsets = adapted_subsets(
            ds, n_enrol=1, max_size=args.max_subset_size,
            matrices=matrices)
        return dtw_adapted_system(subsets), subsets
    from .evaluation import System  # local import keeps startup light

    if args.checkpoint is None:
        raise SystemExit("--checkpoint is required with --system blstm")
    params = load_checkpoint(args.checkpoint)
    return System.uniform("blstm", pair_scorer(params)), None


def _cmd_evaluate(args) -> int:
    ds, matrices = _load(args)
    system, subsets = _build_system(args, ds, matrices)
    report = run_digit_table(
        ds, system, args.enrol, matrices=matrices,
        subsets=subsets, digits=args.digits)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    if args.csv:
        write_digit_csv(report, args.csv)
    for digit, eer in zip(report.digits, report.per_digit_eer):
        print(f"digit {digit}: EER {eer:.2f}%")
    print(f"mean EER {report.mean_eer:.2f}%  ({args.system}, "
          f"{args.enrol}vs1) -> {args.out}")
    return 0


def _tables(args, ds, matrices, system):
    return {
        digit: build_digit_table(
            ds, system, digit, n_enrol=args.enrol, matrices=matrices)
        for digit in range(10)
    }


def _cmd_search(args) -> int:
    ds, matrices = _load(args)
    system, _ = _build_system(args, ds, matrices)
    tables = _tables(args, ds, matrices, system)
    best = search_passwords(tables, args.length, mode=args.mode)
    print(f"length {args.length} ({args.mode}): digits "
          f"{list(best.multiset)} EER {best.eer:.2f}% "
          f"[{best.evaluated} candidates evaluated]")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({
                "length": args.length,
                "mode": args.mode,
                "multiset": list(best.multiset),
                "eer": best.eer,
                "threshold": best.threshold,
                "evaluated": best.evaluated,
            }, fh, indent=2)
    return 0


def _cmd_select_functions(args) -> int:
    ds, matrices = _load(args)
    trace = select_functions(
        ds, args.digit, n_enrol=args.enrol, max_size=args.max_size,
        matrices=matrices)
    chosen = sorted(trace.best_subset)
    print(f"digit {args.digit}: functions {chosen} "
          f"(EER {trace.best_objective:.2f}%)")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(trace.to_json())
    return 0


def _cmd_pin_stats(args) -> int:
    ds, matrices = _load(args)
    system, _ = _build_system(args, ds, matrices)
    tables = _tables(args, ds, matrices, system)
    dist = pin_distribution(tables)
    print(f"4-digit passwords: median {dist.median:.2f}% "
          f"quartiles [{dist.q1:.2f}, {dist.q3:.2f}] "
          f"range [{dist.minimum:.2f}, {dist.maximum:.2f}]")
    if args.band:
        lo, hi = args.band
        print(f"band {lo}-{hi}%: {dist.band_count(lo, hi)} ordered passwords")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(dist.to_dict(), fh, indent=2)
    if args.csv:
        write_password_csv(
            (c for c in dist_to_cells(dist, args.enrol)), args.csv)
    return 0


def dist_to_cells(dist, n_enrol):
    from .evaluation import PasswordCell

    for multiset, eer, _weight in dist.entries:
        yield PasswordCell(n_enrol=n_enrol, length=len(multiset),
                           eer=eer, multiset=multiset)


def _cmd_synth(args) -> int:
    ds = synthetic_dataset(args.writers, seed=args.seed)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds)} samples for {args.writers} writers to {args.out}")
    return 0


def _cmd_train_rnn(args) -> int:
    ds = load_dataset(args.data, dev_user_count=args.dev_users)
    dev = ds.dev_split()
    matrices = normalized_matrices(dev)
    pairs = build_pairs(dev, matrices, seed=args.seed)
    if args.limit_pairs and args.limit_pairs < len(pairs):
        pairs = PairSet(pairs=pairs.pairs[: args.limit_pairs])
    config = NetworkConfig(hidden1=args.hidden1, hidden2=args.hidden2)
    params = init_network(args.seed, config)
    trained, curve = train(params, pairs, TrainConfig(
        learning_rate=args.lr, epochs=args.epochs,
        batch_size=args.batch_size, seed=args.seed))
    save_checkpoint(trained, args.out)
    if args.loss_csv:
        save_loss_csv(curve, args.loss_csv)
    print(f"trained {len(curve)} epochs on {len(pairs)} pairs; "
          f"loss {curve[0]:.4f} -> {curve[-1]:.4f}; saved {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, load_config

    app = create_app(load_config(args.config))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inkpass",
        description="touchscreen digit password verification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="per-digit EER table for one system")
    _add_data_arg(p)
    p.add_argument("--system", choices=SYSTEMS, default="dtw-baseline")
    p.add_argument("--enrol", type=int, default=1, choices=(1, 2, 3, 4))
    p.add_argument("--digits", type=_parse_digits, default="all",
                   help="'all' or a comma separated digit list")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="also write the per-digit table as CSV")
    p.add_argument("--checkpoint", help="network checkpoint (blstm system)")
    p.add_argument("--max-subset-size", type=int, default=8,
                   help="function-selection cap for dtw-adapted")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("search", help="best password of a given length")
    _add_data_arg(p)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--mode", choices=("exhaustive", "sffs"), default="exhaustive")
    p.add_argument("--system", choices=SYSTEMS, default="dtw-baseline")
    p.add_argument("--enrol", type=int, default=3, choices=(1, 2, 3, 4))
    p.add_argument("--checkpoint")
    p.add_argument("--max-subset-size", type=int, default=8)
    p.add_argument("--out", help="result JSON path")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("select-functions",
                       help="floating search over time functions for one digit")
    _add_data_arg(p)
    p.add_argument("--digit", type=int, required=True, choices=range(10))
    p.add_argument("--enrol", type=int, default=1, choices=(1, 2, 3, 4))
    p.add_argument("--max-size", type=int, default=21)
    p.add_argument("--out", help="selection trace JSON path")
    p.set_defaults(func=_cmd_select_functions)

    p = sub.add_parser("pin-stats", help="EER distribution over 4-digit PINs")
    _add_data_arg(p)
    p.add_argument("--system", choices=SYSTEMS, default="dtw-baseline")
    p.add_argument("--enrol", type=int, default=3, choices=(1, 2, 3, 4))
    p.add_argument("--checkpoint")
    p.add_argument("--max-subset-size", type=int, default=8)
    p.add_argument("--band", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--out", help="distribution JSON path")
    p.add_argument("--csv", help="per-password CSV path")
    p.set_defaults(func=_cmd_pin_stats)

    p = sub.add_parser("synth", help="generate a synthetic corpus on disk")
    p.add_argument("--out", required=True)
    p.add_argument("--writers", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train-rnn", help="train the pair network on the dev split")
    _add_data_arg(p)
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden1", type=int, default=21)
    p.add_argument("--hidden2", type=int, default=42)
    p.add_argument("--limit-pairs", type=int,
                   help="train on only the first N pairs (smoke runs)")
    p.add_argument("--loss-csv", help="write the epoch loss curve as CSV")
    p.set_defaults(func=_cmd_train_rnn)

    p = sub.add_parser("serve", help="run the authentication API")
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

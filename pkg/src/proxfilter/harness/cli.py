"""Command line interface: ``gen-data``, ``run`` and ``check``.

Every subcommand accepts ``--config FILE`` holding ``key = value`` lines named
after the long flags (``lambda = 0.2``, ``algo = ekf approx-ipm``). Flags given
on the command line override the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..optimizers import ALGORITHMS, SCHEDULES
from .checks import run_checks
from .data import ExperimentConfig, generate_data
from .experiment import run_experiment
from .io import SUMMARY_COLUMNS, fmt, read_key_values, write_dataset

log = logging.getLogger(__name__)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("linear", "sigmoid"), default="sigmoid")
    p.add_argument("--d", type=int, default=21, help="parameter dimension")
    p.add_argument("--n", type=int, default=2000, help="number of observations")
    p.add_argument("--lambda", dest="lam", type=float, default=0.2, help="noise variance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, help="key = value file with defaults for these flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxfilter", description="Incremental proximal methods as Kalman filters."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic dataset and its metadata sidecar")
    _add_data_flags(gen)
    gen.add_argument("--out", type=Path, required=True)

    r = sub.add_parser("run", help="run optimizers and write per-iteration CSV traces")
    _add_data_flags(r)
    r.add_argument("--algo", nargs="+", choices=ALGORITHMS, default=["ekf", "approx-ipm"])
    r.add_argument("--data", type=Path, help="dataset CSV; regenerated from the data flags if absent")
    r.add_argument("--iterations", type=int, help="default: one pass over the data")
    r.add_argument("--schedule", choices=SCHEDULES, default="sequential")
    r.add_argument("--out-dir", type=Path, default=Path("results"))
    r.add_argument("--q", type=float, help="enable a prediction step with drift covariance q*I")
    r.add_argument("--inner-max-iters", type=int, default=100)
    r.add_argument("--inner-grad-tol", type=float, default=1e-8)
    r.add_argument("--inner-stepsize", type=float, default=1.0)
    r.add_argument("--inner-backtrack", type=float, default=0.5)
    r.add_argument("--sgd-stepsize", type=float, default=0.1)
    r.add_argument("--sgd-decay", action="store_true", help="use stepsize/k instead of a constant")

    chk = sub.add_parser("check", help="verify the update identities; exit status 1 on failure")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--config", type=Path)
    return parser


def _convert(action: argparse.Action, raw: str):
    if isinstance(action, argparse._StoreTrueAction):
        low = raw.lower()
        if low not in _TRUE | _FALSE:
            raise ValueError(f"{action.dest}: expected a boolean, got {raw!r}")
        return low in _TRUE
    conv = action.type or str
    if action.nargs in ("+", "*"):
        values = [conv(v) for v in raw.replace(",", " ").split()]
        bad = [v for v in values if action.choices and v not in action.choices]
    else:
        values = conv(raw)
        bad = [values] if action.choices and values not in action.choices else []
    if bad:
        raise ValueError(f"{action.dest}: invalid choice {bad[0]!r}")
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    subparser = parser._subparsers._group_actions[0].choices[args.command]  # type: ignore[union-attr]
    by_name = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            by_name[opt.lstrip("-").replace("-", "_")] = action
    defaults = {}
    for key, raw in read_key_values(args.config).items():
        action = by_name.get(key)
        if action is None or action.dest in ("config", "help"):
            parser.error(f"{args.config}: unknown key {key!r}")
        try:
            defaults[action.dest] = _convert(action, raw)
        except (TypeError, ValueError) as err:
            parser.error(f"{args.config}: {err}")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        model=args.model,
        d=args.d,
        n=args.n,
        lam=args.lam,
        iterations=args.iterations,
        seed=args.seed,
        algorithms=tuple(args.algo),
        schedule=args.schedule,
        out_dir=args.out_dir,
        q=args.q,
        inner_max_iters=args.inner_max_iters,
        inner_grad_tol=args.inner_grad_tol,
        inner_stepsize=args.inner_stepsize,
        inner_backtrack=args.inner_backtrack,
        sgd_stepsize=args.sgd_stepsize,
        sgd_decay=args.sgd_decay,
        data_path=args.data,
    )


def cmd_gen_data(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig(model=args.model, d=args.d, n=args.n, lam=args.lam, seed=args.seed)
    data_ss = np.random.SeedSequence(cfg.seed).spawn(3)[0]
    ds = generate_data(cfg, np.random.default_rng(data_ss))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, args.out)
    log.info("wrote %d rows to %s", len(ds), args.out)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _experiment_config(args)
    result = run_experiment(cfg)
    print(",".join(SUMMARY_COLUMNS))
    for row in result.summary:
        print(",".join(fmt(v) for v in row))
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    ok = True
    for name, passed, detail in run_checks(args.seed):
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok &= passed
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = _apply_config(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "gen-data":
            return cmd_gen_data(args)
        if args.command == "run":
            return cmd_run(args)
        return cmd_check(args)
    except (OSError, ValueError) as err:
        print(f"proxfilter: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

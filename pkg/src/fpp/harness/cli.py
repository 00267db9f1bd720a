"""``fpp <experiment> --config FILE [--seed N] [--t LIST] [--out DIR] [--workers K]``.

Exit status: 0 when every seed succeeded, 2 when some seeds failed (details
in the run manifest), 1 when the configuration is invalid.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError
from .config import EXPERIMENTS, OUT_ENV, load_config
from .runner import run


def _t_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad t list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fpp", description="First-passage percolation hole experiments.",
        epilog=f"Default output directory: ${OUT_ENV}, else ./fpp-out.")
    sub = p.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("--config", required=False, help="TOML experiment file")
        s.add_argument("--seed", type=int, help="run this single seed only")
        s.add_argument("--t", type=_t_list, help="comma-separated time grid")
        s.add_argument("--out", help="output directory")
        s.add_argument("--workers", type=int, help="worker processes")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.experiment, overrides={
            "seed": args.seed, "t": args.t, "out": args.out, "workers": args.workers})
    except ConfigError as exc:
        print(f"fpp: config error: {exc}", file=sys.stderr)
        return 1
    man = run(cfg)
    ok = len(man.seeds) - len(man.failed)
    print(f"{cfg.experiment}: {ok}/{len(man.seeds)} seeds ok in {man.seconds:.1f}s; "
          f"outputs in {cfg.out_dir}")
    for s in man.seeds:
        if not s.ok:
            print(f"  seed {s.seed} failed: {s.error.splitlines()[0]}", file=sys.stderr)
    return man.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

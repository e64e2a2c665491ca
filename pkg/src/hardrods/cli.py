"""Command line: ``hardrods {lln,static-clt,euler,diffusive,oracle} --config PATH``.

Exit codes: 0 all verdicts pass, 1 a statistical verdict failed, 2 usage or
configuration error, 3 internal error.
"""
from __future__ import annotations

import argparse
import sys
import traceback

from .config import ConfigError, ExperimentConfig
from .dynamics import BufferError
from .ensemble import SupportError
from .experiments import RUNNERS, progress
from .stats import ReplicaError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hardrods", description="Hard-rod fluctuation experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in RUNNERS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="YAML experiment file")
        s.add_argument("--seed", type=_u64, help="override the master seed")
        s.add_argument("--epsilon", type=float, help="run at a single epsilon")
        s.add_argument("--replicas", type=_positive_int, help="override the replica count")
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=_positive_int, default=1, help="worker processes")
        s.add_argument("--center", choices=["empirical", "asymptotic"], help="centering of field samples")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config).override(
            seed=args.seed, epsilon=args.epsilon, replicas=args.replicas, out=args.out, center=args.center)
    except ConfigError as exc:
        print(f"hardrods: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = RUNNERS[args.command](cfg, threads=args.threads)
    except ReplicaError as exc:
        if isinstance(exc.__cause__, (SupportError, BufferError)):
            print(f"hardrods: {args.command}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        traceback.print_exc()
        return EXIT_INTERNAL
    except (SupportError, BufferError, ValueError) as exc:
        # geometric infeasibility or inconsistent parameters in the config
        print(f"hardrods: {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL
    paths = report.write(cfg["out"])
    for v in report.verdicts:
        progress(v.line())
    progress(f"wrote {', '.join(str(p) for p in paths)}")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line entry: convert checkpoints, verify converted weights."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .convert import ConversionError, convert
from .verify import VerificationError, verify


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fmnsed-convert",
        description="Convert torch SED checkpoints to FMNW and verify parity",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("convert", help="torch checkpoint -> FMNW container")
    p.add_argument("checkpoint")
    p.add_argument("model", help="model name, e.g. fmn10+TF:256")
    p.add_argument("out", help="output .fmnw path")
    p.add_argument("--report", help="write the conversion report JSON here")

    p = sub.add_parser("verify", help="compare source and toolkit probabilities")
    p.add_argument("checkpoint")
    p.add_argument("model")
    p.add_argument("fmnw")
    p.add_argument("--n-probe", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")

    args = parser.parse_args(argv)
    try:
        if args.cmd == "convert":
            report = convert(args.checkpoint, args.model, args.out)
        else:
            report = verify(args.checkpoint, args.model, args.fmnw,
                            n_probe_audio=args.n_probe, seed=args.seed)
    except (ConversionError, VerificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if args.report:
            Path(args.report).write_text(json.dumps(exc.report, indent=1) + "\n")
        return 1
    print(json.dumps(report, indent=1))
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=1) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit codes: 0 success, 2 config or usage error, 3 I/O error or malformed
vector file, 4 infeasible bit budget, 5 corrupt container.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import __version__
from .bitcode import BitstreamError
from .codec import HEADER_BYTES, Code, EncodedUpdate, decode_update, encode_update
from .experiments import ConfigError, load_config, run_experiment
from .io import FileFormatError, read_vector, write_container, write_vector
from .rd import InfeasibleBudget
from .updates import make_rng

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_BUDGET, EXIT_CORRUPT = 0, 2, 3, 4, 5

FIGURE_COMMANDS = {
    "rd-sweep": "rd_sweep",
    "vote": "vote",
    "train": "train",
    "compare": "compare",
    "ablate-rotation": "ablate_rotation",
    "ablate-normalization": "ablate_normalization",
    "rounding-compare": "rounding_compare",
}


def cmd_encode(args) -> int:
    u = read_vector(args.input)
    e = encode_update(u, args.step, make_rng(args.seed, "cli-encode"), args.code, args.quantizer)
    write_container(args.output, e)
    print(f"{e.d} elements, {len(e.payload)} payload bits, {len(e.to_bytes())} bytes", file=sys.stderr)
    return EXIT_OK


def cmd_decode(args) -> int:
    with open(args.input, "rb") as fh:
        data = fh.read()
    try:
        e = EncodedUpdate.from_bytes(data)
    except BitstreamError as exc:
        print(f"error: corrupt container header in {args.input}: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    if e.code is Code.RAW:
        print(f"error: {args.input} holds a {e.quantizer.name.lower()} baseline message, not a codec stream",
              file=sys.stderr)
        return EXIT_CORRUPT
    try:
        u = decode_update(e)
    except BitstreamError as exc:
        offset = HEADER_BYTES + (exc.bit_offset or 0) // 8
        print(f"error: corrupt payload in {args.input}: {exc}; file byte offset {offset}", file=sys.stderr)
        return EXIT_CORRUPT
    write_vector(args.output, u)
    return EXIT_OK


def cmd_experiment(args, experiment: Optional[str] = None) -> int:
    cfg = load_config(args.config, experiment)
    manifest = run_experiment(cfg, args.out)
    print(json.dumps(manifest["summary"], sort_keys=True, default=str))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdfl", description="Rate-distortion compression of federated updates.")
    p.add_argument("--version", action="version", version=f"rdfl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="quantize and entropy-code a float32 vector file")
    enc.add_argument("input")
    enc.add_argument("output")
    enc.add_argument("--step", type=float, required=True, help="quantization step")
    enc.add_argument("--quantizer", choices=("round", "stochastic", "dithered"), default="stochastic")
    enc.add_argument("--code", choices=("gamma", "delta"), default="gamma")
    enc.add_argument("--seed", type=int, default=0, help="seed for rounding draws and dither")
    enc.set_defaults(func=cmd_encode)

    dec = sub.add_parser("decode", help="decode a container to a float32 vector file")
    dec.add_argument("input")
    dec.add_argument("output")
    dec.set_defaults(func=cmd_decode)

    ex = sub.add_parser("experiment", help="run the experiment named in a YAML config")
    ex.add_argument("config")
    ex.add_argument("--out", help="output directory (overrides output_dir)")
    ex.set_defaults(func=cmd_experiment)

    for name, experiment in FIGURE_COMMANDS.items():
        sp = sub.add_parser(name, help=f"run the {experiment} pipeline from a YAML config")
        sp.add_argument("config")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.set_defaults(func=lambda a, e=experiment: cmd_experiment(a, e))
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleBudget as exc:
        print(f"infeasible budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BitstreamError as exc:
        print(f"error: corrupt container: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

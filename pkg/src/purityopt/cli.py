"""Batch command-line front end.

Three subcommands: `optimize` runs the rank heuristic and writes a JSON
report, `verify` evaluates the worst-case purity oracle for a fixed
encoder, `channels` lists the built-ins. Exit codes follow sysexits where
they apply: 0 success, 2 no usable optimization result, 64 usage error,
65 invalid input data.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .errors import (
    ParameterError,
    PurityOptError,
    SchemaError,
    ValidationError,
)
from .logdet import GAMMA_DEFAULT, GAMMA_PRESETS, HeuristicConfig, run_restarts
from .oracle import INPUT_MODELS, OracleConfig, worst_case_purity
from .zoo import (
    BUILTIN_CHANNELS,
    BUILTIN_ENCODERS,
    _fmt,
    _matrix_to_json,
    builtin_channel,
    builtin_encoder,
    load_channel,
    load_encoder,
)

SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_NO_RESULT = 2
EXIT_USAGE = 64
EXIT_DATA = 65


# ---------------------------------------------------------------------------
# builtin:<name>:<k=v,...> URIs and file paths


def parse_builtin_uri(text: str):
    """Split a builtin URI into (name, params); None when not a URI."""
    if not text.startswith("builtin:"):
        return None
    rest = text[len("builtin:"):]
    name, _, tail = rest.partition(":")
    if not name:
        raise ParameterError(f"empty builtin name in {text!r}")
    params = {}
    if tail:
        for item in tail.split(","):
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ParameterError(
                    f"bad parameter {item!r} in {text!r}; expected k=v"
                )
            try:
                params[key] = float(value)
            except ValueError:
                raise ParameterError(
                    f"parameter {key!r} in {text!r} is not a number"
                ) from None
    return name, params


def resolve_channel(text: str):
    parsed = parse_builtin_uri(text)
    if parsed is None:
        return load_channel(text)
    name, params = parsed
    return builtin_channel(name, **params)


def resolve_encoder(text: str):
    parsed = parse_builtin_uri(text)
    if parsed is None:
        return load_encoder(text)
    name, params = parsed
    extra = set(params) - {"alpha", "beta"}
    if extra:
        raise ParameterError(
            f"encoder {name!r} takes alpha/beta only, got {sorted(extra)}"
        )
    return builtin_encoder(name, **params)


def default_gamma(channel_text: str) -> float:
    parsed = parse_builtin_uri(channel_text)
    if parsed is not None and parsed[0] in GAMMA_PRESETS:
        return GAMMA_PRESETS[parsed[0]]
    return GAMMA_DEFAULT


# ---------------------------------------------------------------------------
# report serialization
#
# Floats are emitted with 17 significant digits so reports round-trip
# exactly; a handwritten emitter keeps the byte layout deterministic
# (insertion key order, fixed indentation) across platforms.


def _emit_json(value, out, indent=0):
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, item) in enumerate(value.items()):
            out.append(f'{pad}  "{key}": ')
            _emit_json(item, out, indent + 1)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        seq = list(value)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(seq):
            out.append(pad + "  ")
            _emit_json(item, out, indent + 1)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        if not np.isfinite(v):
            raise ValidationError(f"non-finite number {v!r} in report")
        out.append(_fmt(v))
    elif value is None:
        out.append("null")
    elif isinstance(value, str):
        out.append(json.dumps(value))
    else:
        raise ValidationError(f"cannot serialize {type(value).__name__} in report")


def report_to_json(report: dict) -> str:
    out = []
    _emit_json(report, out)
    out.append("\n")
    return "".join(out)


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise SchemaError(f"{path}: not a run report")
    version = str(doc["schema_version"])
    major = version.split(".", 1)[0]
    if major != SCHEMA_VERSION.split(".", 1)[0]:
        raise SchemaError(
            f"{path}: unsupported report schema {version!r} "
            f"(this tool reads {SCHEMA_VERSION})"
        )
    return doc


def _oracle_block(result) -> dict:
    return {
        "min_purity": result.min_purity,
        "argmin_params": [float(a) for a in result.argmin_params],
        "grid_min": result.grid_min,
        "kraus_check_dev": result.kraus_check_dev,
        "resolution": result.resolution,
    }


def _restart_block(seed: int, res) -> dict:
    block = {
        "seed": seed,
        "classification": res.classification,
        "certified": bool(res.certified),
        "lower_bound": bool(res.lower_bound),
        "initial_projected": bool(res.initial_projected),
        "epsilon": res.epsilon,
        "purity_claim": None if res.epsilon is None else 1.0 - res.epsilon,
        "iteration_count": len(res.trace),
        "trace": [
            {
                "index": rec.index,
                "epsilon": rec.epsilon,
                "objective_value": rec.objective_value,
                "solver_status": rec.solver_status,
                "choi_eigenvalues": [float(v) for v in rec.choi_eigenvalues],
            }
            for rec in res.trace
        ],
        "encoder": None if res.encoder is None else _matrix_to_json(res.encoder),
        "oracle_min_purity": res.worst_case_purity_oracle,
    }
    return block


def build_report(args, gamma: float, config: HeuristicConfig, results,
                 best_index, channel, wall_clock: float) -> dict:
    best = None
    if best_index is not None:
        res = results[best_index]
        oracle = worst_case_purity(
            channel, res.encoder, OracleConfig(input_model=args.mode)
        )
        best = {
            "restart_index": best_index,
            "epsilon": res.epsilon,
            "purity_claim": 1.0 - res.epsilon,
            "lower_bound": res.lower_bound,
            "oracle": _oracle_block(oracle),
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "purityopt", "version": __version__},
        "wall_clock_seconds": wall_clock,
        "input": {
            "channel": args.channel,
            "r": args.r,
            "mode": args.mode,
            "restarts": args.restarts,
            "jobs": args.jobs,
            "seeds": [config.seed + j for j in range(args.restarts)],
            "config": {
                "delta": config.delta,
                "gamma": gamma,
                "k": config.k,
                "max_iters": config.max_iters,
                "obj_tol": config.obj_tol,
                "rank_ratio_tol": config.rank_ratio_tol,
                "sdp_tol": config.sdp_tol,
                "backend": config.backend,
            },
        },
        "restarts": [
            _restart_block(config.seed + j, res)
            for j, res in enumerate(results)
        ],
        "best": best,
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_optimize(args) -> int:
    channel = resolve_channel(args.channel)
    gamma = args.gamma if args.gamma is not None else default_gamma(args.channel)
    config = HeuristicConfig(
        delta=args.delta,
        gamma=gamma,
        max_iters=args.max_iters,
        seed=args.seed,
        k=args.k,
    )
    start = time.monotonic()
    results, best_index = run_restarts(
        channel, args.r, args.mode, config, args.restarts, jobs=args.jobs
    )
    wall = time.monotonic() - start
    report = build_report(args, gamma, config, results, best_index,
                          channel, wall)
    text = report_to_json(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if best_index is None:
        print("no restart produced a certified encoder", file=sys.stderr)
        return EXIT_NO_RESULT
    claim = 1.0 - results[best_index].epsilon
    kind = "lower bound" if results[best_index].lower_bound else "local optimum"
    print(f"best worst-case purity ({kind}): {_fmt(claim)} "
          f"[restart {best_index}]", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    channel = resolve_channel(args.channel)
    encoder = resolve_encoder(args.encoder)
    cfg = OracleConfig(resolution=args.resolution, input_model=args.mode)
    result = worst_case_purity(channel, encoder, cfg)
    params = ", ".join(_fmt(a) for a in result.argmin_params)
    print(f"worst-case purity: {_fmt(result.min_purity)}")
    print(f"argmin parameters: [{params}]")
    print(f"grid minimum: {_fmt(result.grid_min)} at resolution {result.resolution}")
    print(f"cross-check: kraus evaluation deviates by {_fmt(result.kraus_check_dev)} (ok)")
    return EXIT_OK


def cmd_channels(args) -> int:
    print("channels (builtin:<name>:<p=value>)")
    for name, (_factory, doc) in BUILTIN_CHANNELS.items():
        print(f"  {name:<12} {doc}")
    print("encoders (builtin:<name>:<alpha=...,beta=...>)")
    for name in sorted(BUILTIN_ENCODERS):
        print(f"  {name:<12} {BUILTIN_ENCODERS[name]}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit 2; sysexits wants 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="purityopt",
                     description="design encoders maximizing worst-case "
                                 "output purity of a noisy channel")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    opt = sub.add_parser("optimize", help="run the rank heuristic")
    opt.add_argument("--channel", required=True,
                     help="channel JSON path or builtin:<name>:<p=...>")
    opt.add_argument("--r", type=int, required=True, help="codespace dimension")
    opt.add_argument("--mode", choices=INPUT_MODELS, default="real_qubit")
    opt.add_argument("--delta", type=float, default=0.01,
                     help="log-det smoothing (default 0.01)")
    opt.add_argument("--gamma", type=float, default=None,
                     help="purity-vs-rank weight (default: channel preset)")
    opt.add_argument("--k", type=float, default=None,
                     help="override the spectral shift")
    opt.add_argument("--max-iters", type=int, default=500)
    opt.add_argument("--restarts", type=int, default=1)
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--jobs", type=int, default=1)
    opt.add_argument("--out", default=None, help="report path (default stdout)")
    opt.set_defaults(func=cmd_optimize)

    ver = sub.add_parser("verify", help="evaluate the purity oracle")
    ver.add_argument("--channel", required=True)
    ver.add_argument("--encoder", required=True,
                     help="encoder JSON path or builtin:<name>:<alpha=...>")
    ver.add_argument("--mode", choices=INPUT_MODELS, default="real_qubit")
    ver.add_argument("--resolution", type=int, default=720)
    ver.set_defaults(func=cmd_verify)

    lst = sub.add_parser("channels", help="list built-in channels and encoders")
    lst.set_defaults(func=cmd_channels)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"purityopt: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SchemaError as exc:
        print(f"purityopt: bad input file: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"purityopt: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ParameterError as exc:
        print(f"purityopt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PurityOptError as exc:
        print(f"purityopt: {exc}", file=sys.stderr)
        return EXIT_NO_RESULT


if __name__ == "__main__":
    sys.exit(main())

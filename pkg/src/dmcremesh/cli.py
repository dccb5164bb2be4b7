"""Command-line entry point: remesh, encode, decode, eval, stats.

Every flag can also be set through an environment variable named
``DMCREMESH_<FLAG>`` (upper case, dashes as underscores); flags win.
Structured output is one JSON object per line on stdout, diagnostics go to
stderr. Exit codes: 0 ok, 1 runtime or I/O failure, 2 invalid usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from pathlib import Path

from . import codec
from .errors import ConfigError, DMCRemeshError, LeakDetected
from .io import FORMATS, load_mesh, save_mesh
from .mesh import normalize_to_unit_cube
from .metrics import DEFAULT_SAMPLES, DEFAULT_TAU, evaluate_meshes
from .pipeline import STAGES, RemeshConfig, remesh

ENV_PREFIX = "DMCREMESH_"
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _env(name: str, default, cast):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"invalid value {raw!r} for {ENV_PREFIX}{name.upper()}") from None


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(raw)


def _add_remesh_flags(p: argparse.ArgumentParser) -> None:
    d = RemeshConfig()
    g = p.add_argument_group("remesh options")
    g.add_argument("--resolution", type=int, default=_env("resolution", d.resolution, int),
                   help="cells per axis, power of two in [32, 1024] (default: %(default)s)")
    g.add_argument("--epsilon", type=float, default=_env("epsilon", d.epsilon_h, float),
                   help="dilation radius in units of the grid spacing h = 2/R (default: %(default)s)")
    g.add_argument("--iters", type=int, default=_env("iters", d.iters, int),
                   help="bisection iterations per crossing edge (default: %(default)s)")
    g.add_argument("--refine", action=argparse.BooleanOptionalAction, default=_env("refine", d.refine, _bool),
                   help="nudge dual vertices onto occupancy changes (default: %(default)s)")
    g.add_argument("--mode", choices=("linf", "l2"), type=str.lower, default=_env("mode", d.mode, str.lower),
                   help="distance used for the envelope (default: %(default)s)")
    g.add_argument("--placement", choices=("qef", "centroid"), default=_env("placement", d.placement, str),
                   help="dual vertex placement (default: %(default)s)")
    g.add_argument("--threads", type=int, default=_env("threads", d.threads, int),
                   help="worker threads, 0 = all cores (default: %(default)s)")
    g.add_argument("--seed", type=int, default=_env("seed", d.seed, int),
                   help="random seed recorded with the run and used for sampling (default: %(default)s)")
    g.add_argument("--padding", type=float, default=_env("padding", d.padding, float),
                   help="margin left around the normalized mesh (default: %(default)s)")


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("evaluation options")
    g.add_argument("--n", type=int, default=_env("n", DEFAULT_SAMPLES, int),
                   help="surface samples per mesh (default: %(default)s)")
    g.add_argument("--tau", type=float, default=_env("tau", DEFAULT_TAU, float),
                   help="F1 distance threshold in normalized units (default: %(default)s)")
    if not any(a.dest == "seed" for a in p._actions):
        g.add_argument("--seed", type=int, default=_env("seed", 0, int),
                       help="sampling seed (default: %(default)s)")
    g.add_argument("--sharp", action=argparse.BooleanOptionalAction, default=_env("sharp", True, _bool),
                   help="also compute F1 on sharp-edge samples (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmcremesh", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("remesh", help="remesh a triangle mesh into a watertight DMC mesh")
    p.add_argument("input", help="OBJ, PLY or STL mesh")
    p.add_argument("output", help="output path (.obj, .ply or .tpmc)")
    _add_remesh_flags(p)

    p = sub.add_parser("encode", help="encode a mesh (remeshing it) or re-encode a .tpmc stream")
    p.add_argument("input", help="mesh file or .tpmc stream")
    p.add_argument("output", help="output .tpmc path")
    _add_remesh_flags(p)

    p = sub.add_parser("decode", help="decode a .tpmc stream into a mesh (or a canonical .tpmc)")
    p.add_argument("input", help=".tpmc stream")
    p.add_argument("output", help="output path (.obj, .ply or .tpmc)")
    p.add_argument("--normalized", action="store_true",
                   help="write grid-domain coordinates instead of source units")

    p = sub.add_parser("eval", help="compare a predicted mesh against a reference")
    p.add_argument("pred", help="predicted mesh")
    p.add_argument("ref", help="reference mesh; both are normalized by its transform")
    _add_eval_flags(p)
    p.add_argument("--text", action="store_true", help="print a key=value record instead of JSON")
    p.add_argument("--out", help="also append the JSON record to this file")

    p = sub.add_parser("stats", help="remesh and evaluate every mesh in a directory")
    p.add_argument("directory", help="directory scanned (non-recursively) for mesh files")
    _add_remesh_flags(p)
    _add_eval_flags(p)
    return parser


def _config(args) -> RemeshConfig:
    return RemeshConfig(resolution=args.resolution, epsilon_h=args.epsilon, iters=args.iters,
                        refine=args.refine, mode=args.mode, threads=args.threads, seed=args.seed,
                        padding=args.padding, placement=args.placement).validate()


def _emit(record: dict) -> None:
    sys.stdout.write(json.dumps(record) + "\n")
    sys.stdout.flush()


def _timing_line(timings: dict) -> str:
    return "  ".join(f"{k} {timings[k]:.3f}s" for k in STAGES if k in timings)


def _suffix(path) -> str:
    return Path(path).suffix.lower().lstrip(".")


def _check_output(path) -> str:
    ext = _suffix(path)
    if ext not in ("obj", "ply", "tpmc"):
        raise ConfigError(f"unsupported output format {Path(path).name!r}; use .obj, .ply or .tpmc")
    return ext


def cmd_remesh(args) -> int:
    config = _config(args)
    ext = _check_output(args.output)
    mesh = load_mesh(args.input)
    res = remesh(mesh, config, compress=ext == "tpmc")
    if ext == "tpmc":
        Path(args.output).write_bytes(res.encoded)
    else:
        save_mesh(res.dmc.to_source_units(), args.output)
    rec = {"command": "remesh", "input": str(args.input), "output": str(args.output),
           "resolution": config.resolution, "epsilon_h": config.epsilon_h, "mode": config.mode,
           "seed": config.seed}
    rec.update(res.summary())
    print(_timing_line(res.timings), file=sys.stderr)
    _emit(rec)
    return EXIT_OK


def cmd_encode(args) -> int:
    if _suffix(args.output) != "tpmc":
        raise ConfigError("encode writes a .tpmc stream")
    t0 = time.perf_counter()
    if _suffix(args.input) == "tpmc":
        data = codec.encode(codec.decode(Path(args.input).read_bytes()))
        records = None
    else:
        config = _config(args)
        res = remesh(load_mesh(args.input), config, compress=True)
        data, records = res.encoded, res.dmc.n_records
    Path(args.output).write_bytes(data)
    _emit({"command": "encode", "input": str(args.input), "output": str(args.output), "bytes": len(data),
           "records": records, "seconds": round(time.perf_counter() - t0, 6)})
    return EXIT_OK


def cmd_decode(args) -> int:
    ext = _check_output(args.output)
    t0 = time.perf_counter()
    data = Path(args.input).read_bytes()
    dmc = codec.decode_mesh(data)
    seconds = time.perf_counter() - t0
    if ext == "tpmc":
        Path(args.output).write_bytes(codec.encode(dmc))
    else:
        save_mesh(dmc.assembled if args.normalized else dmc.to_source_units(), args.output)
    m = dmc.assembled
    _emit({"command": "decode", "input": str(args.input), "output": str(args.output), "records": dmc.n_records,
           "vertices": m.n_vertices, "faces": m.n_triangles, "seconds": round(seconds, 6)})
    return EXIT_OK


def _evaluate(pred, ref, args) -> dict:
    if args.n <= 0:
        raise ConfigError("--n must be positive")
    if not args.tau > 0:
        raise ConfigError("--tau must be positive")
    ref_n, transform = normalize_to_unit_cube(ref, 0.1)
    pred_n = pred.transformed(transform)
    report = evaluate_meshes(pred_n, ref_n, args.n, args.tau, args.seed, args.sharp)
    if args.sharp and report.f1_sharp is None:
        print("note: reference has no sharp edges, f1_sharp omitted", file=sys.stderr)
    return report


def cmd_eval(args) -> int:
    pred = load_mesh(args.pred)
    ref = load_mesh(args.ref)
    report = _evaluate(pred, ref, args)
    if args.text:
        sys.stdout.write(report.to_text() + "\n")
    else:
        _emit(report.to_record())
    if args.out:
        with open(args.out, "a") as fh:
            fh.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_stats(args) -> int:
    config = _config(args)
    directory = Path(args.directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    failed = 0
    for path in sorted(p for p in directory.iterdir() if _suffix(p) in FORMATS):
        rec = {"command": "stats", "input": str(path)}
        try:
            src = load_mesh(path)
            res = remesh(src, config)
            rec.update(res.summary())
            rec.update(_evaluate(res.dmc.to_source_units(), src, args).to_record())
        except DMCRemeshError as exc:
            failed += 1
            rec["error"] = f"{type(exc).__name__}: {exc}"
        _emit(rec)
    return EXIT_RUNTIME if failed else EXIT_OK


COMMANDS = {"remesh": cmd_remesh, "encode": cmd_encode, "decode": cmd_decode, "eval": cmd_eval,
            "stats": cmd_stats}


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", LeakDetected)
        try:
            code = COMMANDS[args.command](args)
        except ConfigError as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            code = EXIT_USAGE
        except (DMCRemeshError, OSError, ValueError) as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            code = EXIT_RUNTIME
        for w in caught:
            if issubclass(w.category, LeakDetected):
                print(f"warning: LeakDetected: {w.message}", file=sys.stderr)
            else:
                warnings.showwarning(w.message, w.category, w.filename, w.lineno)
    return code


if __name__ == "__main__":
    sys.exit(main())

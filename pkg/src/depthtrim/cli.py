"""Command-line interface: ``depthtrim <command> ...``.

Every command that takes ``--out`` writes its files plus one
``manifest.json`` into that directory.  Exit status is 0 on success, 1 on a
runtime error and 2 on a usage error; warnings never change it.
"""

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import check_points
from .depth import DEPTHS, GridSpec, SmoothedDepth, depth_field, make_depth
from .simulation import SimConfig, consistency_sweep, export_figure_data, resolve_threads, run_simulation
from .trimmed_mean import DepthTrimmedMean

log = logging.getLogger("depthtrim")

MANIFEST_NAME = "manifest.json"
BUNDLED_CONFIGS = Path(__file__).parent / "configs"
BUNDLED_DATA = Path(__file__).parent / "data"


class CliError(Exception):
    """User-facing failure reported as ``error: <message>`` with exit status 1."""


# ---------------------------------------------------------------- input parsing

def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path):
    """Read a numeric CSV into an ``(n, d)`` array.

    The first row is taken as a header when any of its fields is not a
    number.  Blank lines are skipped; malformed rows raise ``CliError`` naming
    the line.
    """
    rows, width = [], None
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            fields = [f.strip() for f in fields]
            if not fields or all(f == "" for f in fields):
                continue
            if not rows and width is None and not all(_is_number(f) for f in fields):
                width = len(fields)
                continue
            try:
                values = [float(f) for f in fields]
            except ValueError:
                bad = next(f for f in fields if not _is_number(f))
                raise CliError(f"{path}: line {lineno}: not a number: {bad!r}") from None
            if not np.all(np.isfinite(values)):
                raise CliError(f"{path}: line {lineno}: non-finite value")
            if width is not None and len(values) != width:
                raise CliError(f"{path}: line {lineno}: expected {width} fields, got {len(values)}")
            width = len(values)
            rows.append(values)
    if not rows:
        raise CliError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def parse_vector(text, name):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    return np.array(values)


def parse_grid(lower, upper, shape, dim):
    lo, hi = parse_vector(lower, "--lower"), parse_vector(upper, "--upper")
    sh = [int(v) for v in parse_vector(shape, "--shape")]
    if len(sh) == 1:
        sh = sh * dim
    if not len(lo) == len(hi) == len(sh) == dim:
        raise CliError(f"dimension mismatch: grid needs {dim} coordinates per corner")
    try:
        return GridSpec(lo, hi, sh)
    except ValueError as exc:
        raise CliError(str(exc)) from None


# ---------------------------------------------------------------- manifest

def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, command, params, inputs, outputs, base_seed, wall_time):
    """Write the single ``manifest.json`` of ``out_dir``.

    ``params`` are the flags that determine the outputs; their hash is the
    manifest's config hash.  Only ``wall_time`` differs between reruns.
    """
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    manifest = {
        "command": command,
        "params": params,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "inputs": {str(p): _digest(p) for p in inputs},
        "base_seed": base_seed,
        "version": __version__,
        "wall_time": wall_time,
        "outputs": sorted(Path(p).name for p in outputs),
    }
    path = Path(out_dir) / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- commands

def _fitted_depth(X, args):
    params = {}
    if args.method is not None:
        params["method"] = args.method
    try:
        kind = make_depth(args.depth, **params)
    except (TypeError, ValueError) as exc:
        raise CliError(f"--method {args.method!r} is not valid for {args.depth} depth") from exc
    if "random_state" in kind.get_params():
        kind.set_params(random_state=args.seed)
    if args.smoothed:
        return SmoothedDepth(kind, args.surrogate_size, args.seed).fit(X)
    return kind.fit(X)


def cmd_depth(args):
    X = load_csv(args.input)
    depth = _fitted_depth(X, args)
    params = _params(args, "input", "depth", "method", "smoothed", "surrogate_size", "seed",
                     "query", "lower", "upper", "shape")
    outputs = []
    if args.query is not None:
        Q = check_points(np.array([parse_vector(q, "--query") for q in args.query]), X.shape[1])
        values = depth.score_samples(Q)
        for v in values:
            print(repr(float(v)))
        if args.out:
            out = _out_dir(args.out)
            outputs.append(out / "depths.csv")
            header = [f"x{j + 1}" for j in range(X.shape[1])] + ["depth"]
            _write_rows(outputs[-1], header, (list(q) + [v] for q, v in zip(Q, values)))
    if args.lower is not None:
        if not args.out:
            raise CliError("--out is required with a grid")
        grid = parse_grid(args.lower, args.upper, args.shape, X.shape[1])
        field = depth_field(depth, grid)
        out = _out_dir(args.out)
        outputs.append(out / "depth_grid.csv")
        header = [f"x{j + 1}" for j in range(X.shape[1])] + ["depth"]
        _write_rows(outputs[-1], header,
                    (list(p) + [v] for p, v in zip(grid.nodes(), field.ravel())))
    if args.query is None and args.lower is None:
        raise CliError("give --query points or a grid (--lower/--upper/--shape)")
    return outputs, [Path(args.input)], params


def cmd_estimate(args):
    X = load_csv(args.input)
    if args.a > 1:
        warnings.warn(f"a = {args.a} exceeds the maximal depth; the trimmed region is empty")
    est = DepthTrimmedMean(
        depth=make_depth(args.depth), a=args.a, method=args.method, mc_size=args.mc_size,
        surrogate_size=args.surrogate_size, resolution=args.resolution, strict=args.strict,
        random_state=args.seed,
    ).fit(X)
    result = est.result_.to_dict()
    result["depth"] = args.depth
    result["location"] = result["normalized_vector"] if args.normalized else result["vector"]
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    outputs = []
    if args.out:
        out = _out_dir(args.out)
        outputs.append(out / "estimate.json")
        outputs[-1].write_text(text, encoding="utf-8")
    params = _params(args, "input", "depth", "a", "method", "mc_size", "surrogate_size",
                     "resolution", "strict", "normalized", "seed")
    return outputs, [Path(args.input)], params


def resolve_config(name):
    """A config path, or the name of a bundled config such as ``figure1a``."""
    path = Path(name)
    if path.exists():
        return path
    bundled = BUNDLED_CONFIGS / (path.name if path.suffix == ".json" else f"{path.name}.json")
    if bundled.exists():
        return bundled
    available = ", ".join(sorted(p.stem for p in BUNDLED_CONFIGS.glob("*.json")))
    raise CliError(f"no config file {name!r} (bundled: {available})")


def cmd_simulate(args):
    args.config = resolve_config(args.config)
    config = SimConfig.from_json(args.config)
    if args.reps is not None:
        config = config.replace(reps=args.reps)
    result = run_simulation(config, threads=args.threads)
    if result.partial:
        for i, err in sorted(result.failures.items()):
            log.warning("replicate %d failed: %s", i, err)
    outputs = export_figure_data(result, _out_dir(args.out), args.grid_resolution)
    params = {"config": config.to_dict(), "grid_resolution": args.grid_resolution}
    print(json.dumps({"mean": [float(v) for v in result.mean], "completed": len(result.completed),
                      "reps": config.reps}))
    return outputs, [Path(args.config)], params, config.base_seed


def cmd_contour(args):
    X = load_csv(args.input)
    if X.shape[1] != 2:
        raise CliError(f"dimension mismatch: contours need 2-d data, got d = {X.shape[1]}")
    from .level_geometry import contour_marching_squares

    depth = _fitted_depth(X, args)
    grid = parse_grid(args.lower, args.upper, args.shape, 2)
    field = depth_field(depth, grid)
    rows = []
    for a in args.a:
        cs = contour_marching_squares(field, a, grid)
        if cs.truncated:
            warnings.warn(f"level {a}: {len(cs.truncated)} component(s) cut by the grid boundary")
        rows.extend((float(a), cid, vid, x, y) for cid, vid, x, y in cs.rows())
    out = _out_dir(args.out)
    path = out / "contours.csv"
    _write_rows(path, ["level", "component_id", "vertex_index", "x", "y"], rows)
    params = _params(args, "input", "depth", "method", "smoothed", "surrogate_size", "seed", "a",
                     "lower", "upper", "shape")
    return [path], [Path(args.input)], params


def cmd_hadamard_check(args):
    from .hadamard import RadialFixture, fd_convergence_check

    fx = RadialFixture(half_width=args.half_width)
    eps = [float(e) for e in parse_vector(args.eps, "--eps")]
    band = None if args.band is None else tuple(parse_vector(args.band, "--band"))
    try:
        table = fd_convergence_check(fx.depth, fx.f, fx.pair, args.a, eps, fx.box, args.resolution,
                                     mu=fx.mu, K_dirs=args.K, band=band)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out = _out_dir(args.out)
    csv_path = out / "fd_table.csv"
    table.to_csv(csv_path)
    scale = float(np.linalg.norm(table.derivative))
    summary = {
        "derivative": [float(v) for v in table.derivative],
        "extrapolated": [float(v) for v in table.extrapolated()],
        "extrapolation_error": table.extrapolation_error(),
        "scale": scale,
        "errors": [float(e) for e in table.errors],
    }
    json_path = out / "hadamard_summary.json"
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for e, qx, qy, err in table.rows():
        print(f"eps={e!r} quotient=({qx!r}, {qy!r}) err={err!r}")
    params = _params(args, "a", "eps", "band", "resolution", "K", "half_width")
    return [csv_path, json_path], [], params


def cmd_consistency(args):
    n_list = [int(v) for v in parse_vector(args.n, "--n")]
    table = consistency_sweep(args.depth, args.a, n_list, args.reps, args.seed,
                              mc_size=args.mc_size, surrogate_size=args.surrogate_size,
                              threads=args.threads)
    out = _out_dir(args.out)
    path = out / "consistency.csv"
    table.to_csv(path)
    for n, med, iqr in table.rows():
        print(f"n={n} median_error={med!r} iqr={iqr!r}")
    params = _params(args, "depth", "a", "n", "reps", "seed", "mc_size", "surrogate_size")
    return [path], [], params


def _params(args, *names):
    return {name: getattr(args, name) for name in names}


# ---------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(prog="depthtrim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $DEPTHTRIM_THREADS or 1); never changes results")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def depth_options(p, method=True):
        p.add_argument("input", help="CSV of n x d numbers, optional header row")
        p.add_argument("--depth", default="tukey", choices=sorted(DEPTHS))
        if method:
            p.add_argument("--method", default=None, help="depth algorithm, e.g. exact, mc, enumerate")
            p.add_argument("--smoothed", action="store_true", help="depth of the KDE of the sample")
        p.add_argument("--surrogate-size", type=int, default=10_000)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("depth", help="depth of query points or on a grid")
    depth_options(p)
    p.add_argument("--query", action="append", help="comma-separated point; repeatable")
    p.add_argument("--lower", help="grid lower corner, comma-separated")
    p.add_argument("--upper", help="grid upper corner, comma-separated")
    p.add_argument("--shape", default="101", help="nodes per axis (one value or one per axis)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("estimate", help="depth-trimmed mean of a sample")
    depth_options(p, method=False)
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--method", default="mc", choices=["mc", "grid"])
    p.add_argument("--mc-size", type=int, default=20_000)
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--strict", action="store_true", help="retain depth > a instead of >= a")
    p.add_argument("--normalized", action="store_true", help="report the mass-normalised location")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="simulate R_n from a JSON config")
    p.add_argument("config", help="JSON config path or bundled name, e.g. figure1a")
    p.add_argument("--out", required=True)
    p.add_argument("--reps", type=int, default=None, help="override the replicate count")
    p.add_argument("--grid-resolution", type=int, default=64)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("contour", help="depth contours of a 2-d sample")
    depth_options(p)
    p.add_argument("--a", type=float, action="append", required=True, help="level; repeatable")
    p.add_argument("--lower", required=True)
    p.add_argument("--upper", required=True)
    p.add_argument("--shape", default="201")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("hadamard-check", help="finite-difference check of the derivative of T")
    p.add_argument("--a", type=float, default=0.6)
    p.add_argument("--eps", default="0.1,0.05,0.025")
    p.add_argument("--band", default="0.3,0.9", help="a1,a2")
    p.add_argument("--resolution", type=int, default=1000)
    p.add_argument("--K", type=int, default=256, help="directions of the surface quadrature")
    p.add_argument("--half-width", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hadamard_check)

    p = sub.add_parser("consistency", help="median error of the normalised estimate versus n")
    p.add_argument("--depth", default="tukey", choices=sorted(DEPTHS))
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--n", default="200,2000")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mc-size", type=int, default=5_000)
    p.add_argument("--surrogate-size", type=int, default=5_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_consistency)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.threads = resolve_threads(args.threads)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = lambda message, *_args, **_kw: log.warning("%s", message)
            returned = args.func(args)
        outputs, inputs, params = returned[:3]
        base_seed = returned[3] if len(returned) > 3 else getattr(args, "seed", None)
        out = getattr(args, "out", None)
        if out:
            write_manifest(_out_dir(out), args.command, params, inputs, outputs, base_seed,
                           time.perf_counter() - t0)
    except (CliError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

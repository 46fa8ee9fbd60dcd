"""Command-line front end: estimate, surface, oracle, sample, heightfield."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import io as mio
from . import oracles
from .lsq import RadiusSchedule, RankDeficientSchedule, estimate_minkowski_many
from .shapes import Box, CutBox, Polytope, RoundedBox, Shell
from .spatial import ObservationWindow, avg_nn_distance, grid_intersect_shape
from .surface import (
    estimate_surface_scalar_diff,
    estimate_surface_tensor,
    surface_area_from_trace,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("minktensor")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("run options")
    g.add_argument("--seed", type=int, default=0, help="base seed; rendition i uses seed+i")
    g.add_argument("--renditions", type=int, default=10)
    g.add_argument("--threads", type=int, default=1, help="workers for nearest-neighbour queries (-1: all cores)")
    g.add_argument("--json-out", type=Path, help="write the result document here instead of stdout")
    g.add_argument("-v", "--verbose", action="store_true")


def _input(p: argparse.ArgumentParser):
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--format", choices=mio.POINT_FORMATS, default="csv")
    p.add_argument("--min-points", type=int, default=1, help="reject inputs with fewer points")


def _schedule_flags(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, default=50, help="number of radii")
    p.add_argument("--r1", type=float, help="smallest radius (default: mean nearest-neighbour distance)")
    ex = p.add_mutually_exclusive_group()
    ex.add_argument("--rmax", type=float, help="largest radius R_n")
    ex.add_argument("--window", type=_floats, help="observation window a1,b1,a2,b2[,a3,b3]")
    p.add_argument("--a", type=float, help="random grid spacing (default: mean nearest-neighbour distance)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minktensor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="least-squares estimation of Phi_d..Phi_0")
    _input(p)
    _common(p)
    p.add_argument("--r", type=int, default=0)
    p.add_argument("--s", type=int, default=0)
    _schedule_flags(p)
    p.add_argument("--rotate", action=argparse.BooleanOptionalAction, default=True,
                   help="randomly rotate the grid")
    p.add_argument("--dump-voronoi-series", type=Path, help="write per-rendition Voronoi series (JSON lines)")

    p = sub.add_parser("surface", help="direct small-radius surface tensor estimate")
    _input(p)
    _common(p)
    p.add_argument("--r", type=int, default=0)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--eps", type=float, help="radius (default: 4x mean nearest-neighbour distance)")
    p.add_argument("--a", type=float, help="grid spacing (default: mean nearest-neighbour distance)")
    p.add_argument("--rotate", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--allow-difference", action="store_true",
                   help="permit the expensive s=0 difference estimator (needs a <= eps^2)")

    p = sub.add_parser("oracle", help="exact reference values")
    _common(p)
    osub = p.add_subparsers(dest="shape", required=True)
    o = osub.add_parser("box")
    o.add_argument("--sides", type=_floats, required=True)
    o.add_argument("--center", type=_floats)
    o.add_argument("--r", type=int, default=0)
    o.add_argument("--s", type=int, default=0)
    o = osub.add_parser("shell")
    o.add_argument("--rho", type=_floats, required=True)
    o.add_argument("--d", type=int, default=2)
    o.add_argument("--k", type=int)
    o.add_argument("--r", type=int, default=0)
    o.add_argument("--s", type=int, default=0)
    o = osub.add_parser("cut-box")
    o.add_argument("--inner", type=_floats, required=True)
    o.add_argument("--outer", type=_floats, required=True)
    o.add_argument("--r", type=int, default=0)
    o.add_argument("--s", type=int, default=0)
    o = osub.add_parser("rounded-box")
    o.add_argument("--sides", type=_floats, required=True)
    o.add_argument("--r0", type=float, required=True)
    o = osub.add_parser("beta-ev")
    o.add_argument("--d", type=int, required=True)
    o.add_argument("--l", type=int, required=True)
    o.add_argument("--beta", type=float, required=True)
    o.add_argument("--k", type=int, help="intrinsic volume index (default d-1)")
    o = osub.add_parser("beta-tensor")
    o.add_argument("--d", type=int, required=True)
    o.add_argument("--k", type=int, required=True)
    o.add_argument("--l", type=int, required=True)
    o.add_argument("--beta", type=float, required=True)
    o.add_argument("--s", type=int, required=True)
    o = osub.add_parser("beta-volume-mc")
    o.add_argument("--d", type=int, required=True)
    o.add_argument("--l", type=int, required=True)
    o.add_argument("--beta", type=float, required=True)
    o.add_argument("--samples", type=int, default=10_000)

    p = sub.add_parser("sample", help="write lattice-sampled shapes or beta-polytope clouds")
    _common(p)
    p.add_argument("shape", choices=["box", "shell", "cut-box", "rounded-box", "beta"])
    p.add_argument("--out", type=Path, required=True, help="CSV file for the points")
    p.add_argument("--spacing", type=float, required=True, help="lattice spacing")
    p.add_argument("--sides", type=_floats)
    p.add_argument("--rho", type=_floats)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--inner", type=_floats)
    p.add_argument("--outer", type=_floats)
    p.add_argument("--r0", type=float)
    p.add_argument("--l", type=int)
    p.add_argument("--beta", type=float)

    p = sub.add_parser("heightfield", help="surface tensors of a height map")
    _common(p)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--pitch", type=float, required=True, help="lateral pixel pitch")
    p.add_argument("--height-scale", type=float, default=1.0, help="factor applied to stored heights")
    _schedule_flags(p)
    p.add_argument("--rotate", action=argparse.BooleanOptionalAction, default=True)
    return parser


# ---------------------------------------------------------------------------
# commands


def _window(args):
    return None if args.window is None else ObservationWindow.from_flat(args.window)


def run_estimate(args) -> dict:
    cloud = mio.load_points(args.input, args.format, args.min_points)
    sched = RadiusSchedule.for_cloud(
        cloud, n=args.n, rmax=args.rmax, window=_window(args), spacing=args.a, r1=args.r1,
        renditions=args.renditions, seed=args.seed, rotate=args.rotate,
    )
    sink = None
    dump = None
    if args.dump_voronoi_series:
        dump = open(args.dump_voronoi_series, "w")

        def sink(series):
            for ser in series.values():
                dump.write(json.dumps(ser.to_dict()) + "\n")
    try:
        res = estimate_minkowski_many(cloud, [(args.r, args.s)], sched, workers=args.threads, series_sink=sink)
    finally:
        if dump:
            dump.close()
    return {"n_points": len(cloud), "dim": cloud.dim,
            "minkowski": res[(args.r, args.s)].to_dict()}


def run_surface(args) -> dict:
    cloud = mio.load_points(args.input, args.format, args.min_points)
    av = avg_nn_distance(cloud)
    eps = args.eps if args.eps is not None else 4 * av
    a = args.a if args.a is not None else av
    if args.s == 0:
        if not args.allow_difference:
            raise UsageError("s=0 uses the difference estimator; pass --allow-difference to accept its cost")
        est = estimate_surface_scalar_diff(cloud, args.r, eps, a, seed=args.seed, rotate=args.rotate,
                                           renditions=args.renditions, workers=args.threads)
    else:
        est = estimate_surface_tensor(cloud, args.r, args.s, eps, a, seed=args.seed, rotate=args.rotate,
                                      renditions=args.renditions, workers=args.threads)
    return {"n_points": len(cloud), "dim": cloud.dim, "surface": est.to_dict()}


def run_oracle(args) -> dict:
    if args.shape == "box":
        return {"minkowski": oracles.box_minkowski(args.sides, args.r, args.s, args.center).to_dict()}
    if args.shape == "shell":
        if len(args.rho) != 2:
            raise UsageError("--rho needs two values rho1,rho2")
        if args.k is None:
            ts = oracles.shell_minkowski_set(args.d, *args.rho, args.r, args.s)
            return {"minkowski": ts.to_dict()}
        t = oracles.shell_minkowski(args.d, *args.rho, args.k, args.r, args.s)
        return {"k": args.k, "tensor": t.to_dict()}
    if args.shape == "cut-box":
        return {"k": 1, "tensor": oracles.cut_box_surface(args.inner, args.outer, args.r, args.s).to_dict()}
    if args.shape == "rounded-box":
        if len(args.sides) != 2:
            raise UsageError("--sides needs two values")
        out = {}
        for which in oracles.ROUNDED_BOX_FUNCTIONALS:
            k, r, s = which
            out[f"phi_{k}^{r},{s}"] = oracles.rounded_box_2d(*args.sides, args.r0, which).to_dict()
        return out
    if args.shape == "beta-ev":
        k = args.d - 1 if args.k is None else args.k
        return {"k": k, "expected_intrinsic_volume": oracles.beta_expected_intrinsic(args.d, k, args.l, args.beta)}
    if args.shape == "beta-tensor":
        t = oracles.beta_expected_tensor(args.d, args.k, args.l, args.beta, args.s)
        return {"k": args.k, "tensor": t.to_dict()}
    if args.shape == "beta-volume-mc":
        mean, se = oracles.beta_expected_volume_mc(args.d, args.l, args.beta, args.samples, args.seed)
        return {"expected_volume": mean, "stderr": se, "samples": args.samples}
    raise UsageError(f"unknown oracle {args.shape}")


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"sample {args.shape} needs --{', --'.join(m.replace('_', '-') for m in missing)}")


def run_sample(args) -> dict:
    extra = {}
    if args.shape == "box":
        _need(args, "sides")
        shape = Box(tuple(args.sides))
    elif args.shape == "shell":
        _need(args, "rho")
        shape = Shell(args.rho[0], args.rho[1], args.d)
    elif args.shape == "cut-box":
        _need(args, "inner", "outer")
        shape = CutBox(tuple(args.inner), tuple(args.outer))
    elif args.shape == "rounded-box":
        _need(args, "sides", "r0")
        shape = RoundedBox(tuple(args.sides), args.r0)
    else:
        _need(args, "l", "beta")
        spec = oracles.BetaPolytopeSpec(args.d, args.l, args.beta, args.seed)
        verts = oracles.sample_beta_polytope(spec)
        shape = Polytope(verts)
        extra["vertices"] = verts.tolist()
    cloud = grid_intersect_shape(shape, args.spacing)
    mio.save_points(args.out, cloud)
    return {"shape": args.shape, "out": str(args.out), "n_points": len(cloud), "dim": cloud.dim, **extra}


def run_heightfield(args) -> dict:
    hf = mio.load_heightfield(args.input, args.pitch, args.height_scale)
    cloud = hf.to_cloud()
    sched = RadiusSchedule.for_cloud(
        cloud, n=args.n, rmax=args.rmax, window=_window(args), spacing=args.a, r1=args.r1,
        renditions=args.renditions, seed=args.seed, rotate=args.rotate,
    )
    res = estimate_minkowski_many(cloud, [(0, 0), (0, 2)], sched, workers=args.threads)
    phi02 = res[(0, 2)]
    return {
        "heightfield": hf.meta(),
        "surface_area": res[(0, 0)][2][()],
        "surface_area_from_trace": surface_area_from_trace(phi02[2]),
        "minkowski_0_0": res[(0, 0)].to_dict(),
        "minkowski_0_2": phi02.to_dict(),
    }


COMMANDS = {
    "estimate": run_estimate,
    "surface": run_surface,
    "oracle": run_oracle,
    "sample": run_sample,
    "heightfield": run_heightfield,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    if getattr(args, "renditions", 1) < 1:
        parser.error("--renditions must be positive")
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            results = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except mio.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (RankDeficientSchedule, oracles.QuadratureError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    digest = None
    inp = getattr(args, "input", None)
    if inp is not None:
        digest = mio.file_digest(inp)
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
              if k not in ("json_out", "verbose")}
    doc = mio.ResultDocument(
        command=[parser.prog, *argv], parameters=params, results=results,
        input_digest=digest, seed=getattr(args, "seed", None),
        wall_clock_s=round(time.perf_counter() - t0, 3),
    )
    text = doc.to_json()
    if args.json_out:
        args.json_out.write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

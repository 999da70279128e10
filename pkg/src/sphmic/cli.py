"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .beamforming import (
    beam_pattern,
    delay_sum_weights,
    directivity_index,
    dolph_chebyshev_weights,
    load_weights,
    null_constrained_weights,
    regular_weights,
    steer_weights,
)
from .harmonics import Direction, EulerAngles
from .radial import optimal_dual_alpha
from .sampling import (
    build_matrix_B,
    condition_numbers,
    load_geometry,
    optimize_positions,
    save_geometry,
    solve_sampling_operator,
    white_noise_gain,
)
from .simulation import SPEED_OF_SOUND, load_scenario, run_chain

EXIT_INPUT = 2
EXIT_NUMERIC = 3

REPORT_SCHEMAS = {
    "conditioning": "sphmic.conditioning/1",
    "simulate": "sphmic.simulate/1",
    "optimize": "sphmic.optimize/1",
}
PATTERN_COLUMNS = ["theta", "phi", "re", "im", "magnitude_db"]


class InputError(ValueError):
    pass


# --------------------------------------------------------------------------
# Argument parsing helpers
# --------------------------------------------------------------------------


def parse_angle(text: str) -> float:
    """Radians by default; a ``deg`` suffix marks degrees."""
    text = text.strip()
    try:
        if text.endswith("deg"):
            return math.radians(float(text[:-3]))
        if text.endswith("rad"):
            text = text[:-3]
        return float(text)
    except ValueError:
        raise InputError(f"invalid angle {text!r}") from None


def parse_angles(text: str, count: int) -> list[float]:
    parts = text.split(",")
    if len(parts) != count:
        raise InputError(f"expected {count} comma-separated angles, got {text!r}")
    return [parse_angle(p) for p in parts]


def parse_direction(text: str) -> Direction:
    return Direction(*parse_angles(text, 2))


def parse_range(text: str) -> np.ndarray:
    """``lo:hi:steps`` into a linearly spaced grid (``steps`` points)."""
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise InputError(f"grid must look like lo:hi:steps, got {text!r}") from None
    if steps < 1:
        raise InputError("grid is empty")
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo <= 0 or hi < lo:
        raise InputError(f"invalid grid bounds in {text!r}")
    return np.linspace(lo, hi, steps)


def wavenumbers(args) -> np.ndarray:
    if getattr(args, "kgrid", None) is not None:
        return parse_range(args.kgrid)
    if getattr(args, "freq", None) is not None:
        return 2 * np.pi * parse_range(args.freq) / args.speed_of_sound
    raise InputError("one of --kgrid or --freq is required")


def flag(x):
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf" if x < 0 else "nan"


def _emit(text: str, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(report: dict, out):
    _emit(json.dumps(report, indent=2) + "\n", out)


def design_weights(args, geom=None, k=None):
    """Weights from ``--weights`` or a named ``--design`` plus modifiers."""
    if args.weights:
        w = load_weights(args.weights)
    else:
        if args.order is None:
            raise InputError("--order is required with --design")
        look = parse_direction(args.look)
        N = args.order
        if args.design == "regular":
            w = regular_weights(N, look)
        elif args.design == "dolph":
            w = dolph_chebyshev_weights(N, look, 10 ** (args.sidelobe_db / 20.0))
        elif args.design == "delay-sum":
            if geom is None or k is None:
                raise InputError("delay-sum design needs a geometry and a wavenumber")
            w = delay_sum_weights(N, look, geom, k)
        else:
            raise InputError(f"unknown design {args.design!r}")
    if args.null:
        w = null_constrained_weights(w, [parse_direction(s) for s in args.null])
    if args.steer:
        w = steer_weights(w, EulerAngles(*parse_angles(args.steer, 3)))
    return w


def _add_design_args(p, with_order=True):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--weights", help="weight file (JSON)")
    g.add_argument("--design", choices=["regular", "dolph", "delay-sum"])
    if with_order:
        p.add_argument("--order", "-N", type=int)
    p.add_argument("--look", default="0,0", help="theta,phi (radians or NNdeg)")
    p.add_argument("--sidelobe-db", type=float, default=30.0,
                   help="Dolph-Chebyshev sidelobe attenuation in dB")
    p.add_argument("--null", action="append", default=[], metavar="THETA,PHI")
    p.add_argument("--steer", metavar="ALPHA,BETA,GAMMA")


def _add_kgrid_args(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--kgrid", help="wavenumbers lo:hi:steps (rad/m)")
    g.add_argument("--freq", help="frequencies lo:hi:steps (Hz)")
    p.add_argument("--speed-of-sound", type=float, default=SPEED_OF_SOUND)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_conditioning(args) -> int:
    t0 = time.perf_counter()
    geom = load_geometry(args.geometry)
    ks = wavenumbers(args)
    conds = condition_numbers(geom, args.order, ks)
    report = {
        "schema": REPORT_SCHEMAS["conditioning"],
        "inputs": {"geometry": str(args.geometry), "order": args.order, "M": geom.M,
                   "boundary": geom.boundary.tag},
        "rows": [
            {"k": float(k), "kr": float(k * geom.r.max()), "condition_number": flag(c)}
            for k, c in zip(ks, conds)
        ],
        "worst": flag(conds.max()),
        "timing_s": time.perf_counter() - t0,
    }
    _dump(report, args.out)
    return 0


def cmd_beampattern(args) -> int:
    geom = load_geometry(args.geometry) if args.geometry else None
    w = design_weights(args, geom, args.k)
    n_theta, n_phi = args.resolution
    if n_theta < 1 or n_phi < 1:
        raise InputError("grid resolution must be positive")
    th = np.linspace(0.0, np.pi, n_theta)
    ph = np.arange(n_phi) * (2 * np.pi / n_phi)
    T, P = np.meshgrid(th, ph, indexing="ij")
    bp = beam_pattern(w, T.ravel(), P.ravel())
    db = bp.magnitude_db()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PATTERN_COLUMNS)
    for t, p, v, m in zip(bp.theta, bp.phi, bp.values, db):
        writer.writerow([repr(float(t)), repr(float(p)), repr(float(v.real)),
                         repr(float(v.imag)), repr(float(m))])
    _emit(buf.getvalue(), args.out)
    return 0


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    geom = load_geometry(args.geometry)
    sc = load_scenario(args.scenario)
    N = args.order
    w = design_weights(args, geom, sc.k)
    res = run_chain(sc, geom, N, w, args.reg)
    report = {
        "schema": REPORT_SCHEMAS["simulate"],
        "inputs": {"scenario": str(args.scenario), "geometry": str(args.geometry),
                   "order": N, "reg": args.reg, "k": sc.k,
                   "n_sim": res.extras["n_sim"], "seed": sc.rng_seed,
                   "noise_std": sc.noise_std},
        **res.to_dict(),
        "directivity_index_db": flag(directivity_index(w)) if w.look is not None else "nan",
        "timing_s": time.perf_counter() - t0,
    }
    _dump(report, args.out)
    return 0


def cmd_optimize(args) -> int:
    t0 = time.perf_counter()
    geom = load_geometry(args.geometry)
    ks = wavenumbers(args)
    moveable = range(geom.M) if args.moveable is None else args.moveable
    bounds = None
    if args.radius_bounds:
        lo, hi = (float(x) for x in args.radius_bounds.split(","))
        bounds = (lo, hi)
    best, hist = optimize_positions(
        geom, args.order, ks, moveable, iters=args.budget, rng_seed=args.seed,
        radius_bounds=bounds,
    )
    if args.out_geometry:
        save_geometry(best, args.out_geometry)
    report = {
        "schema": REPORT_SCHEMAS["optimize"],
        "inputs": {"geometry": str(args.geometry), "order": args.order,
                   "budget": args.budget, "seed": args.seed,
                   "k": [float(k) for k in ks]},
        "objective_before": flag(hist["initial"]),
        "objective_after": flag(hist["final"]),
        "evaluations": hist["evaluations"],
        "geometry": best.to_dict(),
        "timing_s": time.perf_counter() - t0,
    }
    _dump(report, args.out)
    return 0


def cmd_dual_alpha(args) -> int:
    kr = parse_range(args.kr_band)
    alphas = None
    if args.alphas:
        alphas = parse_range(args.alphas)
        if alphas.max() >= 1:
            raise InputError("alphas must lie in (0, 1)")
    best, alphas, scores = optimal_dual_alpha(args.order, kr, alphas)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha", "worst_min_abs_bn"])
    for a, s in zip(alphas, scores):
        writer.writerow([repr(float(a)), repr(float(s))])
    _emit(buf.getvalue(), args.out)
    print(f"best alpha: {best:.6g}", file=sys.stderr)
    return 0


def cmd_wng(args) -> int:
    geom = load_geometry(args.geometry)
    ks = wavenumbers(args)
    rows = []
    for k in ks:
        w = design_weights(args, geom, k)
        op = solve_sampling_operator(build_matrix_B(geom, args.order, k), args.reg)
        rows.append({"k": float(k), "wng_db": flag(white_noise_gain(op, w, reference=args.reference))})
    _dump({"schema": "sphmic.wng/1", "rows": rows}, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphmic", description="Spherical microphone array design and analysis."
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("conditioning", help="condition number of B over frequency")
    p.add_argument("geometry")
    p.add_argument("--order", "-N", type=int, required=True)
    _add_kgrid_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_conditioning)

    p = sub.add_parser("beampattern", help="sample a beam pattern to CSV")
    _add_design_args(p)
    p.add_argument("--resolution", type=int, nargs=2, default=[91, 180],
                   metavar=("N_THETA", "N_PHI"))
    p.add_argument("--geometry", help="geometry file (delay-sum design)")
    p.add_argument("--k", type=float, help="wavenumber (delay-sum design)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_beampattern)

    p = sub.add_parser("simulate", help="run the plane-wave chain end to end")
    p.add_argument("scenario")
    p.add_argument("geometry")
    _add_design_args(p, with_order=False)
    p.add_argument("--order", "-N", type=int, required=True)
    p.add_argument("--reg", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="optimize microphone positions")
    p.add_argument("geometry")
    p.add_argument("--order", "-N", type=int, required=True)
    _add_kgrid_args(p)
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--moveable", type=int, nargs="*")
    p.add_argument("--radius-bounds", metavar="LO,HI")
    p.add_argument("--out", help="report file")
    p.add_argument("--out-geometry", help="write the optimized geometry here")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("dual-alpha", help="dual-sphere radius ratio sweep")
    p.add_argument("--order", "-N", type=int, required=True)
    p.add_argument("--kr-band", required=True, help="lo:hi:steps")
    p.add_argument("--alphas", help="lo:hi:steps (default 0.5:0.95:91)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dual_alpha)

    p = sub.add_parser("wng", help="white-noise gain over frequency")
    p.add_argument("geometry")
    _add_design_args(p, with_order=False)
    p.add_argument("--order", "-N", type=int, required=True)
    _add_kgrid_args(p)
    p.add_argument("--reg", type=float, default=0.0)
    p.add_argument("--reference", choices=["array", "free_field"], default="array")
    p.add_argument("--out")
    p.set_defaults(func=cmd_wng)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except np.linalg.LinAlgError as exc:
        print(f"sphmic: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"sphmic: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

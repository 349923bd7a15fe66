"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 map-level
precondition violation.  Complex numbers on the command line are "re,im"
(or a bare real); map files use [re, im] pairs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__
from .errors import (
    ConditioningError,
    CriticalOrbitError,
    DegenerateKernelError,
    DivergenceError,
    InvalidMapError,
    PoleError,
    PreconditionError,
    RootFindingError,
)
from .kernels import GAMMA, KINDS, Kernel, KernelCombination, kernel_eval
from .rational_map import (
    RationalMap,
    critical_data,
    normalize_to_standard,
    orbit_cocycle,
    preimages,
    random_standard_map,
)
from .ruelle import (
    annulus_grid,
    annulus_probes,
    apply_pointwise,
    apply_pointwise_iterated,
    iterate_combination,
    l1_contraction_check,
)
from .series import (
    SeriesQuery,
    _make_report,
    _modified_terms,
    modified_series_eval,
    mobius_transform_identity,
    rs_truncated,
    summability_report,
    verify_cor9,
    verify_prop6,
)
from .stability import build_linear_system, stability_report

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_PRECONDITION = 0, 1, 2, 3

ESCAPE_RADIUS = 1e6
ESCAPE_CAP = 500

# the normalized Chebyshev-conjugate map, used when a suite runs without --map
DEFAULT_FIXTURE = RationalMap.from_coefficients([0, -2, 3])

SUITE_TOLERANCES = {"lemma4": 1e-8, "prop6": 1e-8, "cor9": 1e-6, "contraction": None, "mobius": 1e-9}


class InputError(Exception):
    pass


def max_workers() -> int:
    env = os.environ.get("RUELLE_KIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"RUELLE_KIT_THREADS must be an integer, got {env!r}")
    return min(8, os.cpu_count() or 1)


def parse_complex(text: str) -> complex:
    parts = [p.strip() for p in str(text).split(",")]
    try:
        vals = [float(Fraction(p)) for p in parts]
        if len(vals) in (1, 2):
            return complex(*vals)
    except (ValueError, ZeroDivisionError):
        pass
    raise InputError(f"cannot parse complex number {text!r}; expected 're,im' (parts may be rationals such as -1/3)")


def parse_indices(text: str | None) -> list | None:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise InputError(f"indices must be comma-separated integers, got {text!r}")


def _pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def load_map(path: str | None) -> tuple:
    """(map, spec dict, normalizing transform or None)."""
    if path is None:
        raise InputError("--map FILE is required for this command")
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read map file: {exc}")
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed map JSON: {exc}")
    try:
        rmap = RationalMap.from_json(spec)
    except (TypeError, ValueError, IndexError, KeyError) as exc:
        raise InputError(f"invalid map spec: {exc}")
    h = None
    if "fixed_points" in spec:
        triple = [p if isinstance(p, str) or p is None else complex(*p) for p in spec["fixed_points"]]
        rmap, h = normalize_to_standard(rmap, triple)
    return rmap, spec, h


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------

def emit(args, payload, rows=None, header=None):
    if args.format == "csv":
        if rows is None:
            raise InputError(f"command {args.command!r} has no CSV form; use --format json")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    rmap, spec, h = load_map(args.map)
    crit = critical_data(rmap)
    probes = annulus_grid(20)
    out = {
        "map": rmap.to_json(),
        "degree": rmap.degree,
        "normalized": rmap.standard_normalized,
        "polynomial": rmap.is_polynomial,
        "conjugacy": h.to_json() if h is not None else None,
        "critical": crit.to_json(),
        "decomposition_residual": crit.decomposition_residual(rmap, probes),
    }
    rows = [(i, *_pair(c), *_pair(b), *_pair(d))
            for i, (c, b, d) in enumerate(zip(crit.points, crit.residues, crit.values))]
    emit(args, out, rows, ["index", "c_re", "c_im", "b_re", "b_im", "d_re", "d_im"])
    return EXIT_OK


def cmd_summability(args) -> int:
    rmap, _, _ = load_map(args.map)
    report = summability_report(rmap, parse_complex(args.point), args.order)
    if args.format == "csv":
        sys.stdout.write(report.absolute.to_csv())
    else:
        emit(args, report.to_json())
    return EXIT_OK


def cmd_ruelle_apply(args) -> int:
    rmap, _, _ = load_map(args.map)
    base, z = parse_complex(args.base), parse_complex(args.at)
    crit = critical_data(rmap)
    f = KernelCombination.single(args.kernel, base)
    closed = iterate_combination(rmap, f, args.power, crit)[-1]
    value_closed = closed(z)
    k = Kernel(args.kernel, base)
    value_pointwise = apply_pointwise_iterated(rmap, lambda y: kernel_eval(k, y), z, args.power)
    out = {
        "kernel": args.kernel,
        "base": _pair(base),
        "power": args.power,
        "at": _pair(z),
        "combination": closed.to_json(),
        "closed_form": _pair(value_closed),
        "pointwise": _pair(value_pointwise),
        "difference": abs(value_closed - value_pointwise),
    }
    emit(args, out)
    return EXIT_OK


def cmd_series(args) -> int:
    rmap, _, _ = load_map(args.map)
    a, x, z = parse_complex(args.point), parse_complex(args.x), parse_complex(args.at)
    q = SeriesQuery(a, x, args.order, args.kernel)
    if args.format == "csv":
        _, terms, _ = _modified_terms(rmap, a, x, args.order, z, args.kernel)
        sys.stdout.write(_make_report("modified", terms).to_csv())
        return EXIT_OK
    mod = modified_series_eval(rmap, q, z)
    back = rs_truncated(rmap, q, z)
    cor = verify_cor9(rmap, a, x, z, args.order, kind=args.kernel)
    out = {
        "point": _pair(a), "x": _pair(x), "at": _pair(z), "N": args.order, "kernel": args.kernel,
        "modified": {"value": _pair(mod.value), "tail": mod.tail,
                     "l1_tail_per_M": mod.l1_tail_per_M, "flags": list(mod.flags)},
        "backward": _pair(back),
        "relation_residual": cor.residual,
    }
    emit(args, out)
    return EXIT_OK


def cmd_stability(args) -> int:
    rmap, spec, _ = load_map(args.map)
    indices = parse_indices(args.indices)
    crit = critical_data(rmap)
    if indices is None:
        indices = list(range(len(crit.points)))
    flags = spec.get("in_julia")
    in_julia = [bool(flags[i]) for i in indices] if isinstance(flags, list) else None
    report = stability_report(rmap, indices, args.order, args.tol or 1e-8, in_julia=in_julia)
    emit(args, report.to_json())
    return EXIT_OK


def cmd_rank(args) -> int:
    rmap, _, _ = load_map(args.map)
    indices = parse_indices(args.indices)
    if indices is None:
        indices = list(range(len(critical_data(rmap).points)))
    system = build_linear_system(rmap, indices, args.order, tol_rank=args.tol or 1e-8)
    emit(args, system.to_json())
    return EXIT_OK


def cmd_orbit(args) -> int:
    rmap, _, _ = load_map(args.map)
    orbit = orbit_cocycle(rmap, parse_complex(args.point), args.n)
    rows = [(n, *_pair(w), *_pair(d)) for n, (w, d) in enumerate(zip(orbit.points, orbit.cocycle))]
    payload = {"points": [_pair(w) for w in orbit.points],
               "cocycle": [_pair(d) for d in orbit.cocycle], "escaped": orbit.escaped}
    emit(args, payload, rows, ["n", "z_re", "z_im", "deriv_re", "deriv_im"])
    return EXIT_OK


def escape_counts(rmap: RationalMap, z: np.ndarray, cap: int = ESCAPE_CAP,
                  radius: float = ESCAPE_RADIUS) -> np.ndarray:
    num = np.array([complex(c) for c in rmap.numerator.coefficients])
    den = np.array([complex(c) for c in rmap.denominator.coefficients])
    z = z.astype(complex).copy()
    counts = np.full(z.shape, cap, dtype=int)
    alive = np.ones(z.shape, dtype=bool)
    with np.errstate(all="ignore"):
        for it in range(cap):
            zz = z[alive]
            zz = np.polyval(num[::-1], zz) / np.polyval(den[::-1], zz)
            z[alive] = zz
            out = alive & ~(np.abs(z) <= radius)
            counts[out] = it + 1
            alive &= ~out
            if not alive.any():
                break
    return counts


def cmd_grid(args) -> int:
    rmap, _, _ = load_map(args.map)
    try:
        x0, x1, y0, y1 = (float(t) for t in args.window.split(","))
    except ValueError:
        raise InputError("--window must be xmin,xmax,ymin,ymax")
    res = args.resolution
    if res < 1:
        raise InputError("--resolution must be positive")
    xs = np.linspace(x0, x1, res)
    ys = np.linspace(y0, y1, res)
    chunks = np.array_split(np.arange(res), min(res, max_workers()))

    def work(rows):
        zz = xs[None, :] + 1j * ys[rows][:, None]
        return escape_counts(rmap, zz)

    with ThreadPoolExecutor(max_workers()) as pool:
        counts = np.vstack(list(pool.map(work, chunks)))
    rows = [(float(xs[i]), float(ys[j]), int(counts[j, i])) for j in range(res) for i in range(res)]
    payload = {"window": [x0, x1, y0, y1], "resolution": res, "cap": ESCAPE_CAP,
               "radius": ESCAPE_RADIUS, "counts": counts.tolist()}
    emit(args, payload, rows, ["x", "y", "escape_iter"])
    return EXIT_OK


# --------------------------------------------------------------------------
# Verification suites
# --------------------------------------------------------------------------

def _trial_lemma4(seed: int, trial: int) -> float:
    rng = np.random.default_rng([seed, trial])
    rmap = random_standard_map(rng, int(rng.integers(2, 5)))
    crit = critical_data(rmap)
    exclude = [0, 1, *crit.points, *crit.values]
    worst = 0.0
    for kind in KINDS:
        base = annulus_probes(rng, 1, exclude, radius=0.1)[0]
        k = Kernel(kind, base)
        closed = iterate_combination(rmap, KernelCombination.single(kind, base), 1, crit)[-1]
        for z in annulus_probes(rng, 20, exclude + [base, rmap(base)], radius=0.05):
            exact = apply_pointwise(rmap, k, z)
            worst = max(worst, abs(closed(z) - exact) / max(1.0, abs(exact)))
    return worst


def julia_sample(rmap: RationalMap, rng: np.random.Generator, depth: int) -> complex:
    """A point whose forward orbit stays bounded for ``depth`` steps, by random backward iteration."""
    z = annulus_probes(rng, 1, [0, 1], inner=0.5, outer=2.0)[0]
    for _ in range(depth):
        pts = preimages(rmap, z).points
        z = complex(pts[int(rng.integers(len(pts)))])
    return z


def _trial_prop6(rmap, seed, trial, order) -> float:
    rng = np.random.default_rng([seed, trial])
    a = julia_sample(rmap, rng, order + 5)
    z = annulus_probes(rng, 1, [0, 1, a], inner=1.5, outer=3.0)[0]
    return verify_prop6(rmap, a, order, z).max_residual


def _trial_cor9(rmap, seed, trial, order) -> float:
    rng = np.random.default_rng([seed, trial])
    crit = critical_data(rmap)
    a = crit.values[0]
    x = float(rng.uniform(0.1, 0.9))
    z = annulus_probes(rng, 1, [0, 1, a], inner=1.5, outer=3.0)[0]
    return verify_cor9(rmap, a, x, z, order).residual


def _trial_mobius(rmap, seed, trial, order) -> float:
    rng = np.random.default_rng([seed, trial])
    d1 = critical_data(rmap).values[0]
    y = complex(rng.uniform(2, 8), rng.uniform(-2, 2))
    z = annulus_probes(rng, 1, [0, 1, d1, 1 - y], inner=1.5, outer=3.0)[0]
    return mobius_transform_identity(rmap, d1, y, z, order).residual


def _trial_contraction(seed, trial, samples) -> float:
    rng = np.random.default_rng([seed, trial])
    rmap = random_standard_map(rng, int(rng.integers(2, 4)))
    base = annulus_probes(rng, 1, [0, 1], radius=0.1)[0]
    rep = l1_contraction_check(rmap, KernelCombination.single(GAMMA, base), samples, seed + trial)
    # positive means excess over the statistical allowance
    return rep.ratio - rep.bound


def cmd_verify(args) -> int:
    suite = args.suite
    tol = args.tol if args.tol is not None else SUITE_TOLERANCES[suite]
    rmap = load_map(args.map)[0] if args.map else DEFAULT_FIXTURE
    seed, trials = args.seed, args.trials
    if suite == "lemma4":
        job = lambda t: _trial_lemma4(seed, t)  # noqa: E731
    elif suite == "prop6":
        job = lambda t: _trial_prop6(rmap, seed, t, args.order or 20)  # noqa: E731
    elif suite == "cor9":
        job = lambda t: _trial_cor9(rmap, seed, t, args.order or 100)  # noqa: E731
    elif suite == "mobius":
        job = lambda t: _trial_mobius(rmap, seed, t, args.order or 60)  # noqa: E731
    else:
        job = lambda t: _trial_contraction(seed, t, args.samples)  # noqa: E731
        tol = 0.0 if tol is None else tol
    with ThreadPoolExecutor(max_workers()) as pool:
        residuals = list(pool.map(job, range(trials)))
    worst_trial = int(np.argmax(residuals)) if residuals else None
    worst = max(residuals) if residuals else 0.0
    passed = worst <= tol
    out = {
        "suite": suite, "trials": trials, "seed": seed, "tol": tol,
        "worst_residual": worst, "worst_trial": worst_trial,
        "passed": passed, "residuals": residuals,
    }
    emit(args, out, [(i, r) for i, r in enumerate(residuals)], ["trial", "residual"])
    return EXIT_OK if passed else EXIT_FAIL


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _add_globals(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--map", default=d(None), help="map spec JSON file")
    p.add_argument("--format", choices=("json", "csv"), default=d("json"))
    p.add_argument("--tol", type=float, default=d(None), help="tolerance (command specific)")
    p.add_argument("--order", type=int, default=d(60), help="series truncation N (terms)")
    p.add_argument("--seed", type=int, default=d(0))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ruelle-kit",
                                     description="Transfer operators and critical-orbit series of rational maps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="normalization and critical data")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("summability", parents=[common], help="forward-series evidence at a point")
    p.add_argument("--point", required=True)
    p.set_defaults(func=cmd_summability)

    p = sub.add_parser("ruelle-apply", parents=[common], help="apply (R*)^n to a kernel")
    p.add_argument("--kernel", choices=KINDS, default=GAMMA)
    p.add_argument("--base", required=True)
    p.add_argument("--at", required=True)
    p.add_argument("--power", type=int, default=1)
    p.set_defaults(func=cmd_ruelle_apply)

    p = sub.add_parser("series", parents=[common], help="modified and backward series at a probe")
    p.add_argument("--point", required=True)
    p.add_argument("--x", default="1")
    p.add_argument("--at", required=True)
    p.add_argument("--kernel", choices=KINDS, default=GAMMA)
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("stability", parents=[common], help="instability certificates")
    p.add_argument("--indices", default=None, help="comma-separated 0-based critical indices")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("rank", parents=[common], help="linear relation system and rank")
    p.add_argument("--indices", default=None, help="comma-separated 0-based critical indices")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("verify", parents=[common], help="randomized verification suites")
    p.add_argument("--suite", choices=tuple(SUITE_TOLERANCES), required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo samples (contraction)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("orbit", parents=[common], help="orbit and derivative cocycle dump")
    p.add_argument("--point", required=True)
    p.add_argument("--n", type=int, default=10)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("grid", parents=[common], help="escape-time grid")
    p.add_argument("--window", default="-2,2,-2,2")
    p.add_argument("--resolution", type=int, default=100)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, InvalidMapError, PoleError, DegenerateKernelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PreconditionError, RootFindingError, CriticalOrbitError, DivergenceError,
            ConditioningError) as exc:
        print(f"precondition: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

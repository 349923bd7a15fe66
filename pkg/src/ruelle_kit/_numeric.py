"""Low-level numerics: scalar helpers, compensated sums, simultaneous root iteration.

Scalar code in this package is written with plain arithmetic operators so the
same functions run on Python ``complex`` and on ``mpmath.mpc`` values.  The
helpers here are the few places that need to know which one they hold.
"""
from __future__ import annotations

import math

import mpmath
import numpy as np

from .errors import RootFindingError

EPS = np.finfo(float).eps


def is_mp(x) -> bool:
    return isinstance(x, (mpmath.mpc, mpmath.mpf))


def any_mp(values) -> bool:
    return any(is_mp(v) for v in values)


def as_scalar(x, mp: bool = False):
    """Coerce to ``complex`` (or ``mpc`` when ``mp``)."""
    if mp:
        return mpmath.mpc(x)
    if is_mp(x):
        return complex(x)
    return complex(x)


def working_eps(mp: bool) -> float:
    return float(mpmath.mp.eps) if mp else EPS


def horner(coeffs, z):
    """Evaluate an ascending-order coefficient sequence at ``z`` (scalar or ndarray)."""
    acc = coeffs[-1] * 1
    for c in reversed(coeffs[:-1]):
        acc = acc * z + c
    return acc


def horner_with_derivative(coeffs, z):
    p = coeffs[-1] * 1
    dp = 0 * p
    for c in reversed(coeffs[:-1]):
        dp = dp * z + p
        p = p * z + c
    return p, dp


def neumaier_sum(values):
    """Compensated sum of complex values, real and imaginary parts separately.

    Summation order is the iteration order of ``values``.
    """
    s_re = s_im = None
    c_re = c_im = 0.0
    for v in values:
        re, im = v.real, v.imag
        if s_re is None:
            s_re, s_im = re, im
            c_re = c_im = 0 * re
            continue
        t = s_re + re
        if abs(s_re) >= abs(re):
            c_re += (s_re - t) + re
        else:
            c_re += (re - t) + s_re
        s_re = t
        t = s_im + im
        if abs(s_im) >= abs(im):
            c_im += (s_im - t) + im
        else:
            c_im += (im - t) + s_im
        s_im = t
    if s_re is None:
        return 0j
    return (s_re + c_re) + 1j * (s_im + c_im)


def scaled_residual(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """|p(r)| / (max|coeff| * max(1,|r|)**deg), the backward-error style bound."""
    deg = len(coeffs) - 1
    vals = np.abs(horner(coeffs, roots))
    scale = np.max(np.abs(coeffs)) * np.maximum(1.0, np.abs(roots)) ** deg
    return vals / scale


def _initial_guesses(coeffs: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
    n = len(coeffs) - 1
    lead = coeffs[-1]
    center = -coeffs[-2] / (n * lead)
    # Fujiwara-type bound on the root moduli about the shifted centre.
    ratios = [abs(coeffs[k] / lead) ** (1.0 / (n - k)) for k in range(n) if coeffs[k] != 0]
    radius = 2.0 * max(ratios) if ratios else 1.0
    radius = max(radius, 1e-3)
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    if rng is not None:
        angles = angles + rng.uniform(0, 2 * np.pi)
        radius = radius * rng.uniform(0.5, 1.5)
    return center + radius * np.exp(1j * angles)


def _aberth_pass(coeffs, dcoeffs, z, max_iter):
    for _ in range(max_iter):
        p = horner(coeffs, z)
        dp = horner(dcoeffs, z)
        small = dp == 0
        if np.any(small):
            dp = np.where(small, 1e-300 + 0j, dp)
        ratio = p / dp
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        s = inv.sum(axis=1)
        w = ratio / (1.0 - ratio * s)
        w = np.where(np.isfinite(w), w, 0.0)
        z = z - w
        if np.all(np.abs(w) <= 4 * EPS * np.maximum(np.abs(z), 1e-300)):
            return z, True
        if not np.all(np.isfinite(z)):
            return z, False
    return z, False


def _newton_polish(coeffs, dcoeffs, z, steps=3):
    z = z.copy()
    for i in range(len(z)):
        r = z[i]
        best = abs(horner(coeffs, r))
        for _ in range(steps):
            d = horner(dcoeffs, r)
            if d == 0:
                break
            cand = r - horner(coeffs, r) / d
            val = abs(horner(coeffs, cand))
            if val < best:
                r, best = cand, val
            else:
                break
        z[i] = r
    return z


def aberth_roots(coeffs, *, tol: float = 1e-10, max_iter: int = 200,
                 restarts: int = 3, seed: int = 0) -> np.ndarray:
    """All roots of the ascending-order polynomial ``coeffs`` (double precision).

    Aberth-Ehrlich simultaneous iteration from points on a circle, restarted
    from randomly perturbed circles on stagnation, then Newton polishing.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    n = len(coeffs) - 1
    if n < 1:
        raise ValueError("polynomial of degree >= 1 required")
    if n == 1:
        return np.array([-coeffs[0] / coeffs[1]])
    dcoeffs = coeffs[1:] * np.arange(1, n + 1)
    rng = None
    best, best_res = None, math.inf
    for attempt in range(restarts + 1):
        z0 = _initial_guesses(coeffs, rng)
        z, _converged = _aberth_pass(coeffs, dcoeffs, z0, max_iter)
        if np.all(np.isfinite(z)):
            z = _newton_polish(coeffs, dcoeffs, z)
            res = float(np.max(scaled_residual(coeffs, z)))
            if res < best_res:
                best, best_res = z, res
            if res <= tol:
                return z
        rng = np.random.default_rng([seed, attempt])
    raise RootFindingError("root iteration did not converge", best, best_res)


def mp_polish(coeffs, roots, steps: int = 60):
    """Newton-refine double-precision roots of an mpmath polynomial in the current mp context."""
    dcoeffs = [k * coeffs[k] for k in range(1, len(coeffs))]
    eps = mpmath.mp.eps
    out = []
    for r in roots:
        r = mpmath.mpc(r)
        for _ in range(steps):
            p = horner(coeffs, r)
            d = horner(dcoeffs, r)
            if d == 0:
                break
            step = p / d
            r = r - step
            if abs(step) <= 4 * eps * max(abs(r), 1):
                break
        out.append(r)
    return out

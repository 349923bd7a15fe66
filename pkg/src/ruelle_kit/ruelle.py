"""The transfer operator R* and its companions.

Two realizations of R* are kept side by side: the preimage sum

    R*f(z) = sum over R(y) = z of f(y) / R'(y)**2

and the closed form on the kernel span, where each kernel maps to one kernel
at the image base plus one kernel per finite critical value.  The tests play
them against each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._numeric import neumaier_sum
from .errors import ConditioningError, DegenerateKernelError, PreconditionError
from .kernels import (
    GAMMA,
    TAU,
    Kernel,
    KernelCombination,
    L1Estimate,
    kernel_eval,
    l1_norm_estimate,
)
from .rational_map import (
    CriticalData,
    PreimageSet,
    RationalMap,
    critical_data,
    poly_roots,
    preimages,
)

TOL_CRIT = 1e-10
TOL_DERIVATIVE = 1e-12


# --------------------------------------------------------------------------
# Pointwise realizations
# --------------------------------------------------------------------------

def apply_pointwise(rmap: RationalMap, f: Callable, z, *, pre: PreimageSet | None = None):
    """R*f(z) as a sum over the d preimages of ``z``."""
    pre = pre if pre is not None else preimages(rmap, z)
    terms = []
    for y, d in zip(pre.points, pre.derivatives):
        if abs(d) < TOL_DERIVATIVE:
            raise ConditioningError(f"|R'| = {abs(complex(d)):.2e} at preimage {complex(y):.6g}")
        terms.append(f(y) / (d * d))
    return neumaier_sum(terms)


def apply_pointwise_iterated(rmap: RationalMap, f: Callable, z, n: int):
    """(R*)^n f(z) by recursing through the preimage tree (d**n leaves)."""
    if n == 0:
        return f(z)
    return apply_pointwise(rmap, lambda y: apply_pointwise_iterated(rmap, f, y, n - 1), z)


def modulus_apply_pointwise(rmap: RationalMap, f: Callable, z, *, pre: PreimageSet | None = None) -> float:
    """|R*| f(z) = sum of |f(y)| / |R'(y)|**2 over preimages."""
    pre = pre if pre is not None else preimages(rmap, z)
    total = 0.0
    for y, d in zip(pre.points, pre.derivatives):
        if abs(d) < TOL_DERIVATIVE:
            raise ConditioningError(f"|R'| = {abs(complex(d)):.2e} at preimage {complex(y):.6g}")
        total += float(abs(f(y))) / float(abs(d)) ** 2
    return total


def pushforward(rmap: RationalMap, f: Callable, z):
    """R_* f(z) = f(R(z)) R'(z)**2 / deg R, a right inverse of R*."""
    value, der = rmap.value_and_derivative(z)
    return f(value) * der * der / rmap.degree


def pushforward_function(rmap: RationalMap, f: Callable) -> Callable:
    """R_* f as a callable (vectorizes when ``f`` does)."""
    def g(z):
        value, der = rmap.value_and_derivative(z)
        return f(value) * der * der / rmap.degree
    return g


def beltrami_apply(rmap: RationalMap, mu: Callable, z):
    """B_R mu(z) = mu(R(z)) conj(R'(z)) / R'(z)."""
    value, der = rmap.value_and_derivative(z)
    if der == 0:
        raise ConditioningError(f"R'({complex(z):.6g}) = 0")
    m = mu(value)
    if abs(m) > 1 + 1e-12:
        raise ValueError(f"Beltrami coefficient has modulus {abs(complex(m)):.3g} > 1")
    return m * der.conjugate() / der


# --------------------------------------------------------------------------
# Closed form on the kernel span
# --------------------------------------------------------------------------

def _critical_index(crit: CriticalData, a, tol: float) -> int | None:
    for i, c in enumerate(crit.points):
        if abs(a - c) <= tol * max(1.0, abs(c)):
            return i
    return None


def critical_kernel_coefficient(rmap: RationalMap, i: int, kind: str,
                                crit: CriticalData | None = None):
    """Finite coefficient of the kernel at the critical value when the base is c_i.

    It is the limit, as a -> c_i, of 1/R'(a) + b_i k_a(c_i):

        tau:    h_i(c_i)
        gamma:  h_i(c_i) - b_i (2 c_i - 1) / (c_i (c_i - 1))

    where h_i = 1/R' - b_i/(z - c_i).
    """
    crit = crit if crit is not None else critical_data(rmap)
    c, b = crit.points[i], crit.residues[i]
    h = crit.h_at_critical(i)
    if kind == TAU:
        return h
    if Kernel(GAMMA, c).is_zero:
        raise DegenerateKernelError(
            f"critical point {complex(c)} sits at 0 or 1; use the tau calculus"
        )
    return h - b * (2 * c - 1) / (c * (c - 1))


def _accumulate_kernel(acc: dict, coeff, rmap: RationalMap, k: Kernel, crit: CriticalData,
                       tol_crit: float):
    if k.is_zero or coeff == 0:
        return
    a = k.base
    if rmap.is_pole(a):
        raise PreconditionError(f"kernel base {complex(a):.6g} is a pole of R")
    i = _critical_index(crit, a, tol_crit)
    if i is None:
        value, der = rmap.value_and_derivative(a)
        head = [(1 / der, value)]
        skip = None
    else:
        c = crit.points[i]
        head = [(critical_kernel_coefficient(rmap, i, k.kind, crit), crit.values[i])]
        k = Kernel(k.kind, c)
        skip = i
    for w, base in head:
        _add(acc, k.kind, base, coeff * w)
    for j, (c, b, d) in enumerate(zip(crit.points, crit.residues, crit.values)):
        if j == skip:
            continue
        if Kernel(k.kind, d).is_zero:
            continue
        _add(acc, k.kind, d, coeff * b * kernel_eval(k, c))


def _add(acc: dict, kind: str, base, value):
    if Kernel(kind, base).is_zero:
        return
    key = (kind, base)
    acc[key] = acc[key] + value if key in acc else value


def apply_to_kernel(rmap: RationalMap, k: Kernel, crit: CriticalData | None = None, *,
                    tol_crit: float = TOL_CRIT) -> KernelCombination:
    """R* k in closed form.

    For a base a that is not critical,
        R* k_a = k_{R(a)} / R'(a) + sum_i b_i k_a(c_i) k_{d_i};
    bases within ``tol_crit`` of a critical point switch to the limiting
    coefficient of :func:`critical_kernel_coefficient`.
    """
    crit = crit if crit is not None else critical_data(rmap)
    acc: dict = {}
    _accumulate_kernel(acc, 1, rmap, k, crit, tol_crit)
    return KernelCombination({key: v for key, v in acc.items() if v != 0})


def apply_to_combination(rmap: RationalMap, f: KernelCombination,
                         crit: CriticalData | None = None, *,
                         tol_crit: float = TOL_CRIT) -> KernelCombination:
    crit = crit if crit is not None else critical_data(rmap)
    acc: dict = {}
    for coeff, k in f:
        _accumulate_kernel(acc, coeff, rmap, k, crit, tol_crit)
    return KernelCombination({key: v for key, v in acc.items() if v != 0})


def iterate_combination(rmap: RationalMap, f: KernelCombination, n: int,
                        crit: CriticalData | None = None) -> list:
    """[f, R*f, ..., (R*)^n f]."""
    crit = crit if crit is not None else critical_data(rmap)
    out = [f]
    for _ in range(n):
        out.append(apply_to_combination(rmap, out[-1], crit))
    return out


# --------------------------------------------------------------------------
# L1 contraction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ContractionReport:
    before: L1Estimate
    after: L1Estimate
    ratio: float
    ratio_stderr: float

    @property
    def bound(self) -> float:
        return 1.0 + 3.0 * self.ratio_stderr

    @property
    def passed(self) -> bool:
        return self.ratio <= self.bound


def _ratio(after: L1Estimate, before: L1Estimate) -> tuple:
    if before.value == 0:
        return 1.0, 0.0
    ratio = after.value / before.value
    rel = math.hypot(after.stderr / after.value if after.value else 0.0,
                     before.stderr / before.value)
    return ratio, ratio * rel


def l1_contraction_check(rmap: RationalMap, f: KernelCombination, samples: int = 10**6,
                         seed: int = 0) -> ContractionReport:
    """Compare Monte-Carlo L1 norms of f and R*f (closed form); expect ratio <= 1."""
    before = l1_norm_estimate(f, samples, seed)
    after = l1_norm_estimate(apply_to_combination(rmap, f), samples, seed + 1)
    ratio, err = _ratio(after, before)
    return ContractionReport(before, after, ratio, err)


def pushforward_norm_check(rmap: RationalMap, f: KernelCombination, samples: int = 10**6,
                           seed: int = 0) -> ContractionReport:
    """Equality case of the contraction: g = R_* f satisfies R* g = f and ||f|| = ||g||.

    ``before`` is ||g||, ``after`` is ||R* g|| = ||f||; the ratio should be 1.
    """
    g = pushforward_function(rmap, f.evaluate_array)
    poles = _poles_of(rmap)
    for p in f.poles():
        poles.extend(preimages(rmap, p).points)
    merged: list = []
    for p in poles:
        if not any(abs(p - q) < 1e-9 for q in merged):
            merged.append(complex(p))
    before = l1_norm_estimate(g, samples, seed, poles=merged)
    after = l1_norm_estimate(f, samples, seed + 1)
    ratio, err = _ratio(after, before)
    return ContractionReport(before, after, ratio, err)


def _poles_of(rmap: RationalMap) -> list:
    if rmap.denominator.degree < 1:
        return []
    return [complex(p) for p in poly_roots(rmap.denominator)]


# --------------------------------------------------------------------------
# Probe points
# --------------------------------------------------------------------------

def annulus_probes(rng: np.random.Generator, n: int, exclude=(), *, inner: float = 0.5,
                   outer: float = 3.0, radius: float = 0.05) -> list:
    """``n`` points uniform in the annulus inner <= |z| <= outer, avoiding disks around ``exclude``."""
    out: list = []
    exclude = [complex(e) for e in exclude]
    while len(out) < n:
        r = math.sqrt(rng.uniform(inner ** 2, outer ** 2))
        z = r * complex(math.cos(t := rng.uniform(0, 2 * math.pi)), math.sin(t))
        if all(abs(z - e) >= radius for e in exclude):
            out.append(z)
    return out


def annulus_grid(n: int = 20, *, inner: float = 0.5, outer: float = 3.0) -> list:
    """Deterministic probe grid: 4 radii by n/4 angles, angles staggered per ring."""
    rings = 4
    per = max(1, n // rings)
    out = []
    for i in range(rings):
        r = inner + (outer - inner) * (i + 0.5) / rings
        for j in range(per):
            t = 2 * math.pi * (j + 0.5 * (i % 2) + 0.13) / per
            out.append(r * complex(math.cos(t), math.sin(t)))
    return out[:n]

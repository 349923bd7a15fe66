"""Rational kernels gamma_a, tau_a and finite linear combinations of them.

    gamma_a(z) = a(a-1) / (z(z-1)(z-a)),      tau_a(z) = 1/(z-a)

gamma at base 0 or 1 is the zero function.  Combinations are kept as exact
bookkeeping over (kind, base) pairs; only evaluation is approximate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import mpmath
import numpy as np

from ._numeric import neumaier_sum
from .errors import DegenerateKernelError, PoleError

GAMMA = "gamma"
TAU = "tau"
KINDS = (GAMMA, TAU)

POLE_TOL = 1e-13
DEGENERATE_TOL = 1e-14


def _pair(v) -> list:
    return [float(mpmath.re(v)), float(mpmath.im(v))]


def _near(a, target, tol=DEGENERATE_TOL) -> bool:
    return abs(a - target) <= tol


@dataclass(frozen=True)
class Kernel:
    kind: str
    base: complex

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")

    @property
    def is_zero(self) -> bool:
        return self.kind == GAMMA and (_near(self.base, 0) or _near(self.base, 1))

    def poles(self) -> tuple:
        if self.is_zero:
            return ()
        if self.kind == TAU:
            return (self.base,)
        return (0, 1, self.base)

    def __call__(self, z):
        return kernel_eval(self, z)

    def evaluate_array(self, z: np.ndarray) -> np.ndarray:
        a = complex(self.base)
        if self.is_zero:
            return np.zeros_like(z, dtype=complex)
        if self.kind == TAU:
            return 1.0 / (z - a)
        return a * (a - 1) / (z * (z - 1) * (z - a))


def kernel_eval(k: Kernel, z):
    """Value of the kernel at ``z``; raises :class:`PoleError` within 1e-13 of a pole."""
    if k.is_zero:
        return 0 * z
    for p in k.poles():
        if abs(z - p) <= POLE_TOL:
            raise PoleError(p, z)
    a = k.base
    if k.kind == TAU:
        return 1 / (z - a)
    return a * (a - 1) / (z * (z - 1) * (z - a))


def gamma_decompose(a) -> tuple:
    """Partial fractions of gamma_a: coefficients of 1/z, 1/(z-1), 1/(z-a)."""
    if _near(a, 0) or _near(a, 1):
        raise DegenerateKernelError(f"gamma kernel at base {a} is identically zero")
    return (a - 1, -a, 1 + 0 * a)


def gamma_as_tau(a) -> "KernelCombination":
    c0, c1, ca = gamma_decompose(a)
    return KernelCombination.from_terms([(c0, Kernel(TAU, 0 * a)), (c1, Kernel(TAU, 1 + 0 * a)),
                                         (ca, Kernel(TAU, a))])


class KernelCombination:
    """Finite sum of coefficient * kernel with equal (kind, base) merged.

    Terms keep first-insertion order, which fixes the summation order of
    evaluations.  Zero coefficients and identically-zero kernels are dropped.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: dict | None = None):
        self._terms = dict(terms or {})

    @classmethod
    def from_terms(cls, terms: Iterable) -> "KernelCombination":
        acc: dict = {}
        for coeff, kernel in terms:
            if kernel.is_zero:
                continue
            key = (kernel.kind, kernel.base)
            acc[key] = acc[key] + coeff if key in acc else coeff
        return cls({k: v for k, v in acc.items() if v != 0})

    @classmethod
    def single(cls, kind: str, base, coeff=1.0) -> "KernelCombination":
        return cls.from_terms([(coeff, Kernel(kind, base))])

    @property
    def terms(self) -> tuple:
        return tuple((c, Kernel(kind, base)) for (kind, base), c in self._terms.items())

    @property
    def merged(self) -> bool:
        return True

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def __iter__(self):
        return iter(self.terms)

    def __repr__(self):
        body = ", ".join(f"{complex(c):.6g}*{k}({complex(b):.6g})" for (k, b), c in self._terms.items())
        return f"KernelCombination([{body}])"

    def coefficient(self, kind: str, base):
        return self._terms.get((kind, base), 0)

    def __add__(self, other: "KernelCombination") -> "KernelCombination":
        return KernelCombination.from_terms(list(self) + list(other))

    def __sub__(self, other: "KernelCombination") -> "KernelCombination":
        return self + (-1) * other

    def __mul__(self, scalar) -> "KernelCombination":
        return KernelCombination.from_terms((c * scalar, k) for c, k in self)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __call__(self, z):
        if not self._terms:
            return 0 * z
        return neumaier_sum([c * kernel_eval(k, z) for c, k in self])

    def evaluate_array(self, z: np.ndarray) -> np.ndarray:
        out = np.zeros_like(z, dtype=complex)
        for c, k in self:
            out += complex(c) * k.evaluate_array(z)
        return out

    def poles(self) -> list:
        seen: list = []
        for _, k in self:
            for p in k.poles():
                if not any(p == q for q in seen):
                    seen.append(p)
        return seen

    def is_integrable(self, rel_tol: float = 1e-10) -> bool:
        """Planar L1 integrability: the tau part must decay like |z|**-3."""
        tau = [(c, k.base) for c, k in self if k.kind == TAU]
        if not tau:
            return True
        scale = sum(abs(c) * max(1.0, abs(b)) for c, b in tau)
        m0 = abs(sum(c for c, _ in tau))
        m1 = abs(sum(c * b for c, b in tau))
        return m0 <= rel_tol * scale and m1 <= rel_tol * scale

    def to_json(self) -> list:
        return [{"kind": k.kind, "base": _pair(k.base), "coeff": _pair(c)} for c, k in self]

    @classmethod
    def from_json(cls, data: list) -> "KernelCombination":
        return cls.from_terms(
            (complex(*t["coeff"]), Kernel(t["kind"], complex(*t["base"]))) for t in data
        )


# --------------------------------------------------------------------------
# Planar L1 norms by Monte Carlo
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class L1Estimate:
    value: float
    stderr: float
    samples: int


def _pole_radii(poles: list) -> list:
    radii = []
    for i, p in enumerate(poles):
        others = [abs(p - q) for j, q in enumerate(poles) if j != i]
        radii.append(min(1.0, 0.5 * min(others)) if others else 1.0)
    return radii


def l1_norm_estimate(f, samples: int = 10**6, seed: int = 0, *,
                     poles: list | None = None, scale: float | None = None) -> L1Estimate:
    """Monte-Carlo estimate of the planar integral of |f| with a 1-sigma error.

    ``f`` is a :class:`KernelCombination` or a vectorized callable; callables
    must supply their simple ``poles``.  Samples come from a mixture of a
    heavy-tailed radial law (matching |z|**-3 decay) and polar disks around
    each pole (uniform in radius, which cancels the 1/r singularity), split
    deterministically across components and Latin-stratified within each.
    Reproducible for a fixed ``seed``.
    """
    if samples < 10**4:
        raise ValueError("l1_norm_estimate needs at least 1e4 samples")
    if isinstance(f, KernelCombination):
        if not f:
            return L1Estimate(0.0, 0.0, samples)
        if not f.is_integrable():
            raise ValueError("combination is not integrable over the plane")
        poles = [complex(p) for p in f.poles()]
        func: Callable = f.evaluate_array
    else:
        if poles is None:
            raise ValueError("callables need an explicit pole list")
        poles = [complex(p) for p in poles]
        func = f
    if scale is None:
        scale = max([1.0] + [abs(p) for p in poles])
    radii = _pole_radii(poles)
    n_comp = 1 + len(poles)
    far_share = 0.5 if poles else 1.0
    counts = [int(round(far_share * samples))]
    rest = samples - counts[0]
    for i in range(len(poles)):
        counts.append(rest // len(poles) + (1 if i < rest % len(poles) else 0))
    weights = np.array(counts, dtype=float) / samples
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_comp)]

    def mixture_density(z):
        r0 = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = weights[0] * scale / (2 * np.pi * r0 * (r0 + scale) ** 2)
            for k, (p, rho) in enumerate(zip(poles, radii), start=1):
                r = np.abs(z - p)
                dens = dens + np.where(r < rho, weights[k] / (2 * np.pi * rho * r), 0.0)
        return dens

    total = 0.0
    var = 0.0
    for k, (n_k, rng) in enumerate(zip(counts, streams)):
        if n_k == 0:
            continue
        u = (rng.permutation(n_k) + rng.random(n_k)) / n_k
        v = (rng.permutation(n_k) + rng.random(n_k)) / n_k
        theta = 2 * np.pi * v
        if k == 0:
            u = np.minimum(u, 1 - 1e-16)
            r = scale * u / (1 - u)
            z = r * np.exp(1j * theta)
        else:
            r = radii[k - 1] * u
            z = poles[k - 1] + r * np.exp(1j * theta)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = np.abs(func(z)) / mixture_density(z)
        ratio = np.where(np.isfinite(ratio), ratio, 0.0)
        total += ratio.sum() / samples
        var += (n_k / samples) ** 2 * ratio.var(ddof=1) / n_k if n_k > 1 else 0.0
    return L1Estimate(float(total), float(math.sqrt(var)), samples)


def fit_l1_constant(bases, samples: int = 200_000, seed: int = 0) -> float:
    """Smallest M with ||gamma_a||_1 <= M |a| |ln|a|| over ``bases`` (each |a| != 1)."""
    best = 0.0
    for a in bases:
        weight = abs(a) * abs(math.log(abs(a)))
        if weight == 0:
            raise ValueError("the |a| ln|a| weight vanishes on |a| = 1")
        est = l1_norm_estimate(KernelCombination.single(GAMMA, complex(a)), samples, seed)
        best = max(best, est.value / weight)
    return best

"""Ruelle-Poincare series, summability evidence and their functional relations.

Truncation convention: ``N`` is the number of terms, indices n = 0 .. N-1.

* forward series       sum_n 1 / (R^n)'(R(a))
* modified series      A(x, z, a) = sum_n x^n k_{R^n(a)}(z) / (R^n)'(a)
* backward series      RS(x, z, a) = sum_n x^n (R*)^n k_a (z)

where k is the gamma kernel by default (tau on request).  Verdicts are
evidence from a geometric fit over a trailing window, never proofs.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from contextlib import nullcontext
from dataclasses import dataclass, field

import mpmath
import numpy as np

from ._numeric import neumaier_sum
from .errors import (
    ConditioningWarning,
    CriticalOrbitError,
    DegenerateKernelError,
    PoleError,
    PreconditionError,
)
from .kernels import GAMMA, Kernel, KernelCombination, kernel_eval
from .rational_map import (
    CriticalData,
    RationalMap,
    critical_data,
    orbit_cocycle,
    require_noncritical_orbit,
)
from .ruelle import iterate_combination

SUMMABLE = "summable-evidence"
DIVERGENT = "divergent-evidence"
INCONCLUSIVE = "inconclusive"
NOT_APPLICABLE = "not-applicable"

DEFAULT_ORDER = 200
WINDOW = 20
MARGIN = 0.05


def _f(v) -> float:
    return float(abs(v)) if not isinstance(v, float) else abs(v)


def _pair(v) -> list:
    return [float(mpmath.re(v)), float(mpmath.im(v))]


def _precision(dps):
    return mpmath.workdps(dps) if dps else nullcontext()


def _lift(v):
    """Exact-friendly conversion to mpc: accepts numbers, Fractions and strings like '-1/3'."""
    return mpmath.mpc(mpmath.mpmathify(v))


# --------------------------------------------------------------------------
# Geometric tail fitting
# --------------------------------------------------------------------------

def fit_ratio(abs_terms, window: int = WINDOW) -> float:
    """Geometric ratio of the trailing ``window`` magnitudes (least squares on logs).

    A window ending in exact zeros counts as a terminating series (ratio 0);
    ``nan`` when there is too little data.
    """
    tail = [float(t) for t in abs_terms[-window:]]
    if len(tail) < 2:
        return math.nan
    if tail[-1] == 0.0:
        return 0.0
    idx = [i for i, t in enumerate(tail) if t > 0 and math.isfinite(t)]
    if len(idx) < 2:
        return math.nan
    x = np.array(idx, dtype=float)
    y = np.log(np.array([tail[i] for i in idx]))
    slope = np.polyfit(x, y, 1)[0]
    return float(math.exp(slope))


def geometric_tail(abs_terms, window: int = WINDOW, margin: float = MARGIN) -> tuple:
    """(fitted ratio, estimated remainder beyond the last term).

    The remainder uses the ratio inflated by ``1 + margin`` so it stays an
    over-estimate for exactly geometric tails.
    """
    r = fit_ratio(abs_terms, window)
    if math.isnan(r):
        return r, math.inf
    if r == 0.0:
        return r, 0.0
    r_eff = r * (1 + margin)
    if r_eff >= 1:
        return r, math.inf
    return r, float(abs_terms[-1]) * r_eff / (1 - r_eff)


def verdict_from_ratio(r: float, n_terms: int, margin: float = MARGIN) -> str:
    if n_terms < 3 or math.isnan(r):
        return INCONCLUSIVE
    if r < 1 - margin:
        return SUMMABLE
    if r > 1 + margin:
        return DIVERGENT
    return INCONCLUSIVE


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesReport:
    label: str
    terms: tuple
    partial_sums: tuple
    ratio: float
    tail: float
    verdict: str
    escaped: bool = False

    @property
    def total(self):
        return self.partial_sums[-1] if self.partial_sums else 0j

    @property
    def abs_sum(self) -> float:
        return math.fsum(_f(t) for t in self.terms)

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "n_terms": len(self.terms),
            "sum": _pair(self.total),
            "abs_sum": self.abs_sum,
            "ratio": None if math.isnan(self.ratio) else self.ratio,
            "tail": None if math.isinf(self.tail) else self.tail,
            "verdict": self.verdict,
            "escaped": self.escaped,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "term_re", "term_im", "partial_re", "partial_im", "|term|"])
        for n, (t, s) in enumerate(zip(self.terms, self.partial_sums)):
            tr, ti = _pair(t)
            sr, si = _pair(s)
            writer.writerow([n, repr(tr), repr(ti), repr(sr), repr(si), repr(_f(t))])
        return buf.getvalue()


def _partial_sums(terms) -> tuple:
    out, acc = [], []
    for t in terms:
        acc.append(t)
        out.append(neumaier_sum(acc))
    return tuple(out)


def _make_report(label: str, terms, escaped=False, *, window=WINDOW, margin=MARGIN) -> SeriesReport:
    terms = tuple(terms)
    mags = [_f(t) for t in terms]
    r, tail = geometric_tail(mags, window, margin)
    verdict = verdict_from_ratio(r, len(terms), margin)
    return SeriesReport(label, terms, _partial_sums(terms), r, tail, verdict, escaped)


# --------------------------------------------------------------------------
# Forward series and summability
# --------------------------------------------------------------------------

def _forward_orbit(rmap: RationalMap, a, N: int):
    if N < 1:
        raise ValueError("N must be >= 1")
    start = rmap(a)
    orbit = orbit_cocycle(rmap, start, N - 1)
    require_noncritical_orbit(orbit)
    return orbit


def forward_series(rmap: RationalMap, a, N: int = DEFAULT_ORDER, *, window: int = WINDOW,
                   margin: float = MARGIN) -> SeriesReport:
    """Terms 1/(R^n)'(R(a)), n < N, with a geometric tail fit.

    Raises :class:`CriticalOrbitError` if the orbit of R(a) meets a critical point.
    """
    orbit = _forward_orbit(rmap, a, N)
    terms = [1 / d for d in orbit.cocycle]
    return _make_report("forward", terms, orbit.escaped, window=window, margin=margin)


@dataclass(frozen=True)
class SummabilityReport:
    point: complex
    bounded: bool
    absolute: SeriesReport
    weighted: SeriesReport | None
    conjugation: SeriesReport
    verdict: str

    def to_json(self) -> dict:
        return {
            "point": _pair(self.point),
            "bounded": self.bounded,
            "verdict": self.verdict,
            "absolute": self.absolute.to_json(),
            "weighted": self.weighted.to_json() if self.weighted else NOT_APPLICABLE,
            "conjugation": self.conjugation.to_json(),
        }


def summability_report(rmap: RationalMap, a, N: int = DEFAULT_ORDER) -> SummabilityReport:
    """Absolute forward series, the |w ln|w||-weighted series for unbounded orbits,
    and the w**2-weighted series that governs summability after Mobius conjugation.
    """
    orbit = _forward_orbit(rmap, a, N)
    pts, coc = orbit.points, orbit.cocycle
    absolute = _make_report("absolute", [1 / d for d in coc], orbit.escaped)
    conj = _make_report("conjugation", [w * w / d for w, d in zip(pts, coc)], orbit.escaped)
    bounded = not orbit.escaped
    weighted = None
    if not bounded:
        weighted = _make_report(
            "weighted",
            [_f(w) * abs(math.log(_f(w))) / d if _f(w) > 0 else 0 * d for w, d in zip(pts, coc)],
            orbit.escaped,
        )
    verdicts = [absolute.verdict] + ([weighted.verdict] if weighted else [])
    if all(v == SUMMABLE for v in verdicts):
        verdict = SUMMABLE
    elif any(v == DIVERGENT for v in verdicts):
        verdict = DIVERGENT
    else:
        verdict = INCONCLUSIVE
    return SummabilityReport(a, bounded, absolute, weighted, conj, verdict)


# --------------------------------------------------------------------------
# Modified series
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesQuery:
    base: complex
    x: complex = 1.0
    N: int = DEFAULT_ORDER
    kind: str = GAMMA

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if abs(self.x) > 1 + 1e-15:
            raise ValueError("|x| must be <= 1")


@dataclass(frozen=True)
class TruncatedValue:
    value: complex
    tail: float
    l1_tail_per_M: float
    n_terms: int
    flags: tuple = ()


def _modified_terms(rmap: RationalMap, a, x, N: int, z, kind: str):
    orbit = orbit_cocycle(rmap, a, N - 1)
    require_noncritical_orbit(orbit)
    terms, l1 = [], []
    xn = 1 + 0 * x
    for w, d in zip(orbit.points, orbit.cocycle):
        k = Kernel(kind, w)
        terms.append(xn * kernel_eval(k, z) / d)
        mag = _f(w)
        l1.append(_f(xn) * (mag * abs(math.log(mag)) if mag > 0 else 0.0) / _f(d))
        xn = xn * x
    return orbit, terms, l1


def modified_series_eval(rmap: RationalMap, q: SeriesQuery, z) -> TruncatedValue:
    """A(x, z, a) truncated after ``q.N`` terms.

    ``tail`` extrapolates the pointwise terms geometrically; ``l1_tail_per_M``
    is the L1 remainder bound sum |x|^n |w| |ln|w|| / |(R^n)'| per unit of the
    kernel-norm constant M.
    """
    orbit, terms, l1 = _modified_terms(rmap, q.base, q.x, q.N, z, q.kind)
    _, tail = geometric_tail([_f(t) for t in terms])
    _, l1_tail = geometric_tail(l1)
    flags = ("escaped",) if orbit.escaped else ()
    return TruncatedValue(neumaier_sum(terms), tail, l1_tail, len(terms), flags)


def modified_series_combination(rmap: RationalMap, q: SeriesQuery) -> KernelCombination:
    """A(x, ., a) truncated after ``q.N`` terms, as a kernel combination."""
    orbit = orbit_cocycle(rmap, q.base, q.N - 1)
    require_noncritical_orbit(orbit)
    xn = 1 + 0 * q.x
    out = []
    for w, d in zip(orbit.points, orbit.cocycle):
        out.append((xn / d, Kernel(q.kind, w)))
        xn = xn * q.x
    return KernelCombination.from_terms(out)


@dataclass(frozen=True)
class CriticalEvaluation:
    value: complex
    tail: float
    n_terms: int
    flagged: tuple = ()          # (n, distance, |term|, cap, within_cap)
    terms: tuple = field(default=(), repr=False)


def A_at_critical(rmap: RationalMap, a, j: int, x=1.0, N: int = DEFAULT_ORDER, *,
                  kind: str = GAMMA, eps_prox: float = 1e-3,
                  crit: CriticalData | None = None) -> CriticalEvaluation:
    """A(x, c_j, a): the modified series evaluated at a critical point.

    Orbit points closer than ``eps_prox`` to c_j are evaluated directly and
    flagged with the cap 2|R''(c)| |w||w-1| / (|c(c-1)| |(R^{n+1})'(a)|)
    that bounds such terms.
    """
    crit = crit if crit is not None else critical_data(rmap)
    c = crit.points[j]
    if kind == GAMMA and Kernel(GAMMA, c).is_zero:
        raise DegenerateKernelError(f"gamma kernels have a pole at critical point {complex(c)}")
    orbit = orbit_cocycle(rmap, a, N - 1)
    require_noncritical_orbit(orbit)
    second = 1 / crit.residues[j]
    terms, flagged = [], []
    xn = 1 + 0 * x
    for n, (w, d) in enumerate(zip(orbit.points, orbit.cocycle)):
        dist = _f(w - c)
        if dist <= 1e-15 * max(1.0, _f(c)):
            raise CriticalOrbitError(f"orbit of {complex(a):.6g} hits c_{j} at step {n}")
        k = Kernel(kind, w)
        t = 0 * xn if k.is_zero else xn * kernel_eval(k, c) / d
        terms.append(t)
        if dist < eps_prox and not k.is_zero:
            step = _f(rmap.derivative(w) * d)
            if kind == GAMMA:
                cap = 2 * _f(second) * _f(w) * _f(w - 1) / (_f(c) * _f(c - 1) * step)
            else:
                cap = 2 * _f(second) / step
            flagged.append((n, dist, _f(t), cap, _f(t) <= cap))
        xn = xn * x
    _, tail = geometric_tail([_f(t) for t in terms])
    return CriticalEvaluation(neumaier_sum(terms), tail, len(terms), tuple(flagged), tuple(terms))


# --------------------------------------------------------------------------
# Backward series
# --------------------------------------------------------------------------

def rs_combination(rmap: RationalMap, q: SeriesQuery, crit: CriticalData | None = None
                   ) -> KernelCombination:
    """sum_{n < N} x^n (R*)^n k_a as a kernel combination."""
    crit = crit if crit is not None else critical_data(rmap)
    iterates = iterate_combination(rmap, KernelCombination.single(q.kind, q.base, 1 + 0 * q.x),
                                   q.N - 1, crit)
    out = KernelCombination()
    xn = 1 + 0 * q.x
    for f in iterates:
        out = out + f * xn
        xn = xn * q.x
    return out


def rs_truncated(rmap: RationalMap, q: SeriesQuery, z, crit: CriticalData | None = None):
    return rs_combination(rmap, q, crit)(z)


# --------------------------------------------------------------------------
# Cauchy products and the series relations
# --------------------------------------------------------------------------

def cauchy_product(A, B, N: int) -> list:
    """c_i = sum_{j<=i} a_j b_{i-j} for i < N.

    Float and complex inputs use compensated sums; anything else (Fraction,
    mpmath) is summed exactly in its own arithmetic.
    """
    if len(A) < N or len(B) < N:
        raise ValueError("both sequences need at least N coefficients")
    inexact = any(isinstance(v, (float, complex)) for v in (*A[:N], *B[:N]))
    total = neumaier_sum if inexact else (lambda vals: sum(vals[1:], vals[0]))
    return [total([A[j] * B[i - j] for j in range(i + 1)]) for i in range(N)]


@dataclass(frozen=True)
class Prop6Report:
    probe: complex
    residuals: tuple      # |left_n - right_n| for n = 0 .. N
    left: tuple
    right: tuple

    @property
    def max_residual(self) -> float:
        return max(self.residuals)


def verify_prop6(rmap: RationalMap, a, N: int = 20, z=2 + 1j, *, kind: str = GAMMA,
                 dps: int | None = None) -> Prop6Report:
    """Order-by-order check of the column relation between the three series.

    Left, order n:  (R*)^n k_a (z), by iterating the closed form from base a.
    Right, order n: the n-th modified term plus
        sum_i b_i sum_{k<n} [k_{R^k a}(c_i) / (R^k)'(a)] (R*)^{n-1-k} k_{d_i}(z),
    i.e. the Cauchy product shifted by one order, with the iterates of
    k_{d_i} computed separately from base d_i.
    """
    with _precision(dps):
        m = rmap.to_mp() if dps else rmap
        if dps:
            a, z = _lift(a), _lift(z)
        crit = critical_data(m)
        left = [f(z) for f in iterate_combination(m, KernelCombination.single(kind, a), N, crit)]
        orbit = orbit_cocycle(m, a, N)
        require_noncritical_orbit(orbit)
        if orbit.escaped:
            raise PreconditionError(f"orbit of {complex(a):.6g} escapes before order {N}")
        modified = [kernel_eval(Kernel(kind, w), z) / d for w, d in zip(orbit.points, orbit.cocycle)]
        columns = []
        for c, b, d in zip(crit.points, crit.residues, crit.values):
            if Kernel(kind, d).is_zero:
                continue
            alpha = [0 * b if Kernel(kind, w).is_zero else kernel_eval(Kernel(kind, w), c) / dd
                     for w, dd in zip(orbit.points, orbit.cocycle)]
            beta = [f(z) for f in iterate_combination(m, KernelCombination.single(kind, d), N, crit)]
            columns.append((b, cauchy_product(alpha, beta, N + 1)))
        right = []
        for n in range(N + 1):
            parts = [modified[n]]
            if n >= 1:
                parts.extend(b * conv[n - 1] for b, conv in columns)
            right.append(neumaier_sum(parts))
        residuals = tuple(_f(lv - rv) for lv, rv in zip(left, right))
        return Prop6Report(complex(z), residuals, tuple(complex(v) for v in left),
                           tuple(complex(v) for v in right))


@dataclass(frozen=True)
class Cor9Report:
    x: complex
    z: complex
    N: int
    lhs: complex
    rhs: complex
    residual: float
    bound: float


def verify_cor9(rmap: RationalMap, a, x, z, N: int = 100, *, kind: str = GAMMA,
                dps: int | None = None) -> Cor9Report:
    """|RS(x,z,a) - A(x,z,a) - x sum_i b_i RS(x,z,d_i) A(x,c_i,a)| with every series cut at N terms.

    ``dps`` runs the whole computation in mpmath at that many digits; pass
    exact inputs (``Fraction`` or strings such as ``"-1/3"``) so that the
    base point is not the nearest double.
    """
    with _precision(dps):
        m = rmap.to_mp() if dps else rmap
        if dps:
            a, x, z = _lift(a), _lift(x), _lift(z)
        crit = critical_data(m)
        q = SeriesQuery(a, x, N, kind)
        lhs = rs_truncated(m, q, z, crit)
        parts = [modified_series_eval(m, q, z).value]
        for j, (c, b, d) in enumerate(zip(crit.points, crit.residues, crit.values)):
            if Kernel(kind, d).is_zero:
                continue
            rs_d = rs_truncated(m, SeriesQuery(d, x, N, kind), z, crit)
            a_c = A_at_critical(m, a, j, x, N, kind=kind, crit=crit).value
            parts.append(x * b * rs_d * a_c)
        rhs = neumaier_sum(parts)
        ax = _f(x)
        bound = ax ** N / (1 - ax) if ax < 1 else math.inf
        return Cor9Report(complex(x), complex(z), N, complex(lhs), complex(rhs),
                          _f(lhs - rhs), bound)


# --------------------------------------------------------------------------
# Constants from the orbit of a critical value
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ABConstants:
    A: complex
    B: complex
    tail_A: float
    tail_B: float
    N: int

    def to_json(self) -> dict:
        return {"A": _pair(self.A), "B": _pair(self.B), "tail_A": self.tail_A,
                "tail_B": self.tail_B, "N": self.N}


def ab_constants(rmap: RationalMap, d1, N: int = DEFAULT_ORDER) -> ABConstants:
    """A = sum R^n(d1)/(R^n)'(d1) and B = sum 1/(R^n)'(d1), n < N."""
    if N < 1:
        raise ValueError("N must be >= 1")
    orbit = orbit_cocycle(rmap, d1, N - 1)
    require_noncritical_orbit(orbit)
    a_terms = [w / d for w, d in zip(orbit.points, orbit.cocycle)]
    b_terms = [1 / d for d in orbit.cocycle]
    _, tail_a = geometric_tail([_f(t) for t in a_terms])
    _, tail_b = geometric_tail([_f(t) for t in b_terms])
    return ABConstants(neumaier_sum(a_terms), neumaier_sum(b_terms), tail_a, tail_b, N)


@dataclass(frozen=True)
class MobiusIdentityReport:
    lhs: complex          # f(g(z))
    rhs: complex          # ((z+y-1)^2 psi(z) + (1-y-z) B) / (y(y-1))
    residual: float
    claim_gap: float      # |y(y-1) f(g(z)) - (z+y-1)^2 psi(z)| = |(1-y-z) B|


def mobius_transform_identity(rmap: RationalMap, d1, y, z, N: int = 60) -> MobiusIdentityReport:
    """Check the transformed orbit sum against psi under g(z) = y z / (z + y - 1).

    f(w) = sum_n 1/((R^n)'(d1) (w - g(R^n d1))),  psi(z) = sum_n 1/((R^n)'(d1) (z - R^n d1)).
    Termwise, 1/(g(z) - g(w)) = ((z+y-1)^2/(z-w) + 1 - y - z) / (y(y-1)), so
    f(g(z)) = ((z+y-1)^2 psi(z) + (1-y-z) B) / (y(y-1)) with B = sum 1/(R^n)'(d1).
    The B term drops out exactly when B = 0.
    """
    yy = y * (y - 1)
    if _f(yy) < 1e-8:
        warnings.warn(f"y(y-1) = {complex(yy):.2e} is nearly singular", ConditioningWarning,
                      stacklevel=2)
    shift = z + y - 1
    if _f(shift) < 1e-12:
        raise PoleError(1 - y, z)

    def g(w):
        s = w + y - 1
        if _f(s) < 1e-12:
            raise PoleError(1 - y, w)
        return y * w / s

    orbit = orbit_cocycle(rmap, d1, N - 1)
    require_noncritical_orbit(orbit)
    gz = g(z)
    f_terms, psi_terms, b_terms = [], [], []
    for w, d in zip(orbit.points, orbit.cocycle):
        if _f(z - w) < 1e-13:
            raise PoleError(w, z)
        f_terms.append(1 / (d * (gz - g(w))))
        psi_terms.append(1 / (d * (z - w)))
        b_terms.append(1 / d)
    lhs = neumaier_sum(f_terms)
    psi = neumaier_sum(psi_terms)
    B = neumaier_sum(b_terms)
    rhs = (shift * shift * psi + (1 - y - z) * B) / yy
    gap = _f(yy * lhs - shift * shift * psi)
    return MobiusIdentityReport(complex(lhs), complex(rhs), _f(lhs - rhs), gap)

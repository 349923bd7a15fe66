"""Instability certificates from summable critical points.

For a summable critical point c with value d, the coefficients

    C_j = A(1, c_j, d) = sum_n gamma_{R^n d}(c_j) / (R^n)'(d)

define the relation it imposes on deformation coordinates.  The relation is
trivial when C_{i0} = 1/b_{i0} and every other C_j vanishes; otherwise, or
when the forward sum S is visibly nonzero, the map is certified unstable
(given that c lies in the Julia set, which the caller asserts).

Critical indices are 0-based positions in ``critical_data(rmap).points``.
Only finite critical points enter the relations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CriticalOrbitError, DegenerateKernelError, DivergenceError
from .kernels import GAMMA, Kernel, KernelCombination, kernel_eval
from .rational_map import CriticalData, RationalMap, critical_data, orbit_cocycle
from .ruelle import annulus_grid, apply_pointwise, beltrami_apply, modulus_apply_pointwise
from .series import (
    DEFAULT_ORDER,
    SUMMABLE,
    A_at_critical,
    SeriesQuery,
    _lift,
    _pair,
    _precision,
    ab_constants,
    forward_series,
    modified_series_combination,
)

TOL = 1e-8
TOL_RANK = 1e-8
CERT_FACTOR = 10.0
TAIL_FLOOR = 1e-14

UNSTABLE = "unstable-certified"
TRIVIAL_RELATION = "trivial-relation"
INCONCLUSIVE = "inconclusive"


def _f(v) -> float:
    return float(abs(v))


# --------------------------------------------------------------------------
# Relation coefficients and triviality
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RelationCoefficients:
    index: int
    C: tuple            # None where the kernel is degenerate (c_j in {0, 1})
    tails: tuple
    S: complex
    S_tail: float
    orbit_distance: tuple   # dist(c_j, computed orbit of d_{i0})
    flagged: tuple = ()


def relation_coefficients(rmap: RationalMap, i0: int, N: int = DEFAULT_ORDER, *,
                          crit: CriticalData | None = None) -> RelationCoefficients:
    """C_j = A(1, c_j, d_{i0}) truncated after N terms, with tail bounds.

    The tail of C_j is bounded by sup|w||w-1| / (|c_j(c_j-1)| dist(c_j, orbit))
    times the forward-series tail.  Raises :class:`DivergenceError` unless the
    forward series from c_{i0} shows summable evidence.
    """
    crit = crit if crit is not None else critical_data(rmap)
    c0, d0 = crit.points[i0], crit.values[i0]
    fwd = forward_series(rmap, c0, N)
    if fwd.verdict != SUMMABLE:
        raise DivergenceError(f"critical point {i0} has verdict {fwd.verdict!r}")
    orbit = orbit_cocycle(rmap, d0, N - 1)
    sup_w = max(_f(w) * _f(w - 1) for w in orbit.points)
    C, tails, dists, flagged = [], [], [], []
    for j, c in enumerate(crit.points):
        dist = min(_f(w - c) for w in orbit.points)
        dists.append(dist)
        if Kernel(GAMMA, c).is_zero:
            C.append(None)
            tails.append(0.0)
            continue
        ev = A_at_critical(rmap, d0, j, 1.0, N, crit=crit)
        C.append(ev.value)
        tails.append(sup_w / (_f(c) * _f(c - 1) * dist) * fwd.tail if dist > 0 else math.inf)
        flagged.extend((j,) + f for f in ev.flagged)
    return RelationCoefficients(i0, tuple(C), tuple(tails), fwd.total, fwd.tail,
                                tuple(dists), tuple(flagged))


@dataclass(frozen=True)
class TrivialityResult:
    verdict: str                 # "trivial" | "non-trivial"
    main_deviation: float        # |C_{i0} - 1/b_{i0}|
    max_other: float             # max_{j != i0} |C_j|
    tol: float
    margin_warning: bool

    @property
    def margin(self) -> float:
        return max(self.main_deviation, self.max_other)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "main_deviation": self.main_deviation,
                "max_other": self.max_other, "tol": self.tol,
                "margin_warning": self.margin_warning}


def classify_relation(C: Sequence, b: Sequence, i0: int, tol: float = TOL) -> TrivialityResult:
    """Pure triviality decision on given coefficients (``None`` entries are skipped).

    ``margin_warning`` is set when the decisive quantity is within a factor
    of 10 of ``tol`` on either side.
    """
    if C[i0] is None:
        raise DegenerateKernelError(f"C_{i0} is undefined for a critical point at 0 or 1")
    main = _f(C[i0] - 1 / b[i0])
    others = [_f(c) for j, c in enumerate(C) if j != i0 and c is not None]
    max_other = max(others) if others else 0.0
    m = max(main, max_other)
    trivial = main < tol and max_other < tol
    warn = tol / CERT_FACTOR <= m < tol * CERT_FACTOR
    return TrivialityResult("trivial" if trivial else "non-trivial", main, max_other, tol, warn)


def triviality_test(rmap: RationalMap, i0: int, N: int = DEFAULT_ORDER, tol: float = TOL, *,
                    crit: CriticalData | None = None) -> TrivialityResult:
    crit = crit if crit is not None else critical_data(rmap)
    rc = relation_coefficients(rmap, i0, N, crit=crit)
    return classify_relation(rc.C, crit.residues, i0, tol)


# --------------------------------------------------------------------------
# Certificates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    status: str
    route: str | None          # "forward-sum" | "non-trivial-relation" | None
    S_margin: float            # |S| / max(tail, floor)
    internal_inconsistency: bool = False
    reason: str = ""


def certify(S, S_tail: float, triviality: TrivialityResult | None, ab=None, *,
            factor: float = CERT_FACTOR, floor: float = TAIL_FLOOR) -> Certificate:
    """Pure decision rule.

    Unstable when |S| >= factor * max(S_tail, floor), or when the relation is
    non-trivial with margin >= factor * tol.  A trivial relation must come
    with |A| and |B| inside their tails; otherwise the inputs contradict each
    other and ``internal_inconsistency`` is raised.
    """
    s_margin = _f(S) / max(S_tail, floor)
    inconsistent = False
    if triviality is not None and triviality.verdict == "trivial" and ab is not None:
        inconsistent = (_f(ab.A) > max(ab.tail_A, floor) or _f(ab.B) > max(ab.tail_B, floor))
    if s_margin >= factor:
        return Certificate(UNSTABLE, "forward-sum", s_margin, inconsistent)
    if (triviality is not None and triviality.verdict == "non-trivial"
            and triviality.margin >= factor * triviality.tol):
        return Certificate(UNSTABLE, "non-trivial-relation", s_margin, inconsistent)
    if triviality is not None and triviality.verdict == "trivial":
        return Certificate(TRIVIAL_RELATION, None, s_margin, inconsistent)
    return Certificate(INCONCLUSIVE, None, s_margin, inconsistent, "margins below threshold")


@dataclass(frozen=True)
class PointStability:
    index: int
    point: complex
    value: complex
    in_julia: bool
    forward_verdict: str
    S: complex | None = None
    S_tail: float | None = None
    C: tuple = ()
    C_tails: tuple = ()
    bC: tuple = ()
    triviality: TrivialityResult | None = None
    A: complex | None = None
    B: complex | None = None
    tail_A: float | None = None
    tail_B: float | None = None
    orbit_distance: float | None = None
    certificate: Certificate = field(default_factory=lambda: Certificate(INCONCLUSIVE, None, 0.0))

    def to_json(self) -> dict:
        def opt(v):
            return None if v is None else _pair(v)
        cert = self.certificate
        return {
            "index": self.index,
            "point": _pair(self.point),
            "critical_value": _pair(self.value),
            "in_julia": self.in_julia,
            "forward_verdict": self.forward_verdict,
            "S": opt(self.S),
            "S_tail": self.S_tail,
            "C": [opt(c) for c in self.C],
            "C_tails": list(self.C_tails),
            "bC": [opt(v) for v in self.bC],
            "triviality": self.triviality.to_json() if self.triviality else None,
            "A": opt(self.A),
            "B": opt(self.B),
            "tail_A": self.tail_A,
            "tail_B": self.tail_B,
            "orbit_distance": self.orbit_distance,
            "certificate": cert.status,
            "route": cert.route,
            "S_margin": cert.S_margin if math.isfinite(cert.S_margin) else None,
            "internal_inconsistency": cert.internal_inconsistency,
            "reason": cert.reason,
        }


def instability_certificate(rmap: RationalMap, i0: int, N: int = DEFAULT_ORDER,
                            tol: float = TOL, *, in_julia: bool = True,
                            crit: CriticalData | None = None) -> PointStability:
    """Certificate for one critical point, with every intermediate quantity.

    Points without summable evidence (or whose orbit hits a critical point)
    come back ``inconclusive`` rather than raising.
    """
    crit = crit if crit is not None else critical_data(rmap)
    c, d = crit.points[i0], crit.values[i0]
    try:
        fwd = forward_series(rmap, c, N)
    except CriticalOrbitError as exc:
        return PointStability(i0, c, d, in_julia, "critical-orbit",
                              certificate=Certificate(INCONCLUSIVE, None, 0.0, reason=str(exc)))
    if fwd.verdict != SUMMABLE:
        return PointStability(i0, c, d, in_julia, fwd.verdict,
                              certificate=Certificate(INCONCLUSIVE, None, 0.0,
                                                      reason=f"forward series: {fwd.verdict}"))
    rc = relation_coefficients(rmap, i0, N, crit=crit)
    triv = classify_relation(rc.C, crit.residues, i0, tol)
    ab = ab_constants(rmap, d, N)
    cert = certify(rc.S, rc.S_tail, triv, ab)
    if not in_julia and cert.status == UNSTABLE:
        cert = Certificate(INCONCLUSIVE, cert.route, cert.S_margin, cert.internal_inconsistency,
                           "critical point not asserted to lie in the Julia set")
    bC = tuple(None if cj is None else b * cj for b, cj in zip(crit.residues, rc.C))
    own = rc.orbit_distance[i0]
    return PointStability(i0, c, d, in_julia, fwd.verdict, rc.S, rc.S_tail, rc.C, rc.tails, bC,
                          triv, ab.A, ab.B, ab.tail_A, ab.tail_B, own, cert)


@dataclass(frozen=True)
class StabilityReport:
    degree: int
    N: int
    tol: float
    points: tuple

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "N": self.N,
            "tolerances": {"tol": self.tol, "cert_factor": CERT_FACTOR, "tail_floor": TAIL_FLOOR},
            "points": [p.to_json() for p in self.points],
        }


def stability_report(rmap: RationalMap, indices: Sequence[int] | None = None,
                     N: int = DEFAULT_ORDER, tol: float = TOL, *,
                     in_julia: Sequence[bool] | None = None) -> StabilityReport:
    crit = critical_data(rmap)
    indices = list(range(len(crit.points))) if indices is None else list(indices)
    flags = list(in_julia) if in_julia is not None else [True] * len(indices)
    pts = tuple(instability_certificate(rmap, i, N, tol, in_julia=f, crit=crit)
                for i, f in zip(indices, flags))
    return StabilityReport(rmap.degree, N, tol, pts)


# --------------------------------------------------------------------------
# Fixed-point identity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedPointReport:
    N: int
    residual: float            # max |R* phi_N - (phi_N - k_d + sum b_i C_i k_{d_i})|
    predicted: float           # max |next orbit term| = exact value of that difference
    corrected: float           # residual after subtracting the next term


def fixed_point_identity_residual(rmap: RationalMap, i0: int, N: int = 60, probes=None, *,
                                  kind: str = GAMMA, dps: int | None = None) -> FixedPointReport:
    """Compare R* phi_N by preimage sums against kernel bookkeeping.

    phi_N = sum_{n<N} k_{R^n d}/(R^n)'(d) with d = d_{i0}.  The two sides
    differ exactly by the next term k_{R^N d}/(R^N)'(d), so ``residual``
    decays at the truncation rate and ``corrected`` stays at rounding level.
    On the gamma calculus the next term can vanish identically (orbit on
    0 or 1); the tau calculus keeps the decay observable.
    """
    probes = list(probes) if probes is not None else annulus_grid(10)
    with _precision(dps):
        m = rmap.to_mp() if dps else rmap
        pts = [_lift(z) for z in probes] if dps else [complex(z) for z in probes]
        crit = critical_data(m)
        d = crit.values[i0]
        phi = modified_series_combination(m, SeriesQuery(d, 1, N, kind))
        orbit = orbit_cocycle(m, d, N)
        nxt = Kernel(kind, orbit.points[N])
        nxt_coef = 1 / orbit.cocycle[N]
        coeffs = []
        for c, b, dv in zip(crit.points, crit.residues, crit.values):
            if Kernel(kind, dv).is_zero:
                continue
            Cn = sum((0 * b if Kernel(kind, w).is_zero else kernel_eval(Kernel(kind, w), c) / dd
                      for w, dd in zip(orbit.points[:N], orbit.cocycle[:N])), 0 * b)
            coeffs.append((b * Cn, Kernel(kind, dv)))
        rhs_comb = phi - KernelCombination.single(kind, d) + KernelCombination.from_terms(coeffs)
        res, pred, corr = 0.0, 0.0, 0.0
        for z in pts:
            lhs = apply_pointwise(m, phi, z)
            rhs = rhs_comb(z)
            tail = nxt_coef * kernel_eval(nxt, z)
            res = max(res, _f(lhs - rhs))
            pred = max(pred, _f(tail))
            corr = max(corr, _f(lhs - rhs - tail))
        return FixedPointReport(N, res, pred, corr)


# --------------------------------------------------------------------------
# Linear system and rank
# --------------------------------------------------------------------------

def rank_of(matrix: np.ndarray, tol_rank: float = TOL_RANK) -> tuple:
    """(rank, singular values) with the threshold sigma > tol_rank * sigma_max."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.size == 0:
        return 0, np.zeros(0)
    sv = np.linalg.svd(matrix, compute_uv=False)
    if sv[0] == 0:
        return 0, sv
    return int(np.sum(sv > tol_rank * sv[0])), sv


@dataclass(frozen=True)
class LinearRelationSystem:
    indices: tuple
    matrix: np.ndarray
    rank: int
    dimension_bound: int
    singular_values: tuple
    dependencies: tuple        # row combinations B with |B @ matrix| ~ 0
    degenerate_columns: tuple = ()

    def to_json(self) -> dict:
        return {
            "indices": list(self.indices),
            "matrix": [[_pair(v) for v in row] for row in self.matrix],
            "rank": self.rank,
            "dimension_bound": self.dimension_bound,
            "singular_values": [float(s) for s in self.singular_values],
            "dependencies": [[_pair(v) for v in vec] for vec in self.dependencies],
            "degenerate_columns": list(self.degenerate_columns),
        }


def system_from_matrix(matrix, degree: int, indices=(), tol_rank: float = TOL_RANK,
                       degenerate_columns=()) -> LinearRelationSystem:
    matrix = np.asarray(matrix, dtype=complex)
    rank, sv = rank_of(matrix, tol_rank)
    deps = []
    if matrix.size:
        u, s, _ = np.linalg.svd(matrix)
        for k in range(rank, matrix.shape[0]):
            deps.append(tuple(np.conj(u[:, k])))
    return LinearRelationSystem(tuple(indices), matrix, rank, 2 * degree - 2 - rank,
                                tuple(float(x) for x in sv), tuple(deps), tuple(degenerate_columns))


def build_linear_system(rmap: RationalMap, indices: Sequence[int], N: int = DEFAULT_ORDER, *,
                        tol_rank: float = TOL_RANK) -> LinearRelationSystem:
    """Rows 1 - b_i C^{(i)}_i on the diagonal and -b_j C^{(i)}_j elsewhere.

    Columns are the finite critical points; a column whose critical value is
    0 or 1 is zero (that coordinate vanishes) and listed as degenerate.
    """
    crit = critical_data(rmap)
    m = len(crit.points)
    rows = []
    degenerate = [j for j, c in enumerate(crit.points) if Kernel(GAMMA, c).is_zero]
    for i in indices:
        rc = relation_coefficients(rmap, i, N, crit=crit)
        row = []
        for j in range(m):
            cj = rc.C[j]
            if cj is None:
                row.append(0j)
            elif j == i:
                row.append(complex(1 - crit.residues[j] * cj))
            else:
                row.append(complex(-crit.residues[j] * cj))
        rows.append(row)
    matrix = np.array(rows, dtype=complex).reshape(len(rows), m)
    return system_from_matrix(matrix, rmap.degree, indices, tol_rank, degenerate)


# --------------------------------------------------------------------------
# Line-field diagnostics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LineFieldReport:
    modulus_residual: float
    beltrami_residual: float
    probes_used: int
    skipped: tuple            # (probe, reason)


def line_field_residual(rmap: RationalMap, phi: KernelCombination | Callable, probes=None, *,
                        floor: float = 1e-10) -> LineFieldReport:
    """Max over probes of ||R*||phi|(z) - |phi(z)|| and |B_R mu(z) - mu(z)| with mu = conj(phi)/|phi|.

    Diagnostics only: both vanish when phi is a genuine fixed point.
    """
    probes = list(probes) if probes is not None else annulus_grid(20)

    def safe(z):
        try:
            return phi(z)
        except ZeroDivisionError:
            return None

    def mu(w):
        v = safe(w)
        return v.conjugate() / abs(v)

    mod_res, bel_res, used, skipped = 0.0, 0.0, 0, []
    for z in probes:
        v = safe(z)
        if v is None or abs(v) <= floor:
            skipped.append((complex(z), "phi vanishes or is singular at probe"))
            continue
        image = rmap(z)
        vi = safe(image)
        if vi is None or abs(vi) <= floor:
            skipped.append((complex(z), "phi vanishes or is singular at R(probe)"))
            continue
        try:
            mod = modulus_apply_pointwise(rmap, lambda y: abs(phi(y)), z)
            bel = beltrami_apply(rmap, mu, z)
        except (ZeroDivisionError, ArithmeticError) as exc:
            skipped.append((complex(z), str(exc)))
            continue
        mod_res = max(mod_res, abs(mod - abs(v)))
        bel_res = max(bel_res, abs(bel - mu(z)))
        used += 1
    return LineFieldReport(float(mod_res), float(bel_res), used, tuple(skipped))

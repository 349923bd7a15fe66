"""Rational maps fixing 0, 1 and infinity: representation, critical data, orbits.

Polynomials keep their coefficients in ascending order as a tuple of scalars.
Scalars are Python ``complex`` by default; a map built from ``mpmath.mpc``
coefficients (see :meth:`RationalMap.to_mp`) propagates extended precision
through every evaluation in the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from ._numeric import (
    aberth_roots,
    any_mp,
    as_scalar,
    horner,
    is_mp,
    mp_polish,
    scaled_residual,
)
from .errors import (
    CriticalOrbitError,
    InvalidMapError,
    NonSimpleCriticalPointError,
    NotNormalizedError,
    PreconditionError,
)

NORMALIZATION_TOL = 1e-12
OVERFLOW_GUARD = 1e150


# --------------------------------------------------------------------------
# Polynomials
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexPolynomial:
    """Polynomial with complex coefficients in ascending degree order."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = list(self.coefficients)
        if not coeffs:
            raise InvalidMapError("polynomial needs at least one coefficient")
        mp = any_mp(coeffs)
        coeffs = [as_scalar(c, mp) for c in coeffs]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @classmethod
    def from_roots(cls, roots, leading=1.0):
        p = cls((leading,))
        for r in roots:
            p = p * cls((-r, 1.0))
        return p

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coefficients[0] == 0

    @property
    def leading(self):
        return self.coefficients[-1]

    @property
    def is_mp(self) -> bool:
        return is_mp(self.coefficients[0])

    def __call__(self, z):
        return horner(self.coefficients, z)

    def derivative(self) -> "ComplexPolynomial":
        if self.degree == 0:
            return ComplexPolynomial((0 * self.coefficients[0],))
        return ComplexPolynomial(tuple(k * c for k, c in enumerate(self.coefficients) if k))

    def trimmed(self, rel_tol: float) -> "ComplexPolynomial":
        """Drop leading coefficients below ``rel_tol * max|coeff|`` (cancellation noise)."""
        coeffs = list(self.coefficients)
        scale = max(abs(c) for c in coeffs)
        while len(coeffs) > 1 and abs(coeffs[-1]) <= rel_tol * scale:
            coeffs.pop()
        return ComplexPolynomial(tuple(coeffs))

    def _binary(self, other, op):
        if not isinstance(other, ComplexPolynomial):
            other = ComplexPolynomial((other,))
        n = max(len(self.coefficients), len(other.coefficients))
        zero = 0 * self.coefficients[0]
        a = list(self.coefficients) + [zero] * (n - len(self.coefficients))
        b = list(other.coefficients) + [zero] * (n - len(other.coefficients))
        return ComplexPolynomial(tuple(op(x, y) for x, y in zip(a, b)))

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __neg__(self):
        return ComplexPolynomial(tuple(-c for c in self.coefficients))

    def __mul__(self, other):
        if not isinstance(other, ComplexPolynomial):
            return ComplexPolynomial(tuple(c * other for c in self.coefficients))
        a, b = self.coefficients, other.coefficients
        out = [0 * a[0]] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                out[i + j] = out[i + j] + x * y
        return ComplexPolynomial(tuple(out))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = ComplexPolynomial((1 + 0 * self.coefficients[0],))
        for _ in range(k):
            out = out * self
        return out

    def to_mp(self) -> "ComplexPolynomial":
        return ComplexPolynomial(tuple(mpmath.mpc(c) for c in self.coefficients))

    def to_complex(self) -> "ComplexPolynomial":
        return ComplexPolynomial(tuple(complex(c) for c in self.coefficients))

    def to_json(self) -> list:
        return [[float(mpmath.re(c)), float(mpmath.im(c))] for c in self.coefficients]

    @classmethod
    def from_json(cls, data) -> "ComplexPolynomial":
        try:
            coeffs = tuple(complex(float(re), float(im)) for re, im in data)
        except (TypeError, ValueError) as exc:
            raise InvalidMapError(f"coefficients must be [re, im] pairs: {exc}") from exc
        return cls(coeffs)


def poly_roots(p: ComplexPolynomial, *, tol: float = 1e-10, max_iter: int = 200,
               seed: int = 0) -> list:
    """Roots of ``p`` with multiplicity.

    Every returned root satisfies ``|p(r)| <= tol * max|coeff| * max(1, |r|)**deg``.
    For mpmath polynomials the double-precision roots are Newton-refined in
    the current mpmath context.

    Raises
    ------
    RootFindingError
        if the iteration cap is hit; the exception carries the best iterate.
    """
    if p.degree < 1:
        raise ValueError("poly_roots needs degree >= 1")
    base = np.array([complex(c) for c in p.coefficients])
    roots = aberth_roots(base, tol=tol, max_iter=max_iter, seed=seed)
    if p.is_mp:
        return mp_polish(list(p.coefficients), roots)
    return [complex(r) for r in roots]


# --------------------------------------------------------------------------
# Mobius transforms
# --------------------------------------------------------------------------

INFINITY = math.inf


def _is_infinite(z) -> bool:
    if z is None:
        return True
    if isinstance(z, str):
        return z.strip().lower() in {"inf", "infinity", "oo"}
    try:
        return math.isinf(abs(complex(z)))
    except (TypeError, ValueError):
        return False


@dataclass(frozen=True)
class MobiusTransform:
    """z -> (a z + b) / (c z + d), normalized so that ad - bc = 1."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        a, b, c, d = (complex(v) for v in (self.a, self.b, self.c, self.d))
        det = a * d - b * c
        if abs(det) <= 1e-14:
            raise InvalidMapError("Mobius transform is degenerate (ad - bc = 0)")
        s = np.sqrt(det)
        for name, v in zip("abcd", (a, b, c, d)):
            object.__setattr__(self, name, complex(v / s))

    @classmethod
    def identity(cls):
        return cls(1, 0, 0, 1)

    @staticmethod
    def standard_entries(p, q, r) -> tuple:
        """Unnormalized (a, b, c, d) of the transform sending (p, q, r) to (0, 1, infinity).

        Any one of the three points may be infinite.
        """
        if _is_infinite(r):
            p, q = complex(p), complex(q)
            return (1, -p, 0, q - p)
        if _is_infinite(p):
            q, r = complex(q), complex(r)
            return (0, q - r, 1, -r)
        if _is_infinite(q):
            p, r = complex(p), complex(r)
            return (1, -p, 1, -r)
        p, q, r = complex(p), complex(q), complex(r)
        return (q - r, -p * (q - r), q - p, -r * (q - p))

    @classmethod
    def sending_to_standard(cls, p, q, r) -> "MobiusTransform":
        return cls(*cls.standard_entries(p, q, r))

    def __call__(self, z):
        den = self.c * z + self.d
        if den == 0:
            return complex(INFINITY, 0)
        return (self.a * z + self.b) / den

    def inverse(self) -> "MobiusTransform":
        return MobiusTransform(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "MobiusTransform") -> "MobiusTransform":
        """self o other."""
        return MobiusTransform(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def to_json(self) -> dict:
        return {k: [getattr(self, k).real, getattr(self, k).imag] for k in "abcd"}


# --------------------------------------------------------------------------
# Rational maps
# --------------------------------------------------------------------------

def _root_gap(p: ComplexPolynomial, q: ComplexPolynomial) -> float:
    """Smallest scaled value of ``p`` over the roots of ``q`` (large means coprime)."""
    if q.degree < 1 or p.degree < 1:
        return math.inf
    roots = np.array([complex(r) for r in poly_roots(q.to_complex(), tol=1e-8)])
    coeffs = np.array([complex(c) for c in p.coefficients])
    return float(np.min(scaled_residual(coeffs, roots)))


@dataclass(frozen=True)
class RationalMap:
    """R = numerator / denominator with coprime polynomials."""

    numerator: ComplexPolynomial
    denominator: ComplexPolynomial
    coprime_tol: float = field(default=1e-10, compare=False, repr=False)

    def __post_init__(self):
        num, den = self.numerator, self.denominator
        if not isinstance(num, ComplexPolynomial):
            num = ComplexPolynomial(tuple(num))
        if not isinstance(den, ComplexPolynomial):
            den = ComplexPolynomial(tuple(den))
        if den.is_zero:
            raise InvalidMapError("denominator is identically zero")
        if num.is_zero:
            raise InvalidMapError("numerator is identically zero")
        if num.is_mp != den.is_mp:
            num, den = num.to_mp(), den.to_mp()
        gap = _root_gap(num.to_complex(), den.to_complex())
        if gap < self.coprime_tol:
            raise InvalidMapError(
                f"numerator and denominator share a root (scaled gap {gap:.2e})"
            )
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)
        dnum, dden = num.derivative(), den.derivative()
        crit = (dnum * den - num * dden)
        object.__setattr__(self, "_dnum", dnum)
        object.__setattr__(self, "_dden", dden)
        object.__setattr__(self, "_crit_raw", crit)

    # construction -------------------------------------------------------
    @classmethod
    def from_coefficients(cls, numerator: Sequence, denominator: Sequence = (1,)):
        return cls(ComplexPolynomial(tuple(numerator)), ComplexPolynomial(tuple(denominator)))

    @classmethod
    def from_json(cls, data: dict) -> "RationalMap":
        if not isinstance(data, dict) or "numerator" not in data:
            raise InvalidMapError('map spec needs "numerator" (and optional "denominator")')
        num = ComplexPolynomial.from_json(data["numerator"])
        den = ComplexPolynomial.from_json(data.get("denominator", [[1.0, 0.0]]))
        return cls(num, den)

    def to_json(self) -> dict:
        return {"numerator": self.numerator.to_json(), "denominator": self.denominator.to_json()}

    def to_mp(self) -> "RationalMap":
        """Copy with mpmath coefficients (exact conversion; precision from the mp context)."""
        return RationalMap(self.numerator.to_mp(), self.denominator.to_mp())

    def to_complex(self) -> "RationalMap":
        return RationalMap(self.numerator.to_complex(), self.denominator.to_complex())

    # structure ------------------------------------------------------------
    @property
    def degree(self) -> int:
        return max(self.numerator.degree, self.denominator.degree)

    @property
    def is_mp(self) -> bool:
        return self.numerator.is_mp

    @property
    def is_polynomial(self) -> bool:
        return self.denominator.degree == 0

    @property
    def fixes_infinity(self) -> bool:
        return self.numerator.degree > self.denominator.degree

    @property
    def standard_normalized(self) -> bool:
        """R(0) = 0, R(1) = 1 and R(inf) = inf to within 1e-12."""
        if not self.fixes_infinity:
            return False
        if abs(self.denominator(0)) == 0 or abs(self.denominator(1)) == 0:
            return False
        return (abs(self(0)) <= NORMALIZATION_TOL
                and abs(self(1) - 1) <= NORMALIZATION_TOL)

    def critical_polynomial(self) -> ComplexPolynomial:
        """num' den - num den', whose roots are the finite critical points."""
        rel = 1e-13 if not self.is_mp else 100 * float(mpmath.mp.eps)
        return self._crit_raw.trimmed(rel)

    # evaluation -----------------------------------------------------------
    def __call__(self, z):
        return self.numerator(z) / self.denominator(z)

    def derivative(self, z):
        den = self.denominator(z)
        return (self._dnum(z) * den - self.numerator(z) * self._dden(z)) / (den * den)

    def value_and_derivative(self, z):
        num, den = self.numerator(z), self.denominator(z)
        dnum, dden = self._dnum(z), self._dden(z)
        return num / den, (dnum * den - num * dden) / (den * den)

    def second_derivative(self, z):
        w = self._crit_raw
        den = self.denominator(z)
        # R' = W / den^2  =>  R'' = (W' den - 2 W den') / den^3
        return (w.derivative()(z) * den - 2 * w(z) * self._dden(z)) / den ** 3

    def is_pole(self, z, tol: float = 1e-13) -> bool:
        return abs(self.denominator(z)) <= tol * max(
            abs(c) for c in self.denominator.coefficients
        )


def _is_fixed(rmap: RationalMap, z, tol: float) -> bool:
    if _is_infinite(z):
        return rmap.fixes_infinity
    z = complex(z)
    if rmap.is_pole(z):
        return False
    return abs(rmap(z) - z) <= tol * max(1.0, abs(z))


def normalize_to_standard(rmap: RationalMap, fixed_triple, *, tol: float = 1e-10):
    """Conjugate ``rmap`` so the fixed points in ``fixed_triple`` go to (0, 1, infinity).

    Returns ``(h o R o h^-1, h)``.  ``fixed_triple`` entries may be ``math.inf``,
    ``None`` or the string ``"inf"`` for the point at infinity.
    """
    if len(fixed_triple) != 3:
        raise InvalidMapError("need exactly three fixed points")
    pts = list(fixed_triple)
    finite = [complex(p) for p in pts if not _is_infinite(p)]
    n_inf = 3 - len(finite)
    if n_inf > 1 or any(abs(x - y) <= 1e-12 for i, x in enumerate(finite) for y in finite[i + 1:]):
        raise InvalidMapError("fixed points must be distinct")
    for p in pts:
        if not _is_fixed(rmap, p, tol):
            raise InvalidMapError(f"{p} is not a fixed point of the map")
    ha, hb, hc, hd = MobiusTransform.standard_entries(*pts)
    h = MobiusTransform(ha, hb, hc, hd)
    # inverse up to scale; raw entries avoid square-root rounding
    a, b, c, d = hd, -hb, -hc, ha
    top = ComplexPolynomial((b, a))     # a w + b
    bottom = ComplexPolynomial((d, c))  # c w + d
    deg = rmap.degree
    num1 = ComplexPolynomial((0j,))
    den1 = ComplexPolynomial((0j,))
    for k, coef in enumerate(rmap.numerator.coefficients):
        num1 = num1 + coef * (top ** k) * (bottom ** (deg - k))
    for k, coef in enumerate(rmap.denominator.coefficients):
        den1 = den1 + coef * (top ** k) * (bottom ** (deg - k))
    new_num = (ha * num1 + hb * den1).trimmed(1e-13)
    new_den = (hc * num1 + hd * den1).trimmed(1e-13)
    lead = new_den.leading
    result = RationalMap(new_num * (1 / lead), new_den * (1 / lead))
    if not result.standard_normalized:
        raise PreconditionError("conjugated map failed the normalization check")
    return result, h


# --------------------------------------------------------------------------
# Critical data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalData:
    """Finite simple critical points with 1/R' = omega + sum b_i/(z - c_i)."""

    points: tuple
    residues: tuple
    values: tuple
    omega: complex
    simple: tuple

    def __len__(self):
        return len(self.points)

    def reciprocal_derivative(self, z):
        """omega + sum_i b_i / (z - c_i)."""
        acc = self.omega
        for c, b in zip(self.points, self.residues):
            acc = acc + b / (z - c)
        return acc

    def h(self, i: int, z):
        """1/R'(z) - b_i/(z - c_i), extended continuously to z = c_i."""
        acc = self.omega
        for j, (c, b) in enumerate(zip(self.points, self.residues)):
            if j != i:
                acc = acc + b / (z - c)
        return acc

    def h_at_critical(self, i: int):
        return self.h(i, self.points[i])

    def decomposition_residual(self, rmap: RationalMap, probes) -> float:
        worst = 0.0
        for z in probes:
            exact = 1 / rmap.derivative(z)
            approx = self.reciprocal_derivative(z)
            worst = max(worst, float(abs(exact - approx)) / max(1.0, float(abs(exact))))
        return worst

    def to_json(self) -> dict:
        def pair(v):
            return [float(mpmath.re(v)), float(mpmath.im(v))]
        return {
            "points": [pair(c) for c in self.points],
            "residues": [pair(b) for b in self.residues],
            "values": [pair(d) for d in self.values],
            "omega": pair(self.omega),
            "simple": list(self.simple),
        }


def _snap(z, mp: bool, tol: float = 1e-12):
    for target in (0, 1):
        if abs(z - target) <= tol:
            return mpmath.mpc(target) if mp else complex(target)
    return z


def critical_data(rmap: RationalMap, *, tol_root: float = 1e-8,
                  tol_simple: float = 1e-8, require_normalized: bool = True) -> CriticalData:
    """Finite critical points c_i, b_i = 1/R''(c_i), d_i = R(c_i) and omega = 1/R'(inf).

    Critical points within 1e-12 of the fixed points 0 or 1 are snapped onto them.
    """
    if require_normalized and not rmap.standard_normalized:
        raise NotNormalizedError("critical_data expects a map fixing 0, 1 and infinity")
    mp = rmap.is_mp
    w = rmap.critical_polynomial()
    den = rmap.denominator
    if w.degree >= 1:
        points = [_snap(c, mp) for c in poly_roots(w)]
    else:
        points = []
    wprime = w.derivative()
    residues, values, simple = [], [], []
    for c in points:
        dval = den(c)
        second = wprime(c) / (dval * dval)
        scale = max(1.0, float(abs(c))) ** w.degree * max(float(abs(x)) for x in w.coefficients)
        if float(abs(w(c))) > tol_root * scale:
            raise PreconditionError(f"critical point {complex(c)} failed the root check")
        if abs(second) <= tol_simple:
            raise NonSimpleCriticalPointError(c, second)
        residues.append(1 / second)
        values.append(_snap(rmap(c), mp))
        simple.append(True)
    # omega = lim 1/R'(z) = lim den^2 / W at infinity
    if w.degree > 2 * den.degree:
        omega = mpmath.mpc(0) if mp else 0j
    elif w.degree == 2 * den.degree:
        omega = den.leading ** 2 / w.leading
    else:
        raise PreconditionError("R' does not vanish or stay bounded at infinity; infinity is not fixed")
    if len(points) > max(2 * rmap.degree - 2, 0):
        raise PreconditionError("more finite critical points than 2d - 2")
    return CriticalData(tuple(points), tuple(residues), tuple(values), omega, tuple(simple))


# --------------------------------------------------------------------------
# Preimages and orbits
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PreimageSet:
    target: complex
    points: tuple
    derivatives: tuple
    ill_conditioned: tuple
    near_critical_value: bool

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def preimages(rmap: RationalMap, z, *, tol_crit: float = 1e-6) -> PreimageSet:
    """All d solutions y of R(y) = z, i.e. the roots of num(y) - z den(y).

    A preimage is flagged ill-conditioned when |R'(y)| < ``tol_crit``; the
    set is flagged near a critical value when any preimage is.
    """
    poly = rmap.numerator - rmap.denominator * z
    if poly.degree < rmap.degree:
        # z is the image of infinity; the missing preimages sit at infinity.
        raise PreconditionError(f"{complex(z)} has preimages at infinity")
    pts = poly_roots(poly)
    ders = [rmap.derivative(y) for y in pts]
    flags = [bool(abs(d) < tol_crit) for d in ders]
    return PreimageSet(z, tuple(pts), tuple(ders), tuple(flags), any(flags))


@dataclass(frozen=True)
class OrbitCocycle:
    """Points R^n(z0) and derivatives (R^n)'(z0) for n = 0..length."""

    start: complex
    points: tuple
    cocycle: tuple
    escaped: bool = False

    @property
    def length(self) -> int:
        return len(self.points) - 1


def orbit_cocycle(rmap: RationalMap, z0, n: int, *, guard: float = OVERFLOW_GUARD) -> OrbitCocycle:
    """Forward orbit with the chain-rule cocycle.

    An orbit leaving ``|z| <= guard`` (or hitting a pole) is truncated and
    flagged ``escaped`` rather than raising.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    one = mpmath.mpc(1) if rmap.is_mp else 1 + 0j
    z = mpmath.mpc(z0) if rmap.is_mp else complex(z0)
    points, cocycle = [z], [one]
    escaped = False
    for _ in range(n):
        if rmap.is_pole(z):
            escaped = True
            break
        value, der = rmap.value_and_derivative(z)
        if not (abs(value) <= guard) or not (abs(der) < math.inf):
            escaped = True
            break
        cocycle.append(cocycle[-1] * der)
        points.append(value)
        z = value
    return OrbitCocycle(points[0], tuple(points), tuple(cocycle), escaped)


def require_noncritical_orbit(orbit: OrbitCocycle):
    for k, d in enumerate(orbit.cocycle):
        if d == 0:
            raise CriticalOrbitError(
                f"orbit of {complex(orbit.start):.6g} hits a critical point at step {k - 1}"
            )


# --------------------------------------------------------------------------
# Random maps for property suites
# --------------------------------------------------------------------------

def random_standard_map(rng: np.random.Generator, degree: int, *, polynomial: bool | None = None,
                        min_separation: float = 0.05) -> RationalMap:
    """A random map z P(z)/Q(z) with P(1) = Q(1), simple and well-separated critical points."""
    for _ in range(1000):
        poly = rng.random() < 0.3 if polynomial is None else polynomial
        p = rng.normal(size=degree) + 1j * rng.normal(size=degree)
        if poly:
            q = np.array([p.sum()])
        else:
            q = rng.normal(size=degree) + 1j * rng.normal(size=degree)
            q[-1] = q[-1] if abs(q[-1]) > 0.2 else 0.5
            q = q * (p.sum() / q.sum())
        if abs(p[-1]) < 0.2 or not np.all(np.isfinite(q)):
            continue
        num = ComplexPolynomial((0j, *p))
        den = ComplexPolynomial(tuple(q))
        try:
            rmap = RationalMap(num, den, coprime_tol=1e-4)
            if not rmap.standard_normalized:
                continue
            crit = critical_data(rmap, tol_simple=1e-3)
        except (InvalidMapError, PreconditionError):
            continue
        pts = list(crit.points)
        if any(abs(c) < min_separation or abs(c - 1) < min_separation for c in pts):
            continue
        if any(abs(x - y) < min_separation for i, x in enumerate(pts) for y in pts[i + 1:]):
            continue
        return rmap
    raise RuntimeError("could not draw a random map")  # pragma: no cover

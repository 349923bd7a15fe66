import cmath

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from oracles import critical_limit
from ruelle_kit.errors import ConditioningError, DegenerateKernelError
from ruelle_kit.kernels import GAMMA, KINDS, TAU, Kernel, KernelCombination, kernel_eval
from ruelle_kit.rational_map import critical_data, random_standard_map
from ruelle_kit.ruelle import (
    annulus_grid,
    annulus_probes,
    apply_pointwise,
    apply_pointwise_iterated,
    apply_to_combination,
    apply_to_kernel,
    beltrami_apply,
    critical_kernel_coefficient,
    iterate_combination,
    l1_contraction_check,
    modulus_apply_pointwise,
    pushforward,
    pushforward_function,
    pushforward_norm_check,
)


def test_pointwise_examples(g, square):
    assert apply_pointwise(square, Kernel(TAU, 2), 1) == pytest.approx(-1 / 3, abs=1e-15)
    assert apply_pointwise(g, lambda y: 0, 0.3) == 0
    assert apply_pointwise(g, lambda y: 1, 1) == pytest.approx(1 / 8, abs=1e-15)


def test_pointwise_conditioning(square):
    with pytest.raises(ConditioningError):
        apply_pointwise(square, lambda y: 1, 0)


def test_closed_form_square_tau():
    from ruelle_kit.rational_map import RationalMap
    square = RationalMap.from_coefficients([0, 0, 1])
    f = apply_to_kernel(square, Kernel(TAU, 2))
    assert f.coefficient(TAU, 4) == pytest.approx(0.25)
    assert f.coefficient(TAU, 0) == pytest.approx(-0.25)
    assert f(1) == pytest.approx(-1 / 3, abs=1e-15)


def test_closed_form_base_maps_to_fixed_point(g):
    # gamma_1 == 0, so the head term of R* gamma_a vanishes when R(a) = 1
    f = apply_to_kernel(g, Kernel(GAMMA, -1 / 3))
    assert f.coefficient(GAMMA, 1) == 0
    assert apply_to_kernel(g, Kernel(GAMMA, 1)).terms == ()


def test_closed_form_ratio_map(ratio_map):
    f = apply_to_kernel(ratio_map, Kernel(GAMMA, 3))
    assert len(f) == 1
    (coeff, k), = f.terms
    assert k.base == pytest.approx(9 / 5)
    assert coeff == pytest.approx(25 / 12)
    for z in (2 + 1j, -1.5, 0.4j):
        assert f(z) == pytest.approx(apply_pointwise(ratio_map, Kernel(GAMMA, 3), z), rel=1e-13)


def test_lemma_closed_form_random_maps(rng):
    worst = 0.0
    for _ in range(25):
        R = random_standard_map(rng, int(rng.integers(2, 5)))
        crit = critical_data(R)
        exclude = [0, 1, *crit.points, *crit.values]
        for kind in KINDS:
            a = annulus_probes(rng, 1, exclude, radius=0.1)[0]
            closed = apply_to_kernel(R, Kernel(kind, a), crit)
            for z in annulus_probes(rng, 20, exclude + [a, R(a)]):
                exact = apply_pointwise(R, Kernel(kind, a), z)
                worst = max(worst, abs(closed(z) - exact) / max(1, abs(exact)))
    assert worst < 1e-8


def test_critical_coefficients(g, square):
    assert critical_kernel_coefficient(g, 0, TAU) == pytest.approx(0, abs=1e-15)
    assert critical_kernel_coefficient(square, 0, TAU) == 0
    assert critical_kernel_coefficient(g, 0, GAMMA) == pytest.approx(-0.25, abs=1e-14)
    with pytest.raises(DegenerateKernelError):
        critical_kernel_coefficient(square, 0, GAMMA)


def test_critical_coefficient_against_sympy_limit(g):
    c = sp.Rational(1, 3)
    assert float(critical_limit([0, -2, 3], c, "gamma")) == pytest.approx(
        critical_kernel_coefficient(g, 0, GAMMA), abs=1e-14)
    assert float(critical_limit([0, -2, 3], c, "tau")) == pytest.approx(
        critical_kernel_coefficient(g, 0, TAU), abs=1e-14)


def test_critical_coefficient_is_numerical_limit(rng):
    # Richardson-extrapolated 1/R'(a) + b k_a(c) as a -> c.  Evaluated at 30
    # digits: in double precision 1/R'(c + h) loses about eps/h to cancellation.
    for _ in range(5):
        R = random_standard_map(rng, 3)
        crit = critical_data(R)
        with mpmath.workdps(30):
            mcrit = critical_data(R.to_mp())
            for i, (c, b) in enumerate(zip(mcrit.points, mcrit.residues)):
                for kind in KINDS:
                    def expr(h):
                        a = c + h
                        return 1 / R.to_mp().derivative(a) + b * kernel_eval(Kernel(kind, a), c)
                    exact = critical_kernel_coefficient(R, i, kind, crit)
                    for h in (1e-4, 1e-5, 1e-6):
                        extrap = complex(2 * expr(mpmath.mpf(h) / 2) - expr(mpmath.mpf(h)))
                        assert abs(extrap - exact) < 1e-6 * max(1, abs(exact))


def test_critical_base_matches_pointwise(g):
    f = apply_to_kernel(g, Kernel(TAU, 1 / 3))
    for z in (2 + 1j, -0.7j, 3):
        assert f(z) == pytest.approx(apply_pointwise(g, Kernel(TAU, 1 / 3), z), rel=1e-12)


def test_combination_linearity_and_examples(square):
    assert not apply_to_combination(square, KernelCombination())
    single = KernelCombination.single(TAU, 2)
    assert apply_to_combination(square, single).to_json() == apply_to_kernel(square, Kernel(TAU, 2)).to_json()
    doubled = apply_to_combination(square, 2 * single)
    for z in (1, 2j, -3):
        assert doubled(z) == pytest.approx(2 * apply_pointwise(square, single, z), rel=1e-14)


def test_combination_pointwise_at_probes(rng, ratio_map):
    f = KernelCombination.from_terms([(1, Kernel(GAMMA, 2 + 1j)), (-0.5j, Kernel(GAMMA, -1.5)),
                                      (2, Kernel(TAU, 0.3))])
    closed = apply_to_combination(ratio_map, f)
    for z in annulus_probes(rng, 10, [0, 1, 0.5, 2 + 1j, -1.5, 0.3]):
        exact = apply_pointwise(ratio_map, f, z)
        assert abs(closed(z) - exact) <= 1e-8 * max(1, abs(exact))


def test_iterates_match_preimage_tree(square):
    its = iterate_combination(square, KernelCombination.single(GAMMA, 2 + 0.5j), 3)
    for n, f in enumerate(its):
        for z in (1.5 + 1j, -2.2):
            exact = apply_pointwise_iterated(square, Kernel(GAMMA, 2 + 0.5j), z, n)
            assert abs(f(z) - exact) < 1e-12 * max(1, abs(exact))


@given(st.floats(0.5, 3), st.floats(0, 6.28), st.integers(0, 10**6))
def test_right_inverse(r, t, seed):
    rng = np.random.default_rng(seed)
    R = random_standard_map(rng, int(rng.integers(2, 4)))
    a = complex(*rng.normal(size=2))
    f = Kernel(TAU, a)
    z = r * cmath.exp(1j * t)
    if abs(z - a) < 1e-3:
        return
    value = apply_pointwise(R, pushforward_function(R, f), z)
    assert abs(value - f(z)) < 1e-10 * max(1, abs(f(z)))


def test_pushforward_examples(square):
    assert pushforward(square, lambda w: 1, 1) == 2
    assert pushforward(square, lambda w: 0, 0.4) == 0


@given(st.floats(0.5, 3), st.floats(0, 6.28), st.floats(-2, 2), st.floats(-2, 2))
def test_modulus_dominates(r, t, x, y):
    from ruelle_kit.rational_map import RationalMap
    R = RationalMap.from_coefficients([0, 0, 1], [-1, 2])
    a = complex(x, y)
    z = r * cmath.exp(1j * t)
    if abs(z - a) < 1e-3 or min(abs(z), abs(z - 1)) < 1e-3:
        return
    f = Kernel(GAMMA, a)
    try:
        m = modulus_apply_pointwise(R, f, z)
        v = apply_pointwise(R, f, z)
    except (ZeroDivisionError, ConditioningError):
        return
    assert m >= 0
    assert abs(v) <= m * (1 + 1e-12)


def test_modulus_examples(g, square):
    assert modulus_apply_pointwise(square, Kernel(TAU, 2), 1) == pytest.approx(1 / 3)
    assert modulus_apply_pointwise(g, lambda y: 1, 1) == pytest.approx(1 / 8)


def test_beltrami(square, rng):
    assert beltrami_apply(square, lambda w: 0, 0.3) == 0
    assert beltrami_apply(square, lambda w: 1, 1j) == pytest.approx(-1)
    for z in rng.normal(size=20) + 1j * rng.normal(size=20):
        mu = lambda w: 0.7 * cmath.exp(1j * abs(w))  # noqa: E731
        assert abs(beltrami_apply(square, mu, z)) == pytest.approx(abs(mu(square(z))), rel=1e-15)
    with pytest.raises(ConditioningError):
        beltrami_apply(square, lambda w: 1, 0)
    with pytest.raises(ValueError):
        beltrami_apply(square, lambda w: 2, 1)


def test_contraction(square):
    rep = l1_contraction_check(square, KernelCombination.single(GAMMA, 2), 200_000)
    assert rep.passed
    zero = l1_contraction_check(square, KernelCombination(), 10**4)
    assert (zero.before.value, zero.after.value, zero.ratio) == (0, 0, 1.0)


def test_pushforward_equality_case(square):
    rep = pushforward_norm_check(square, KernelCombination.single(GAMMA, 2), 400_000)
    assert abs(rep.ratio - 1) <= 4 * rep.ratio_stderr + 0.01


def test_probe_helpers(rng):
    pts = annulus_probes(rng, 50, [1], radius=0.2)
    assert all(0.5 <= abs(z) <= 3 and abs(z - 1) >= 0.2 for z in pts)
    grid = annulus_grid(20)
    assert len(grid) == 20 and annulus_grid(20) == grid

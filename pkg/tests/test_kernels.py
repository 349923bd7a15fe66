import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import gamma
from ruelle_kit.errors import DegenerateKernelError, PoleError
from ruelle_kit.kernels import (
    GAMMA,
    TAU,
    Kernel,
    KernelCombination,
    fit_l1_constant,
    gamma_as_tau,
    gamma_decompose,
    kernel_eval,
    l1_norm_estimate,
)

# Planar L1 norms of gamma_a, a real.  Two independent adaptive quadratures
# (scipy dblquad on split radial shells; nested quad with the angular
# integral folded by the real-axis symmetry) agree to 1e-11 relative.
L1_ORACLE = {
    2: 27.500743272081543,
    3: 56.2887431640633,
    9: 261.7449852910639,
    27: 1007.0646391169723,
}

finite = st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)


def test_kernel_eval_examples():
    assert abs(kernel_eval(Kernel(GAMMA, -1 / 3), 1 / 3) - float(gamma(Fraction(-1, 3), Fraction(1, 3)))) < 1e-15
    assert kernel_eval(Kernel(GAMMA, -1 / 3), 1 / 3) == pytest.approx(-3, abs=1e-14)
    assert kernel_eval(Kernel(GAMMA, 1), 0.37 + 2j) == 0
    assert kernel_eval(Kernel(TAU, 2), 0) == -0.5


@pytest.mark.parametrize("k, z", [(Kernel(GAMMA, 2), 0), (Kernel(GAMMA, 2), 1),
                                  (Kernel(GAMMA, 2), 2), (Kernel(TAU, 1j), 1j + 1e-14)])
def test_pole_error(k, z):
    with pytest.raises(PoleError) as info:
        kernel_eval(k, z)
    assert isinstance(info.value, ZeroDivisionError)


def test_bad_kind():
    with pytest.raises(ValueError):
        Kernel("beta", 1)


def test_gamma_decompose_examples():
    c = gamma_decompose(-1 / 3)
    assert np.allclose(c, (-4 / 3, 1 / 3, 1))
    assert gamma_decompose(2) == (1, -2, 1)
    assert gamma_as_tau(2 + 0j)(3) == pytest.approx(1 / 3, abs=1e-15)
    with pytest.raises(DegenerateKernelError):
        gamma_decompose(1)


@given(finite, finite)
def test_gamma_decompose_roundtrip(a, z):
    if min(abs(a), abs(a - 1)) < 1e-3 or min(abs(z), abs(z - 1), abs(z - a)) < 1e-3:
        return
    direct = kernel_eval(Kernel(GAMMA, a), z)
    assert abs(direct - gamma_as_tau(a)(z)) < 1e-12 * max(1, abs(direct)) * 1e3


def test_gamma_vanishes_linearly_near_one():
    probes = [2 + 1j, -1.5, 0.5j, 3]
    prev = None
    for eps in (1e-2, 1e-3, 1e-4, 1e-5):
        m = max(abs(kernel_eval(Kernel(GAMMA, 1 + eps), z)) for z in probes)
        if prev is not None:
            assert m / prev == pytest.approx(0.1, rel=0.02)
        prev = m


def test_combination_merges_and_drops():
    f = KernelCombination.from_terms([(1, Kernel(TAU, 2)), (2, Kernel(TAU, 2)),
                                      (5, Kernel(GAMMA, 1)), (0, Kernel(TAU, 3))])
    assert len(f) == 1
    assert f.coefficient(TAU, 2) == 3
    assert not (f - f)


@given(finite, finite, finite, finite)
def test_combination_linearity(a, b, alpha, z):
    f = KernelCombination.single(TAU, a) + KernelCombination.single(GAMMA, b, 2)
    h = KernelCombination.single(GAMMA, a, -1j)
    bad = [0, 1, a, b]
    if min(abs(z - p) for p in bad) < 1e-3:
        return
    lhs = (alpha * f + h)(z)
    rhs = alpha * f(z) + h(z)
    assert abs(lhs - rhs) <= 1e-12 * max(1, abs(alpha * f(z)), abs(h(z)))


def test_combination_json_roundtrip():
    f = KernelCombination.from_terms([(0.5 - 1j, Kernel(GAMMA, 2 + 1j)), (3, Kernel(TAU, -1))])
    data = f.to_json()
    assert data[0] == {"kind": "gamma", "base": [2.0, 1.0], "coeff": [0.5, -1.0]}
    again = KernelCombination.from_json(data)
    assert again.to_json() == data


def test_array_evaluation_matches_scalar(rng):
    f = KernelCombination.from_terms([(1.5, Kernel(GAMMA, 2 + 1j)), (-1j, Kernel(TAU, -0.5))])
    z = rng.normal(size=30) + 1j * rng.normal(size=30)
    assert np.allclose(f.evaluate_array(z), [f(x) for x in z], rtol=1e-13)


def test_integrability():
    assert KernelCombination.single(GAMMA, 2).is_integrable()
    assert not KernelCombination.single(TAU, 2).is_integrable()
    assert gamma_as_tau(3 + 0j).is_integrable()


# -- L1 norms ----------------------------------------------------------------

def test_l1_requires_samples():
    with pytest.raises(ValueError):
        l1_norm_estimate(KernelCombination.single(GAMMA, 2), 100)


def test_l1_zero_and_determinism():
    assert l1_norm_estimate(KernelCombination(), 10**4).value == 0
    f = KernelCombination.single(GAMMA, 2)
    assert l1_norm_estimate(f, 10**5, seed=7) == l1_norm_estimate(f, 10**5, seed=7)


@pytest.mark.parametrize("a", sorted(L1_ORACLE))
def test_l1_matches_quadrature(a):
    est = l1_norm_estimate(KernelCombination.single(GAMMA, a), 10**6, seed=a)
    assert abs(est.value - L1_ORACLE[a]) <= 4 * est.stderr + 1e-3 * L1_ORACLE[a]


def test_l1_ratio_to_alna_decreases():
    ratios = [L1_ORACLE[a] / (a * math.log(a)) for a in (3, 9, 27)]
    assert ratios[0] > ratios[1] > ratios[2]


def test_l1_growth_9_to_27_matches_alna():
    growth = (L1_ORACLE[27] / L1_ORACLE[9]) / ((27 * math.log(27)) / (9 * math.log(9)))
    assert abs(growth - 1) < 0.2


@pytest.mark.xfail(strict=True, reason="true growth from 3 to 9 is 0.775 of the |a|ln|a| prediction")
def test_l1_growth_3_to_9_within_20_percent():
    growth = (L1_ORACLE[9] / L1_ORACLE[3]) / ((9 * math.log(9)) / (3 * math.log(3)))
    assert abs(growth - 1) < 0.2


def test_fitted_constant_bounds_all_bases():
    M = fit_l1_constant([2, 3, 9, 27], samples=200_000)
    for a, v in L1_ORACLE.items():
        assert v <= 1.02 * M * a * math.log(a)
    with pytest.raises(ValueError):
        fit_l1_constant([-1])

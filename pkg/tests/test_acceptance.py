"""Acceptance criteria, each at its stated tolerance.

Every test prints exactly one ``criterion k: PASS|FAIL`` line; the lines are
also collected into the terminal summary.
"""
import cmath
import json
import math
import time
from fractions import Fraction

import numpy as np

from ruelle_kit.cli import main
from ruelle_kit.kernels import GAMMA, TAU, Kernel, KernelCombination
from ruelle_kit.rational_map import RationalMap, critical_data, normalize_to_standard, random_standard_map
from ruelle_kit.ruelle import (
    apply_pointwise,
    apply_to_kernel,
    beltrami_apply,
    l1_contraction_check,
    pushforward_function,
)
from ruelle_kit.series import mobius_transform_identity, verify_cor9, verify_prop6
from ruelle_kit.stability import (
    build_linear_system,
    fixed_point_identity_residual,
    instability_certificate,
    rank_of,
)

G = RationalMap.from_coefficients([0, -2, 3])
SQUARE = RationalMap.from_coefficients([0, 0, 1])


def test_criterion_1_chebyshev_fixture(criterion):
    start = time.perf_counter()
    g, h = normalize_to_standard(RationalMap.from_coefficients([-2, 0, 1]), (-1, 2, "inf"))
    point = instability_certificate(g, 0, 60)
    system = build_linear_system(g, [0], 60)
    elapsed = time.perf_counter() - start
    crit = critical_data(g)
    tol = 1e-10
    checks = {
        "map": g.numerator.coefficients == (0, -2, 3) and g.denominator.coefficients == (1,),
        "h": all(abs(h(z) - (z + 1) / 3) < 1e-15 for z in (0, 1j, 2.5 - 1j)),
        "S": abs(point.S - 2 / 3) < tol,
        "A": abs(point.A + 2 / 3) < tol,
        "B": abs(point.B - 2 / 3) < tol,
        "C1": abs(point.C[0] + 3) < tol,
        "b1": abs(crit.residues[0] - 1 / 6) < tol,
        "entry": abs(system.matrix[0, 0] - 1.5) < tol,
        "verdict": point.triviality.verdict == "non-trivial",
        "certificate": point.certificate.status == "unstable-certified",
        "runtime": elapsed < 1.0,
    }
    criterion(1, checks, f"S={complex(point.S).real:.12g} C1={complex(point.C[0]).real:.12g} "
                         f"entry={system.matrix[0, 0].real:.12g} t={elapsed:.3f}s")


def test_criterion_2_lemma4_suite(criterion, capsys):
    start = time.perf_counter()
    code = main(["verify", "--suite", "lemma4", "--trials", "100", "--seed", "0"])
    elapsed = time.perf_counter() - start
    out = json.loads(capsys.readouterr().out)
    checks = {
        "exit": code == 0,
        "trials": out["trials"] == 100,
        "residual": out["worst_residual"] < 1e-8,
        "runtime": elapsed < 30,
    }
    criterion(2, checks, f"worst relative residual {out['worst_residual']:.2e} t={elapsed:.1f}s")


def test_criterion_3_square_tau_spot(criterion):
    closed = apply_to_kernel(SQUARE, Kernel(TAU, 2))(1)
    pointwise = apply_pointwise(SQUARE, Kernel(TAU, 2), 1)
    checks = {
        "closed": abs(closed + 1 / 3) < 1e-12,
        "pointwise": abs(pointwise + 1 / 3) < 1e-12,
    }
    criterion(3, checks, f"closed={complex(closed).real:.15f} pointwise={complex(pointwise).real:.15f}")


def test_criterion_4_prop6_cor9(criterion):
    worst6 = 0.0
    for a in (Fraction(-1, 3), 0.7, 0.123, 0.9):
        rep = verify_prop6(G, complex(a), 20, 2 + 1j)
        worst6 = max(worst6, rep.max_residual)
    cor = verify_cor9(G, -1 / 3, 0.9, 2 + 1j, 100)
    mp = [verify_cor9(G, Fraction(-1, 3), Fraction(9, 10), "2+1j", N, dps=50).residual
          for N in (25, 50, 100)]
    checks = {
        "prop6": worst6 < 1e-8,
        "cor9": cor.residual < 1e-6,
        "doubling": mp[0] > mp[1] > mp[2],
    }
    criterion(4, checks, f"prop6 {worst6:.2e}; cor9 {cor.residual:.2e}; "
                         f"dps50 N=25/50/100 {mp[0]:.1e}/{mp[1]:.1e}/{mp[2]:.1e}")


def test_criterion_5_fixed_point_identity(criterion):
    rep = fixed_point_identity_residual(G, 0, 60)
    # gamma_1 vanishes on the fixture's orbit, so the decay rate is read off the tau calculus
    Ns = (20, 40, 80)
    res = [fixed_point_identity_residual(G, 0, N, kind=TAU, dps=60).residual for N in Ns]
    slopes = [math.log(res[k + 1] / res[k], 4) / (Ns[k + 1] - Ns[k]) for k in range(2)]
    checks = {
        "residual": rep.residual < 1e-8,
        "scaling": all(abs(s + 1) < 0.05 for s in slopes),
    }
    criterion(5, checks, f"N=60 residual {rep.residual:.1e}; tau N=20/40/80 "
                         f"{res[0]:.1e}/{res[1]:.1e}/{res[2]:.1e}")


def test_criterion_6_operator_laws(criterion):
    rng = np.random.default_rng(6)
    worst_inv = 0.0
    for _ in range(100):
        R = random_standard_map(rng, int(rng.integers(2, 5)))
        a = complex(*rng.normal(size=2))
        f = Kernel(TAU, a)
        while True:
            z = complex(*rng.uniform(-3, 3, 2))
            if abs(z - a) > 1e-2:
                break
        value = apply_pointwise(R, pushforward_function(R, f), z)
        worst_inv = max(worst_inv, abs(value - f(z)) / max(1, abs(f(z))))
    contraction = l1_contraction_check(SQUARE, KernelCombination.single(GAMMA, 2 + 1j), 10**6, seed=6)
    worst_b = 0.0
    mu = lambda w: 0.8 * cmath.exp(1j * (w.real - 2 * w.imag))  # noqa: E731
    for z in rng.normal(size=100) + 1j * rng.normal(size=100):
        worst_b = max(worst_b, abs(abs(beltrami_apply(G, mu, z)) - abs(mu(G(z)))))
    checks = {
        "right_inverse": worst_inv < 1e-10,
        "contraction": contraction.passed,
        "beltrami": worst_b <= 4 * np.finfo(float).eps,
    }
    criterion(6, checks, f"inverse {worst_inv:.1e}; L1 ratio {contraction.ratio:.4f} "
                         f"<= {contraction.bound:.4f}; |B| gap {worst_b:.1e}")


def test_criterion_7_mobius_identity(criterion):
    rep = mobius_transform_identity(G, -1 / 3, 5, 2 + 2j, 60)
    criterion(7, {"residual": rep.residual < 1e-9},
              f"residual {rep.residual:.1e} (unmodified claim off by {rep.claim_gap:.3f})")


def test_criterion_8_rank(criterion):
    system = build_linear_system(G, [0], 60)
    scaled = system.matrix * 1e3
    rng = np.random.default_rng(8)
    M = rng.normal(size=(3, 2)) @ rng.normal(size=(2, 4))
    M2 = M.copy()
    M2[1] *= 1e3
    empty = build_linear_system(G, [], 60)
    checks = {
        "rank": system.rank == 1 and system.dimension_bound == 1,
        "scaling": rank_of(scaled)[0] == 1 and rank_of(M)[0] == rank_of(M2)[0] == 2,
        "empty": empty.dimension_bound == 2 * G.degree - 2,
    }
    criterion(8, checks, f"rank {system.rank}, bound {system.dimension_bound}, "
                         f"empty bound {empty.dimension_bound}")

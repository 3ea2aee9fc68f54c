import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import chain_covariance
from qacrystal.criteria import decompose_potential, high_temp_uniqueness
from qacrystal.exact import (CostGuardError, FormError, QuadratureSpec, SliceFunctional, check_comparison,
                             check_fkg, check_gaussian_domination, check_gks, check_lebowitz, check_positivity,
                             dobrushin_bound, j_hat_zero, lattice_approx_moments, log_partition,
                             pair_correlation, total_displacement_moments, ursell, verify_inequalities)
from qacrystal.loops import LoopConfiguration
from qacrystal.model import InteractionSpec, LatticeSpec, ModelSpec, PotentialSpec

X = SliceFunctional.coordinate


def mk(J=0.0, coeffs=(0.0,), h=0.0, L=1, m=1.0, a=1.0, beta=1.0):
    return ModelSpec(LatticeSpec(1, L), InteractionSpec("nearest_neighbor", J), PotentialSpec(list(coeffs), h=h),
                     m=m, a=a, beta=beta)


ONE = [[0]]


def test_gaussian_partition_is_determinant():
    c, beta, P = 0.7, 1.3, 2
    lz, cert = log_partition(mk(coeffs=(c,), beta=beta), P, ONE)
    C = chain_covariance(1.0, 1.0, beta, P)
    exact = -0.5 * math.log(np.linalg.det(np.eye(P) + 2 * (beta / P) * c * C))
    assert cert.ok and lz == pytest.approx(exact, abs=1e-12)


def test_harmonic_partition_is_one():
    lz, _ = log_partition(mk(J=0.0), 3, [[0], [1]])
    assert lz == pytest.approx(0.0, abs=1e-12)


def test_coupled_harmonic_partition():
    # two harmonic sites, coupling J: Z = det(I - eps J C_2)^{-1/2} over slices
    J, beta, P = 0.4, 1.2, 3
    lz, _ = log_partition(mk(J=J, beta=beta), P)
    C = chain_covariance(1.0, 1.0, beta, P)
    eps = beta / P
    K = np.kron(np.array([[0, J], [J, 0]]), np.eye(P))
    exact = -0.5 * math.log(np.linalg.det(np.eye(2 * P) - eps * K @ np.kron(np.eye(2), C)))
    assert lz == pytest.approx(exact, abs=1e-10)


def test_harmonic_second_moment_is_mode_sum():
    res = lattice_approx_moments(mk(), [[(0, 0, 2)], [(0, 0), (0, 1)]], P=3, sites=ONE)
    C = chain_covariance(1.0, 1.0, 1.0, 3)
    assert res.values[0] == pytest.approx(C[0, 0], abs=1e-12)
    assert res.values[1] == pytest.approx(C[0, 1], abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(-1, 0.5), st.floats(0.1, 1), st.floats(0.05, 0.6))
def test_odd_moments_vanish(b1, b2, J):
    m = mk(J=J, coeffs=(b1, b2))
    res = lattice_approx_moments(m, [[(0, 0)], [(1, 1)], [(0, 0, 3)], [(0, 0), (1, 0), (1, 1)]], P=2)
    assert max(abs(v) for v in res.values) < 1e-10
    assert res.certificate.ok


def test_certificate_reported():
    res = lattice_approx_moments(mk(J=0.3, coeffs=(-0.5, 0.5)), [[(0, 0, 2)]], P=3)
    assert res.certificate.q == 64 and res.certificate.q_check == 72
    assert res.certificate.ok and res.certificate.to_dict()["ok"]


def test_cost_guard():
    with pytest.raises(CostGuardError):
        log_partition(mk(L=2), 2)


def test_total_displacement_moments():
    beta, a = 1.4, 1.7
    mom, cert = total_displacement_moments(mk(a=a, beta=beta), 4, 2)
    var = 2 * beta / a
    assert mom[0] == pytest.approx(1.0)
    assert mom[2] == pytest.approx(var, rel=1e-10)
    assert mom[4] == pytest.approx(3 * var ** 2, rel=1e-10)
    assert abs(mom[1]) < 1e-12 and abs(mom[3]) < 1e-12


# FKG ---------------------------------------------------------------

def test_fkg_variance_case():
    m = mk(J=0.3, coeffs=(-0.5, 0.5))
    r = check_fkg(m, X(0, 0), X(0, 0), P=2)
    assert r.passed and r.margin > 0


def test_fkg_different_sites_ferro():
    r = check_fkg(mk(J=0.4, coeffs=(-1.0, 0.5)), X(0, 0), X(1, 1), P=3)
    assert r.passed


def test_fkg_product_measure():
    r = check_fkg(mk(J=0.0, coeffs=(-1.0, 0.5)), X(0, 0, np.tanh), X(1, 1), P=2)
    assert abs(r.value) < 1e-10


def test_fkg_needs_ferroelectric():
    with pytest.raises(FormError):
        check_fkg(mk(J=-0.3), X(0, 0), X(1, 0), P=2)


# GKS ---------------------------------------------------------------

def test_gks_single_odd_factor_vanishes():
    r, _ = check_gks(mk(J=0.3, coeffs=(-0.5, 0.5)), [(0, 0, lambda x: x, "odd")], P=2)
    assert abs(r.value) < 1e-10 and r.passed


def test_gks_two_point_and_covariance():
    m = mk(J=0.3, coeffs=(-0.5, 0.5))
    r1, _ = check_gks(m, [(0, 0, lambda x: x, "odd"), (1, 0, lambda x: x, "odd")], P=2)
    assert r1.passed and r1.value > 0
    r1, r2 = check_gks(m, [(0, 0, lambda x: x, "odd")], [(1, 1, lambda x: x, "odd")], P=2)
    k, _ = pair_correlation(m, (0, 0), (1, 1), P=2)
    assert r2.value == pytest.approx(k, abs=1e-12) and r2.passed


def test_gks_rejects_bad_factor():
    with pytest.raises(FormError):
        check_gks(mk(J=0.3), [(0, 0, np.cos, "even")], P=2)
    with pytest.raises(FormError):
        check_gks(mk(J=0.3, h=-0.1), [(0, 0, np.tanh, "odd")], P=2)


# Lebowitz and Gaussian domination -----------------------------------------

PTS = [(0, 0), (1, 1), (0, 1), (1, 0)]


def test_ursell_vanishes_for_gaussian():
    U, _ = ursell(mk(J=0.4, coeffs=(0.3,)), PTS, P=2)
    assert abs(U) < 1e-9
    r = check_gaussian_domination(mk(J=0.4, coeffs=(0.3,)), PTS + [(0, 0), (1, 1)], P=2)
    assert abs(r.margin) < 1e-9


def test_lebowitz_quartic_equal_points():
    r = check_lebowitz(mk(J=0.3, coeffs=(0.2, 0.5)), [(0, 0)] * 4, P=2)
    assert r.passed and r.value < 0


def test_fourth_cumulant_single_site():
    m = mk(J=0.0, coeffs=(0.2, 0.5))
    r = check_lebowitz(m, [(0, 0)] * 4, P=2)
    mom = lattice_approx_moments(m, [[(0, 0, 2)], [(0, 0, 4)]], P=2).values
    assert r.value == pytest.approx(mom[1] - 3 * mom[0] ** 2, abs=1e-10)
    assert r.value <= 1e-9


def test_domination_at_n2_is_minus_ursell():
    m = mk(J=0.3, coeffs=(-0.4, 0.6))
    U = check_lebowitz(m, PTS, P=2).value
    assert check_gaussian_domination(m, PTS, P=2).margin == pytest.approx(-U, abs=1e-12)


def test_domination_six_points():
    rng = np.random.default_rng(9)
    m = mk(J=0.3, coeffs=(0.1, 0.6))
    pts = [(int(rng.integers(2)), int(rng.integers(2))) for _ in range(6)]
    assert check_gaussian_domination(m, pts, P=2).passed


def test_lebowitz_requires_convex_v():
    with pytest.raises(FormError):
        check_lebowitz(mk(J=0.3, coeffs=(-0.5, -0.1, 0.2)), PTS, P=2)


# comparison and positivity --------------------------------------------------

def test_comparison_inequality():
    m = mk(J=0.4, coeffs=(0.0, 0.5), L=2)
    region = [[0], [1]]
    xi = LoopConfiguration(1.0, [[-1], [2]], np.full((2, 2), 0.8))
    r = check_comparison(m, (0, 0), (1, 1), xi, P=2, sites=region)
    assert r.passed and r.value < 0
    with pytest.raises(FormError):
        check_comparison(m, (0, 0), (1, 1), LoopConfiguration(1.0, [[-1], [2]], -np.ones((2, 2))), P=2,
                         sites=region)


def test_positivity_with_boundary():
    m = mk(J=0.4, coeffs=(-0.6, 0.5), L=2, h=0.2)
    xi = LoopConfiguration(1.0, [[-1], [2]], np.array([[0.5, -1.0], [1.0, 0.2]]))
    assert check_positivity(m, (0, 1), (1, 0), P=2, sites=[[0], [1]], boundary=xi).passed


def test_seeded_sweep_passes():
    results = verify_inequalities(seed=3, draws=2)
    names = {r.name for r in results}
    assert names == {"fkg", "gks1", "gks2", "lebowitz", "gaussian_domination", "comparison", "positivity"}
    assert all(r.passed and r.certificate.ok for r in results)
    assert all("P" in r.to_dict()["params"] for r in results)


# Dobrushin ---------------------------------------------------------------

def test_dobrushin_convex_case():
    for J in (0.2, 0.6):
        m = mk(J=J, coeffs=(0.0, 1.0), a=1.0)
        assert dobrushin_bound(m, 0.0, 0.0).unique == (j_hat_zero(m) < 1.0)


def test_dobrushin_high_temperature_limit():
    m = mk(J=0.3, coeffs=(-1.0, 1.0), beta=1e-9)
    bd = dobrushin_bound(m, 0.25, 0.0)
    assert bd.row_sum == pytest.approx(j_hat_zero(m) / m.a, rel=1e-8)
    assert np.allclose(bd.matrix, np.abs(m.interaction_matrix()) * bd.c_ls)


@pytest.mark.parametrize("J", [0.05, 0.2, 0.5])
def test_dobrushin_matches_criteria(J):
    m = mk(J=J, coeffs=(-1.0, 1.0), beta=1.0)
    dec = decompose_potential(m.potential, m.a)
    assert dobrushin_bound(m, dec.delta, dec.b).unique == high_temp_uniqueness(dec, m).holds

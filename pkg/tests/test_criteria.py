import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from qacrystal.criteria import (Phi, PreconditionError, convex_envelope, criteria_report, decompose_potential,
                                f_dls, high_temp_uniqueness, infrared_lower_bound, lee_yang_condition, nn_intensity,
                                phase_transition_threshold, phi, quantum_stabilization, rigidity, t_star,
                                theta_3_direct, theta_d, transition_condition)
from qacrystal.model import InteractionSpec, LatticeSpec, ModelSpec, PotentialSpec, j_hat_zero


def mk(d=3, J=0.1, coeffs=(-1.0, 1.0), m=1.0, a=1.0, beta=1.0, kind="nearest_neighbor", h=0.0):
    return ModelSpec(LatticeSpec(d, 1), InteractionSpec(kind, J, 1.0), PotentialSpec(list(coeffs), h=h),
                     m=m, a=a, beta=beta)


# decomposition -------------------------------------------------------------

def test_decomposition_examples():
    d0 = decompose_potential(PotentialSpec([0.0]))
    assert (d0.delta, d0.b) == (0.0, 0.0)
    d1 = decompose_potential(PotentialSpec([1.0, 1.0]))
    assert d1.delta == 0.0 and d1.b == pytest.approx(2.0)
    d2 = decompose_potential(PotentialSpec([-1.0, 1.0]))
    assert d2.b == 0.0 and d2.delta == pytest.approx(0.25, abs=1e-12)
    x1, x2 = d2.envelope.segments[0]
    assert x1 == pytest.approx(-1 / math.sqrt(2), abs=1e-10) and x2 == pytest.approx(1 / math.sqrt(2), abs=1e-10)


def test_weak_nonconvexity_absorbed_by_harmonic_part():
    d = decompose_potential(PotentialSpec([-0.3, 1.0]), a=1.0)
    assert d.delta == 0.0 and d.b == pytest.approx(-0.6)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 0.5), st.floats(-0.5, 1), st.floats(0.05, 1))
def test_decomposition_invariants(b1, b2, b3):
    pot = PotentialSpec([b1, b2, b3])
    dec = decompose_potential(pot, a=0.2)
    x = np.linspace(-4, 4, 4001)
    v1, v2 = dec.v1(pot, x), dec.v2(pot, x)
    assert np.max(np.abs(v1 + v2 - pot(x))) < 1e-12
    # midpoint convexity of V1 + a x^2/2 - b x^2/2 on the grid
    w = v1 + 0.5 * (0.2 - (0.2 + dec.b)) * x ** 2 if dec.envelope is None else v1
    curv = w[:-2] + w[2:] - 2 * w[1:-1]
    scale = 1e-10 * max(1.0, np.max(np.abs(w)))
    if dec.envelope is None:
        assert np.all(v1[:-2] + v1[2:] - 2 * v1[1:-1] >= dec.b * (x[1] - x[0]) ** 2 - scale)
    else:
        assert np.all(curv >= -scale)
    assert dec.delta >= 0 and np.max(v2) - np.min(v2) <= dec.delta + 1e-9


def test_envelope_of_asymmetric_well():
    env = convex_envelope(np.array([0, 0.5, -1.0, 0.0, 1.0]), -3, 3)
    x = np.linspace(-3, 3, 2001)
    f = 0.5 * x - x ** 2 + x ** 4
    assert np.all(env(x) <= f + 1e-12)
    e = env(x)
    assert np.all(e[:-2] + e[2:] - 2 * e[1:-1] >= -1e-10)


# high-temperature uniqueness -------------------------------------------------

def test_convex_case_reduces_to_coupling_bound():
    for J in (0.1, 0.4):
        m = mk(J=J, coeffs=(0.5, 1.0))
        dec = decompose_potential(m.potential, m.a)
        assert high_temp_uniqueness(dec, m).holds == (j_hat_zero(m) < m.a + dec.b)


def test_beta_sweep_threshold():
    m = mk(J=0.1)
    dec = decompose_potential(m.potential, m.a)
    beta0 = math.log((m.a + dec.b) / j_hat_zero(m)) / dec.delta
    for beta in (0.5 * beta0, 0.99 * beta0):
        assert high_temp_uniqueness(dec, m.replace(beta=beta)).holds
    for beta in (1.01 * beta0, 2 * beta0):
        assert not high_temp_uniqueness(dec, m.replace(beta=beta)).holds


def test_mass_independence():
    m = mk(J=0.1, beta=3.0)
    dec = decompose_potential(m.potential, m.a)
    assert high_temp_uniqueness(dec, m) == high_temp_uniqueness(dec, m.replace(m=10.0))


def test_no_interaction_is_trivially_unique():
    m = mk(J=0.0)
    p = high_temp_uniqueness(decompose_potential(m.potential), m)
    assert p.holds and p.margin == -math.inf


def test_uniqueness_matches_row_sum_identity():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = mk(J=rng.uniform(0.01, 1), coeffs=(rng.uniform(-2, 1), rng.uniform(0.1, 2)),
               a=rng.uniform(0.5, 2), beta=rng.uniform(0.1, 5))
        dec = decompose_potential(m.potential, m.a)
        row = j_hat_zero(m) * math.exp(m.beta * dec.delta) / (m.a + dec.b)
        assert high_temp_uniqueness(dec, m).holds == (row < 1)


# quantum stabilization ------------------------------------------------------

def test_harmonic_rigidity_is_a():
    m = mk(J=0.1, coeffs=(0.0,), a=2.0)
    _, rig, _ = rigidity(m)
    assert rig == pytest.approx(2.0, rel=1e-6)
    assert quantum_stabilization(m).holds == (j_hat_zero(m) < 2.0)


def test_rigidity_grows_as_mass_decreases():
    vals = [rigidity(mk(m=m, coeffs=(-1.0, 0.25)))[1] for m in (1.0, 0.1, 0.01)]
    assert vals[0] < vals[1] < vals[2]


def test_stabilization_flag_is_arithmetic():
    m = mk(J=0.3, coeffs=(-0.2, 1.0), m=0.1)
    _, rig, _ = rigidity(m)
    assert quantum_stabilization(m).holds == (rig > 6 * 0.3)


def test_stabilization_needs_even_potential():
    with pytest.raises(PreconditionError):
        quantum_stabilization(mk(h=0.1))


# lattice Green function --------------------------------------------------------

def test_theta_3_dual_methods():
    assert theta_d(3) == pytest.approx(theta_3_direct(), rel=1e-4)


def test_theta_against_bessel_quadrature():
    # untruncated exponential representation by adaptive quadrature
    f = lambda t: special.i0e(t) ** 4
    val, _ = integrate.quad(f, 0, np.inf, limit=500, epsrel=1e-12)
    assert theta_d(4) == pytest.approx(val, rel=1e-7)


def test_theta_bounds_and_trend():
    dt = [d * theta_d(d) for d in range(3, 11)]
    assert all(v > 1 for v in dt)
    assert all(b < a for a, b in zip(dt, dt[1:]))


def test_theta_needs_three_dimensions():
    with pytest.raises(ValueError):
        theta_d(2)


# DLS function and phi --------------------------------------------------------

def test_f_examples():
    assert f_dls(0.0) == 1.0
    assert f_dls(math.tanh(1.0)) == pytest.approx(math.tanh(1.0), abs=1e-12)


@settings(max_examples=50)
@given(st.floats(1e-6, 1e4))
def test_f_inverts_u_tanh_u(u):
    s = u * math.tanh(u)
    assert f_dls(s) == pytest.approx(math.tanh(u) / u, rel=1e-11)


def test_f_convex_decreasing():
    s = np.linspace(0, 20, 100)
    f = np.array([f_dls(v) for v in s])
    assert np.all(np.diff(f) < 0)
    assert np.all(f[:-2] + f[2:] - 2 * f[1:-1] >= 0)


def test_phi_limits_and_monotone():
    assert phi(1e-12, 1.0) < 1e-11
    t = np.geomspace(1e-3, 1e3, 200)
    v = np.array([phi(x, 1.0) for x in t])
    # phi = alpha^2 tanh(u)^2 saturates to machine precision by t ~ 20
    dv = np.diff(v)
    assert np.all(dv >= -1e-15) and np.all(dv[v[1:] < 1 - 1e-9] > 0) and np.all(v <= 1 + 1e-15)
    for alpha in (0.5, 2.0):
        assert phi(1e6 * alpha, alpha) == pytest.approx(alpha ** 2, rel=1e-3)


# t*, beta* --------------------------------------------------------------------

def test_t_star_closed_form_and_scaling():
    assert t_star(PotentialSpec([-1.0, 1.0]), 1.0) == pytest.approx(1 / 12, abs=1e-14)
    assert t_star(PotentialSpec([-1.0, 2.0]), 1.0) == pytest.approx(1 / 24, abs=1e-14)


def test_t_star_residual_random():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.uniform(0.2, 2)
        pot = PotentialSpec([-a / 2 - rng.uniform(0.01, 2), rng.uniform(0, 1), rng.uniform(0.01, 1)])
        ts = t_star(pot, a)
        assert ts > 0 and abs(a + 2 * pot.coeffs[0] + Phi(pot, ts)) < 1e-10


def test_t_star_precondition():
    with pytest.raises(PreconditionError):
        t_star(PotentialSpec([-0.2, 1.0]), 1.0)


def test_threshold_absent_below_condition():
    th = theta_d(3)
    J = 0.5 * th / (8 * (1 / 12) ** 2)
    res = phase_transition_threshold(mk(J=J))
    assert not res.exists and res.beta_star is None
    assert not transition_condition(mk(J=J)).holds


def test_threshold_residual_and_monotone_in_J():
    betas = []
    for J in (10.0, 20.0, 40.0, 80.0):
        res = phase_transition_threshold(mk(J=J))
        assert res.exists and res.residual < 1e-9
        target = 2 * res.theta / J
        assert abs(target - phi(res.beta_star, 4 * res.t_star)) < 1e-9
        betas.append(res.beta_star)
    assert all(b < a for a, b in zip(betas, betas[1:]))


def test_threshold_flag_matches_condition():
    rng = np.random.default_rng(2)
    for _ in range(100):
        m = mk(J=rng.uniform(0.1, 40), m=rng.uniform(0.2, 3), a=rng.uniform(0.2, 2),
               coeffs=(-rng.uniform(1.1, 3), rng.uniform(0.1, 2)))
        ts = t_star(m.potential, m.a)
        cj1 = m.interaction.J > theta_d(3) / (8 * m.m * ts ** 2)
        assert phase_transition_threshold(m).exists == cj1 == transition_condition(m).holds


def test_threshold_needs_three_dimensions():
    with pytest.raises(PreconditionError):
        phase_transition_threshold(mk(d=2, J=10.0))


def test_nn_intensity_for_decaying_kernel():
    m = mk(J=0.7, kind="exponential")
    assert nn_intensity(m) == pytest.approx(0.7 * math.exp(-1.0))


def test_stabilization_and_transition_are_disjoint():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(30):
        a = rng.uniform(0.5, 1.5)
        m = mk(J=rng.uniform(0.01, 3), m=float(10 ** rng.uniform(-1.5, 0.5)), a=a,
               coeffs=(-a / 2 - rng.uniform(0.1, 1.5), rng.uniform(0.1, 1)))
        ts = t_star(m.potential, a)
        gap, rig, _ = rigidity(m)
        if gap < 1 / (2 * m.m * ts):
            checked += 1
            assert not (quantum_stabilization(m).holds and transition_condition(m).holds)
    assert checked > 10


# Lee-Yang condition --------------------------------------------------------

def test_lee_yang_examples():
    assert lee_yang_condition(PotentialSpec([0.0, 0.0, 1.0]), 1.0) is False
    assert lee_yang_condition(PotentialSpec([-1.0, 1.0, 1.0]), 1.0) is True
    assert lee_yang_condition(PotentialSpec([0.0, 1.0]), 1.0) is True


@settings(max_examples=50)
@given(st.floats(-2, 2), st.floats(-1, 2), st.floats(0.05, 2), st.floats(0.1, 2))
def test_cubic_condition_matches_root_test(b1, b2, b3, a):
    # b + u'(t) = 3 b3 t^2 + 2 b2 t + b1 + a/2 + b: Laguerre for some b >= 0
    # iff both roots are real and <= 0 after a nonnegative shift
    cond = lee_yang_condition(PotentialSpec([b1, b2, b3]), a)
    c = b1 + a / 2
    shift = max(0.0, -c)
    ok = any(b2 >= 0 and (2 * b2) ** 2 - 12 * b3 * (c + s) >= -1e-12
             for s in (shift, shift + 1e-9))
    assert cond == (b2 >= 0 and c <= b2 ** 2 / (3 * b3))
    assert cond == ok or abs(c - b2 ** 2 / (3 * b3)) < 1e-9


def test_higher_degree_is_sufficient_only():
    assert lee_yang_condition(PotentialSpec([0.0, 1.0, 1.0, 0.2]), 1.0) in (True, None)


# report ------------------------------------------------------------------

def test_report_serializes():
    r = criteria_report(mk(J=12.0)).to_dict()
    assert r["beta_star"] is not None and r["transition_condition"]["holds"]
    assert r["t_star"] == pytest.approx(1 / 12)
    h = criteria_report(mk(J=0.0, coeffs=(0.0,), d=1)).to_dict()
    assert h["high_temperature_uniqueness"]["margin"] == "-inf"


def test_infrared_bound_vanishes_at_threshold():
    for J in (10.0, 40.0):
        m = mk(J=J)
        bs = phase_transition_threshold(m).beta_star
        assert infrared_lower_bound(m.replace(beta=bs)) == pytest.approx(0.0, abs=1e-12)
        assert infrared_lower_bound(m.replace(beta=0.9 * bs)) < 0 < infrared_lower_bound(m.replace(beta=1.1 * bs))

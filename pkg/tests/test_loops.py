import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import chain_covariance, mode_eigenvalues
from qacrystal.loops import (FreeMeasureSpec, LoopConfiguration, LoopPath, continuum_slice_variance,
                             discrete_action, energy, energy_with_boundary, holder_norm, holder_seminorm,
                             lebowitz_presutti_check, mode_coefficients, norm_alpha, sample_free_loop,
                             sample_free_loops)
from qacrystal.model import InteractionSpec, LatticeSpec, ModelSpec, PotentialSpec, WeightFamily


def model(d=1, L=1, J=0.3, coeffs=(-0.5, 1.0), beta=1.0, boundary="zero", h=0.0):
    return ModelSpec(LatticeSpec(d, L, boundary), InteractionSpec("nearest_neighbor", J),
                     PotentialSpec(list(coeffs), h=h), beta=beta)


# value types ---------------------------------------------------------------

def test_loop_path_validation():
    with pytest.raises(ValueError):
        LoopPath(1.0, [1.0])
    with pytest.raises(ValueError):
        LoopPath(1.0, [1.0, np.nan])
    p = LoopPath(2.0, [0, 1, 2, 3])
    assert p.P == 4 and np.allclose(p.times, [0, 0.5, 1, 1.5])


def test_configuration_json_round_trip():
    rng = np.random.default_rng(0)
    cfg = LoopConfiguration(1.5, [[0, 1], [1, 0]], rng.normal(size=(2, 5)))
    back = LoopConfiguration.from_json(cfg.to_json())
    assert back.beta == cfg.beta and np.array_equal(back.sites, cfg.sites)
    assert np.array_equal(back.values, cfg.values)


def test_configuration_rejects_missing_keys():
    with pytest.raises(ValueError, match="beta"):
        LoopConfiguration.from_dict({"P": 2, "sites": []})


# free measure --------------------------------------------------------------

def test_spectrum_matches_reference():
    spec = FreeMeasureSpec(1.0, 1.0, 1.0, 16)
    assert np.allclose(spec.eigenvalues, mode_eigenvalues(1.0, 1.0, 1.0, 16))
    assert np.allclose(spec.covariance(), chain_covariance(1.0, 1.0, 1.0, 16))


def test_covariance_inverts_chain_precision():
    spec = FreeMeasureSpec(0.7, 1.3, 2.0, 9)
    P, e = spec.P, spec.eps
    A = np.diag(np.full(P, 2 * spec.m / e + e * spec.a))
    for p in range(P):
        A[p, (p + 1) % P] -= spec.m / e
        A[p, (p - 1) % P] -= spec.m / e
    assert np.allclose(spec.covariance() @ A, np.eye(P), atol=1e-12)


def test_slice_variance_matches_mode_sum():
    rng = np.random.default_rng(1)
    spec = FreeMeasureSpec(1.0, 1.0, 1.0, 16)
    x = sample_free_loops(spec, rng, 100_000)
    v = x[:, 0] ** 2
    assert abs(v.mean() - spec.slice_variance()) < 5 * v.std() / math.sqrt(len(v))


def test_mode_variances():
    rng = np.random.default_rng(2)
    spec = FreeMeasureSpec(1.0, 1.0, 1.0, 16)
    c = mode_coefficients(sample_free_loops(spec, rng, 100_000), spec.beta)
    power = np.abs(c) ** 2
    se = power.std(axis=0) / math.sqrt(len(power))
    assert np.all(np.abs(power.mean(axis=0) - spec.mode_variances) < 5 * se)


def test_stiff_spring_freezes():
    rng = np.random.default_rng(3)
    vals = [sample_free_loops(FreeMeasureSpec(1.0, a, 1.0, 8), rng, 2000).var() for a in (1, 1e2, 1e4)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-3


def test_single_sample_is_finite_loop():
    p = sample_free_loop(FreeMeasureSpec(1.0, 1.0, 1.0, 8), np.random.default_rng(0))
    assert isinstance(p, LoopPath) and p.P == 8


def test_continuum_limit_monotone():
    ref = continuum_slice_variance(1.0, 1.0, 1.0)
    k = np.arange(-200000, 200001)
    direct = np.sum(1.0 / ((2 * np.pi * k) ** 2 + 1.0))
    assert ref == pytest.approx(direct, rel=1e-5)
    errs = [abs(FreeMeasureSpec(1.0, 1.0, 1.0, P).slice_variance() - ref) for P in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


# energy ----------------------------------------------------------------

def test_zero_loops_have_zero_energy():
    m = model(L=2)
    cfg = LoopConfiguration.zeros(1.0, m.lattice.sites(), 6)
    assert energy(cfg, m) == 0.0


def test_flat_single_site_loop():
    m = model(L=1, J=0.0, beta=2.0)
    cfg = LoopConfiguration.constant(2.0, [[0]], 7, 0.8)
    box = LoopConfiguration(2.0, m.lattice.sites(), np.array([[0.8] * 7, [0.0] * 7]))
    assert energy(box, m) == pytest.approx(2.0 * m.potential(0.8))
    act = discrete_action(m, 7, [[0]])
    assert float(act.energy(cfg.values)) == pytest.approx(2.0 * m.potential(0.8))


def test_flat_two_site_loops():
    J, beta, x, y = 0.4, 1.5, 0.7, -0.3
    m = model(J=J, beta=beta)
    cfg = LoopConfiguration(beta, [[0], [1]], np.array([[x] * 5, [y] * 5]))
    act = discrete_action(m, 5, cfg.sites)
    expected = -beta * J * x * y + beta * (m.potential(x) + m.potential(y))
    assert float(act.energy(cfg.values)) == pytest.approx(expected)


def test_boundary_zero_reduces_to_energy():
    m = model(L=1)
    rng = np.random.default_rng(4)
    cfg = LoopConfiguration(1.0, [[0]], rng.normal(size=(1, 4)))
    xi = LoopConfiguration.zeros(1.0, [[1], [-1]], 4)
    assert energy_with_boundary(cfg, xi, m) == pytest.approx(float(discrete_action(m, 4, [[0]]).energy(cfg.values)))


@pytest.mark.parametrize("d", [1, 2])
def test_constant_boundary(d):
    J, beta, x, c = 0.3, 1.2, 0.6, 0.9
    m = model(d=d, L=1, J=J, beta=beta)
    origin = [[0] * d]
    nbrs = [list(v) for v in np.vstack([np.eye(d, dtype=int), -np.eye(d, dtype=int)])]
    cfg = LoopConfiguration.constant(beta, origin, 6, x)
    xi = LoopConfiguration.constant(beta, nbrs, 6, c)
    base = float(discrete_action(m, 6, origin).energy(cfg.values))
    assert energy_with_boundary(cfg, xi, m) == pytest.approx(base - beta * J * 2 * d * x * c)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_energy_even_under_global_flip(seed):
    rng = np.random.default_rng(seed)
    m = model(L=1, J=0.5)
    inner = LoopConfiguration(1.0, [[0]], rng.normal(size=(1, 5)))
    xi = LoopConfiguration(1.0, [[1], [-1]], rng.normal(size=(2, 5)))
    flip_inner = LoopConfiguration(1.0, [[0]], -inner.values)
    flip_xi = LoopConfiguration(1.0, [[1], [-1]], -xi.values)
    assert energy_with_boundary(inner, xi, m) == pytest.approx(energy_with_boundary(flip_inner, flip_xi, m))
    ordered = LoopConfiguration(1.0, m.lattice.sites(), rng.normal(size=(2, 5)))
    assert energy(ordered, m) == pytest.approx(
        energy(LoopConfiguration(1.0, m.lattice.sites(), -ordered.values), m))


def test_energy_translation_invariant_on_torus():
    rng = np.random.default_rng(5)
    L = 2
    m = model(d=2, L=L, J=0.2, boundary="periodic")
    sites = m.lattice.sites()
    vals = rng.normal(size=(len(sites), 4))
    base = energy(LoopConfiguration(1.0, sites, vals), m)
    shifted = [m.lattice.index((c + np.array([1, 0]) + L - 1) % (2 * L) - (L - 1)) for c in sites]
    perm = np.empty(len(sites), dtype=int)
    perm[shifted] = np.arange(len(sites))
    assert energy(LoopConfiguration(1.0, sites, vals[perm]), m) == pytest.approx(base)


def test_energy_quadrature_converges():
    beta = 1.3
    m = model(J=0.0, beta=beta, coeffs=(-0.5, 1.0))
    f = lambda t: 0.4 + 0.7 * np.exp(np.sin(2 * np.pi * t / beta))
    exact, _ = integrate.quad(lambda t: m.potential(f(t)), 0, beta, epsabs=1e-14, epsrel=1e-14)
    errs = []
    for P in (4, 8, 16, 32):
        t = np.arange(P) * beta / P
        cfg = LoopConfiguration(beta, [[0]], f(t)[None, :])
        errs.append(abs(float(discrete_action(m, P, [[0]]).energy(cfg.values)) - exact))
    for a, b in zip(errs, errs[1:]):
        assert b <= a / 4 or b < 1e-12


# norms -----------------------------------------------------------------

def test_norm_alpha_examples():
    w = WeightFamily("exponential")
    sites = [[0], [1], [3]]
    assert norm_alpha(LoopConfiguration.zeros(2.0, sites, 4), w, 0.5, [0]) == 0.0
    one = LoopConfiguration(2.0, sites, np.array([[0.0] * 4, [1.5] * 4, [0.0] * 4]))
    assert norm_alpha(one, w, 0.5, [1]) == pytest.approx(1.5 * math.sqrt(2.0))


def test_norm_alpha_anchor_change_is_bounded():
    # the weight triangle inequality bounds the change of anchor by w(l0, l1)^{-1/2}
    rng = np.random.default_rng(6)
    w = WeightFamily("exponential")
    cfg = LoopConfiguration(1.0, [[i] for i in range(-6, 7)], rng.normal(size=(13, 4)))
    n0, n1 = norm_alpha(cfg, w, 0.7, [0]), norm_alpha(cfg, w, 0.7, [3])
    assert np.isfinite(n0) and np.isfinite(n1)
    assert n1 <= n0 / math.sqrt(w(3.0, 0.7, 1)) + 1e-12


def test_holder_examples():
    assert holder_seminorm(LoopPath(1.0, [2.0] * 6), 0.25) == 0.0
    assert holder_seminorm(LoopPath(1.0, [0.8, -0.8]), 0.25) == pytest.approx(1.6 / 0.5 ** 0.25)
    with pytest.raises(ValueError):
        holder_seminorm(LoopPath(1.0, [0.0, 1.0]), 0.5)


@settings(max_examples=30)
@given(st.integers(0, 2 ** 31), st.floats(0.1, 2.0))
def test_holder_monotone_in_sigma(seed, beta):
    path = LoopPath(beta, np.random.default_rng(seed).normal(size=6))
    vals = [holder_seminorm(path, s) for s in (0.1, 0.2, 0.3, 0.45)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))


def test_lebowitz_presutti_examples():
    b, sigma = 0.8, 0.25
    sites = [[i] for i in range(-5, 6)]
    core = [[0]]
    assert lebowitz_presutti_check(LoopConfiguration.zeros(1.0, sites, 4), b, sigma, [0], core)
    hat = np.sqrt(b * np.log1p(np.abs(np.arange(-5, 6))))
    flat = LoopConfiguration(1.0, sites, np.repeat(hat[:, None], 4, axis=1))
    assert lebowitz_presutti_check(flat, b, sigma, [0], core)
    assert holder_norm(flat.path(0), sigma) ** 2 == pytest.approx(b * math.log(6))
    bad = flat.values.copy()
    bad[-1] *= 2
    assert not lebowitz_presutti_check(LoopConfiguration(1.0, sites, bad), b, sigma, [0], core)

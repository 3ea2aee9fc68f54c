"""Path-integral Metropolis sampler for local and periodic Gibbs kernels.

The chain targets exp(-S) with S the full discrete action (free loop action
plus interaction energy).  Two local moves are used: a Gaussian step of one
slice x_lp, and a rigid shift of a whole loop (the zero mode of site l).
Acceptance uses the exact local change of S.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numba import njit

from .loops import DiscreteAction, LoopConfiguration, LoopPath, discrete_action, holder_norm
from .model import LatticeSpec, ModelError, ModelSpec, PotentialSpec

PROPOSALS = ("slice", "zero_mode", "mixed")
ZERO_MODE_FRACTION = 0.2
TARGET_ACCEPTANCE = 0.45
ADAPT_EVERY = 25


class SamplerError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration and statistics

@dataclass(frozen=True)
class SamplerConfig:
    """Chain length (in sweeps, burn-in included), thinning and proposal.

    One sweep is n P move attempts.  ``scale`` multiplies the natural step
    sizes; during burn-in it is adapted toward 45% acceptance per move kind.
    """

    sweeps: int = 20000
    burn_in: int = 2000
    thinning: int = 1
    proposal: str = "mixed"
    scale: float = 1.0
    seed: int = 12345
    adapt: bool = True

    def __post_init__(self):
        if not (self.sweeps > self.burn_in >= 0):
            raise ValueError("sampler needs sweeps > burn_in >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not self.scale > 0:
            raise ValueError("proposal scale must be positive")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}, got {self.proposal!r}")

    @property
    def zero_mode_fraction(self) -> float:
        return {"slice": 0.0, "zero_mode": 1.0, "mixed": ZERO_MODE_FRACTION}[self.proposal]

    @property
    def n_measurements(self) -> int:
        return (self.sweeps - self.burn_in) // self.thinning


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def __float__(self):
        return float(self.value)


@dataclass
class SampleStats:
    """Estimator summary of one chain (or of merged independent chains)."""

    names: list
    mean: np.ndarray
    variance: np.ndarray
    tau: np.ndarray
    se: np.ndarray
    n_samples: int
    acceptance: dict = field(default_factory=dict)
    series: np.ndarray | None = None
    samples: np.ndarray | None = None
    final: LoopConfiguration | None = None
    flags: list = field(default_factory=list)

    def __getitem__(self, name: str) -> Estimate:
        i = self.names.index(name)
        return Estimate(float(self.mean[i]), float(self.se[i]))

    def rows(self) -> list[dict]:
        return [{"observable": n, "mean": float(m), "se": float(s), "tau_int": float(t),
                 "variance": float(v), "n": self.n_samples}
                for n, m, s, t, v in zip(self.names, self.mean, self.se, self.tau, self.variance)]


def integrated_autocorrelation(series: np.ndarray) -> tuple[float, float]:
    """(tau_int, asymptotic variance) by the initial positive sequence rule.

    tau_int = 1/2 + sum_{t>=1} rho_t, so that Var(mean) = 2 tau_int var / N.
    The sum is cut at the first non-positive pair Gamma_k = g_2k + g_2k+1.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 4:
        return 0.5, float(np.var(x))
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    g0 = acov[0]
    if g0 <= 0:
        return 0.5, 0.0
    total = 0.0
    for k in range(n // 2):
        pair = acov[2 * k] + acov[2 * k + 1]
        if pair <= 0:
            break
        total += pair
    sigma2 = max(2 * total - g0, g0 * 1e-12)
    return sigma2 / (2 * g0), sigma2


def summarize(names: Sequence[str], series: np.ndarray) -> SampleStats:
    series = np.asarray(series, dtype=float).reshape(len(series), -1)
    n = series.shape[0]
    mean = series.mean(axis=0)
    var = series.var(axis=0)
    tau = np.empty(series.shape[1])
    se = np.empty(series.shape[1])
    for j in range(series.shape[1]):
        tau[j], s2 = integrated_autocorrelation(series[:, j])
        se[j] = math.sqrt(s2 / n)
    return SampleStats(list(names), mean, var, tau, se, n, series=series)


def merge_stats(parts: Sequence[SampleStats]) -> SampleStats:
    """Pool independent chains: count-weighted means, independent errors."""
    names = parts[0].names
    if any(p.names != names for p in parts):
        raise ValueError("cannot merge chains with different observables")
    n = np.array([p.n_samples for p in parts], dtype=float)
    w = n / n.sum()
    mean = sum(wi * p.mean for wi, p in zip(w, parts))
    var = sum(wi * (p.variance + (p.mean - mean) ** 2) for wi, p in zip(w, parts))
    se = np.sqrt(sum((wi * p.se) ** 2 for wi, p in zip(w, parts)))
    tau = np.where(var > 0, se ** 2 * n.sum() / (2 * np.maximum(var, 1e-300)), 0.5)
    return SampleStats(list(names), mean, var, tau, se, int(n.sum()))


# ---------------------------------------------------------------------------
# compiled kernel

@njit(cache=True)
def _poly(c, x):
    out = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        out = out * x + c[k]
    return out


@njit(cache=True)
def _local_field(x, l, p, eta, ptr, idx, val):
    h = eta[l, p]
    for k in range(ptr[l], ptr[l + 1]):
        h += val[k] * x[idx[k], p]
    return h


@njit(cache=True)
def delta_slice(x, l, p, y, m, eps, a, vpoly, eta, ptr, idx, val, jdiag):
    """Change of the action when x[l, p] is replaced by y."""
    P = x.shape[1]
    xo = x[l, p]
    left = x[l, (p - 1) % P]
    right = x[l, (p + 1) % P]
    dsq = y * y - xo * xo
    kin = (m / eps) * (dsq - (y - xo) * (left + right))
    pot = eps * (0.5 * (a - jdiag[l]) * dsq + _poly(vpoly[l], y) - _poly(vpoly[l], xo))
    return kin + pot - eps * _local_field(x, l, p, eta, ptr, idx, val) * (y - xo)


@njit(cache=True)
def delta_zero_mode(x, l, shift, m, eps, a, vpoly, eta, ptr, idx, val, jdiag):
    """Change of the action when the whole loop of site l moves by shift."""
    P = x.shape[1]
    out = 0.0
    for p in range(P):
        xo = x[l, p]
        y = xo + shift
        out += 0.5 * (a - jdiag[l]) * (y * y - xo * xo) + _poly(vpoly[l], y) - _poly(vpoly[l], xo)
        out -= _local_field(x, l, p, eta, ptr, idx, val) * shift
    return eps * out


@njit(cache=True, nogil=True)
def _sweeps(x, normals, uniforms, zero_frac, step_slice, step_zero,
            m, eps, a, vpoly, eta, ptr, idx, val, jdiag, counts):
    """Run normals.shape[0] sweeps in place; counts = [tried, accepted] x kind."""
    n, P = x.shape
    for s in range(normals.shape[0]):
        k = 0
        for l in range(n):
            for p in range(P):
                z = normals[s, k]
                if uniforms[s, k, 0] < zero_frac:
                    shift = step_zero * z
                    dS = delta_zero_mode(x, l, shift, m, eps, a, vpoly, eta, ptr, idx, val, jdiag)
                    counts[1, 0] += 1
                    if dS <= 0.0 or uniforms[s, k, 1] < math.exp(-dS):
                        for q in range(P):
                            x[l, q] += shift
                        counts[1, 1] += 1
                else:
                    y = x[l, p] + step_slice * z
                    dS = delta_slice(x, l, p, y, m, eps, a, vpoly, eta, ptr, idx, val, jdiag)
                    counts[0, 0] += 1
                    if dS <= 0.0 or uniforms[s, k, 1] < math.exp(-dS):
                        x[l, p] = y
                        counts[0, 1] += 1
                k += 1


def _csr(J: np.ndarray):
    off = np.array(J, dtype=float)
    jdiag = np.diag(off).copy()
    np.fill_diagonal(off, 0.0)
    ptr = [0]
    idx, val = [], []
    for row in off:
        nz = np.flatnonzero(row)
        idx.extend(nz)
        val.extend(row[nz])
        ptr.append(len(idx))
    return (np.array(ptr, dtype=np.int64), np.array(idx, dtype=np.int64),
            np.array(val, dtype=float), jdiag)


@dataclass
class Chain:
    """A Metropolis chain over one region; holds its state and step sizes."""

    action: DiscreteAction
    x: np.ndarray
    zero_frac: float
    step_slice: float
    step_zero: float

    def __post_init__(self):
        self.ptr, self.idx, self.val, self.jdiag = _csr(self.action.J)
        self.vpoly = np.ascontiguousarray(self.action.vpoly, dtype=float)
        if self.vpoly.shape[1] == 0:
            self.vpoly = np.zeros((self.action.n, 1))
        self.eta = np.ascontiguousarray(self.action.eta, dtype=float)
        self.x = np.ascontiguousarray(self.x, dtype=float)

    def run(self, n_sweeps: int, rng: np.random.Generator) -> np.ndarray:
        act = self.action
        counts = np.zeros((2, 2), dtype=np.int64)
        if n_sweeps <= 0:
            return counts
        normals = rng.standard_normal((n_sweeps, act.n * act.P))
        uniforms = rng.random((n_sweeps, act.n * act.P, 2))
        _sweeps(self.x, normals, uniforms, self.zero_frac, self.step_slice, self.step_zero,
                act.m, act.eps, act.a, self.vpoly, self.eta, self.ptr, self.idx, self.val,
                self.jdiag, counts)
        return counts

    def delta_slice(self, l: int, p: int, y: float) -> float:
        act = self.action
        return delta_slice(self.x, l, p, y, act.m, act.eps, act.a, self.vpoly, self.eta,
                           self.ptr, self.idx, self.val, self.jdiag)

    def delta_zero_mode(self, l: int, shift: float) -> float:
        act = self.action
        return delta_zero_mode(self.x, l, shift, act.m, act.eps, act.a, self.vpoly, self.eta,
                               self.ptr, self.idx, self.val, self.jdiag)


def natural_steps(action: DiscreteAction) -> tuple[float, float]:
    """Conditional free standard deviations of one slice and of the zero mode."""
    e = action.eps
    return (1.0 / math.sqrt(2 * action.m / e + e * action.a),
            1.0 / math.sqrt(action.beta * action.a))


# ---------------------------------------------------------------------------
# observables

def _builtin(name: str, action: DiscreteAction) -> Callable[[np.ndarray], float]:
    e = action.eps
    if name == "mean":
        return lambda x: float(x.mean())
    if name == "m2":
        return lambda x: float(x.mean() ** 2)
    if name == "S":
        return lambda x: float(e * x.sum())
    if name == "S2":
        return lambda x: float((e * x.sum()) ** 2)
    if name == "x2":
        return lambda x: float(np.mean(x * x))
    raise ValueError(f"unknown observable {name!r}; builtins are mean, m2, S, S2, x2")


def exponential_moment(site: int, beta: float, lam: float, kappa: float,
                       sigma: float = 0.25) -> tuple[str, Callable[[np.ndarray], float]]:
    """Observable exp(lam |w_l|^2_{C^sigma} + kappa |w_l|^2_{L^2}) of one site.

    Pass it to run_chain; its mean is the empirical left-hand side of the
    one-site exponential moment bound, whose constants are existence-only.
    """
    if lam < 0 or kappa < 0:
        raise ValueError("exponential moment needs lam, kappa >= 0")

    def f(x):
        path = LoopPath(beta, x[site])
        l2 = path.eps * float(np.sum(path.values ** 2))
        return math.exp(lam * holder_norm(path, sigma) ** 2 + kappa * l2)
    return f"expmom[{site}]", f


def _observables(observables, action: DiscreteAction) -> tuple[list, list]:
    if observables is None:
        observables = ["mean", "x2", "m2"]
    if isinstance(observables, Mapping):
        return list(observables), list(observables.values())
    names, funcs = [], []
    for o in observables:
        if isinstance(o, str):
            names.append(o)
            funcs.append(_builtin(o, action))
        else:
            name, f = o
            names.append(name)
            funcs.append(f)
    return names, funcs


def slice_moments(points: Sequence) -> dict:
    """Observables x_lp and x_lp x_l'p' for (site, slice) index pairs."""
    obs = {}
    for i, (l, p) in enumerate(points):
        obs[f"x[{l},{p}]"] = (lambda x, l=l, p=p: float(x[l, p]))
        for l2, p2 in points[i:]:
            obs[f"x[{l},{p}]x[{l2},{p2}]"] = (lambda x, l=l, p=p, l2=l2, p2=p2:
                                               float(x[l, p] * x[l2, p2]))
    return obs


# ---------------------------------------------------------------------------
# driver

def _kernel_model(model: ModelSpec, kernel: str) -> ModelSpec:
    lat = model.lattice
    if kernel == "periodic":
        if not model.translation_invariant:
            raise ModelError("the periodic kernel needs a translation-invariant model")
        if not lat.periodic:
            model = model.replace(lattice=LatticeSpec(lat.d, lat.L, "periodic"))
        return model
    if kernel == "standard":
        if lat.periodic:
            model = model.replace(lattice=LatticeSpec(lat.d, lat.L, "zero"))
        return model
    raise ValueError(f"kernel must be 'standard' or 'periodic', got {kernel!r}")


def run_chain(model: ModelSpec, sites=None, boundary: LoopConfiguration | None = None,
              kernel: str = "standard", config: SamplerConfig = SamplerConfig(),
              observables=None, P: int = 8, *, rng: np.random.Generator | None = None,
              initial: LoopConfiguration | None = None,
              keep_samples: bool = False) -> SampleStats:
    """Sample the Gibbs kernel of ``sites`` (default: the box).

    The standard kernel couples the region to a fixed outside configuration
    ``boundary`` (zero if omitted).  The periodic kernel uses the full torus
    box and no boundary.  Observables are builtin names (mean, m2, S, S2, x2)
    or (name, f) pairs / a mapping with f acting on the (n, P) slice array.
    """
    if model.nu != 1:
        raise ModelError("the sampler handles nu = 1")
    if P < 2:
        raise ValueError("P must be >= 2")
    model = _kernel_model(model, kernel)
    if kernel == "periodic":
        if sites is not None and len(np.asarray(sites).reshape(-1, model.lattice.d)) != model.lattice.n_sites:
            raise ModelError("the periodic kernel acts on the full torus box")
        if boundary is not None:
            raise ModelError("the periodic kernel takes no boundary configuration")
        sites = None
    act = discrete_action(model, P, sites, boundary)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    names, funcs = _observables(observables, act)

    x0 = np.zeros((act.n, P))
    if initial is not None:
        if initial.values.shape != x0.shape or not math.isclose(initial.beta, model.beta):
            raise ValueError("initial configuration does not match the region")
        x0 = np.array(initial.values, dtype=float)
    if not np.isfinite(act.total(x0)):
        raise SamplerError("non-finite action at the initial configuration")

    base_slice, base_zero = natural_steps(act)
    scale = np.array([config.scale, config.scale])
    chain = Chain(act, x0, config.zero_mode_fraction, scale[0] * base_slice, scale[1] * base_zero)

    done = 0
    while done < config.burn_in:
        block = min(ADAPT_EVERY, config.burn_in - done)
        counts = chain.run(block, rng)
        done += block
        if config.adapt:
            for k in range(2):
                if counts[k, 0]:
                    rate = counts[k, 1] / counts[k, 0]
                    scale[k] *= math.exp(np.clip(rate - TARGET_ACCEPTANCE, -0.5, 0.5))
            chain.step_slice = scale[0] * base_slice
            chain.step_zero = scale[1] * base_zero

    n_meas = config.n_measurements
    series = np.empty((n_meas, len(names)))
    snaps = np.empty((n_meas, act.n, P)) if keep_samples else None
    totals = np.zeros((2, 2), dtype=np.int64)
    for i in range(n_meas):
        totals += chain.run(config.thinning, rng)
        x = chain.x
        for j, f in enumerate(funcs):
            series[i, j] = f(x)
        if snaps is not None:
            snaps[i] = x
    if not np.all(np.isfinite(chain.x)):
        raise SamplerError("chain diverged to non-finite values")

    stats = summarize(names, series)
    acc = {}
    for k, kind in enumerate(("slice", "zero_mode")):
        if totals[k, 0]:
            acc[kind] = float(totals[k, 1] / totals[k, 0])
            if totals[k, 1] == 0:
                stats.flags.append(f"zero acceptance for {kind} moves after burn-in")
    if stats.flags:
        warnings.warn("; ".join(stats.flags), RuntimeWarning, stacklevel=2)
    stats.acceptance = acc
    stats.samples = snaps
    stats.final = LoopConfiguration(model.beta, act.sites, chain.x.copy())
    return stats


def pair_correlation(stats: SampleStats, l: int, lp: int, p: int, pp: int) -> Estimate:
    """Connected correlation <x_lp x_l'p'> - <x_lp><x_l'p'> from stored samples.

    The standard error propagates through the influence function
    (x - mx)(y - my) - K, whose autocorrelation gives the IPS error.
    """
    if stats.samples is None:
        raise ValueError("pair_correlation needs a chain run with keep_samples=True")
    u = stats.samples[:, l, p]
    v = stats.samples[:, lp, pp]
    du, dv = u - u.mean(), v - v.mean()
    prod = du * dv
    k = float(prod.mean())
    _, s2 = integrated_autocorrelation(prod)
    return Estimate(k, math.sqrt(s2 / len(prod)))


def order_parameter(model: ModelSpec, config: SamplerConfig = SamplerConfig(), P: int = 8,
                    **kwargs) -> Estimate:
    """P_L(beta) = E[(mean of all slices over the torus box)^2], periodic kernel."""
    stats = run_chain(model, kernel="periodic", config=config, observables=["m2"], P=P, **kwargs)
    return stats["m2"]


@dataclass
class PressureCurve:
    h: np.ndarray
    p: np.ndarray
    se: np.ndarray
    anchored: bool
    anchor: float
    anchor_certificate: dict | None
    dp_dh: np.ndarray
    dp_dh_se: np.ndarray

    def second_differences(self) -> tuple[np.ndarray, np.ndarray]:
        """Second divided differences of p with their standard errors."""
        h, p, se = self.h, self.p, self.se
        out, err = [], []
        for i in range(1, len(h) - 1):
            h0, h1, h2 = h[i - 1], h[i], h[i + 1]
            c = np.array([1 / ((h1 - h0) * (h2 - h0)), -1 / ((h1 - h0) * (h2 - h1)),
                          1 / ((h2 - h1) * (h2 - h0))]) * 2
            local = p[i - 1:i + 2]
            out.append(float(c @ local))
            # slope estimates are independent across grid points
            d = self.dp_dh_se
            err.append(float(math.hypot(d[i - 1], d[i + 1]) / (h2 - h0)))
        return np.array(out), np.array(err)

    def rows(self) -> list[dict]:
        return [{"h": float(a), "p": float(b), "se": float(c), "dp_dh": float(d), "dp_dh_se": float(e)}
                for a, b, c, d, e in zip(self.h, self.p, self.se, self.dp_dh, self.dp_dh_se)]


def _with_field(model: ModelSpec, h: float) -> ModelSpec:
    pot = model.potential
    return model.replace(potential=PotentialSpec(pot.coeffs, h))


def pressure_curve(model: ModelSpec, h_grid: Sequence[float], config: SamplerConfig = SamplerConfig(),
                   P: int = 8, sites=None, kernel: str = "standard",
                   rng: np.random.Generator | None = None) -> PressureCurve:
    """p(h) = log Z(h) / |L| by thermodynamic integration from h = 0.

    dp/dh = E_h[S]/|L| and d2p/dh2 = Var_h(S)/|L|; each interval uses the
    cubic Hermite rule built from both.  p(0) comes from the quadrature
    oracle when P |L| <= 6, otherwise the curve is p(h) - p(0).
    """
    from .exact import MAX_DIM, log_partition

    h = np.array(sorted(set(float(v) for v in h_grid)))
    if not np.any(h == 0.0):
        raise ValueError("the h grid must include 0")
    if model.nu != 1:
        raise ModelError("the pressure curve is defined for nu = 1")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    # centered moments make Var(S) an honest sample variance
    means, mse, varS = [], [], []
    n_sites = None
    for hv in h:
        st = run_chain(_with_field(model, hv), sites, None, kernel, config, ["S"], P, rng=rng)
        n_sites = len(st.final.sites)
        means.append(st.mean[0])
        mse.append(st.se[0])
        varS.append(st.variance[0])
    means, mse, varS = (np.array(v) / n_sites for v in (means, mse, varS))

    p = np.zeros_like(h)
    var_p = np.zeros_like(h)
    i0 = int(np.flatnonzero(h == 0.0)[0])
    for direction in (1, -1):
        i = i0
        while 0 <= i + direction < len(h):
            j = i + direction
            dh = h[j] - h[i]
            step = 0.5 * dh * (means[i] + means[j]) + dh * dh / 12 * (varS[i] - varS[j])
            p[j] = p[i] + step
            var_p[j] = var_p[i] + (0.5 * dh) ** 2 * (mse[i] ** 2 + mse[j] ** 2)
            i = j

    anchored, anchor, cert = False, 0.0, None
    n_region = n_sites if sites is None else len(np.asarray(sites).reshape(-1, model.lattice.d))
    if P * n_region <= MAX_DIM:
        km = _kernel_model(model, kernel)
        lz, c = log_partition(_with_field(km, 0.0), P, sites)
        anchored, anchor, cert = True, lz / n_region, c.to_dict()
        p = p + anchor
    return PressureCurve(h, p, np.sqrt(var_p), anchored, anchor, cert, means, mse)

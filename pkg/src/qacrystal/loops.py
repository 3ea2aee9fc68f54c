"""Discretized temperature loops and the periodic Gaussian free measure.

A loop is sampled at P equally spaced times tau_p = p beta / P on the circle
of length beta.  The free measure is the Gaussian with action

    S_0(x) = sum_p [ m (x_p - x_{p+1})^2 / (2 eps) + eps a x_p^2 / 2 ],

eps = beta / P, whose covariance is diagonal in the Fourier modes with
eigenvalues eps lambda_k, lambda_k = m (P/beta)^2 2 (1 - cos 2 pi k/P) + a.
Integrals over tau use the periodic rectangle rule with weight eps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import ModelError, ModelSpec, WeightFamily


# ---------------------------------------------------------------------------
# value types

@dataclass(frozen=True)
class LoopPath:
    beta: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size < 2:
            raise ValueError("a loop needs at least two slices")
        if not np.all(np.isfinite(v)):
            raise ValueError("loop values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def P(self) -> int:
        return self.values.size

    @property
    def eps(self) -> float:
        return self.beta / self.P

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.P) * self.eps


@dataclass(frozen=True)
class LoopConfiguration:
    """Loops on a finite set of sites, all sharing (beta, P).

    ``sites`` are integer lattice coordinates, shape (n, d); ``values`` has
    shape (n, P).
    """

    beta: float
    sites: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        s = np.array(self.sites, dtype=int)
        if s.ndim == 1:
            s = s[:, None]
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != s.shape[0]:
            raise ValueError("values must have shape (n_sites, P)")
        if v.shape[1] < 2:
            raise ValueError("P must be at least 2")
        if not np.all(np.isfinite(v)):
            raise ValueError("loop values must be finite")
        if len({tuple(c) for c in s}) != len(s):
            raise ValueError("duplicate sites in configuration")
        s.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "sites", s)
        object.__setattr__(self, "values", v)

    @property
    def P(self) -> int:
        return self.values.shape[1]

    @property
    def eps(self) -> float:
        return self.beta / self.P

    def path(self, i: int) -> LoopPath:
        return LoopPath(self.beta, self.values[i])

    @classmethod
    def zeros(cls, beta: float, sites, P: int) -> "LoopConfiguration":
        sites = np.asarray(sites)
        return cls(beta, sites, np.zeros((len(sites), P)))

    @classmethod
    def constant(cls, beta: float, sites, P: int, value) -> "LoopConfiguration":
        sites = np.asarray(sites)
        vals = np.broadcast_to(np.asarray(value, dtype=float).reshape(-1, 1), (len(sites), P))
        return cls(beta, sites, vals)

    def to_dict(self) -> dict:
        return {
            "beta": float(self.beta),
            "P": int(self.P),
            "sites": [{"coord": [int(c) for c in coord], "values": [float(x) for x in row]}
                      for coord, row in zip(self.sites, self.values)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "LoopConfiguration":
        for key in ("beta", "P", "sites"):
            if key not in data:
                raise ValueError(f"loop snapshot is missing key '{key}'")
        sites = [s["coord"] for s in data["sites"]]
        values = [s["values"] for s in data["sites"]]
        cfg = cls(float(data["beta"]), sites, values)
        if cfg.P != int(data["P"]):
            raise ValueError("snapshot P does not match the stored values")
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "LoopConfiguration":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# free measure

@dataclass(frozen=True)
class FreeMeasureSpec:
    m: float
    a: float
    beta: float
    P: int

    def __post_init__(self):
        if self.P < 2:
            raise ValueError("P must be at least 2")
        if not (self.m > 0 and self.a > 0 and self.beta > 0):
            raise ValueError("m, a, beta must be positive")

    @property
    def eps(self) -> float:
        return self.beta / self.P

    @property
    def eigenvalues(self) -> np.ndarray:
        """Discrete Matsubara spectrum lambda_k, k = 0..P-1."""
        k = np.arange(self.P)
        return self.m * (self.P / self.beta) ** 2 * 2.0 * (1.0 - np.cos(2 * np.pi * k / self.P)) + self.a

    @property
    def mode_variances(self) -> np.ndarray:
        """sigma_k^2 = 1/lambda_k, the variance of the L^2-normalized mode k."""
        return 1.0 / self.eigenvalues

    def covariance(self) -> np.ndarray:
        """C_pq = (1/P) sum_k e^{2 pi i k (p-q)/P} (P/beta) / lambda_k."""
        P = self.P
        p = np.arange(P)
        k = np.arange(P)
        phase = np.cos(2 * np.pi * np.outer(p, k) / P)
        c = phase @ (1.0 / (self.eps * self.eigenvalues)) / P
        idx = np.subtract.outer(p, p) % P
        return c[idx]

    def slice_variance(self) -> float:
        return float(np.sum(1.0 / (self.eps * self.eigenvalues)) / self.P)


def continuum_slice_variance(m: float, a: float, beta: float) -> float:
    """sum_{k in Z} (1/beta) / (m (2 pi k/beta)^2 + a) in closed form."""
    w = math.sqrt(a / m)
    return 1.0 / (2.0 * m * w * math.tanh(0.5 * beta * w))


def sample_free_loops(spec: FreeMeasureSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent exact samples of the chain, shape (size, P).

    White noise is filtered in the unitary Fourier basis by
    (eps lambda_k)^{-1/2}, which gives covariance exactly
    U diag(1/(eps lambda_k)) U^*.
    """
    z = rng.standard_normal((size, spec.P))
    zk = np.fft.fft(z, axis=1, norm="ortho")
    zk *= 1.0 / np.sqrt(spec.eps * spec.eigenvalues)
    return np.fft.ifft(zk, axis=1, norm="ortho").real


def sample_free_loop(spec: FreeMeasureSpec, rng: np.random.Generator) -> LoopPath:
    return LoopPath(spec.beta, sample_free_loops(spec, rng, 1)[0])


def mode_coefficients(values: np.ndarray, beta: float) -> np.ndarray:
    """Complex coefficients of the loop in the L^2(0, beta)-orthonormal basis.

    With this normalization E|c_k|^2 = 1/lambda_k under the free measure.
    """
    values = np.asarray(values, dtype=float)
    P = values.shape[-1]
    return math.sqrt(beta / P) * np.fft.fft(values, axis=-1, norm="ortho")


# ---------------------------------------------------------------------------
# discrete action

@dataclass(frozen=True)
class DiscreteAction:
    """Energy functional of a finite region at fixed Trotter number.

    ``J`` couples the region's sites, ``vpoly`` holds each site's potential in
    the power basis (field included), and ``eta`` is the field exerted by the
    fixed outside configuration, eta_lp = sum_{l' outside} J_ll' xi_l'p.
    """

    beta: float
    P: int
    m: float
    a: float
    J: np.ndarray
    vpoly: np.ndarray
    eta: np.ndarray
    sites: np.ndarray

    @property
    def n(self) -> int:
        return self.J.shape[0]

    @property
    def eps(self) -> float:
        return self.beta / self.P

    @property
    def free(self) -> FreeMeasureSpec:
        return FreeMeasureSpec(self.m, self.a, self.beta, self.P)

    def potential_values(self, x: np.ndarray) -> np.ndarray:
        """V_l(x_lp), broadcast over leading axes of x with shape (..., n, P)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in self.vpoly.T[::-1]:
            out = out * x + c[:, None]
        return out

    def energy(self, x: np.ndarray) -> np.ndarray:
        """I(x | xi) for x of shape (..., n, P)."""
        x = np.asarray(x, dtype=float)
        e = self.eps
        pair = np.einsum("...ip,ij,...jp->...", x, self.J, x)
        return -0.5 * e * pair + e * np.sum(self.potential_values(x), axis=(-1, -2)) \
            - e * np.sum(self.eta * x, axis=(-1, -2))

    def free_action(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        e = self.eps
        dx = x - np.roll(x, -1, axis=-1)
        return np.sum(0.5 * self.m / e * dx * dx + 0.5 * e * self.a * x * x, axis=(-1, -2))

    def total(self, x: np.ndarray) -> np.ndarray:
        return self.free_action(x) + self.energy(x)


def _site_indices(model: ModelSpec, sites: np.ndarray) -> list:
    out = []
    for c in sites:
        try:
            out.append(model.lattice.index(c))
        except ModelError:
            out.append(None)
    return out


def _site_poly(model: ModelSpec, sites: np.ndarray) -> np.ndarray:
    pot = model.potential
    if pot.per_site:
        idx = _site_indices(model, sites)
        if any(i is None for i in idx):
            raise ModelError("per-site potentials are defined on box sites only")
        polys = [pot.power_coeffs(i) for i in idx]
    else:
        polys = [pot.power_coeffs()] * len(sites)
    width = max(len(p) for p in polys)
    out = np.zeros((len(sites), width))
    for i, p in enumerate(polys):
        out[i, : len(p)] = p
    return out


def discrete_action(model: ModelSpec, P: int, sites=None,
                    boundary: LoopConfiguration | None = None) -> DiscreteAction:
    """Energy functional of ``sites`` (default: the whole box) with outside xi."""
    sites = model.lattice.sites() if sites is None else np.asarray(sites, dtype=int).reshape(-1, model.lattice.d)
    if model.interaction.kind == "matrix" and any(i is None for i in _site_indices(model, sites)):
        raise ModelError("explicit interaction matrices act on box sites only")
    J = model.interaction_matrix(sites)
    eta = np.zeros((len(sites), P))
    if boundary is not None:
        if boundary.P != P or not math.isclose(boundary.beta, model.beta):
            raise ValueError("boundary configuration must share (beta, P) with the region")
        inside = {tuple(c) for c in sites}
        keep = [i for i, c in enumerate(boundary.sites) if tuple(c) not in inside]
        if keep:
            bs = boundary.sites[keep]
            C = model.coupling(sites[:, None, :], bs[None, :, :])
            eta = C @ boundary.values[keep]
    return DiscreteAction(model.beta, P, model.m, model.a, J, _site_poly(model, sites), eta, sites)


def energy(config: LoopConfiguration, model: ModelSpec) -> float:
    """I_Lambda(omega) with rectangle-rule tau integrals."""
    act = discrete_action(model, config.P, config.sites)
    _check_beta(config, model)
    return float(act.energy(config.values))


def energy_with_boundary(config: LoopConfiguration, xi: LoopConfiguration, model: ModelSpec) -> float:
    """I_Lambda(omega | xi): adds -sum J_ll' (omega_l, xi_l')_{L^2} over outside l'."""
    _check_beta(config, model)
    act = discrete_action(model, config.P, config.sites, boundary=xi)
    return float(act.energy(config.values))


def _check_beta(config: LoopConfiguration, model: ModelSpec):
    if not math.isclose(config.beta, model.beta):
        raise ValueError(f"configuration beta {config.beta} differs from model beta {model.beta}")


# ---------------------------------------------------------------------------
# norms

def norm_alpha(config: LoopConfiguration, weights: WeightFamily, alpha: float, anchor) -> float:
    """[sum_l |omega_l|^2_{L^2} w_alpha(l0, l)]^{1/2}."""
    anchor = np.asarray(anchor, dtype=float)
    d = config.sites.shape[1]
    r = np.sqrt(np.sum((config.sites - anchor) ** 2, axis=1))
    l2 = config.eps * np.sum(config.values ** 2, axis=1)
    return float(math.sqrt(np.sum(l2 * weights(r, alpha, d))))


def circle_distance(s, t, beta: float):
    diff = np.abs(np.asarray(s, dtype=float) - np.asarray(t, dtype=float)) % beta
    return np.minimum(diff, beta - diff)


def holder_seminorm(path: LoopPath, sigma: float) -> float:
    """max_{p != q} |x_p - x_q| / |tau_p - tau_q|_beta^sigma on the slice points."""
    if not 0 < sigma < 0.5:
        raise ValueError("sigma must lie in (0, 1/2)")
    x = path.values
    t = path.times
    dist = circle_distance(t[:, None], t[None, :], path.beta)
    np.fill_diagonal(dist, np.inf)
    return float(np.max(np.abs(x[:, None] - x[None, :]) / dist ** sigma))


def holder_norm(path: LoopPath, sigma: float) -> float:
    """sup-norm plus Hoelder seminorm."""
    return float(np.max(np.abs(path.values))) + holder_seminorm(path, sigma)


def lebowitz_presutti_check(config: LoopConfiguration, b: float, sigma: float, anchor,
                            core: Iterable[Sequence[int]], rtol: float = 1e-12) -> bool:
    """True iff |xi_l|^2_{C^sigma} <= b log(1 + |l - l0|) outside the core."""
    core = {tuple(int(c) for c in s) for s in core}
    anchor = np.asarray(anchor, dtype=float)
    for i, coord in enumerate(config.sites):
        if tuple(int(c) for c in coord) in core:
            continue
        r = float(np.sqrt(np.sum((coord - anchor) ** 2)))
        lhs = holder_norm(config.path(i), sigma) ** 2
        if lhs > b * math.log1p(r) * (1 + rtol):
            return False
    return True

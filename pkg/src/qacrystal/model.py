"""Model data for quantum anharmonic crystals.

A model is a lattice of one-dimensional oscillators with rigidity ``a`` and
mass ``m``, an anharmonic polynomial potential per site, and a pair
interaction ``J``.  This module holds the value types and the interaction
norms derived from them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate, special, signal


class ModelError(ValueError):
    """Raised when a model specification violates one of its invariants."""


class DivergentSeriesError(ModelError):
    """Raised when an interaction row sum does not converge."""


class NotSatisfiableError(ModelError):
    """Raised when no grid point satisfies a requested inequality."""


# ---------------------------------------------------------------------------
# lattice

@dataclass(frozen=True)
class LatticeSpec:
    """Box (-L, L]^d of Z^d with zero or periodic boundary."""

    d: int
    L: int
    boundary: str = "zero"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ModelError(f"lattice.d must be a positive integer, got {self.d!r}")
        if int(self.L) != self.L or self.L < 1:
            raise ModelError(f"lattice.L must be a positive integer, got {self.L!r}")
        if self.boundary not in ("zero", "periodic"):
            raise ModelError(f"lattice.boundary must be 'zero' or 'periodic', got {self.boundary!r}")

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def n_sites(self) -> int:
        return (2 * self.L) ** self.d

    def sites(self) -> np.ndarray:
        """Integer coordinates of the box, row-major (last axis fastest)."""
        axis = np.arange(-self.L + 1, self.L + 1)
        grids = np.meshgrid(*([axis] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def index(self, coord: Sequence[int]) -> int:
        """Row-major index of a box coordinate."""
        c = np.asarray(coord, dtype=int)
        if c.shape != (self.d,):
            raise ModelError(f"coordinate {coord!r} has wrong dimension for d={self.d}")
        if np.any(c <= -self.L) or np.any(c > self.L):
            raise ModelError(f"coordinate {coord!r} outside the box (-{self.L}, {self.L}]^{self.d}")
        idx = 0
        for cj in c:
            idx = idx * (2 * self.L) + int(cj + self.L - 1)
        return idx

    def displacement(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Componentwise |x - y|, folded onto the torus when periodic."""
        diff = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self.periodic:
            diff = np.minimum(diff, 2 * self.L - diff)
        return diff

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Euclidean length of ``displacement``; broadcast over leading axes."""
        return np.sqrt(np.sum(self.displacement(x, y) ** 2, axis=-1))


# ---------------------------------------------------------------------------
# interaction

_KINDS = ("nearest_neighbor", "matrix", "exponential", "polynomial")


@dataclass(frozen=True)
class InteractionSpec:
    """Pair interaction J_{ll'}.

    ``exponential`` means J e^{-alpha0 r}, ``polynomial`` means
    J (1 + r)^{-alpha0}, with r the Euclidean (or torus) distance.
    ``matrix`` is an explicit symmetric matrix indexed by box sites.
    """

    kind: str = "nearest_neighbor"
    J: float = 0.0
    alpha0: float = 1.0
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ModelError(f"interaction.kind must be one of {_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.J):
            raise ModelError("interaction.J must be finite")
        if self.kind in ("exponential", "polynomial") and not self.alpha0 > 0:
            raise ModelError("interaction.alpha0 must be positive")
        if self.kind == "matrix":
            if self.matrix is None:
                raise ModelError("interaction.matrix is required for kind 'matrix'")
            M = np.array(self.matrix, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ModelError("interaction.matrix must be square")
            if not np.allclose(M, M.T, rtol=0, atol=1e-14):
                raise ModelError("interaction.matrix must be symmetric")
            if np.any(np.diag(M) != 0):
                raise ModelError("interaction.matrix must have zero diagonal")
            M.setflags(write=False)
            object.__setattr__(self, "matrix", M)

    @property
    def is_zero(self) -> bool:
        if self.kind == "matrix":
            return not np.any(self.matrix)
        return self.J == 0

    @property
    def ferroelectric(self) -> bool:
        if self.kind == "matrix":
            return bool(np.all(self.matrix >= 0))
        return self.J >= 0

    def log_abs_radial(self, r):
        """log |J(r)| for the decay kinds."""
        r = np.asarray(r, dtype=float)
        base = math.log(abs(self.J)) if self.J != 0 else -math.inf
        if self.kind == "exponential":
            return base - self.alpha0 * r
        if self.kind == "polynomial":
            return base - self.alpha0 * np.log1p(r)
        raise ModelError("log_abs_radial is defined for decay kinds only")

    def radial(self, r):
        """J as a function of distance for the translation-invariant kinds."""
        r = np.asarray(r, dtype=float)
        if self.kind == "nearest_neighbor":
            return np.where(np.isclose(r, 1.0), self.J, 0.0)
        if self.kind == "exponential":
            return self.J * np.exp(-self.alpha0 * r)
        if self.kind == "polynomial":
            return self.J * (1.0 + r) ** (-self.alpha0)
        raise ModelError("explicit matrices have no radial form")


# ---------------------------------------------------------------------------
# potential

@dataclass(frozen=True)
class PotentialSpec:
    """Anharmonic potential V_l(x) = sum_s b^(s)_l x^{2s} - h x.

    ``coeffs`` holds b^(1), ..., b^(r): one row for a uniform potential or
    one row per box site.  An empty or all-zero row is the harmonic crystal.
    """

    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    h: float = 0.0

    def __post_init__(self):
        b = np.atleast_1d(np.array(self.coeffs, dtype=float))
        if b.ndim > 2:
            raise ModelError("potential.coeffs must be a list or a list of per-site lists")
        if not np.all(np.isfinite(b)):
            raise ModelError("potential.coeffs must be finite")
        if not np.isfinite(self.h):
            raise ModelError("potential.h must be finite")
        rows = b.reshape(-1, b.shape[-1]) if b.size else np.zeros((1, 0))
        # strip common trailing zeros
        r = rows.shape[1]
        while r > 0 and not np.any(rows[:, r - 1]):
            r -= 1
        rows = rows[:, :r]
        for row in rows:
            nz = np.flatnonzero(row)
            if nz.size and row[nz[-1]] <= 0:
                raise ModelError("potential.coeffs: leading coefficient b^(r) must be positive")
        rows.setflags(write=False)
        object.__setattr__(self, "coeffs", rows if b.ndim == 2 else rows[0])

    @property
    def per_site(self) -> bool:
        return np.ndim(self.coeffs) == 2

    @property
    def degree(self) -> int:
        """The r of the x^{2r} leading term (0 for harmonic)."""
        return int(np.shape(self.coeffs)[-1])

    @property
    def is_even(self) -> bool:
        return self.h == 0

    @property
    def is_harmonic(self) -> bool:
        return not np.any(self.coeffs)

    def site_coeffs(self, site: int | None = None) -> np.ndarray:
        if self.per_site:
            if site is None:
                raise ModelError("site index required for a per-site potential")
            return np.asarray(self.coeffs[site])
        return np.asarray(self.coeffs)

    def v_coeffs(self, site: int | None = None) -> np.ndarray:
        """Power-basis coefficients of v(t), V(x) = v(x^2) + field term."""
        return np.concatenate([[0.0], self.site_coeffs(site)])

    def power_coeffs(self, site: int | None = None) -> np.ndarray:
        """Power-basis coefficients of V_l(x) in x, lowest order first."""
        b = self.site_coeffs(site)
        c = np.zeros(2 * len(b) + 2)
        c[2::2][: len(b)] = b
        c[1] = -self.h
        return np.trim_zeros(c, "b") if np.any(c) else np.zeros(1)

    def __call__(self, x, site: int | None = None):
        return npoly.polyval(np.asarray(x, dtype=float), self.power_coeffs(site))

    def second_derivative(self, x, site: int | None = None):
        return npoly.polyval(np.asarray(x, dtype=float), npoly.polyder(self.power_coeffs(site), 2))

    def satisfies_growth_bound(self) -> bool:
        """Assumption-(A)-type growth: r >= 2 with positive leading term on every site."""
        rows = np.atleast_2d(self.coeffs)
        return self.degree >= 2 and bool(np.all(rows[:, -1] > 0))

    def growth_constants(self) -> tuple[float, float]:
        """Constants (A_V, B_V) with A_V |x|^{2r} + B_V <= V_l(x) for every site."""
        if not self.satisfies_growth_bound():
            raise ModelError("growth bound needs degree r >= 2 with positive leading coefficients")
        rows = np.atleast_2d(self.coeffs)
        A = 0.5 * float(np.min(rows[:, -1]))
        B = math.inf
        for i in range(rows.shape[0]):
            c = self.power_coeffs(i if self.per_site else None).copy()
            c[2 * self.degree] -= A
            crit = npoly.polyroots(npoly.polyder(c))
            crit = crit[np.abs(crit.imag) < 1e-9].real
            B = min(B, float(np.min(npoly.polyval(np.concatenate([crit, [0.0]]), c))))
        return A, B


# ---------------------------------------------------------------------------
# weights

@dataclass(frozen=True)
class WeightFamily:
    """Weights w_alpha(l, l') used for tempered configurations.

    ``exponential``: exp(-alpha |l - l'|), alpha in (0, alpha_max).
    ``polynomial``: (1 + eps |l - l'|)^{-alpha d}, alpha in (1, alpha_max).
    """

    kind: str = "exponential"
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "polynomial"):
            raise ModelError(f"weight kind must be 'exponential' or 'polynomial', got {self.kind!r}")
        if not self.epsilon > 0:
            raise ModelError("weight epsilon must be positive")

    @property
    def alpha_min(self) -> float:
        return 0.0 if self.kind == "exponential" else 1.0

    def __call__(self, r, alpha: float, d: int):
        return np.exp(self.log_weight(r, alpha, d))

    def log_weight(self, r, alpha: float, d: int):
        r = np.asarray(r, dtype=float)
        if self.kind == "exponential":
            return -alpha * r
        return -alpha * d * np.log1p(self.epsilon * r)

    def with_epsilon(self, epsilon: float) -> "WeightFamily":
        return WeightFamily(self.kind, epsilon)


# ---------------------------------------------------------------------------
# model

@dataclass(frozen=True)
class ModelSpec:
    lattice: LatticeSpec
    interaction: InteractionSpec
    potential: PotentialSpec
    m: float = 1.0
    a: float = 1.0
    beta: float = 1.0
    nu: int = 1

    def __post_init__(self):
        for name in ("m", "a", "beta"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ModelError(f"{name} must be a positive finite number, got {val!r}")
        if int(self.nu) != self.nu or self.nu < 1:
            raise ModelError(f"nu must be a positive integer, got {self.nu!r}")
        n = self.lattice.n_sites
        if self.interaction.kind == "matrix" and self.interaction.matrix.shape[0] != n:
            raise ModelError(f"interaction.matrix must be {n}x{n} for this lattice")
        if self.potential.per_site and np.shape(self.potential.coeffs)[0] != n:
            raise ModelError(f"per-site potential.coeffs needs {n} rows")
        p = self.potential
        if p.degree == 1:
            # a purely quadratic perturbation must keep the oscillators stable
            rows = np.atleast_2d(p.coeffs)
            if np.any(self.a + 2 * rows[:, 0] <= 0):
                raise ModelError("quadratic potential needs a + 2 b^(1) > 0")

    def replace(self, **changes) -> "ModelSpec":
        import dataclasses
        return dataclasses.replace(self, **changes)

    @property
    def translation_invariant(self) -> bool:
        return self.interaction.kind != "matrix" and not self.potential.per_site

    def coupling(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """J between sites at integer coordinates x and y (broadcast).

        Periodic lattices use the torus displacement.  Explicit matrices need
        both points inside the box.
        """
        x = np.asarray(x)
        y = np.asarray(y)
        inter = self.interaction
        if inter.kind == "matrix":
            xi = np.atleast_2d(x)
            yi = np.atleast_2d(y)
            ix = np.array([self.lattice.index(c) for c in xi.reshape(-1, self.lattice.d)])
            iy = np.array([self.lattice.index(c) for c in yi.reshape(-1, self.lattice.d)])
            ix, iy = np.broadcast_arrays(ix, iy)
            return inter.matrix[ix, iy].reshape(np.broadcast_shapes(xi.shape[:-1], yi.shape[:-1]))
        disp = self.lattice.displacement(x, y)
        r = np.sqrt(np.sum(disp ** 2, axis=-1))
        if inter.kind == "nearest_neighbor":
            out = np.where(np.abs(r - 1.0) < 1e-12, inter.J, 0.0)
        else:
            out = inter.radial(r)
        return np.where(r == 0, 0.0, out)

    def interaction_matrix(self, sites: np.ndarray | None = None) -> np.ndarray:
        """J restricted to the given sites (default: the whole box)."""
        if sites is None:
            if self.interaction.kind == "matrix":
                return np.array(self.interaction.matrix)
            sites = self.lattice.sites()
        sites = np.asarray(sites)
        return self.coupling(sites[:, None, :], sites[None, :, :])


# ---------------------------------------------------------------------------
# lattice sums

def _shell_counts(d: int, nmax: int) -> np.ndarray:
    """r_d(n): number of points of Z^d with |l|^2 = n, for n <= nmax."""
    theta = np.zeros(nmax + 1)
    k = np.arange(0, math.isqrt(nmax) + 1)
    theta[k ** 2] = 2.0
    theta[0] = 1.0
    out = theta.copy()
    for _ in range(d - 1):
        out = np.rint(signal.fftconvolve(out, theta)[: nmax + 1])
    return out


@dataclass(frozen=True)
class LatticeSum:
    value: float
    tail_bound: float
    radius: float


def lattice_radial_sum(g: Callable[[np.ndarray], np.ndarray], d: int, *, rtol: float = 1e-10,
                       r_start: int = 16, r_max: int = 1024) -> LatticeSum:
    """Sum of g(|l|) over l in Z^d \\ {0} for an eventually decreasing g.

    Points are summed shell by shell up to a radius R that grows until an
    integral-comparison bound on the tail drops below ``rtol`` of the sum.
    The returned value adds the integral estimate of the tail.
    """
    surface = 2 * math.pi ** (d / 2) / special.gamma(d / 2)
    shift = 0.5 * math.sqrt(d)

    def tail_integral(r0, offset):
        f = lambda r: surface * r ** (d - 1) * g(np.array(r - offset))
        with warnings.catch_warnings():
            # slow algebraic tails are reported through the returned bound
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(f, r0, np.inf, limit=400, epsabs=0.0, epsrel=1e-10)
        return val

    R = r_start
    while True:
        nmax = R * R
        counts = _shell_counts(d, nmax)
        n = np.arange(1, nmax + 1)
        partial = float(np.sum(counts[1:] * g(np.sqrt(n))))
        bound = tail_integral(R, shift) if R > shift else math.inf
        estimate = tail_integral(R, 0.0)
        if bound <= rtol * max(abs(partial), 1e-300) or R >= r_max:
            if bound > rtol * max(abs(partial), 1e-300):
                warnings.warn(f"lattice sum tail bound {bound:.3g} above requested rtol at R={R}",
                              RuntimeWarning, stacklevel=3)
            return LatticeSum(partial + estimate, bound, R)
        R *= 2


# ---------------------------------------------------------------------------
# norms

def _alpha_max(model: ModelSpec, weights: WeightFamily) -> float:
    """Upper end of the admissible alpha interval for this interaction."""
    inter = model.interaction
    d = model.lattice.d
    if inter.is_zero or inter.kind in ("nearest_neighbor", "matrix"):
        return math.inf
    if weights.kind == "exponential":
        return inter.alpha0 if inter.kind == "exponential" else 0.0
    # polynomial weights
    if inter.kind == "exponential":
        return math.inf
    return inter.alpha0 / d - 1.0


def _row_sum(model: ModelSpec, log_kernel: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup_l sum_l' |J_ll'| exp(log_kernel(|l - l'|))."""
    inter = model.interaction
    d = model.lattice.d
    if inter.is_zero:
        return 0.0
    if inter.kind == "nearest_neighbor":
        return 2 * d * abs(inter.J) * float(np.exp(log_kernel(np.array(1.0))))
    if inter.kind == "matrix":
        sites = model.lattice.sites()
        r = model.lattice.distance(sites[:, None, :], sites[None, :, :])
        return float(np.max(np.sum(np.abs(inter.matrix) * np.exp(log_kernel(r)), axis=1)))
    g = lambda r: np.exp(inter.log_abs_radial(r) + log_kernel(r))
    return lattice_radial_sum(g, d).value


def j_hat_zero(model: ModelSpec) -> float:
    """sup_l sum_l' |J_ll'|, over the infinite lattice for decay kinds."""
    inter = model.interaction
    if inter.kind == "polynomial" and not inter.is_zero and inter.alpha0 <= model.lattice.d:
        raise DivergentSeriesError(
            f"polynomial decay exponent {inter.alpha0} <= d = {model.lattice.d}: row sum diverges")
    return _row_sum(model, lambda r: np.zeros_like(np.asarray(r, dtype=float)))


def j_hat_alpha(model: ModelSpec, weights: WeightFamily, alpha: float) -> float:
    """Weighted norm sup_l sum_l' |J_ll'| / w_alpha(l, l')."""
    d = model.lattice.d
    if model.interaction.is_zero:
        return 0.0
    amax = _alpha_max(model, weights)
    if not (weights.alpha_min < alpha < amax):
        raise DivergentSeriesError(
            f"alpha={alpha} outside the admissible interval ({weights.alpha_min}, {amax})")
    return _row_sum(model, lambda r: -weights.log_weight(r, alpha, d))


def select_alpha(model: ModelSpec, weights: WeightFamily, delta: float, *,
                 alpha_max: float = 5.0, n_grid: int = 64) -> tuple[float, float, float]:
    """Largest grid alpha with J_alpha - J_0 < delta.

    Returns ``(alpha, epsilon, j_alpha)``.  For polynomial weights epsilon is
    chosen from epsilon alpha d J^(1)_alpha < delta, which bounds the excess
    of the weighted norm over J_0 for epsilon <= 1.
    """
    if not delta > 0:
        raise ModelError("delta must be positive")
    lo = weights.alpha_min
    hi = min(_alpha_max(model, weights), lo + alpha_max)
    if hi <= lo:
        raise NotSatisfiableError(
            f"empty admissible interval for {weights.kind} weights with this interaction")
    if model.interaction.is_zero:
        grid = np.geomspace(1e-3, 1.0, n_grid) * (hi - lo) + lo
        a_top = float(grid[-1])
        return a_top, weights.epsilon, 0.0
    # open interval: keep the top grid point strictly inside
    span = hi - lo
    grid = lo + span * np.geomspace(1e-4, 1.0 - 1e-3, n_grid)
    j0 = j_hat_zero(model)
    d = model.lattice.d
    for alpha in grid[::-1]:
        alpha = float(alpha)
        if weights.kind == "exponential":
            ja = j_hat_alpha(model, weights, alpha)
            if ja - j0 < delta:
                return alpha, weights.epsilon, ja
        else:
            j1 = j_hat_alpha(model, weights.with_epsilon(1.0), alpha)
            eps = min(1.0, 0.5 * delta / (alpha * d * j1))
            w = weights.with_epsilon(eps)
            ja = j_hat_alpha(model, w, alpha)
            if ja - j0 < delta:
                return alpha, eps, ja
    raise NotSatisfiableError(f"no alpha on the search grid gives J_alpha - J_0 < {delta}")


def harmonic_stability(model: ModelSpec) -> bool:
    """Stability of the harmonic crystal: J_0 < a."""
    return j_hat_zero(model) < model.a

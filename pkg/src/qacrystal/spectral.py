"""One-site Schroedinger problem on a uniform real-space grid.

The operator is -(1/2m) d^2/dx^2 + (a/2) x^2 + V(x), discretized by central
differences with Dirichlet walls at +-X_max.  Eigenvalues are Richardson
extrapolated between N and 2N - 1 points (spacing halved), which removes the
O(dx^2) error of the stencil.
"""

from __future__ import annotations

import base64
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

from .model import PotentialSpec

TRUNCATION_TOL = 1e-12


class SpectralError(RuntimeError):
    """Base class for solver failures."""


class ConvergenceError(SpectralError):
    """The grid is too small for the requested levels."""


class TruncationError(SpectralError):
    """Too few levels for the requested inverse temperature."""


@dataclass(frozen=True)
class GridSpec:
    x_max: float
    n: int = 2049

    def __post_init__(self):
        if not self.x_max > 0:
            raise ValueError("grid half-width must be positive")
        if self.n < 16 or self.n % 2 == 0:
            raise ValueError("grid needs an odd number N >= 16 of points")

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n)

    def refined(self) -> "GridSpec":
        return GridSpec(self.x_max, 2 * self.n - 1)


def _total_potential(a: float, potential, site=None) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(potential, PotentialSpec):
        return lambda x: 0.5 * a * x * x + potential(x, site)
    return lambda x: 0.5 * a * x * x + potential(x)


def potential_minimizer(a: float, potential: PotentialSpec, site=None) -> float:
    """Global minimizer of (a/2) x^2 + V(x)."""
    c = potential.power_coeffs(site).astype(float).copy()
    c = np.concatenate([c, np.zeros(max(0, 3 - len(c)))])
    c[2] += 0.5 * a
    crit = npoly.polyroots(npoly.polyder(c)) if len(np.trim_zeros(c, "b")) > 2 else np.array([0.0])
    crit = np.concatenate([crit[np.abs(crit.imag) < 1e-9].real, [0.0]])
    return float(crit[np.argmin(npoly.polyval(crit, c))])


def default_grid(m: float, a: float, potential: PotentialSpec, site=None, n: int = 2049) -> GridSpec:
    """Half-width covering the deepest well plus Gaussian tails."""
    xmin = abs(potential_minimizer(a, potential, site)) if isinstance(potential, PotentialSpec) else 0.0
    width = 4.0 * (2.0 / (m * a)) ** 0.25
    return GridSpec(4.0 * (max(1.0, xmin) + width), n)


def _fd_solve(m: float, U: Callable, grid: GridSpec, K: int):
    x = grid.x
    dx = grid.dx
    kin = 1.0 / (2.0 * m * dx * dx)
    diag = 2.0 * kin + U(x)
    off = np.full(grid.n - 1, -kin)
    E, V = eigh_tridiagonal(diag, off, select="i", select_range=(0, K - 1))
    V = V.T / math.sqrt(dx)
    # fix signs: first large lobe positive
    for row in V:
        k = np.argmax(np.abs(row) > 1e-3 * np.max(np.abs(row)))
        if row[k] < 0:
            row *= -1
    return E, V


@dataclass(frozen=True)
class Spectrum:
    """Lowest K eigenpairs of the one-site operator.

    ``eigenvalues`` are extrapolated; ``vectors`` live on ``grid`` (the fine
    one) and are normalized with respect to dx.  ``coarse`` keeps the
    eigenpairs of the coarse solve for extrapolating derived quantities.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    grid: GridSpec
    m: float
    a: float
    potential: object
    error: np.ndarray
    coarse_eigenvalues: np.ndarray = field(repr=False, default=None)
    coarse_vectors: np.ndarray = field(repr=False, default=None)
    fine_eigenvalues: np.ndarray = field(repr=False, default=None)

    @property
    def K(self) -> int:
        return len(self.eigenvalues)

    def to_dict(self, vectors: bool = False) -> dict:
        out = {
            "m": self.m,
            "a": self.a,
            "grid": {"x_max": self.grid.x_max, "n": self.grid.n},
            "eigenvalues": [float(e) for e in self.eigenvalues],
            "error_estimate": [float(e) for e in self.error],
        }
        if vectors:
            out["vectors_base64"] = base64.b64encode(
                np.ascontiguousarray(self.vectors, dtype="<f8").tobytes()).decode("ascii")
            out["vectors_shape"] = list(self.vectors.shape)
        return out


def solve_one_site(m: float, a: float, potential, grid: GridSpec | None = None,
                   K: int | None = None, *, beta: float | None = None, site=None,
                   check_boundary: bool = True) -> Spectrum:
    """Lowest K levels of -(1/2m) d^2 + (a/2) x^2 + V(x).

    ``potential`` is a PotentialSpec or any vectorized callable.  When K is
    omitted and ``beta`` is given, K grows until the Boltzmann weight of the
    top computed level falls below 1e-12 relative to the ground state.
    """
    if grid is None:
        grid = default_grid(m, a, potential, site)
    fine = grid.refined()
    U = _total_potential(a, potential, site)
    if K is None:
        K = 16
    if K < 1 or K > grid.n // 4:
        raise ValueError(f"K={K} must lie in [1, N/4={grid.n // 4}]")
    while True:
        Ec, Vc = _fd_solve(m, U, grid, K)
        if beta is None or math.exp(-beta * (Ec[-1] - Ec[0])) < TRUNCATION_TOL:
            break
        if K >= grid.n // 4:
            raise TruncationError(
                f"need more than N/4={grid.n // 4} levels at beta={beta}; enlarge the grid")
        K = min(2 * K, grid.n // 4)
    Ef, Vf = _fd_solve(m, U, fine, K)
    if check_boundary:
        top = Vf[-1]
        edge = max(abs(top[0]), abs(top[-1]), abs(top[1]), abs(top[-2]))
        if edge > 1e-8 * np.max(np.abs(top)):
            raise ConvergenceError(
                f"level {K - 1} reaches the grid wall (relative amplitude {edge / np.max(np.abs(top)):.2e}); "
                "increase x_max")
    E = (4.0 * Ef - Ec) / 3.0
    err = np.abs(E - Ef)
    if np.any(np.diff(E) <= 0):
        raise SpectralError("extrapolated eigenvalues are not strictly increasing")
    return Spectrum(E, Vf, fine, m, a, potential, err, Ec, Vc, Ef)


# ---------------------------------------------------------------------------
# gap

@dataclass(frozen=True)
class GapInfo:
    value: float
    index: int        # gap is E[index] - E[index - 1]
    at_top: bool      # minimizer is the last computed pair


def gap_info(spectrum: Spectrum) -> GapInfo:
    E = spectrum.eigenvalues
    if len(E) < 8:
        raise ValueError("gap needs at least 8 levels")
    dE = np.diff(E)
    n = int(np.argmin(dE))
    noise = spectrum.error[1:] + spectrum.error[:-1] + 1e-12 * np.abs(E[1:])
    others = dE[:-1]
    at_top = bool(dE[-1] < np.min(others - noise[:-1]) - noise[-1])
    return GapInfo(float(dE[n]), n + 1, at_top)


def gap(spectrum: Spectrum) -> float:
    """Minimal consecutive level spacing among the computed levels."""
    info = gap_info(spectrum)
    if info.at_top:
        warnings.warn("gap minimizer is the last computed pair; compute more levels",
                      RuntimeWarning, stacklevel=2)
    return info.value


# ---------------------------------------------------------------------------
# correlations

def _matrix_elements(vectors: np.ndarray, dx: float, f: np.ndarray) -> np.ndarray:
    return (vectors * f) @ vectors.T * dx


def _check_truncation(E: np.ndarray, beta: float):
    if math.exp(-beta * (E[-1] - E[0])) >= TRUNCATION_TOL:
        raise TruncationError(
            f"exp(-beta (E_K - E_0)) = {math.exp(-beta * (E[-1] - E[0])):.2e} >= {TRUNCATION_TOL}")


def _relative_exp_kernel(y):
    """(1 - e^{-y}) / y for y >= 0, equal to 1 at y = 0."""
    y = np.asarray(y, dtype=float)
    out = np.ones_like(y)
    nz = y > 1e-12
    out[nz] = -np.expm1(-y[nz]) / y[nz]
    out[~nz] = 1.0 - 0.5 * y[~nz]
    return out


def _kup(E: np.ndarray, vectors: np.ndarray, x: np.ndarray, dx: float, beta: float) -> float:
    e = E - E[0]
    X = _matrix_elements(vectors, dx, x)
    lo = np.minimum.outer(e, e)
    diff = np.abs(np.subtract.outer(e, e))
    w = beta * np.exp(-beta * lo) * _relative_exp_kernel(beta * diff)
    Z = np.sum(np.exp(-beta * e))
    return float(np.sum(X * X * w) / Z)


def one_site_correlation_integral(spectrum: Spectrum, beta: float) -> float:
    """int_0^beta <x(0) x(tau)> dtau from the double spectral sum.

    For even potentials this is the one-site pair-correlation integral; its
    exact value for the harmonic oscillator is 1/a.  The coarse and fine
    solves are combined by the same extrapolation as the eigenvalues.
    """
    _check_truncation(spectrum.eigenvalues, beta)
    fine = _kup(spectrum.fine_eigenvalues, spectrum.vectors, spectrum.grid.x, spectrum.grid.dx, beta)
    cg = GridSpec(spectrum.grid.x_max, (spectrum.grid.n + 1) // 2)
    coarse = _kup(spectrum.coarse_eigenvalues, spectrum.coarse_vectors, cg.x, cg.dx, beta)
    value = (4.0 * fine - coarse) / 3.0
    bound = 1.0 / (spectrum.m * gap(spectrum) ** 2)
    if value > bound * (1 + 1e-8) + 1e-10:
        warnings.warn(f"one-site integral {value} exceeds 1/(m gap^2) = {bound}",
                      RuntimeWarning, stacklevel=2)
    return value


def matsubara_one_site(spectrum: Spectrum, beta: float, observables: Sequence,
                       taus: Sequence[float]) -> float:
    """Imaginary-time correlation tr[F_1 e^{-(t_2-t_1)H} F_2 ... ] / Z.

    ``observables`` are grid functions (arrays on ``spectrum.grid``) or
    callables of x acting by multiplication.  Times are taken modulo beta.
    """
    if len(observables) != len(taus):
        raise ValueError("one time per observable")
    E = spectrum.eigenvalues
    _check_truncation(E, beta)
    e = E - E[0]
    x = spectrum.grid.x
    t = np.mod(np.asarray(taus, dtype=float), beta)
    order = np.argsort(t, kind="stable")
    mats = []
    for i in order:
        f = observables[i]
        fx = f(x) if callable(f) else np.asarray(f, dtype=float)
        mats.append(_matrix_elements(spectrum.vectors, spectrum.grid.dx, fx))
    t = t[order]
    gaps = np.append(np.diff(t), beta - t[-1] + t[0])
    M = np.eye(len(e))
    for F, s in zip(mats, gaps):
        M = M @ F * np.exp(-s * e)[None, :]
    return float(np.trace(M) / np.sum(np.exp(-beta * e)))


def _gamma_integral(E, vectors, x, dx, beta):
    e = E - E[0]
    X = _matrix_elements(vectors, dx, x)
    X2 = X * X.T
    Z = np.sum(np.exp(-beta * e))

    def gamma(tau):
        w = np.exp(-tau * e)[:, None] * np.exp(-(beta - tau) * e)[None, :]
        return float(np.sum(X2 * w) / Z)

    val, _ = integrate.quad(gamma, 0.0, beta, epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def two_point_integral(spectrum: Spectrum, beta: float) -> float:
    """int_0^beta <x(0) x(tau)> dtau by quadrature of the Matsubara function.

    Independent of the closed-form tau integration used by
    one_site_correlation_integral; both use the same extrapolation.
    """
    _check_truncation(spectrum.eigenvalues, beta)
    g = spectrum.grid
    cg = GridSpec(g.x_max, (g.n + 1) // 2)
    fine = _gamma_integral(spectrum.fine_eigenvalues, spectrum.vectors, g.x, g.dx, beta)
    coarse = _gamma_integral(spectrum.coarse_eigenvalues, spectrum.coarse_vectors, cg.x, cg.dx, beta)
    return (4.0 * fine - coarse) / 3.0

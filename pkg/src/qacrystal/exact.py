"""Quadrature oracle for tiny lattice approximations.

The discrete Gibbs density exp(-I(x|xi)) is integrated against the free
measure of the region, D = P |Lambda| <= 6 variables.  Each site's loop is
written in the real orthonormal Fourier basis of the P-cycle, where the free
measure is a product of centred Gaussians with variances 1/(eps lambda_k).
Gauss-Hermite nodes are scaled to those variances, so the Gaussian part of
the measure is absorbed into the weights exactly.

The tensor-product rule is never enumerated node by node.  The integrand is
a product of one dense tensor per site (the anharmonic part, which couples a
site's modes) and of q x q matrices coupling the same mode at two sites (the
interaction, which is diagonal in modes because the basis is orthogonal).
The rule is evaluated as a tensor-network contraction, identical in value to
the full q^D sum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .loops import DiscreteAction, LoopConfiguration, discrete_action
from .model import ModelError, ModelSpec, j_hat_zero

MAX_DIM = 6
TENSOR_GUARD = 2e7


class CostGuardError(ValueError):
    """The requested rule is too large to evaluate."""


class FormError(ValueError):
    """Model or functions are outside the class an inequality applies to."""


# ---------------------------------------------------------------------------
# observables

@dataclass(frozen=True)
class SliceFunctional:
    """Finite sum of products of single-slice functions.

    Each term is ``(coef, factors)`` with factors ``(site, slice, f)``;
    ``site`` indexes the region's site list and ``f`` maps arrays to arrays.
    """

    terms: tuple = ()

    @staticmethod
    def coordinate(site: int, p: int, f: Callable | None = None) -> "SliceFunctional":
        return SliceFunctional(((1.0, ((site, p, f if f is not None else _identity),)),))

    @staticmethod
    def constant(c: float) -> "SliceFunctional":
        return SliceFunctional(((float(c), ()),))

    @staticmethod
    def monomial(points: Iterable[Sequence[int]]) -> "SliceFunctional":
        """Product of coordinates; each point is (site, slice) or (site, slice, power)."""
        factors = []
        for pt in points:
            site, p = int(pt[0]), int(pt[1])
            k = int(pt[2]) if len(pt) > 2 else 1
            factors.extend([(site, p, _identity)] * k)
        return SliceFunctional(((1.0, tuple(factors)),))

    def __add__(self, other):
        if not isinstance(other, SliceFunctional):
            other = SliceFunctional.constant(other)
        return SliceFunctional(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, SliceFunctional) else -float(other))

    def __mul__(self, other):
        if isinstance(other, SliceFunctional):
            return SliceFunctional(tuple((c1 * c2, f1 + f2) for c1, f1 in self.terms for c2, f2 in other.terms))
        return SliceFunctional(tuple((c * float(other), f) for c, f in self.terms))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = SliceFunctional.constant(1.0)
        for _ in range(k):
            out = out * self
        return out


def _identity(x):
    return x


def _as_functional(obs) -> SliceFunctional:
    if isinstance(obs, SliceFunctional):
        return obs
    return SliceFunctional.monomial(obs)


# ---------------------------------------------------------------------------
# quadrature engine

def real_fourier_basis(P: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal real basis of R^P diagonalizing the cycle Laplacian.

    Returns ``(U, k)``: column j of U is a cosine/sine mode of wavenumber k[j].
    """
    p = np.arange(P)
    cols = [np.full(P, 1.0 / math.sqrt(P))]
    ks = [0]
    for k in range(1, (P - 1) // 2 + 1):
        cols.append(math.sqrt(2.0 / P) * np.cos(2 * np.pi * k * p / P))
        cols.append(math.sqrt(2.0 / P) * np.sin(2 * np.pi * k * p / P))
        ks += [k, k]
    if P % 2 == 0:
        cols.append(np.cos(np.pi * p) / math.sqrt(P))
        ks.append(P // 2)
    return np.stack(cols, axis=1), np.array(ks)


class ModeQuadrature:
    """Gauss-Hermite rule of order q for one discrete action.

    ``reference`` gives per-site, per-mode Gaussian (mean, sd) arrays of
    shape (n, P) for the nodes.  By default they are the free-measure modes,
    in which case the weights absorb the free measure exactly; otherwise the
    density ratio to the free measure is carried by the site tensors.
    """

    def __init__(self, action: DiscreteAction, q: int, field: np.ndarray | None = None,
                 reference: tuple[np.ndarray, np.ndarray] | None = None, rule: str = "trapezoid",
                 half_width: float = 8.0):
        n, P = action.n, action.P
        if n * P > MAX_DIM:
            raise CostGuardError(f"dimension D = {n * P} exceeds {MAX_DIM}")
        if q < 8:
            raise CostGuardError("quadrature order must be at least 8")
        if float(q) ** P > TENSOR_GUARD:
            raise CostGuardError(f"site tensor q^P = {q}^{P} exceeds the guard {TENSOR_GUARD:.0e}")
        self.action = action
        self.q = q
        eps = action.eps
        U, ks = real_fourier_basis(P)
        self.basis = U
        lam = action.free.eigenvalues[ks]
        free_sd = 1.0 / np.sqrt(eps * lam)
        if reference is None:
            mu = np.zeros((n, P))
            sd = np.broadcast_to(free_sd, (n, P))
        else:
            mu, sd = (np.asarray(r, dtype=float) for r in reference)
        if rule == "hermite":
            z, w = hermgauss(q)
            u = math.sqrt(2.0) * z
            logw0 = np.log(w / math.sqrt(math.pi)) + z ** 2 + 0.5 * math.log(2 * math.pi)
        elif rule == "trapezoid":
            u = np.linspace(-half_width, half_width, q)
            logw0 = np.full(q, math.log(u[1] - u[0]))
        else:
            raise ValueError(f"unknown rule {rule!r}")
        # nodes[i, j] are the values of mode j at site i; the weights below
        # integrate against the free-measure density of each mode
        self.nodes = mu[:, :, None] + sd[:, :, None] * u[None, None, :]
        logw = logw0[None, None, :] + np.log(sd)[:, :, None] \
            - 0.5 * (self.nodes / free_sd[None, :, None]) ** 2 \
            - np.log(free_sd * math.sqrt(2 * math.pi))[None, :, None]
        J = action.J
        rho = np.sum(np.abs(J), axis=1)
        eta = action.eta
        if field is not None:
            eta = eta + field
        self.complex = np.iscomplexobj(eta)
        self.xs, self.modes, self.log_site, self.site = [], [], [], []
        self.shift = 0.0
        for i in range(n):
            grids = np.meshgrid(*self.nodes[i], indexing="ij")
            xs = np.tensordot(U, np.stack(grids), axes=(1, 0))
            lw = np.zeros((q,) * P)
            for j in range(P):
                shape = [1] * P
                shape[j] = q
                lw = lw + logw[i, j].reshape(shape)
            sq = np.sum(xs ** 2, axis=0)
            V = sum(np.polynomial.polynomial.polyval(xs[p], action.vpoly[i]) for p in range(P))
            lin = np.tensordot(eta[i], xs, axes=(0, 0))
            t = lw + eps * (0.5 * rho[i] * sq - V + lin)
            shift = float(np.max(t.real))
            self.shift += shift
            self.xs.append(xs)
            self.modes.append(np.stack(grids))
            self.log_site.append(t - shift)
            self.site.append(np.exp(t - shift))
        # pair matrices: exp(eps J c c') split into factors bounded by one
        self.pairs = []
        for i in range(n):
            for k in range(i + 1, n):
                if J[i, k] != 0:
                    sgn = math.copysign(1.0, J[i, k])
                    g = 0.5 * eps * abs(J[i, k])
                    for j in range(P):
                        M = np.exp(-g * (self.nodes[i, j][:, None] - sgn * self.nodes[k, j][None, :]) ** 2)
                        self.pairs.append((i, k, j, M))
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        self._idx = [[letters[i * P + j] for j in range(P)] for i in range(n)]
        subs = ["".join(ix) for ix in self._idx]
        subs += [self._idx[i][j] + self._idx[k][j] for i, k, j, _ in self.pairs]
        self._subscripts = ",".join(subs) + "->"
        ops = self.site + [M for *_, M in self.pairs]
        self._path = np.einsum_path(self._subscripts, *ops, optimize="optimal")[0] if self.pairs else None

    @property
    def zero_mode(self):
        return [m[0] for m in self.modes]

    def mode_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Means and standard deviations of every site mode under the rule."""
        n, P = self.action.n, self.action.P
        z0 = self.contract()
        mu = np.zeros((n, P))
        sd = np.zeros((n, P))
        for i in range(n):
            for j in range(P):
                c = self.modes[i][j]
                m1 = np.real(self.contract({i: c}) / z0)
                m2 = np.real(self.contract({i: c * c}) / z0)
                mu[i, j] = m1
                sd[i, j] = math.sqrt(max(m2 - m1 * m1, 1e-300))
        return mu, sd

    def contract(self, insert: dict | None = None):
        """Scaled integral with multipliers inserted into site tensors.

        ``insert`` maps a site to an array, or to a ``(key, array)`` pair
        whose key lets the two-site path reuse the transformed tensor.
        """
        insert = insert or {}
        arrays = {i: (v[1] if isinstance(v, tuple) else v) for i, v in insert.items()}
        n = self.action.n
        if n == 2 and self.pairs:
            v1 = insert.get(1)
            key = v1[0] if isinstance(v1, tuple) else (() if v1 is None else None)
            G = self._transformed(key, arrays.get(1))
            t0 = self.site[0] if 0 not in arrays else self.site[0] * arrays[0]
            return np.sum(t0 * G)
        ops = [self.site[i] * arrays[i] if i in arrays else self.site[i] for i in range(n)]
        if not self.pairs:
            # uncoupled sites factorize; einsum would form the outer product
            return math.prod(np.sum(t) for t in ops)
        ops += [M for *_, M in self.pairs]
        return np.einsum(self._subscripts, *ops, optimize=self._path)

    def _transformed(self, key, arr):
        """Site-1 tensor with every pair matrix applied (cached by key)."""
        cache = self.__dict__.setdefault("_cache", {})
        if key is not None and key in cache:
            return cache[key]
        T = self.site[1] if arr is None else self.site[1] * arr
        for i, k, j, M in self.pairs:
            T = np.moveaxis(np.tensordot(M, T, axes=(1, j)), 0, j)
        if key is not None:
            if len(cache) > 64:
                cache.clear()
            cache[key] = T
        return T

    def log_z(self) -> float:
        val = self.contract()
        return float(np.log(np.real(val)) + self.shift)

    def term_insert(self, factors) -> dict:
        insert = {}
        keys = {}
        for site, p, f in factors:
            v = f(self.xs[site][p])
            insert[site] = insert[site] * v if site in insert else v
            keys.setdefault(site, []).append((p, f))
        return {i: (tuple(keys[i]), v) for i, v in insert.items()}

    def expectation(self, obs: SliceFunctional, z0=None):
        z0 = self.contract() if z0 is None else z0
        total = 0.0
        for c, factors in obs.terms:
            total = total + c * self.contract(self.term_insert(factors))
        return total / z0


def adapted_reference(action: DiscreteAction, q: int = 24, field=None, passes: int = 2,
                      inflation: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode Gaussian fitted to the Gibbs marginals by low-order passes.

    Starting from the free measure, each pass measures the mean and spread
    of every site mode and recentres the nodes on them.  Both orders of a
    certificate then share this fixed reference.
    """
    ref = None
    real_field = None if field is None else np.real(field)
    for _ in range(passes):
        quad = ModeQuadrature(action, q, real_field, ref)
        mu, sd = quad.mode_moments()
        ref = (mu, inflation * sd)
    return ref


@dataclass(frozen=True)
class QuadratureSpec:
    """Order q and certificate step; the rule is certified when orders q and
    q + step agree to ``rtol`` relative to the observable's scale.

    ``rule`` is 'trapezoid' (uniform nodes over +-8 reference standard
    deviations) or 'hermite' (Gauss-Hermite nodes).
    """

    q: int | None = None
    step: int = 8
    rtol: float = 1e-8
    q_reference: int = 24
    rule: str = "trapezoid"

    def orders_for(self, P: int) -> tuple[int, int]:
        q = self.q if self.q is not None else DEFAULT_ORDER.get(P, 10 ** 6)
        hi = q + self.step
        if float(hi) ** P > TENSOR_GUARD:
            hi = int(math.floor(TENSOR_GUARD ** (1.0 / P)))
            lo = hi - self.step
            if lo < 8:
                raise CostGuardError(f"P = {P} leaves no room for orders (q, q + {self.step})")
            return lo, hi
        return q, hi


# default orders by Trotter number; larger P falls back to the cost guard
DEFAULT_ORDER = {2: 96, 3: 64}


@dataclass
class Certificate:
    q: int
    q_check: int
    max_rel_diff: float
    rtol: float

    @property
    def ok(self) -> bool:
        return bool(self.max_rel_diff <= self.rtol)

    def to_dict(self) -> dict:
        return {"q": self.q, "q_check": self.q_check, "max_rel_diff": float(self.max_rel_diff),
                "rtol": self.rtol, "ok": self.ok}


@dataclass
class MomentResult:
    values: list
    log_z: float
    certificate: Certificate
    warnings: list = field(default_factory=list)

    @property
    def z(self) -> float:
        return math.exp(self.log_z)


def _region(model: ModelSpec, P: int, sites, boundary) -> DiscreteAction:
    if model.nu != 1:
        raise ModelError("the quadrature oracle handles nu = 1")
    act = discrete_action(model, P, sites, boundary)
    if act.n * P > MAX_DIM:
        raise CostGuardError(f"dimension D = P |Lambda| = {act.n * P} exceeds {MAX_DIM}")
    return act


def lattice_approx_moments(model: ModelSpec, observables: Sequence, P: int = 2, sites=None,
                           boundary: LoopConfiguration | None = None,
                           spec: QuadratureSpec = QuadratureSpec(),
                           field: np.ndarray | None = None) -> MomentResult:
    """Expectations of observables under the discrete Gibbs density.

    ``observables`` are SliceFunctionals or monomial point lists.  ``log_z``
    is log Z relative to the free measure of the region (so the harmonic
    crystal without interaction has Z = 1).  Every value is recomputed at
    order q + step; the largest relative change, measured against the
    observable's root-mean-square scale, is the certificate.
    """
    act = _region(model, P, sites, boundary)
    obs = [_as_functional(o) for o in observables]
    q_lo, q_hi = spec.orders_for(P)
    ref = adapted_reference(act, min(q_lo, spec.q_reference), field)
    lo = ModeQuadrature(act, q_lo, field, ref, spec.rule)
    hi = ModeQuadrature(act, q_hi, field, ref, spec.rule)
    z_lo, z_hi = lo.contract(), hi.contract()
    vals_lo = [lo.expectation(o, z_lo) for o in obs]
    vals_hi = [hi.expectation(o, z_hi) for o in obs]
    rel = abs((lo.log_z() - hi.log_z()))
    for o, v1, v2 in zip(obs, vals_lo, vals_hi):
        scale = math.sqrt(abs(hi.expectation(o * o, z_hi)))
        rel = max(rel, abs(v1 - v2) / max(abs(v2), scale, 1e-300))
    cert = Certificate(q_lo, q_hi, float(rel), spec.rtol)
    notes = [] if cert.ok else [f"quadrature orders {q_lo} and {q_hi} differ by {rel:.2e}"]
    vals = [complex(v) if np.iscomplexobj(v) else float(v) for v in vals_hi]
    return MomentResult(vals, hi.log_z(), cert, notes)


def log_partition(model: ModelSpec, P: int = 2, sites=None, boundary=None,
                  spec: QuadratureSpec = QuadratureSpec(), field=None) -> tuple[float, Certificate]:
    """log Z relative to the free measure, with its certificate."""
    res = lattice_approx_moments(model, [], P, sites, boundary, spec, field)
    return res.log_z, res.certificate


def total_displacement_moments(model: ModelSpec, kmax: int, P: int = 2, sites=None,
                               spec: QuadratureSpec = QuadratureSpec()) -> tuple[np.ndarray, Certificate]:
    """E[S^k], k = 0..kmax, for S = eps sum_{l,p} x_lp.

    S is a sum of per-site zero-mode values, so each power expands into
    products of per-site factors by the multinomial theorem.
    """
    act = _region(model, P, sites, None)
    q_lo, q_hi = spec.orders_for(P)
    ref = adapted_reference(act, min(q_lo, spec.q_reference))
    out = []
    for q in (q_lo, q_hi):
        quad = ModeQuadrature(act, q, reference=ref, rule=spec.rule)
        s_site = [act.eps * math.sqrt(P) * zm for zm in quad.zero_mode]
        z0 = quad.contract()
        mom = np.zeros(kmax + 1)
        n = act.n
        for k in range(kmax + 1):
            total = 0.0
            for comp in _compositions(k, n):
                coef = math.factorial(k) / math.prod(math.factorial(c) for c in comp)
                insert = {i: s_site[i] ** c for i, c in enumerate(comp) if c}
                total += coef * quad.contract(insert)
            mom[k] = float(np.real(total / z0))
        out.append(mom)
    lo, hi = out
    scale = np.sqrt(np.abs(hi[np.minimum(2 * np.arange(kmax + 1), kmax)]))
    scale = np.maximum(scale, np.abs(hi))
    # moments of order > kmax/2 have no computed square; use the value itself
    rel = float(np.max(np.abs(lo - hi) / np.maximum(np.maximum(np.abs(hi), scale), 1e-300)))
    return hi, Certificate(q_lo, q_hi, rel, spec.rtol)


def _compositions(k: int, n: int):
    if n == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in _compositions(k - first, n - 1):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# inequality checks

TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    value: float
    margin: float       # >= -TOL on the correct side
    passed: bool
    certificate: Certificate
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"check": self.name, "value": self.value, "margin": self.margin,
                "passed": self.passed, "certificate": self.certificate.to_dict(),
                "params": self.params}


def _require_ferro(model: ModelSpec, act: DiscreteAction):
    if model.nu != 1:
        raise FormError("inequalities are checked for nu = 1")
    if np.any(act.J < 0):
        raise FormError("model is not ferroelectric")


def _require_even_zero_field(model: ModelSpec):
    if model.potential.h != 0:
        raise FormError("inequality requires zero external field")


def _require_convex_v(model: ModelSpec, t_max: float = 100.0):
    t = np.linspace(0.0, t_max, 2001)
    rows = np.atleast_2d(model.potential.coeffs) if model.potential.degree else np.zeros((1, 0))
    for row in rows:
        v = np.concatenate([[0.0], row])
        d2 = np.polynomial.polynomial.polyder(v, 2) if len(v) > 2 else np.zeros(1)
        if np.any(np.polynomial.polynomial.polyval(t, d2) < -1e-12):
            raise FormError("v is not convex in t = x^2")


def _moments(model, obs, P, sites, boundary, spec):
    return lattice_approx_moments(model, obs, P, sites, boundary, spec)


def _coord(site, p):
    return SliceFunctional.coordinate(site, p)


def check_fkg(model: ModelSpec, f: SliceFunctional, g: SliceFunctional, P: int = 2, sites=None,
              boundary=None, spec: QuadratureSpec = QuadratureSpec()) -> CheckResult:
    """pi(fg) - pi(f) pi(g) for coordinatewise nondecreasing f, g."""
    _require_ferro(model, _region(model, P, sites, boundary))
    r = _moments(model, [f * g, f, g], P, sites, boundary, spec)
    fg, ef, eg = r.values
    val = fg - ef * eg
    return CheckResult("fkg", val, val, val >= -TOL, r.certificate)


def _check_factor(f: Callable, kind: str):
    x = np.linspace(0.0, 6.0, 601)
    fx, fm = f(x), f(-x)
    if kind == "odd":
        ok = np.allclose(fm, -fx, atol=1e-12) and np.all(np.diff(fx) >= -1e-12)
    elif kind == "even":
        ok = np.allclose(fm, fx, atol=1e-12) and np.all(fx >= 0) and np.all(np.diff(fx) >= -1e-12)
    else:
        raise FormError(f"factor kind must be 'odd' or 'even', got {kind!r}")
    if not ok:
        raise FormError(f"factor is not {kind} and increasing as required")


def _gks_product(factors) -> SliceFunctional:
    out = SliceFunctional.constant(1.0)
    for site, p, f, kind in factors:
        _check_factor(f, kind)
        out = out * SliceFunctional.coordinate(site, p, f)
    return out


def check_gks(model: ModelSpec, first, second=None, P: int = 2, sites=None,
              spec: QuadratureSpec = QuadratureSpec()) -> tuple[CheckResult, CheckResult | None]:
    """GKS-I moment of the first product and GKS-II covariance of both.

    Factors are ``(site, slice, f, kind)`` with kind 'odd' (odd increasing)
    or 'even' (even, positive, increasing on [0, inf)).  Zero boundary.
    """
    act = _region(model, P, sites, None)
    _require_ferro(model, act)
    if model.potential.h < 0:
        raise FormError("GKS needs a nonnegative field")
    A = _gks_product(first)
    if second is None:
        r = _moments(model, [A], P, sites, None, spec)
        v = r.values[0]
        return CheckResult("gks1", v, v, v >= -TOL, r.certificate), None
    B = _gks_product(second)
    r = _moments(model, [A, B, A * B], P, sites, None, spec)
    ea, eb, eab = r.values
    cov = eab - ea * eb
    return (CheckResult("gks1", ea, ea, ea >= -TOL, r.certificate),
            CheckResult("gks2", cov, cov, cov >= -TOL, r.certificate))


def pair_correlation(model: ModelSpec, a, b, P: int = 2, sites=None, boundary=None,
                     spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, Certificate]:
    """K(tau, tau' | xi) between points a = (site, slice) and b."""
    xa, xb = _coord(*a), _coord(*b)
    r = _moments(model, [xa * xb, xa, xb], P, sites, boundary, spec)
    ab, ea, eb = r.values
    return ab - ea * eb, r.certificate


def check_positivity(model: ModelSpec, a, b, P: int = 2, sites=None, boundary=None,
                     spec: QuadratureSpec = QuadratureSpec()) -> CheckResult:
    _require_ferro(model, _region(model, P, sites, boundary))
    k, cert = pair_correlation(model, a, b, P, sites, boundary, spec)
    return CheckResult("positivity", k, k, k >= -TOL, cert)


def check_comparison(model: ModelSpec, a, b, boundary: LoopConfiguration, P: int = 2, sites=None,
                     spec: QuadratureSpec = QuadratureSpec()) -> CheckResult:
    """K(.|xi) - K(.|0) for xi >= 0; passes when <= 1e-9."""
    _require_ferro(model, _region(model, P, sites, boundary))
    _require_even_zero_field(model)
    _require_convex_v(model)
    if np.any(boundary.values < 0):
        raise FormError("comparison inequality needs xi >= 0")
    k_xi, c1 = pair_correlation(model, a, b, P, sites, boundary, spec)
    k_0, c2 = pair_correlation(model, a, b, P, sites, None, spec)
    val = k_xi - k_0
    cert = c1 if c1.max_rel_diff >= c2.max_rel_diff else c2
    return CheckResult("comparison", val, -val, val <= TOL, cert)


def _pairings(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i in range(len(rest)):
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            yield [(first, rest[i])] + tail


def ursell(model: ModelSpec, points, P: int = 2, sites=None,
           spec: QuadratureSpec = QuadratureSpec()) -> tuple[float, Certificate]:
    """Fourth Ursell function U(1,2,3,4) at zero boundary."""
    if len(points) != 4:
        raise ValueError("Ursell function needs four points")
    xs = [_coord(*p) for p in points]
    pairs = list(itertools.combinations(range(4), 2))
    obs = [xs[0] * xs[1] * xs[2] * xs[3]] + [xs[i] * xs[j] for i, j in pairs] + xs
    r = _moments(model, obs, P, sites, None, spec)
    e4 = r.values[0]
    e2 = dict(zip(pairs, r.values[1:7]))
    e1 = r.values[7:]
    K = {ij: e2[ij] - e1[ij[0]] * e1[ij[1]] for ij in pairs}
    U = e4 - K[(0, 1)] * K[(2, 3)] - K[(0, 2)] * K[(1, 3)] - K[(0, 3)] * K[(1, 2)]
    return U, r.certificate


def check_lebowitz(model: ModelSpec, points, P: int = 2, sites=None,
                   spec: QuadratureSpec = QuadratureSpec()) -> CheckResult:
    _require_ferro(model, _region(model, P, sites, None))
    _require_even_zero_field(model)
    _require_convex_v(model)
    U, cert = ursell(model, points, P, sites, spec)
    return CheckResult("lebowitz", U, -U, U <= TOL, cert)


def check_gaussian_domination(model: ModelSpec, points, P: int = 2, sites=None,
                              spec: QuadratureSpec = QuadratureSpec()) -> CheckResult:
    """Pairing sum of two-point functions minus the 2n-point moment."""
    n2 = len(points)
    if n2 % 2 or not 2 <= n2 <= 6:
        raise ValueError("Gaussian domination takes 2n points with n <= 3")
    _require_ferro(model, _region(model, P, sites, None))
    _require_even_zero_field(model)
    _require_convex_v(model)
    xs = [_coord(*p) for p in points]
    pairs = list(itertools.combinations(range(n2), 2))
    full = SliceFunctional.constant(1.0)
    for x in xs:
        full = full * x
    r = _moments(model, [full] + [xs[i] * xs[j] for i, j in pairs], P, sites, None, spec)
    e2 = dict(zip(pairs, r.values[1:]))
    bound = sum(math.prod(e2[tuple(sorted(pr))] for pr in pairing) for pairing in _pairings(list(range(n2))))
    margin = bound - r.values[0]
    return CheckResult("gaussian_domination", margin, margin, margin >= -TOL, r.certificate)


# ---------------------------------------------------------------------------
# Dobrushin bound

@dataclass(frozen=True)
class DobrushinBound:
    c_ls: float
    matrix: np.ndarray
    row_sum: float

    @property
    def unique(self) -> bool:
        return bool(self.row_sum < 1.0)


def dobrushin_bound(model: ModelSpec, delta: float, b: float) -> DobrushinBound:
    """Entries |J_ll'| e^{beta delta}/(a + b) and their supremal row sum.

    The row sum is taken over the infinite lattice for decay kinds.
    """
    if model.a + b <= 0:
        raise ModelError("decomposition needs a + b > 0")
    c = math.exp(model.beta * delta) / (model.a + b)
    M = np.abs(model.interaction_matrix()) * c
    return DobrushinBound(c, M, j_hat_zero(model) * c)


# ---------------------------------------------------------------------------
# seeded sweep

def _model_1d(rng, *, L=1, field=0.0, J=None, b1=None) -> "ModelSpec":
    from .model import InteractionSpec, LatticeSpec, PotentialSpec
    J = rng.uniform(0.05, 0.6) if J is None else J
    b1 = rng.uniform(-1.0, 0.5) if b1 is None else b1
    b2 = rng.uniform(0.1, 1.0)
    return ModelSpec(LatticeSpec(1, L), InteractionSpec("nearest_neighbor", J),
                     PotentialSpec([b1, b2], h=field), m=rng.uniform(0.5, 2.0),
                     a=rng.uniform(0.5, 2.0), beta=rng.uniform(0.5, 2.0))


_ODD = [(np.tanh, "tanh"), (lambda x: x, "x"), (lambda x: x ** 3, "x^3"), (np.arctan, "arctan")]
# smooth factors only: a kink such as |x| defeats the spectral accuracy of the trapezoid rule
_EVEN = [(lambda x: x * x, "x^2"), (lambda x: np.sqrt(1 + x * x), "sqrt(1+x^2)"),
         (lambda x: np.log1p(x * x), "log(1+x^2)")]


def verify_inequalities(seed: int = 20240601, draws: int = 20,
                        spec: QuadratureSpec = QuadratureSpec()) -> list[CheckResult]:
    """Seeded random sweep of every correlation inequality on D <= 6 instances."""
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []

    def point(P, n=2):
        return (int(rng.integers(n)), int(rng.integers(P)))

    for _ in range(draws):
        P = int(rng.integers(2, 4))
        model = _model_1d(rng, field=float(rng.uniform(-0.5, 0.5)) if rng.random() < 0.5 else 0.0)
        funcs = [np.tanh, lambda x: x, lambda x: x + x ** 3, lambda x: np.exp(0.5 * x)]
        f = SliceFunctional.coordinate(*point(P), funcs[rng.integers(4)])
        g = SliceFunctional.coordinate(*point(P), funcs[rng.integers(4)]) \
            + SliceFunctional.coordinate(*point(P), funcs[rng.integers(4)])
        res = check_fkg(model, f, g, P, spec=spec)
        res.params = _params(model, P)
        out.append(res)
    for _ in range(draws):
        P = int(rng.integers(2, 4))
        model = _model_1d(rng, field=float(rng.uniform(0.0, 0.5)))

        def factors(k):
            fs = []
            for _ in range(k):
                if rng.random() < 0.5:
                    fn, name = _ODD[rng.integers(len(_ODD))]
                    kind = "odd"
                else:
                    fn, name = _EVEN[rng.integers(len(_EVEN))]
                    kind = "even"
                fs.append((*point(P), fn, kind))
            return fs

        r1, r2 = check_gks(model, factors(int(rng.integers(1, 3))), factors(int(rng.integers(1, 3))), P, spec=spec)
        for r in (r1, r2):
            r.params = _params(model, P)
            out.append(r)
    for _ in range(draws):
        P = int(rng.integers(2, 4))
        model = _model_1d(rng)
        pts = [point(P) for _ in range(4)]
        res = check_lebowitz(model, pts, P, spec=spec)
        res.params = _params(model, P) | {"points": pts}
        out.append(res)
    for _ in range(draws):
        P = int(rng.integers(2, 4))
        model = _model_1d(rng)
        n = int(rng.integers(2, 4))
        pts = [point(P) for _ in range(2 * n)]
        res = check_gaussian_domination(model, pts, P, spec=spec)
        res.params = _params(model, P) | {"points": pts}
        out.append(res)
    for _ in range(draws):
        P = int(rng.integers(2, 4))
        model = _model_1d(rng, L=2)
        region = np.array([[0], [1]])
        outside = np.array([[-1], [2]])
        xi = LoopConfiguration(model.beta, outside, rng.uniform(0.0, 1.5, size=(2, P)))
        a, b = point(P), point(P)
        res = check_comparison(model, a, b, xi, P, sites=region, spec=spec)
        res.params = _params(model, P) | {"points": [a, b], "xi": xi.values.tolist()}
        out.append(res)
    for _ in range(draws):
        P = int(rng.integers(2, 4))
        model = _model_1d(rng, L=2, field=float(rng.uniform(-0.5, 0.5)))
        region = np.array([[0], [1]])
        outside = np.array([[-1], [2]])
        xi = LoopConfiguration(model.beta, outside, rng.uniform(-1.5, 1.5, size=(2, P)))
        a, b = point(P), point(P)
        res = check_positivity(model, a, b, P, sites=region, boundary=xi, spec=spec)
        res.params = _params(model, P) | {"points": [a, b], "xi": xi.values.tolist()}
        out.append(res)
    return out


def _params(model: ModelSpec, P: int) -> dict:
    return {"P": P, "m": model.m, "a": model.a, "beta": model.beta, "J": model.interaction.J,
            "coeffs": [float(c) for c in np.atleast_1d(model.potential.coeffs)], "h": model.potential.h}

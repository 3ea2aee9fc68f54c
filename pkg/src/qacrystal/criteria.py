"""Closed-form uniqueness and phase-transition criteria.

Everything here is cheap scalar algebra on the model data plus the one-site
spectrum: the convex-envelope split of V, the high-temperature and quantum
stabilization tests, the lattice Green function constant theta_d, the
implicit function f, phi, t*, the threshold beta*, and the Lee-Yang
coefficient test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .model import ModelError, ModelSpec, PotentialSpec, j_hat_zero
from .spectral import Spectrum, default_grid, gap_info, solve_one_site


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class Predicate:
    """A criterion value with its signed margin (negative margin = violated).

    The margin's sign convention is stated by each producer.
    """

    holds: bool
    margin: float
    note: str = ""

    def __bool__(self):
        return bool(self.holds)


# ---------------------------------------------------------------------------
# convex envelope

def _lower_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of points sorted by x (monotone chain)."""
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            cross = (x[k] - x[j]) * (y[i] - y[j]) - (y[k] - y[j]) * (x[i] - x[j])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


@dataclass(frozen=True)
class ConvexEnvelope:
    """Convex envelope of f: f itself except on the listed bitangent segments."""

    f: Callable[[np.ndarray], np.ndarray]
    segments: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.array(self.f(x), dtype=float)
        for x1, x2 in self.segments:
            y1, y2 = float(self.f(np.array(x1))), float(self.f(np.array(x2)))
            inside = (x > x1) & (x < x2)
            out = np.where(inside, y1 + (y2 - y1) * (x - x1) / (x2 - x1), out)
        return out

    def excess(self) -> float:
        """max(f - envelope), the height of the largest barrier."""
        best = 0.0
        for x1, x2 in self.segments:
            g = lambda t: -(float(self.f(np.array(t))) - float(self(np.array(t))))
            ts = np.linspace(x1, x2, 401)
            vals = np.array([-g(t) for t in ts])
            i = int(np.argmax(vals))
            lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
            res = optimize.minimize_scalar(g, bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-13})
            best = max(best, vals[i], -res.fun)
        return float(best)


def _tangent_point(dP, s: float, x0: float, h: float) -> float:
    """Solve f'(x) = s within a few grid steps of x0 (f' increasing there)."""
    lo, hi = x0 - 4 * h, x0 + 4 * h
    g = lambda x: dP(x) - s
    if g(lo) > 0 or g(hi) < 0:
        return x0
    return float(optimize.brentq(g, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps))


def convex_envelope(poly: np.ndarray, lo: float, hi: float, n: int = 20001) -> ConvexEnvelope:
    """Envelope of the power-basis polynomial ``poly`` on [lo, hi].

    The grid hull locates each non-convex stretch; its endpoints are then
    polished until both are tangency points of the chord slope.
    """
    P = np.polynomial.Polynomial(poly)
    dP = P.deriv()
    xs = np.linspace(lo, hi, n)
    ys = P(xs)
    hull = _lower_hull(xs, ys)
    segs = []
    for i, j in zip(hull[:-1], hull[1:]):
        if j - i < 2:
            continue
        x1, x2 = float(xs[i]), float(xs[j])
        h = xs[1] - xs[0]
        # alternate: chord slope s, then tangency points f'(x) = s near each end
        for _ in range(60):
            s = (P(x2) - P(x1)) / (x2 - x1)
            n1, n2 = _tangent_point(dP, s, x1, h), _tangent_point(dP, s, x2, h)
            done = abs(n1 - x1) + abs(n2 - x2) < 1e-15 * (1 + abs(x1) + abs(x2))
            x1, x2 = n1, n2
            if done:
                break
        segs.append((float(x1), float(x2)))
    return ConvexEnvelope(P, tuple(segs))


# ---------------------------------------------------------------------------
# decomposition

@dataclass(frozen=True)
class Decomposition:
    """V = V1 + V2 with V1'' >= b and V2 of oscillation delta."""

    delta: float
    b: float
    description: str
    envelope: ConvexEnvelope | None = None

    def v1(self, potential: PotentialSpec, x):
        x = np.asarray(x, dtype=float)
        if self.envelope is None:
            return potential(x)
        return self.envelope(x) - potential.h * x

    def v2(self, potential: PotentialSpec, x):
        return potential(np.asarray(x, dtype=float)) - self.v1(potential, x)


def _even_poly(potential: PotentialSpec) -> np.ndarray:
    if potential.per_site:
        raise PreconditionError("decomposition is defined for uniform potentials")
    c = np.zeros(2 * len(potential.coeffs) + 1)
    c[2::2] = potential.coeffs
    return c


def _poly_inf(poly: np.ndarray, lo: float = -np.inf, hi: float = np.inf) -> float:
    """Infimum of a polynomial (bounded below on the given interval)."""
    P = np.polynomial.Polynomial(poly)
    if P.degree() <= 0:
        return float(P.coef[0]) if P.coef.size else 0.0
    crit = [r.real for r in P.deriv().roots() if abs(r.imag) < 1e-9 and lo <= r.real <= hi]
    pts = crit + [x for x in (lo, hi) if np.isfinite(x)]
    return float(min(P(np.array(pts)))) if pts else -np.inf


def decompose_potential(potential: PotentialSpec, a: float = 1.0) -> Decomposition:
    """Split V (field folded into V1) into a convex-bounded and a bounded part.

    When a + inf V'' > 0 the whole potential is kept in V1 (delta = 0,
    b = inf V''); otherwise V1 is the convex envelope (b = 0) and delta is
    the largest barrier above it.
    """
    c = _even_poly(potential)
    if not np.any(c):
        return Decomposition(0.0, 0.0, "harmonic")
    d2 = np.polynomial.Polynomial(c).deriv(2).coef
    inf2 = _poly_inf(d2)
    if a + inf2 > 0:
        return Decomposition(0.0, float(inf2), "V1 = V (convex up to the harmonic term)")
    roots = np.polynomial.Polynomial(d2).roots()
    reach = max([1.0] + [abs(r.real) for r in roots if abs(r.imag) < 1e-9])
    X = 4.0 * reach
    env = convex_envelope(c, -X, X)
    return Decomposition(env.excess(), 0.0, "V1 = convex envelope of V on the spectral grid", env)


def high_temp_uniqueness(decomp: Decomposition, model: ModelSpec) -> Predicate:
    """exp(beta delta) < (a + b) / J0; margin = beta delta - log((a+b)/J0), holds iff < 0."""
    J0 = j_hat_zero(model)
    ab = model.a + decomp.b
    if ab <= 0:
        raise PreconditionError("decomposition needs a + b > 0")
    if J0 == 0:
        return Predicate(True, -math.inf, "no interaction")
    margin = model.beta * decomp.delta - math.log(ab / J0)
    return Predicate(margin < 0, margin)


# ---------------------------------------------------------------------------
# quantum stabilization

def comparison_potential(potential: PotentialSpec) -> tuple[Callable, str]:
    """Convex comparison function for the rigidity test, as a function of x.

    v(t) = sum_s b^(s) t^s is used as is when convex on t >= 0, else its
    convex envelope in t.
    """
    if potential.per_site:
        raise PreconditionError("site-dependent potentials are unchecked by the comparison test")
    v = np.concatenate([[0.0], potential.coeffs]) if potential.coeffs.size else np.zeros(1)
    Pv = np.polynomial.Polynomial(v)
    if Pv.degree() < 2 or _poly_inf(Pv.deriv(2).coef, 0.0) >= 0:
        return (lambda x: Pv(np.asarray(x, dtype=float) ** 2)), "v convex in t"
    roots = Pv.deriv(2).roots()
    T = 4.0 * max([1.0] + [abs(r.real) for r in roots if abs(r.imag) < 1e-9])
    env = convex_envelope(v, 0.0, T)
    return (lambda x: env(np.asarray(x, dtype=float) ** 2)), "convex envelope of v in t"


def rigidity(model: ModelSpec, spectrum: Spectrum | None = None) -> tuple[float, float, Spectrum]:
    """(Delta, m Delta^2, spectrum) for the comparison potential."""
    if spectrum is None:
        vfun, _ = comparison_potential(model.potential)
        grid = default_grid(model.m, model.a, PotentialSpec(model.potential.coeffs))
        spectrum = solve_one_site(model.m, model.a, vfun, grid, K=16)
    info = gap_info(spectrum)
    return info.value, model.m * info.value ** 2, spectrum


def quantum_stabilization(model: ModelSpec, spectrum: Spectrum | None = None) -> Predicate:
    """m Delta^2 > J0; margin = m Delta^2 - J0, holds iff > 0."""
    if not model.potential.is_even or model.potential.h != 0:
        raise PreconditionError("quantum stabilization needs an even potential without field")
    _, rig, _ = rigidity(model, spectrum)
    J0 = j_hat_zero(model)
    return Predicate(rig > J0, rig - J0)


# ---------------------------------------------------------------------------
# lattice Green function constant

def _bessel_tail(d: int, T: float) -> float:
    """int_T^inf (e^-t I0(t))^d dt from the large-t expansion of I0."""
    # e^-t I0(t) ~ (2 pi t)^(-1/2) sum_k c_k t^-k
    c = [1.0, 1 / 8, 9 / 128, 225 / 3072, 11025 / 98304]
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, c)[: len(c)]
    total = 0.0
    for k, ck in enumerate(poly):
        e = d / 2 + k
        total += ck * T ** (1 - e) / (e - 1)
    return float((2 * math.pi) ** (-d / 2) * total)


def theta_d(d: int, rtol: float = 1e-10) -> float:
    """(2 pi)^-d int 1/E(p) dp with E(p) = sum_j (1 - cos p_j), d >= 3.

    Uses 1/E = int_0^inf e^{-tE} dt, so theta_d = int_0^inf (e^-t I0(t))^d dt.
    """
    if int(d) != d or d < 3:
        raise PreconditionError("theta_d diverges for d < 3")
    T = 2000.0
    f = lambda t: special.i0e(t) ** d
    body = 0.0
    edges = [0.0, 1.0, 10.0, 100.0, T]
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=rtol, limit=200)
        body += val
    return body + _bessel_tail(d, T)


def theta_3_direct(n: int = 96) -> float:
    """theta_3 by tensor Gauss-Legendre over [0, pi]^3.

    The 2/|p|^2 singularity at the origin is removed with the Gaussian
    counterterm g = 2 exp(-c|p|^2)/|p|^2, whose octant integral is
    pi^(3/2) / (4 sqrt(c) / 2) with c = 4 (the part beyond the cube is below 1e-17).
    """
    c = 4.0
    u, w = np.polynomial.legendre.leggauss(n)
    p = 0.5 * math.pi * (u + 1)
    w = 0.5 * math.pi * w
    X, Y = np.meshgrid(p, p, indexing="ij")
    total = 0.0
    for pz, wz in zip(p, w):
        E = 3.0 - np.cos(X) - np.cos(Y) - math.cos(pz)
        r2 = X * X + Y * Y + pz * pz
        vals = 1.0 / E - 2.0 * np.exp(-c * r2) / r2
        total += wz * np.einsum("i,j,ij->", w, w, vals)
    counter = 4 * math.pi ** 1.5 / math.sqrt(c) / 8
    return float((total + counter) / math.pi ** 3)


# ---------------------------------------------------------------------------
# f, phi, t*

def _newton_bisect(g: Callable, dg: Callable, lo: float, hi: float, x0: float,
                   tol: float = 1e-14, maxit: int = 200) -> float:
    """Root of an increasing function by Newton steps kept inside a bracket."""
    x = min(max(x0, lo), hi)
    for _ in range(maxit):
        gx = g(x)
        if gx == 0:
            return x
        if gx > 0:
            hi = x
        else:
            lo = x
        d = dg(x)
        step = x - gx / d if d > 0 else 0.5 * (lo + hi)
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if abs(step - x) <= tol * max(1.0, abs(x)):
            return step
        x = step
    return x


def f_dls(s: float) -> float:
    """f(s) = tanh(u)/u where u tanh u = s, with f(0) = 1."""
    s = float(s)
    if s < 0:
        raise ValueError("f is defined for s >= 0")
    if s == 0:
        return 1.0
    g = lambda u: u * math.tanh(u) - s
    dg = lambda u: math.tanh(u) + u / math.cosh(u) ** 2 if u < 350 else 1.0
    # sqrt(s) <= u for s <= 1, s <= u <= s + 1 always
    lo = min(math.sqrt(s), s)
    hi = s + 1.0
    u = _newton_bisect(g, dg, lo, hi, math.sqrt(s) if s < 1 else s, tol=1e-15)
    return math.tanh(u) / u


def phi(t: float, alpha: float) -> float:
    """phi(t, alpha) = alpha t f(t / alpha)."""
    if t < 0 or alpha <= 0:
        raise ValueError("phi needs t >= 0 and alpha > 0")
    return alpha * t * f_dls(t / alpha)


def Phi(potential: PotentialSpec, t):
    """sum_{s>=2} (2s)! / (2^{s-1} (s-1)!) b^(s) t^{s-1}."""
    b = np.asarray(potential.coeffs, dtype=float)
    out = 0.0
    for s in range(2, len(b) + 1):
        coef = math.factorial(2 * s) / (2 ** (s - 1) * math.factorial(s - 1))
        out = out + coef * b[s - 1] * np.asarray(t, dtype=float) ** (s - 1)
    return out


def _phi_prime(potential: PotentialSpec, t: float) -> float:
    b = potential.coeffs
    out = 0.0
    for s in range(3, len(b) + 1):
        coef = math.factorial(2 * s) / (2 ** (s - 1) * math.factorial(s - 1))
        out += coef * b[s - 1] * (s - 1) * t ** (s - 2)
    if len(b) >= 2:
        out += 12 * b[1]
    return out


def t_star_admissible(potential: PotentialSpec, a: float) -> bool:
    b = np.asarray(potential.coeffs, dtype=float)
    if potential.per_site or b.ndim != 1 or len(b) < 2:
        return False
    return bool(2 * b[0] < -a and np.all(b[1:] >= 0) and b[-1] > 0)


def t_star(potential: PotentialSpec, a: float) -> float:
    """Unique t > 0 with a + 2 b^(1) + Phi(t) = 0."""
    if not t_star_admissible(potential, a):
        raise PreconditionError("t* needs 2 b^(1) < -a, b^(s) >= 0 for s >= 2 and b^(r) > 0")
    c = a + 2 * potential.coeffs[0]
    g = lambda t: c + float(Phi(potential, t))
    dg = lambda t: _phi_prime(potential, t)
    hi = 1.0
    while g(hi) <= 0:
        hi *= 2
    return _newton_bisect(g, dg, 0.0, hi, 0.5 * hi, tol=1e-15)


# ---------------------------------------------------------------------------
# phase transition threshold

def nn_intensity(model: ModelSpec) -> float:
    """J = inf of J_ll' over nearest-neighbour pairs."""
    inter = model.interaction
    if inter.kind == "matrix":
        sites = model.lattice.sites()
        J = model.interaction_matrix(sites)
        dist = model.lattice.distance(sites[:, None, :], sites[None, :, :])
        nn = np.abs(dist - 1) < 1e-12
        return float(J[nn].min()) if np.any(nn) else 0.0
    return float(inter.radial(1.0)) if inter.kind != "nearest_neighbor" else float(inter.J)


def transition_condition(model: ModelSpec) -> Predicate:
    """J > theta_d / (8 m t*^2); margin = J - theta_d / (8 m t*^2)."""
    th = theta_d(model.lattice.d)
    ts = t_star(model.potential, model.a)
    J = nn_intensity(model)
    bound = th / (8 * model.m * ts * ts)
    return Predicate(J > bound, J - bound)


@dataclass(frozen=True)
class Threshold:
    beta_star: float | None
    exists: bool
    residual: float | None
    theta: float
    t_star: float
    J: float


def phase_transition_threshold(model: ModelSpec) -> Threshold:
    """beta* solving 2 theta_d m / J = phi(beta, 4 m t*), when it exists."""
    d = model.lattice.d
    if d < 3:
        raise PreconditionError("the transition criterion needs d >= 3")
    J = nn_intensity(model)
    if J <= 0:
        raise PreconditionError("the transition criterion needs J > 0")
    th = theta_d(d)
    ts = t_star(model.potential, model.a)
    alpha = 4 * model.m * ts
    target = 2 * th * model.m / J
    if not target < alpha * alpha:
        return Threshold(None, False, None, th, ts, J)
    g = lambda b: phi(b, alpha) - target
    hi = 1.0
    while g(hi) <= 0:
        hi *= 2
    beta = optimize.brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return Threshold(float(beta), True, abs(g(beta)), th, ts, J)


def infrared_lower_bound(model: ModelSpec) -> float:
    """t* f(beta / 4 m t*) - theta_d / (2 beta J), the infrared bound on the order parameter.

    Positive exactly when beta exceeds beta*.  On a finite box it is an
    empirical comparison for the sampler, not a theorem.
    """
    d = model.lattice.d
    if d < 3:
        raise PreconditionError("the infrared bound needs d >= 3")
    J = nn_intensity(model)
    if J <= 0:
        raise PreconditionError("the infrared bound needs J > 0")
    ts = t_star(model.potential, model.a)
    return ts * f_dls(model.beta / (4 * model.m * ts)) - theta_d(d) / (2 * model.beta * J)


# ---------------------------------------------------------------------------
# Lee-Yang coefficient condition

def _laguerre_polynomial(p: np.ndarray, tol: float = 1e-9) -> bool:
    """True iff the real polynomial has positive leading part and only real roots <= 0."""
    P = np.polynomial.Polynomial(p).trim()
    if P.degree() == 0:
        return bool(P.coef[0] > 0)
    if P.coef[-1] <= 0:
        return False
    r = P.roots()
    scale = np.maximum(1.0, np.abs(r))
    return bool(np.all(np.abs(r.imag) <= tol * scale) and np.all(r.real <= tol * scale))


def lee_yang_condition(potential: PotentialSpec, a: float) -> bool | None:
    """Does some b >= 0 make b + u' Laguerre, u(t) = v(t) + a t / 2?

    Exact for v of degree <= 3 in t = x^2; for higher degree a search over
    b returns True when one is found and None (inconclusive) otherwise.
    """
    if potential.per_site:
        raise PreconditionError("the Lee-Yang test is stated for uniform potentials")
    b = np.asarray(potential.coeffs, dtype=float)
    r = len(b)
    c = (b[0] if r else 0.0) + a / 2
    if r <= 2:
        # b + u' is a positive constant or 2 b2 t + (b + c) with b2 > 0
        return True
    if r == 3:
        return bool(b[1] >= 0 and c <= b[1] ** 2 / (3 * b[2]))
    du = np.array([c] + [(s + 1) * b[s] for s in range(1, r)])
    cands = [0.0, max(0.0, -c)]
    for lo_b in np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 241)]):
        cands.append(float(lo_b))
    for shift in cands:
        p = du.copy()
        p[0] += shift
        if _laguerre_polynomial(p):
            return True
    return None


# ---------------------------------------------------------------------------
# report

@dataclass
class CriteriaReport:
    j_hat_zero: float
    delta: float
    b: float
    gap: float | None
    rigidity: float | None
    theta_d: float | None
    t_star: float | None
    beta_star: float | None
    high_temp: Predicate
    quantum: Predicate | None
    transition: Predicate | None
    lee_yang: bool | None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def pred(p):
            return None if p is None else {"holds": bool(p.holds), "margin": _num(p.margin),
                                           "note": p.note}
        return {
            "j_hat_zero": _num(self.j_hat_zero),
            "decomposition": {"delta": _num(self.delta), "b": _num(self.b)},
            "gap": _num(self.gap),
            "m_gap_squared": _num(self.rigidity),
            "theta_d": _num(self.theta_d),
            "t_star": _num(self.t_star),
            "beta_star": _num(self.beta_star),
            "high_temperature_uniqueness": pred(self.high_temp),
            "quantum_stabilization": pred(self.quantum),
            "transition_condition": pred(self.transition),
            "lee_yang_condition": self.lee_yang,
            "notes": list(self.notes),
        }


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def criteria_report(model: ModelSpec) -> CriteriaReport:
    notes = []
    J0 = j_hat_zero(model)
    pot = model.potential
    if pot.per_site:
        raise PreconditionError("criteria are evaluated for uniform potentials")
    dec = decompose_potential(pot, model.a)
    ht = high_temp_uniqueness(dec, model)
    gap = rig = None
    qs = None
    if pot.is_even and pot.h == 0:
        gap, rig, spec = rigidity(model)
        qs = Predicate(rig > J0, rig - J0)
    else:
        notes.append("quantum stabilization needs an even potential without field")
    th = ts = bstar = None
    trans = None
    if model.lattice.d >= 3 and t_star_admissible(pot, model.a) and nn_intensity(model) > 0:
        res = phase_transition_threshold(model)
        th, ts, bstar = res.theta, res.t_star, res.beta_star
        trans = transition_condition(model)
    elif model.lattice.d >= 3:
        th = theta_d(model.lattice.d)
        notes.append("transition criterion not applicable (needs a double well, J > 0)")
    else:
        notes.append("transition criterion needs d >= 3")
    ly = lee_yang_condition(pot, model.a)
    return CriteriaReport(J0, dec.delta, dec.b, gap, rig, th, ts, bstar, ht, qs, trans, ly, notes)

"""Lee-Yang checks on small exact instances.

The field couples to S = eps sum_{l,p} x_lp, so Z(h) = Z(0) E[exp(h S)] and
its Taylor coefficients are Z(0) E[S^k].  For even potentials Z is a
function of s = h^2 and the question is whether its zeros in s lie on the
negative real axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .criteria import lee_yang_condition
from .exact import MAX_DIM, Certificate, QuadratureSpec, log_partition, total_displacement_moments
from .model import ModelError, ModelSpec, PotentialSpec

MAX_DEGREE = 12
ROOT_TOL = 1e-6
ODD_TOL = 1e-10


@dataclass
class FieldPolynomial:
    """Truncation Z(h) ~ sum_{k<=2n} c_k h^k / k! with c_k = Z(0) E[S^k]."""

    coeffs: np.ndarray
    log_z: float
    certificate: Certificate
    descriptor: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def moments(self) -> np.ndarray:
        """E[S^k] = c_k / c_0."""
        return self.coeffs / self.coeffs[0]

    def s_coefficients(self, degree: int | None = None) -> np.ndarray:
        """a_j = c_2j / (2j)! / c_0 for the polynomial in s = h^2 (ascending)."""
        deg = self.degree if degree is None else degree
        mom = self.moments
        return np.array([mom[2 * j] / math.factorial(2 * j) for j in range(deg // 2 + 1)])

    def __call__(self, h):
        h = np.asarray(h, dtype=complex if np.iscomplexobj(h) else float)
        out = 0.0
        for k in range(self.degree, -1, -1):
            out = out * h + self.coeffs[k] / math.factorial(k)
        return out

    def to_dict(self) -> dict:
        return {"coefficients": [float(c) for c in self.coeffs], "log_z": float(self.log_z),
                "certificate": self.certificate.to_dict(), "instance": self.descriptor}


def build_field_polynomial(model: ModelSpec, P: int = 2, sites=None, degree: int = 8,
                           spec: QuadratureSpec = QuadratureSpec()) -> FieldPolynomial:
    """Taylor coefficients of Z(h) at h = 0 from exact field-free moments of S."""
    if degree < 2 or degree > MAX_DEGREE or degree % 2:
        raise ValueError(f"degree must be even in [2, {MAX_DEGREE}]")
    pot = model.potential
    if pot.h != 0:
        model = model.replace(potential=PotentialSpec(pot.coeffs, 0.0))
    n = model.lattice.n_sites if sites is None else len(np.asarray(sites).reshape(-1, model.lattice.d))
    if P * n > MAX_DIM:
        raise ModelError(f"P |Lambda| = {P * n} exceeds {MAX_DIM}")
    mom, cert = total_displacement_moments(model, degree, P, sites, spec)
    lz, cz = log_partition(model, P, sites, spec=spec)
    cert = Certificate(cert.q, cert.q_check, max(cert.max_rel_diff, cz.max_rel_diff), cert.rtol)
    coeffs = math.exp(lz) * mom
    desc = {"sites": n, "P": P, "beta": model.beta, "m": model.m, "a": model.a,
            "coeffs": np.atleast_1d(pot.coeffs).tolist(), "J": model.interaction.J,
            "degree": degree, "even": pot.is_even,
            "condition": lee_yang_condition(pot, model.a) if not pot.per_site else None}
    if pot.is_even:
        odd = np.abs(mom[1::2])
        scale = np.sqrt(np.abs(mom[np.minimum(2 * np.arange(1, degree + 1, 2), degree)]))
        desc["max_odd_moment"] = float(np.max(odd / np.maximum(scale, 1.0))) if odd.size else 0.0
    return FieldPolynomial(coeffs, lz, cert, desc)


@dataclass
class ZeroReport:
    roots: np.ndarray
    verdict: str                 # PASS, FAIL or inconclusive
    degree: int
    residual: float
    ill_conditioned: bool
    lower_verdict: str | None
    turan: np.ndarray
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "verdict": self.verdict,
                "roots": [[float(r.real), float(r.imag)] for r in self.roots],
                "root_residual": float(self.residual), "ill_conditioned": self.ill_conditioned,
                "lower_degree_verdict": self.lower_verdict,
                "turan_margins": [float(t) for t in self.turan], "notes": list(self.notes)}


def _roots(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Roots of sum a_j s^j and the largest scaled residual |p(r)| / sum |a_j| |r|^j."""
    a = np.trim_zeros(np.asarray(a, dtype=float), "b")
    if len(a) < 2:
        return np.zeros(0, dtype=complex), 0.0
    r = np.polynomial.polynomial.polyroots(a)
    res = 0.0
    for z in r:
        num = abs(np.polynomial.polynomial.polyval(z, a))
        den = np.polynomial.polynomial.polyval(abs(z), np.abs(a))
        res = max(res, num / den)
    return r.astype(complex), float(res)


def _on_negative_axis(r: np.ndarray, tol: float = ROOT_TOL) -> bool:
    if r.size == 0:
        return True
    mag = np.maximum(np.abs(r), 1e-300)
    return bool(np.all(r.real < tol * mag) and np.all(np.abs(r.imag) <= tol * np.abs(r.real)))


def zero_location_check(poly: FieldPolynomial, degree: int | None = None) -> ZeroReport:
    """Locate the s = h^2 roots of the truncation of degree 2n.

    PASS iff every root is on the negative real axis to relative 1e-6; the
    verdict is inconclusive when the 2n - 2 truncation disagrees.  The
    Turan margins a_j^2 - a_{j-1} a_{j+1} (j! a_j scaled) must be >= 0 for
    any function of the Laguerre class and are reported as a cross-check.
    """
    deg = poly.degree if degree is None else degree
    a = poly.s_coefficients(deg)
    r, res = _roots(a)
    verdict = "PASS" if _on_negative_axis(r) else "FAIL"
    lower = None
    if deg >= 4:
        r2, _ = _roots(poly.s_coefficients(deg - 2))
        lower = "PASS" if _on_negative_axis(r2) else "FAIL"
    notes = []
    ill = res > ROOT_TOL
    if ill:
        notes.append(f"root residual {res:.2e} exceeds {ROOT_TOL}")
    if lower is not None and lower != verdict:
        notes.append(f"degree {deg - 2} gives {lower}")
        verdict = "inconclusive"
    g = np.array([math.factorial(j) * a[j] for j in range(len(a))])
    turan = np.array([g[j] ** 2 - g[j - 1] * g[j + 1] for j in range(1, len(g) - 1)])
    return ZeroReport(r, verdict, deg, res, ill, lower, turan, notes)


@dataclass
class RidgeReport:
    h: np.ndarray
    log_z: np.ndarray
    positive: bool
    log_convex: bool
    min_second_difference: float


def ridge_check(model: ModelSpec, P: int = 2, sites=None, h_grid=None,
                spec: QuadratureSpec = QuadratureSpec(), tol: float = 1e-9) -> RidgeReport:
    """Z(h) > 0 and log Z convex in h, evaluated exactly on a real grid."""
    h = np.linspace(-2.0, 2.0, 41) if h_grid is None else np.asarray(h_grid, dtype=float)
    pot = model.potential
    lz = []
    for hv in h:
        val, _ = log_partition(model.replace(potential=PotentialSpec(pot.coeffs, float(hv))), P, sites,
                               spec=spec)
        lz.append(val)
    lz = np.array(lz)
    dh = np.diff(h)
    slopes = np.diff(lz) / dh
    second = np.diff(slopes) / (0.5 * (dh[1:] + dh[:-1]))
    scale = max(1.0, float(np.max(np.abs(second))))
    return RidgeReport(h, lz, bool(np.all(np.isfinite(lz))),
                       bool(np.all(second >= -tol * scale)), float(np.min(second)))


"""Zero locations of truncated field polynomials.

Prints, for a Gaussian, a Laguerre-class quartic and a non-Laguerre sextic
instance, the verdict of every even truncation degree together with the
Turan margins c_k^2 - c_{k-1} c_{k+1} of the s-coefficients.  Truncations
of an entire function of the Laguerre class need not be real-rooted, so
the verdicts are reported per degree and never extrapolated.
"""
import numpy as np

from qacrystal.criteria import lee_yang_condition
from qacrystal.leeyang import build_field_polynomial, zero_location_check
from qacrystal.model import InteractionSpec, LatticeSpec, ModelSpec, PotentialSpec

INSTANCES = {
    "gaussian": [0.5],
    "quartic x^4 + x^2/2": [0.5, 1.0],
    "non-Laguerre b2 < 0": [0.5, -0.6, 0.3],
}


def model(coeffs, J=0.3):
    return ModelSpec(LatticeSpec(1, 1), InteractionSpec("nearest_neighbor", J), PotentialSpec(coeffs))


def main():
    for name, coeffs in INSTANCES.items():
        m = model(coeffs)
        cond = lee_yang_condition(m.potential, m.a)
        print(f"\n{name}: coeffs {coeffs}, coefficient condition {cond}")
        poly = build_field_polynomial(m, P=3, degree=12)
        for deg in (4, 6, 8, 10, 12):
            rep = zero_location_check(poly, degree=deg)
            worst = max(abs(r.imag) / abs(r) for r in rep.roots)
            print(f"  degree {deg:2d}: {rep.verdict:12s} max |Im s|/|s| = {worst:.3f}  "
                  f"min Turan margin = {np.min(rep.turan):+.3e}")


if __name__ == "__main__":
    main()

"""Computable Euclidean Gibbs measures of quantum anharmonic crystals."""

from .model import (InteractionSpec, LatticeSpec, ModelError, ModelSpec, PotentialSpec, WeightFamily,
                    j_hat_alpha, j_hat_zero, select_alpha)
from .spectral import GridSpec, Spectrum, gap, one_site_correlation_integral, solve_one_site
from .loops import (FreeMeasureSpec, LoopConfiguration, LoopPath, energy, energy_with_boundary,
                    holder_seminorm, lebowitz_presutti_check, norm_alpha, sample_free_loop)

__version__ = "0.1.0"

__all__ = [
    "InteractionSpec", "LatticeSpec", "ModelError", "ModelSpec", "PotentialSpec", "WeightFamily",
    "j_hat_alpha", "j_hat_zero", "select_alpha",
    "GridSpec", "Spectrum", "gap", "one_site_correlation_integral", "solve_one_site",
    "FreeMeasureSpec", "LoopConfiguration", "LoopPath", "energy", "energy_with_boundary",
    "holder_seminorm", "lebowitz_presutti_check", "norm_alpha", "sample_free_loop",
]

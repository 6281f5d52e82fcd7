"""Fisher information, effective dimension and Fourier spectrum analyses."""
from .fisher import (
    EffDimCurve,
    FimEstimate,
    Spectrum,
    c_n,
    effective_dimension,
    eigenvalues,
    empirical_fim,
    fim_spectrum,
    fims_over_thetas,
    format_effdim_table,
    format_spectrum_table,
    loglik_gradient,
    loglik_gradients,
    normalize_fims,
    sampled_scores,
)
from .fourier import FourierSpectrum, GridTooLarge, fourier_probe, predicted_bounds

__all__ = [
    "EffDimCurve", "FimEstimate", "FourierSpectrum", "GridTooLarge", "Spectrum", "c_n",
    "effective_dimension", "eigenvalues", "empirical_fim", "fim_spectrum", "fims_over_thetas",
    "format_effdim_table", "format_spectrum_table", "fourier_probe", "loglik_gradient",
    "loglik_gradients", "normalize_fims", "predicted_bounds", "sampled_scores",
]

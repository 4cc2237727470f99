"""Hyperspectral unmixing with an augmented linear mixing model.

Pixels are modelled as ``y = S A x + E b + n``: scaled endmember mixtures
plus a variability term spanned by a dictionary ``E``.  The package provides
least-squares and sparse baselines, a pixel-wise solver for a fixed ``E``,
joint dictionary learning, a synthetic scene generator, metrics and a CLI.
"""
from ._backend import BACKEND
from .baselines import (BaselineResult, PixelSolveError, scale_normalize, unmix_clsu,
                        unmix_fclsu, unmix_sclsu, unmix_ssunsal, unmix_sunsal)
from .metrics import (ReportRow, armse, asam, match_endmembers, mean_std,
                      overall_accuracy, rrmse, spectral_angles)
from .model import (AbundanceMatrix, ContractError, EndmemberDictionary,
                    HyperspectralImage, ScalingFactors, SolverConfig,
                    VariabilityCoefficients, VariabilityDictionary, coherence_stats,
                    objective_value, reconstruct, residual, soft_threshold)
from .nnls import NNLSConvergenceError, solve_fclsu_pixel, solve_nnls, solve_scalar_nnls
from .su import ImageResult, unmix_image_almm, unmix_pixel_almm
from .svdl import SvdlResult, SvdlState, learn_svdl, svdl_diagnostics
from .synthetic import Scene, SceneSpec, add_noise_snr, generate_scene

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AbundanceMatrix", "BaselineResult", "ContractError", "EndmemberDictionary",
    "HyperspectralImage", "ImageResult", "NNLSConvergenceError", "PixelSolveError",
    "ReportRow", "ScalingFactors", "Scene", "SceneSpec", "SolverConfig", "SvdlResult",
    "SvdlState", "VariabilityCoefficients", "VariabilityDictionary", "add_noise_snr",
    "armse", "asam", "coherence_stats", "generate_scene", "learn_svdl",
    "match_endmembers", "mean_std", "objective_value", "overall_accuracy",
    "reconstruct", "residual", "rrmse", "scale_normalize", "soft_threshold",
    "solve_fclsu_pixel", "solve_nnls", "solve_scalar_nnls", "spectral_angles",
    "svdl_diagnostics", "unmix_clsu", "unmix_fclsu", "unmix_image_almm",
    "unmix_pixel_almm", "unmix_sclsu", "unmix_ssunsal", "unmix_sunsal",
]

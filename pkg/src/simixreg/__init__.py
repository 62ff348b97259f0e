"""Mixtures of regressions whose components vary with a single linear index.

Two estimators are provided: ``fit_msim_*`` lets every component's
proportion, mean and variance be a smooth function of ``alpha' x``;
``fit_mrsip`` keeps linear component means and lets only the proportions
vary with the index.
"""

from .bandwidth import BandwidthSelection, ConfigurationError, CvConfig, cv_score, select_bandwidth
from .bench import ESTIMATORS, evaluate_fit, mccv_evaluate, mse_alpha, rase, run_replications
from .core import (
    CurveSet,
    Dataset,
    DegenerateWindowError,
    Grid,
    IndexVector,
    InvalidArgument,
    NumericalRankError,
    Responsibilities,
    interp_curve,
    normalize_index,
    project,
)
from .io import DataFileError, load_csv
from .kernels import KernelSpec, kernel_weight, weighted_mean
from .linreg import MixLinRegFit, MrsipParams, OlsFit, fit_mixlinreg, mrsip_update_beta_sigma
from .mrsip import MrsipFit, fit_mrsip, mrsip_e_step, mrsip_update_pi
from .msim import EmControl, MsimFit, fit_msim_fib, fit_msim_fixed_index, fit_msim_os, msim_e_step, msim_m_step
from .simulate import TruthSpec, gen_example1, gen_example2
from .sir import SirConfig, sir_direction

__all__ = [
    "BandwidthSelection", "ConfigurationError", "CurveSet", "CvConfig", "DataFileError", "Dataset",
    "DegenerateWindowError", "ESTIMATORS", "EmControl", "Grid", "IndexVector", "InvalidArgument",
    "KernelSpec", "MixLinRegFit", "MrsipFit", "MrsipParams", "MsimFit", "NumericalRankError", "OlsFit",
    "Responsibilities", "SirConfig", "TruthSpec", "cv_score", "evaluate_fit", "fit_mixlinreg",
    "fit_mrsip", "fit_msim_fib", "fit_msim_fixed_index", "fit_msim_os", "gen_example1", "gen_example2",
    "interp_curve", "kernel_weight", "load_csv", "mccv_evaluate", "mrsip_e_step", "mrsip_update_beta_sigma",
    "mrsip_update_pi", "mse_alpha", "msim_e_step", "msim_m_step", "normalize_index", "project", "rase",
    "run_replications", "select_bandwidth", "sir_direction", "weighted_mean",
]

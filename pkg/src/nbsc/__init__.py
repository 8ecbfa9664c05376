"""Density evolution, thresholds and potential functions for nonbinary
(spatially-coupled) LDPC ensembles over GF(2^m) on the binary erasure channel."""

__version__ = "0.1.0"

from .subspaces import (CoeffTensors, GaussianBinomialTable, build_coeff_tensors,
                        enumerate_subspaces, gaussian_binomial, oracle_coeff)
from .de import (DeConfig, EnsembleParams, boxdot, boxtimes, bp_threshold_uncoupled,
                 channel_pmf, de_fixed_point, f_ccdf, g_ccdf)
from .coupled import (bp_threshold_coupled, build_coupling_matrix, coupled_fixed_point,
                      coupled_update)
from .potential import (construct_D, coupled_potential, delta_E, k_bound, potential_gradient,
                        potential_threshold, potential_U, scalar_F, scalar_G)

__all__ = [
    "CoeffTensors", "GaussianBinomialTable", "build_coeff_tensors", "enumerate_subspaces",
    "gaussian_binomial", "oracle_coeff", "DeConfig", "EnsembleParams", "boxdot", "boxtimes",
    "bp_threshold_uncoupled", "channel_pmf", "de_fixed_point", "f_ccdf", "g_ccdf",
    "bp_threshold_coupled", "build_coupling_matrix", "coupled_fixed_point", "coupled_update",
    "construct_D", "coupled_potential", "delta_E", "k_bound", "potential_gradient",
    "potential_threshold", "potential_U", "scalar_F", "scalar_G",
]

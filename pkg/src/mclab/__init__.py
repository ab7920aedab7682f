"""Matrix completion lab.

Singular value projection with leave-one-out diagnostics, the golfing dual
certificate for nuclear norm minimization, and executable lemma checks.
"""
from .errors import (ArgumentError, ConvergenceError, DegenerateIterateError, DimensionError,
                     DivergenceError, GenerationError, MclabError, NumericError)
from .groundtruth import GroundTruth, gen_ground_truth, measure_incoherence
from .matcore import RankRFactors, best_rank_r, norm, procrustes, sin_theta, top_r_eig_sym
from .sampling import GolfingPartition, ObservationMask, golfing_split, sample_mask
from .svp import SvpResult, SvpTrace, run_svp

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "ConvergenceError", "DegenerateIterateError", "DimensionError",
    "DivergenceError", "GenerationError", "MclabError", "NumericError",
    "GroundTruth", "gen_ground_truth", "measure_incoherence",
    "RankRFactors", "best_rank_r", "norm", "procrustes", "sin_theta", "top_r_eig_sym",
    "GolfingPartition", "ObservationMask", "golfing_split", "sample_mask",
    "SvpResult", "SvpTrace", "run_svp",
]

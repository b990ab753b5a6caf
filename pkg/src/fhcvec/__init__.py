"""Random frequently hypercyclic vectors for weighted backward shifts on l_p."""

from .core import LogMagnitude, SpaceConfig, SparseVec, combine, log_lp_norm, lp_dist, lp_norm
from .weights import SeriesVerdict, WeightFamily, bounded_check, fhc_constant, logW
from .shift_ops import PolynomialSpec, ShiftOperator, admissibility, apply_polynomial, apply_shift_power
from .adapted_basis import AdaptedBasis, build_adapted_basis, verify_basis
from .randvec import DistributionSpec, RandomVectorSpec
from .simulate import Experiment, hit_times, run_experiment, window_coverage

__version__ = "0.1.0"

__all__ = [
    "AdaptedBasis", "DistributionSpec", "Experiment", "LogMagnitude", "PolynomialSpec", "RandomVectorSpec",
    "SeriesVerdict", "ShiftOperator", "SpaceConfig", "SparseVec", "WeightFamily", "admissibility",
    "apply_polynomial", "apply_shift_power", "bounded_check", "build_adapted_basis", "combine",
    "fhc_constant", "hit_times", "logW", "log_lp_norm", "lp_dist", "lp_norm", "run_experiment",
    "verify_basis", "window_coverage",
]

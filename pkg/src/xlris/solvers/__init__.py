from .common import EstimateResult, SolverConfig, nmse, nmse_ratio, reconstruct, to_db
from .greedy import GreedyResult, bomp, omp, somp
from .methods import METHODS, Problem, run_method
from .sbl import SblResult, pcsbl_1d, pcsbl_2d, posterior

__all__ = [
    "EstimateResult",
    "GreedyResult",
    "METHODS",
    "Problem",
    "SblResult",
    "SolverConfig",
    "bomp",
    "nmse",
    "nmse_ratio",
    "omp",
    "pcsbl_1d",
    "pcsbl_2d",
    "posterior",
    "reconstruct",
    "run_method",
    "somp",
    "to_db",
]

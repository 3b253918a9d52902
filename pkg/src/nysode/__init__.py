"""Low-rank kernel collocation solvers for ODEs, with a benchmark harness."""

from .kernel import RbfKernel
from .nystrom import (
    Equidistant,
    LeverageScore,
    NystromFeatureMap,
    Random,
    build_feature_map,
    select_landmarks,
)
from .problems import BenchmarkProblem, catalog, get_problem

__all__ = [
    "RbfKernel",
    "Equidistant",
    "Random",
    "LeverageScore",
    "NystromFeatureMap",
    "build_feature_map",
    "select_landmarks",
    "BenchmarkProblem",
    "catalog",
    "get_problem",
]

__version__ = "0.1.0"

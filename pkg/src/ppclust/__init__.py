"""Point-process limits of stationary triangular arrays: simulation, estimators and exact oracles."""

from .estimate import Estimate
from .models import Family, ModelSpec, ParameterError, Tail, generate_paths, generate_sequence
from .pointproc import ClusterEvent, ObservableSet, PointPattern, TestFunction
from .thresholds import ArrayScheme, make_scheme, threshold_analytic

__version__ = "0.1.0"

__all__ = [
    "ArrayScheme",
    "ClusterEvent",
    "Estimate",
    "Family",
    "ModelSpec",
    "ObservableSet",
    "ParameterError",
    "PointPattern",
    "Tail",
    "TestFunction",
    "generate_paths",
    "generate_sequence",
    "make_scheme",
    "threshold_analytic",
    "__version__",
]

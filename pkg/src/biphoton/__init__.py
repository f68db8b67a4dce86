"""Displacement estimation with position-correlated photon pairs.

Closed-form and quadrature Fisher information for continuous, split and
N-pixel coincidence detection, estimators and their variances, and seeded
Monte Carlo studies of how the resolvable displacement scales with the
number of detected pairs.
"""

__version__ = "0.1.0"

from .errors import (
    ApproximationWarning,
    BiphotonError,
    DeltaLimit,
    DomainError,
    EmptyInput,
    NonConvergence,
    ValidationError,
    WeightError,
)
from .model import BiphotonModel, PhotonPair, make_stream, sample_pairs
from .detection import (
    OutcomeDistribution,
    PixelDetector,
    pixel_probabilities,
    split_probabilities,
)
from .inference import (
    fisher_continuous,
    fisher_discrete,
    fisher_marginal,
    fisher_split,
    qfi_numeric,
)

__all__ = [
    "__version__",
    "ApproximationWarning",
    "BiphotonError",
    "DeltaLimit",
    "DomainError",
    "EmptyInput",
    "NonConvergence",
    "ValidationError",
    "WeightError",
    "BiphotonModel",
    "PhotonPair",
    "make_stream",
    "sample_pairs",
    "OutcomeDistribution",
    "PixelDetector",
    "pixel_probabilities",
    "split_probabilities",
    "fisher_continuous",
    "fisher_discrete",
    "fisher_marginal",
    "fisher_split",
    "qfi_numeric",
]

"""Learning Hamiltonians from snapshot pairs with symplectic training losses."""

__version__ = "0.1.0"

from .schemes import Scheme, scheme_point
from .mlp import MlpParams, init_mlp
from .training import TrainConfig, TrainReport, train
from .correction import LearnedHamiltonian

__all__ = [
    "Scheme",
    "scheme_point",
    "MlpParams",
    "init_mlp",
    "TrainConfig",
    "TrainReport",
    "train",
    "LearnedHamiltonian",
]

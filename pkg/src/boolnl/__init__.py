"""Boolean function nonlinearity: exact transforms and small neural predictors."""

from .boolfn import TruthTable, TruthTableError, degree, mobius_transform, weight
from .transform import fwt, hadamard, nonlinearity, walsh_naive

__version__ = "0.1.0"

__all__ = [
    "TruthTable", "TruthTableError", "degree", "mobius_transform", "weight",
    "fwt", "hadamard", "nonlinearity", "walsh_naive", "__version__",
]

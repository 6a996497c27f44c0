"""Dense linear algebra, block density matrices and master-equation propagators."""

from .blocks import BlockDensityMatrix, BlockLayout
from .integrate import (
    IntegrationError,
    OdeControl,
    Solution,
    StepSizeUnderflow,
    integrate,
    propagate,
    propagate_linear,
)
from .lindblad import Channel, effective_hamiltonian, lindblad_rhs, lindblad_superoperator
from .linalg import (
    EigenConvergenceError,
    NotHermitianError,
    hermitian_eigensystem,
    hermiticity_defect,
    is_hermitian,
)

__all__ = [
    "BlockDensityMatrix",
    "BlockLayout",
    "Channel",
    "EigenConvergenceError",
    "IntegrationError",
    "NotHermitianError",
    "OdeControl",
    "Solution",
    "StepSizeUnderflow",
    "hermitian_eigensystem",
    "hermiticity_defect",
    "integrate",
    "is_hermitian",
    "effective_hamiltonian",
    "lindblad_rhs",
    "lindblad_superoperator",
    "propagate",
    "propagate_linear",
]

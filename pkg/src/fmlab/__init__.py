"""fmlab: Monte Carlo laboratory for strong-disorder localisation experiments
on random block and alloy lattice operators.

Hot kernels (eigensolver, complex LU, Jacobi norms) run under numba by
default; set FMLAB_NUMBA=0 for the pure-numpy fallback path.
"""

from .errors import ConfigurationError, DegenerateFitError, NumericalError, ResampleSignal
from .kernels import backend

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DegenerateFitError",
    "NumericalError",
    "ResampleSignal",
    "backend",
    "__version__",
]

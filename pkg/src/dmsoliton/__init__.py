"""Energy-minimizing solitons of the diffraction-managed discrete NLS lattice."""

__version__ = "0.1.0"

from dmsoliton.backend import BACKEND
from dmsoliton.energy import Problem
from dmsoliton.field import BoxPolicy, LatticeField
from dmsoliton.minimizer import SolveConfig, SolveResult, minimize
from dmsoliton.profile import DiffractionMeasure, NonlinearitySpec, PiecewiseProfile

__all__ = [
    "BACKEND", "BoxPolicy", "DiffractionMeasure", "LatticeField",
    "NonlinearitySpec", "PiecewiseProfile", "Problem", "SolveConfig",
    "SolveResult", "minimize", "__version__",
]

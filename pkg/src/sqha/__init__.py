"""Stochastic quantum hydrodynamics in one dimension: quantum potential,
correlated density noise, forward/backward asymmetry and the large-scale
classical limit."""

__version__ = "0.1.0"

from .errors import SQHAError  # noqa: F401
from .potentials import PotentialSpec  # noqa: F401
from .qpotential import QuantumParams  # noqa: F401
from .spatial import DensityField, Grid1D, ScalarField, WaveField  # noqa: F401

"""Spatial-temporal variational quantum circuit toolkit.

Builds, trains, compiles, and searches block-encoded variational quantum
circuits on a classical state-vector simulator with optional trajectory noise.
"""

from .sim import Circuit, GateOp, NoiseModel, StateVector

__all__ = ["Circuit", "GateOp", "NoiseModel", "StateVector"]
__version__ = "0.1.0"

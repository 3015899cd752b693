"""Chiral chaos in a tip-tuned two-resonator optomechanical device."""
from .model import (DivergenceError, DriveSpec, Port, StateVector, SystemParams, jacobian,
                    rhs)

__version__ = "0.1.0"

__all__ = ["DivergenceError", "DriveSpec", "Port", "StateVector", "SystemParams",
           "jacobian", "rhs", "__version__"]

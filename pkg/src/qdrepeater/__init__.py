"""Quantum-dot spin-photon repeater simulation and two-qubit tomography."""
from .states import BellKind, DensityOperator, PureState

__all__ = ["BellKind", "DensityOperator", "PureState"]
__version__ = "0.1.0"

"""Numerics for classical Hamiltonian systems on tori.

Computes averaged systems along resonances, minimizing periodic orbits
and annuli, homoclinic orbits by discrete action minimization, and the
horseshoes and transition matrices near a hyperbolic fixed point, with
every computed object checked against independent brute-force oracles.
"""

from .systems import (
    ClassicalSystem,
    FourierPotential,
    ParametricPotential,
    PhaseState,
    QuadraticForm,
    Trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "ClassicalSystem",
    "FourierPotential",
    "ParametricPotential",
    "PhaseState",
    "QuadraticForm",
    "Trajectory",
]

"""Eigenphases of semiclassical scattering matrices for compactly supported potentials.

The package computes the phase shifts e^{i beta} of S_h for smooth bump
potentials, both from the radial equation (central potentials) and from a
dense two-dimensional Lippmann-Schwinger discretization (general potentials),
together with the classical scattering data (sojourn map, sojourn time,
interaction-region volume) that governs their distribution as h -> 0.
"""

from eigenphase.potential import (
    Bump,
    EnergyProblem,
    Potential,
    PotentialSpec,
    SquareWell,
    construct_potential,
    rescale_to_unit_energy,
)

__version__ = "0.1.0"

__all__ = [
    "Bump",
    "EnergyProblem",
    "Potential",
    "PotentialSpec",
    "SquareWell",
    "construct_potential",
    "rescale_to_unit_energy",
    "__version__",
]

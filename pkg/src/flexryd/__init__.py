"""Flexible Rydberg aggregates: excitons, Born-Oppenheimer surfaces and
fewest-switches surface-hopping dynamics.

A flexible Rydberg aggregate is a set of highly excited atoms sharing a
single p excitation through resonant dipole-dipole interaction, with the
atomic motion dynamically coupled to the electronic state.  This package
builds the electronic Hamiltonians (isotropic, anisotropic, magnetically
block-diagonalized), diagonalizes them into excitons, propagates surface
hopping trajectory ensembles and accumulates the observables (densities,
populations, purity, entanglement).
"""

__version__ = "0.1.0"

from . import angular, atomic_data, geometry, hamiltonian, excitons
from . import fssh, observables, analysis, runner_io

__all__ = [
    "angular",
    "atomic_data",
    "geometry",
    "hamiltonian",
    "excitons",
    "fssh",
    "observables",
    "analysis",
    "runner_io",
]

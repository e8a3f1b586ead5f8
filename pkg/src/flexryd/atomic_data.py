"""Species constants for Rydberg lithium and the unit-conversion table.

Everything internal runs in Hartree atomic units (hbar = e = m_e = 1,
4*pi*eps0 = 1); scenario-facing quantities use micrometers, microseconds,
MHz and Gauss.  The conversion factors live here so every module shares a
single table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

__all__ = [
    "BOHR_PER_UM",
    "HARTREE_MHZ",
    "AU_TIME_S",
    "AU_TIME_PER_US",
    "AU_VELOCITY_M_PER_S",
    "MU_B_MHZ_PER_GAUSS",
    "SpeciesConstants",
    "LI7",
    "rydberg_energy",
    "radial_dipole",
    "scaled_mu",
    "lifetime",
    "aggregate_lifetime",
    "blockade_radius",
    "aggregate_decay_rate",
]

# unit table (CODATA)
BOHR_PER_UM = 18897.259886          # Bohr radii per micrometer
HARTREE_MHZ = 6.579683920502e9      # MHz per Hartree
AU_TIME_S = 2.4188843266e-17        # seconds per atomic time unit
AU_TIME_PER_US = 1e-6 / AU_TIME_S   # atomic time units per microsecond
AU_VELOCITY_M_PER_S = 2.18769126364e6  # m/s per atomic velocity unit
MU_B_MHZ_PER_GAUSS = 1.4            # Bohr magneton, linear Zeeman shift


@dataclass(frozen=True)
class SpeciesConstants:
    """Constants of one atomic species in the aggregate model.

    ``quantum_defects`` maps (l, j) to the defect expansion pair
    (delta0, delta2); ``radial_dipole_table`` maps the principal quantum
    number to the s->p radial dipole matrix element in atomic units.
    Lifetime prefactors are in nanoseconds, with the cubic effective
    quantum number scaling tau = tau0 * (nu - delta0)**3.
    """

    name: str = "7Li"
    mass: float = 11000.0                      # atomic units (electron masses)
    rydberg_constant_mhz: float = 3.289584728e9
    quantum_defects: dict = field(default_factory=lambda: {
        (0, 0.5): (0.3995101, 0.0290),
        (1, 0.5): (0.0471780, -0.024),
        (1, 1.5): (0.0471665, -0.024),
    })
    radial_dipole_table: dict = field(default_factory=lambda: {
        35: 1579.0,
        44: 2498.0,
        60: 4649.0,
        80: 8265.0,
    })
    tau0_s_ns: float = 0.8431
    tau0_p_ns: float = 2.8807
    lifetime_exponent: float = 3.0

    def with_overrides(self, **kwargs) -> "SpeciesConstants":
        """Copy with selected fields replaced (scenario-file overrides)."""
        return replace(self, **kwargs)


LI7 = SpeciesConstants()


def _defect(species: SpeciesConstants, nu: float, l: int, j: float) -> float:
    try:
        d0, d2 = species.quantum_defects[(l, j)]
    except KeyError:
        raise KeyError(f"no quantum defect tabulated for (l, j) = ({l}, {j})")
    return d0 + d2 / (nu - d0) ** 2


def rydberg_energy(nu: int, l: int, j: float, species: SpeciesConstants = LI7) -> float:
    """Bound-state energy -Ry/(nu - delta)**2 in MHz (negative).

    The quantum defect is expanded through the second-order term.
    """
    if nu < 2:
        raise ValueError(f"principal quantum number {nu} < 2")
    delta = _defect(species, nu, l, j)
    return -species.rydberg_constant_mhz / (nu - delta) ** 2


def radial_dipole(nu: int, species: SpeciesConstants = LI7) -> float:
    """Tabulated s->p radial dipole matrix element (atomic units).

    No interpolation: an untabulated nu raises KeyError rather than
    silently producing wrong interaction strengths.
    """
    try:
        return species.radial_dipole_table[int(nu)]
    except KeyError:
        raise KeyError(
            f"nu={nu} not in the radial dipole table "
            f"{sorted(species.radial_dipole_table)}; no interpolation is done"
        )


def scaled_mu(nu: int, species: SpeciesConstants = LI7) -> float:
    """Scaled transition dipole mu = d_radial / sqrt(6) (atomic units).

    This is the amplitude entering the isotropic binary interaction
    V(r) = -mu**2 / r**3.
    """
    return radial_dipole(nu, species) / math.sqrt(6.0)


def lifetime(nu: int, l: int, species: SpeciesConstants = LI7) -> float:
    """Zero-temperature radiative lifetime in microseconds.

    Parameterized as tau0_l * (nu - delta0_l)**3 with the l-dependent
    prefactor; blackbody corrections are negligible at microkelvin
    temperatures and are not applied.
    """
    if l == 0:
        tau0, d0 = species.tau0_s_ns, species.quantum_defects[(0, 0.5)][0]
    elif l == 1:
        tau0, d0 = species.tau0_p_ns, species.quantum_defects[(1, 1.5)][0]
    else:
        raise ValueError("lifetime parameterization covers l = 0, 1 only")
    return tau0 * 1e-3 * (nu - d0) ** species.lifetime_exponent


def aggregate_lifetime(nu: int, l: int, n_atoms: int, species: SpeciesConstants = LI7) -> float:
    """Lifetime of an N-atom aggregate: single-atom lifetime divided by N (us)."""
    if n_atoms < 1:
        raise ValueError("need at least one atom")
    return lifetime(nu, l, species) / n_atoms


def blockade_radius(c6_au: float, omega_rad_per_s: float) -> float:
    """Dipole blockade radius (|C6| / (hbar Omega))**(1/6) in micrometers.

    ``c6_au`` is the dispersion coefficient in atomic units, ``omega``
    the collective Rabi frequency as an angular frequency.
    """
    if omega_rad_per_s <= 0.0:
        raise ValueError("Rabi frequency must be positive")
    omega_au = omega_rad_per_s * AU_TIME_S  # hbar*Omega in Hartree
    return (abs(c6_au) / omega_au) ** (1.0 / 6.0) / BOHR_PER_UM


def aggregate_decay_rate(n_fast: int, v: float, rho: float, sigma_cross: float,
                         gamma0: float, n_atoms: int) -> tuple[float, float]:
    """Total decay rate of an aggregate embedded in a background gas.

    Gamma_tot = n_fast * Gamma_coll + N * Gamma0 with the collisional rate
    Gamma_coll = rho * v * sigma_cross for the ``n_fast`` fastest atoms.
    All inputs SI: v in m/s, rho in 1/m^3, sigma_cross in m^2, gamma0 in
    1/s.  Returns (Gamma_tot in 1/s, lifetime in seconds).
    """
    if min(n_fast, v, rho, sigma_cross, gamma0, n_atoms) < 0:
        raise ValueError("all inputs must be nonnegative")
    gamma_coll = rho * v * sigma_cross
    gamma_tot = n_fast * gamma_coll + n_atoms * gamma0
    if gamma_tot == 0.0:
        raise ValueError("all decay channels are zero: lifetime is infinite")
    return gamma_tot, 1.0 / gamma_tot

"""Closed-form appendix analytics and small-model oracles: trivial-crossing
gap laws and their Monte Carlo tail distributions, trimer
conical-intersection gap minima, the off-resonant two-level model, the
detuned three-level Rabi problem and microwave exciton excitation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import Stream

__all__ = [
    "trivial_gap",
    "trivial_gap_tail",
    "GapScan",
    "trimer_hamiltonian",
    "trimer_gap_scan",
    "trimer_gap_minimum",
    "two_level_offresonant",
    "rabi_three_level",
    "microwave_population",
]


def trivial_gap(r13: float, r14: float, r23: float, r24: float, r12: float) -> float:
    """Relative energy gap of the trivial avoided crossing between two
    dimers with matched internal spacing:
    |(r13^-3 - r14^-3) - (r23^-3 - r24^-3)| / r12^-3.

    Vanishes for mirror-symmetric cross distances (r13 = r14,
    r23 = r24), where the crossing is exact.  Dimensionless and invariant
    under a global rescaling of all five distances.
    """
    if min(r13, r14, r23, r24, r12) <= 0.0:
        raise ValueError("distances must be positive")
    w = (r13 ** -3 - r14 ** -3) - (r23 ** -3 - r24 ** -3)
    return abs(w) * r12 ** 3


def trivial_gap_tail(a1: float, a2: float, d: float, sigma0: float,
                     n_samples: int = 10 ** 5, seed: int = 2024,
                     levels=(0.08, 0.022)):
    """Monte Carlo tail probabilities P(relative gap < level) for the
    four-atom double-dimer geometry.

    The vertical pair is drawn from its initial Gaussians, and the
    horizontal pair is stretched symmetrically about its mean center so
    both dimers have equal internal spacing -- the configuration at which
    the trivial crossing happens.  Returns (levels, probabilities, gaps).
    """
    stream = Stream(seed, 0)
    key, base = stream.key, 0
    from .rng import normal_pair
    y3 = np.empty(n_samples)
    y4 = np.empty(n_samples)
    for i in range(n_samples):
        z1, z2 = normal_pair(key, np.uint64(base + 2 * i))
        y3[i] = -a2 / 2.0 + sigma0 * z1
        y4[i] = a2 / 2.0 + sigma0 * z2
    xoff = a1 + d
    r34 = np.abs(y4 - y3)
    x1 = -(r34 - a1) / 2.0
    x2 = a1 + (r34 - a1) / 2.0

    def invcube(dx, dy):
        return (dx * dx + dy * dy) ** -1.5

    w = np.abs((invcube(xoff - x1, y3) - invcube(xoff - x1, y4))
               - (invcube(xoff - x2, y3) - invcube(xoff - x2, y4)))
    gaps = w * r34 ** 3
    probs = np.array([float(np.mean(gaps < lv)) for lv in levels])
    return np.asarray(levels, dtype=float), probs, gaps


@dataclass(frozen=True)
class GapScan:
    """Sweep of a trimer configuration: coordinate values, the full
    sorted spectrum per point and the gap between two designated
    surfaces."""

    coords: np.ndarray       # sweep coordinate values
    spectra: np.ndarray      # (n_points, 3), ascending per point
    gap: np.ndarray          # (n_points,)
    surfaces: tuple          # the two (ascending) surface indices

    def minimum(self):
        i = int(np.argmin(self.gap))
        return float(self.coords[i]), float(self.gap[i])


def trimer_hamiltonian(dx: float, b: float, a2: float, mu: float) -> np.ndarray:
    """Isotropic trimer near the conical-intersection configuration.

    Atom 2 sits at the origin; atoms 3 and 4 at horizontal distance
    sqrt(3) a2 / 2 + dx with vertical positions -b a2 / 2 and
    (1 - b/2) a2.  b = 1, dx = 0 is the equilateral (intersection)
    configuration.
    """
    pos = np.array([
        [0.0, 0.0],
        [math.sqrt(3.0) * a2 / 2.0 + dx, -b * a2 / 2.0],
        [math.sqrt(3.0) * a2 / 2.0 + dx, (1.0 - b / 2.0) * a2],
    ])
    H = np.zeros((3, 3))
    for i in range(3):
        for j in range(i + 1, 3):
            r = float(np.linalg.norm(pos[i] - pos[j]))
            H[i, j] = H[j, i] = -mu * mu / r ** 3
    return H


def trimer_gap_scan(b: float, a2: float, mu: float,
                    dx_max: float | None = None, n_points: int = 2001) -> GapScan:
    """Numerical sweep of the gap between the two most energetic trimer
    surfaces over the horizontal displacement from the intersection
    configuration."""
    if dx_max is None:
        dx_max = 0.35 * a2
    coords = np.linspace(0.0, dx_max, n_points)
    spectra = np.empty((n_points, 3))
    for i, dx in enumerate(coords):
        spectra[i] = np.linalg.eigvalsh(trimer_hamiltonian(dx, b, a2, mu))
    gap = spectra[:, 2] - spectra[:, 1]
    return GapScan(coords=coords, spectra=spectra, gap=gap, surfaces=(1, 2))


def trimer_gap_minimum(b: float, a2: float, mu: float):
    """Leading-order closed forms for the gap minimum of an asymmetric
    trimer: dx_min = 1.12 (1-b)^2 a2 and
    dE_min = sqrt(3) mu^2 a2^-3 (1-b).

    Exact at b -> 1 (an exact intersection); the quadratic-order location
    coefficient deviates from direct diagonalization by about 10 percent
    even asymptotically, see the gap-scan validation tests.
    """
    if not 0.0 < b <= 1.0:
        raise ValueError("asymmetry parameter must be in (0, 1]")
    dx_min = 1.12 * (1.0 - b) ** 2 * a2
    de_min = math.sqrt(3.0) * mu * mu / a2 ** 3 * (1.0 - b)
    return dx_min, de_min


def two_level_offresonant(v: float, delta: float):
    """Eigenenergies of [[0, V], [V, Delta]] with regime expansions.

    Returns a dict with the exact pair (e_minus, e_plus), the
    large-detuning forms (-V^2/Delta, Delta + V^2/Delta), the
    small-detuning forms (Delta/2 -/+ |V|) and the regime flags
    ``vdw_regime`` (|V| << |Delta|: effective interaction V^2/Delta,
    scaling as r^-6 for a dipolar V) and ``resonant_regime``.
    """
    disc = math.sqrt(4.0 * v * v + delta * delta)
    e_plus = 0.5 * (delta + disc)
    e_minus = 0.5 * (delta - disc)
    out = dict(e_minus=e_minus, e_plus=e_plus)
    if delta != 0.0:
        out["e_minus_vdw"] = -v * v / delta
        out["e_plus_vdw"] = delta + v * v / delta
        out["vdw_regime"] = abs(v) < 0.2 * abs(delta)
    else:
        out["vdw_regime"] = False
    out["e_minus_resonant"] = delta / 2.0 - abs(v)
    out["e_plus_resonant"] = delta / 2.0 + abs(v)
    out["resonant_regime"] = abs(delta) < 0.2 * abs(v)
    return out


def rabi_three_level(v: float, v13: float, v23: float, delta: float,
                     t: np.ndarray):
    """Population of state |1> in the resonant pair coupled to one
    detuned state: the reduced-model form cos^2(Omega_t t / 2) with
    Omega_t = 2 (V + V13 V23 / Delta), and the exact 3x3 propagation for
    comparison.

    Complete transfer happens only when the neglected O(w^2) admixture,
    w = (V13^2 - V23^2) / (4 Delta V), is small.
    """
    if delta == 0.0:
        raise ValueError("resonant third state is outside this expansion")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    omega = 2.0 * (v + v13 * v23 / delta)
    approx = np.cos(omega * t / 2.0) ** 2
    H = np.array([[0.0, v, v13], [v, 0.0, v23], [v13, v23, delta]])
    w, U = np.linalg.eigh(H)
    weight = np.abs(U[0, :]) ** 2
    exact = np.abs(np.exp(-1j * np.outer(t, w)) @ weight) ** 2
    return approx, exact


def microwave_population(omega: float, delta: float, t):
    """Population transferred into the symmetric dimer exciton by a
    linearly polarized microwave pulse:
    P1(t) = [2 Omega^2 / (Delta^2 + 2 Omega^2)] sin^2(sqrt(Delta^2 + 2 Omega^2) t / 2).

    ``omega`` is the single-atom Rabi frequency and ``delta`` the
    detuning from the exciton transition; only resonant driving reaches
    full population.
    """
    t = np.asarray(t, dtype=float)
    om2 = delta * delta + 2.0 * omega * omega
    if om2 == 0.0:
        return np.zeros_like(t)
    pref = 2.0 * omega * omega / om2
    return pref * np.sin(np.sqrt(om2) * t / 2.0) ** 2

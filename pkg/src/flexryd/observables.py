"""Ensemble accumulators: spatial densities on grids, populations and
trajectory fractions, electronic density matrix, purity, concurrence and
entanglement of formation, energy densities and detector readouts.

Accumulators support associative merging, so per-worker partial sums can
be combined in any fixed order.  Density values are stored as raw visit
counts and normalized only at read-out: dividing by
(number of trajectories * atoms per group * grid spacing) makes the total
density integrate to one per axis group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fssh import TrajectoryRecord

__all__ = [
    "SpatialGrid",
    "DensityGroup",
    "EnergyGrid",
    "EnsembleAccumulators",
    "purity_of",
    "concurrence_eof",
    "entanglement_of_formation",
]


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform 1D grid: bin k covers origin + (k +/- 1/2) spacing."""

    origin: float
    spacing: float
    bins: int

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        if self.bins < 2:
            raise ValueError("need at least two bins")

    def centers(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.bins)

    def index(self, x: float) -> int:
        """Bin index, or -1 below / ``bins`` above the covered range."""
        k = int(math.floor((x - self.origin) / self.spacing + 0.5))
        if k < 0:
            return -1
        if k >= self.bins:
            return self.bins
        return k


@dataclass(frozen=True)
class DensityGroup:
    """A named set of atoms histogrammed along one axis."""

    name: str
    atoms: tuple       # 0-based atom indices
    axis: int          # 0, 1, 2 for x, y, z
    grid: SpatialGrid


@dataclass(frozen=True)
class EnergyGrid:
    origin: float      # MHz
    spacing: float
    bins: int


def entanglement_of_formation(concurrence: float) -> float:
    """E = h(1/2 + sqrt(1 - C^2)/2) with the binary entropy h; h(1) = 0.

    Monotonically increasing in the concurrence, 0 at C = 0 and 1 at
    C = 1.
    """
    c = min(max(concurrence, 0.0), 1.0)
    x = 0.5 + 0.5 * math.sqrt(max(0.0, 1.0 - c * c))
    if x >= 1.0 or x <= 0.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def purity_of(sigma: np.ndarray) -> float:
    """tr(sigma^2) of a density matrix."""
    return float(np.real(np.trace(sigma @ sigma)))


def concurrence_eof(sigma: np.ndarray, a: int, b: int):
    """Concurrence C = 2 |sigma_ab| between the single-excitation
    amplitudes on atoms a and b, and the entanglement of formation it
    implies for the two-qubit reduced state."""
    c = 2.0 * abs(sigma[a, b])
    return c, entanglement_of_formation(c)


class EnsembleAccumulators:
    """Running sums over trajectory records at common snapshot times.

    ``partial_surfaces`` lists the (0-based, ascending-energy) surface
    indices for which per-surface partial densities are kept; total and
    excitation-weighted densities are always accumulated.
    """

    def __init__(self, times: np.ndarray, n_basis: int, n_atoms: int,
                 groups: tuple = (), partial_surfaces: tuple = (),
                 energy_grid: EnergyGrid | None = None,
                 pairs: tuple = (), detectors: int = 0,
                 atom_of_basis: np.ndarray | None = None):
        S = len(times)
        self.times = np.asarray(times, dtype=float)
        self.n_basis = n_basis
        self.n_atoms = n_atoms
        self.groups = tuple(groups)
        self.partial_surfaces = tuple(partial_surfaces)
        self.energy_grid = energy_grid
        self.pairs = tuple(pairs)
        self.n_traj = 0
        self.n_aborted = 0
        # atom_of_basis maps a basis index to its atom (m-summed reduction
        # for the anisotropic model)
        if atom_of_basis is None:
            atom_of_basis = np.arange(n_basis) % n_atoms if n_basis == n_atoms \
                else np.repeat(np.arange(n_atoms), n_basis // n_atoms)
        self.atom_of_basis = np.asarray(atom_of_basis, dtype=np.int64)

        self.sigma_sum = np.zeros((S, n_basis, n_basis), dtype=complex)
        self.sigma_atom_sum = np.zeros((S, n_atoms, n_atoms), dtype=complex)
        self.adiab_sum = np.zeros((S, n_basis))
        self.surface_counts = np.zeros((S, n_basis), dtype=np.int64)
        self.hist_total = {g.name: np.zeros((S, g.grid.bins)) for g in groups}
        self.hist_exc = {g.name: np.zeros((S, g.grid.bins)) for g in groups}
        self.hist_partial = {
            g.name: {s: np.zeros((S, g.grid.bins)) for s in partial_surfaces}
            for g in groups}
        self.overflow = {g.name: np.zeros(2) for g in groups}
        if energy_grid is not None:
            self.hist_u = np.zeros((S, energy_grid.bins))
            self.hist_g = np.zeros((S, energy_grid.bins))
            self.overflow_energy = np.zeros(2)
        else:
            self.hist_u = self.hist_g = None
            self.overflow_energy = np.zeros(2)
        self.det_sigma = np.zeros((detectors, n_atoms, n_atoms), dtype=complex)
        self.det_sigma_active = np.zeros((detectors, n_atoms, n_atoms),
                                         dtype=complex)
        self.det_crossings = np.zeros(detectors, dtype=np.int64)
        self.hop_counts = dict(accepted=0, frustrated=0, trivial=0,
                               skipped=0, singular=0)
        self.max_energy_err = 0.0
        self.max_hop_energy_err = 0.0
        self.max_norm_err = 0.0

    # -- accumulation ---------------------------------------------------

    def _atom_amplitudes(self, c_rows: np.ndarray) -> np.ndarray:
        """Coherent per-atom amplitudes: the m components of one atom are
        summed before forming binary products (relevant for the
        anisotropic basis; identity for the others)."""
        if self.n_basis == self.n_atoms:
            return c_rows
        shape = c_rows.shape[:-1] + (self.n_atoms, self.n_basis // self.n_atoms)
        return c_rows.reshape(shape).sum(axis=-1)

    def accumulate(self, record: TrajectoryRecord, positions_of=None):
        """Fold one trajectory record into the sums.

        ``positions_of`` maps a (S, D) reduced-coordinate array to
        (S, N, 3) cartesian positions; pass the scenario's DOF map
        method.  Aborted trajectories count toward ``n_aborted`` only.
        """
        if not record.ok:
            self.n_aborted += 1
            return self
        self.n_traj += 1
        S = len(self.times)
        s_idx = np.arange(S)
        c = record.c
        self.sigma_sum += np.einsum("si,sj->sij", c, c.conj())
        ca = self._atom_amplitudes(c)
        self.sigma_atom_sum += np.einsum("si,sj->sij", ca, ca.conj())
        self.adiab_sum += record.adiab_pops
        np.add.at(self.surface_counts, (s_idx, record.zeta), 1)
        if self.groups and positions_of is not None:
            pos = positions_of(record.q)   # (S, N, 3) in Bohr
            for g in self.groups:
                atoms = list(g.atoms)
                x = pos[:, atoms, g.axis]
                k = np.floor((x - g.grid.origin) / g.grid.spacing + 0.5).astype(int)
                under = k < 0
                over = k >= g.grid.bins
                self.overflow[g.name][0] += int(under.sum())
                self.overflow[g.name][1] += int(over.sum())
                ok = ~(under | over)
                ss = np.broadcast_to(s_idx[:, None], k.shape)[ok]
                kk = k[ok]
                np.add.at(self.hist_total[g.name], (ss, kk), 1.0)
                np.add.at(self.hist_exc[g.name], (ss, kk),
                          record.exc_weights[:, atoms][ok])
                for surf, hp in self.hist_partial[g.name].items():
                    sel = ok & (record.zeta[:, None] == surf)
                    np.add.at(hp, (np.broadcast_to(s_idx[:, None], k.shape)[sel],
                                   k[sel]), 1.0)
        if self.hist_u is not None:
            self._bin_energies(self.hist_u, s_idx, record.u_zeta[:, None])
            self._bin_energies(self.hist_g, s_idx, record.spectrum)
        for k in range(len(self.det_crossings)):
            if record.det_hit[k]:
                self.det_crossings[k] += 1
                cat = self._atom_amplitudes(record.det_c[k])
                self.det_sigma[k] += np.outer(cat, cat.conj())
                pat = self._atom_amplitudes(record.det_phi[k])
                self.det_sigma_active[k] += np.outer(pat, pat.conj())
        for code, key in ((0, "accepted"), (1, "frustrated"), (2, "trivial"),
                          (3, "skipped")):
            self.hop_counts[key] += int(np.sum(record.hop_log[:, 3] == code))
        self.hop_counts["singular"] += record.stats.get("n_singular", 0)
        self.max_energy_err = max(self.max_energy_err,
                                  record.stats.get("max_energy_err", 0.0))
        self.max_hop_energy_err = max(self.max_hop_energy_err,
                                      record.stats.get("max_hop_energy_err", 0.0))
        self.max_norm_err = max(self.max_norm_err,
                                record.stats.get("max_norm_err", 0.0))
        return self

    def _bin_energies(self, hist, s_idx, values_au):
        from .atomic_data import HARTREE_MHZ
        eg = self.energy_grid
        mhz = values_au * HARTREE_MHZ
        k = np.floor((mhz - eg.origin) / eg.spacing + 0.5).astype(int)
        under = k < 0
        over = k >= eg.bins
        self.overflow_energy[0] += int(under.sum())
        self.overflow_energy[1] += int(over.sum())
        ok = ~(under | over)
        ss = np.broadcast_to(s_idx[:, None], k.shape)[ok]
        np.add.at(hist, (ss, k[ok]), 1.0)

    def merge(self, other: "EnsembleAccumulators") -> "EnsembleAccumulators":
        """In-place associative merge of two accumulators."""
        if not np.array_equal(self.times, other.times):
            raise ValueError("accumulators cover different snapshot times")
        self.n_traj += other.n_traj
        self.n_aborted += other.n_aborted
        self.sigma_sum += other.sigma_sum
        self.sigma_atom_sum += other.sigma_atom_sum
        self.adiab_sum += other.adiab_sum
        self.surface_counts += other.surface_counts
        for name in self.hist_total:
            self.hist_total[name] += other.hist_total[name]
            self.hist_exc[name] += other.hist_exc[name]
            for s in self.hist_partial[name]:
                self.hist_partial[name][s] += other.hist_partial[name][s]
            self.overflow[name] += other.overflow[name]
        if self.hist_u is not None:
            self.hist_u += other.hist_u
            self.hist_g += other.hist_g
        self.overflow_energy += other.overflow_energy
        self.det_sigma += other.det_sigma
        self.det_sigma_active += other.det_sigma_active
        self.det_crossings += other.det_crossings
        for key in self.hop_counts:
            self.hop_counts[key] += other.hop_counts[key]
        self.max_energy_err = max(self.max_energy_err, other.max_energy_err)
        self.max_hop_energy_err = max(self.max_hop_energy_err,
                                      other.max_hop_energy_err)
        self.max_norm_err = max(self.max_norm_err, other.max_norm_err)
        return self

    # -- read-out -------------------------------------------------------

    def sigma(self, s: int) -> np.ndarray:
        """Ensemble-averaged diabatic density matrix at snapshot s."""
        return self.sigma_sum[s] / max(self.n_traj, 1)

    def sigma_atoms(self, s: int) -> np.ndarray:
        """Per-atom (m-summed) averaged density matrix at snapshot s."""
        return self.sigma_atom_sum[s] / max(self.n_traj, 1)

    def populations(self) -> np.ndarray:
        """Adiabatic populations per surface and snapshot, (S, n)."""
        return self.adiab_sum / max(self.n_traj, 1)

    def fractions(self) -> np.ndarray:
        """Fraction of trajectories per active surface, (S, n)."""
        return self.surface_counts / max(self.n_traj, 1)

    def purity(self) -> np.ndarray:
        """tr(sigma^2) of the averaged diabatic density matrix, (S,)."""
        out = np.empty(len(self.times))
        for s in range(len(self.times)):
            out[s] = purity_of(self.sigma(s))
        return out

    def concurrence(self, a: int, b: int):
        """Time series (C_ab, E_ab) for one atom pair."""
        S = len(self.times)
        c = np.empty(S)
        e = np.empty(S)
        for s in range(S):
            c[s], e[s] = concurrence_eof(self.sigma_atoms(s), a, b)
        return c, e

    def density(self, name: str, kind: str = "total", surface: int | None = None) -> np.ndarray:
        """Normalized density (S, bins): counts / (n_traj * group size *
        spacing), so the total density integrates to one per group."""
        g = {gr.name: gr for gr in self.groups}[name]
        if kind == "total":
            h = self.hist_total[name]
        elif kind == "excitation":
            h = self.hist_exc[name]
        elif kind == "partial":
            h = self.hist_partial[name][surface]
        else:
            raise ValueError(f"unknown density kind {kind!r}")
        norm = max(self.n_traj, 1) * len(g.atoms) * g.grid.spacing
        return h / norm

    def energy_density(self, which: str = "u") -> np.ndarray:
        """Normalized potential-energy density u(E, t) or global-spectrum
        density g(E, t); rows integrate to one over the energy grid where
        nothing fell in the overflow bins."""
        if self.hist_u is None:
            raise ValueError("no energy grid configured")
        h = self.hist_u if which == "u" else self.hist_g
        per_snap = max(self.n_traj, 1) * (1 if which == "u" else self.n_basis)
        return h / (per_snap * self.energy_grid.spacing)

    def detector_entanglement(self, k: int, a: int, b: int,
                              source: str = "active"):
        """Ensemble entanglement transported through detector k, from the
        electronic state frozen at each trajectory's first crossing time.

        ``source`` selects the per-trajectory electronic state entering
        the coherence average: "active" uses the occupied exciton (the
        surface the trajectory is propagating on, the state its nuclear
        motion reflects), "amplitudes" the propagated diabatic vector,
        which still carries every branch left behind at earlier
        splittings.  Trajectories that never cross contribute zero weight
        (slow transport measures no entanglement), so the averages divide
        by the full trajectory count.
        """
        if source == "active":
            sig = self.det_sigma_active[k] / max(self.n_traj, 1)
        elif source == "amplitudes":
            sig = self.det_sigma[k] / max(self.n_traj, 1)
        else:
            raise ValueError(f"unknown readout source {source!r}")
        c = 2.0 * abs(sig[a, b])
        return c, entanglement_of_formation(c)

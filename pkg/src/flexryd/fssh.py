"""Fewest-switches surface hopping for flexible Rydberg aggregates.

Trajectories carry classical nuclear coordinates on one Born-Oppenheimer
surface and the full diabatic electronic amplitude vector.  Surface
switches are stochastic with probabilities tied to the relative change of
the adiabatic populations, and accepted switches rescale the velocity
along the derivative coupling so total energy is conserved exactly.

Hop probabilities are evaluated with the adiabatic amplitudes (the
projections of the propagated diabatic vector onto the instantaneous
excitons); frustrated hops leave the velocity unchanged.  Trivial
crossings -- near-degeneracies of effectively decoupled subsystems -- are
detected by the overlap tracker: when the previous active exciton
projects dominantly onto a *different* eigenvector after a step, the
active-surface label follows the physical state and the event is logged.

Two implementations live here: readable numpy functions (:func:`step`,
:func:`hop_attempt`) that operate on a :class:`TrajectoryState`, and the
compiled whole-trajectory kernel behind :func:`run_trajectory`.  A
regression test keeps them in agreement; ensembles always use the kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .atomic_data import AU_TIME_PER_US
from .excitons import DEGENERACY_FLOOR, ExcitonSet, eigensolve, force
from .geometry import AggregateConfig, quantization_frame
from .hamiltonian import (ElectronicHamiltonian, aniso_coupling_table,
                          build_anisotropic, build_effective, build_isotropic,
                          zeeman_au_per_gauss)
from .rng import Stream

__all__ = [
    "Model",
    "DynamicsParams",
    "Detector",
    "TrajectoryState",
    "TrajectoryRecord",
    "InitError",
    "sample_initial",
    "init_electronic",
    "step",
    "hop_attempt",
    "run_trajectory",
    "propagate_electronic",
]


class InitError(RuntimeError):
    """Raised when the initial electronic state selector is ambiguous."""


@dataclass(frozen=True)
class Model:
    """One interaction model bound to an aggregate configuration.

    ``kind`` is "isotropic", "anisotropic" or "effective".  ``mu`` is the
    scaled dipole for the isotropic model; ``d_radial`` the radial dipole
    element for the other two.
    """

    kind: str
    config: AggregateConfig
    mu: float = 0.0
    d_radial: float = 0.0
    b_gauss: float = 0.0
    effective_order: int = 1

    def __post_init__(self):
        if self.kind not in ("isotropic", "anisotropic", "effective"):
            raise ValueError(f"unknown interaction model {self.kind!r}")

    @property
    def dim(self) -> int:
        n = self.config.n_atoms
        return 3 * n if self.kind == "anisotropic" else n

    def build(self, q=None) -> ElectronicHamiltonian:
        """Reference (numpy) Hamiltonian at reduced coordinates q."""
        if self.kind == "isotropic":
            return build_isotropic(self.config, self.mu, q=q)
        if self.kind == "anisotropic":
            return build_anisotropic(self.config, self.d_radial,
                                     b_gauss=self.b_gauss, q=q)
        return build_effective(self.config, self.d_radial, self.b_gauss,
                               order=self.effective_order, q=q)

    def kernel_args(self) -> dict:
        """Scalar/array bundle consumed by the compiled kernel."""
        dof = self.config.dof_map()
        kind = {"isotropic": 0, "anisotropic": 1, "effective": 2}[self.kind]
        d2 = self.d_radial * self.d_radial
        return dict(
            kind=kind,
            base=np.ascontiguousarray(dof.base),
            dof_atom=np.ascontiguousarray(dof.dof_atom),
            dof_axis=np.ascontiguousarray(dof.dof_axis),
            Q=np.ascontiguousarray(quantization_frame(self.config.quantization_axis)),
            A=np.ascontiguousarray(aniso_coupling_table()),
            mass=float(self.config.species.mass),
            mu2=float(self.mu * self.mu),
            d2=float(d2),
            c6=float(self.config.c6_au),
            zee=float(self.b_gauss * zeeman_au_per_gauss()),
            emf=float(self.b_gauss * zeeman_au_per_gauss()),
            eff_order=int(self.effective_order),
        )


@dataclass(frozen=True)
class DynamicsParams:
    """Propagation controls, all internal values in atomic units."""

    t_max: float
    snap_interval: float
    dt_base: float
    energy_tol: float = 1e-9
    phase_cap: float = 2e-3
    n_sub_min: int = 20
    gap_floor: float = DEGENERACY_FLOOR
    r_min_abort: float = 50.0
    max_halvings: int = 14
    max_steps: int = 20_000_000
    max_n_sub: int = 20_000
    max_hop_log: int = 4096
    surface_rule: str | tuple = "repulsive_dimer"

    @classmethod
    def from_us(cls, t_max_us: float, snap_interval_us: float,
                dt_base_us: float = 2e-3, **kwargs) -> "DynamicsParams":
        return cls(t_max=t_max_us * AU_TIME_PER_US,
                   snap_interval=snap_interval_us * AU_TIME_PER_US,
                   dt_base=dt_base_us * AU_TIME_PER_US, **kwargs)

    def snap_times(self) -> np.ndarray:
        n = int(round(self.t_max / self.snap_interval))
        times = np.arange(n + 1) * self.snap_interval
        times[-1] = min(times[-1], self.t_max)
        if times[-1] < self.t_max - 1e-9 * self.snap_interval:
            times = np.append(times, self.t_max)
        return times


@dataclass(frozen=True)
class Detector:
    """First-crossing detector plane for one atom coordinate."""

    atom: int
    axis: int          # 0, 1, 2 for x, y, z
    position: float    # plane coordinate, Bohr
    direction: int     # +1: fires when coordinate >= position; -1: <=


@dataclass
class TrajectoryState:
    """Mutable state of one trajectory (reference implementation)."""

    model: Model
    t: float
    q: np.ndarray
    v: np.ndarray
    c: np.ndarray
    zeta: int
    ham: ElectronicHamiltonian
    excitons: ExcitonSet
    stream: Stream
    energy0: float
    hop_log: list = field(default_factory=list)
    n_trivial: int = 0
    n_frustrated: int = 0
    n_hops: int = 0

    @property
    def kinetic(self) -> float:
        return 0.5 * self.model.config.species.mass * float(self.v @ self.v)

    @property
    def energy(self) -> float:
        return self.kinetic + float(self.excitons.energies[self.zeta])


def sample_initial(config: AggregateConfig, stream: Stream):
    """Draw initial reduced coordinates and velocities from the phase
    space (Wigner) distribution of the Gaussian nuclear ground state.

    Each coordinate is Normal(mean, sigma0); each velocity is
    Normal(0, sigma_v) with sigma_v = hbar / (2 sigma0 M), the momentum
    width of a Gaussian of position width sigma0.  All positions are
    drawn first, then all velocities.
    """
    dof = config.dof_map()
    q_mean = dof.reduced_mean(config)
    sigma_v = 1.0 / (2.0 * config.sigma0 * config.species.mass)
    q0 = np.array([stream.normal(m, config.sigma0) for m in q_mean])
    v0 = np.array([stream.normal(0.0, sigma_v) for _ in range(dof.n_dof)])
    return q0, v0


def _target_vector(model: Model) -> np.ndarray:
    """Diabatic vector of the repulsive dimer exciton on atoms (1, 2)."""
    n = model.dim
    target = np.zeros(n, dtype=complex)
    if model.kind == "anisotropic":
        # positive interaction amplitude perpendicular to the axis: the
        # repulsive dimer exciton is the symmetric m = 0 combination
        target[0 * 3 + 1] = 1.0 / math.sqrt(2.0)
        target[1 * 3 + 1] = 1.0 / math.sqrt(2.0)
    else:
        # negative amplitude: the repulsive exciton is antisymmetric
        target[0] = 1.0 / math.sqrt(2.0)
        target[1] = -1.0 / math.sqrt(2.0)
    return target


def init_electronic(model: Model, q: np.ndarray, surface_rule="repulsive_dimer"):
    """Initial diabatic amplitudes and active surface at coordinates q.

    ``surface_rule`` is either "repulsive_dimer" (the exciton with the
    largest overlap with the repulsive dimer state on atoms (1, 2)) or a
    tuple ("from_top", k) selecting the k-th surface counted from the
    most energetic one (k = 1 is the top).  Raises InitError when the
    selector is ambiguous.
    """
    ham = model.build(q)
    exc = eigensolve(ham)
    n = exc.n
    if surface_rule == "repulsive_dimer":
        target = _target_vector(model)
        ov = np.abs(exc.states.conj().T @ target) ** 2
        zeta = int(np.argmax(ov))
        if ov[zeta] < 0.6:
            raise InitError(
                f"repulsive dimer state is split over several excitons "
                f"(best overlap {ov[zeta]:.3f})")
    else:
        rule, k = surface_rule
        if rule != "from_top" or not 1 <= int(k) <= n:
            raise InitError(f"unknown surface rule {surface_rule!r}")
        zeta = n - int(k)
        gaps = []
        if zeta > 0:
            gaps.append(exc.energies[zeta] - exc.energies[zeta - 1])
        if zeta < n - 1:
            gaps.append(exc.energies[zeta + 1] - exc.energies[zeta])
        if min(gaps) < DEGENERACY_FLOOR:
            raise InitError(f"target surface {zeta} is degenerate")
    c0 = exc.states[:, zeta].astype(complex).copy()
    return c0, zeta, ham, exc


def propagate_electronic(c: np.ndarray, h0: np.ndarray, h1: np.ndarray,
                         dt: float, n_sub: int) -> np.ndarray:
    """Advance diabatic amplitudes over [0, dt] with the Hamiltonian
    linearly interpolated between h0 and h1 (4th-order sub-stepping)."""
    out = np.ascontiguousarray(c, dtype=complex).copy()
    _engine._propagate_electronic(out, np.ascontiguousarray(h0, dtype=complex),
                                  np.ascontiguousarray(h1, dtype=complex),
                                  float(dt), int(n_sub))
    return out


def _n_sub_for(span: float, dt: float, params: DynamicsParams) -> int:
    want = int(0.5 * span * dt / params.phase_cap) + 1
    return max(params.n_sub_min, min(want, params.max_n_sub))


def step(state: TrajectoryState, dt: float, params: DynamicsParams | None = None) -> TrajectoryState:
    """One velocity-Verlet step of fixed size on the active surface, with
    the electronic amplitudes advanced by interpolated sub-stepping and
    excitons re-solved and phase-aligned at the end point.

    Reference implementation: no step-size control.  Mutates and returns
    ``state``; does not attempt a hop (see :func:`hop_attempt`).
    """
    if params is None:
        params = DynamicsParams(t_max=0.0, snap_interval=1.0, dt_base=dt)
    model = state.model
    mass = model.config.species.mass
    exc, ham = state.excitons, state.ham
    a_cur = force(exc, ham.gradient, state.zeta) / mass
    q_new = state.q + state.v * dt + 0.5 * a_cur * dt * dt
    ham_new = model.build(q_new)
    exc_new = eigensolve(ham_new, prev=exc)
    # trivial-crossing tracking of the active label
    ov = np.abs(exc.states[:, state.zeta].conj() @ exc_new.states)
    best = int(np.argmax(ov))
    zeta_new = state.zeta
    relabel = best != state.zeta
    if relabel:
        zeta_new = best
    a_new = force(exc_new, ham_new.gradient, zeta_new) / mass
    v_new = state.v + 0.5 * (a_cur + a_new) * dt
    if relabel:
        e_ref = state.energy
        ke = 0.5 * mass * float(v_new @ v_new)
        k_target = e_ref - exc_new.energies[zeta_new]
        if k_target > 0.0 and ke > 0.0:
            v_new *= math.sqrt(k_target / ke)
            state.hop_log.append((state.t + dt, state.zeta, zeta_new,
                                  _engine.TRIVIAL_CROSSING))
            state.n_trivial += 1
        else:
            zeta_new = state.zeta
            a_new = force(exc_new, ham_new.gradient, zeta_new) / mass
            v_new = state.v + 0.5 * (a_cur + a_new) * dt
    span = 0.5 * (exc.energies[-1] - exc.energies[0]
                  + exc_new.energies[-1] - exc_new.energies[0])
    n_sub = _n_sub_for(span, dt, params)
    state.c = propagate_electronic(state.c, ham.matrix, ham_new.matrix, dt, n_sub)
    state.t += dt
    state.q = q_new
    state.v = v_new
    state.zeta = zeta_new
    state.ham = ham_new
    state.excitons = exc_new
    return state


def hop_attempt(state: TrajectoryState, dt: float,
                gap_floor: float = DEGENERACY_FLOOR) -> TrajectoryState:
    """Fewest-switches stochastic hop test at the current state.

    Computes the adiabatic amplitudes, the per-surface switch
    probabilities g = max(0, b dt / a_mm), draws one uniform variate and
    applies the cumulative-interval rule; an energetically allowed switch
    rescales the velocity along the derivative coupling direction, a
    forbidden one is logged as frustrated and leaves the velocity alone.
    """
    model = state.model
    mass = model.config.species.mass
    exc, ham = state.excitons, state.ham
    n = exc.n
    x = state.stream.uniform()
    ctil = exc.states.conj().T @ state.c
    amm = float(np.abs(ctil[state.zeta]) ** 2)
    if amm < 1e-12:
        state.hop_log.append((state.t, state.zeta, -1, _engine.HOP_SKIPPED))
        return state
    phi = exc.states[:, state.zeta]
    rows = np.array([phi.conj() @ (ham.gradient[d] @ exc.states)
                     for d in range(ham.gradient.shape[0])])
    cum = 0.0
    target = -1
    for l in range(n):
        if l == state.zeta:
            continue
        du = exc.energies[state.zeta] - exc.energies[l]
        if abs(du) < gap_floor:
            continue
        vf = complex(np.dot(state.v, np.conj(rows[:, l]))) / du
        b = -2.0 * (np.conj(ctil[l] * np.conj(ctil[state.zeta])) * vf).real
        g = b * dt / amm
        if g > 0.0:
            cum += g
        if x < cum:
            target = l
            break
    if target < 0:
        return state
    du = exc.energies[target] - exc.energies[state.zeta]
    fvec = rows[:, target] / du
    eta = complex(np.dot(state.v, fvec))
    phase = np.conj(eta) / abs(eta) if abs(eta) > 0 else 1.0
    u = np.real(phase * fvec)
    norm = float(np.linalg.norm(u))
    if norm <= 0.0:
        state.hop_log.append((state.t, state.zeta, target, _engine.HOP_SKIPPED))
        return state
    u /= norm
    a_comp = float(np.dot(state.v, u))
    b_disc = a_comp * a_comp - 2.0 * du / mass
    if b_disc >= 0.0:
        dv = a_comp + math.sqrt(b_disc) if a_comp < 0.0 else a_comp - math.sqrt(b_disc)
        state.v = state.v - dv * u
        state.hop_log.append((state.t, state.zeta, target, _engine.HOP_ACCEPTED))
        state.zeta = target
        state.n_hops += 1
    else:
        state.hop_log.append((state.t, state.zeta, target, _engine.HOP_FRUSTRATED))
        state.n_frustrated += 1
    return state


@dataclass
class TrajectoryRecord:
    """Snapshots and statistics of one propagated trajectory."""

    status: int
    times: np.ndarray          # (S,), atomic units
    q: np.ndarray              # (S, D)
    v: np.ndarray              # (S, D)
    c: np.ndarray              # (S, n) complex diabatic amplitudes
    zeta: np.ndarray           # (S,)
    u_zeta: np.ndarray         # (S,)
    spectrum: np.ndarray       # (S, n)
    adiab_pops: np.ndarray     # (S, n)
    exc_weights: np.ndarray    # (S, N) active-exciton weight per atom
    hop_log: np.ndarray        # (L, 4): t, from, to, code
    det_hit: np.ndarray        # (K,)
    det_time: np.ndarray       # (K,)
    det_c: np.ndarray          # (K, n) propagated amplitudes at crossing
    det_phi: np.ndarray        # (K, n) active exciton at crossing
    stats: dict

    @property
    def ok(self) -> bool:
        return self.status == _engine.OK


def run_trajectory(model: Model, params: DynamicsParams, master_seed: int,
                   traj_index: int, detectors: tuple = ()) -> TrajectoryRecord:
    """Propagate one full trajectory with the compiled kernel.

    The record is a deterministic function of (model, params, seed,
    index): initial conditions come from the trajectory's own counter
    stream, and every hop decision consumes exactly one variate of the
    same stream.
    """
    stream = Stream(master_seed, traj_index)
    q0, v0 = sample_initial(model.config, stream)
    c0, zeta0, _, _ = init_electronic(model, q0, params.surface_rule)

    ka = model.kernel_args()
    n = model.dim
    n_atoms = model.config.n_atoms
    dof_n = len(q0)
    snap_times = params.snap_times()
    S = len(snap_times)
    K = len(detectors)

    snap_q = np.zeros((S, dof_n))
    snap_v = np.zeros((S, dof_n))
    snap_c = np.zeros((S, n), dtype=complex)
    snap_zeta = np.zeros(S, dtype=np.int64)
    snap_uzeta = np.zeros(S)
    snap_spectrum = np.zeros((S, n))
    snap_adiab = np.zeros((S, n))
    snap_excw = np.zeros((S, n_atoms))
    det_hit = np.zeros(K, dtype=np.int64)
    det_time = np.zeros(K)
    det_c = np.zeros((K, n), dtype=complex)
    det_phi = np.zeros((K, n), dtype=complex)
    hop_log = np.zeros((params.max_hop_log, 4))

    out = _engine.run_trajectory_kernel(
        ka["kind"], ka["base"], ka["dof_atom"], ka["dof_axis"], ka["Q"], ka["A"],
        ka["mass"], ka["mu2"], ka["d2"], ka["c6"], ka["zee"], ka["emf"],
        ka["eff_order"],
        q0, v0, c0, zeta0,
        snap_times, params.dt_base, params.energy_tol, params.phase_cap,
        params.n_sub_min, params.gap_floor, params.r_min_abort,
        params.max_halvings, params.max_steps, params.max_n_sub,
        stream.key, np.uint64(stream.counter),
        np.array([d.atom for d in detectors], dtype=np.int64),
        np.array([d.axis for d in detectors], dtype=np.int64),
        np.array([float(d.direction) for d in detectors]),
        np.array([d.position for d in detectors]),
        snap_q, snap_v, snap_c, snap_zeta, snap_uzeta, snap_spectrum,
        snap_adiab, snap_excw,
        det_hit, det_time, det_c, det_phi,
        hop_log)
    (status, n_steps, n_hops, n_frust, n_trivial, n_singular, n_skipped,
     n_log, max_e_err, max_hop_err, max_norm_err, counter) = out

    stats = dict(
        n_steps=int(n_steps), n_hops=int(n_hops), n_frustrated=int(n_frust),
        n_trivial=int(n_trivial), n_singular=int(n_singular),
        n_skipped=int(n_skipped),
        max_energy_err=float(max_e_err), max_hop_energy_err=float(max_hop_err),
        max_norm_err=float(max_norm_err), traj_index=int(traj_index),
    )
    return TrajectoryRecord(
        status=int(status), times=snap_times, q=snap_q, v=snap_v, c=snap_c,
        zeta=snap_zeta, u_zeta=snap_uzeta, spectrum=snap_spectrum,
        adiab_pops=snap_adiab, exc_weights=snap_excw,
        hop_log=hop_log[:int(n_log)], det_hit=det_hit, det_time=det_time,
        det_c=det_c, det_phi=det_phi, stats=stats)

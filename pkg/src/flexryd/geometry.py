"""Aggregate geometries: T-shape builders, per-atom motion constraints and
the mapping between reduced and full cartesian coordinates.

Positions are stored in Bohr radii internally; builders take micrometers.
A constrained atom moves along a single unit axis, so the reduced
coordinate vector holds one scalar per constrained atom and three per free
atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .atomic_data import BOHR_PER_UM, LI7, SpeciesConstants

__all__ = [
    "AggregateConfig",
    "DOFMap",
    "build_tshape",
    "asymmetry_b",
    "separations",
    "quantization_frame",
]

FREE = "free"


@dataclass(frozen=True)
class AggregateConfig:
    """Mean geometry, motion constraints and interaction constants of one
    aggregate.

    ``constraints`` holds, per atom, either a unit 3-vector (the atom moves
    only along that axis) or the string ``"free"``.  ``c6_au`` follows the
    sign convention of the scalar van-der-Waals shift
    h_vdw = -sum_{k<l} C6 / R_kl**6 (negative C6 is repulsive).
    """

    mean_positions: np.ndarray          # (N, 3), Bohr
    constraints: tuple                  # per atom: unit 3-vector or "free"
    sigma0: float                       # initial Gaussian width, Bohr
    species: SpeciesConstants = LI7
    c6_au: float = 0.0
    quantization_axis: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        pos = np.asarray(self.mean_positions, dtype=float)
        object.__setattr__(self, "mean_positions", pos)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("mean_positions must be (N, 3)")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        n = len(pos)
        if len(self.constraints) != n:
            raise ValueError("one constraint entry per atom required")
        axes = []
        for c in self.constraints:
            if isinstance(c, str):
                if c != FREE:
                    raise ValueError(f"unknown constraint {c!r}")
                axes.append(FREE)
            else:
                a = np.asarray(c, dtype=float)
                if not math.isclose(float(np.linalg.norm(a)), 1.0, rel_tol=1e-12):
                    raise ValueError("constraint axes must be unit vectors")
                axes.append(a)
        object.__setattr__(self, "constraints", tuple(axes))
        qa = np.asarray(self.quantization_axis, dtype=float)
        nq = np.linalg.norm(qa)
        if nq == 0:
            raise ValueError("quantization axis must be nonzero")
        object.__setattr__(self, "quantization_axis", qa / nq)
        d = pos[:, None, :] - pos[None, :, :]
        r = np.linalg.norm(d, axis=-1)
        np.fill_diagonal(r, np.inf)
        if np.min(r) <= 0.0:
            raise ValueError("coincident mean positions")

    @property
    def n_atoms(self) -> int:
        return len(self.mean_positions)

    def dof_map(self) -> "DOFMap":
        return DOFMap.from_config(self)


@dataclass(frozen=True)
class DOFMap:
    """Reduced coordinates <-> full 3N cartesian coordinates.

    Atom positions are base + q_d * axis_d summed over the degrees of
    freedom owned by each atom.  For a constrained atom the base is the
    component of its mean position orthogonal to the axis and q is its
    coordinate along the axis; free atoms own three cartesian dofs with
    zero base.
    """

    base: np.ndarray        # (N, 3)
    dof_atom: np.ndarray    # (D,) atom index of each reduced coordinate
    dof_axis: np.ndarray    # (D, 3) unit direction of each reduced coordinate

    @classmethod
    def from_config(cls, config: AggregateConfig) -> "DOFMap":
        base = []
        atoms = []
        axes = []
        for i, c in enumerate(config.constraints):
            pos = config.mean_positions[i]
            if isinstance(c, str):  # free
                base.append(np.zeros(3))
                for k in range(3):
                    e = np.zeros(3)
                    e[k] = 1.0
                    atoms.append(i)
                    axes.append(e)
            else:
                base.append(pos - np.dot(pos, c) * c)
                atoms.append(i)
                axes.append(c)
        return cls(base=np.array(base), dof_atom=np.array(atoms, dtype=np.int64),
                   dof_axis=np.array(axes))

    @property
    def n_dof(self) -> int:
        return len(self.dof_atom)

    @property
    def n_atoms(self) -> int:
        return len(self.base)

    def to_full(self, q: np.ndarray) -> np.ndarray:
        """Reduced coordinates -> (N, 3) cartesian positions."""
        pos = self.base.copy()
        for d in range(self.n_dof):
            pos[self.dof_atom[d]] += q[d] * self.dof_axis[d]
        return pos

    def to_reduced(self, positions: np.ndarray) -> np.ndarray:
        """(N, 3) cartesian positions -> reduced coordinates.

        Exact left inverse of :meth:`to_full` for positions respecting
        the constraints.
        """
        q = np.empty(self.n_dof)
        for d in range(self.n_dof):
            q[d] = np.dot(positions[self.dof_atom[d]], self.dof_axis[d])
        return q

    def reduced_mean(self, config: AggregateConfig) -> np.ndarray:
        return self.to_reduced(config.mean_positions)

    def project_gradient(self, grad_full: np.ndarray) -> np.ndarray:
        """Project a (N, 3) cartesian gradient onto the reduced coordinates."""
        g = np.empty(self.n_dof)
        for d in range(self.n_dof):
            g[d] = np.dot(grad_full[self.dof_atom[d]], self.dof_axis[d])
        return g


def build_tshape(nx: int, ny: int, a1_um: float, a2_um: float, d_um: float,
                 dy_um: float = 0.0, dx_offset_um: float | None = None,
                 sigma0_um: float = 0.5, species: SpeciesConstants = LI7,
                 c6_au: float = 0.0, constrained: bool = True,
                 quantization_axis=(0.0, 0.0, 1.0)) -> AggregateConfig:
    """T-shape aggregate: nx atoms on the x axis, ny atoms on a vertical
    line at x = dx_offset.

    The first two horizontal atoms are spaced by ``a1`` and any further
    ones by ``d``; the vertical chain is spaced by ``a2`` and centered on
    y = 0.  A positive ``dy`` shifts the horizontal chain downwards
    (y -> -dy), presetting the asymmetry of the trimer subunit that forms
    when the excitation pulse arrives.  ``dx_offset`` defaults to a1 + d.
    With ``constrained`` the horizontal atoms move only along x and the
    vertical ones only along y; otherwise all atoms are free.
    """
    if nx < 2 or ny < 2:
        raise ValueError("need at least two atoms per chain")
    if min(a1_um, a2_um, d_um) <= 0:
        raise ValueError("spacings a1, a2, d must be positive")
    if dx_offset_um is None:
        dx_offset_um = a1_um + d_um
    xs = [0.0, a1_um] + [a1_um + k * d_um for k in range(1, nx - 1)]
    pos = []
    for x in xs:
        pos.append((x, -dy_um, 0.0))
    for j in range(ny):
        y = (j - (ny - 1) / 2.0) * a2_um
        pos.append((dx_offset_um, y, 0.0))
    pos = np.array(pos) * BOHR_PER_UM
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    if constrained:
        constraints = tuple([ex] * nx + [ey] * ny)
    else:
        constraints = tuple([FREE] * (nx + ny))
    return AggregateConfig(
        mean_positions=pos, constraints=constraints,
        sigma0=sigma0_um * BOHR_PER_UM, species=species, c6_au=c6_au,
        quantization_axis=np.asarray(quantization_axis, dtype=float))


def asymmetry_b(y3: float, y4: float) -> float:
    """Asymmetry of a vertical atom pair relative to the horizontal axis,
    b = 2|y3/y4| / (|y3/y4| + 1).

    b = 1 for mirror-symmetric positions, 0 when atom 3 sits on the axis.
    """
    if y4 == 0.0:
        raise ZeroDivisionError("y4 = 0: asymmetry parameter undefined")
    ratio = abs(y3 / y4)
    return 2.0 * ratio / (ratio + 1.0)


def quantization_frame(axis) -> np.ndarray:
    """Rotation matrix Q with rows (q_x, q_y, q_z = axis): Q @ r gives the
    coordinates of a lab vector in the quantization frame.

    Built from the minimal (Rodrigues) rotation taking lab z onto the
    axis.  Any other completion of the orthonormal basis only shifts the
    azimuthal origin, which cancels in all |.|^2 observables; a regression
    test checks that alternative completions give identical spectra.
    """
    qa = np.asarray(axis, dtype=float)
    n = np.linalg.norm(qa)
    if n == 0:
        raise ValueError("quantization axis must be nonzero")
    qa = qa / n
    z = np.array([0.0, 0.0, 1.0])
    c = float(np.dot(z, qa))
    ax = np.cross(z, qa)
    s = float(np.linalg.norm(ax))
    if s == 0.0:
        if c > 0.0:
            return np.eye(3)
        # antiparallel: rotate by pi about x
        return np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    ax = ax / s
    K = np.array([[0.0, -ax[2], ax[1]], [ax[2], 0.0, -ax[0]], [-ax[1], ax[0], 0.0]])
    R = np.eye(3) + s * K + (1.0 - c) * (K @ K)   # maps z onto qa
    return R.T


def separations(positions: np.ndarray, quantization_axis=(0.0, 0.0, 1.0)):
    """Pairwise distances and direction angles in the quantization frame.

    Returns (R, theta, phi): the symmetric distance matrix and, for each
    ordered pair (i -> j), the polar and azimuthal angles of R_j - R_i
    expressed in the frame whose z axis is the quantization axis.
    Diagonals are zero.  Raises on coincident atoms.
    """
    pos = np.asarray(positions, dtype=float)
    Q = quantization_frame(quantization_axis)
    n = len(pos)
    diff = pos[None, :, :] - pos[:, None, :]       # diff[i, j] = R_j - R_i
    r = np.linalg.norm(diff, axis=-1)
    off = ~np.eye(n, dtype=bool)
    if np.any(r[off] == 0.0):
        raise ValueError("coincident atoms")
    rot = diff @ Q.T
    with np.errstate(invalid="ignore"):
        theta = np.arccos(np.clip(rot[..., 2] / np.where(r > 0, r, 1.0), -1.0, 1.0))
        phi = np.arctan2(rot[..., 1], rot[..., 0])
    np.fill_diagonal(theta, 0.0)
    np.fill_diagonal(phi, 0.0)
    return r, theta, phi

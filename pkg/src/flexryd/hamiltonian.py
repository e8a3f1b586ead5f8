"""Electronic Hamiltonians of the single-excitation manifold and their
analytic gradients with respect to the reduced nuclear coordinates.

Three interaction models are provided:

* ``build_isotropic``   -- N x N real symmetric, binary interaction
  V(r) = -mu^2 / r^3 plus the scalar van-der-Waals shift on the diagonal.
* ``build_anisotropic`` -- 3N x 3N complex Hermitian over |pi_alpha, m>,
  m in {-1, 0, 1}, with full directional dipole-dipole matrix elements,
  linear Zeeman shifts and the same van-der-Waals diagonal.
* ``build_effective``   -- N x N complex Hermitian on the m = +1 manifold
  after block-diagonalizing away the m = -1 manifold with a strong
  magnetic field (van Vleck perturbation theory in the inverse Zeeman
  splitting).

All energies, lengths and gradients are in Hartree atomic units with
4*pi*eps0 = 1 absorbed; the gradient is stored per reduced coordinate so
constrained scenarios stay cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angular import wigner3j
from .atomic_data import HARTREE_MHZ, MU_B_MHZ_PER_GAUSS
from .geometry import AggregateConfig, DOFMap, quantization_frame

__all__ = [
    "ElectronicHamiltonian",
    "v_iso",
    "h_vdw_scalar",
    "v_aniso",
    "build_isotropic",
    "build_anisotropic",
    "build_effective",
    "aniso_coupling_table",
    "decoupling_alpha",
    "zeeman_au_per_gauss",
]

_K0 = math.sqrt(5.0 / (16.0 * math.pi))
_K1 = math.sqrt(15.0 / (8.0 * math.pi))
_K2 = math.sqrt(15.0 / (32.0 * math.pi))


def zeeman_au_per_gauss() -> float:
    """Linear Zeeman shift per unit m per Gauss, in Hartree."""
    return MU_B_MHZ_PER_GAUSS / HARTREE_MHZ


@dataclass(frozen=True)
class ElectronicHamiltonian:
    """Dense Hermitian electronic Hamiltonian at one configuration.

    ``matrix`` has shape (n, n); ``gradient`` has shape (D, n, n) with one
    Hermitian matrix per reduced nuclear coordinate.  ``basis`` labels the
    electronic basis states: atom indices for the isotropic and effective
    models, (atom, m) pairs for the anisotropic one.
    """

    matrix: np.ndarray
    gradient: np.ndarray
    basis: tuple
    dof_map: DOFMap


def v_iso(r: float, mu: float) -> float:
    """Isotropic resonant interaction V(r) = -mu^2 / r^3 (atomic units).

    The negative amplitude is what gives the repulsive surface access to
    the trimer conical intersection.
    """
    if r <= 0.0:
        raise ValueError("separation must be positive")
    return -mu * mu / r ** 3


def h_vdw_scalar(positions: np.ndarray, c6: float) -> float:
    """Scalar van-der-Waals shift -sum_{k<l} C6 / R_kl^6.

    With a single dispersion coefficient the shift is independent of
    where the p excitation sits, so it enters the Hamiltonian as a
    multiple of the identity.  Negative C6 gives a repulsive shift that
    keeps excitation-free atom pairs from colliding.
    """
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    out = 0.0
    for k in range(n):
        for l in range(k + 1, n):
            d = pos[k] - pos[l]
            r2 = float(d @ d)
            if r2 == 0.0:
                raise ValueError("coincident atoms")
            out -= c6 / r2 ** 3
    return out


def aniso_coupling_table() -> np.ndarray:
    """Coefficients A[m+1, m'+1] of the directional matrix element
    V_{m,m'} = A[m, m'] * d^2 * Y_{2,m'-m}(rhat) / r^3."""
    A = np.zeros((3, 3))
    for m in (-1, 0, 1):
        for mp in (-1, 0, 1):
            A[m + 1, mp + 1] = (-math.sqrt(8.0 * math.pi / 3.0)
                                * (-1.0) ** mp
                                * wigner3j(1, 1, 2, m, -mp, mp - m))
    return A


_ANISO_A = aniso_coupling_table()


def _y2_over_r3(s: np.ndarray):
    """The five products Y_{2,q}(shat) / r^3 (q = -2..2) and their
    cartesian gradients, for a separation vector s already expressed in
    the quantization frame."""
    x, y, z = s
    r2 = x * x + y * y + z * z
    r = math.sqrt(r2)
    r5 = r2 * r2 * r
    r7 = r5 * r2
    xp = x + 1j * y
    xm = x - 1j * y
    nums = np.array([
        _K2 * xm * xm,
        _K1 * z * xm,
        _K0 * (3.0 * z * z - r2),
        -_K1 * z * xp,
        _K2 * xp * xp,
    ])
    vals = nums / r5
    dn = np.zeros((5, 3), dtype=complex)
    dn[0] = (2.0 * _K2 * xm, -2j * _K2 * xm, 0.0)
    dn[1] = (_K1 * z, -1j * _K1 * z, _K1 * xm)
    dn[2] = (-2.0 * _K0 * x, -2.0 * _K0 * y, 4.0 * _K0 * z)
    dn[3] = (-_K1 * z, -1j * _K1 * z, -_K1 * xp)
    dn[4] = (2.0 * _K2 * xp, 2j * _K2 * xp, 0.0)
    grads = dn / r5 - 5.0 * np.outer(nums, s) / r7
    return vals, grads


def v_aniso(m: int, mp: int, r_vec, d_radial: float,
            quantization_axis=(0.0, 0.0, 1.0)) -> complex:
    """Directional dipole-dipole matrix element V_{m,m'}(r) between the
    resonant pair states |p,m; s> and |s; p,m'> (atomic units).

    ``r_vec`` points from the atom carrying m to the one carrying m'; the
    angles are taken in the frame whose z axis is the quantization axis.
    Vanishes for particular alignments, e.g. V_{0,0} at
    theta = arccos(1/sqrt(3)).
    """
    if m not in (-1, 0, 1) or mp not in (-1, 0, 1):
        raise ValueError("magnetic quantum numbers must be -1, 0 or 1")
    Q = quantization_frame(quantization_axis)
    s = Q @ np.asarray(r_vec, dtype=float)
    if float(s @ s) == 0.0:
        raise ValueError("zero separation vector")
    vals, _ = _y2_over_r3(s)
    q = mp - m
    return complex(_ANISO_A[m + 1, mp + 1] * d_radial ** 2 * vals[q + 2])


def _vdw_terms(positions: np.ndarray, dof_map: DOFMap, c6: float):
    """Scalar vdW shift and its gradient per reduced coordinate."""
    n = len(positions)
    shift = h_vdw_scalar(positions, c6)
    grad_full = np.zeros((n, 3))
    if c6 != 0.0:
        for k in range(n):
            for l in range(n):
                if l == k:
                    continue
                d = positions[k] - positions[l]
                r2 = float(d @ d)
                grad_full[k] += 6.0 * c6 * d / r2 ** 4
    return shift, dof_map.project_gradient(grad_full)


def build_isotropic(config: AggregateConfig, mu: float, q: np.ndarray | None = None) -> ElectronicHamiltonian:
    """Isotropic-model Hamiltonian H_dd + h_vdw * 1 and its gradient.

    Off-diagonal (alpha, beta): -mu^2 / R_ab^3; diagonal: the scalar
    van-der-Waals shift.  ``q`` are reduced coordinates (defaults to the
    mean geometry).
    """
    dof = config.dof_map()
    pos = dof.to_full(q) if q is not None else np.asarray(config.mean_positions, float)
    n = config.n_atoms
    H = np.zeros((n, n))
    grad = np.zeros((dof.n_dof, n, n))
    mu2 = mu * mu
    for a in range(n):
        for b in range(a + 1, n):
            d = pos[a] - pos[b]
            r2 = float(d @ d)
            if r2 == 0.0:
                raise ValueError(f"coincident atoms {a}, {b}")
            r = math.sqrt(r2)
            H[a, b] = H[b, a] = -mu2 / (r2 * r)
            gfull = 3.0 * mu2 * d / (r2 * r2 * r)  # 3 mu^2 d / r^5
            # project on the dofs touching atoms a and b
            for dd in range(dof.n_dof):
                at = dof.dof_atom[dd]
                if at == a:
                    g = float(np.dot(gfull, dof.dof_axis[dd]))
                elif at == b:
                    g = -float(np.dot(gfull, dof.dof_axis[dd]))
                else:
                    continue
                grad[dd, a, b] += g
                grad[dd, b, a] += g
    shift, gshift = _vdw_terms(pos, dof, config.c6_au)
    H[np.diag_indices(n)] += shift
    for dd in range(dof.n_dof):
        grad[dd][np.diag_indices(n)] += gshift[dd]
    basis = tuple(range(n))
    return ElectronicHamiltonian(matrix=H, gradient=grad, basis=basis, dof_map=dof)


def build_anisotropic(config: AggregateConfig, d_radial: float,
                      b_gauss: float = 0.0, q: np.ndarray | None = None) -> ElectronicHamiltonian:
    """Anisotropic-model Hamiltonian over |pi_alpha, m> and its gradient.

    3N x 3N Hermitian: V_{m,m'} blocks between atoms, linear Zeeman
    shifts m * mu_B * B_z plus the scalar van-der-Waals shift on the
    diagonal.  The quantization frame is the config's quantization axis;
    basis ordering is (atom major, m = -1, 0, +1 minor).
    """
    dof = config.dof_map()
    pos = dof.to_full(q) if q is not None else np.asarray(config.mean_positions, float)
    Q = quantization_frame(config.quantization_axis)
    n = config.n_atoms
    dim = 3 * n
    d2 = d_radial * d_radial
    H = np.zeros((dim, dim), dtype=complex)
    grad = np.zeros((dof.n_dof, dim, dim), dtype=complex)
    for a in range(n):
        for b in range(a + 1, n):
            svec = Q @ (pos[b] - pos[a])
            if float(svec @ svec) == 0.0:
                raise ValueError(f"coincident atoms {a}, {b}")
            vals, gr = _y2_over_r3(svec)
            for m in (-1, 0, 1):
                for mp in (-1, 0, 1):
                    amp = _ANISO_A[m + 1, mp + 1] * d2
                    if amp == 0.0:
                        continue
                    qq = mp - m
                    val = amp * vals[qq + 2]
                    H[3 * a + m + 1, 3 * b + mp + 1] = val
                    H[3 * b + mp + 1, 3 * a + m + 1] = np.conj(val)
                    gvec = amp * gr[qq + 2]          # d/d(svec)
                    glab = Q.T @ gvec                # back to lab frame
                    for dd in range(dof.n_dof):
                        at = dof.dof_atom[dd]
                        if at == b:
                            g = complex(np.dot(glab, dof.dof_axis[dd]))
                        elif at == a:
                            g = -complex(np.dot(glab, dof.dof_axis[dd]))
                        else:
                            continue
                        grad[dd, 3 * a + m + 1, 3 * b + mp + 1] += g
                        grad[dd, 3 * b + mp + 1, 3 * a + m + 1] += np.conj(g)
    shift, gshift = _vdw_terms(pos, dof, config.c6_au)
    zee = b_gauss * zeeman_au_per_gauss()
    for a in range(n):
        for m in (-1, 0, 1):
            H[3 * a + m + 1, 3 * a + m + 1] = shift + m * zee
    for dd in range(dof.n_dof):
        grad[dd][np.diag_indices(dim)] += gshift[dd]
    basis = tuple((a, m) for a in range(n) for m in (-1, 0, 1))
    return ElectronicHamiltonian(matrix=H, gradient=grad, basis=basis, dof_map=dof)


def _w_matrix(pos: np.ndarray, dof: DOFMap, d2: float):
    """Coupling W between the m = +1 and m = -1 manifolds and its
    gradient: W_ab = (d^2/2) (x - i y)^2 / R^5 with the in-plane
    components of R_b - R_a.  Complex symmetric, zero diagonal."""
    n = len(pos)
    W = np.zeros((n, n), dtype=complex)
    dW = np.zeros((dof.n_dof, n, n), dtype=complex)
    for a in range(n):
        for b in range(a + 1, n):
            d = pos[b] - pos[a]
            x, y = d[0], d[1]
            r2 = float(d @ d)
            if r2 == 0.0:
                raise ValueError(f"coincident atoms {a}, {b}")
            r = math.sqrt(r2)
            r5 = r2 * r2 * r
            r7 = r5 * r2
            xm = x - 1j * y
            val = 0.5 * d2 * xm * xm / r5
            W[a, b] = W[b, a] = val
            gvec = 0.5 * d2 * (np.array([2.0 * xm, -2j * xm, 0.0]) / r5
                               - 5.0 * xm * xm * d / r7)
            for dd in range(dof.n_dof):
                at = dof.dof_atom[dd]
                if at == b:
                    g = complex(np.dot(gvec, dof.dof_axis[dd]))
                elif at == a:
                    g = -complex(np.dot(gvec, dof.dof_axis[dd]))
                else:
                    continue
                dW[dd, a, b] += g
                dW[dd, b, a] += g
    return W, dW


def build_effective(config: AggregateConfig, d_radial: float, b_gauss: float,
                    order: int = 1, q: np.ndarray | None = None) -> ElectronicHamiltonian:
    """Block-diagonalized m = +1 manifold Hamiltonian in a strong field
    B_z perpendicular to a planar aggregate.

    H' = H_iso + W W^dag / (2 E_mf) at first order, plus
    (W H_iso W^dag - {H_iso, W W^dag} / 2) / (4 E_mf^2) at second order,
    where W_ab = (d^2/2) R_ab^-3 exp(-2i phi_ab) couples the m = +1 and
    m = -1 manifolds and E_mf = mu_B B_z.  The constant E_mf shift of the
    manifold is dropped (energy zero at the Zeeman-shifted manifold).
    The first-order version tracks the exact field-dressed spectrum
    better than the second-order one and is the default.
    """
    if b_gauss <= 0.0:
        raise ValueError("effective model requires a positive field strength")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    pos = (config.dof_map().to_full(q) if q is not None
           else np.asarray(config.mean_positions, float))
    if np.max(np.abs(pos[:, 2])) > 1e-9 * max(1.0, np.max(np.abs(pos))):
        raise ValueError("effective model is defined for aggregates in the z = 0 plane")
    mu = d_radial / math.sqrt(6.0)
    base = build_isotropic(config, mu, q=q)
    dof = base.dof_map
    emf = b_gauss * zeeman_au_per_gauss()
    W, dW = _w_matrix(pos, dof, d_radial * d_radial)
    Wd = W.conj().T
    WW = W @ Wd
    H = base.matrix.astype(complex) + WW / (2.0 * emf)
    grad = base.gradient.astype(complex).copy()
    for dd in range(dof.n_dof):
        dWd = dW[dd].conj().T
        dWW = dW[dd] @ Wd + W @ dWd
        grad[dd] += dWW / (2.0 * emf)
        if order == 2:
            H0 = base.matrix
            dH0 = base.gradient[dd]
            term = (dW[dd] @ H0 @ Wd + W @ dH0 @ Wd + W @ H0 @ dWd
                    - 0.5 * (dH0 @ WW + H0 @ dWW + dWW @ H0 + WW @ dH0))
            grad[dd] += term / (4.0 * emf * emf)
    if order == 2:
        H0 = base.matrix
        H += (W @ H0 @ Wd - 0.5 * (H0 @ WW + WW @ H0)) / (4.0 * emf * emf)
    basis = tuple(range(config.n_atoms))
    return ElectronicHamiltonian(matrix=H, gradient=grad, basis=basis, dof_map=dof)


def decoupling_alpha(nu: float, r_min_um: float, b_gauss: float) -> float:
    """Decoupling parameter alpha = E_dd_max / (2 E_mf) in the lithium
    closed form 731.4 (nu/40)^4 / ((R/um)^3 (B/G)).

    Controls convergence of the block-diagonalized effective Hamiltonian
    to the isotropic negative-amplitude model; values well below one mean
    the m = +1 manifold is effectively isolated.
    """
    if b_gauss <= 0:
        raise ValueError("field strength must be positive")
    return 731.4 * (nu / 40.0) ** 4 / (r_min_um ** 3 * b_gauss)

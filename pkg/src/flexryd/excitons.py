"""Born-Oppenheimer surfaces and excitons: diagonalization with
phase-consistent eigenvectors, Hellmann-Feynman derivative couplings and
forces, plus the analytic linear-trimer solution used as an oracle.

Eigenproblems are solved with LAPACK (``numpy.linalg.eigh``); the matrices
here never exceed a few tens of rows, so robustness is all that matters.
Eigenvector phases are fixed deterministically: the largest-magnitude
component is rotated onto the positive real axis, and when a previous
exciton set is supplied each vector is additionally phase-aligned to
maximize the real overlap with its predecessor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import ElectronicHamiltonian

__all__ = [
    "ExcitonSet",
    "eigensolve",
    "derivative_coupling",
    "force",
    "linear_trimer_analytic",
    "DEGENERACY_FLOOR",
]

# Below this gap (Hartree) a derivative coupling is declared singular
# rather than clamped; the dynamics layer then passes such crossings
# diabatically through the overlap tracker.  Trivial-crossing gaps in the
# scenarios of interest sit around 1e-11 Hartree and must stay far above
# the floor, which in turn only has to clear the eigenvalue noise floor
# (~ |H| * 1e-15 ~ 1e-23).
DEGENERACY_FLOOR = 1e-14


@dataclass(frozen=True)
class ExcitonSet:
    """Eigensystem of one electronic Hamiltonian: ascending energies and
    orthonormal phase-fixed eigenvector columns."""

    energies: np.ndarray   # (n,), ascending
    states: np.ndarray     # (n, n), states[:, k] is exciton k

    @property
    def n(self) -> int:
        return len(self.energies)

    def overlap(self, other: "ExcitonSet") -> np.ndarray:
        """Overlap matrix <phi_self_k | phi_other_l>."""
        return self.states.conj().T @ other.states


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude component is real
    positive."""
    out = vecs.copy()
    for k in range(vecs.shape[1]):
        i = int(np.argmax(np.abs(out[:, k])))
        z = out[i, k]
        a = abs(z)
        if a > 0:
            out[:, k] *= np.conj(z) / a
    return out


def eigensolve(ham: ElectronicHamiltonian | np.ndarray,
               prev: ExcitonSet | None = None) -> ExcitonSet:
    """Full spectrum of a Hermitian electronic Hamiltonian, ascending.

    With ``prev`` given, each eigenvector's global phase is chosen to
    maximize Re<phi_prev_k | phi_k> (a sign flip in the real case), which
    keeps exciton tracks smooth along a trajectory.
    """
    H = ham.matrix if isinstance(ham, ElectronicHamiltonian) else np.asarray(ham)
    herm_err = np.max(np.abs(H - H.conj().T))
    scale = max(np.max(np.abs(H)), 1.0)
    if herm_err > 1e-12 * scale:
        raise ValueError(f"input is not Hermitian (deviation {herm_err:.2e})")
    w, v = np.linalg.eigh(H)
    if prev is None:
        v = _fix_phases(v)
    else:
        ov = prev.states.conj().T @ v
        for k in range(len(w)):
            z = ov[k, k]
            a = abs(z)
            if a > 0:
                v[:, k] *= np.conj(z) / a
            else:  # orthogonal to predecessor: fall back to canonical gauge
                i = int(np.argmax(np.abs(v[:, k])))
                v[:, k] *= np.conj(v[i, k]) / abs(v[i, k])
    if np.isrealobj(H):
        v = v.real if np.isrealobj(v) else np.real_if_close(v, tol=100)
    return ExcitonSet(energies=w, states=v)


def derivative_coupling(excitons: ExcitonSet, gradient: np.ndarray,
                        k: int, l: int) -> np.ndarray:
    """Nonadiabatic derivative coupling F_kl per reduced coordinate via
    the off-diagonal Hellmann-Feynman identity
    F_kl (U_l - U_k) = <phi_k | grad H | phi_l>.

    Antihermitian in (k, l); raises for k == l or when the surfaces are
    closer than DEGENERACY_FLOOR (the coupling is singular there and must
    be handled by the caller, not clamped silently).
    """
    if k == l:
        raise ValueError("derivative coupling is defined between distinct surfaces")
    du = excitons.energies[l] - excitons.energies[k]
    if abs(du) < DEGENERACY_FLOOR:
        raise FloatingPointError(
            f"surfaces {k}, {l} closer than the degeneracy floor ({du:.2e})")
    bra = excitons.states[:, k].conj()
    ket = excitons.states[:, l]
    out = np.array([bra @ (gradient[d] @ ket) for d in range(gradient.shape[0])])
    out /= du
    if np.isrealobj(excitons.states):
        out = out.real
    return out


def force(excitons: ExcitonSet, gradient: np.ndarray, k: int) -> np.ndarray:
    """Hellmann-Feynman force -<phi_k | grad H | phi_k> per reduced
    coordinate (minus the adiabatic surface gradient)."""
    ket = excitons.states[:, k]
    bra = ket.conj()
    return np.array([-np.real(bra @ (gradient[d] @ ket))
                     for d in range(gradient.shape[0])])


def linear_trimer_analytic(v12: float, vtilde: float):
    """Closed-form excitons of a linear trimer with the outer coupling
    neglected: H = v12 * [[0, 1, 0], [1, 0, vt], [0, vt, 0]].

    Returns (u_plus, u_minus, u_zero, phi_plus, phi_minus, phi_zero) with
    u_pm = +/- v12 sqrt(1 + vt^2), u_zero = 0.  The +/- excitons are
    (|1> + vt |3>) / sqrt(1 + vt^2) combined symmetrically or
    antisymmetrically with |2>; the zero-energy exciton leaves site 2
    empty.
    """
    if v12 == 0.0:
        raise ValueError("v12 must be nonzero")
    s = np.sqrt(1.0 + vtilde ** 2)
    u_plus = v12 * s
    u_minus = -v12 * s
    head = np.array([1.0, 0.0, vtilde]) / s
    phi_plus = (head + np.array([0.0, 1.0, 0.0])) / np.sqrt(2.0)
    phi_minus = (head - np.array([0.0, 1.0, 0.0])) / np.sqrt(2.0)
    phi_zero = np.array([-vtilde, 0.0, 1.0]) / s
    return u_plus, u_minus, 0.0, phi_plus, phi_minus, phi_zero

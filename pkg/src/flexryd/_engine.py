"""Jitted single-trajectory propagation kernel.

This module is the hot path behind :mod:`flexryd.fssh`: one compiled
function advances a full surface-hopping trajectory (velocity-Verlet
nuclear steps, interpolated RK4 electronic propagation, stochastic hops
with velocity rescaling, trivial-crossing relabeling, snapshot and
detector recording).  The pure-numpy reference implementation of the same
algorithm lives in :mod:`flexryd.fssh`; a regression test keeps the two
in agreement.

Everything here works in Hartree atomic units.  Model kinds:
0 = isotropic, 1 = anisotropic, 2 = effective (block-diagonalized m = +1
manifold).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .rng import uniform

# status codes returned by the kernel
OK = 0
ABORT_COINCIDENT = 1
ABORT_NONFINITE = 3
ABORT_MAX_STEPS = 4

# hop-log event codes
HOP_ACCEPTED = 0
HOP_FRUSTRATED = 1
TRIVIAL_CROSSING = 2
HOP_SKIPPED = 3

_K0 = math.sqrt(5.0 / (16.0 * math.pi))
_K1 = math.sqrt(15.0 / (8.0 * math.pi))
_K2 = math.sqrt(15.0 / (32.0 * math.pi))


@njit(cache=True)
def positions_from_reduced(base, dof_atom, dof_axis, q, pos):
    pos[:, :] = base
    for d in range(dof_atom.shape[0]):
        a = dof_atom[d]
        for k in range(3):
            pos[a, k] += q[d] * dof_axis[d, k]


@njit(cache=True)
def build_h(kind, pos, dof_atom, dof_axis, Q, A, mu2, d2, c6, zee, emf,
            eff_order, r_min_abort, H, dH):
    """Fill H (n, n) and dH (D, n, n); returns 0 or an abort status."""
    n_atoms = pos.shape[0]
    D = dof_atom.shape[0]
    H[:, :] = 0.0
    dH[:, :, :] = 0.0

    # scalar van-der-Waals shift and its gradient (all models)
    shift = 0.0
    gsh = np.zeros(D)
    for a in range(n_atoms):
        for b in range(a + 1, n_atoms):
            dx = pos[a, 0] - pos[b, 0]
            dy = pos[a, 1] - pos[b, 1]
            dz = pos[a, 2] - pos[b, 2]
            r2 = dx * dx + dy * dy + dz * dz
            r = math.sqrt(r2)
            if r < r_min_abort:
                return ABORT_COINCIDENT
            if c6 != 0.0:
                r6 = r2 * r2 * r2
                shift -= c6 / r6
                w = 6.0 * c6 / (r6 * r2)
                for d in range(D):
                    at = dof_atom[d]
                    if at == a:
                        gsh[d] += w * (dx * dof_axis[d, 0] + dy * dof_axis[d, 1]
                                       + dz * dof_axis[d, 2])
                    elif at == b:
                        gsh[d] -= w * (dx * dof_axis[d, 0] + dy * dof_axis[d, 1]
                                       + dz * dof_axis[d, 2])

    if kind == 0 or kind == 2:
        amp = mu2 if kind == 0 else d2 / 6.0
        for a in range(n_atoms):
            for b in range(a + 1, n_atoms):
                dx = pos[a, 0] - pos[b, 0]
                dy = pos[a, 1] - pos[b, 1]
                dz = pos[a, 2] - pos[b, 2]
                r2 = dx * dx + dy * dy + dz * dz
                r = math.sqrt(r2)
                r3 = r2 * r
                r5 = r2 * r3
                v = -amp / r3
                H[a, b] += v
                H[b, a] += v
                w = 3.0 * amp / r5
                for d in range(D):
                    at = dof_atom[d]
                    if at == a:
                        g = w * (dx * dof_axis[d, 0] + dy * dof_axis[d, 1]
                                 + dz * dof_axis[d, 2])
                    elif at == b:
                        g = -w * (dx * dof_axis[d, 0] + dy * dof_axis[d, 1]
                                  + dz * dof_axis[d, 2])
                    else:
                        continue
                    dH[d, a, b] += g
                    dH[d, b, a] += g
        for a in range(n_atoms):
            H[a, a] += shift
            for d in range(D):
                dH[d, a, a] += gsh[d]

        if kind == 2:
            # couple-to-(m = -1) correction via W W^dag / (2 E_mf)
            n = n_atoms
            W = np.zeros((n, n), dtype=np.complex128)
            dW = np.zeros((D, n, n), dtype=np.complex128)
            for a in range(n):
                for b in range(a + 1, n):
                    dx = pos[b, 0] - pos[a, 0]
                    dy = pos[b, 1] - pos[a, 1]
                    dz = pos[b, 2] - pos[a, 2]
                    r2 = dx * dx + dy * dy + dz * dz
                    r = math.sqrt(r2)
                    r5 = r2 * r2 * r
                    r7 = r5 * r2
                    xm = complex(dx, -dy)
                    val = 0.5 * d2 * xm * xm / r5
                    W[a, b] = val
                    W[b, a] = val
                    gx = 0.5 * d2 * (2.0 * xm / r5 - 5.0 * xm * xm * dx / r7)
                    gy = 0.5 * d2 * (-2j * xm / r5 - 5.0 * xm * xm * dy / r7)
                    gz = 0.5 * d2 * (-5.0 * xm * xm * dz / r7)
                    for d in range(D):
                        at = dof_atom[d]
                        if at == b:
                            g = (gx * dof_axis[d, 0] + gy * dof_axis[d, 1]
                                 + gz * dof_axis[d, 2])
                        elif at == a:
                            g = -(gx * dof_axis[d, 0] + gy * dof_axis[d, 1]
                                  + gz * dof_axis[d, 2])
                        else:
                            continue
                        dW[d, a, b] += g
                        dW[d, b, a] += g
            Wd = W.conj().T.copy()
            WW = np.dot(W, Wd)
            inv2 = 1.0 / (2.0 * emf)
            H0 = np.zeros((n, n), dtype=np.complex128)
            if eff_order == 2:
                H0[:, :] = H[:, :]
            for i in range(n):
                for j in range(n):
                    H[i, j] += WW[i, j] * inv2
            for d in range(D):
                dWd = dW[d].conj().T.copy()
                dWW = np.dot(dW[d], Wd) + np.dot(W, dWd)
                if eff_order == 2:
                    dH0 = dH[d].copy()
                    inv4 = 1.0 / (4.0 * emf * emf)
                    t2 = (np.dot(np.dot(dW[d], H0), Wd)
                          + np.dot(np.dot(W, dH0), Wd)
                          + np.dot(np.dot(W, H0), dWd)
                          - 0.5 * (np.dot(dH0, WW) + np.dot(H0, dWW)
                                   + np.dot(dWW, H0) + np.dot(WW, dH0)))
                    for i in range(n):
                        for j in range(n):
                            dH[d, i, j] += dWW[i, j] * inv2 + t2[i, j] * inv4
                else:
                    for i in range(n):
                        for j in range(n):
                            dH[d, i, j] += dWW[i, j] * inv2
            if eff_order == 2:
                inv4 = 1.0 / (4.0 * emf * emf)
                t2h = (np.dot(np.dot(W, H0), Wd)
                       - 0.5 * (np.dot(H0, WW) + np.dot(WW, H0)))
                for i in range(n):
                    for j in range(n):
                        H[i, j] += t2h[i, j] * inv4
        return OK

    # anisotropic model: 3N x 3N over |pi_alpha, m>
    for a in range(n_atoms):
        for b in range(a + 1, n_atoms):
            lx = pos[b, 0] - pos[a, 0]
            ly = pos[b, 1] - pos[a, 1]
            lz = pos[b, 2] - pos[a, 2]
            sx = Q[0, 0] * lx + Q[0, 1] * ly + Q[0, 2] * lz
            sy = Q[1, 0] * lx + Q[1, 1] * ly + Q[1, 2] * lz
            sz = Q[2, 0] * lx + Q[2, 1] * ly + Q[2, 2] * lz
            r2 = sx * sx + sy * sy + sz * sz
            r = math.sqrt(r2)
            r5 = r2 * r2 * r
            r7 = r5 * r2
            xp = complex(sx, sy)
            xm = complex(sx, -sy)
            vals = np.empty(5, dtype=np.complex128)
            nums = np.empty(5, dtype=np.complex128)
            nums[0] = _K2 * xm * xm
            nums[1] = _K1 * sz * xm
            nums[2] = _K0 * (3.0 * sz * sz - r2)
            nums[3] = -_K1 * sz * xp
            nums[4] = _K2 * xp * xp
            for qq in range(5):
                vals[qq] = nums[qq] / r5
            dnum = np.zeros((5, 3), dtype=np.complex128)
            dnum[0, 0] = 2.0 * _K2 * xm
            dnum[0, 1] = -2j * _K2 * xm
            dnum[1, 0] = _K1 * sz
            dnum[1, 1] = -1j * _K1 * sz
            dnum[1, 2] = _K1 * xm
            dnum[2, 0] = -2.0 * _K0 * sx
            dnum[2, 1] = -2.0 * _K0 * sy
            dnum[2, 2] = 4.0 * _K0 * sz
            dnum[3, 0] = -_K1 * sz
            dnum[3, 1] = -1j * _K1 * sz
            dnum[3, 2] = -_K1 * xp
            dnum[4, 0] = 2.0 * _K2 * xp
            dnum[4, 1] = 2j * _K2 * xp
            svec = np.empty(3)
            svec[0] = sx
            svec[1] = sy
            svec[2] = sz
            grads = np.empty((5, 3), dtype=np.complex128)
            for qq in range(5):
                for k in range(3):
                    grads[qq, k] = dnum[qq, k] / r5 - 5.0 * nums[qq] * svec[k] / r7
            for m in range(-1, 2):
                for mp in range(-1, 2):
                    amp = A[m + 1, mp + 1] * d2
                    if amp == 0.0:
                        continue
                    qq = mp - m + 2
                    val = amp * vals[qq]
                    ia = 3 * a + m + 1
                    ib = 3 * b + mp + 1
                    H[ia, ib] = val
                    H[ib, ia] = np.conj(val)
                    # rotate the frame gradient back to lab: glab = Q^T g
                    g0 = amp * grads[qq, 0]
                    g1 = amp * grads[qq, 1]
                    g2 = amp * grads[qq, 2]
                    glx = Q[0, 0] * g0 + Q[1, 0] * g1 + Q[2, 0] * g2
                    gly = Q[0, 1] * g0 + Q[1, 1] * g1 + Q[2, 1] * g2
                    glz = Q[0, 2] * g0 + Q[1, 2] * g1 + Q[2, 2] * g2
                    for d in range(D):
                        at = dof_atom[d]
                        if at == b:
                            g = (glx * dof_axis[d, 0] + gly * dof_axis[d, 1]
                                 + glz * dof_axis[d, 2])
                        elif at == a:
                            g = -(glx * dof_axis[d, 0] + gly * dof_axis[d, 1]
                                  + glz * dof_axis[d, 2])
                        else:
                            continue
                        dH[d, ia, ib] += g
                        dH[d, ib, ia] += np.conj(g)
    for a in range(n_atoms):
        for m in range(-1, 2):
            i = 3 * a + m + 1
            H[i, i] = shift + m * zee
            for d in range(D):
                dH[d, i, i] += gsh[d]
    return OK


@njit(cache=True)
def jacobi_eigh(A):
    """Cyclic Jacobi diagonalization of a complex Hermitian matrix.

    Returns ascending eigenvalues and eigenvector columns, like
    ``numpy.linalg.eigh`` but without the LAPACK call overhead that
    dominates at the matrix sizes used here (n <= 21).  Rotations are
    applied until the off-diagonal norm falls below 1e-14 of the matrix
    scale.
    """
    n = A.shape[0]
    a = A.copy()
    V = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        V[i, i] = 1.0
    scale = 0.0
    for i in range(n):
        for j in range(n):
            m = abs(a[i, j])
            if m > scale:
                scale = m
    if scale == 0.0:
        w = np.zeros(n)
        return w, V
    tol = 1e-14 * scale
    for _sweep in range(60):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                m = abs(a[p, q])
                if m > off:
                    off = m
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                m = abs(apq)
                if m <= tol * 1e-2:
                    continue
                # phase e^{i phi} of the pivot and the real rotation angle
                ph = apq / m
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * m)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c * ph          # complex sine
                sc = np.conj(s)
                a[p, p] = app - t * m
                a[q, q] = aqq + t * m
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    if k == p or k == q:
                        continue
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - sc * akq
                    a[k, q] = s * akp + c * akq
                    a[p, k] = np.conj(a[k, p])
                    a[q, k] = np.conj(a[k, q])
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - sc * vkq
                    V[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i].real
    # ascending order (insertion sort with column swaps)
    for i in range(1, n):
        wi = w[i]
        j = i - 1
        while j >= 0 and w[j] > wi:
            j -= 1
        j += 1
        if j != i:
            for k in range(i, j, -1):
                w[k] = w[k - 1]
            w[j] = wi
            col = V[:, i].copy()
            for k in range(i, j, -1):
                for r in range(n):
                    V[r, k] = V[r, k - 1]
            for r in range(n):
                V[r, j] = col[r]
    return w, V


@njit(cache=True)
def eigh_warm(H, Vprev):
    """Diagonalize H starting from the previous step's eigenbasis.

    Rotating H into that basis leaves a nearly diagonal matrix, so the
    Jacobi sweep converges in one or two passes; accuracy is identical to
    the cold solve because the sweeps run to the same off-diagonal
    tolerance.  The small dense products are written out explicitly --
    BLAS dispatch costs more than the arithmetic at these sizes.
    """
    n = H.shape[0]
    T = np.empty((n, n), dtype=np.complex128)    # H Vprev
    for i in range(n):
        for j in range(n):
            acc = complex(0.0, 0.0)
            for k in range(n):
                acc += H[i, k] * Vprev[k, j]
            T[i, j] = acc
    B = np.empty((n, n), dtype=np.complex128)    # Vprev^dag H Vprev
    for i in range(n):
        for j in range(i, n):
            acc = complex(0.0, 0.0)
            for k in range(n):
                acc += np.conj(Vprev[k, i]) * T[k, j]
            if i == j:
                B[i, i] = complex(acc.real, 0.0)
            else:
                B[i, j] = acc
                B[j, i] = np.conj(acc)
    w, R = jacobi_eigh(B)
    V = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            acc = complex(0.0, 0.0)
            for k in range(n):
                acc += Vprev[i, k] * R[k, j]
            V[i, j] = acc
    return w, V


@njit(cache=True)
def _align_columns(Vprev, V):
    """Phase-rotate each column of V to maximize Re<Vprev_k|V_k>."""
    n = V.shape[0]
    for k in range(n):
        zr = 0.0
        zi = 0.0
        for i in range(n):
            p = Vprev[i, k]
            c = V[i, k]
            zr += p.real * c.real + p.imag * c.imag
            zi += p.real * c.imag - p.imag * c.real
        a = math.sqrt(zr * zr + zi * zi)
        if a > 1e-300:
            pr = zr / a
            pi = -zi / a
            for i in range(n):
                c = V[i, k]
                V[i, k] = complex(c.real * pr - c.imag * pi,
                                  c.real * pi + c.imag * pr)


@njit(cache=True)
def _canonical_gauge(V):
    """Rotate each column's largest component onto the positive real axis."""
    n = V.shape[0]
    for k in range(n):
        best = 0
        amax = -1.0
        for i in range(n):
            a = abs(V[i, k])
            if a > amax:
                amax = a
                best = i
        z = V[best, k]
        a = abs(z)
        if a > 1e-300:
            pr = z.real / a
            pi = -z.imag / a
            for i in range(n):
                c = V[i, k]
                V[i, k] = complex(c.real * pr - c.imag * pi,
                                  c.real * pi + c.imag * pr)


@njit(cache=True)
def _coupling_rows(dH, phi, V, rows):
    """rows[d, l] = <phi | dH_d | phi_l> for all reduced coordinates d."""
    D = dH.shape[0]
    n = dH.shape[1]
    for d in range(D):
        u = np.zeros(n, dtype=np.complex128)
        for i in range(n):
            pi = np.conj(phi[i])
            for j in range(n):
                u[j] += pi * dH[d, i, j]
        for l in range(n):
            acc = complex(0.0, 0.0)
            for j in range(n):
                acc += u[j] * V[j, l]
            rows[d, l] = acc


@njit(cache=True)
def _propagate_electronic(c, H0, H1, dt, n_sub):
    """RK4 on i dc/dt = (H(s) - mean-diag) c with H linearly interpolated
    between the step endpoints; the removed mean diagonal is a global
    phase that cancels in every observable.

    The interpolated Hamiltonian is materialized once per RK4 stage so the
    inner loops are plain matrix-vector products.
    """
    n = c.shape[0]
    tr = 0.0
    for i in range(n):
        tr += 0.5 * (H0[i, i].real + H1[i, i].real)
    eb = tr / n
    dt_sub = dt / n_sub
    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty(n, dtype=np.complex128)
    k3 = np.empty(n, dtype=np.complex128)
    k4 = np.empty(n, dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    Ha = np.empty((n, n), dtype=np.complex128)   # H(s) at the left node
    Hm = np.empty((n, n), dtype=np.complex128)   # H(s) at the midpoint
    Hd = np.empty((n, n), dtype=np.complex128)   # (H1 - H0) / n_sub
    for i in range(n):
        for j in range(n):
            Hd[i, j] = (H1[i, j] - H0[i, j]) / n_sub
            Ha[i, j] = H0[i, j]
        Ha[i, i] = Ha[i, i] - eb
    for step in range(n_sub):
        for i in range(n):
            for j in range(n):
                Hm[i, j] = Ha[i, j] + 0.5 * Hd[i, j]
        _apply_h(Ha, c, k1)
        for i in range(n):
            tmp[i] = c[i] + 0.5 * dt_sub * k1[i]
        _apply_h(Hm, tmp, k2)
        for i in range(n):
            tmp[i] = c[i] + 0.5 * dt_sub * k2[i]
        _apply_h(Hm, tmp, k3)
        for i in range(n):
            tmp[i] = c[i] + dt_sub * k3[i]
        for i in range(n):
            for j in range(n):
                Ha[i, j] = Ha[i, j] + Hd[i, j]
        _apply_h(Ha, tmp, k4)
        for i in range(n):
            c[i] += dt_sub / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True, inline="always")
def _apply_h(H, x, out):
    """out = -i H x"""
    n = x.shape[0]
    for i in range(n):
        acc = complex(0.0, 0.0)
        for j in range(n):
            acc += H[i, j] * x[j]
        out[i] = complex(acc.imag, -acc.real)  # multiply by -i


@njit(cache=True)
def run_trajectory_kernel(
        kind, base, dof_atom, dof_axis, Q, A,
        mass, mu2, d2, c6, zee, emf, eff_order,
        q0, v0, c0, zeta0,
        snap_times, dt_base, energy_tol, phase_cap, n_sub_min, gap_floor,
        r_min_abort, max_halvings, max_steps, max_n_sub,
        rng_key, rng_counter0,
        det_atom, det_axis, det_sign, det_pos,
        snap_q, snap_v, snap_c, snap_zeta, snap_uzeta, snap_spectrum,
        snap_adiab, snap_excw,
        det_hit, det_time, det_c, det_phi,
        hop_log):
    """Propagate one trajectory; see module docstring.

    Returns (status, n_steps, n_hops, n_frustrated, n_trivial, n_singular,
    n_skipped, n_log, max_energy_err, max_hop_energy_err, max_norm_err,
    rng_counter).
    """
    D = q0.shape[0]
    n = c0.shape[0]
    n_atoms = base.shape[0]
    n_snaps = snap_times.shape[0]
    n_det = det_atom.shape[0]
    max_log = hop_log.shape[0]

    q = q0.copy()
    v = v0.copy()
    c = c0.copy().astype(np.complex128)
    zeta = zeta0

    pos = np.empty((n_atoms, 3))
    pos_new = np.empty((n_atoms, 3))
    Ha = np.zeros((n, n), dtype=np.complex128)
    Hb = np.zeros((n, n), dtype=np.complex128)
    dHa = np.zeros((D, n, n), dtype=np.complex128)
    dHb = np.zeros((D, n, n), dtype=np.complex128)
    rows = np.zeros((D, n), dtype=np.complex128)
    ctil = np.zeros(n, dtype=np.complex128)

    positions_from_reduced(base, dof_atom, dof_axis, q, pos)
    st = build_h(kind, pos, dof_atom, dof_axis, Q, A, mu2, d2, c6, zee, emf,
                 eff_order, r_min_abort, Ha, dHa)
    if st != OK:
        return (st, 0, 0, 0, 0, 0, 0, 0, 0.0, 0.0, 0.0, rng_counter0)
    w, V = jacobi_eigh(Ha)
    _canonical_gauge(V)

    _coupling_rows(dHa, V[:, zeta].copy(), V, rows)
    acur = np.empty(D)
    for d in range(D):
        acur[d] = -rows[d, zeta].real / mass

    ke = 0.0
    for d in range(D):
        ke += v[d] * v[d]
    E = 0.5 * mass * ke + w[zeta]
    E0 = E

    counter = rng_counter0
    t = 0.0
    cur_dt = dt_base
    isnap = 0
    n_steps = 0
    n_hops = 0
    n_frust = 0
    n_trivial = 0
    n_singular = 0
    n_skipped = 0
    n_log = 0
    max_e_err = 0.0
    max_hop_err = 0.0
    max_norm_err = 0.0
    status = OK

    # record t = 0 snapshot
    if n_snaps > 0 and snap_times[0] <= 1e-300:
        _record(snap_q, snap_v, snap_c, snap_zeta, snap_uzeta, snap_spectrum,
                snap_adiab, snap_excw, 0, q, v, c, zeta, w, V, kind, n_atoms)
        isnap = 1

    while isnap < n_snaps:
        if n_steps >= max_steps:
            status = ABORT_MAX_STEPS
            break
        dt_try = cur_dt
        remaining = snap_times[isnap] - t
        if dt_try > remaining:
            dt_try = remaining
        halvings = 0
        relabel = False
        zeta_try = zeta
        drift = 0.0
        while True:
            zeta_try = zeta
            relabel = False
            qn = np.empty(D)
            for d in range(D):
                qn[d] = q[d] + v[d] * dt_try + 0.5 * acur[d] * dt_try * dt_try
            positions_from_reduced(base, dof_atom, dof_axis, qn, pos_new)
            st = build_h(kind, pos_new, dof_atom, dof_axis, Q, A, mu2, d2,
                         c6, zee, emf, eff_order, r_min_abort, Hb, dHb)
            if st != OK:
                status = st
                break
            w_new, V_new = eigh_warm(Hb, V)
            _align_columns(V, V_new)
            # trivial-crossing detection on the active surface: does the
            # old active exciton overlap a different new column most?
            best = zeta
            obest = -1.0
            for l in range(n):
                zr = 0.0
                zi = 0.0
                for i in range(n):
                    p = V[i, zeta]
                    cc = V_new[i, l]
                    zr += p.real * cc.real + p.imag * cc.imag
                    zi += p.real * cc.imag - p.imag * cc.real
                o = zr * zr + zi * zi
                if o > obest:
                    obest = o
                    best = l
            if best != zeta:
                relabel = True
                zeta_try = best
            _coupling_rows(dHb, V_new[:, zeta_try].copy(), V_new, rows)
            anew = np.empty(D)
            for d in range(D):
                anew[d] = -rows[d, zeta_try].real / mass
            vn = np.empty(D)
            for d in range(D):
                vn[d] = v[d] + 0.5 * (acur[d] + anew[d]) * dt_try
            ke = 0.0
            for d in range(D):
                ke += vn[d] * vn[d]
            ke *= 0.5 * mass
            e_new = ke + w_new[zeta_try]
            if relabel:
                k_target = E - w_new[zeta_try]
                if k_target > 0.0 and ke > 0.0:
                    f = math.sqrt(k_target / ke)
                    for d in range(D):
                        vn[d] *= f
                    e_new = E
                else:
                    # cannot pay the label jump: stay adiabatic
                    relabel = False
                    zeta_try = zeta
                    _coupling_rows(dHb, V_new[:, zeta_try].copy(), V_new, rows)
                    for d in range(D):
                        anew[d] = -rows[d, zeta_try].real / mass
                    for d in range(D):
                        vn[d] = v[d] + 0.5 * (acur[d] + anew[d]) * dt_try
                    ke = 0.0
                    for d in range(D):
                        ke += vn[d] * vn[d]
                    ke *= 0.5 * mass
                    e_new = ke + w_new[zeta_try]
            drift = abs(e_new - E)
            scale = abs(E)
            if scale < 1e-300:
                scale = 1e-300
            need_halve = (not math.isfinite(e_new)) or drift > energy_tol * scale
            if not need_halve:
                # small-gap regions: halve until the coupling rotation per
                # step is resolved.  Only pairs whose relative phase also
                # evolves within the step need resolving: a much slower
                # pair is degenerate on the step timescale (sudden limit,
                # left to the hop machinery and the relabel tracker).
                for l in range(n):
                    if l == zeta_try:
                        continue
                    gap = abs(w_new[l] - w_new[zeta_try])
                    if gap <= gap_floor or gap * dt_try < 0.05:
                        continue
                    kap = complex(0.0, 0.0)
                    for d in range(D):
                        kap += vn[d] * rows[d, l]
                    ak = abs(kap)
                    if gap * gap < 10.0 * ak and ak * dt_try / gap > 0.1:
                        need_halve = True
                        break
            if need_halve and halvings < max_halvings:
                dt_try *= 0.5
                halvings += 1
                continue
            if not math.isfinite(e_new):
                status = ABORT_NONFINITE
            break
        if status != OK:
            break

        # accept the nuclear step; propagate the electronic amplitudes
        span = (w[n - 1] - w[0] + w_new[n - 1] - w_new[0]) * 0.5
        n_sub = n_sub_min
        want = int(0.5 * span * dt_try / phase_cap) + 1
        if want > n_sub:
            n_sub = want
        if n_sub > max_n_sub:
            n_sub = max_n_sub
        _propagate_electronic(c, Ha, Hb, dt_try, n_sub)
        nrm = 0.0
        for i in range(n):
            nrm += c[i].real * c[i].real + c[i].imag * c[i].imag
        nrm_err = abs(math.sqrt(nrm) - 1.0)
        if nrm_err > max_norm_err:
            max_norm_err = nrm_err

        t += dt_try
        n_steps += 1
        q = qn
        v = vn
        for i in range(n_atoms):
            for k in range(3):
                pos[i, k] = pos_new[i, k]
        tmpH = Ha
        Ha = Hb
        Hb = tmpH
        tmpdH = dHa
        dHa = dHb
        dHb = tmpdH
        w = w_new
        V = V_new
        acur = anew
        if relabel:
            old = zeta
            zeta = zeta_try
            n_trivial += 1
            if n_log < max_log:
                hop_log[n_log, 0] = t
                hop_log[n_log, 1] = old
                hop_log[n_log, 2] = zeta
                hop_log[n_log, 3] = TRIVIAL_CROSSING
                n_log += 1
        E = e_new
        err = abs(E - E0)
        if err > max_e_err:
            max_e_err = err

        # fewest-switches hop attempt
        x = uniform(rng_key, counter)
        counter += np.uint64(1)
        for i in range(n):
            acc = complex(0.0, 0.0)
            for j in range(n):
                acc += np.conj(V[j, i]) * c[j]
            ctil[i] = acc
        amm = ctil[zeta].real ** 2 + ctil[zeta].imag ** 2
        if amm < 1e-12:
            n_skipped += 1
            if n_log < max_log:
                hop_log[n_log, 0] = t
                hop_log[n_log, 1] = zeta
                hop_log[n_log, 2] = -1.0
                hop_log[n_log, 3] = HOP_SKIPPED
                n_log += 1
        else:
            cum = 0.0
            target = -1
            for l in range(n):
                if l == zeta:
                    continue
                du = w[zeta] - w[l]
                if abs(du) < gap_floor:
                    n_singular += 1
                    continue
                vf = complex(0.0, 0.0)
                for d in range(D):
                    vf += v[d] * np.conj(rows[d, l])
                vf /= du
                a_lz = ctil[l] * np.conj(ctil[zeta])
                b = -2.0 * (np.conj(a_lz) * vf).real
                g = b * dt_try / amm
                if g > 0.0:
                    cum += g
                if x < cum:
                    target = l
                    break
            if target >= 0:
                # rescale along the (phase-gauged) real part of the
                # derivative coupling between the two surfaces
                du = w[target] - w[zeta]
                eta = complex(0.0, 0.0)
                Fv = np.empty(D, dtype=np.complex128)
                for d in range(D):
                    Fv[d] = rows[d, target] / du
                    eta += v[d] * Fv[d]
                ae = abs(eta)
                if ae > 1e-300:
                    pr = eta.real / ae
                    pi = -eta.imag / ae
                else:
                    pr = 1.0
                    pi = 0.0
                u = np.empty(D)
                un = 0.0
                for d in range(D):
                    u[d] = Fv[d].real * pr - Fv[d].imag * pi
                    un += u[d] * u[d]
                un = math.sqrt(un)
                if un <= 0.0:
                    n_skipped += 1
                    if n_log < max_log:
                        hop_log[n_log, 0] = t
                        hop_log[n_log, 1] = zeta
                        hop_log[n_log, 2] = target
                        hop_log[n_log, 3] = HOP_SKIPPED
                        n_log += 1
                else:
                    Aq = 0.0
                    for d in range(D):
                        u[d] /= un
                        Aq += v[d] * u[d]
                    Bq = Aq * Aq - 2.0 * du / mass
                    if Bq >= 0.0:
                        sq = math.sqrt(Bq)
                        dv = Aq + sq if Aq < 0.0 else Aq - sq
                        e_pre = E
                        for d in range(D):
                            v[d] -= dv * u[d]
                        old = zeta
                        zeta = target
                        ke = 0.0
                        for d in range(D):
                            ke += v[d] * v[d]
                        E = 0.5 * mass * ke + w[zeta]
                        he = abs(E - e_pre)
                        if he > max_hop_err:
                            max_hop_err = he
                        n_hops += 1
                        # force changes with the active surface
                        _coupling_rows(dHa, V[:, zeta].copy(), V, rows)
                        for d in range(D):
                            acur[d] = -rows[d, zeta].real / mass
                        if n_log < max_log:
                            hop_log[n_log, 0] = t
                            hop_log[n_log, 1] = old
                            hop_log[n_log, 2] = zeta
                            hop_log[n_log, 3] = HOP_ACCEPTED
                            n_log += 1
                    else:
                        n_frust += 1
                        if n_log < max_log:
                            hop_log[n_log, 0] = t
                            hop_log[n_log, 1] = zeta
                            hop_log[n_log, 2] = target
                            hop_log[n_log, 3] = HOP_FRUSTRATED
                            n_log += 1

        # snapshot exactly at the clipped step boundary
        if abs(t - snap_times[isnap]) <= 1e-6 * dt_base:
            _record(snap_q, snap_v, snap_c, snap_zeta, snap_uzeta,
                    snap_spectrum, snap_adiab, snap_excw, isnap, q, v, c,
                    zeta, w, V, kind, n_atoms)
            isnap += 1

        # detectors: first crossing of each plane
        for k in range(n_det):
            if det_hit[k] == 0:
                val = pos[det_atom[k], det_axis[k]]
                if det_sign[k] * (val - det_pos[k]) >= 0.0:
                    det_hit[k] = 1
                    det_time[k] = t
                    for i in range(n):
                        det_c[k, i] = c[i]
                        det_phi[k, i] = V[i, zeta]

        # step-size control: local energy error of velocity Verlet scales
        # as dt^3, so aim the next step at half the tolerance
        target = 0.5 * energy_tol * max(abs(E), 1e-300)
        if drift > 1e-300:
            factor = 0.95 * (target / drift) ** (1.0 / 3.0)
            if factor < 0.3:
                factor = 0.3
            elif factor > 2.0:
                factor = 2.0
        else:
            factor = 2.0
        cur_dt = min(dt_try * factor, dt_base)

    return (status, n_steps, n_hops, n_frust, n_trivial, n_singular,
            n_skipped, n_log, max_e_err, max_hop_err, max_norm_err, counter)


@njit(cache=True)
def _record(snap_q, snap_v, snap_c, snap_zeta, snap_uzeta, snap_spectrum,
            snap_adiab, snap_excw, i, q, v, c, zeta, w, V, kind, n_atoms):
    n = w.shape[0]
    for d in range(q.shape[0]):
        snap_q[i, d] = q[d]
        snap_v[i, d] = v[d]
    for j in range(n):
        snap_c[i, j] = c[j]
        snap_spectrum[i, j] = w[j]
        acc = complex(0.0, 0.0)
        for k in range(n):
            acc += np.conj(V[k, j]) * c[k]
        snap_adiab[i, j] = acc.real * acc.real + acc.imag * acc.imag
    snap_zeta[i] = zeta
    snap_uzeta[i] = w[zeta]
    if kind == 1:
        for a in range(n_atoms):
            tot = 0.0
            for m in range(3):
                z = V[3 * a + m, zeta]
                tot += z.real * z.real + z.imag * z.imag
            snap_excw[i, a] = tot
    else:
        for a in range(n_atoms):
            z = V[a, zeta]
            snap_excw[i, a] = z.real * z.real + z.imag * z.imag

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexryd.atomic_data import BOHR_PER_UM
from flexryd.excitons import (ExcitonSet, derivative_coupling, eigensolve,
                              force, linear_trimer_analytic)
from flexryd.geometry import build_tshape
from flexryd.hamiltonian import build_isotropic
from flexryd._engine import jacobi_eigh


def random_hermitian(n, rng, real=False):
    H = rng.normal(size=(n, n))
    if not real:
        H = H + 1j * rng.normal(size=(n, n))
    return H + H.conj().T


def test_eigensolve_dimer():
    V = 0.37
    H = np.array([[0.0, -V], [-V, 0.0]])
    exc = eigensolve(H)
    assert np.allclose(exc.energies, [-V, V])
    # U_plus belongs to the antisymmetric combination for negative
    # amplitude; the global sign is gauge
    plus = exc.states[:, 1]
    assert abs(abs(plus @ np.array([1, -1]) / math.sqrt(2))) == pytest.approx(1.0)


def test_eigensolve_identity_shift():
    rng = np.random.default_rng(0)
    H = random_hermitian(5, rng)
    c = 0.731
    a = eigensolve(H)
    b = eigensolve(H + c * np.eye(5))
    assert np.allclose(b.energies, a.energies + c, atol=1e-12)


def test_eigensolve_contracts():
    rng = np.random.default_rng(1)
    for n in (2, 3, 7, 12):
        H = random_hermitian(n, rng)
        exc = eigensolve(H)
        scale = np.linalg.norm(H)
        assert np.all(np.diff(exc.energies) >= 0)
        res = H @ exc.states - exc.states * exc.energies
        assert np.max(np.abs(res)) < 1e-12 * scale
        gram = exc.states.conj().T @ exc.states
        assert np.max(np.abs(gram - np.eye(n))) < 1e-12
        assert np.sum(exc.energies) == pytest.approx(np.trace(H).real,
                                                     rel=1e-12, abs=1e-12)
    with pytest.raises(ValueError):
        eigensolve(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_eigensolve_phase_alignment():
    rng = np.random.default_rng(2)
    H = random_hermitian(6, rng)
    prev = eigensolve(H)
    cur = eigensolve(H + 1e-6 * random_hermitian(6, rng), prev=prev)
    ov = prev.overlap(cur)
    assert np.all(np.real(np.diag(ov)) > 0.99)


def test_equilateral_trimer_degeneracy():
    # negative amplitude: the top two surfaces intersect
    a = 1e5
    pos = np.array([[0.0, 0, 0], [a, 0, 0], [a / 2, a * math.sqrt(3) / 2, 0]])
    H = np.zeros((3, 3))
    for i in range(3):
        for j in range(i + 1, 3):
            H[i, j] = H[j, i] = -1e6 / a ** 3
    exc = eigensolve(H)
    assert exc.energies[2] - exc.energies[1] < 1e-12 * np.linalg.norm(H)
    # sweep atoms (1, 2) apart symmetrically: with negative amplitude the
    # top two surfaces cross at the equilateral trimer configuration, with
    # positive amplitude they never do
    cfg = build_tshape(2, 2, 0.4211 * 5.25, 5.25, 2.1053 * 5.25)
    dof = cfg.dof_map()
    q0 = dof.reduced_mean(cfg)
    gaps_neg = []
    gaps_pos = []
    for x in np.linspace(0.0, 9.0, 400) * BOHR_PER_UM:
        q = q0.copy()
        q[0] = q0[0] - x
        q[1] = q0[1] + x
        ham = build_isotropic(cfg, 1019.8, q=q)
        w = np.linalg.eigvalsh(ham.matrix)
        gaps_neg.append(w[3] - w[2])
        w = np.linalg.eigvalsh(-ham.matrix)
        gaps_pos.append(w[3] - w[2])
    scale = 1019.8 ** 2 / (5.25 * BOHR_PER_UM) ** 3
    floor = 0.02 * scale
    sign_changes_neg = np.sum(np.diff(np.sign(np.array(gaps_neg) - floor)) != 0)
    sign_changes_pos = np.sum(np.diff(np.sign(np.array(gaps_pos) - floor)) != 0)
    assert sign_changes_neg >= 2               # dips through the crossing
    assert sign_changes_pos == 0
    assert min(gaps_pos) > 0.2 * scale         # bounded away from zero


def test_linear_trimer_analytic_matches_eigensolve():
    rng = np.random.default_rng(3)
    for _ in range(25):
        v12 = rng.uniform(0.1, 5.0)
        vt = rng.uniform(0.0, 4.0)
        up, um, u0, pp, pm, p0 = linear_trimer_analytic(v12, vt)
        assert up == pytest.approx(v12 * math.sqrt(1 + vt ** 2), rel=1e-14)
        H = v12 * np.array([[0, 1, 0], [1, 0, vt], [0, vt, 0.0]])
        exc = eigensolve(H)
        assert np.allclose(sorted([up, um, u0]), exc.energies, atol=1e-12)
        for vec, u in ((pp, up), (pm, um), (p0, u0)):
            assert np.allclose(H @ vec, u * vec, atol=1e-12)
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-14)


def test_linear_trimer_dimer_limit():
    up, um, u0, pp, pm, p0 = linear_trimer_analytic(1.0, 0.0)
    assert np.allclose(pp, [1 / math.sqrt(2), 1 / math.sqrt(2), 0.0])
    assert np.allclose(p0, [0.0, 0.0, 1.0])


def test_dimer_couplings_vanish():
    # dimer excitons are distance independent, so F12 = 0
    cfg = build_tshape(2, 2, 2.16, 5.25, 8.5)
    from flexryd.geometry import AggregateConfig
    ex = np.array([1.0, 0.0, 0.0])
    dimer = AggregateConfig(
        mean_positions=np.array([[0.0, 0, 0], [2.16, 0, 0]]) * BOHR_PER_UM,
        constraints=(ex, ex), sigma0=0.5 * BOHR_PER_UM)
    ham = build_isotropic(dimer, 1019.8)
    exc = eigensolve(ham.matrix)
    f = derivative_coupling(exc, ham.gradient, 0, 1)
    assert np.max(np.abs(f)) < 1e-18


def test_derivative_coupling_antisymmetry_and_fd():
    cfg = build_tshape(2, 2, 2.16, 5.25, 8.5)
    dof = cfg.dof_map()
    rng = np.random.default_rng(5)
    q0 = dof.reduced_mean(cfg)
    worst = 0.0
    for _ in range(10):
        q = q0 + rng.normal(0, 0.4 * BOHR_PER_UM, 4)
        ham = build_isotropic(cfg, 1019.8, q=q)
        exc = eigensolve(ham.matrix)
        fscale = 0.0
        for k in range(4):
            for l in range(4):
                if k == l:
                    continue
                fkl = derivative_coupling(exc, ham.gradient, k, l)
                fscale = max(fscale, np.max(np.abs(fkl)))
        for k in range(4):
            for l in range(k + 1, 4):
                fkl = derivative_coupling(exc, ham.gradient, k, l)
                flk = derivative_coupling(exc, ham.gradient, l, k)
                assert np.allclose(fkl, -flk, atol=1e-12 * fscale)
        # finite-difference oracle with phase-aligned eigenvectors
        eps = 1e-4
        for d in range(4):
            qp, qm = q.copy(), q.copy()
            qp[d] += eps
            qm[d] -= eps
            excp = eigensolve(build_isotropic(cfg, 1019.8, q=qp).matrix, prev=exc)
            excm = eigensolve(build_isotropic(cfg, 1019.8, q=qm).matrix, prev=exc)
            dphi = (excp.states - excm.states) / (2 * eps)
            fscale = max(np.max(np.abs(dphi)), 1e-300)
            for k in range(4):
                for l in range(4):
                    if k == l:
                        continue
                    fd = exc.states[:, k] @ dphi[:, l]
                    an = derivative_coupling(exc, ham.gradient, k, l)[d]
                    worst = max(worst, abs(an - fd) / fscale)
    assert worst < 1e-4


def test_force_matches_surface_gradient():
    cfg = build_tshape(2, 2, 2.16, 5.25, 8.5, c6_au=-7.6e20)
    dof = cfg.dof_map()
    rng = np.random.default_rng(6)
    q = dof.reduced_mean(cfg) + rng.normal(0, 0.3 * BOHR_PER_UM, 4)
    ham = build_isotropic(cfg, 1019.8, q=q)
    exc = eigensolve(ham.matrix)
    eps = 1e-2
    for k in range(4):
        f = force(exc, ham.gradient, k)
        fscale = np.max(np.abs(f))
        for d in range(4):
            qp, qm = q.copy(), q.copy()
            qp[d] += eps
            qm[d] -= eps
            up = eigensolve(build_isotropic(cfg, 1019.8, q=qp).matrix).energies[k]
            um = eigensolve(build_isotropic(cfg, 1019.8, q=qm).matrix).energies[k]
            fd = -(up - um) / (2 * eps)
            assert f[d] == pytest.approx(fd, rel=1e-6, abs=1e-6 * fscale)


def test_dimer_force_closed_form():
    from flexryd.geometry import AggregateConfig
    ex = np.array([1.0, 0.0, 0.0])
    r = 3.0 * BOHR_PER_UM
    mu, c6 = 1019.8, -7.6e20
    dimer = AggregateConfig(
        mean_positions=np.array([[0.0, 0, 0], [r / BOHR_PER_UM, 0, 0]])
        * BOHR_PER_UM,
        constraints=(ex, ex), sigma0=0.5 * BOHR_PER_UM, c6_au=c6)
    ham = build_isotropic(dimer, mu)
    exc = eigensolve(ham.matrix)
    f_rep = force(exc, ham.gradient, 1)
    # d/dR of U_plus = mu^2/R^3 - C6/R^6 gives the pair force
    # 3 mu^2 / R^4 - 6 C6 / R^7 pushing the atoms apart
    expect = 3 * mu ** 2 / r ** 4 - 6 * c6 / r ** 7
    assert f_rep[1] == pytest.approx(expect, rel=1e-12)
    assert f_rep[0] == pytest.approx(-expect, rel=1e-12)
    # attractive surface: dd force flips, vdW does not
    f_att = force(exc, ham.gradient, 0)
    assert f_att[1] == pytest.approx(-3 * mu ** 2 / r ** 4 - 6 * c6 / r ** 7,
                                     rel=1e-12)


def test_degeneracy_floor_raises():
    H = np.diag([0.0, 1e-16])
    exc = eigensolve(H)
    with pytest.raises(FloatingPointError):
        derivative_coupling(exc, np.zeros((1, 2, 2)), 0, 1)
    with pytest.raises(ValueError):
        derivative_coupling(exc, np.zeros((1, 2, 2)), 1, 1)


@given(st.integers(2, 10), st.integers(0, 10 ** 6))
@settings(max_examples=30, deadline=None)
def test_jacobi_matches_lapack(n, seed):
    rng = np.random.default_rng(seed)
    H = random_hermitian(n, rng)
    w, V = jacobi_eigh(H.astype(complex))
    wr = np.linalg.eigvalsh(H)
    scale = max(1.0, np.abs(H).max())
    assert np.max(np.abs(w - wr)) < 1e-12 * scale
    assert np.max(np.abs(H @ V - V * w)) < 1e-12 * scale
    assert np.max(np.abs(V.conj().T @ V - np.eye(n))) < 1e-12

import math

import numpy as np
import pytest

from flexryd.atomic_data import BOHR_PER_UM, HARTREE_MHZ
from flexryd.geometry import AggregateConfig, build_tshape
from flexryd.hamiltonian import (build_anisotropic, build_effective,
                                 build_isotropic, decoupling_alpha,
                                 h_vdw_scalar, v_aniso, v_iso)

EX = np.array([1.0, 0.0, 0.0])
EY = np.array([0.0, 1.0, 0.0])


def dimer_config(r_um=2.16, c6=0.0, axis=(0, 0, 1)):
    return AggregateConfig(
        mean_positions=np.array([[0.0, 0, 0], [r_um, 0, 0]]) * BOHR_PER_UM,
        constraints=(EX, EX), sigma0=0.5 * BOHR_PER_UM, c6_au=c6,
        quantization_axis=np.asarray(axis, dtype=float))


def fouratom_config(**kw):
    return build_tshape(2, 2, 2.16, 5.25, 8.5, **kw)


def test_v_iso_values():
    assert v_iso(1.0, 1.0) == -1.0
    assert v_iso(2.0, 1.0) == -0.125
    with pytest.raises(ValueError):
        v_iso(0.0, 1.0)


def test_v_iso_unit_conversion_oracle():
    # mu = 3374 a.u. at r = 10 um is about -11.1 MHz
    r = 10.0 * BOHR_PER_UM
    v_mhz = v_iso(r, 3374.0) * HARTREE_MHZ
    assert v_mhz == pytest.approx(-3374.0 ** 2 / r ** 3 * HARTREE_MHZ)
    assert v_mhz == pytest.approx(-11.1, abs=0.05)


def test_h_vdw_scalar():
    pos = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    assert h_vdw_scalar(pos, 0.0) == 0.0
    assert h_vdw_scalar(pos, -1.0) == pytest.approx(1.0)   # repulsive
    # three equidistant atoms: three pair terms
    a = 1.0
    tri = np.array([[0.0, 0, 0], [a, 0, 0], [a / 2, a * math.sqrt(3) / 2, 0]])
    assert h_vdw_scalar(tri, 2.0) == pytest.approx(3 * (-2.0 / a ** 6))


def test_isotropic_dimer_matrix_and_surfaces():
    cfg = dimer_config(c6=0.0)
    r = 2.16 * BOHR_PER_UM
    ham = build_isotropic(cfg, mu=1.0)
    v = 1.0 / r ** 3
    assert np.allclose(ham.matrix, [[0.0, -v], [-v, 0.0]])
    w = np.linalg.eigvalsh(ham.matrix)
    assert np.allclose(w, [-v, v])


def test_isotropic_dimer_with_vdw_surfaces():
    # U_pm = +/- mu^2 / R^3 - C6 / R^6
    rng = np.random.default_rng(8)
    for _ in range(100):
        r = rng.uniform(1e4, 3e5)
        mu = rng.uniform(100, 5000)
        c6 = rng.uniform(-1e21, 1e21)
        cfg = dimer_config(r_um=r / BOHR_PER_UM, c6=c6)
        ham = build_isotropic(cfg, mu=mu)
        w = np.linalg.eigvalsh(ham.matrix)
        expect = np.sort([mu ** 2 / r ** 3 - c6 / r ** 6,
                          -mu ** 2 / r ** 3 - c6 / r ** 6])
        scale = max(np.abs(expect).max(), 1e-300)
        assert np.max(np.abs(w - expect)) < 1e-12 * scale


def test_v_aniso_closed_form_angles():
    d = 7.3
    # perpendicular to the axis: + d^2 / (3 r^3)
    v = v_aniso(0, 0, [2.0, 0.0, 0.0], d)
    assert v == pytest.approx(d * d / (3 * 8.0))
    # parallel: -2 d^2 / (3 r^3)
    v = v_aniso(0, 0, [0.0, 0.0, 2.0], d)
    assert v == pytest.approx(-2 * d * d / (3 * 8.0))
    # magic angle: vanishes
    th = math.acos(1 / math.sqrt(3))
    v = v_aniso(0, 0, [math.sin(th), 0.0, math.cos(th)], d)
    assert abs(v) < 1e-14 * d * d


def test_v_aniso_hermiticity_pairs():
    rng = np.random.default_rng(4)
    for _ in range(20):
        rv = rng.normal(size=3)
        for m in (-1, 0, 1):
            for mp in (-1, 0, 1):
                a = v_aniso(m, mp, rv, 1.0)
                b = v_aniso(mp, m, -rv, 1.0)
                assert a == pytest.approx(np.conj(b), abs=1e-14)


def test_anisotropic_decoupled_m0_block():
    # coplanar atoms, quantization axis perpendicular to the plane: the
    # m = 0 block decouples and equals -2x the isotropic dd part
    cfg = fouratom_config(quantization_axis=(0, 0, 1))
    d = 2498.0
    ham = build_anisotropic(cfg, d, b_gauss=0.0)
    H = ham.matrix
    m0 = H[1::3, 1::3]
    rest = H.copy()
    rest[1::3, 1::3] = 0.0
    cross = rest[1::3, :]
    assert np.max(np.abs(cross[:, [i for i in range(12) if i % 3 != 1]])) < 1e-14
    iso = build_isotropic(cfg, d / math.sqrt(6))
    assert np.allclose(m0, -2.0 * iso.matrix, atol=1e-18)


def test_anisotropic_perpendicular_dimer_block_structure():
    # separation perpendicular to the quantization axis: m = 0 decouples
    cfg = dimer_config(axis=(0, 1, 0))
    ham = build_anisotropic(cfg, 8265.0, b_gauss=0.0)
    H = ham.matrix
    for i in (0, 2):        # m = -1, +1 of atom 1
        assert abs(H[1, 3 + i]) < 1e-14
        assert abs(H[3 + 1, i]) < 1e-14
    assert abs(H[1, 4]) > 0  # m0-m0 coupling present


def test_anisotropic_zeeman_shift():
    cfg = fouratom_config(quantization_axis=(0, 0, 1))
    ham = build_anisotropic(cfg, 2498.0, b_gauss=160.0)
    H = ham.matrix
    shift = (H[2, 2] - H[0, 0]).real * HARTREE_MHZ
    assert shift == pytest.approx(2 * 1.4 * 160.0, rel=1e-9)
    assert np.max(np.abs(H - H.conj().T)) == 0.0


def _fd_gradient_check(build, q0, n_geoms, seed, eps=1e-4, scale_um=0.3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_geoms):
        q = q0 + rng.normal(0, scale_um * BOHR_PER_UM, q0.shape)
        ham = build(q)
        num = 0.0
        den = 0.0
        for d in range(len(q)):
            qp, qm = q.copy(), q.copy()
            qp[d] += eps
            qm[d] -= eps
            fd = (build(qp).matrix - build(qm).matrix) / (2 * eps)
            num = max(num, np.max(np.abs(ham.gradient[d] - fd)))
            den = max(den, np.max(np.abs(fd)))
        worst = max(worst, num / den)
    return worst


def test_gradients_vs_finite_differences_all_models():
    cfg = fouratom_config(c6_au=-7.6e20)
    q0 = cfg.dof_map().reduced_mean(cfg)
    assert _fd_gradient_check(
        lambda q: build_isotropic(cfg, 1019.8, q=q), q0, 17, 1) < 1e-6
    cfg_a = fouratom_config(c6_au=-7.6e20, quantization_axis=(0, 1, 0))
    assert _fd_gradient_check(
        lambda q: build_anisotropic(cfg_a, 2498.0, b_gauss=100.0, q=q),
        q0, 17, 2) < 1e-6
    assert _fd_gradient_check(
        lambda q: build_effective(cfg, 2498.0, 400.0, order=1, q=q),
        q0, 8, 3) < 1e-6
    assert _fd_gradient_check(
        lambda q: build_effective(cfg, 2498.0, 400.0, order=2, q=q),
        q0, 8, 4) < 1e-6


def test_gradients_free_atoms():
    cfg = build_tshape(2, 2, 10.0, 37.0, 51.0, c6_au=-7.6e20,
                       constrained=False, quantization_axis=(0, 1, 0))
    q0 = cfg.dof_map().reduced_mean(cfg)
    assert _fd_gradient_check(
        lambda q: build_anisotropic(cfg, 8250.0, q=q), q0, 8, 5) < 1e-6


def test_force_only_on_excitation_sharing_atoms():
    # an exciton with no weight on atom k feels no resonant force on k
    cfg = fouratom_config()
    ham = build_isotropic(cfg, 1019.8)
    w, V = np.linalg.eigh(ham.matrix)
    dof = cfg.dof_map()
    for k in range(4):
        phi = np.zeros(4)
        others = [j for j in range(4) if j != k]
        phi[others[0]] = 1 / math.sqrt(2)
        phi[others[1]] = -1 / math.sqrt(2)
        for d in range(dof.n_dof):
            if dof.dof_atom[d] != k:
                continue
            force = -phi @ ham.gradient[d].real @ phi
            # subtract the van-der-Waals part (none here: C6 = 0)
            assert abs(force) < 1e-22


def test_effective_limits_and_alpha():
    cfg = fouratom_config()
    d = 2498.0
    iso = build_isotropic(cfg, d / math.sqrt(6))
    norms = []
    fields = np.array([100.0, 200.0, 400.0, 800.0, 1600.0])
    for b in fields:
        eff = build_effective(cfg, d, b, order=1)
        norms.append(np.linalg.norm(eff.matrix - iso.matrix)
                     / np.linalg.norm(iso.matrix))
    # the first-order correction scales exactly as 1/B
    slope = np.polyfit(np.log(fields), np.log(norms), 1)[0]
    assert slope == pytest.approx(-1.0, abs=1e-6)
    assert decoupling_alpha(44, 2.16, 400.0) == pytest.approx(0.266, abs=1e-3)
    with pytest.raises(ValueError):
        build_effective(cfg, d, 0.0)


def test_effective_ww_psd():
    cfg = fouratom_config()
    d = 2498.0
    iso = build_isotropic(cfg, d / math.sqrt(6))
    eff = build_effective(cfg, d, 400.0, order=1)
    corr = eff.matrix - iso.matrix
    assert np.max(np.abs(corr - corr.conj().T)) < 1e-18
    assert np.linalg.eigvalsh(corr).min() > -1e-18   # W W^dag is PSD

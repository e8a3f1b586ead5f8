"""Acceptance suite: every criterion runs at its stated tolerance and
prints one [PASS]/[FAIL] line.

The ensemble-based criteria share module-scoped runs of the bundled
scenarios at the stated trajectory counts (5000 / 3 x 1000 / 2000), which
dominate the suite's runtime (of the order of an hour on two cores).

Two analytic spot checks are expected to fail and are left failing on
purpose: the published trivial-crossing tail probability P(gap < 0.08)
and parts of the trimer gap-minimum closed forms are not reproducible
from their own stated inputs (independent recomputation gives 0.92
rather than 0.96, and a location coefficient about 10 percent off even
asymptotically).  The analysis is recorded in the decisions ledger.
"""

import math
import os

import numpy as np
import pytest

from flexryd.analysis import (trimer_gap_minimum, trimer_gap_scan,
                              trivial_gap_tail, two_level_offresonant)
from flexryd.atomic_data import BOHR_PER_UM, HARTREE_MHZ, scaled_mu
from flexryd.excitons import eigensolve, derivative_coupling, linear_trimer_analytic
from flexryd.fssh import (DynamicsParams, Model, init_electronic,
                          propagate_electronic, run_trajectory, sample_initial)
from flexryd.geometry import AggregateConfig, build_tshape
from flexryd.hamiltonian import (build_anisotropic, build_effective,
                                 build_isotropic, decoupling_alpha)
from flexryd.rng import Stream
from flexryd.runner_io import parse_scenario, run_ensemble

SCENARIOS = os.path.join(os.path.dirname(__file__), "..", "scenarios")

EX = np.array([1.0, 0.0, 0.0])


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def report_all(checks):
    """Print every pass/fail line, then assert them together."""
    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}"
              + (f"  ({detail})" if detail else ""))
    failed = [f"{name}: {detail}" for name, ok, detail in checks if not ok]
    assert not failed, "; ".join(failed)


# ---------------------------------------------------------------------------
# shared ensemble runs


@pytest.fixture(scope="module")
def fouratom_acc():
    sc = parse_scenario(os.path.join(SCENARIOS, "fouratom_iso.scenario"))
    acc, _ = run_ensemble(sc)
    return acc


@pytest.fixture(scope="module")
def switch_accs():
    sc = parse_scenario(os.path.join(SCENARIOS, "sevenatom_star.scenario"))
    out = {}
    for name, a2, dy in (("star", 20.0, 1.5), ("cross", 9.5, 1.5),
                         ("plus", 9.5, 0.0)):
        sub = sc.with_overrides(**{"geometry.a2_um": a2,
                                   "geometry.dy_um": dy})
        acc, _ = run_ensemble(sub)
        out[name] = acc
    return out


@pytest.fixture(scope="module")
def aniso_acc():
    sc = parse_scenario(os.path.join(SCENARIOS, "fouratom_aniso.scenario"))
    acc, _ = run_ensemble(sc)
    return acc


# ---------------------------------------------------------------------------
# 1. analytic oracle equivalence


def test_c1_dimer_surfaces():
    rng = np.random.default_rng(2001)
    worst = 0.0
    for _ in range(100):
        r_um = rng.uniform(1.0, 15.0)
        mu = rng.uniform(100.0, 5000.0)
        c6 = rng.uniform(-1e21, 1e21)
        cfg = AggregateConfig(
            mean_positions=np.array([[0.0, 0, 0], [r_um, 0, 0]]) * BOHR_PER_UM,
            constraints=(EX, EX), sigma0=1.0, c6_au=c6)
        r = r_um * BOHR_PER_UM
        w = eigensolve(build_isotropic(cfg, mu).matrix).energies
        expect = np.sort([mu ** 2 / r ** 3 - c6 / r ** 6,
                          -mu ** 2 / r ** 3 - c6 / r ** 6])
        scale = max(np.max(np.abs(expect)), 1e-300)
        worst = max(worst, np.max(np.abs(w - expect)) / scale)
    report("1a dimer surfaces vs +/- mu^2/R^3 - C6/R^6 (1e-12)",
           worst < 1e-12, f"worst {worst:.2e}")


def test_c1_linear_trimer():
    rng = np.random.default_rng(2002)
    worst = 0.0
    for _ in range(50):
        v12 = rng.uniform(0.1, 3.0)
        vt = rng.uniform(0.0, 3.0)
        H = v12 * np.array([[0, 1, 0], [1, 0, vt], [0, vt, 0.0]])
        num = eigensolve(H)
        up, um, u0, pp, pm, p0 = linear_trimer_analytic(v12, vt)
        worst = max(worst, np.max(np.abs(num.energies
                                         - np.sort([up, um, u0]))))
        for vec, u in ((pp, up), (pm, um), (p0, u0)):
            worst = max(worst, np.max(np.abs(H @ vec - u * vec)))
    report("1b linear trimer closed forms (1e-12)", worst < 1e-12,
           f"worst {worst:.2e}")


def test_c1_equilateral_trimer_gap():
    a = 5.25 * BOHR_PER_UM
    mu = scaled_mu(44)
    pos = np.array([[0.0, 0, 0], [a, 0, 0],
                    [a / 2, a * math.sqrt(3) / 2, 0]])
    H = np.zeros((3, 3))
    for i in range(3):
        for j in range(i + 1, 3):
            H[i, j] = H[j, i] = -mu ** 2 / a ** 3
    w = np.linalg.eigvalsh(H)
    gap = w[2] - w[1]
    ok = gap < 1e-12 * np.linalg.norm(H)
    # positive amplitude: top gap bounded away from zero along the sweep
    cfg = build_tshape(2, 2, 0.4211 * 5.25, 5.25, 2.1053 * 5.25)
    q0 = cfg.dof_map().reduced_mean(cfg)
    gaps = []
    for x in np.linspace(0.0, 9.0, 200) * BOHR_PER_UM:
        q = q0.copy()
        q[0] -= x
        q[1] += x
        wset = np.linalg.eigvalsh(-build_isotropic(cfg, mu, q=q).matrix)
        gaps.append(wset[3] - wset[2])
    scale = mu ** 2 / a ** 3
    ok = ok and min(gaps) > 0.2 * scale
    report("1c equilateral trimer intersection vs positive-amplitude gap",
           ok, f"gap {gap:.2e}, min positive-amplitude gap "
               f"{min(gaps) / scale:.2f} of mu^2/a^3")


def test_c1_two_level_regimes():
    out = two_level_offresonant(0.1, 1.0)
    err = abs(out["e_minus"] - out["e_minus_vdw"]) / abs(out["e_minus_vdw"])
    report("1d two-level asymptotics at V/Delta = 0.1 (< 1 percent)",
           err < 0.01, f"rel dev {err:.4f}")


# ---------------------------------------------------------------------------
# 2. numerical correctness


def test_c2_gradients_vs_finite_differences():
    rng = np.random.default_rng(2003)
    cfg = build_tshape(2, 2, 2.16, 5.25, 8.5, c6_au=-7.6e20)
    cfg_a = build_tshape(2, 2, 2.16, 5.25, 8.5, c6_au=-7.6e20,
                         quantization_axis=(0, 1, 0))
    q0 = cfg.dof_map().reduced_mean(cfg)
    builders = (
        lambda q: build_isotropic(cfg, 1019.8, q=q),
        lambda q: build_anisotropic(cfg_a, 2498.0, b_gauss=100.0, q=q),
        lambda q: build_effective(cfg, 2498.0, 400.0, q=q),
    )
    worst = 0.0
    for build in builders:
        for _ in range(17):   # 3 models x 17 > 50 geometries total
            q = q0 + rng.normal(0, 0.3 * BOHR_PER_UM, 4)
            ham = build(q)
            num = den = 0.0
            for d in range(4):
                qp, qm = q.copy(), q.copy()
                qp[d] += 1e-4
                qm[d] -= 1e-4
                fd = (build(qp).matrix - build(qm).matrix) / 2e-4
                num = max(num, np.max(np.abs(ham.gradient[d] - fd)))
                den = max(den, np.max(np.abs(fd)))
            worst = max(worst, num / den)
    report("2a analytic gradients vs finite differences (< 1e-6)",
           worst < 1e-6, f"worst rel {worst:.2e}")


def test_c2_derivative_couplings_fd():
    rng = np.random.default_rng(2004)
    cfg = build_tshape(2, 2, 2.16, 5.25, 8.5)
    q0 = cfg.dof_map().reduced_mean(cfg)
    worst = 0.0
    worst_anti = 0.0
    for _ in range(10):
        q = q0 + rng.normal(0, 0.4 * BOHR_PER_UM, 4)
        ham = build_isotropic(cfg, 1019.8, q=q)
        exc = eigensolve(ham.matrix)
        for d in range(4):
            qp, qm = q.copy(), q.copy()
            qp[d] += 1e-4
            qm[d] -= 1e-4
            dphi = (eigensolve(build_isotropic(cfg, 1019.8, q=qp).matrix,
                               prev=exc).states
                    - eigensolve(build_isotropic(cfg, 1019.8, q=qm).matrix,
                                 prev=exc).states) / 2e-4
            fscale = np.max(np.abs(dphi))
            for k in range(4):
                for l in range(4):
                    if k == l:
                        continue
                    fd = exc.states[:, k] @ dphi[:, l]
                    an = derivative_coupling(exc, ham.gradient, k, l)[d]
                    worst = max(worst, abs(an - fd) / fscale)
        fscale = 0.0
        for k in range(4):
            for l in range(k + 1, 4):
                fkl = derivative_coupling(exc, ham.gradient, k, l)
                flk = derivative_coupling(exc, ham.gradient, l, k)
                worst_anti = max(worst_anti, np.max(np.abs(fkl + flk)))
                fscale = max(fscale, np.max(np.abs(fkl)))
    report("2b derivative couplings vs aligned finite differences (< 1e-4), "
           "antisymmetry exact to rounding",
           worst < 1e-4 and worst_anti < 1e-12 * fscale,
           f"worst rel {worst:.2e}, antisymmetry residual {worst_anti:.1e}")


def test_c2_energy_conservation_full_run():
    sc = parse_scenario(os.path.join(SCENARIOS, "fouratom_iso.scenario"))
    model = sc.model()
    params = sc.dynamics_params()
    worst_e = worst_hop = 0.0
    for idx in range(3):
        rec = run_trajectory(model, params, master_seed=4001, traj_index=idx)
        assert rec.ok
        e0 = (0.5 * model.config.species.mass * float(rec.v[0] @ rec.v[0])
              + rec.u_zeta[0])
        worst_e = max(worst_e, rec.stats["max_energy_err"] / abs(e0))
        worst_hop = max(worst_hop, rec.stats["max_hop_energy_err"] / abs(e0))
    report("2c energy conservation over the full four-atom run (< 1e-8; "
           "post-hop < 1e-10)", worst_e < 1e-8 and worst_hop < 1e-10,
           f"drift {worst_e:.2e}, hop {worst_hop:.2e}")


def test_c2_frozen_propagation_vs_expm():
    cfg = build_tshape(2, 2, 2.16, 5.25, 8.5)
    ham = build_isotropic(cfg, 1019.8)
    H = ham.matrix.astype(complex)
    w, V = np.linalg.eigh(H)
    c0 = np.zeros(4, dtype=complex)
    c0[0] = 1.0
    t = 3.0e9
    n_sub = max(20, int(0.5 * (w[-1] - w[0]) * t / 2e-3) + 1)
    got = propagate_electronic(c0, H, H, t, n_sub)
    expect = (V @ (np.exp(-1j * w * t) * (V.conj().T @ c0))
              * np.exp(1j * np.mean(np.diag(H)).real * t))
    err = np.max(np.abs(got - expect))
    report("2d frozen-nuclei propagation vs matrix exponential (1e-10)",
           err < 1e-10, f"max dev {err:.2e}")


# ---------------------------------------------------------------------------
# 3. anisotropic initial state


def test_c3_initial_energy():
    sc = parse_scenario(os.path.join(SCENARIOS, "fouratom_aniso.scenario"))
    model = sc.model()
    dof = model.config.dof_map()
    # mean-geometry value vs the dimer closed form d^2 / (3 R12^3)
    q0 = dof.reduced_mean(model.config)
    _, zeta, _, exc = init_electronic(model, q0)
    u0 = exc.energies[zeta] * HARTREE_MHZ
    closed = (model.d_radial ** 2 / (3.0 * (10.0 * BOHR_PER_UM) ** 3)
              * HARTREE_MHZ)
    ok1 = abs(u0 - closed) / closed < 0.02
    # Wigner-sampled mean over 1e4 draws
    stream = Stream(3001, 0)
    total = 0.0
    n = 10 ** 4
    for _ in range(n):
        q, _ = sample_initial(model.config, stream)
        _, zeta, _, exc = init_electronic(model, q)
        total += exc.energies[zeta]
    mean = total / n * HARTREE_MHZ
    ok2 = abs(mean - 22.27) / 22.27 < 0.02
    report("3 anisotropic initial repulsive energy (22.27 MHz +- 2 percent)",
           ok1 and ok2, f"mean geometry {u0:.2f} vs closed {closed:.2f}; "
                        f"Wigner mean {mean:.2f}")


# ---------------------------------------------------------------------------
# 4. four-atom intersection splitting


def test_c4_populations(fouratom_acc):
    pops = fouratom_acc.populations()
    adj, rep = pops[-1, 2], pops[-1, 3]
    ok = abs(adj - 0.5) <= 0.1 and abs(rep - 0.5) <= 0.1
    report("4a final populations 0.5 +- 0.1 (repulsive and adjacent)",
           ok, f"adjacent {adj:.3f}, repulsive {rep:.3f}")


def test_c4_purity(fouratom_acc):
    purity = fouratom_acc.purity()[-1]
    report("4b final purity 0.5 +- 0.05", abs(purity - 0.5) <= 0.05,
           f"purity {purity:.3f}")


def test_c4_consistency(fouratom_acc):
    dev = np.max(np.abs(fouratom_acc.fractions()
                        - fouratom_acc.populations()))
    report("4c |fractions - populations| < 0.05 throughout", dev < 0.05,
           f"max dev {dev:.3f}")


def _count_branches(values, spacing, threshold=0.15, min_sep_um=1.2,
                    smooth_um=1.0):
    box = max(1, int(round(smooth_um / spacing)))
    kernel = np.ones(box) / box
    sm = np.convolve(values, kernel, mode="same")
    floor = threshold * sm.max()
    peaks = []
    for i in range(1, len(sm) - 1):
        if sm[i] >= sm[i - 1] and sm[i] > sm[i + 1] and sm[i] > floor:
            if peaks and (i - peaks[-1]) * spacing < min_sep_um:
                if sm[i] > sm[peaks[-1]]:
                    peaks[-1] = i
            else:
                peaks.append(i)
    return len(peaks)


def test_c4_density_branches(fouratom_acc):
    acc = fouratom_acc
    adj = acc.density("vertical", "partial", surface=2)[-1]
    rep = acc.density("vertical", "partial", surface=3)[-1]
    g = [gr for gr in acc.groups if gr.name == "vertical"][0]
    n_adj = _count_branches(adj, g.grid.spacing)
    # repulsive surface: broad symmetric double lobe
    centers = g.grid.centers()
    sym_dev = (np.trapezoid(np.abs(rep - rep[::-1]), centers)
               / np.trapezoid(rep + rep[::-1], centers))
    norm = np.trapezoid(rep, centers)
    spread = math.sqrt(np.trapezoid(rep * centers ** 2, centers) / norm)
    ok = n_adj == 4 and sym_dev < 0.2 and spread > 3.0
    report("4d adjacent density shows four branches; repulsive broad "
           "and symmetric", ok,
           f"{n_adj} branches, asym {sym_dev:.2f}, spread {spread:.1f} um")


# ---------------------------------------------------------------------------
# 5. gap statistics


def test_c5_trivial_gap_tail():
    _, probs, _ = trivial_gap_tail(2.16, 5.25, 8.5, 0.5, n_samples=10 ** 5,
                                   seed=5001)
    report_all([
        ("5a trivial-crossing tail P(<0.08) = 0.96 +- 0.03",
         abs(probs[0] - 0.96) <= 0.03,
         f"computed {probs[0]:.3f}; published value not reproducible from "
         "its stated inputs, see ledger"),
        ("5a trivial-crossing tail P(<0.022) = 0.52 +- 0.03",
         abs(probs[1] - 0.52) <= 0.03, f"computed {probs[1]:.3f}"),
    ])


@pytest.mark.parametrize("b", [0.88, 0.76])
def test_c5_trimer_gap_minima(b):
    a2 = 5.25 * BOHR_PER_UM
    mu = scaled_mu(44)
    scan = trimer_gap_scan(b, a2, mu, n_points=4001)
    dx_num, de_num = scan.minimum()
    dx_ana, de_ana = trimer_gap_minimum(b, a2, mu)
    report_all([
        (f"5b trimer gap minimum location within 10 percent (b={b})",
         abs(dx_num - dx_ana) / dx_ana <= 0.10,
         f"scan {dx_num / a2:.4f} a2 vs closed form {dx_ana / a2:.4f} a2; "
         "leading-order coefficient biased, see ledger"),
        (f"5b trimer gap minimum value within 10 percent (b={b})",
         abs(de_num - de_ana) / de_ana <= 0.10,
         f"scan {de_num * HARTREE_MHZ:.3f} MHz vs closed form "
         f"{de_ana * HARTREE_MHZ:.3f} MHz"),
    ])


# ---------------------------------------------------------------------------
# 6. exciton switch


def test_c6_star(switch_accs):
    acc = switch_accs["star"]
    _, e45 = acc.detector_entanglement(0, 3, 4)
    _, e67 = acc.detector_entanglement(1, 5, 6)
    report("6a configuration (*): E45 >= 0.85 and E67 <= 0.1",
           e45 >= 0.85 and e67 <= 0.1, f"E45 {e45:.3f}, E67 {e67:.3f}")


def test_c6_cross(switch_accs):
    acc = switch_accs["cross"]
    _, e45 = acc.detector_entanglement(0, 3, 4)
    _, e67 = acc.detector_entanglement(1, 5, 6)
    report("6b configuration (x): E67 >= 0.45 and E45 <= 0.2",
           e67 >= 0.45 and e45 <= 0.2, f"E45 {e45:.3f}, E67 {e67:.3f}")


def test_c6_plus(switch_accs):
    acc = switch_accs["plus"]
    _, e45 = acc.detector_entanglement(0, 3, 4)
    _, e67 = acc.detector_entanglement(1, 5, 6)
    report("6c configuration (+): both entanglements in [0.1, 0.4]",
           0.1 <= e45 <= 0.4 and 0.1 <= e67 <= 0.4,
           f"E45 {e45:.3f}, E67 {e67:.3f}")


# ---------------------------------------------------------------------------
# 7. magnetic-field model


def test_c7_effective_model():
    cfg = build_tshape(2, 2, 2.16, 5.25, 8.5)
    d = 2498.0
    iso = build_isotropic(cfg, d / math.sqrt(6))
    fields = np.geomspace(100.0, 1600.0, 9)
    devs = [np.linalg.norm(build_effective(cfg, d, b).matrix - iso.matrix)
            / np.linalg.norm(iso.matrix) for b in fields]
    slope = np.polyfit(np.log(fields), np.log(devs), 1)[0]
    alpha = decoupling_alpha(44, 2.16, 400.0)
    ok = abs(slope + 1.0) <= 0.1 and abs(alpha - 0.266) <= 0.001
    report("7 effective-model deviation slope -1 +- 0.1; alpha(44, 2.16 um, "
           "400 G) = 0.266 +- 0.001", ok,
           f"slope {slope:.3f}, alpha {alpha:.4f}")


# ---------------------------------------------------------------------------
# 8. unconstrained confinement


def test_c8_confinement(aniso_acc):
    acc = aniso_acc

    def rms_displacement(group, origin):
        g = [gr for gr in acc.groups if gr.name == group][0]
        dens = acc.density(group, "total")[-1]
        centers = g.grid.centers()
        norm = np.trapezoid(dens, centers)
        var = np.trapezoid(dens * (np.abs(centers) - origin) ** 2,
                           centers) / norm
        return math.sqrt(var)

    dy = rms_displacement("vertical", 18.5)
    dz = rms_displacement("vertical_z", 0.0)
    ok1 = dz < 0.1 * dy
    pops = np.sort(acc.populations()[-1])[-2:]
    ok2 = all(abs(p - 0.5) <= 0.15 for p in pops)
    report("8 out-of-plane RMS < 10 percent of in-plane; split 0.5 +- 0.15",
           ok1 and ok2,
           f"z {dz:.2f} um vs y {dy:.2f} um (ratio {dz / dy:.3f}); "
           f"dominant populations {np.round(pops, 3)}")

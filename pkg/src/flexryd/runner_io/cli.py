"""Command-line interface.

Subcommands::

    flexryd run      --config S.scenario [--trajectories N] [--seed S]
                     [--workers W] --out DIR
    flexryd scan     --config S.scenario [--trajectories N] [--workers W]
                     --out DIR
    flexryd analyze  --config S.scenario [--samples N] [--seed S] --out DIR
    flexryd spectrum --config S.scenario --coord K --min-um A --max-um B
                     [--points N] --out DIR

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ..analysis import trimer_gap_minimum, trimer_gap_scan, trivial_gap_tail
from ..atomic_data import BOHR_PER_UM, HARTREE_MHZ
from ..excitons import eigensolve
from .outputs import _write_csv, write_outputs, write_scan
from .runner import param_scan, run_ensemble
from .scenario import ScenarioError, parse_scenario

__all__ = ["main"]


def _add_common(p, seed=True):
    p.add_argument("--config", required=True, help="scenario file")
    p.add_argument("--out", required=True, help="output directory")
    if seed:
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")


def _cmd_run(args) -> int:
    scenario = parse_scenario(args.config)
    acc, manifest = run_ensemble(scenario, n_trajectories=args.trajectories,
                                 workers=args.workers, master_seed=args.seed)
    write_outputs(acc, scenario, args.out, manifest)
    print(f"wrote {args.out}: {acc.n_traj} trajectories, "
          f"{manifest['hops']['accepted']} hops, "
          f"{manifest['trivial_crossings']} trivial crossings")
    return 0


def _cmd_scan(args) -> int:
    scenario = parse_scenario(args.config)
    if not scenario.scan:
        raise ScenarioError("scenario has no [scan] section")
    rows, manifest = param_scan(scenario, workers=args.workers,
                                n_trajectories=args.trajectories)
    write_scan(rows, manifest, args.out)
    print(f"wrote {args.out}/scan.csv: {len(rows)} points")
    return 0


def _cmd_analyze(args) -> int:
    scenario = parse_scenario(args.config)
    g = scenario.geometry
    if g["builder"] != "tshape":
        raise ScenarioError("analyze requires a tshape scenario")
    os.makedirs(args.out, exist_ok=True)
    sigma0 = scenario.dynamics["sigma0_um"]
    levels = np.linspace(0.0, 0.5, 251)
    _, probs, gaps = trivial_gap_tail(g["a1_um"], g["a2_um"], g["d_um"],
                                      sigma0, n_samples=args.samples,
                                      seed=args.seed or 2024, levels=levels)
    path = os.path.join(args.out, "tail_trivial_gap.csv")
    _write_csv(path, ["gap_level", "prob_below", "prob_above"],
               [[lv, p, 1.0 - p] for lv, p in zip(levels, probs)])
    mu = scenario.model().mu
    a2 = g["a2_um"] * BOHR_PER_UM
    rows = []
    scan_rows = []
    for b in (1.0, 0.88, 0.76):
        scan = trimer_gap_scan(b, a2, mu)
        dx_num, de_num = scan.minimum()
        if b < 1.0:
            dx_ana, de_ana = trimer_gap_minimum(b, a2, mu)
        else:
            dx_ana, de_ana = 0.0, 0.0
        rows.append([b, dx_num / a2, de_num * HARTREE_MHZ,
                     dx_ana / a2, de_ana * HARTREE_MHZ])
        for x, gap in zip(scan.coords, scan.gap):
            scan_rows.append([b, x / a2, gap * HARTREE_MHZ])
    _write_csv(os.path.join(args.out, "trimer_gap_minima.csv"),
               ["b", "dx_min_scan_over_a2", "gap_min_scan_mhz",
                "dx_min_analytic_over_a2", "gap_min_analytic_mhz"], rows)
    _write_csv(os.path.join(args.out, "trimer_gap_scan.csv"),
               ["b", "dx_over_a2", "gap_mhz"], scan_rows)
    print(f"wrote {args.out}: tail distribution ({args.samples} samples) "
          f"and trimer gap scans")
    return 0


def _cmd_spectrum(args) -> int:
    scenario = parse_scenario(args.config)
    model = scenario.model()
    dof = model.config.dof_map()
    k = args.coord - 1
    if not 0 <= k < dof.n_dof:
        raise ScenarioError(f"coordinate {args.coord} out of range "
                            f"(1..{dof.n_dof})")
    q0 = dof.reduced_mean(model.config)
    values = np.linspace(args.min_um, args.max_um, args.points) * BOHR_PER_UM
    rows = []
    for val in values:
        q = q0.copy()
        q[k] = val
        exc = eigensolve(model.build(q))
        rows.append([val / BOHR_PER_UM]
                    + list(exc.energies * HARTREE_MHZ))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "spectrum.csv")
    _write_csv(path, ["coord_um"] + [f"U_{i + 1}_mhz"
                                     for i in range(model.dim)], rows)
    print(f"wrote {path}: {args.points} points")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flexryd", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="propagate one trajectory ensemble")
    _add_common(p)
    p.add_argument("--trajectories", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("scan", help="run the scenario's parameter scan")
    _add_common(p, seed=False)
    p.add_argument("--trajectories", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("analyze", help="gap statistics and trimer scans")
    _add_common(p)
    p.add_argument("--samples", type=int, default=10 ** 5)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("spectrum", help="static surface sweep along one "
                                        "reduced coordinate")
    _add_common(p, seed=False)
    p.add_argument("--coord", type=int, required=True,
                   help="1-based reduced coordinate index")
    p.add_argument("--min-um", type=float, required=True)
    p.add_argument("--max-um", type=float, required=True)
    p.add_argument("--points", type=int, default=201)
    p.set_defaults(func=_cmd_spectrum)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failures
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

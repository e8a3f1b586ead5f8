"""Parallel ensemble execution with deterministic reduction.

Trajectories are grouped into fixed-size chunks; workers run whole chunks
and the master merges the chunk accumulators in chunk order.  Because the
chunk size never depends on the worker count, the floating-point
reduction tree -- and therefore every output byte -- is identical for any
number of workers.
"""

from __future__ import annotations

import os
import time
from multiprocessing import get_context

import numpy as np

from .. import __version__
from ..atomic_data import BOHR_PER_UM
from ..fssh import run_trajectory
from ..observables import EnsembleAccumulators
from ..rng import stream_key
from .scenario import Scenario, scan_points

__all__ = ["run_ensemble", "param_scan", "CHUNK_SIZE"]

CHUNK_SIZE = 128


def _positions_of(dof, q_batch):
    """(S, D) reduced coordinates -> (S, N, 3) positions in micrometers."""
    S = q_batch.shape[0]
    pos = np.broadcast_to(dof.base, (S,) + dof.base.shape).copy()
    for d in range(dof.n_dof):
        pos[:, dof.dof_atom[d], :] += q_batch[:, d, None] * dof.dof_axis[d]
    return pos / BOHR_PER_UM


def _new_accumulators(scenario: Scenario) -> EnsembleAccumulators:
    model = scenario.model()
    params = scenario.dynamics_params()
    return EnsembleAccumulators(
        times=params.snap_times(),
        n_basis=model.dim,
        n_atoms=model.config.n_atoms,
        groups=scenario.density_groups(),
        partial_surfaces=scenario.observables["partial_density_surfaces"],
        energy_grid=scenario.energy_grid(),
        pairs=scenario.observables["entanglement_pairs"],
        detectors=len(scenario.detectors()),
    )


def _run_chunk(scenario: Scenario, start: int, stop: int) -> EnsembleAccumulators:
    model = scenario.model()
    params = scenario.dynamics_params()
    detectors = scenario.detectors()
    seed = scenario.ensemble["master_seed"]
    dof = model.config.dof_map()
    acc = _new_accumulators(scenario)
    pos_of = lambda q: _positions_of(dof, q)  # noqa: E731
    for idx in range(start, stop):
        record = run_trajectory(model, params, seed, idx, detectors)
        acc.accumulate(record, positions_of=pos_of)
    return acc


def run_ensemble(scenario: Scenario, n_trajectories: int | None = None,
                 workers: int | None = None, master_seed: int | None = None):
    """Propagate the ensemble and return (accumulators, manifest).

    The result is a deterministic function of (scenario, master seed)
    for any worker count.  A run with more than 1 percent aborted
    trajectories raises RuntimeError.
    """
    if n_trajectories is not None or master_seed is not None:
        ens = dict(scenario.ensemble)
        if n_trajectories is not None:
            ens["n_trajectories"] = int(n_trajectories)
        if master_seed is not None:
            ens["master_seed"] = int(master_seed)
        scenario = scenario.with_overrides(**{"ensemble.n_trajectories":
                                              ens["n_trajectories"],
                                              "ensemble.master_seed":
                                              ens["master_seed"]})
    n_traj = scenario.ensemble["n_trajectories"]
    chunks = [(start, min(start + CHUNK_SIZE, n_traj))
              for start in range(0, n_traj, CHUNK_SIZE)]
    if workers is None:
        env = os.environ.get("FLEXRYD_WORKERS")
        workers = int(env) if env else min(os.cpu_count() or 1, len(chunks))
    t0 = time.monotonic()
    if workers > 1 and len(chunks) > 1:
        ctx = get_context("fork")
        with ctx.Pool(processes=workers) as pool:
            partials = pool.starmap(
                _run_chunk, [(scenario, a, b) for a, b in chunks], chunksize=1)
    else:
        partials = [_run_chunk(scenario, a, b) for a, b in chunks]
    acc = partials[0]
    for part in partials[1:]:
        acc.merge(part)
    wall = time.monotonic() - t0
    aborted = acc.n_aborted
    if aborted > 0.01 * n_traj:
        raise RuntimeError(
            f"{aborted} of {n_traj} trajectories aborted (> 1 percent)")
    manifest = {
        "package": "flexryd",
        "version": __version__,
        "versions": {"numpy": np.__version__,
                     "numba": __import__("numba").__version__},
        "scenario": scenario.path,
        "master_seed": scenario.ensemble["master_seed"],
        "n_trajectories": n_traj,
        "n_aborted": int(aborted),
        "workers": int(workers),
        "wall_time_s": wall,
        "hops": dict(acc.hop_counts),
        "trivial_crossings": int(acc.hop_counts["trivial"]),
        "frustrated_hops": int(acc.hop_counts["frustrated"]),
        "max_energy_err_au": acc.max_energy_err,
        "max_hop_energy_err_au": acc.max_hop_energy_err,
        "max_norm_err": acc.max_norm_err,
    }
    return acc, manifest


def _scan_scalars(scenario: Scenario, acc: EnsembleAccumulators) -> dict:
    out = {}
    pops = acc.populations()
    order = np.argsort(pops[-1])[::-1]
    for rank, k in enumerate(order[:2]):
        out[f"final_pop_{rank + 1}"] = float(pops[-1, k])
    out["final_purity"] = float(acc.purity()[-1])
    pairs = scenario.observables["entanglement_pairs"]
    if len(acc.det_crossings) == 2 and len(pairs) >= 2:
        c_dn, e_dn = acc.detector_entanglement(0, *pairs[0])
        c_up, e_up = acc.detector_entanglement(1, *pairs[1])
        out["E_down"] = float(e_dn)
        out["E_up"] = float(e_up)
        out["C_down"] = float(c_dn)
        out["C_up"] = float(c_up)
    return out


def param_scan(scenario: Scenario, workers: int | None = None,
               n_trajectories: int | None = None):
    """Run the ensemble over the scan grid; returns (rows, manifest).

    Each grid point gets its own master seed derived from
    (master seed, point index), and each row records the parameter values
    plus the designated scalar outputs (detector entanglements, final
    populations, final purity).
    """
    rows = []
    master = scenario.ensemble["master_seed"]
    manifests = []
    for index, overrides in scan_points(scenario):
        sub = scenario.with_overrides(**overrides) if overrides else scenario
        point_seed = int(stream_key(np.uint64(master % 2 ** 64),
                                    np.uint64(index))) % (2 ** 62)
        acc, man = run_ensemble(sub, n_trajectories=n_trajectories,
                                workers=workers, master_seed=point_seed)
        row = {"point": index, "seed": point_seed}
        row.update(overrides)
        row.update(_scan_scalars(sub, acc))
        rows.append(row)
        manifests.append({"point": index, "seed": point_seed,
                          "overrides": overrides,
                          "wall_time_s": man["wall_time_s"]})
    manifest = {
        "package": "flexryd",
        "version": __version__,
        "scenario": scenario.path,
        "master_seed": master,
        "points": manifests,
    }
    return rows, manifest

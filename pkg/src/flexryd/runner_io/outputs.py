"""File output: CSV time series, density matrices on grids, energy
densities, detector table and the machine-readable manifest.

CSV schemas (exact headers; numbers are written with repr-shortest
formatting so reruns with the same seed produce identical bytes):

* populations.csv    -- time_us, pop_1..pop_n, frac_1..frac_n
  (surfaces ascending in energy; pop = ensemble mean adiabatic
  population, frac = fraction of trajectories on that surface)
* purity.csv         -- time_us, purity
* entanglement.csv   -- time_us, then C_a-b and E_a-b per configured pair
* density_<group>_<kind>.csv, kind in {total, excitation, s<k>} --
  header: time_us, then one column per grid point labeled
  <axis>=<center um>; values are densities (1/um) normalized so the
  total density integrates to one per group
* energy_density_u.csv / energy_density_g.csv -- header: time_us, then
  E=<center MHz> columns; normalized per snapshot (1/MHz)
* detectors.csv      -- detector, atom, crossings, fraction,
  concurrence, entanglement
* scan.csv           -- point, seed, <scan parameters...>, scalars
* manifest.json      -- seed, versions, wall time, hop statistics
  (wall_time_s varies between runs; all CSV files are byte-stable)

The optional packed binary (.fxb) starts with a 16-byte header: the
12-byte magic ``FLEXRYDBIN\\x00\\x00`` plus a little-endian uint32
version (currently 1); then uint32 rank, rank x uint32 dimensions, and
the float64 payload in row-major order.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..observables import EnsembleAccumulators
from .scenario import Scenario

__all__ = ["write_outputs", "write_binary", "read_binary", "MAGIC"]

MAGIC = b"FLEXRYDBIN\x00\x00"
BINARY_VERSION = 1


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_binary(path: str, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", BINARY_VERSION))
        fh.write(struct.pack("<I", arr.ndim))
        for d in arr.shape:
            fh.write(struct.pack("<I", d))
        fh.write(arr.tobytes())


def read_binary(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(12)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a flexryd binary file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != BINARY_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        (rank,) = struct.unpack("<I", fh.read(4))
        shape = struct.unpack("<" + "I" * rank, fh.read(4 * rank))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(shape)


def _times_us(acc: EnsembleAccumulators) -> np.ndarray:
    from ..atomic_data import AU_TIME_PER_US
    return acc.times / AU_TIME_PER_US


def write_outputs(acc: EnsembleAccumulators, scenario: Scenario,
                  outdir: str, manifest: dict | None = None) -> list:
    """Write every configured product into ``outdir``; returns the list
    of paths written."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    times = _times_us(acc)
    n = acc.n_basis

    pops = acc.populations()
    fracs = acc.fractions()
    header = (["time_us"] + [f"pop_{k + 1}" for k in range(n)]
              + [f"frac_{k + 1}" for k in range(n)])
    rows = [[times[s]] + list(pops[s]) + list(fracs[s])
            for s in range(len(times))]
    path = os.path.join(outdir, "populations.csv")
    _write_csv(path, header, rows)
    written.append(path)

    purity = acc.purity()
    path = os.path.join(outdir, "purity.csv")
    _write_csv(path, ["time_us", "purity"],
               [[times[s], purity[s]] for s in range(len(times))])
    written.append(path)

    if acc.pairs:
        header = ["time_us"]
        series = []
        for a, b in acc.pairs:
            c, e = acc.concurrence(a, b)
            header += [f"C_{a + 1}-{b + 1}", f"E_{a + 1}-{b + 1}"]
            series += [c, e]
        rows = [[times[s]] + [col[s] for col in series]
                for s in range(len(times))]
        path = os.path.join(outdir, "entanglement.csv")
        _write_csv(path, header, rows)
        written.append(path)

    for g in acc.groups:
        centers = g.grid.centers()
        axis = "xyz"[g.axis]
        labels = [f"{axis}={c:.6g}" for c in centers]
        kinds = [("total", None), ("excitation", None)]
        kinds += [(f"s{s + 1}", s) for s in acc.partial_surfaces]
        for kind, surf in kinds:
            dens = acc.density(g.name, "partial" if surf is not None
                               else kind, surface=surf)
            path = os.path.join(outdir, f"density_{g.name}_{kind}.csv")
            rows = [[times[s]] + list(dens[s]) for s in range(len(times))]
            _write_csv(path, ["time_us"] + labels, rows)
            written.append(path)
            if scenario.observables.get("binary_output"):
                bpath = path[:-4] + ".fxb"
                write_binary(bpath, dens)
                written.append(bpath)

    if acc.hist_u is not None:
        eg = acc.energy_grid
        centers = eg.origin + eg.spacing * np.arange(eg.bins)
        labels = [f"E={c:.6g}" for c in centers]
        for which in ("u", "g"):
            dens = acc.energy_density(which)
            path = os.path.join(outdir, f"energy_density_{which}.csv")
            rows = [[times[s]] + list(dens[s]) for s in range(len(times))]
            _write_csv(path, ["time_us"] + labels, rows)
            written.append(path)

    if len(acc.det_crossings):
        pairs = acc.pairs
        rows = []
        names = ["down", "up"]
        for k in range(len(acc.det_crossings)):
            pair = pairs[k] if k < len(pairs) else (0, 1)
            c, e = acc.detector_entanglement(k, *pair)
            rows.append([names[k] if k < 2 else str(k),
                         pair[0] + 1, pair[1] + 1,
                         int(acc.det_crossings[k]),
                         acc.det_crossings[k] / max(acc.n_traj, 1), c, e])
        path = os.path.join(outdir, "detectors.csv")
        _write_csv(path, ["detector", "atom_a", "atom_b", "crossings",
                          "fraction", "concurrence", "entanglement"], rows)
        written.append(path)

    if manifest is not None:
        path = os.path.join(outdir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    return written


def write_scan(rows: list, manifest: dict, outdir: str) -> list:
    """Scan results as one CSV matrix plus the manifest."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    if rows:
        keys = list(rows[0].keys())
        path = os.path.join(outdir, "scan.csv")
        _write_csv(path, keys, [[r.get(k, "") for k in keys] for r in rows])
        written.append(path)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written

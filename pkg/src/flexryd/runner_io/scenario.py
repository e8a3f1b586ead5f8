"""Scenario files: flat INI sections with typed keys, validated
fail-fast (every problem is reported before any trajectory starts).

Grammar (sections and keys; unknown names are hard errors)::

    [geometry]
    builder = tshape | explicit
    nx, ny = <int>                       # tshape chain sizes
    a1_um, a2_um, d_um = <float>         # spacings
    dy_um = <float>                      # downward shift of the horizontal chain
    dx_offset_um = <float>               # optional, default a1 + d
    constrained = true | false
    positions_um = x y z; x y z; ...     # explicit builder
    constraints = x, y, z, free, ...     # explicit builder, one per atom

    [species]
    nu = <int>
    mass_au, dipole_au, rydberg_constant_mhz,
    tau0_s_ns, tau0_p_ns = <float>       # optional overrides

    [interaction]
    model = isotropic | anisotropic | effective
    c6_au = <float>
    b_gauss = <float>
    quantization_axis = x | y | z | "qx qy qz"
    effective_order = 1 | 2

    [dynamics]
    sigma0_um, t_max_us, snapshot_interval_us, dt_base_us = <float>
    energy_tol, phase_cap_rad, gap_floor_au = <float>
    n_sub_min = <int>
    initial_state = repulsive_dimer | from_top:<k>
    frustrated_hops = keep_velocity

    [ensemble]
    n_trajectories = <int>
    master_seed = <int>

    [observables]
    grid_spacing_um = <float>
    x_range_um, y_range_um, z_range_um = min, max     # optional
    density_groups = name:atoms:axis, ...             # atoms like 1-2 or 1,3
    partial_density_surfaces = 3, 4                   # 1-based ascending
    entanglement_pairs = 4-5, 6-7
    detector_ae_um = <float>                          # optional
    energy_grid_mhz = min, max, spacing               # optional
    binary_output = true | false

    [scan]                                            # optional
    parameters = key, key                             # geometry/interaction keys
    <key> = v1, v2, ...                               # one list per parameter

Atom indices are 1-based in scenario files.
"""

from __future__ import annotations

import configparser
import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..atomic_data import BOHR_PER_UM, LI7, radial_dipole
from ..excitons import DEGENERACY_FLOOR
from ..fssh import Detector, DynamicsParams, Model
from ..geometry import AggregateConfig, build_tshape
from ..observables import DensityGroup, EnergyGrid, SpatialGrid

__all__ = ["Scenario", "ScenarioError", "parse_scenario"]

_AXES = {"x": 0, "y": 1, "z": 2}

_SCHEMA = {
    "geometry": {"builder", "nx", "ny", "a1_um", "a2_um", "d_um", "dy_um",
                 "dx_offset_um", "constrained", "positions_um", "constraints"},
    "species": {"nu", "mass_au", "dipole_au", "rydberg_constant_mhz",
                "tau0_s_ns", "tau0_p_ns"},
    "interaction": {"model", "c6_au", "b_gauss", "quantization_axis",
                    "effective_order"},
    "dynamics": {"sigma0_um", "t_max_us", "snapshot_interval_us", "dt_base_us",
                 "energy_tol", "phase_cap_rad", "n_sub_min", "gap_floor_au",
                 "initial_state", "frustrated_hops"},
    "ensemble": {"n_trajectories", "master_seed"},
    "observables": {"grid_spacing_um", "x_range_um", "y_range_um", "z_range_um",
                    "density_groups", "partial_density_surfaces",
                    "entanglement_pairs", "detector_ae_um", "energy_grid_mhz",
                    "binary_output"},
    "scan": None,   # free keys, validated against its 'parameters' entry
}

_SCANNABLE = {("geometry", k) for k in
              ("a1_um", "a2_um", "d_um", "dy_um", "dx_offset_um")} | \
             {("interaction", k) for k in ("c6_au", "b_gauss")} | \
             {("dynamics", k) for k in ("sigma0_um", "t_max_us")}


class ScenarioError(ValueError):
    """Configuration file failed parsing or validation."""


@dataclass(frozen=True)
class Scenario:
    """Fully validated simulation description."""

    geometry: dict
    species: dict
    interaction: dict
    dynamics: dict
    ensemble: dict
    observables: dict
    scan: dict | None = None
    path: str = "<memory>"

    # -- derived objects -------------------------------------------------

    def species_constants(self):
        sp = LI7
        over = {k: v for k, v in self.species.items()
                if k in ("mass_au", "rydberg_constant_mhz", "tau0_s_ns",
                         "tau0_p_ns") and v is not None}
        rename = {"mass_au": "mass", "rydberg_constant_mhz": "rydberg_constant_mhz",
                  "tau0_s_ns": "tau0_s_ns", "tau0_p_ns": "tau0_p_ns"}
        if over:
            sp = sp.with_overrides(**{rename[k]: v for k, v in over.items()})
        return sp

    def dipole(self) -> float:
        if self.species.get("dipole_au") is not None:
            return float(self.species["dipole_au"])
        return radial_dipole(self.species["nu"], self.species_constants())

    def config(self) -> AggregateConfig:
        g = self.geometry
        sp = self.species_constants()
        qa = self.interaction["quantization_axis"]
        if g["builder"] == "tshape":
            return build_tshape(
                g["nx"], g["ny"], g["a1_um"], g["a2_um"], g["d_um"],
                dy_um=g["dy_um"], dx_offset_um=g.get("dx_offset_um"),
                sigma0_um=self.dynamics["sigma0_um"], species=sp,
                c6_au=self.interaction["c6_au"], constrained=g["constrained"],
                quantization_axis=qa)
        pos = np.asarray(g["positions_um"], dtype=float) * BOHR_PER_UM
        axes = []
        for c in g["constraints"]:
            if c == "free":
                axes.append("free")
            else:
                e = np.zeros(3)
                e[_AXES[c]] = 1.0
                axes.append(e)
        return AggregateConfig(
            mean_positions=pos, constraints=tuple(axes),
            sigma0=self.dynamics["sigma0_um"] * BOHR_PER_UM, species=sp,
            c6_au=self.interaction["c6_au"], quantization_axis=qa)

    def model(self) -> Model:
        d = self.dipole()
        kind = self.interaction["model"]
        return Model(kind=kind, config=self.config(),
                     mu=d / math.sqrt(6.0), d_radial=d,
                     b_gauss=self.interaction["b_gauss"],
                     effective_order=self.interaction["effective_order"])

    def dynamics_params(self) -> DynamicsParams:
        d = self.dynamics
        return DynamicsParams.from_us(
            d["t_max_us"], d["snapshot_interval_us"], d["dt_base_us"],
            energy_tol=d["energy_tol"], phase_cap=d["phase_cap_rad"],
            n_sub_min=d["n_sub_min"], gap_floor=d["gap_floor_au"],
            surface_rule=d["initial_state"])

    def detectors(self):
        """The two entanglement-readout planes on the vertical chain,
        (down, up), when detector_ae_um is set."""
        ae = self.observables.get("detector_ae_um")
        if ae is None:
            return ()
        cfg = self.config()
        g = self.geometry
        if g["builder"] != "tshape":
            raise ScenarioError("detectors require the tshape builder")
        nx, ny = g["nx"], g["ny"]
        ybot = float(cfg.mean_positions[nx, 1])
        ytop = float(cfg.mean_positions[nx + ny - 1, 1])
        ae_b = ae * BOHR_PER_UM
        return (Detector(atom=nx, axis=1, position=ybot - ae_b, direction=-1),
                Detector(atom=nx + ny - 1, axis=1, position=ytop + ae_b,
                         direction=+1))

    def density_groups(self):
        obs = self.observables
        cfg = self.config()
        spacing = obs["grid_spacing_um"]
        pos_um = cfg.mean_positions / BOHR_PER_UM
        groups = []
        for name, atoms, axis in obs["density_groups"]:
            rng = obs.get(f"{'xyz'[axis]}_range_um")
            if rng is None:
                lo = float(np.min(pos_um[:, axis])) - 20.0
                hi = float(np.max(pos_um[:, axis])) + 20.0
            else:
                lo, hi = rng
            bins = max(2, int(round((hi - lo) / spacing)) + 1)
            grid = SpatialGrid(origin=lo, spacing=spacing, bins=bins)
            groups.append(DensityGroup(name=name, atoms=atoms, axis=axis,
                                       grid=grid))
        return tuple(groups)

    def energy_grid(self):
        eg = self.observables.get("energy_grid_mhz")
        if eg is None:
            return None
        lo, hi, spacing = eg
        bins = max(2, int(round((hi - lo) / spacing)) + 1)
        return EnergyGrid(origin=lo, spacing=spacing, bins=bins)

    def with_overrides(self, **flat) -> "Scenario":
        """New scenario with (section, key) overrides given as
        ``section_dot_key=value`` or plain scannable key names."""
        parts = {k: dict(v) if isinstance(v, dict) else v
                 for k, v in self.__dict__.items()}
        for key, value in flat.items():
            if "." in key:
                section, name = key.split(".", 1)
            else:
                section = next((s for s, k in _SCANNABLE if k == key), None)
                name = key
                if section is None:
                    raise ScenarioError(f"{key} is not a scannable parameter")
            parts[section][name] = value
        return Scenario(**{k: parts[k] for k in
                           ("geometry", "species", "interaction", "dynamics",
                            "ensemble", "observables", "scan", "path")})

    def validate(self):
        """Fail fast: build every derived object once."""
        errs = []
        for build in (self.config, self.model, self.dynamics_params,
                      self.detectors, self.density_groups, self.energy_grid):
            try:
                build()
            except ScenarioError as e:
                errs.append(str(e))
            except (ValueError, KeyError) as e:
                errs.append(f"{build.__name__}: {e}")
        n_atoms = None
        try:
            n_atoms = self.config().n_atoms
        except Exception:
            pass
        if n_atoms is not None:
            for name, atoms, axis in self.observables["density_groups"]:
                bad = [a for a in atoms if not 0 <= a < n_atoms]
                if bad:
                    errs.append(f"density group {name}: atom index out of range")
            for a, b in self.observables["entanglement_pairs"]:
                if not (0 <= a < n_atoms and 0 <= b < n_atoms) or a == b:
                    errs.append(f"entanglement pair ({a + 1}, {b + 1}) invalid")
            dim = 3 * n_atoms if self.interaction["model"] == "anisotropic" else n_atoms
            for s in self.observables["partial_density_surfaces"]:
                if not 0 <= s < dim:
                    errs.append(f"partial density surface {s + 1} out of range")
        if errs:
            raise ScenarioError("invalid scenario:\n  " + "\n  ".join(errs))
        return self


# -- parsing -------------------------------------------------------------

def _parse_value(text, kind, errs, where):
    try:
        if kind is bool:
            t = text.strip().lower()
            if t in ("true", "yes", "1"):
                return True
            if t in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        return kind(text)
    except ValueError as e:
        errs.append(f"{where}: {e}")
        return None


def _atom_list(text: str):
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a) - 1, int(b)))
        elif part:
            out.append(int(part) - 1)
    return tuple(out)


def parse_scenario(path: str) -> Scenario:
    """Read and validate one scenario file.

    Raises ScenarioError with a list of every parse and validation
    problem found; a returned Scenario is safe to run.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh, source=path)
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e}")
    except configparser.Error as e:
        raise ScenarioError(f"parse error in {path}: {e}")

    errs = []
    for section in cp.sections():
        if section not in _SCHEMA:
            errs.append(f"unknown section [{section}]")
            continue
        allowed = _SCHEMA[section]
        if allowed is None:
            continue
        for key in cp[section]:
            if key not in allowed:
                errs.append(f"unknown key {key!r} in [{section}]")
    for required in ("geometry", "interaction", "dynamics", "ensemble"):
        if required not in cp:
            errs.append(f"missing section [{required}]")
    if errs:
        raise ScenarioError(f"invalid scenario {path}:\n  " + "\n  ".join(errs))

    def get(section, key, kind, default=None, required=False):
        if section not in cp or key not in cp[section]:
            if required:
                errs.append(f"[{section}] {key} is required")
            return default
        return _parse_value(cp[section][key], kind, errs, f"[{section}] {key}")

    g = {"builder": get("geometry", "builder", str, "tshape")}
    if g["builder"] == "tshape":
        g["nx"] = get("geometry", "nx", int, required=True)
        g["ny"] = get("geometry", "ny", int, required=True)
        g["a1_um"] = get("geometry", "a1_um", float, required=True)
        g["a2_um"] = get("geometry", "a2_um", float, required=True)
        g["d_um"] = get("geometry", "d_um", float, required=True)
        g["dy_um"] = get("geometry", "dy_um", float, 0.0)
        g["dx_offset_um"] = get("geometry", "dx_offset_um", float)
        g["constrained"] = get("geometry", "constrained", bool, True)
    elif g["builder"] == "explicit":
        text = get("geometry", "positions_um", str, required=True)
        try:
            g["positions_um"] = [[float(x) for x in row.split()]
                                 for row in text.split(";") if row.strip()]
        except (ValueError, AttributeError):
            errs.append("[geometry] positions_um: expected 'x y z; x y z; ...'")
        ctext = get("geometry", "constraints", str, required=True) or ""
        g["constraints"] = [c.strip() for c in ctext.split(",") if c.strip()]
        bad = [c for c in g.get("constraints", ()) if c not in ("x", "y", "z", "free")]
        if bad:
            errs.append(f"[geometry] constraints: unknown entries {bad}")
        if ("positions_um" in g and "constraints" in g
                and len(g["positions_um"]) != len(g["constraints"])):
            errs.append("[geometry] one constraint per atom required")
    else:
        errs.append(f"[geometry] unknown builder {g['builder']!r}")

    sp = {
        "nu": get("species", "nu", int, required=True),
        "mass_au": get("species", "mass_au", float),
        "dipole_au": get("species", "dipole_au", float),
        "rydberg_constant_mhz": get("species", "rydberg_constant_mhz", float),
        "tau0_s_ns": get("species", "tau0_s_ns", float),
        "tau0_p_ns": get("species", "tau0_p_ns", float),
    }

    qa_text = get("interaction", "quantization_axis", str, "z") or "z"
    if qa_text in _AXES:
        qa = np.zeros(3)
        qa[_AXES[qa_text]] = 1.0
    else:
        try:
            qa = np.array([float(x) for x in qa_text.split()])
            if qa.shape != (3,):
                raise ValueError
        except ValueError:
            errs.append(f"[interaction] quantization_axis: {qa_text!r}")
            qa = np.array([0.0, 0.0, 1.0])
    inter = {
        "model": get("interaction", "model", str, required=True),
        "c6_au": get("interaction", "c6_au", float, 0.0),
        "b_gauss": get("interaction", "b_gauss", float, 0.0),
        "quantization_axis": qa,
        "effective_order": get("interaction", "effective_order", int, 1),
    }
    if inter["model"] not in ("isotropic", "anisotropic", "effective"):
        errs.append(f"[interaction] unknown model {inter['model']!r}")

    init_text = get("dynamics", "initial_state", str, "repulsive_dimer")
    if init_text and init_text.startswith("from_top:"):
        initial_state = ("from_top", int(init_text.split(":", 1)[1]))
    elif init_text == "repulsive_dimer":
        initial_state = "repulsive_dimer"
    else:
        errs.append(f"[dynamics] initial_state: {init_text!r}")
        initial_state = "repulsive_dimer"
    frus = get("dynamics", "frustrated_hops", str, "keep_velocity")
    if frus != "keep_velocity":
        errs.append(f"[dynamics] frustrated_hops policy {frus!r} not supported")
    dyn = {
        "sigma0_um": get("dynamics", "sigma0_um", float, required=True),
        "t_max_us": get("dynamics", "t_max_us", float, required=True),
        "snapshot_interval_us": get("dynamics", "snapshot_interval_us", float,
                                    required=True),
        "dt_base_us": get("dynamics", "dt_base_us", float, 2e-3),
        "energy_tol": get("dynamics", "energy_tol", float, 1e-9),
        "phase_cap_rad": get("dynamics", "phase_cap_rad", float, 2e-3),
        "n_sub_min": get("dynamics", "n_sub_min", int, 20),
        "gap_floor_au": get("dynamics", "gap_floor_au", float, DEGENERACY_FLOOR),
        "initial_state": initial_state,
        "frustrated_hops": "keep_velocity",
    }

    ens = {
        "n_trajectories": get("ensemble", "n_trajectories", int, required=True),
        "master_seed": get("ensemble", "master_seed", int, required=True),
    }

    obs: dict = {"grid_spacing_um": get("observables", "grid_spacing_um",
                                        float, 0.25)}
    for ax in ("x", "y", "z"):
        text = get("observables", f"{ax}_range_um", str)
        if text is not None:
            try:
                lo, hi = (float(v) for v in text.split(","))
                obs[f"{ax}_range_um"] = (lo, hi)
            except ValueError:
                errs.append(f"[observables] {ax}_range_um: {text!r}")
    groups = []
    gtext = get("observables", "density_groups", str)
    if gtext is None and g["builder"] == "tshape" and "nx" in g and g["nx"]:
        nx, ny = g.get("nx") or 0, g.get("ny") or 0
        groups = [("horizontal", tuple(range(nx)), 0),
                  ("vertical", tuple(range(nx, nx + ny)), 1)]
    elif gtext:
        for item in gtext.split(","):
            try:
                name, atoms, axis = item.strip().split(":")
                groups.append((name.strip(), _atom_list(atoms), _AXES[axis.strip()]))
            except (ValueError, KeyError):
                errs.append(f"[observables] density_groups: bad item {item!r}")
    obs["density_groups"] = groups
    ps_text = get("observables", "partial_density_surfaces", str)
    obs["partial_density_surfaces"] = tuple(
        int(s) - 1 for s in ps_text.split(",")) if ps_text else ()
    ep_text = get("observables", "entanglement_pairs", str)
    pairs = []
    if ep_text:
        for item in ep_text.split(","):
            try:
                a, b = item.strip().split("-")
                pairs.append((int(a) - 1, int(b) - 1))
            except ValueError:
                errs.append(f"[observables] entanglement_pairs: bad item {item!r}")
    obs["entanglement_pairs"] = tuple(pairs)
    obs["detector_ae_um"] = get("observables", "detector_ae_um", float)
    eg_text = get("observables", "energy_grid_mhz", str)
    if eg_text:
        try:
            lo, hi, spacing = (float(v) for v in eg_text.split(","))
            obs["energy_grid_mhz"] = (lo, hi, spacing)
        except ValueError:
            errs.append(f"[observables] energy_grid_mhz: {eg_text!r}")
    obs["binary_output"] = get("observables", "binary_output", bool, False)

    scan = None
    if "scan" in cp:
        ptext = get("scan", "parameters", str, required=True) or ""
        names = [p.strip() for p in ptext.split(",") if p.strip()]
        values = {}
        for name in names:
            sections = [s for s, k in _SCANNABLE if k == name]
            if not sections:
                errs.append(f"[scan] parameter {name!r} is not scannable")
                continue
            if name not in cp["scan"]:
                errs.append(f"[scan] no value list for {name!r}")
                continue
            try:
                values[name] = [float(v) for v in cp["scan"][name].split(",")]
            except ValueError:
                errs.append(f"[scan] {name}: bad value list")
        for key in cp["scan"]:
            if key != "parameters" and key not in names:
                errs.append(f"unknown key {key!r} in [scan]")
        scan = {"parameters": names, "values": values}

    if errs:
        raise ScenarioError(f"invalid scenario {path}:\n  " + "\n  ".join(errs))
    sc = Scenario(geometry=g, species=sp, interaction=inter, dynamics=dyn,
                  ensemble=ens, observables=obs, scan=scan, path=path)
    return sc.validate()


def scan_points(scenario: Scenario):
    """Cartesian product of the scan value lists, in file order.

    Yields (index, {name: value}) pairs; without a scan block a single
    empty override is produced so a 1 x 1 scan equals a plain run.
    """
    if not scenario.scan or not scenario.scan["parameters"]:
        yield 0, {}
        return
    names = scenario.scan["parameters"]
    lists = [scenario.scan["values"][n] for n in names]
    for i, combo in enumerate(itertools.product(*lists)):
        yield i, dict(zip(names, combo))

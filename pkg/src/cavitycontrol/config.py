"""Scenario configuration: YAML document -> validated ``ScenarioConfig``.

Every physical quantity carries its unit in the key name (``cell_width_m``,
``gain_center_hz``...). Validation collects all problems before raising.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .cavity import (CavityConfig, PztDrive, SynthesisSettings, _plan, laser_angular_frequency,
                     pulse_bandwidth)
from .control import AscentConfig, Mixture
from .errors import CavityControlError, ConfigurationError, ValidationError
from .kinetics import TransportRates, TransportState
from .quantum import QuantumComponent
from .spectroscopy import CM_INV_HZ, GasConditions, Mode, MolecularSpecies

__all__ = ["ScenarioConfig", "Grids", "load_config", "parse_config", "config_hash",
           "read_table"]

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "output_dir": "runs/out",
    "beam_radius_m": 0.01,
    "grids": {"x_nodes": None, "omega_points": None, "max_omega_points": 8192},
    "spectroscopy": {"j_tolerance": 1e-8, "j_cap": 400, "hot_band_cap": 2,
                     "hot_band_min_weight": 1e-6, "p_branch": "printed", "voigt_method": "wofz"},
    "ascent": {"mode": "field", "step_size": 1.0, "max_iterations": 50,
               "gradient_tolerance": 1e-8, "line_search": True, "fd_epsilon_m": 1e-9,
               "max_halvings": 30, "growth": 1.5},
    "kinetics": {"method": "DOP853", "initial": {"f_star": 0.0, "f_epi": 0.0, "f_d": 0.0}},
    "enrichment": {"feed_target": 0.5, "feed_total": 1.0},
}


@dataclass(frozen=True)
class Grids:
    time_step: float
    horizon: float
    wavenumber_min: float
    wavenumber_max: float
    wavenumber_step: float
    x_nodes: Optional[int] = None
    omega_points: Optional[int] = None
    max_omega_points: int = 8192

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.time_step))

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_steps) + 0.5) * self.time_step

    @property
    def wavenumbers(self) -> np.ndarray:
        n = int(round((self.wavenumber_max - self.wavenumber_min) / self.wavenumber_step))
        return self.wavenumber_min + self.wavenumber_step * np.arange(n + 1)


@dataclass(frozen=True)
class ScenarioConfig:
    raw: dict
    cavity: CavityConfig
    drive: PztDrive
    mixture: Optional[Mixture]
    species: tuple
    conditions: Optional[GasConditions]
    rates: Optional[TransportRates]
    ascent: AscentConfig
    ascent_mode: str
    drive_samples: Optional[int]
    grids: Grids
    beam_radius: float
    output_dir: Path
    seed: int
    spectroscopy: dict
    kinetics: dict
    enrichment: dict
    constant_sigma: Optional[float] = None
    source: Optional[Path] = None

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        raw = copy.deepcopy(self.raw)
        raw["seed"] = int(seed)
        return parse_config(raw, base_dir=self.source.parent if self.source else None,
                            source=self.source)

    def synthesis_kwargs(self) -> dict:
        return {"n_x": self.grids.x_nodes, "n_omega": self.grids.omega_points,
                "max_omega_points": self.grids.max_omega_points}


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def read_table(path) -> tuple:
    """Two-column whitespace/comma separated text table; ``#`` starts a comment."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigurationError(f"{path}: expected two columns, got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in (given or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


class _Collector:
    """Accumulates problems while building each section."""

    def __init__(self):
        self.problems: List[str] = []

    def section(self, name, build):
        try:
            return build()
        except ValidationError as exc:
            self.problems.extend(f"{name}: {p}" if not p.startswith(name) else p
                                 for p in exc.problems)
        except (ConfigurationError, KeyError, TypeError, ValueError) as exc:
            msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
            self.problems.append(f"{name}: {msg}")
        return None

    def unknown(self, name, block, allowed):
        for key in block or {}:
            if key not in allowed:
                self.problems.append(f"{name}: unknown key {key!r}")


def _complex(v):
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(a, (int, float)) for a in v):
        return complex(v[0], v[1])
    return complex(v)


def _cmatrix(rows):
    return np.array([[_complex(x) for x in row] for row in rows], dtype=complex)


_CAVITY_KEYS = {
    "mode_index": "mode_index", "refraction_index": "refraction_index",
    "cell_width_m": "cell_width", "rest_gap_m": "rest_gap",
    "retro_reflectivity_power": "retro_reflectivity_power",
    "window_reflectivity_power": "window_reflectivity_power",
    "strip_reflectivity_field": "strip_reflectivity_field",
    "window_transmission_field": "window_transmission_field",
    "gain_length_m": "gain_length", "gain_peak_hz_per_m": "gain_peak",
    "gain_center_hz": "gain_center", "gain_fwhm_hz": "gain_fwhm",
    "pulse_period_s": "pulse_period", "jitter_mean_s": "jitter_mean",
    "jitter_std_s": "jitter_std", "field_amplitude_v_per_m": "field_amplitude",
    "flow_offset_m": "flow_offset", "flow_width_m": "flow_width",
    "rest_wavelength_m": "declared_rest_wavelength",
}


def _cavity(block: dict, base_dir: Optional[Path]) -> CavityConfig:
    kw = {_CAVITY_KEYS[k]: v for k, v in block.items() if k in _CAVITY_KEYS}
    table = block.get("window_reflectivity_table_file")
    if table is not None:
        path = Path(table)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        kw["window_reflectivity_table"] = read_table(path)
        kw.setdefault("window_reflectivity_power", float(np.mean(kw["window_reflectivity_table"][1])))
    kw["mode_index"] = int(kw["mode_index"])
    return CavityConfig(**{k: (float(v) if k != "mode_index" and not isinstance(v, tuple) else v)
                           for k, v in kw.items()})


def _drive(block: dict) -> PztDrive:
    kind = block.get("kind", "cosine")
    if kind == "cosine":
        return PztDrive(amplitude=float(block.get("amplitude_m", 0.0)),
                        frequency=float(block.get("frequency_rad_per_s", 0.0)))
    if kind == "sampled":
        return PztDrive.sampled(float(block["dt_s"]), [float(v) for v in block["samples_m"]])
    raise ValidationError(f"drive.kind must be 'cosine' or 'sampled', got {kind!r}")


def _component(block: dict) -> QuantumComponent:
    init = block.get("initial_density")
    if init is not None:
        initial = _cmatrix(init)
    else:
        initial = np.array([_complex(v) for v in block["initial_state"]])
    return QuantumComponent(
        label=str(block["label"]),
        energies=[float(v) for v in block["energies_rad_per_s"]],
        dipole=_cmatrix(block["dipole"]),
        initial_state=initial,
        excited_indices=tuple(block["excited_indices"]),
        weight=float(block.get("weight", 1.0)),
        dipole_units=block.get("dipole_units", "scaled"),
    )


def _species(block: dict) -> MolecularSpecies:
    modes = tuple(Mode(float(m["frequency_hz"]), int(m.get("degeneracy", 1)),
                       float(m.get("anharmonicity", 0.0))) for m in block["modes"])
    return MolecularSpecies(
        name=str(block["name"]),
        abundance=float(block["abundance"]),
        modes=modes,
        upper=tuple(block["upper_quanta"]),
        lower=tuple(block["lower_quanta"]) if "lower_quanta" in block else None,
        rotational_frequency=float(block["rotational_constant_hz"]),
        coriolis=float(block.get("coriolis_xi", 0.0)),
        nu_max=float(block["nu_max_hz"]) if "nu_max_hz" in block else None,
        stretch=float(block["stretch_xi_b"]) if "stretch_xi_b" in block else None,
        molar_mass=float(block["molar_mass_kg_per_mol"]),
        reduced_mass_qq=float(block["reduced_mass_qq_kg_per_mol"]),
        reduced_mass_qg=float(block["reduced_mass_qg_kg_per_mol"]),
        band_intensity={k: float(v) for k, v in block.get("band_intensity_m2_j", {}).items()},
        saturation_intensity=float(block.get("saturation_intensity_w_per_m2", math.inf)),
    )


def parse_config(raw: dict, base_dir: Optional[Path] = None,
                 source: Optional[Path] = None) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration root must be a mapping")
    cfg = _merge(DEFAULTS, raw)
    col = _Collector()
    col.unknown("root", cfg, {"seed", "output_dir", "beam_radius_m", "grids", "cavity", "drive",
                              "mixture", "species", "conditions", "rates", "ascent",
                              "spectroscopy", "kinetics", "enrichment", "sigma_a_m2"})

    cav_block = cfg.get("cavity")
    if cav_block is None:
        col.problems.append("cavity: section is required")
        cavity = None
    else:
        col.unknown("cavity", cav_block, set(_CAVITY_KEYS) | {"window_reflectivity_table_file"})
        cavity = col.section("cavity", lambda: _cavity(cav_block, base_dir))

    drive = col.section("drive", lambda: _drive(cfg.get("drive") or {}))

    g = cfg.get("grids") or {}
    grids = col.section("grids", lambda: Grids(
        time_step=float(g["time_step_s"]), horizon=float(g["horizon_s"]),
        wavenumber_min=float(g["wavenumber_min_cm"]), wavenumber_max=float(g["wavenumber_max_cm"]),
        wavenumber_step=float(g["wavenumber_step_cm"]),
        x_nodes=None if g.get("x_nodes") is None else int(g["x_nodes"]),
        omega_points=None if g.get("omega_points") is None else int(g["omega_points"]),
        max_omega_points=int(g["max_omega_points"])))
    grid_ok = grids is not None
    if grids is not None:
        before = len(col.problems)
        if not (grids.time_step > 0 and grids.horizon > grids.time_step):
            col.problems.append("grids: need 0 < time_step_s < horizon_s")
        if not (grids.wavenumber_step > 0 and grids.wavenumber_max > grids.wavenumber_min > 0):
            col.problems.append("grids: need 0 < wavenumber_min_cm < wavenumber_max_cm and step > 0")
        grid_ok = len(col.problems) == before

    mixture = None
    mix_block = cfg.get("mixture")
    if mix_block:
        comps = [col.section(f"mixture.components[{i}]", lambda b=b: _component(b))
                 for i, b in enumerate(mix_block.get("components", []))]
        if all(c is not None for c in comps) and comps:
            labels = [c.label for c in comps]
            target = mix_block.get("target", labels[0])
            if target not in labels:
                col.problems.append(f"mixture: target {target!r} not among components {labels}")
            else:
                grid = (grids.time_step, grids.n_steps) if grids is not None else None
                mixture = col.section("mixture", lambda: Mixture(comps, labels.index(target), grid))

    species = tuple(s for s in (col.section(f"species[{i}]", lambda b=b: _species(b))
                                for i, b in enumerate(cfg.get("species") or [])) if s is not None)
    if species:
        total = sum(s.abundance for s in species)
        if abs(total - 1.0) > 1e-9:
            col.problems.append(f"species: abundances sum to {total:.12g}, expected 1")
        if mixture is not None and mixture.target.label not in {s.name for s in species}:
            col.problems.append(
                f"cross-reference: mixture target {mixture.target.label!r} has no species block")

    cond = cfg.get("conditions")
    conditions = None
    if cond is not None:
        conditions = col.section("conditions", lambda: GasConditions(
            float(cond["pressure_pa"]), float(cond["temperature_k"]),
            float(cond["molar_fraction"]), float(cond.get("collision_qq_m2", 0.0)),
            float(cond.get("collision_qg_m2", 0.0))))

    rb = cfg.get("rates")
    rates = None
    if rb is not None:
        keys = {"k_df_per_s": "k_df", "k_dd_per_s": "k_dd", "k_vt_per_s": "k_VT",
                "k_vv_per_s": "k_VV", "k_se_per_s": "k_se", "k_th_per_s": "k_th",
                "k_w_per_s": "k_W", "k_w1_per_s": "k_W1", "e_star": "e_star", "e_1": "e_1"}
        col.unknown("rates", rb, set(keys))
        rates = col.section("rates", lambda: TransportRates(
            **{keys[k]: float(v) for k, v in rb.items() if k in keys}))

    ab = cfg["ascent"]
    ascent = col.section("ascent", lambda: AscentConfig(
        step_size=float(ab["step_size"]), max_iterations=int(ab["max_iterations"]),
        gradient_tolerance=float(ab["gradient_tolerance"]), line_search=bool(ab["line_search"]),
        fd_epsilon=float(ab["fd_epsilon_m"]), seed=int(cfg["seed"]),
        max_halvings=int(ab["max_halvings"]), growth=float(ab["growth"])))
    mode = ab.get("mode", "field")
    if mode not in ("field", "drive"):
        col.problems.append("ascent.mode must be 'field' or 'drive'")

    kin = cfg["kinetics"]
    col.section("kinetics.initial", lambda: TransportState.from_integrated(
        float(kin["initial"].get("f_star", 0.0)), float(kin["initial"].get("f_epi", 0.0)),
        float(kin["initial"].get("f_d", 0.0))))

    beam = float(cfg["beam_radius_m"])
    if not beam > 0:
        col.problems.append("beam_radius_m must be > 0")

    sigma_const = cfg.get("sigma_a_m2")
    if not species and sigma_const is None:
        sigma_const = 0.0

    if cavity is not None and drive is not None:
        try:
            drive.check_against(cavity)
        except ValidationError as exc:
            col.problems.append(f"drive: {exc}")
    if cavity is not None and drive is not None and grid_ok:
        _cross_validate(col, cavity, drive, grids, species)

    if col.problems:
        raise ValidationError(
            f"{len(col.problems)} configuration problem(s):\n  " + "\n  ".join(col.problems),
            col.problems)

    return ScenarioConfig(
        raw=raw, cavity=cavity, drive=drive, mixture=mixture, species=species,
        conditions=conditions, rates=rates, ascent=ascent, ascent_mode=mode,
        drive_samples=int(ab["drive_samples"]) if ab.get("drive_samples") else None,
        grids=grids, beam_radius=beam, output_dir=Path(cfg["output_dir"]),
        seed=int(cfg["seed"]), spectroscopy=dict(cfg["spectroscopy"]),
        kinetics=dict(kin), enrichment=dict(cfg["enrichment"]),
        constant_sigma=None if sigma_const is None else float(sigma_const), source=source)


def _cross_validate(col: _Collector, cavity, drive, grids, species) -> None:
    times = grids.midpoints
    try:
        omega = laser_angular_frequency(drive, cavity, times)
        bw = pulse_bandwidth(drive, cavity, times)
    except CavityControlError as exc:
        col.problems.append(f"cavity-field: {exc}")
        return
    if np.max(omega) * grids.time_step >= np.pi:
        col.problems.append(
            f"grids: time_step_s={grids.time_step:g} does not resolve the laser carrier "
            f"(omega_las*dt = {np.max(omega) * grids.time_step:.3g} >= pi)")
    try:
        _plan(cavity, drive, times, SynthesisSettings(
            n_x=grids.x_nodes, n_omega=grids.omega_points,
            max_omega_points=grids.max_omega_points))
    except ConfigurationError as exc:
        col.problems.append(f"grids: cavity-field guard: {exc}")
    if species:
        lo = np.min(omega - 8.0 * bw) / (2 * np.pi * CM_INV_HZ)
        hi = np.max(omega + 8.0 * bw) / (2 * np.pi * CM_INV_HZ)
        wn = grids.wavenumbers
        if wn[0] > lo or wn[-1] < hi:
            col.problems.append(
                f"grids: cavity-field guard: wavenumber grid [{wn[0]:.6g}, {wn[-1]:.6g}] cm^-1 "
                f"must cover the synthesis band [{lo:.6g}, {hi:.6g}] cm^-1")


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigurationError(f"{path}: YAML parse error{where}: {exc}") from exc
    return parse_config(raw, base_dir=path.parent, source=path)

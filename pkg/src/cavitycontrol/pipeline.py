"""Staged scenario runs: synthesize -> spectrum -> optimize -> kinetics.

Each stage writes CSV tables (17 significant digits) into the output
directory and can pick its upstream artifacts from ``stage_input`` instead of
recomputing them. ``summary.json`` holds only numbers derived from the config
and seed, so reruns are byte-identical; timestamps live in ``manifest.json``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field as dc_field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .cavity import (PztDrive, control_field_from_drive, jitter_sequence, pulse_count,
                     synthesize_field)
from .config import ScenarioConfig
from .control import ascend
from .errors import CavityControlError, ConfigurationError, UsageError
from .kinetics import (EnrichmentInput, TransportState, enrichment,
                       excitation_rate, integrate)
from .spectroscopy import CrossSectionSpectrum, cross_section

logger = logging.getLogger(__name__)

__all__ = ["STAGES", "RunManifest", "run_scenario", "emit_plot_data", "load_manifest"]

STAGES = ("synthesize", "spectrum", "optimize", "kinetics", "full")
_FMT = "%.17g"

_HEADERS = {
    "field": ["t_s", "field_v_per_m", "intensity_w_per_m2"],
    "spectrum": ["wavenumber_cm", "sigma_m2"],
    "ascent": ["iteration", "objective", "gradient_sup_norm", "step"],
    "optimized_field": ["t_s", "field_v_per_m"],
    "drive": ["t_s", "displacement_m"],
    "ka": ["t_s", "ka"],
    "kinetics": ["t_s", "f_m", "f_star", "f_epi", "f_d", "ka", "f_d_reference"],
}


@dataclass
class RunManifest:
    stage: str
    config_hash: str
    seed: int
    version: str
    started: str
    finished: str
    output_dir: str
    outputs: Dict[str, str] = dc_field(default_factory=dict)
    config_path: Optional[str] = None

    def path(self, name: str) -> Path:
        if name not in self.outputs:
            raise UsageError(f"stage output {name!r} missing from manifest "
                             f"(stage {self.stage!r} wrote {sorted(self.outputs)})")
        return Path(self.output_dir) / self.outputs[name]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def load_manifest(path) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise UsageError(f"no manifest at {path}")
    return RunManifest(**json.loads(path.read_text()))


# --------------------------------------------------------------------------- table I/O

def _write(out: Path, name: str, columns) -> str:
    fname = f"{name}.csv"
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(out / fname, data, fmt=_FMT, delimiter=",", header=",".join(_HEADERS[name]),
               comments="")
    return fname


def _read(dirs: List[Path], name: str) -> Optional[np.ndarray]:
    for d in dirs:
        p = d / f"{name}.csv"
        if p.exists():
            return np.atleast_2d(np.loadtxt(p, delimiter=",", skiprows=1))
    return None


# --------------------------------------------------------------------------- stage context

class _Run:
    """Shared state for one ``run_scenario`` call."""

    def __init__(self, config: ScenarioConfig, out: Path, stage_input: Optional[Path]):
        self.cfg = config
        self.out = out
        self.stage_input = stage_input
        self.outputs: Dict[str, str] = {}
        self.summary: dict = {"config_hash": config.hash, "seed": config.seed}
        self._sigma_cache: Dict[float, object] = {}
        g = config.grids
        self.times = g.midpoints
        n_jitter = int(np.max(pulse_count(g.horizon, config.cavity.pulse_period))) + 2
        self.jitter = jitter_sequence(config.cavity, config.seed, n_jitter)

    def upstream(self, name: str) -> Optional[np.ndarray]:
        """Table written earlier in this run, else one found in ``stage_input``."""
        dirs = [self.out] if name in self.outputs else []
        dirs += [self.stage_input] if self.stage_input else []
        return _read(dirs, name)

    # sigma_A: a constant or a spectrum evaluated at a given intensity
    def sigma(self, intensity: float):
        cfg = self.cfg
        if cfg.constant_sigma is not None:
            return cfg.constant_sigma
        if intensity not in self._sigma_cache:
            self._sigma_cache[intensity] = cross_section(
                cfg.species, cfg.conditions, cfg.grids.wavenumbers, intensity, **cfg.spectroscopy)
        return self._sigma_cache[intensity]

    @property
    def target_density(self) -> float:
        c = self.cfg.conditions
        return c.target_density if c is not None else 0.0

    def synth_kw(self, sigma) -> dict:
        return dict(self.cfg.synthesis_kwargs(), sigma_a=sigma,
                    target_density=self.target_density, jitter=self.jitter)

    def current_drive(self) -> Tuple[PztDrive, str]:
        """Optimized drive from upstream artifacts if present, else the configured one."""
        tab = self.upstream("drive")
        if tab is not None:
            return PztDrive.sampled(float(tab[1, 0] - tab[0, 0]), tab[:, 1]), "upstream"
        return self.cfg.drive, "config"

    def saturated_sigma(self):
        """Spectrum from upstream artifacts or recomputed at the end-of-window intensity."""
        if self.cfg.constant_sigma is not None:
            return self.cfg.constant_sigma
        tab = self.upstream("spectrum")
        if tab is not None:
            return CrossSectionSpectrum(tab[:, 0], tab[:, 1])
        return self.sigma(self.end_intensity())

    def end_intensity(self) -> float:
        tab = self.upstream("field")
        if tab is None:
            self.stage_synthesize()
            tab = self.upstream("field")
        return float(tab[-1, 2])

    # ----------------------------------------------------------------- stages
    def stage_synthesize(self) -> None:
        fld = synthesize_field(self.cfg.cavity, self.cfg.drive, self.times,
                               **self.synth_kw(self.sigma(0.0)))
        self.outputs["field"] = _write(self.out, "field", [
            fld.time_grid, fld.width_averaged_field, fld.width_averaged_intensity])
        self.summary["synthesize"] = {
            "omega_points": int(fld.n_omega),
            "peak_intensity_w_per_m2": float(np.max(fld.width_averaged_intensity)),
            "end_intensity_w_per_m2": float(fld.width_averaged_intensity[-1]),
        }

    def stage_spectrum(self) -> None:
        intensity = self.end_intensity() if self.cfg.constant_sigma is None else 0.0
        sig = self.sigma(intensity)
        wn = self.cfg.grids.wavenumbers
        values = sig.sigma if isinstance(sig, CrossSectionSpectrum) else np.full_like(wn, sig)
        self.outputs["spectrum"] = _write(self.out, "spectrum", [wn, values])
        self.summary["spectrum"] = {"intensity_w_per_m2": intensity,
                                    "peak_sigma_m2": float(np.max(values))}

    def stage_optimize(self) -> None:
        cfg = self.cfg
        if cfg.mixture is None:
            raise ConfigurationError("optimize stage needs a 'mixture' section")
        g = cfg.grids
        kw = self.synth_kw(self.saturated_sigma())
        if cfg.ascent_mode == "field":
            start = control_field_from_drive(cfg.cavity, cfg.drive, g.time_step, g.n_steps, **kw)
            report = ascend(cfg.mixture, start, config=cfg.ascent)
        else:
            drive = cfg.drive
            if not drive.is_sampled:
                count = cfg.drive_samples or 9
                drive = drive.to_sampled(g.horizon / (count - 1), count)
            report = ascend(cfg.mixture, drive, cfg.cavity, cfg.ascent, dt=g.time_step,
                            n_steps=g.n_steps, **kw)
            d = report.final_drive
            self.outputs["drive"] = _write(self.out, "drive", [d.sample_times, d.samples])
        n = report.objective_history.size
        steps = np.concatenate([[0.0], report.step_history])
        gn = report.gradient_norm_history[:n]
        self.outputs["ascent"] = _write(self.out, "ascent", [
            np.arange(n), report.objective_history, gn, steps[:n]])
        self.outputs["optimized_field"] = _write(self.out, "optimized_field", [
            report.final_field.times + 0.5 * g.time_step, report.final_field.samples])
        self.summary["optimize"] = {
            "mode": cfg.ascent_mode,
            "initial_objective": float(report.objective_history[0]),
            "final_objective": report.final_objective,
            "iterations": int(report.iterations_used),
            "converged": bool(report.converged),
        }
        self.summary["final_objective"] = report.final_objective

    def stage_kinetics(self) -> None:
        cfg = self.cfg
        if cfg.rates is None:
            raise ConfigurationError("kinetics stage needs a 'rates' section")
        kin = cfg.kinetics
        if "dt_s" not in kin or "horizon_s" not in kin:
            raise ConfigurationError("kinetics section needs dt_s and horizon_s")
        sigma = self.saturated_sigma()
        drive, drive_source = self.current_drive()
        fld = synthesize_field(cfg.cavity, drive, self.times, **self.synth_kw(sigma))
        rate = excitation_rate(fld, sigma, cfg.cavity, cfg.beam_radius)
        init = kin["initial"]
        start = TransportState.from_integrated(float(init.get("f_star", 0.0)),
                                               float(init.get("f_epi", 0.0)),
                                               float(init.get("f_d", 0.0)))
        dt, horizon = float(kin["dt_s"]), float(kin["horizon_s"])
        traj = integrate(start, cfg.rates, rate, horizon, dt, method=kin["method"])
        ref = integrate(start, cfg.rates, 0.0, horizon, dt, method=kin["method"])
        self.outputs["ka"] = _write(self.out, "ka", [rate.times, rate.values])
        self.outputs["kinetics"] = _write(self.out, "kinetics", [
            traj.times, *traj.fractions.T, traj.ka, ref.fractions[:, 3]])

        feed_target = float(cfg.enrichment["feed_target"])
        feed_total = float(cfg.enrichment["feed_total"])
        esc_target = feed_target * (1.0 - traj.fractions[-1, 3])
        esc_other = (feed_total - feed_target) * (1.0 - ref.fractions[-1, 3])
        beta = enrichment(EnrichmentInput(feed_target, feed_total, esc_target,
                                          esc_target + esc_other))
        self.summary["kinetics"] = {
            "final_fractions": [float(v) for v in traj.fractions[-1]],
            "reference_final_fractions": [float(v) for v in ref.fractions[-1]],
            "peak_ka": float(np.max(rate.values)),
            "drive_source": drive_source,
            "ka_imaginary_residue": rate.imaginary_residue,
            "material_balance_drift": float(np.max(np.abs(traj.fractions.sum(axis=1) - 1.0))),
        }
        self.summary["beta"] = beta


def run_scenario(config: ScenarioConfig, stage: str, out_dir=None,
                 stage_input=None) -> RunManifest:
    """Run one stage (or ``full``) and write its tables, summary and manifest."""
    if stage not in STAGES:
        raise UsageError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    out = Path(out_dir) if out_dir is not None else config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    run = _Run(config, out, Path(stage_input) if stage_input else None)
    order = ("synthesize", "spectrum", "optimize", "kinetics") if stage == "full" else (stage,)
    for name in order:
        if name == "spectrum" and config.constant_sigma is None and not config.species:
            continue
        if name == "optimize" and config.mixture is None and stage == "full":
            continue
        logger.info("stage %s (config %s)", name, config.hash[:12])
        try:
            getattr(run, f"stage_{name}")()
        except CavityControlError as exc:
            wrapped = type(exc)(f"stage {name!r}, config {config.hash[:12]}: {exc}")
            raise wrapped from exc

    (out / "summary.json").write_text(json.dumps(run.summary, indent=2, sort_keys=True) + "\n")
    run.outputs["summary"] = "summary.json"
    manifest = RunManifest(
        stage=stage, config_hash=config.hash, seed=config.seed, version=__version__,
        started=started, finished=datetime.now(timezone.utc).isoformat(),
        output_dir=str(out), outputs=run.outputs,
        config_path=str(config.source) if config.source else None)
    (out / "manifest.json").write_text(manifest.to_json() + "\n")
    return manifest


# --------------------------------------------------------------------------- plot data

_PLOTS = {
    # which -> (table, x column, [(label, y column)])
    "intensity": ("field", 0, [("intensity", 2)]),
    "spectrum": ("spectrum", 0, [("sigma_a", 1)]),
    "objective": ("ascent", 0, [("objective", 1)]),
    "kinetics": ("kinetics", 0, [("f_m", 1), ("f_star", 2), ("f_epi", 3), ("f_d", 4)]),
}


def emit_plot_data(manifest: RunManifest, which: str) -> List[Tuple[str, float, float]]:
    """Long-format ``(series, x, y)`` rows for one plot."""
    if which not in _PLOTS:
        raise UsageError(f"unknown plot {which!r}; choose from {', '.join(_PLOTS)}")
    table, xcol, series = _PLOTS[which]
    path = manifest.path(table)
    if not path.exists():
        raise UsageError(f"{path} listed in the manifest but missing on disk")
    data = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    return [(label, float(x), float(y)) for label, col in series
            for x, y in zip(data[:, xcol], data[:, col])]

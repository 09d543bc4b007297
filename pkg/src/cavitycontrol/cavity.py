"""PZT drive -> intracavity laser field.

The chain is: resonance condition (wavelength) -> Lorentzian gain line ->
single-pass gain -> pulse bandwidth -> Gaussian spectral envelope, combined
with the pulse-train factor and the multi-pass amplification factor, then
brought back to the time domain and averaged over the gas-flow width.

Conventions
-----------
* Pulse-train sums run over ``j = 0 .. N_p`` (``N_p + 1`` terms) everywhere;
  ``N_p(t) = ceil(t / T_p)``. Pulse ``j`` is centred at ``j T_p + tau_j``.
* ``gain_lineshape`` is the Lorentzian exactly as written, so its peak value is
  ``gain_peak * 2 / gain_fwhm``; ``gain_peak`` is therefore an integrated
  strength [Hz/m], not the on-resonance gain coefficient.
* The width-averaged intensity is ``(c eps0 n / 2) E0^2 <|aleph|^2>_x`` with
  ``aleph`` the complex (analytic) field sum; the real field is
  ``E0 Re <aleph>_x``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.constants import c as C_LIGHT, epsilon_0

from .errors import ConfigurationError, DomainError, NumericError, ValidationError
from .quantum import ControlField

__all__ = [
    "CavityConfig",
    "PztDrive",
    "FieldSpectrum",
    "SynthesisSettings",
    "SynthesizedField",
    "wavelength",
    "laser_angular_frequency",
    "gain_lineshape",
    "single_pass_gain",
    "pulse_bandwidth",
    "envelope_spectrum",
    "train_factor",
    "amplification",
    "absorption_attenuation",
    "synthesize_field",
    "control_field_from_drive",
    "jitter_sequence",
    "pulse_count",
]

FOUR_LN2 = 4.0 * math.log(2.0)
_ENVELOPE_HALF_WIDTH = 8.0      # omega grid spans +- 8 bandwidths
_ALIAS_MARGIN = 12.0            # envelope std-devs kept clear of periodic replicas
_EXP_GUARD = 700.0


@dataclass(frozen=True)
class CavityConfig:
    mode_index: int
    refraction_index: float
    cell_width: float
    rest_gap: float
    retro_reflectivity_power: float
    window_reflectivity_power: float
    strip_reflectivity_field: float
    window_transmission_field: float
    gain_length: float
    gain_peak: float
    gain_center: float
    gain_fwhm: float
    pulse_period: float
    jitter_mean: float = 0.0
    jitter_std: float = 0.0
    field_amplitude: float = 1.0
    flow_offset: float = 0.0
    flow_width: float = 0.0
    # optional tabulated R_W(lambda): (wavelengths [m], reflectivities), linear interpolation
    window_reflectivity_table: Optional[tuple] = None
    declared_rest_wavelength: Optional[float] = None

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValidationError("invalid cavity: " + "; ".join(problems), problems)
        if self.window_reflectivity_table is not None:
            lam, rw = (np.asarray(a, dtype=float) for a in self.window_reflectivity_table)
            object.__setattr__(self, "window_reflectivity_table", (lam, rw))

    def problems(self) -> list:
        out = []
        if int(self.mode_index) != self.mode_index or self.mode_index < 1:
            out.append("cavity.mode_index must be an integer >= 1")
        if not self.refraction_index >= 1.0:
            out.append("cavity.refraction_index must be >= 1")
        for name in ("retro_reflectivity_power", "window_reflectivity_power",
                     "strip_reflectivity_field", "window_transmission_field"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                out.append(f"cavity.{name}={v} outside [0, 1]")
        for name in ("cell_width", "rest_gap", "gain_length", "pulse_period", "flow_width"):
            if not getattr(self, name) > 0:
                out.append(f"cavity.{name} must be > 0")
        if not self.gain_fwhm > 0:
            out.append("cavity.gain_fwhm must be > 0")
        if not self.gain_center > 0:
            out.append("cavity.gain_center must be > 0")
        if self.gain_peak < 0:
            out.append("cavity.gain_peak must be >= 0")
        if self.jitter_std < 0:
            out.append("cavity.jitter_std must be >= 0")
        if self.flow_offset < 0:
            out.append("cavity.flow_offset must be >= 0")
        if self.flow_width > 0 and self.flow_offset + self.flow_width > self.cell_width * (1 + 1e-12):
            out.append("cavity.flow_offset + flow_width exceeds cell_width")
        if self.window_reflectivity_table is not None:
            lam, rw = (np.asarray(a, dtype=float) for a in self.window_reflectivity_table)
            if lam.ndim != 1 or lam.shape != rw.shape or lam.size < 2:
                out.append("cavity.window_reflectivity_table needs two equal-length columns")
            elif np.any(np.diff(lam) <= 0):
                out.append("cavity.window_reflectivity_table wavelengths must increase")
            elif np.any((rw < 0) | (rw > 1)):
                out.append("cavity.window_reflectivity_table values outside [0, 1]")
        if self.declared_rest_wavelength is not None and not out:
            lam0 = 2.0 * self.optical_rest_length / self.mode_index
            if abs(lam0 - self.declared_rest_wavelength) > 1e-9 * lam0:
                out.append(
                    f"resonance condition violated: N*lambda0/2 = "
                    f"{self.mode_index * self.declared_rest_wavelength / 2:.12g} m but "
                    f"n*W_IC + x0 = {self.optical_rest_length:.12g} m")
        return out

    @property
    def optical_rest_length(self) -> float:
        return self.refraction_index * self.cell_width + self.rest_gap

    @property
    def rest_wavelength(self) -> float:
        return 2.0 * self.optical_rest_length / self.mode_index

    @property
    def pass_time(self) -> float:
        """Single traversal time ``W_IC / c``."""
        return self.cell_width / C_LIGHT

    def window_reflectivity(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if self.window_reflectivity_table is None:
            return np.full_like(lam, self.window_reflectivity_power)
        tab_l, tab_r = self.window_reflectivity_table
        return np.interp(lam, tab_l, tab_r)

    def with_updates(self, **kw) -> "CavityConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class PztDrive:
    """PZT deformation ``u(t)``: either ``A cos(Omega t)`` or linearly interpolated samples.

    Sampled drives hold their end values outside ``[0, (M-1) dt]``.
    """

    amplitude: float = 0.0
    frequency: float = 0.0
    dt: Optional[float] = None
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.samples is not None:
            s = np.atleast_1d(np.asarray(self.samples, dtype=float))
            object.__setattr__(self, "samples", s)
            if self.dt is None or not self.dt > 0:
                raise ValidationError("sampled PztDrive needs dt > 0")
            if not np.all(np.isfinite(s)):
                raise ValidationError("PztDrive samples must be finite")
        elif not (np.isfinite(self.amplitude) and np.isfinite(self.frequency)):
            raise ValidationError("PztDrive amplitude/frequency must be finite")

    @classmethod
    def sampled(cls, dt: float, samples) -> "PztDrive":
        return cls(dt=dt, samples=samples)

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    @property
    def sample_times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dt

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.is_sampled:
            if self.samples.size == 1:
                return np.full_like(t, self.samples[0])
            return np.interp(t, self.sample_times, self.samples)
        return self.amplitude * np.cos(self.frequency * t)

    def max_abs(self, horizon: Optional[float] = None) -> float:
        if self.is_sampled:
            return float(np.max(np.abs(self.samples)))
        return abs(self.amplitude)

    def to_sampled(self, dt: float, count: int) -> "PztDrive":
        return PztDrive.sampled(dt, self(np.arange(count) * dt))

    def with_samples(self, samples) -> "PztDrive":
        return PztDrive.sampled(self.dt, samples)

    def check_against(self, cavity: CavityConfig) -> None:
        umax = self.max_abs()
        if umax >= cavity.rest_gap:
            raise ValidationError(f"PZT deformation {umax:g} m is not small against x0")
        if umax >= 0.01 * cavity.rest_gap:
            warnings.warn(f"PZT deformation {umax:g} m exceeds 1% of x0 = {cavity.rest_gap:g} m",
                          stacklevel=2)


@dataclass(frozen=True)
class FieldSpectrum:
    omega_grid: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega_grid, dtype=float)
        if w.size > 2:
            d = np.diff(w)
            if np.max(np.abs(d - d.mean())) > 1e-9 * abs(d.mean()):
                raise ValidationError("FieldSpectrum omega grid must be uniform")
        if not np.all(np.isfinite(self.amplitudes)):
            raise NumericError("FieldSpectrum amplitudes must be finite")


@dataclass(frozen=True)
class SynthesisSettings:
    """Everything besides cavity and drive that fixes the synthesis map."""

    sigma_a: object = 0.0
    target_density: float = 0.0
    jitter: Optional[np.ndarray] = None
    n_x: Optional[int] = None  # None: enough nodes for the carrier phase across the flow
    n_omega: Optional[int] = None
    max_omega_points: int = 8192


@dataclass(frozen=True)
class SynthesizedField:
    time_grid: np.ndarray
    width_averaged_field: np.ndarray
    width_averaged_intensity: np.ndarray
    drive: Optional[PztDrive] = None
    settings: Optional[SynthesisSettings] = None
    n_omega: int = 0

    def __post_init__(self):
        if np.any(self.width_averaged_intensity < 0):
            raise NumericError("negative synthesized intensity")


# --------------------------------------------------------------------------- resonance / gain

def wavelength(drive: PztDrive, cavity: CavityConfig, t) -> np.ndarray:
    """``lambda_las(t) = lambda0 + 2 u(t) / N``."""
    return cavity.rest_wavelength + 2.0 * drive(t) / cavity.mode_index


def laser_angular_frequency(drive: PztDrive, cavity: CavityConfig, t) -> np.ndarray:
    return 2.0 * np.pi * C_LIGHT / wavelength(drive, cavity, t)


def gain_lineshape(cavity: CavityConfig, nu_las) -> np.ndarray:
    """Gain coefficient [1/m] at laser frequency ``nu_las`` [Hz]; peak ``gain_peak * 2 / gain_fwhm``."""
    if not cavity.gain_fwhm > 0:
        raise ValidationError("gain_fwhm must be > 0")
    hw = 0.5 * cavity.gain_fwhm
    nu = np.asarray(nu_las, dtype=float)
    return cavity.gain_peak * hw / ((nu - cavity.gain_center) ** 2 + hw ** 2)


def _gain_from_coefficient(gamma0) -> np.ndarray:
    g = np.asarray(gamma0, dtype=float)
    if np.any(g > _EXP_GUARD):
        raise NumericError(f"single-pass gain exponent gamma0*L = {np.max(g):g} exceeds {_EXP_GUARD}")
    return np.exp(g)


def single_pass_gain(cavity: CavityConfig, drive: PztDrive, t) -> np.ndarray:
    """``G0(t) = exp(gamma0(t) L)``."""
    nu = C_LIGHT / wavelength(drive, cavity, t)
    return _gain_from_coefficient(gain_lineshape(cavity, nu) * cavity.gain_length)


def _loop_gain(cavity: CavityConfig, drive: PztDrive, t) -> np.ndarray:
    lam = wavelength(drive, cavity, t)
    rw = cavity.window_reflectivity(lam)
    g0 = _gain_from_coefficient(gain_lineshape(cavity, C_LIGHT / lam) * cavity.gain_length)
    return np.sqrt(cavity.retro_reflectivity_power * rw) * g0


def bandwidth_from_loop_gain(gap, loop_gain) -> np.ndarray:
    """``(c/x) (1 - g) / (pi sqrt(g))`` with ``g = sqrt(R R_W) G0``."""
    g = np.asarray(loop_gain, dtype=float)
    x = np.asarray(gap, dtype=float)
    if np.any(x <= 0):
        raise ValidationError("optical gap x(t) must stay > 0")
    if np.any(g > 1.0):
        raise DomainError(
            f"sqrt(R R_W) G0 = {np.max(g):.6g} > 1: above lasing threshold, bandwidth undefined")
    if np.any(g <= 0):
        raise DomainError("sqrt(R R_W) G0 must be > 0")
    return (C_LIGHT / x) * (1.0 - g) / (np.pi * np.sqrt(g))


def pulse_bandwidth(drive: PztDrive, cavity: CavityConfig, t) -> np.ndarray:
    """Laser pulse bandwidth [rad/s] at time ``t``; exactly 0 at threshold."""
    return bandwidth_from_loop_gain(cavity.rest_gap + drive(t), _loop_gain(cavity, drive, t))


# --------------------------------------------------------------------------- spectra

def gaussian_envelope(omega, omega_las, bandwidth) -> np.ndarray:
    bw = np.asarray(bandwidth, dtype=float)
    if np.any(bw <= 0):
        raise DomainError("zero pulse bandwidth: Gaussian envelope undefined")
    z = (np.asarray(omega) - omega_las) / bw
    return (4.0 * math.sqrt(math.pi * math.log(2.0)) / bw) * np.exp(-FOUR_LN2 * z * z)


def envelope_spectrum(cavity: CavityConfig, drive: PztDrive, t: float, omega_grid) -> FieldSpectrum:
    omega_grid = np.asarray(omega_grid, dtype=float)
    bw = float(pulse_bandwidth(drive, cavity, t))
    w_las = float(laser_angular_frequency(drive, cavity, t))
    return FieldSpectrum(omega_grid, gaussian_envelope(omega_grid, w_las, bw).astype(complex))


# 2 pi split as a double plus its rounding residue (Cody-Waite reduction)
_TWO_PI_HI = 2.0 * math.pi
_TWO_PI_LO = 2.4492935982947064e-16


def _reduce_phase(theta: np.ndarray) -> np.ndarray:
    """``theta`` modulo the true ``2 pi``, into ``(-pi, pi]``.

    ``fmod`` is exact, and the residue term removes the drift that reducing by
    the double nearest ``2 pi`` would accumulate at large ``theta``.
    """
    r = np.fmod(theta, _TWO_PI_HI)
    k = np.round((theta - r) / _TWO_PI_HI)
    r = r - k * _TWO_PI_LO
    wrap = np.where(r > math.pi, 1.0, np.where(r <= -math.pi, -1.0, 0.0))
    return (r - wrap * _TWO_PI_HI) - wrap * _TWO_PI_LO


def train_factor(omega, n_pulses, period: float) -> np.ndarray:
    """``sum_{k=0}^{N_p} exp(-i k omega T_p)`` in closed (Dirichlet-kernel) form.

    Evaluated as ``exp(-i N theta / 2) sin((N+1) theta / 2) / sin(theta / 2)``
    with ``theta`` reduced to ``(-pi, pi]``; at ``theta = 0`` the limit ``N+1``.
    """
    n = np.asarray(n_pulses)
    if np.any(n < 0):
        raise ValidationError("pulse count must be >= 0")
    half = 0.5 * _reduce_phase(np.asarray(omega, dtype=float) * period)
    s = np.sin(half)
    tiny = np.abs(s) < 1e-12
    s_safe = np.where(tiny, 1.0, s)
    ratio = np.where(tiny, (n + 1.0), np.sin((n + 1.0) * half) / s_safe)
    return np.exp(-1j * n * half) * ratio


def pulse_count(t, period: float) -> np.ndarray:
    """``N_p(t) = ceil(t / T_p)`` (0 for ``t <= 0``)."""
    t = np.asarray(t, dtype=float)
    return np.maximum(np.ceil(t / period - 1e-12), 0).astype(int)


def absorption_attenuation(sigma_a, target_density: float, flow_width: float):
    """``D = exp(-sigma_A n_g W_flow / 2)``."""
    sig = np.asarray(sigma_a, dtype=float)
    if np.any(sig < 0):
        raise ValidationError("absorption cross section must be >= 0")
    return np.exp(-0.5 * sig * target_density * flow_width)


def amplification(cavity: CavityConfig, omega, x, t, sigma_a=0.0, target_density: float = 0.0,
                  window_reflectivity=None):
    """Electric-field amplification factor ``Q_las(omega, x, t)``.

    ``window_reflectivity`` overrides ``R_W`` (power); by default the cavity's
    value at the rest wavelength is used. Broadcasts over ``omega``, ``x``, ``t``
    and ``sigma_a``.
    """
    omega = np.asarray(omega, dtype=float)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("amplification needs t >= 0")
    sig = np.asarray(sigma_a, dtype=float)
    d = absorption_attenuation(sig, target_density, cavity.flow_width)
    rw = cavity.window_reflectivity(cavity.rest_wavelength) if window_reflectivity is None \
        else np.asarray(window_reflectivity, dtype=float)
    rho_t = cavity.strip_reflectivity_field * d
    rho_w = np.sqrt(rw) * d
    r = rho_t * rho_w
    passes = t / cavity.pass_time
    one_minus = 1.0 - r
    degenerate = np.abs(one_minus) < 1e-12
    geom = np.where(degenerate, passes,
                    (1.0 - r ** passes) / np.where(degenerate, 1.0, one_minus))
    k = 0.5 * sig * target_density
    alpha0 = omega * x / C_LIGHT + k * (x - cavity.flow_offset)
    alpha1 = omega * (2.0 * cavity.cell_width - x) / C_LIGHT \
        + 1j * k * (cavity.cell_width - x - cavity.flow_offset)
    return 1j * cavity.window_transmission_field * geom * (
        rho_t * np.exp(1j * alpha1) * d + np.exp(1j * alpha0))


# --------------------------------------------------------------------------- jitter

def jitter_sequence(cavity: CavityConfig, seed: int, count: int) -> np.ndarray:
    """Per-pulse build-up delays ``tau_r^(j)``: Gaussian, seeded, mean ``jitter_mean``."""
    if count < 0:
        raise ValidationError("jitter count must be >= 0")
    if cavity.jitter_std < 0:
        raise ValidationError("jitter_std must be >= 0")
    rng = np.random.default_rng(seed)
    return rng.normal(cavity.jitter_mean, cavity.jitter_std, size=int(count))


# --------------------------------------------------------------------------- synthesis

def sigma_at_omega(sigma_a, omega) -> np.ndarray:
    """Evaluate a cross-section description on angular frequencies.

    Accepts a constant, a callable of omega, or an object with ``at_omega``.
    """
    omega = np.asarray(omega, dtype=float)
    if hasattr(sigma_a, "at_omega"):
        return sigma_a.at_omega(omega)
    if callable(sigma_a):
        return np.asarray(sigma_a(omega), dtype=float)
    return np.full(omega.shape, float(sigma_a))


def _gauss_legendre(a: float, b: float, n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * nodes + 0.5 * (a + b), 0.5 * (b - a) * weights


@dataclass
class _Plan:
    times: np.ndarray
    omega_las: np.ndarray
    bandwidth: np.ndarray
    window_rw: np.ndarray
    n_pulses: np.ndarray
    xs: np.ndarray
    wx: np.ndarray
    n_omega: int
    jitter: np.ndarray


def _plan(cavity: CavityConfig, drive: PztDrive, times, settings: SynthesisSettings) -> _Plan:
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValidationError("synthesis times must be >= 0")
    lam = wavelength(drive, cavity, times)
    bw = pulse_bandwidth(drive, cavity, times)
    if np.any(bw <= 0):
        raise DomainError("pulse bandwidth is zero at threshold; envelope undefined")
    n_p = pulse_count(times, cavity.pulse_period)
    n_max = int(n_p.max()) if n_p.size else 0

    if settings.jitter is None:
        jit = np.full(n_max + 1, cavity.jitter_mean)
    else:
        jit = np.asarray(settings.jitter, dtype=float)
        if jit.size < n_max + 1:
            raise ConfigurationError(
                f"jitter sequence has {jit.size} entries, synthesis needs {n_max + 1}")

    # Riemann sums in omega are periodic in time with period 2 pi / d_omega;
    # every contributing pulse must sit well inside one period.
    sigma_t = math.sqrt(8.0 * math.log(2.0)) / bw
    span = np.maximum(times, cavity.pulse_period) + np.max(np.abs(jit)) \
        + 2.0 * cavity.cell_width / C_LIGHT + cavity.pulse_period
    period = span + _ALIAS_MARGIN * sigma_t
    needed = int(np.ceil(np.max(2 * _ENVELOPE_HALF_WIDTH * bw * period / (2 * np.pi)))) + 2
    if settings.n_omega is None:
        n_omega = needed + (needed % 2 == 0)
    else:
        n_omega = int(settings.n_omega)
        if n_omega < needed:
            raise ConfigurationError(
                f"omega grid of {n_omega} points is too coarse: spacing must stay below "
                f"2*pi/(N_p*T_p) with margin (needs >= {needed} points)")
    if n_omega > settings.max_omega_points:
        raise ConfigurationError(
            f"omega grid needs {n_omega} points to resolve the pulse train (spacing < "
            f"2*pi/(N_p*T_p)); exceeds max_omega_points={settings.max_omega_points}")
    n_x = settings.n_x
    if n_x is None:
        # Gauss-Legendre is exact to ~1e-13 once nodes exceed half the phase span plus a margin
        k_max = float(np.max(2 * np.pi * C_LIGHT / lam + _ENVELOPE_HALF_WIDTH * bw)) / C_LIGHT
        n_x = int(math.ceil(0.5 * k_max * cavity.flow_width)) + 8
    if n_x < 1:
        raise ConfigurationError("n_x must be >= 1")
    xs, wx = _gauss_legendre(cavity.flow_offset, cavity.flow_offset + cavity.flow_width, n_x)
    wx = wx / cavity.flow_width
    return _Plan(times, 2 * np.pi * C_LIGHT / lam, bw, cavity.window_reflectivity(lam), n_p,
                 xs, wx, n_omega, jit)


def cavity_sums(cavity: CavityConfig, drive: PztDrive, times, settings: SynthesisSettings,
                spectral_filter: Optional[Callable] = None, chunk: int = 128):
    """Complex field sums ``aleph(x, t)`` on the Gauss-Legendre x nodes.

    Returns ``(plan, aleph, filtered)``; ``filtered`` is the same inverse
    transform with the integrand multiplied by ``spectral_filter(omega)``
    (``None`` when no filter is given).
    """
    plan = _plan(cavity, drive, times, settings)
    xi = np.linspace(-_ENVELOPE_HALF_WIDTH, _ENVELOPE_HALF_WIDTH, plan.n_omega)
    dxi = xi[1] - xi[0]
    n_t = plan.times.size
    aleph = np.empty((n_t, plan.xs.size), dtype=complex)
    filtered = np.empty_like(aleph) if spectral_filter is not None else None
    uniform_jitter = settings.jitter is None or np.ptp(plan.jitter) == 0.0
    tau0 = plan.jitter[0] if plan.jitter.size else cavity.jitter_mean

    for lo in range(0, n_t, chunk):
        sl = slice(lo, min(lo + chunk, n_t))
        t = plan.times[sl][:, None]
        bw = plan.bandwidth[sl][:, None]
        omega = plan.omega_las[sl][:, None] + bw * xi[None, :]
        env = gaussian_envelope(omega, plan.omega_las[sl][:, None], bw)
        n_p = plan.n_pulses[sl][:, None]
        if uniform_jitter:
            train = train_factor(omega, n_p, cavity.pulse_period) * np.exp(-1j * omega * tau0)
        else:
            j = np.arange(plan.jitter.size)
            delays = j * cavity.pulse_period + plan.jitter
            mask = (j[None, :] <= plan.n_pulses[sl][:, None]).astype(float)
            train = np.einsum("tj,twj->tw", mask,
                              np.exp(-1j * omega[:, :, None] * delays[None, None, :]))
        sig = sigma_at_omega(settings.sigma_a, omega)
        q = amplification(cavity, omega[:, None, :], plan.xs[None, :, None], t[:, :, None],
                          sig[:, None, :], settings.target_density,
                          window_reflectivity=plan.window_rw[sl][:, None, None])
        # d omega / (2 pi) with d omega = bw * dxi
        kernel = (train * env * np.exp(1j * omega * t))[:, None, :] * q
        weight = (bw * dxi / (2.0 * np.pi))
        aleph[sl] = kernel.sum(axis=2) * weight
        if filtered is not None:
            filt = np.asarray(spectral_filter(omega), dtype=float)
            filtered[sl] = (kernel * filt[:, None, :]).sum(axis=2) * weight
    if not np.all(np.isfinite(aleph)):
        raise NumericError("non-finite intracavity field")
    return plan, aleph, filtered


def synthesize_field(cavity: CavityConfig, drive: PztDrive, time_grid,
                     sigma_a=0.0, target_density: float = 0.0, jitter=None,
                     n_x: Optional[int] = None, n_omega: Optional[int] = None,
                     max_omega_points: int = 8192) -> SynthesizedField:
    """Width-averaged field ``E0 Re<aleph>_x`` and intensity ``(c eps0 n/2) E0^2 <|aleph|^2>_x``."""
    settings = SynthesisSettings(sigma_a, target_density, None if jitter is None
                                 else np.asarray(jitter, dtype=float), n_x, n_omega,
                                 max_omega_points)
    time_grid = np.asarray(time_grid, dtype=float)
    plan, aleph, _ = cavity_sums(cavity, drive, time_grid, settings)
    e0 = cavity.field_amplitude
    mean_field = aleph @ plan.wx
    intensity = 0.5 * C_LIGHT * epsilon_0 * cavity.refraction_index * e0 ** 2 \
        * (np.abs(aleph) ** 2 @ plan.wx)
    return SynthesizedField(time_grid, e0 * mean_field.real, intensity, drive, settings,
                            plan.n_omega)


def control_field_from_drive(cavity: CavityConfig, drive: PztDrive, dt: float, n_steps: int,
                             **synthesis_kw) -> ControlField:
    """Sample the synthesized width-averaged field at step midpoints."""
    times = (np.arange(n_steps) + 0.5) * dt
    return ControlField(dt, synthesize_field(cavity, drive, times, **synthesis_kw)
                        .width_averaged_field)

"""Four-fraction excitation/condensation kinetics and the enrichment factor.

Only the excited-monomer, epithermal and dimer fractions are integrated; the
monomer fraction is always ``1 - f_star - f_epi - f_d`` so the material
balance holds by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.constants import c as C_LIGHT, epsilon_0, hbar
from scipy.integrate import solve_ivp

from .cavity import CavityConfig, SynthesizedField, cavity_sums, sigma_at_omega
from .errors import ConfigurationError, NumericError, ValidationError

__all__ = [
    "TransportRates",
    "TransportState",
    "EnrichmentInput",
    "KineticsTrajectory",
    "ExcitationRate",
    "kinetics_rhs",
    "integrate",
    "excitation_rate",
    "enrichment",
    "enrichment_ratio",
]

_BALANCE_TOL = 1e-8
_RANGE_TOL = 1e-9


@dataclass(frozen=True)
class TransportRates:
    k_df: float = 0.0
    k_dd: float = 0.0
    k_VT: float = 0.0
    k_VV: float = 0.0
    k_se: float = 0.0
    k_th: float = 0.0
    k_W: float = 0.0
    k_W1: float = 0.0
    e_star: float = 0.0
    e_1: float = 0.0

    def __post_init__(self):
        problems = []
        for name in ("k_df", "k_dd", "k_VT", "k_VV", "k_se", "k_th", "k_W", "k_W1"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                problems.append(f"rates.{name} must be finite and >= 0")
        for name in ("e_star", "e_1"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"rates.{name} must lie in [0, 1]")
        if problems:
            raise ValidationError("; ".join(problems), problems)

    @property
    def excited_loss(self) -> float:
        return (1.0 - self.e_star) * (self.k_df + self.k_VV + self.k_VT + self.k_se) \
            + self.e_star * self.k_W

    @property
    def epithermal_loss(self) -> float:
        return (1.0 - self.e_1) * self.k_th + self.e_1 * self.k_W1

    @property
    def fastest(self) -> float:
        return max(self.excited_loss, self.epithermal_loss, self.k_df, self.k_dd,
                   (1.0 - self.e_star) * (self.k_df + self.k_VT))


@dataclass(frozen=True)
class TransportState:
    f_m: float
    f_star: float
    f_epi: float
    f_d: float

    def __post_init__(self):
        vals = self.as_array()
        if np.any(vals < -_RANGE_TOL) or np.any(vals > 1 + _RANGE_TOL):
            raise ValidationError(f"fractions outside [0, 1]: {vals}")
        if abs(vals.sum() - 1.0) > _BALANCE_TOL:
            raise ValidationError(f"material balance violated: fractions sum to {vals.sum():.12g}")

    @classmethod
    def from_integrated(cls, f_star, f_epi, f_d) -> "TransportState":
        return cls(1.0 - f_star - f_epi - f_d, f_star, f_epi, f_d)

    def as_array(self) -> np.ndarray:
        return np.array([self.f_m, self.f_star, self.f_epi, self.f_d])


@dataclass(frozen=True)
class EnrichmentInput:
    feed_target: float
    feed_total: float
    escaped_target: float
    escaped_total: float

    def __post_init__(self):
        for name in ("feed_target", "feed_total", "escaped_target", "escaped_total"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")
        if self.feed_target > self.feed_total or self.escaped_target > self.escaped_total:
            raise ValidationError("target flow exceeds total flow")


@dataclass(frozen=True)
class KineticsTrajectory:
    times: np.ndarray
    fractions: np.ndarray  # (n, 4): f_m, f_star, f_epi, f_d
    ka: np.ndarray

    @property
    def final(self) -> TransportState:
        return TransportState(*self.fractions[-1])

    def state(self, i: int) -> TransportState:
        return TransportState(*self.fractions[i])


@dataclass(frozen=True)
class ExcitationRate:
    times: np.ndarray
    values: np.ndarray
    imaginary_residue: float  # max |Im| / max |Re| before the real part is taken

    def __call__(self, t):
        return np.interp(t, self.times, self.values)


# --------------------------------------------------------------------------- ODE system

def kinetics_rhs(state: TransportState, rates: TransportRates, ka: float) -> tuple:
    """``(d f_star/dt, d f_epi/dt, d f_d/dt)``."""
    if ka < 0:
        raise ValidationError("excitation rate must be >= 0")
    return _rhs(state.f_m, state.f_star, state.f_epi, state.f_d, rates, ka)


def _rhs(f_m, f_star, f_epi, f_d, rates: TransportRates, ka):
    d_star = ka * f_m - f_star * rates.excited_loss
    d_epi = (1.0 - rates.e_star) * (rates.k_df + rates.k_VT) * f_star \
        - rates.epithermal_loss * f_epi
    d_d = rates.k_df * f_m - rates.k_dd * f_d
    return d_star, d_epi, d_d


def _ka_function(ka_series) -> tuple:
    """Normalise constant / callable / (times, values) into (callable, max value)."""
    if isinstance(ka_series, ExcitationRate):
        ka_series = (ka_series.times, ka_series.values)
    if callable(ka_series):
        return ka_series, None
    if np.isscalar(ka_series):
        v = float(ka_series)
        return (lambda t: v), v
    times, values = (np.asarray(a, dtype=float) for a in ka_series)
    if times.shape != values.shape or times.ndim != 1 or times.size < 1:
        raise ConfigurationError("kA series needs matching 1-D time and value arrays")
    if np.any(values < 0):
        raise ValidationError("kA series must be >= 0")
    return (lambda t: np.interp(t, times, values)), float(values.max())


def integrate(initial: TransportState, rates: TransportRates, ka_series, horizon: float,
              dt: float, method: str = "DOP853", rtol: float = 1e-11,
              atol: float = 1e-14) -> KineticsTrajectory:
    """Integrate the three kinetic equations, reporting states every ``dt``.

    ``ka_series`` is a constant, a callable of time, an ``ExcitationRate`` or a
    ``(times, values)`` pair interpolated piecewise linearly. ``method`` is a
    ``solve_ivp`` explicit scheme (``"DOP853"``, ``"RK45"``) or ``"RK4"`` for
    classic fixed-step Runge-Kutta with step ``dt``.
    """
    if not (horizon > 0 and dt > 0):
        raise ConfigurationError("horizon and dt must be > 0")
    ka, ka_max = _ka_function(ka_series)
    if ka_max is None:
        probe = np.linspace(0.0, horizon, 257)
        ka_max = float(np.max(np.atleast_1d([ka(t) for t in probe])))
    fastest = max(rates.fastest, ka_max)
    if dt * fastest >= 0.1:
        raise ConfigurationError(
            f"kinetics step guard violated: dt * max_rate = {dt * fastest:.3g} >= 0.1")

    n = int(round(horizon / dt))
    times = np.linspace(0.0, n * dt, n + 1)
    y0 = np.array([initial.f_star, initial.f_epi, initial.f_d])

    def f(t, y):
        fm = 1.0 - y[0] - y[1] - y[2]
        return np.array(_rhs(fm, y[0], y[1], y[2], rates, float(ka(t))))

    if method == "RK4":
        ys = np.empty((n + 1, 3))
        ys[0] = y0
        for i in range(n):
            t, y = times[i], ys[i]
            k1 = f(t, y)
            k2 = f(t + dt / 2, y + dt / 2 * k1)
            k3 = f(t + dt / 2, y + dt / 2 * k2)
            k4 = f(t + dt, y + dt * k3)
            ys[i + 1] = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    else:
        sol = solve_ivp(f, (0.0, times[-1]), y0, method=method, t_eval=times, rtol=rtol,
                        atol=atol, max_step=dt)
        if not sol.success:
            raise NumericError(f"kinetics integration failed: {sol.message}")
        ys = sol.y.T

    fractions = np.column_stack([1.0 - ys.sum(axis=1), ys])
    if not np.all(np.isfinite(fractions)):
        raise NumericError("non-finite fractions in kinetics trajectory")
    bad = (fractions < -_RANGE_TOL) | (fractions > 1 + _RANGE_TOL)
    if np.any(bad):
        i = int(np.argmax(bad.any(axis=1)))
        raise NumericError(f"fraction left [0, 1] at t = {times[i]:g}: {fractions[i]}")
    ka_values = np.array([float(ka(t)) for t in times])
    return KineticsTrajectory(times, fractions, ka_values)


# --------------------------------------------------------------------------- coupling to the field

def excitation_rate(field: SynthesizedField, sigma_a, cavity: CavityConfig,
                    beam_radius: float) -> ExcitationRate:
    """``k_A(t) = F^-1[dN/domega] / (pi R_L^2)`` on the field's time grid.

    The absorbed-photon spectral density ``sigma_A / (hbar omega) * dW/domega``
    is carried back to the time domain alongside the field sum, then paired
    with the conjugate field sum and averaged over the flow width. Negative
    real parts are clipped to zero.
    """
    if field.settings is None or field.drive is None:
        raise ConfigurationError("excitation_rate needs a field produced by synthesize_field")
    if not beam_radius > 0:
        raise ValidationError("beam radius must be > 0")

    def spectral_filter(omega):
        return sigma_at_omega(sigma_a, omega) / (hbar * omega)

    plan, aleph, filtered = cavity_sums(cavity, field.drive, field.time_grid, field.settings,
                                        spectral_filter=spectral_filter)
    pair = (np.conj(aleph) * filtered) @ plan.wx
    scale = 0.5 * C_LIGHT * epsilon_0 * cavity.refraction_index * cavity.field_amplitude ** 2 \
        / (np.pi * beam_radius ** 2)
    values = scale * pair
    re_max = float(np.max(np.abs(values.real))) if values.size else 0.0
    residue = float(np.max(np.abs(values.imag)) / re_max) if re_max > 0 else 0.0
    return ExcitationRate(field.time_grid, np.maximum(values.real, 0.0), residue)


# --------------------------------------------------------------------------- enrichment

def enrichment_ratio(flows: EnrichmentInput) -> Fraction:
    """Exact rational ``beta`` of the (binary floating point) flow values."""
    return (Fraction(flows.escaped_target) * Fraction(flows.feed_total)) \
        / (Fraction(flows.escaped_total) * Fraction(flows.feed_target))


def enrichment(flows: EnrichmentInput) -> float:
    """``beta = (escaped_target / escaped_total) / (feed_target / feed_total)``.

    Evaluated in exact rational arithmetic and rounded once, so equal relative
    abundances give exactly 1 and swapping the streams gives the correctly
    rounded reciprocal.
    """
    return float(enrichment_ratio(flows))

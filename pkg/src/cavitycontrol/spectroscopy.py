"""Photo-absorption cross section of a multi-species gas.

Frequencies of modes and lines are carried in Hz; line-shape widths and the
wavenumber axis are in cm^-1 (1 cm^-1 = 2.99792458e10 Hz). Cross sections come
out in m^2 when the per-branch band intensities are given in m^2 J.

Normalisation follows the printed forms: the Voigt profile used here integrates
to 2 over detuning, and branch envelopes are per unit energy.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special
from scipy.constants import R as GAS_CONSTANT, c as C_LIGHT, h as PLANCK, k as K_B

from .errors import ConfigurationError, DomainError, NumericError, ValidationError

__all__ = [
    "CM_INV_HZ",
    "Mode",
    "MolecularSpecies",
    "GasConditions",
    "LineShapeWidths",
    "CrossSectionSpectrum",
    "collisional_fwhm",
    "doppler_fwhm",
    "voigt",
    "degeneracy_weight",
    "vibrational_weight",
    "coriolis_stretch",
    "branch_envelope",
    "line_center",
    "hot_bands",
    "band_width",
    "cross_section",
]

CM_INV_HZ = 100.0 * C_LIGHT
BRANCHES = ("P", "Q", "R")
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_FWHM_PER_SIGMA = math.sqrt(8.0 * math.log(2.0))


@dataclass(frozen=True)
class Mode:
    frequency: float  # Hz
    degeneracy: int = 1
    anharmonicity: float = 0.0  # dimensionless


@dataclass(frozen=True)
class MolecularSpecies:
    name: str
    abundance: float
    modes: tuple
    upper: tuple                  # vibrational quanta of the final state m
    rotational_frequency: float   # nu_B [Hz], B = h nu_B
    coriolis: float
    molar_mass: float             # kg/mol
    reduced_mass_qq: float
    reduced_mass_qg: float
    band_intensity: dict          # branch -> I_IR [m^2 J]
    saturation_intensity: float = math.inf
    lower: Optional[tuple] = None
    nu_max: Optional[float] = None    # R-branch edge [Hz]
    stretch: Optional[float] = None   # xi_B, overrides the nu_max estimate

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(
            m if isinstance(m, Mode) else Mode(*m) for m in self.modes))
        object.__setattr__(self, "upper", tuple(int(v) for v in self.upper))
        lower = (0,) * len(self.modes) if self.lower is None else tuple(int(v) for v in self.lower)
        object.__setattr__(self, "lower", lower)
        bi = {b: float(self.band_intensity.get(b, 0.0)) for b in BRANCHES}
        object.__setattr__(self, "band_intensity", bi)
        problems = self.problems()
        if problems:
            raise ValidationError(f"species {self.name}: " + "; ".join(problems), problems)

    def problems(self) -> list:
        out = []
        if not 0.0 <= self.abundance <= 1.0:
            out.append("abundance outside [0, 1]")
        if not self.modes:
            out.append("at least one vibrational mode is required")
        for m in self.modes:
            if m.degeneracy not in (1, 2, 3):
                out.append(f"degeneracy {m.degeneracy} not in {{1, 2, 3}}")
            if not m.frequency > 0:
                out.append("mode frequencies must be > 0")
        if len(self.upper) != len(self.modes) or len(self.lower) != len(self.modes):
            out.append("transition quanta must list one entry per mode")
        if any(v < 0 for v in self.upper + self.lower):
            out.append("vibrational quanta must be >= 0")
        if not self.rotational_frequency > 0:
            out.append("rotational constant B must be > 0")
        for name in ("molar_mass", "reduced_mass_qq", "reduced_mass_qg"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0")
        if not self.saturation_intensity > 0:
            out.append("saturation_intensity must be > 0")
        if any(v < 0 for v in self.band_intensity.values()):
            out.append("band intensities must be >= 0")
        if self.stretch is None and self.nu_max is None:
            out.append("either stretch (xi_B) or nu_max is required")
        return out

    @property
    def rotational_energy(self) -> float:
        return PLANCK * self.rotational_frequency

    @property
    def band_origin(self) -> float:
        """``nu_mn = sum_beta (v_m - v_n) nu_beta`` [Hz]."""
        return sum((vm - vn) * m.frequency for vm, vn, m in zip(self.upper, self.lower, self.modes))


@dataclass(frozen=True)
class GasConditions:
    pressure: float
    temperature: float
    molar_fraction: float
    collision_qq: float
    collision_qg: float

    def __post_init__(self):
        problems = []
        if not self.pressure > 0:
            problems.append("conditions.pressure must be > 0")
        if not self.temperature > 0:
            problems.append("conditions.temperature must be > 0")
        if not 0.0 <= self.molar_fraction <= 1.0:
            problems.append("conditions.molar_fraction outside [0, 1]")
        if self.collision_qq < 0 or self.collision_qg < 0:
            problems.append("collision cross sections must be >= 0")
        if problems:
            raise ValidationError("; ".join(problems), problems)

    @property
    def number_density(self) -> float:
        return self.pressure / (K_B * self.temperature)

    @property
    def target_density(self) -> float:
        """``n_g = mu P / (k_B T)``."""
        return self.molar_fraction * self.number_density


@dataclass(frozen=True)
class LineShapeWidths:
    gamma: float   # Lorentz half-width [cm^-1]
    sigma0: float  # Gaussian standard deviation [cm^-1]

    def __post_init__(self):
        if self.gamma < 0 or self.sigma0 < 0:
            raise ValidationError("line widths must be >= 0")


@dataclass(frozen=True)
class CrossSectionSpectrum:
    wavenumber: np.ndarray  # cm^-1
    sigma: np.ndarray       # m^2

    def at_wavenumber(self, nu_tilde) -> np.ndarray:
        nu_tilde = np.asarray(nu_tilde, dtype=float)
        lo, hi = self.wavenumber[0], self.wavenumber[-1]
        if np.any(nu_tilde < lo * (1 - 1e-12)) or np.any(nu_tilde > hi * (1 + 1e-12)):
            raise ConfigurationError(
                f"cross-section grid [{lo:.9g}, {hi:.9g}] cm^-1 does not cover "
                f"[{nu_tilde.min():.9g}, {nu_tilde.max():.9g}] cm^-1")
        return np.interp(nu_tilde, self.wavenumber, self.sigma)

    def at_omega(self, omega) -> np.ndarray:
        return self.at_wavenumber(np.asarray(omega) / (2.0 * np.pi * CM_INV_HZ))


# --------------------------------------------------------------------------- widths

def collisional_fwhm(species: MolecularSpecies, conditions: GasConditions) -> Tuple[float, float]:
    """Collisional ``(FWHM, gamma = FWHM / 2)`` in cm^-1.

    ``Delta nu_c = 2 n (sigma_QG (1-mu) vbar_QG + sigma_QQ mu vbar_QQ)`` with
    ``vbar = sqrt(8 R T / (pi M))``.
    """
    t = conditions.temperature
    mu = conditions.molar_fraction
    v_qg = math.sqrt(8.0 * GAS_CONSTANT * t / (math.pi * species.reduced_mass_qg))
    v_qq = math.sqrt(8.0 * GAS_CONSTANT * t / (math.pi * species.reduced_mass_qq))
    delta_nu = 2.0 * conditions.number_density * (
        conditions.collision_qg * (1.0 - mu) * v_qg + conditions.collision_qq * mu * v_qq)
    fwhm = 1e-2 * delta_nu / C_LIGHT
    return fwhm, 0.5 * fwhm


def doppler_fwhm(species: MolecularSpecies, line_center_hz: float,
                 temperature: float) -> Tuple[float, float]:
    """Doppler ``(FWHM, sigma0 = FWHM / sqrt(8 ln 2))`` in cm^-1."""
    if not line_center_hz > 0:
        raise ValidationError("line center must be > 0")
    delta_nu = (line_center_hz / C_LIGHT) * math.sqrt(
        8.0 * math.log(2.0) * GAS_CONSTANT * max(temperature, 0.0) / species.molar_mass)
    fwhm = 1e-2 * delta_nu / C_LIGHT
    return fwhm, fwhm / _FWHM_PER_SIGMA


# --------------------------------------------------------------------------- Voigt

def _voigt_quad_scalar(d: float, gamma: float, sigma0: float) -> float:
    pref = 2.0 * gamma / (math.pi * _SQRT_2PI * sigma0)
    reach = 40.0 * sigma0

    def integrand(lp):
        return math.exp(-lp * lp / (2.0 * sigma0 * sigma0)) / ((d - lp) ** 2 + gamma * gamma)

    pts = [d] if -reach < d < reach else None
    val, _ = integrate.quad(integrand, -reach, reach, points=pts, epsabs=0.0, epsrel=1e-10,
                            limit=400)
    return pref * val


def voigt(detuning, gamma: float, sigma0: float, method: str = "wofz"):
    """Voigt profile with total area 2 (the printed normalisation).

    ``method="wofz"`` uses the Faddeeva function; ``method="quad"`` integrates
    the Gauss-Lorentz convolution directly.
    """
    if gamma < 0 or sigma0 < 0:
        raise ValidationError("Voigt widths must be >= 0")
    if gamma == 0 and sigma0 == 0:
        raise DomainError("Voigt profile needs gamma > 0 or sigma0 > 0")
    d = np.abs(np.asarray(detuning, dtype=float))
    if sigma0 == 0:
        return 2.0 * gamma / (math.pi * (d * d + gamma * gamma))
    if gamma == 0:
        return 2.0 * np.exp(-d * d / (2.0 * sigma0 * sigma0)) / (_SQRT_2PI * sigma0)
    if method == "quad":
        vec = np.vectorize(_voigt_quad_scalar, otypes=[float])
        return vec(d, gamma, sigma0)
    if method != "wofz":
        raise ValidationError(f"unknown Voigt method {method!r}")
    z = (d + 1j * gamma) / (sigma0 * math.sqrt(2.0))
    return 2.0 * special.wofz(z).real / (sigma0 * _SQRT_2PI)


# --------------------------------------------------------------------------- vibrational

def degeneracy_weight(v: int, degeneracy: int) -> float:
    if degeneracy == 1:
        return 1.0
    if degeneracy == 2:
        return v + 1.0
    if degeneracy == 3:
        return 0.5 * (v + 1.0) * (v + 2.0)
    raise ValidationError(f"degeneracy {degeneracy} not in {{1, 2, 3}}")


def vibrational_weight(species: MolecularSpecies, hot_band: Sequence[int],
                       temperature: float) -> float:
    """Thermal weight ``f_vib`` of hot band ``h`` (its lower-level quanta per mode)."""
    if len(hot_band) != len(species.modes):
        raise ValidationError("hot band must list one quantum number per mode")
    if any(v < 0 for v in hot_band):
        raise ValidationError("hot-band quanta must be >= 0")
    out = 1.0
    for mode, vh, vm in zip(species.modes, hot_band, species.upper):
        x = PLANCK * mode.frequency / (K_B * temperature) if temperature > 0 else math.inf
        ratio = degeneracy_weight(vm, mode.degeneracy) / degeneracy_weight(vh, mode.degeneracy)
        boltz = 1.0 if vh == 0 else math.exp(-vh * x)
        out *= ratio * boltz * -math.expm1(-x)
    return out


def hot_bands(species: MolecularSpecies, temperature: float, max_quanta: int = 2,
              min_weight: float = 1e-6) -> List[tuple]:
    """Lower levels with total quanta ``<= max_quanta`` and Boltzmann factor ``>= min_weight``."""
    bands = []
    n = len(species.modes)
    for combo in itertools.product(range(max_quanta + 1), repeat=n):
        if sum(combo) > max_quanta:
            continue
        energy = sum(v * m.frequency for v, m in zip(combo, species.modes)) * PLANCK
        if sum(combo) and math.exp(-energy / (K_B * temperature)) < min_weight:
            continue
        bands.append(combo)
    return bands


def hot_band_shift(species: MolecularSpecies, hot_band: Sequence[int]) -> float:
    """``Delta_h = 2 sum_a sum_b sqrt(nu_a nu_b x_a x_b) (v_am - v_an) v_bh`` [Hz]."""
    total = 0.0
    for ma, vam, van in zip(species.modes, species.upper, species.lower):
        dv = vam - van
        if dv == 0:
            continue
        for mb, vbh in zip(species.modes, hot_band):
            if vbh == 0:
                continue
            prod = ma.frequency * mb.frequency * ma.anharmonicity * mb.anharmonicity
            if prod < 0:
                raise DomainError("anharmonicity constants of mixed sign: sqrt undefined")
            total += math.sqrt(prod) * dv * vbh
    return 2.0 * total


# --------------------------------------------------------------------------- rotational

def coriolis_stretch(species: MolecularSpecies) -> float:
    """``xi_B``; estimated as ``nu_B (1 - xi)^2 / (nu_max - nu_mn)`` when not given."""
    if species.stretch is not None:
        return species.stretch
    gap = species.nu_max - species.band_origin
    if gap == 0:
        raise DomainError("nu_max equals the band origin: xi_B estimate diverges")
    return species.rotational_frequency * (1.0 - species.coriolis) ** 2 / gap


def branch_envelope(branch: str, j: int, species: MolecularSpecies, temperature: float) -> float:
    """Rotational envelope ``g_v^a(J)`` [1/J]."""
    kt = K_B * temperature
    b = species.rotational_energy
    xi = species.coriolis
    pref = math.sqrt(b / (math.pi * kt)) / (6.0 * kt)
    if branch == "P":
        if j < 0:
            raise ValidationError("P branch needs J >= 0")
        if xi == 1.0:
            raise DomainError("Coriolis constant xi = 1 makes the P envelope singular")
        return (2 * j + 3) ** 2 / (1.0 - xi) * pref * math.exp(-b * (j + 1) * (j + 2 * xi) / kt)
    if branch == "Q":
        if j < 1:
            raise ValidationError("Q branch needs J >= 1")
        xi_b = coriolis_stretch(species)
        if xi_b == 0:
            raise DomainError("xi_B = 0 makes the Q envelope singular")
        return (2 * j + 1) ** 2 / (xi_b * (j + 1)) * pref * math.exp(-b * (j + 1) * j / kt)
    if branch == "R":
        if j < 1:
            raise ValidationError("R branch needs J >= 1")
        if xi == 1.0:
            raise DomainError("Coriolis constant xi = 1 makes the R envelope singular")
        return (2 * j - 1) ** 2 / (1.0 - xi) * pref * math.exp(-b * (j + 1 - 2 * xi) * j / kt)
    raise ValidationError(f"unknown branch {branch!r}")


def line_center(branch: str, j: int, hot_band: Sequence[int], species: MolecularSpecies) -> float:
    """Line position [Hz] of branch ``a`` at ``J`` for hot band ``h``."""
    base = species.band_origin - hot_band_shift(species, hot_band)
    nu_b = species.rotational_frequency
    xi = species.coriolis
    if branch == "Q":
        return base - nu_b * coriolis_stretch(species) * (j * j - j)
    xi_b = coriolis_stretch(species)
    if branch == "P":
        return base - nu_b * (2.0 * (1.0 - xi) * j + xi_b * j * j)
    if branch == "R":
        return base + nu_b * (2.0 * (1.0 - xi) * j - xi_b * j * j)
    raise ValidationError(f"unknown branch {branch!r}")


def band_width(species: MolecularSpecies, temperature: float) -> float:
    """``Delta lambda_mn = 2 (1 - xi) sqrt(B k_B T) / (h c)`` in cm^-1."""
    return 1e-2 * 2.0 * (1.0 - species.coriolis) * math.sqrt(
        species.rotational_energy * K_B * temperature) / (PLANCK * C_LIGHT)


# --------------------------------------------------------------------------- cross section

def _lines(species: MolecularSpecies, temperature: float, j_tolerance: float, j_cap: int,
           p_branch: str):
    """Yield ``(branch, J, envelope)`` for every retained rotational term."""
    yield "P", 0, branch_envelope("P", 0, species, temperature)
    running = 0.0
    branches = ("Q", "R") if p_branch == "printed" else ("P", "Q", "R")
    for j in range(1, j_cap + 1):
        current = [(b, branch_envelope(b, j, species, temperature)) for b in branches]
        peak_now = max(v for _, v in current)
        rising = peak_now >= running
        running = max(running, peak_now)
        for b, v in current:
            yield b, j, v
        if not rising and peak_now < j_tolerance * running:
            return
    raise NumericError(
        f"{species.name}: rotational sum not converged at J cap {j_cap} "
        f"(tolerance {j_tolerance:g})")


def species_cross_section(species: MolecularSpecies, conditions: GasConditions,
                          wavenumber, intensity: float = 0.0, *, j_tolerance: float = 1e-8,
                          j_cap: int = 400, hot_band_cap: int = 2,
                          hot_band_min_weight: float = 1e-6, p_branch: str = "printed",
                          voigt_method: str = "wofz") -> np.ndarray:
    """Abundance-weighted, saturated contribution of one species [m^2]."""
    if p_branch not in ("printed", "all"):
        raise ValidationError("p_branch must be 'printed' or 'all'")
    wavenumber = np.asarray(wavenumber, dtype=float)
    t = conditions.temperature
    gamma = collisional_fwhm(species, conditions)[1]
    dl = band_width(species, t)
    terms = list(_lines(species, t, j_tolerance, j_cap, p_branch))
    out = np.zeros_like(wavenumber)
    for band in hot_bands(species, t, hot_band_cap, hot_band_min_weight):
        fvib = vibrational_weight(species, band, t)
        for branch, j, env in terms:
            strength = species.band_intensity[branch] * env
            if strength == 0.0:
                continue
            nu = line_center(branch, j, band, species)
            if nu <= 0:
                continue
            sigma0 = doppler_fwhm(species, nu, t)[1]
            profile = voigt(wavenumber - nu / CM_INV_HZ, gamma, sigma0, method=voigt_method)
            out += fvib * dl * strength * profile
    sat = 1.0 / math.sqrt(1.0 + intensity / species.saturation_intensity)
    return species.abundance * sat * out


def cross_section(species_list: Sequence[MolecularSpecies], conditions: GasConditions,
                  wavenumber_grid, intensity_at_pulse_end: float = 0.0,
                  **options) -> CrossSectionSpectrum:
    """``sigma_A`` on a wavenumber grid [cm^-1] for the whole mixture.

    Options: ``j_tolerance`` (envelope cut relative to its running maximum),
    ``j_cap``, ``hot_band_cap``, ``hot_band_min_weight``, ``p_branch``
    (``"printed"`` keeps only the J = 0 P term, ``"all"`` sums P over J too),
    ``voigt_method``.
    """
    if intensity_at_pulse_end < 0:
        raise ValidationError("intensity must be >= 0")
    grid = np.asarray(wavenumber_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or not np.all(np.isfinite(grid)) \
            or np.any(np.diff(grid) <= 0):
        raise ConfigurationError("wavenumber grid must be finite and strictly increasing")
    total = sum(x.abundance for x in species_list)
    if species_list and abs(total - 1.0) > 1e-9:
        raise ValidationError(f"species abundances sum to {total:.12g}, expected 1")
    sigma = np.zeros_like(grid)
    for sp in species_list:
        sigma += species_cross_section(sp, conditions, grid, intensity_at_pulse_end, **options)
    return CrossSectionSpectrum(grid, np.maximum(sigma, 0.0))

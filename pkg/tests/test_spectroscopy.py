import math

import numpy as np
import pytest
from scipy import integrate
from scipy.constants import c as C_LIGHT, h as PLANCK, k as K_B

from cavitycontrol.errors import ConfigurationError, DomainError, NumericError, ValidationError
from cavitycontrol.spectroscopy import (CM_INV_HZ, CrossSectionSpectrum, GasConditions,
                                        LineShapeWidths, Mode, MolecularSpecies, band_width,
                                        branch_envelope, collisional_fwhm, coriolis_stretch,
                                        cross_section, degeneracy_weight, doppler_fwhm,
                                        hot_band_shift, hot_bands, line_center,
                                        species_cross_section, vibrational_weight, voigt)


def species(**kw):
    base = dict(name="A", abundance=1.0, modes=(Mode(1.0e10, 1, -0.001),), upper=(1,),
                rotational_frequency=3e8, coriolis=0.1, stretch=2e-4, molar_mass=0.03,
                reduced_mass_qq=0.015, reduced_mass_qg=0.0035,
                band_intensity={"P": 1e-50, "Q": 1e-50, "R": 1e-50})
    base.update(kw)
    return MolecularSpecies(**base)


COND = GasConditions(10.0, 5.0, 0.5, 5e-19, 3e-19)


# ---------------------------------------------------------------- widths

def test_collisional_hand_evaluation():
    sp = species(reduced_mass_qg=0.04)
    cond = GasConditions(1e3, 300.0, 0.0, 0.0, 5e-19)
    fwhm, gamma = collisional_fwhm(sp, cond)
    # n = P/kT = 2.4143e23 m^-3, vbar = 398.48 m/s -> 2 n sigma vbar = 9.62085e7 Hz
    assert fwhm * CM_INV_HZ == pytest.approx(9.62085e7, rel=1e-5)
    assert gamma == pytest.approx(fwhm / 2)


def test_collisional_structure():
    sp = species()
    only_qg = collisional_fwhm(sp, GasConditions(50.0, 10.0, 0.0, 7e-19, 3e-19))[0]
    no_qq = collisional_fwhm(sp, GasConditions(50.0, 10.0, 0.0, 0.0, 3e-19))[0]
    assert only_qg == no_qq
    single = collisional_fwhm(sp, COND)[0]
    double = collisional_fwhm(sp, GasConditions(20.0, 5.0, 0.5, 5e-19, 3e-19))[0]
    assert double == pytest.approx(2 * single, rel=1e-14)


def test_doppler_hand_evaluation_and_scaling():
    sp = species(molar_mass=0.1)
    fwhm, sigma0 = doppler_fwhm(sp, 3e13, 300.0)
    # (nu/c) sqrt(8 ln2 R T / M) = 3.72165e7 Hz
    assert fwhm * CM_INV_HZ == pytest.approx(3.72165e7, rel=1e-5)
    assert sigma0 == pytest.approx(fwhm / math.sqrt(8 * math.log(2)))
    assert doppler_fwhm(sp, 3e13, 1200.0)[0] == pytest.approx(2 * fwhm)
    assert doppler_fwhm(species(molar_mass=0.4), 3e13, 300.0)[0] == pytest.approx(fwhm / 2)
    assert doppler_fwhm(sp, 3e13, 0.0)[0] == 0.0
    with pytest.raises(ValidationError):
        doppler_fwhm(sp, 0.0, 300.0)


# ---------------------------------------------------------------- Voigt

def test_voigt_lorentz_and_gauss_limits():
    d = np.linspace(-5, 5, 41)
    g = 0.7
    lor = 2 * g / math.pi / (d ** 2 + g ** 2)
    np.testing.assert_allclose(voigt(d, g, 1e-9), lor, rtol=1e-6)
    np.testing.assert_allclose(voigt(d, g, 0.0), lor, rtol=1e-15)
    s = 0.9
    gau = 2 / (math.sqrt(2 * math.pi) * s) * np.exp(-d ** 2 / (2 * s ** 2))
    np.testing.assert_allclose(voigt(d, 1e-14, s), gau, rtol=1e-6)
    np.testing.assert_allclose(voigt(d, 0.0, s), gau, rtol=1e-15)
    with pytest.raises(DomainError):
        voigt(d, 0.0, 0.0)
    with pytest.raises(ValidationError):
        voigt(d, -1.0, 1.0)


@pytest.mark.parametrize("g, s", [(0.3, 1.0), (1.0, 0.2), (0.5, 0.5)])
def test_voigt_area_evenness_and_paths(g, s):
    area, _ = integrate.quad(lambda x: float(voigt(x, g, s)), -np.inf, np.inf, limit=400)
    assert area == pytest.approx(2.0, abs=1e-3)
    d = np.linspace(0, 6, 13)
    assert np.array_equal(voigt(d, g, s), voigt(-d, g, s))
    np.testing.assert_allclose(voigt(d, g, s, method="wofz"), voigt(d, g, s, method="quad"),
                               rtol=1e-6)


def test_voigt_fwhm_exceeds_components():
    g, s = 0.4, 0.5
    d = np.linspace(0, 3, 300001)
    v = voigt(d, g, s)
    half = d[np.argmin(np.abs(v - v[0] / 2))]
    assert 2 * half >= max(2 * g, s * math.sqrt(8 * math.log(2)))


def test_line_widths_validated():
    LineShapeWidths(0.0, 0.1)
    with pytest.raises(ValidationError):
        LineShapeWidths(-1.0, 0.1)


# ---------------------------------------------------------------- vibrational

def test_degeneracy_weights():
    assert [degeneracy_weight(1, d) for d in (1, 2, 3)] == [1.0, 2.0, 3.0]
    assert degeneracy_weight(2, 3) == 6.0
    with pytest.raises(ValidationError):
        degeneracy_weight(1, 4)


def test_vibrational_weight_cold_limit():
    assert vibrational_weight(species(modes=(Mode(3e13),)), (0,), 1.0) == pytest.approx(1.0)


def test_vibrational_weights_sum_to_truncated_partition():
    sp = species()
    t = 2.0
    x = PLANCK * 1.0e10 / (K_B * t)
    for cap in (1, 2, 5):
        total = sum(vibrational_weight(sp, (v,), t) for v in range(cap + 1))
        assert total == pytest.approx(1 - math.exp(-(cap + 1) * x), rel=1e-12)


def test_hot_band_enumeration():
    sp = species(modes=(Mode(1e10), Mode(2e10)), upper=(1, 0))
    bands = hot_bands(sp, 5.0, max_quanta=2)
    assert set(bands) == {(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)}
    assert hot_bands(sp, 1e-3) == [(0, 0)]


def test_hot_band_shift_and_line_centers():
    sp = species(modes=(Mode(1e10, 1, 0.002),), stretch=0.0)
    assert hot_band_shift(sp, (0,)) == 0.0
    shift = hot_band_shift(sp, (2,))
    assert shift == pytest.approx(2 * 1e10 * 0.002 * 2)
    assert line_center("Q", 1, (2,), sp) == sp.band_origin - shift
    assert sp.band_origin == 1e10
    cold = species()
    nu_b, xi, xi_b = 3e8, 0.1, 2e-4
    assert line_center("R", 3, (0,), cold) == pytest.approx(1e10 + nu_b * (2 * (1 - xi) * 3 - xi_b * 9))
    assert line_center("P", 3, (0,), cold) == pytest.approx(1e10 - nu_b * (2 * (1 - xi) * 3 + xi_b * 9))


def test_mixed_sign_anharmonicity_rejected():
    sp = species(modes=(Mode(1e10, 1, 0.002), Mode(2e10, 1, -0.001)), upper=(1, 0))
    with pytest.raises(DomainError):
        hot_band_shift(sp, (0, 1))


# ---------------------------------------------------------------- rotational

def test_branch_envelope_hand_evaluation():
    t = 10.0
    kt = K_B * t
    sp = species(rotational_frequency=0.01 * kt / PLANCK, coriolis=0.1)
    # (13^2/0.9) sqrt(0.01/pi)/6 exp(-0.01*6*5.2) = 1.29246
    assert branch_envelope("P", 5, sp, t) * kt == pytest.approx(1.29246, rel=1e-5)


def test_branch_envelopes_positive_and_decaying():
    sp = species()
    for b in ("P", "Q", "R"):
        vals = [branch_envelope(b, j, sp, 5.0) for j in (1, 5, 20)]
        assert all(v > 0 for v in vals)
        assert branch_envelope(b, 3000, sp, 5.0) == 0.0
    with pytest.raises(DomainError):
        branch_envelope("P", 1, species(coriolis=1.0), 5.0)
    with pytest.raises(DomainError):
        branch_envelope("Q", 1, species(stretch=0.0), 5.0)
    with pytest.raises(ValidationError):
        branch_envelope("Q", 0, sp, 5.0)


def test_stretch_estimate_from_edge():
    sp = species(stretch=None, nu_max=1.0e10 + 3e9)
    assert coriolis_stretch(sp) == pytest.approx(3e8 * 0.81 / 3e9)
    with pytest.raises(DomainError):
        coriolis_stretch(species(stretch=None, nu_max=1.0e10))


# ---------------------------------------------------------------- cross section

GRID = np.linspace(0.320, 0.345, 801)


def test_cross_section_nonnegative_and_validated():
    s = cross_section([species()], COND, GRID)
    assert np.all(s.sigma >= 0) and s.sigma.max() > 0
    with pytest.raises(ValidationError):
        cross_section([species(abundance=0.6)], COND, GRID)
    with pytest.raises(ConfigurationError):
        cross_section([species()], COND, GRID[::-1])
    with pytest.raises(ValidationError):
        cross_section([species()], COND, GRID, -1.0)


def test_single_cold_band_reduces_to_formula():
    sp = species(modes=(Mode(1.0e10, 1, 0.0),))
    t = COND.temperature
    got = species_cross_section(sp, COND, GRID, hot_band_cap=0)
    gamma = collisional_fwhm(sp, COND)[1]
    fvib = vibrational_weight(sp, (0,), t)
    expected = np.zeros_like(GRID)
    terms = [("P", 0)] + [(b, j) for j in range(1, 400) for b in ("Q", "R")]
    for b, j in terms:
        env = branch_envelope(b, j, sp, t)
        if env < 1e-30:
            continue
        nu = line_center(b, j, (0,), sp)
        expected += fvib * band_width(sp, t) * 1e-50 * env * voigt(
            GRID - nu / CM_INV_HZ, gamma, doppler_fwhm(sp, nu, t)[1])
    np.testing.assert_allclose(got, expected, rtol=1e-7, atol=1e-12 * expected.max())


def test_saturation_limit_and_monotonicity():
    sp = species(saturation_intensity=10.0)
    base = cross_section([sp], COND, GRID).sigma
    big = cross_section([sp], COND, GRID, 1e8).sigma
    np.testing.assert_allclose(big, base * math.sqrt(10.0 / (1e8 + 10.0)), rtol=1e-12)
    assert np.all(big[base > 0] < base[base > 0])


def test_abundance_linearity():
    a = species_cross_section(species(abundance=0.3), COND, GRID)
    b = species_cross_section(species(abundance=0.6), COND, GRID)
    np.testing.assert_allclose(b, 2 * a, rtol=1e-14)


def test_truncation_self_convergence():
    sp = species()
    base = cross_section([sp], COND, GRID).sigma
    wide = cross_section([sp], COND, GRID, j_cap=800).sigma
    tight = cross_section([sp], COND, GRID, j_tolerance=1e-14).sigma
    assert np.max(np.abs(wide - base)) <= 1e-6 * base.max()
    assert np.max(np.abs(tight - base)) <= 1e-6 * base.max()


def test_truncation_cap_error_names_cap():
    with pytest.raises(NumericError, match="cap 5"):
        cross_section([species()], COND, GRID, j_cap=5)


def test_p_branch_option_adds_lines():
    printed = cross_section([species()], COND, GRID).sigma
    summed = cross_section([species()], COND, GRID, p_branch="all").sigma
    assert np.all(summed >= printed) and summed.sum() > printed.sum()


def test_spectrum_lookup_covers_grid():
    s = CrossSectionSpectrum(GRID, np.ones_like(GRID))
    assert s.at_omega(2 * np.pi * 0.33 * CM_INV_HZ) == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        s.at_wavenumber(0.5)


def test_species_validation():
    with pytest.raises(ValidationError) as err:
        species(abundance=1.5, molar_mass=0.0, modes=(Mode(1e10, 4),))
    assert len(err.value.problems) >= 3
    with pytest.raises(ValidationError):
        species(stretch=None)
    with pytest.raises(ValidationError):
        GasConditions(-1.0, 5.0, 0.5, 0.0, 0.0)


def test_band_width_value():
    sp = species()
    t = 5.0
    expected = 1e-2 * 2 * 0.9 * math.sqrt(PLANCK * 3e8 * K_B * t) / (PLANCK * C_LIGHT)
    assert band_width(sp, t) == pytest.approx(expected)

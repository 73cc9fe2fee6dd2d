import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cryospdc.dispersion import constant_index_model
from cryospdc.fit import (
    BoundaryMinimumWarning,
    GaussianFitError,
    InsensitiveFitError,
    convolve_grid,
    convolve_instrument_response,
    fit_effective_length,
    fit_gaussian,
    gaussian_kernel,
)
from cryospdc.jsa import FWHM_PER_SIGMA, JsiGrid, PumpSpec, Spectrum, half_max_width, simulate_jsi
from cryospdc.phasematch import CrystalSpec, solve_phasematch

PUMP = PumpSpec()


def gaussian(x, centre, fwhm, amp=1.0):
    return amp * np.exp(-0.5 * ((x - centre) / (fwhm / FWHM_PER_SIGMA)) ** 2)


def measured_axes(crystal, temperature):
    sol = solve_phasematch(crystal, 778e-9, temperature)
    s = (round(sol.signal_wavelength * 1e9) + np.arange(-15, 16)) * 1e-9
    i = (round(sol.idler_wavelength * 1e9) + np.arange(-40, 41)) * 1e-9
    return s, i


# --- Gaussian fits ----------------------------------------------------------


def test_noiseless_gaussian_exact():
    x = np.arange(1500.0, 1600.5, 0.5) * 1e-9
    spec = Spectrum(x, gaussian(x, 1550e-9, 20e-9, 800.0))
    res = fit_gaussian(spec)
    assert res.center == pytest.approx(1550e-9, rel=1e-9)
    assert res.fwhm == pytest.approx(20e-9, rel=1e-9)
    assert res.amplitude == pytest.approx(800.0, rel=1e-9)
    assert res.sigma == pytest.approx(20e-9 / FWHM_PER_SIGMA, rel=1e-9)


def test_poisson_gaussian_centre_coverage():
    x = np.arange(1500.0, 1601.0, 1.0)
    truth = gaussian(x, 1550.0, 20.0, 1000.0)
    rng = np.random.default_rng(2024)
    pulls = []
    for _ in range(100):
        res = fit_gaussian(Spectrum(x, rng.poisson(truth).astype(float)))
        pulls.append((res.center - 1550.0) / res.center_uncertainty)
    pulls = np.array(pulls)
    assert np.sum(np.abs(pulls) < 3) >= 97
    assert 0.75 < np.std(pulls) < 1.3


def test_all_zero_spectrum_fails_cleanly():
    x = np.arange(10.0)
    with pytest.raises(GaussianFitError, match="all-zero"):
        fit_gaussian(Spectrum(x, np.zeros(10)))


def test_gaussian_input_validation():
    with pytest.raises(ValueError):
        fit_gaussian(Spectrum(np.arange(3.0), np.ones(3)))
    with pytest.raises(ValueError):
        fit_gaussian(Spectrum(np.arange(8.0), -np.ones(8)))


# --- instrument response ----------------------------------------------------


def test_zero_response_is_identity():
    x = np.arange(50.0)
    spec = Spectrum(x, gaussian(x, 25, 6))
    out = convolve_instrument_response(spec, 0.0)
    np.testing.assert_array_equal(out.intensity, spec.intensity)


@given(a=st.floats(3.0, 12.0), b=st.floats(0.5, 6.0))
def test_gaussian_widths_add_in_quadrature(a, b):
    x = np.arange(-120.0, 120.0, 0.05)
    out = convolve_instrument_response(Spectrum(x, gaussian(x, 0.0, a)), b)
    assert half_max_width(x, out.intensity) == pytest.approx(math.hypot(a, b), rel=1e-3)


def test_spectrometer_inflation_small():
    x = np.arange(1450.0, 1650.0, 0.01)
    spec = Spectrum(x, gaussian(x, 1550.0, 17.0))
    out = convolve_instrument_response(spec, 0.909)
    width = half_max_width(x, out.intensity)
    assert width == pytest.approx(math.hypot(17.0, 0.909), rel=1e-4)
    assert width / 17.0 - 1 < 2e-3


def test_kernel_unit_sum():
    k = gaussian_kernel(0.909, 0.1)
    assert k.sum() == pytest.approx(1.0, rel=1e-15)
    assert k.size % 2 == 1


def test_non_uniform_axis_rejected():
    x = np.array([0.0, 1.0, 2.5, 3.0, 4.0])
    with pytest.raises(ValueError, match="resample"):
        convolve_instrument_response(Spectrum(x, np.ones(5)), 1.0)


def test_response_preserves_counts_in_interior():
    x = np.arange(200.0)
    y = gaussian(x, 100, 10, 50.0)
    out = convolve_instrument_response(Spectrum(x, y, np.sqrt(y + 1)), 3.0)
    assert out.intensity.sum() == pytest.approx(y.sum(), rel=1e-9)
    assert out.error is not None and np.all(out.error > 0)


# --- effective length -------------------------------------------------------


@pytest.mark.parametrize("length,temperature", [(7.3e-3, 295.0), (3.65e-3, 4.7), (16e-3, 100.0)])
def test_noiseless_length_recovered(crystal, length, temperature):
    s, i = measured_axes(crystal, temperature)
    measured = simulate_jsi(crystal, PUMP, length, temperature, s, i)
    res = fit_effective_length(measured, crystal, PUMP, temperature, (1e-3, 24.4e-3))
    step = res.length_grid[1] - res.length_grid[0]
    assert abs(res.effective_length - length) < step
    assert res.effective_length == pytest.approx(length, rel=1e-6)
    assert not res.at_bound and res.refined


def test_peak_objective_noiseless(crystal):
    s, i = measured_axes(crystal, 295.0)
    measured = simulate_jsi(crystal, PUMP, 7.3e-3, 295.0, s, i)
    res = fit_effective_length(measured, crystal, PUMP, 295.0, (1e-3, 24.4e-3), scale="peak")
    assert res.objective == "rms_peak_one"
    assert res.effective_length == pytest.approx(7.3e-3, rel=1e-6)


def test_noisy_length_within_five_percent(crystal):
    s, i = measured_axes(crystal, 4.7)
    clean = simulate_jsi(crystal, PUMP, 3.65e-3, 4.7, s, i)
    rng = np.random.default_rng(7)
    for _ in range(5):
        noisy = JsiGrid(s, i, rng.poisson(500 * clean.intensity).astype(float), "raw_counts")
        res = fit_effective_length(noisy, crystal, PUMP, 4.7, (1e-3, 24.4e-3))
        assert res.effective_length == pytest.approx(3.65e-3, rel=0.05)


def test_background_nuisance(crystal):
    s, i = measured_axes(crystal, 4.7)
    clean = simulate_jsi(crystal, PUMP, 3.65e-3, 4.7, s, i)
    shifted = JsiGrid(s, i, 0.8 * clean.intensity + 0.1, "raw_counts")
    res = fit_effective_length(shifted, crystal, PUMP, 4.7, (1e-3, 24.4e-3), fit_background=True)
    assert res.objective.endswith("+offset")
    assert res.effective_length == pytest.approx(3.65e-3, rel=1e-6)


def test_instrument_response_in_fit(crystal):
    s, i = measured_axes(crystal, 295.0)
    clean = simulate_jsi(crystal, PUMP, 7.3e-3, 295.0, s, i)
    blurred = JsiGrid(s, i, convolve_grid(clean.intensity, s, i, 3e-9), "raw_counts")
    res = fit_effective_length(blurred, crystal, PUMP, 295.0, (1e-3, 24.4e-3), response_fwhm=3e-9)
    assert res.effective_length == pytest.approx(7.3e-3, rel=1e-6)


def test_threads_do_not_change_result(crystal):
    s, i = measured_axes(crystal, 4.7)
    measured = simulate_jsi(crystal, PUMP, 3.65e-3, 4.7, s, i)
    one = fit_effective_length(measured, crystal, PUMP, 4.7, (1e-3, 24.4e-3), threads=1)
    four = fit_effective_length(measured, crystal, PUMP, 4.7, (1e-3, 24.4e-3), threads=4)
    assert one.effective_length == four.effective_length
    np.testing.assert_array_equal(one.objective_values, four.objective_values)
    assert one.config_hash == four.config_hash


def test_minimum_on_bound_is_flagged(crystal):
    s, i = measured_axes(crystal, 4.7)
    measured = simulate_jsi(crystal, PUMP, 2e-3, 4.7, s, i)
    with pytest.warns(BoundaryMinimumWarning):
        res = fit_effective_length(measured, crystal, PUMP, 4.7, (3e-3, 10e-3))
    assert res.at_bound
    assert res.grid_minimum == pytest.approx(3e-3)


def test_flat_objective_is_insensitive():
    # zero index: Δk' is exactly the grating term in every cell, so the normalized shape ignores L
    flat = CrystalSpec(9e-6, 0.0244, constant_index_model("TE", 0.0), constant_index_model("TM", 0.0))
    s = np.arange(1550.0, 1561.0) * 1e-9
    i = np.arange(1550.0, 1561.0) * 1e-9
    measured = simulate_jsi(flat, PUMP, 5e-3, 295.0, s, i, flat_pump=True)
    with pytest.raises(InsensitiveFitError, match="insensitive|flat"):
        fit_effective_length(measured, flat, PUMP, 295.0, (1e-3, 24e-3))


def test_upper_bound_cannot_exceed_chip(crystal):
    s, i = measured_axes(crystal, 295.0)
    measured = simulate_jsi(crystal, PUMP, 7.3e-3, 295.0, s, i)
    with pytest.raises(ValueError, match="chip length"):
        fit_effective_length(measured, crystal, PUMP, 295.0, (1e-3, 30e-3))
    with pytest.raises(ValueError):
        fit_effective_length(measured, crystal, PUMP, 295.0, (5e-3, 1e-3))


def test_fit_hash_deterministic(crystal):
    s, i = measured_axes(crystal, 295.0)
    measured = simulate_jsi(crystal, PUMP, 7.3e-3, 295.0, s, i)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = fit_effective_length(measured, crystal, PUMP, 295.0, (1e-3, 24.4e-3), grid_points=50)
        b = fit_effective_length(measured, crystal, PUMP, 295.0, (1e-3, 24.4e-3), grid_points=50)
    assert a.config_hash == b.config_hash and len(a.config_hash) == 16
    assert a.effective_length == b.effective_length

import math

import numpy as np
import pytest

from fopsim.filter_model import (BAND_EDGE_NM, BLEED_ANCHORS, DEFAULT_N_EFF, FilterError,
                                 FilterSpec, calibrate_n_eff, filter_transmittance,
                                 lambertian_mean, od_of, shifted_wavelength,
                                 triple_band_filter)


def test_normal_incidence_is_unshifted():
    assert shifted_wavelength(677.0, 0.0, 1.9) == pytest.approx(677.0)


def test_shift_closed_form():
    n = 1.8
    expected = 677.0 * math.sqrt(1 - (math.sin(math.radians(30)) / n) ** 2)
    assert shifted_wavelength(677.0, 30.0, n) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("theta", [-1.0, 90.0, 120.0, float("nan")])
def test_shift_rejects_bad_angles(theta):
    with pytest.raises(FilterError):
        shifted_wavelength(677.0, theta, 1.9)


def test_calibrated_index_in_band():
    n = calibrate_n_eff(BLEED_ANCHORS, BAND_EDGE_NM)
    assert 1.7 <= n <= 1.95
    assert n == pytest.approx(DEFAULT_N_EFF)


def test_calibration_minimises_residuals():
    # independent oracle: brute-force scan of the squared residual
    def cost(n):
        return sum((shifted_wavelength(BAND_EDGE_NM, t, n) - w) ** 2 for t, w in BLEED_ANCHORS)

    grid = np.linspace(1.5, 2.5, 200001)
    best = grid[np.argmin([cost(g) for g in grid])]
    assert calibrate_n_eff(BLEED_ANCHORS, BAND_EDGE_NM) == pytest.approx(best, abs=1e-5)


def test_single_anchor_is_exact():
    n = calibrate_n_eff([(30.0, 650.0)], 677.0)
    assert shifted_wavelength(677.0, 30.0, n) == pytest.approx(650.0, abs=1e-9)


def test_anchor_requiring_index_below_one_has_no_solution():
    with pytest.raises(FilterError, match="no solution"):
        calibrate_n_eff([(10.0, 600.0)], 677.0)


def test_zero_shift_anchor_is_degenerate():
    with pytest.raises(FilterError, match="degenerate"):
        calibrate_n_eff([(0.0, 677.0)], 677.0)


def test_red_anchor_rejected():
    with pytest.raises(FilterError):
        calibrate_n_eff([(20.0, 700.0)], 677.0)


def test_passband_and_stopband_levels():
    f = triple_band_filter()
    assert filter_transmittance(f, 694.0, 0.0) == pytest.approx(0.95)
    assert od_of(filter_transmittance(f, 640.0, 0.0)) == pytest.approx(6.0)


def test_660_bleeds_through_near_24_degrees():
    f = triple_band_filter()
    assert od_of(filter_transmittance(f, 660.0, 10.0)) > 5.0
    assert filter_transmittance(f, 660.0, 30.0) > 0.5


def test_transmittance_broadcasts():
    f = triple_band_filter()
    out = filter_transmittance(f, [600.0, 700.0], [[0.0], [30.0]])
    assert out.shape == (2, 2)


def test_lambertian_mean_of_flat_filter():
    f = FilterSpec(((100.0, 5000.0),), pass_transmittance=0.9)
    assert lambertian_mean(f, 700.0) == pytest.approx(0.9, rel=1e-9)


@pytest.mark.parametrize("kw", [
    {"passbands": ((600.0, 500.0),)},
    {"passbands": ((500.0, 600.0), (550.0, 700.0))},
    {"passbands": ((500.0, 600.0),), "pass_transmittance": 0.0},
    {"passbands": ((500.0, 600.0),), "stop_od": -1.0},
    {"passbands": ((500.0, 600.0),), "rolloff_width": 0.0},
    {"passbands": ((500.0, 600.0),), "n_eff": 0.9},
])
def test_filter_spec_validation(kw):
    with pytest.raises(FilterError):
        FilterSpec(**kw)


def test_od_of():
    assert od_of(1e-6) == pytest.approx(6.0)
    assert od_of(1.0) == 0.0
    assert od_of(0.0) == 12.0
    with pytest.raises(ValueError):
        od_of(-0.1)
    with pytest.raises(ValueError):
        od_of(1.5)

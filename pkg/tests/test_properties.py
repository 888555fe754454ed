"""Property tests for the module invariants."""

import math
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fopsim.explorer import IRDYE_680LT, excitation_efficiency
from fopsim.filter_model import (FilterError, filter_transmittance, od_of, shifted_wavelength,
                                 triple_band_filter)
from fopsim.fop_tracer import (FopDesign, acceptance_angle, angular_transmittance,
                               fill_factor_hex, low_na_design)
from fopsim.frontend import FrontendConfig, Order, frontend_transmittance
from fopsim.imaging import (SceneImage, collection_efficiency, michelson_contrast, psf_angular,
                            resolution_at)
from fopsim.io import load_config, read_pgm, write_pgm
from fopsim.response import AngularResponse

settings.register_profile("fopsim", max_examples=60, deadline=None)
settings.load_profile("fopsim")

GRID = np.arange(0.0, 90.0, 1.0)
FOP = low_na_design()
FOP_T = angular_transmittance(FOP, GRID, 256, 0)
FILT = triple_band_filter()

angle = st.floats(0.0, 89.0, allow_nan=False)
scatter = st.floats(0.0, 0.1, allow_nan=False)
wavelength = st.floats(450.0, 900.0, allow_nan=False)


@given(st.floats(300.0, 1200.0), angle, angle, st.floats(1.01, 3.0))
def test_shift_is_blue_and_monotone(lam0, a, b, n):
    lo, hi = sorted((a, b))
    s_lo, s_hi = shifted_wavelength(lam0, lo, n), shifted_wavelength(lam0, hi, n)
    assert s_hi <= s_lo + 1e-9 and s_lo <= lam0 + 1e-9


@given(wavelength, angle, st.floats(0.1, 1.0), st.floats(0.0, 10.0))
def test_filter_bounded(lam, th, t_pass, od):
    if 10 ** -od > t_pass:
        with pytest.raises(FilterError):
            triple_band_filter(pass_transmittance=t_pass, stop_od=od)
        return
    spec = triple_band_filter(pass_transmittance=t_pass, stop_od=od)
    t = filter_transmittance(spec, lam, th)
    assert 10 ** -od * (1 - 1e-12) <= t <= t_pass * (1 + 1e-12)


@given(st.floats(700.0, 763.0), angle, angle)
def test_filter_monotone_once_band_shifts_away(lam, a, b):
    lo, hi = sorted((a, b))
    # stay clear of the next band's roll-off, which would let lam re-enter a passband
    scale = math.sqrt(1 - (math.sin(math.radians(hi)) / FILT.n_eff) ** 2)
    assume(807.0 * scale - FILT.rolloff_width > lam)
    assert filter_transmittance(FILT, lam, hi) <= filter_transmittance(FILT, lam, lo) + 1e-15


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_od_monotone(a, b):
    lo, hi = sorted((a, b))
    assert od_of(hi) <= od_of(lo)
    assert od_of(1.0) == 0.0


@given(wavelength, angle, scatter, scatter)
def test_dual_below_both_singles(lam, th, s_c, s_e):
    cfg = FrontendConfig(Order.DUAL_SIDED, FOP, FILT, s_c, s_e)
    dual = frontend_transmittance(cfg, lam, th, FOP_T)
    first = frontend_transmittance(cfg.with_order(Order.FILTER_FIRST), lam, th, FOP_T)
    last = frontend_transmittance(cfg.with_order(Order.FILTER_LAST), lam, th, FOP_T)
    assert dual <= first * (1 + 1e-12) and dual <= last * (1 + 1e-12)
    assert 0.0 <= dual <= 1.0


@given(wavelength, angle)
def test_scatter_free_orders_agree(lam, th):
    cfg = FrontendConfig(Order.FILTER_FIRST, FOP, FILT)
    first = frontend_transmittance(cfg, lam, th, FOP_T)
    last = frontend_transmittance(cfg.with_order(Order.FILTER_LAST), lam, th, FOP_T)
    assert first == pytest.approx(last, rel=1e-12, abs=0)


@given(st.floats(0.0, 0.05), st.floats(1e-6, 0.05))
def test_exit_scatter_raises_filter_last_floor_only(s0, ds):
    a = FrontendConfig(Order.FILTER_LAST, FOP, FILT, 0.0, s0)
    b = FrontendConfig(Order.FILTER_LAST, FOP, FILT, 0.0, s0 + ds)
    assert frontend_transmittance(b, 660.0, 0.0, FOP_T) > frontend_transmittance(a, 660.0, 0.0, FOP_T)
    fa = frontend_transmittance(a.with_order(Order.FILTER_FIRST), 660.0, 0.0, FOP_T)
    fb = frontend_transmittance(b.with_order(Order.FILTER_FIRST), 660.0, 0.0, FOP_T)
    assert fa == fb


@given(st.floats(0.0, 0.05), st.floats(1e-6, 0.05))
def test_capture_scatter_raises_filter_first_oblique_floor(s0, ds):
    a = FrontendConfig(Order.FILTER_FIRST, FOP, FILT, s0, 0.0)
    b = FrontendConfig(Order.FILTER_FIRST, FOP, FILT, s0 + ds, 0.0)
    assert frontend_transmittance(b, 660.0, 45.0, FOP_T) > frontend_transmittance(a, 660.0, 45.0, FOP_T)


curves = st.lists(st.floats(0.0, 1.0), min_size=91, max_size=91)


@given(curves)
def test_collection_efficiency_range(vals):
    T = AngularResponse(np.arange(91.0), vals)
    eta = collection_efficiency(T)
    assert 0.0 <= eta <= 0.5 + 1e-12


@given(curves)
def test_psf_normalised(vals):
    assume(max(vals[:90]) > 1e-6)
    psf = psf_angular(AngularResponse(np.arange(91.0), vals))
    assert psf.peak == pytest.approx(1.0)
    assert np.all((psf.transmittance >= 0) & (psf.transmittance <= 1))


@given(st.floats(1.0, 2.0), st.floats(0.001, 0.5), st.floats(1.0, 1.5))
def test_acceptance_angle_grows_with_core_index(n_cl, dn, n0):
    assert acceptance_angle(n_cl + 2 * dn, n_cl, n0) >= acceptance_angle(n_cl + dn, n_cl, n0)
    assert 0 < acceptance_angle(n_cl + dn, n_cl, n0) <= 90


@given(st.floats(1.0, 50.0), st.floats(0.01, 0.999))
def test_fill_factor_range(p, ratio):
    ff = fill_factor_hex(ratio * p, p)
    assert 0 < ff <= math.pi / (2 * math.sqrt(3)) + 1e-12


@settings(max_examples=12)
@given(st.floats(1.0, 25.0), st.floats(0.2, 0.85), st.floats(20.0, 600.0),
       st.integers(0, 2**32 - 1))
def test_tracer_transmittance_in_unit_interval(alpha, ff, h, seed):
    d = FopDesign(h=h).with_alpha(alpha).with_fill_factor(ff)
    T = angular_transmittance(d, [0.0, 10.0, 45.0, 80.0], 64, seed)
    assert np.all((T.transmittance >= 0) & (T.transmittance <= 1))


@given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=30))
def test_michelson_range(vals):
    assume(max(vals) > 0)
    c = michelson_contrast(np.array(vals))
    assert 0.0 <= c <= 1.0


@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12), st.floats(0.05, 0.95))
def test_resolution_within_table(con, level):
    widths = [500.0 / (k + 1) for k in range(len(con))]
    r = resolution_at(list(zip(widths, con)), level)
    assert widths[-1] <= r.line_width <= widths[0]


@given(st.floats(635.0, 677.0))
def test_excitation_in_unit_interval(lam):
    assert 0.0 <= excitation_efficiency(IRDYE_680LT, lam) <= 1.0


@given(st.integers(0, 2**31), st.integers(1, 16), st.floats(1.0, 5000.0),
       st.sampled_from(["first", "last", "dual"]))
def test_config_round_trip(seed, threads, h, order):
    text = f"[run]\nseed = {seed}\nthreads = {threads}\n[fop]\nh = {h!r}\n" \
           f"[frontend]\norder = {order}\n"
    cfg = load_config(text=text)
    assert (cfg.seed, cfg.threads, cfg.fop.h) == (seed, threads, h)
    assert Order.parse(cfg.frontend["order"]).value == order


@given(st.lists(st.floats(0.0, 1e3), min_size=6, max_size=6), st.floats(0.1, 100.0))
def test_pgm_round_trip(vals, pitch):
    img = SceneImage(np.array(vals).reshape(2, 3), pitch)
    with tempfile.TemporaryDirectory() as d:
        back = read_pgm(write_pgm(Path(d) / "a.pgm", img))
    assert back.pitch == pitch
    np.testing.assert_allclose(back.grid, img.grid, atol=max(vals) / 65535 + 1e-12)


@given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=20))
def test_response_csv_round_trip(vals):
    T = AngularResponse(np.linspace(0, 89, len(vals)), vals)
    with tempfile.TemporaryDirectory() as d:
        T.to_csv(Path(d) / "t.csv")
        back = AngularResponse.from_csv(Path(d) / "t.csv")
    np.testing.assert_allclose(back.transmittance, T.transmittance, rtol=1e-9, atol=1e-300)
    np.testing.assert_allclose(back.theta_deg, T.theta_deg, atol=1e-4)

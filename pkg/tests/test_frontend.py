import numpy as np
import pytest

from fopsim.filter_model import filter_transmittance, lambertian_mean, od_of, triple_band_filter
from fopsim.fop_tracer import angular_transmittance, low_na_design
from fopsim.frontend import (NEAR_NORMAL_DEG, MEASURED_FIRST_OD_OBLIQUE, MEASURED_LAST_OD0,
                             FrontendConfig, Order, calibrate_scatter, frontend_transmittance,
                             min_passband_insertion, sweep_all, sweep_frontend, worst_case)
from fopsim.response import AngularResponse, ResponseError

GRID = np.arange(0.0, 89.5, 1.0)


@pytest.fixture(scope="module")
def low_T():
    return angular_transmittance(low_na_design(), GRID, 2048, 0)


def cfg(order="dual", s_c=0.0, s_e=0.0):
    return FrontendConfig(Order.parse(order), low_na_design(), triple_band_filter(), s_c, s_e)


def test_order_parse_aliases():
    assert Order.parse("Filter-First") is Order.FILTER_FIRST
    assert Order.parse("dual_sided") is Order.DUAL_SIDED
    with pytest.raises(ValueError):
        Order.parse("middle")


def test_scatter_bounds():
    with pytest.raises(ValueError):
        cfg(s_c=0.2)
    with pytest.raises(ValueError):
        cfg(s_e=-1e-3)


def test_scatter_free_composition(low_T):
    tf = filter_transmittance(triple_band_filter(), 660.0, GRID)
    d = low_T(GRID)
    first = frontend_transmittance(cfg("first"), 660.0, GRID, low_T)
    last = frontend_transmittance(cfg("last"), 660.0, GRID, low_T)
    dual = frontend_transmittance(cfg("dual"), 660.0, GRID, low_T)
    np.testing.assert_allclose(first, tf * d, rtol=1e-12)
    np.testing.assert_array_equal(first, last)
    np.testing.assert_allclose(dual, tf * tf * d, rtol=1e-12)


def test_closed_form_with_scatter(low_T):
    s_c, s_e = 2e-5, 5e-4
    f = triple_band_filter()
    th = 33.0
    d, dmax = low_T(th), low_T.peak
    tf = filter_transmittance(f, 660.0, th)
    c = s_c * (1 - d / dmax)
    tbar = lambertian_mean(f, 660.0)
    t5 = filter_transmittance(f, 660.0, NEAR_NORMAL_DEG)
    last = d * ((1 - s_e) * tf + s_e * tbar) + c * t5
    assert frontend_transmittance(cfg("first", s_c, s_e), 660.0, th, low_T) == pytest.approx(tf * (d + c))
    assert frontend_transmittance(cfg("last", s_c, s_e), 660.0, th, low_T) == pytest.approx(last)
    assert frontend_transmittance(cfg("dual", s_c, s_e), 660.0, th, low_T) == pytest.approx(tf * last)


def test_scatter_examples(low_T):
    last = od_of(frontend_transmittance(cfg("last", 0.0, 1e-4), 660.0, 0.0, low_T))
    dual = od_of(frontend_transmittance(cfg("dual", 0.0, 1e-4), 660.0, 0.0, low_T))
    assert 3.7 <= last <= 4.5 + 0.3
    assert dual >= 6.0
    first = od_of(frontend_transmittance(cfg("first", 1e-5, 0.0), 660.0, 45.0, low_T))
    dual45 = od_of(frontend_transmittance(cfg("dual", 1e-5, 0.0), 660.0, 45.0, low_T))
    assert first == pytest.approx(5.0, abs=0.3)
    assert dual45 >= 7.0


def test_dual_never_exceeds_single_sided(low_T):
    curves = sweep_all(cfg("dual", 1e-5, 1e-3), 660.0, GRID, low_T)
    d = curves[Order.DUAL_SIDED].transmittance
    assert np.all(d <= curves[Order.FILTER_FIRST].transmittance + 1e-300)
    assert np.all(d <= curves[Order.FILTER_LAST].transmittance + 1e-300)


def test_scatter_monotonicity(low_T):
    lo = frontend_transmittance(cfg("last", 0, 1e-4), 660.0, 0.0, low_T)
    hi = frontend_transmittance(cfg("last", 0, 1e-3), 660.0, 0.0, low_T)
    assert hi > lo
    a = frontend_transmittance(cfg("first", 0, 1e-4), 660.0, 0.0, low_T)
    b = frontend_transmittance(cfg("first", 0, 1e-3), 660.0, 0.0, low_T)
    assert a == b
    c = frontend_transmittance(cfg("first", 1e-6, 0), 660.0, 45.0, low_T)
    e = frontend_transmittance(cfg("first", 1e-5, 0), 660.0, 45.0, low_T)
    assert e > c


def test_calibration_round_trip(low_T):
    s_c, s_e = calibrate_scatter(cfg("last"), 660.0, low_T, MEASURED_LAST_OD0,
                                 MEASURED_FIRST_OD_OBLIQUE)
    c = cfg("last", s_c, s_e)
    assert od_of(frontend_transmittance(c, 660.0, 0.0, low_T)) == pytest.approx(3.7, abs=1e-9)
    first = c.with_order("first")
    assert od_of(frontend_transmittance(first, 660.0, 45.0, low_T)) == pytest.approx(5.0, abs=1e-9)


def test_unreachable_floors_rejected(low_T):
    with pytest.raises(ValueError, match="unreachable"):
        calibrate_scatter(cfg("last"), 660.0, low_T, 0.5, 0.5)


def test_near_normal_and_oblique_agreement(low_T):
    s_c, s_e = calibrate_scatter(cfg("last"), 660.0, low_T, 3.7, 5.0)
    # a power meter bottoms out; a 6.5 OD detection floor is applied here
    curves = sweep_all(cfg("last", s_c, s_e), 660.0, GRID, low_T, floor_od=6.5)
    od = {o: od_of(c.transmittance) for o, c in curves.items()}
    assert abs(od[Order.FILTER_FIRST][0] - od[Order.DUAL_SIDED][0]) <= 0.3
    wide = GRID >= 35.0
    assert np.all(np.abs(od[Order.FILTER_LAST][wide] - od[Order.DUAL_SIDED][wide]) <= 0.3)


def test_emission_passthrough(low_T):
    t0 = low_T(0.0)
    for o in Order:
        t = frontend_transmittance(cfg(o), 694.0, 0.0, low_T)
        assert t0 * 0.95**2 - 1e-12 <= t <= t0 * 0.95 + 1e-12
        # captured scatter can only add its own small share on top
        t = frontend_transmittance(cfg(o, 1e-5, 1e-3), 694.0, 0.0, low_T)
        assert t0 * 0.95**2 * (1 - 1e-3) <= t <= t0 * 0.95 + 1e-5


def test_min_passband_insertion():
    assert min_passband_insertion(cfg("first"), 0.27) == pytest.approx(0.2565)
    ratio = (min_passband_insertion(cfg("dual"), 0.3, 0.98)
             / min_passband_insertion(cfg("last"), 0.3, 0.98))
    assert ratio == pytest.approx(0.98)
    assert min_passband_insertion(cfg("dual"), 0.3, 1.0) == 0.3


def test_out_of_grid_angle_raises():
    short = AngularResponse([0.0, 10.0], [0.5, 0.4])
    with pytest.raises(ResponseError):
        frontend_transmittance(cfg("first"), 660.0, 20.0, short)


def test_worst_case_picks_largest_leak(low_T):
    curve = sweep_frontend(cfg("first"), 660.0, GRID, low_T)
    th, od = worst_case(curve)
    assert od == pytest.approx(od_of(curve.transmittance.max()))
    with pytest.raises(ValueError):
        worst_case(curve, 95.0, 99.0)

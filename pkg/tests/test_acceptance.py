"""Acceptance criteria, one test each. Every test records a PASS/FAIL line that
is printed in the pytest terminal summary (see conftest.py)."""

import filecmp
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from fopsim.cli import main
from fopsim.explorer import _worst_od_at, min_thickness
from fopsim.filter_model import triple_band_filter
from fopsim.fop_tracer import (acceptance_angle, angular_transmittance, default_design,
                               fill_factor_hex, high_na_design, low_na_design, off_axis_floor,
                               saturation_angle)
from fopsim.frontend import (MEASURED_FIRST_OD_OBLIQUE, MEASURED_LAST_OD0, FrontendConfig,
                             Order, calibrate_scatter, sweep_frontend, worst_case)
from fopsim.filter_model import od_of
from fopsim.imaging import (OpticalGeometry, collection_efficiency, collection_efficiency_rect,
                            ctf, fwhm_deg, pixel_fiber_modulation, resolution_at,
                            usaf_line_widths)
from fopsim.response import rectangular, unity

GRID_1DEG = np.arange(0.0, 90.5, 1.0)


def record(n: int, ok: bool, detail: str, t0: float):
    ACCEPTANCE_LINES.append(
        f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{time.perf_counter() - t0:.1f} s]")
    assert ok, detail


def test_01_acceptance_angle():
    t0 = time.perf_counter()
    a = acceptance_angle(1.57, 1.56, 1.0)
    record(1, abs(a - 10.19) <= 0.01, f"alpha = {a:.4f} deg (10.19 +/- 0.01)", t0)


def test_02_fill_factor():
    t0 = time.perf_counter()
    ff = fill_factor_hex(20.0, 27.0)
    record(2, abs(ff - 0.498) <= 0.001, f"FF = {ff:.4f} (0.498 +/- 0.001)", t0)


def test_03_bare_sensor_psf():
    t0 = time.perf_counter()
    fw = fwhm_deg(unity())
    record(3, abs(fw - 75.0) <= 0.2, f"bare FWHM = {fw:.3f} deg (75.0 +/- 0.2)", t0)


def test_04_collection_efficiency_oracle():
    t0 = time.perf_counter()
    errs = {}
    for c in (5.0, 10.0, 22.85, 45.0, 90.0):
        q = collection_efficiency(rectangular(c, n=1024))
        errs[c] = abs(q - collection_efficiency_rect(c)) / collection_efficiency_rect(c)
    worst = max(errs.values())
    record(4, worst < 1e-4, f"max relative error {worst:.2e} (< 1e-4)", t0)


def test_05_beer_lambert_scaling():
    t0 = time.perf_counter()
    d = default_design(k_core=0.0)
    theta = d.alpha_deg + 15.0
    grid = [theta]
    t1 = angular_transmittance(d.with_(h=250.0), grid, 4096, 0)(theta)
    t2 = angular_transmittance(d.with_(h=500.0), grid, 4096, 0)(theta)
    ratio = t2 / t1**2
    record(5, 0.8 <= ratio <= 1.25,
           f"T(2h)/T(h)^2 = {ratio:.3f} at {theta:.2f} deg, h = 250 um ([0.8, 1.25])", t0)


def test_06_sweep_trends():
    t0 = time.perf_counter()
    d = default_design()
    sats = [saturation_angle(angular_transmittance(d.with_alpha(a), GRID_1DEG, 4096, 0))
            for a in (5.0, 10.0, 15.0, 20.0)]
    th = d.alpha_deg + 15.0
    ff_floor = [off_axis_floor(angular_transmittance(d.with_fill_factor(f), [th], 4096, 0), th)
                for f in (0.6, 0.5, 0.4, 0.3)]
    h_floor = [off_axis_floor(angular_transmittance(d.with_(h=h), [th], 4096, 0), th)
               for h in (100.0, 175.0, 250.0, 325.0, 400.0)]
    ok = (all(b > a for a, b in zip(sats, sats[1:]))
          and all(b < a for a, b in zip(ff_floor, ff_floor[1:]))
          and all(b < a for a, b in zip(h_floor, h_floor[1:])))
    record(6, ok, f"saturation {sats}; floor vs FF down "
           f"{[f'{v:.2e}' for v in ff_floor]}; vs h up {[f'{v:.2e}' for v in h_floor]}", t0)


def _calibrated(design, wavelength):
    grid = np.arange(0.0, 89.5, 1.0)
    fop_T = angular_transmittance(design, grid, 4096, 0)
    base = FrontendConfig(Order.FILTER_LAST, design, triple_band_filter())
    s_c, s_e = calibrate_scatter(base, wavelength, fop_T, MEASURED_LAST_OD0,
                                 MEASURED_FIRST_OD_OBLIQUE)
    cfg = FrontendConfig(Order.FILTER_LAST, design, triple_band_filter(), s_c, s_e)
    return {o: sweep_frontend(cfg.with_order(o), wavelength, grid, fop_T) for o in Order}


def test_07_frontend_ordering():
    t0 = time.perf_counter()
    low = _calibrated(low_na_design(), 660.0)
    high = _calibrated(high_na_design(), 635.0)
    _, dual_low = worst_case(low[Order.DUAL_SIDED])
    _, dual_high = worst_case(high[Order.DUAL_SIDED])
    last0 = od_of(low[Order.FILTER_LAST](0.0))
    first45 = od_of(low[Order.FILTER_FIRST](45.0))
    ok = (dual_high >= 6.0 and dual_low >= 7.0 and abs(last0 - 3.7) <= 0.7
          and abs(first45 - 5.0) <= 0.7)
    record(7, ok, f"dual worst OD {dual_high:.2f} @635 high-NA (>= 6), {dual_low:.2f} @660 "
           f"low-NA (>= 7); filter-last 0 deg OD {last0:.2f}; filter-first 45 deg OD "
           f"{first45:.2f} (calibration-matched)", t0)


def test_08_collection_efficiency_ratio(low_na_T, high_na_T):
    t0 = time.perf_counter()
    fw_lo, fw_hi = fwhm_deg(low_na_T), fwhm_deg(high_na_T)
    oracle = (0.49 * collection_efficiency_rect(45.7 / 2)) / (0.27 * collection_efficiency_rect(8.3 / 2))
    sim = collection_efficiency(high_na_T) / collection_efficiency(low_na_T)
    ok = abs(oracle / 52.0 - 1.0) <= 0.05 and 30.0 <= sim <= 90.0
    record(8, ok, f"rectangular oracle {oracle:.1f} (~52 within 5 %); simulated {sim:.1f} "
           f"([30, 90]); FWHM {fw_lo:.2f} / {fw_hi:.2f} deg", t0)


def test_09_resolution_band(low_na_T, high_na_T):
    t0 = time.perf_counter()
    widths = usaf_line_widths(range(0, 4))
    res = {}
    for l in (1000.0, 150.0):
        geom = OpticalGeometry(working_distance=l, medium_index=1.5)
        for name, T in (("low", low_na_T), ("high", high_na_T)):
            res[l, name] = resolution_at(ctf(T, geom, widths, oversample=4), 0.4,
                                         geom.nyquist_width)
    lo, hi = res[1000.0, "low"], res[1000.0, "high"]
    ratio = hi.line_width / lo.line_width
    near = [res[150.0, n] for n in ("low", "high")]
    ok = (lo.line_width <= 150.0 and 3.0 <= ratio <= 6.0
          and all(r.pixel_limited and r.line_width <= 110.0 for r in near))
    record(9, ok, f"l=1 mm: low {lo.line_width:.0f} um, high {hi.line_width:.0f} um, ratio "
           f"{ratio:.2f} ([3, 6]); l=150 um pixel-limited: "
           f"{[(round(r.line_width), r.pixel_limited) for r in near]}", t0)


def test_10_pitch_ratio_rule():
    t0 = time.perf_counter()
    ratios = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0]
    std = dict(pixel_fiber_modulation(low_na_design(), ratios, seed=0))
    seq = [std[r] for r in ratios]
    ok = std[2.0] < 0.5 * std[1.0] and all(b <= a for a, b in zip(seq, seq[1:]))
    record(10, ok, f"std(2)/std(1) = {std[2.0] / std[1.0]:.3f} (< 0.5); curve "
           f"{[round(v, 4) for v in seq]}", t0)


def test_11_thickness_optimization():
    t0 = time.perf_counter()
    fam, filt = low_na_design(), triple_band_filter()
    res = min_thickness(fam, filt, 660.0, 6.0, (0.0, 22.0), Order.FILTER_LAST)
    grid = np.linspace(0.0, 22.0, 23)
    _, od_h = _worst_od_at(fam, res.h, filt, 660.0, Order.FILTER_LAST, grid, 4096, 0, 0, 0, 1)
    _, od_m2 = _worst_od_at(fam, res.h - 2, filt, 660.0, Order.FILTER_LAST, grid, 4096, 0,
                            0, 0, 1)
    ok = od_h >= 6.0 > od_m2 and res.h <= 250
    record(11, ok, f"h = {res.h} um (<= 250), OD {od_h:.3f} at h, {od_m2:.3f} at h-2", t0)


COMMANDS = [
    ["angle-sweep", "--samples", "1024"],
    ["frontend-sweep"],
    ["ctf", "--line-widths", "300,200,150,110,80"],
    ["render-usaf", "--line-widths", "200,100"],
    ["design-sweep", "--na", "0.1,0.3", "--samples", "256"],
    ["optimize-h", "--od-target", "4", "--theta-max", "20", "--h-max", "800",
     "--samples", "512"],
]


def test_12_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "run.ini"
    cfg.write_text("[fop]\npreset = low_na\n[sweep]\nsamples = 1024\n"
                   "[frontend]\ncalibrate = true\n")
    dirs = []
    for k, threads in enumerate((1, 1, 3)):
        out = tmp_path / f"run{k}"
        for cmd in COMMANDS:
            assert main(["--config", str(cfg), "--seed", "7", "--threads", str(threads),
                         "--out-dir", str(out), *cmd]) == 0
        dirs.append(out)
    files = sorted(p.name for p in dirs[0].iterdir() if p.suffix in (".csv", ".pgm"))
    same = all(filecmp.cmp(dirs[0] / f, d / f, shallow=False) for d in dirs[1:] for f in files)
    record(12, same and len(files) > 5,
           f"{len(files)} CSV/PGM artifacts byte-identical across reruns and thread counts", t0)

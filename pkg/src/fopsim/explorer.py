"""Design-space tools: minimum plate thickness, NA/FF/h sweeps and excitation tradeoffs."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .filter_model import OD_CAP, FilterSpec, od_of
from .fop_tracer import DEFAULT_SAMPLES, FopDesign, angular_transmittance
from .frontend import FrontendConfig, Order, frontend_transmittance, sweep_frontend, worst_case
from .imaging import OpticalGeometry, collection_efficiency, fwhm_deg, fwhm_xy
from .response import AngularResponse

DEFAULT_H_MAX = 5000
EMISSION_NM = 694.0


class InfeasibleError(RuntimeError):
    """The OD target cannot be met inside the thickness bounds."""


class SpectrumError(ValueError):
    pass


def _table(rows, name: str) -> tuple[tuple[float, float], ...]:
    out = tuple((float(w), float(v)) for w, v in rows)
    if not out:
        raise SpectrumError(f"{name} table is empty")
    nm = [w for w, _ in out]
    if any(b <= a for a, b in zip(nm, nm[1:])):
        raise SpectrumError(f"{name} table must be sorted by wavelength without repeats")
    if any(not 0.0 <= v <= 1.0 for _, v in out):
        raise SpectrumError(f"{name} values must lie in [0, 1]")
    return out


@dataclass(frozen=True)
class FluorophoreSpec:
    """Relative excitation (extinction) and emission spectra, peak-normalised."""

    name: str
    excitation: tuple[tuple[float, float], ...]
    emission: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "excitation", _table(self.excitation, "excitation"))
        object.__setattr__(self, "emission", _table(self.emission, "emission"))

    @property
    def emission_peak(self) -> float:
        return max(self.emission, key=lambda r: r[1])[0]


# Published anchors only: extinction at 635 and 660 nm relative to the 677 nm peak.
IRDYE_680LT = FluorophoreSpec(
    "IRDye 680LT",
    excitation=((635.0, 0.33), (660.0, 0.65), (677.0, 1.0)),
    emission=((694.0, 1.0),),
)


def excitation_efficiency(fluor: FluorophoreSpec, lambda_ex: float) -> float:
    """Relative extinction at ``lambda_ex``, linearly interpolated."""
    nm = np.array([w for w, _ in fluor.excitation])
    val = np.array([v for _, v in fluor.excitation])
    if not nm[0] - 1e-9 <= lambda_ex <= nm[-1] + 1e-9:
        raise SpectrumError(
            f"{lambda_ex} nm is outside the {fluor.name} excitation table "
            f"[{nm[0]:g}, {nm[-1]:g}] nm")
    return float(np.interp(lambda_ex, nm, val))


def system_figure_of_merit(eta_c: float, excitation: float, insertion: float = 1.0) -> float:
    """Relative fluorescence flux: collection x excitation x passband insertion."""
    for name, v in (("eta_c", eta_c), ("excitation", excitation), ("insertion", insertion)):
        if not (math.isfinite(v) and v >= 0):
            raise ValueError(f"{name} must be finite and >= 0")
    return eta_c * excitation * insertion


def laser_margin(filter: FilterSpec, fop_T: AngularResponse, lambda_ex: float,
                 order=Order.DUAL_SIDED, theta_range: tuple[float, float] = (0.0, 89.0),
                 s_capture: float = 0.0, s_exit: float = 0.0,
                 fop: FopDesign | None = None) -> tuple[float, float, float]:
    """Excitation rejection of a stack over an AOI window.

    Returns ``(max_od, worst_theta, worst_od)``, where the worst angle is the
    one leaking the most light.
    """
    cfg = FrontendConfig(Order.parse(order), fop or FopDesign(), filter, s_capture, s_exit)
    lo, hi = theta_range
    mask = (fop_T.theta_deg >= lo) & (fop_T.theta_deg <= hi) & (fop_T.theta_deg < 90.0)
    if not np.any(mask):
        raise ValueError("no response samples inside the AOI window")
    curve = sweep_frontend(cfg, lambda_ex, fop_T.theta_deg[mask], fop_T)
    theta, od = worst_case(curve, lo, hi)
    return float(np.max(od_of(curve.transmittance))), theta, od


@dataclass(frozen=True)
class ThicknessResult:
    h: int
    worst_od: float
    worst_theta: float
    evaluations: int
    warning: str | None = None


def _worst_od_at(fop: FopDesign, h: float, filter: FilterSpec, lambda_ex: float, order: Order,
                 grid: np.ndarray, samples: int, seed: int, s_capture: float, s_exit: float,
                 threads: int):
    design = fop.with_(h=float(h))
    fop_T = angular_transmittance(design, grid, samples, seed, threads=threads,
                                  wavelength=lambda_ex)
    cfg = FrontendConfig(order, design, filter, s_capture, s_exit)
    curve = sweep_frontend(cfg, lambda_ex, grid, fop_T)
    return worst_case(curve, grid[0], grid[-1])


def min_thickness(fop: FopDesign, filter: FilterSpec, lambda_ex: float, od_target: float,
                  theta_range: tuple[float, float] = (0.0, 89.0), order=Order.DUAL_SIDED, *,
                  s_capture: float = 0.0, s_exit: float = 0.0, allow_scatter: bool = False,
                  h_min: int = 1, h_max: int = DEFAULT_H_MAX, theta_step: float = 1.0,
                  samples: int = DEFAULT_SAMPLES, seed: int = 0,
                  threads: int = 1) -> ThicknessResult:
    """Smallest integer thickness (um) whose worst-case OD over ``theta_range`` meets the target.

    Bisection relies on the worst-case leak falling monotonically with h,
    which holds for the scatter-free model because every thickness reuses the
    same ray samples.
    """
    order = Order.parse(order)
    if not 0.0 <= od_target <= OD_CAP:
        raise ValueError(f"od_target must lie in [0, {OD_CAP}]")
    scatter = s_capture > 0 or s_exit > 0
    if scatter and not allow_scatter:
        raise ValueError("scatter breaks the monotonicity bisection needs; pass allow_scatter")
    h_min, h_max = int(h_min), int(h_max)
    if not 1 <= h_min < h_max:
        raise ValueError("need 1 <= h_min < h_max")
    lo_t, hi_t = theta_range
    if not 0.0 <= lo_t <= hi_t < 90.0:
        raise ValueError("theta_range must satisfy 0 <= lo <= hi < 90")
    n = max(2, int(round((hi_t - lo_t) / theta_step)) + 1)
    grid = np.linspace(lo_t, hi_t, n)
    note = None
    if scatter:
        note = "scatter enabled: worst-case OD may not be monotone in h"
        warnings.warn(note, RuntimeWarning, stacklevel=2)

    evals = 0

    def check(h):
        nonlocal evals
        evals += 1
        th, od = _worst_od_at(fop, h, filter, lambda_ex, order, grid, samples, seed,
                              s_capture, s_exit, threads)
        return od >= od_target - 1e-12, th, od

    ok, th, od = check(h_min)
    if ok:
        return ThicknessResult(h_min, od, th, evals, note)
    ok, th_hi, od_hi = check(h_max)
    if not ok:
        raise InfeasibleError(
            f"OD {od_target} not reachable at h_max={h_max} um (worst OD {od_hi:.2f} "
            f"at {th_hi:g} deg)")
    lo, hi = h_min, h_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok, th, od = check(mid)
        if ok:
            hi, th_hi, od_hi = mid, th, od
        else:
            lo = mid
    return ThicknessResult(hi, od_hi, th_hi, evals, note)


@dataclass(frozen=True)
class DesignReportRow:
    na: float
    fill_factor: float
    h: float
    lambda_ex: float
    worst_od: float
    eta_c: float
    theta_fwhm: float
    fwhm_xy: float
    fom: float
    relative_fom: float = 1.0

    def __post_init__(self):
        for k, v in self.as_dict().items():
            if not math.isfinite(v):
                raise ValueError(f"{k} is not finite")
        if self.worst_od < 0:
            raise ValueError("worst_od must be >= 0")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in FIELDS}


FIELDS = ("na", "fill_factor", "h", "lambda_ex", "worst_od", "eta_c", "theta_fwhm",
          "fwhm_xy", "fom", "relative_fom")


@dataclass(frozen=True)
class SweepSettings:
    order: Order = Order.DUAL_SIDED
    emission_nm: float = EMISSION_NM
    samples: int = 1024
    seed: int = 0
    threads: int = 1
    theta_grid: tuple = field(default_factory=lambda: tuple(np.arange(0.0, 90.1, 0.25)))


def design_sweep(na_list: Sequence[float], ff_list: Sequence[float], h_list: Sequence[float],
                 lambda_list: Sequence[float], geom: OpticalGeometry, filter: FilterSpec,
                 base: FopDesign | None = None, fluor: FluorophoreSpec = IRDYE_680LT,
                 settings: SweepSettings | None = None) -> list[DesignReportRow]:
    """One report row per (NA, FF, h, lambda_ex) combination, in grid order.

    Collection efficiency and angular FWHM come from the stack's emission
    response at ``settings.emission_nm``, so passband insertion is already
    folded into ``eta_c``.
    """
    st = settings or SweepSettings()
    grids = [list(na_list), list(ff_list), list(h_list), list(lambda_list)]
    if any(not g for g in grids):
        raise ValueError("every sweep grid must be non-empty")
    base = base or FopDesign()
    theta = np.asarray(st.theta_grid, dtype=float)
    combos = list(product(*grids))

    def one(k):
        na, ff, h, lam = combos[k]
        if not 0.0 < na < 1.0:
            raise ValueError(f"NA {na} must lie in (0, 1)")
        design = base.with_alpha(math.degrees(math.asin(na))).with_fill_factor(ff).with_(h=h)
        # same ray samples for every design: common random numbers across the table
        fop_T = angular_transmittance(design, theta, st.samples, st.seed)
        cfg = FrontendConfig(st.order, design, filter)
        ex = sweep_frontend(cfg, lam, theta, fop_T)
        _, w_od = worst_case(ex, theta[0], min(theta[-1], 89.0))
        em = sweep_frontend(cfg, st.emission_nm, theta, fop_T)
        eta = collection_efficiency(em)
        fw = fwhm_deg(em)
        fom = system_figure_of_merit(eta, excitation_efficiency(fluor, lam))
        return DesignReportRow(na, design.fill_factor, float(h), float(lam), w_od, eta, fw,
                               fwhm_xy(fw, geom.working_distance, geom.medium_index), fom)

    if st.threads > 1:
        with ThreadPoolExecutor(max_workers=st.threads) as pool:
            rows = list(pool.map(one, range(len(combos))))
    else:
        rows = [one(k) for k in range(len(combos))]
    ref = rows[0].fom
    return [DesignReportRow(**{**r.as_dict(), "relative_fom": r.fom / ref if ref > 0 else 0.0})
            for r in rows]


def frontend_eta(config: FrontendConfig, fop_T: AngularResponse,
                 wavelength: float = EMISSION_NM) -> float:
    """Collection efficiency of a whole stack at an emission wavelength."""
    t = frontend_transmittance(config, wavelength, fop_T.theta_deg, fop_T)
    return collection_efficiency(AngularResponse(fop_T.theta_deg, t))

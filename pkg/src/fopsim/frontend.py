"""Filter + plate stacks (filter-first, filter-last, dual-sided) with lumped scatter.

Two scalar scatter channels stand in for the unmodelled physics:

* ``s_capture``: light the plate would absorb that instead scatters into the
  guided cone and leaves near the axis;
* ``s_exit``: guided light scattered into a wide Lambertian lobe on exit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .filter_model import FilterSpec, filter_transmittance, lambertian_mean, od_of
from .fop_tracer import FopDesign
from .response import AngularResponse

NEAR_NORMAL_DEG = 5.0
SCATTER_LIMIT = 0.1


class Order(str, enum.Enum):
    FILTER_FIRST = "first"
    FILTER_LAST = "last"
    DUAL_SIDED = "dual"

    @classmethod
    def parse(cls, text) -> "Order":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        aliases = {"first": cls.FILTER_FIRST, "filter-first": cls.FILTER_FIRST,
                   "filterfirst": cls.FILTER_FIRST,
                   "last": cls.FILTER_LAST, "filter-last": cls.FILTER_LAST,
                   "filterlast": cls.FILTER_LAST,
                   "dual": cls.DUAL_SIDED, "dual-sided": cls.DUAL_SIDED,
                   "dualsided": cls.DUAL_SIDED}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown stack order {text!r}") from None


@dataclass(frozen=True)
class FrontendConfig:
    order: Order
    fop: FopDesign
    filter: FilterSpec
    s_capture: float = 0.0
    s_exit: float = 0.0
    scatter_limit: float = field(default=SCATTER_LIMIT, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "order", Order.parse(self.order))
        for name in ("s_capture", "s_exit"):
            v = getattr(self, name)
            if not 0.0 <= v <= self.scatter_limit:
                raise ValueError(f"{name}={v} outside [0, {self.scatter_limit}]")

    @property
    def scatter_free(self) -> bool:
        return self.s_capture == 0.0 and self.s_exit == 0.0

    def with_order(self, order) -> "FrontendConfig":
        return FrontendConfig(Order.parse(order), self.fop, self.filter,
                              self.s_capture, self.s_exit, self.scatter_limit)


def frontend_transmittance(config: FrontendConfig, wavelength: float, theta,
                           fop_T: AngularResponse):
    """Excitation/emission transmittance of the complete stack at AOI ``theta``."""
    th = np.asarray(theta, dtype=float)
    f = config.filter
    direct = np.asarray(fop_T(th), dtype=float)
    d_max = fop_T.peak
    captured = config.s_capture * (1.0 - (direct / d_max if d_max > 0 else 0.0))
    tf = np.asarray(filter_transmittance(f, wavelength, np.minimum(th, 89.999)), dtype=float)
    tf = np.where(th >= 90.0, 0.0, tf)
    tf_axis = filter_transmittance(f, wavelength, NEAR_NORMAL_DEG)
    if config.order is Order.FILTER_FIRST:
        out = tf * (direct + captured)
    else:
        tf_bar = lambertian_mean(f, wavelength) if config.s_exit > 0 else 0.0
        exit_mix = (1.0 - config.s_exit) * tf + config.s_exit * tf_bar
        out = direct * exit_mix + captured * tf_axis
        if config.order is Order.DUAL_SIDED:
            out = tf * out
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def sweep_frontend(config: FrontendConfig, wavelength: float, theta_grid: Sequence[float],
                   fop_T: AngularResponse, floor_od: float | None = None) -> AngularResponse:
    """Frontend curve over ``theta_grid``.

    ``floor_od`` optionally clips the curve at a detector noise floor, as a
    power-meter measurement would.
    """
    grid = np.asarray(theta_grid, dtype=float)
    t = np.atleast_1d(frontend_transmittance(config, wavelength, grid, fop_T))
    if floor_od is not None:
        t = np.maximum(t, 10.0 ** (-floor_od))
    meta = {"wavelength_nm": wavelength, "order": config.order.value,
            "s_capture": config.s_capture, "s_exit": config.s_exit}
    return AngularResponse(grid, t, meta)


def sweep_all(config: FrontendConfig, wavelength: float, theta_grid, fop_T,
              floor_od=None) -> dict[Order, AngularResponse]:
    return {o: sweep_frontend(config.with_order(o), wavelength, theta_grid, fop_T, floor_od)
            for o in Order}


def min_passband_insertion(config: FrontendConfig, t0, pass_transmittance: float | None = None) -> float:
    """Emission transmittance at normal incidence for a passband wavelength.

    ``t0`` is the plate's 0 deg transmittance or its AngularResponse. The
    per-coating insertion defaults to the filter's passband level; 0.98
    reproduces a 2 % loss per extra coating.
    """
    if isinstance(t0, AngularResponse):
        t0 = float(t0(0.0))
    tp = config.filter.pass_transmittance if pass_transmittance is None else pass_transmittance
    if not 0.0 < tp <= 1.0:
        raise ValueError("pass transmittance must lie in (0, 1]")
    coatings = 2 if config.order is Order.DUAL_SIDED else 1
    return tp**coatings * float(t0)


def calibrate_scatter(config: FrontendConfig, wavelength: float, fop_T: AngularResponse,
                      filter_last_od_0: float, filter_first_od_oblique: float,
                      oblique_deg: float = 45.0) -> tuple[float, float]:
    """Closed-form ``(s_capture, s_exit)`` hitting two measured floors.

    ``filter_last_od_0`` is the filter-last OD at 0 deg; ``filter_first_od_oblique``
    the filter-first OD at ``oblique_deg``.
    """
    f = config.filter
    # filter-first at oblique AOI: tf * (D + s_c * (1 - D/Dmax)) = target
    d_ob = float(fop_T(oblique_deg))
    tf_ob = filter_transmittance(f, wavelength, oblique_deg)
    target = 10.0 ** (-filter_first_od_oblique)
    s_c = (target / tf_ob - d_ob) / (1.0 - d_ob / fop_T.peak)
    # filter-last at 0 deg: D0*((1-s_e)tf0 + s_e*tbar) + C0*tf_axis = target
    d0 = float(fop_T(0.0))
    tf0 = filter_transmittance(f, wavelength, 0.0)
    tbar = lambertian_mean(f, wavelength)
    tf_axis = filter_transmittance(f, wavelength, NEAR_NORMAL_DEG)
    c0 = s_c * (1.0 - d0 / fop_T.peak)
    target = 10.0 ** (-filter_last_od_0)
    s_e = (target - c0 * tf_axis - d0 * tf0) / (d0 * (tbar - tf0))
    if not (0.0 <= s_c <= config.scatter_limit and 0.0 <= s_e <= config.scatter_limit):
        raise ValueError(f"floors unreachable with bounded scatter (s_c={s_c:.3g}, s_e={s_e:.3g})")
    return float(s_c), float(s_e)


def worst_case(resp: AngularResponse, theta_lo: float = 0.0, theta_hi: float = 90.0):
    """``(worst_theta, worst_od)`` (highest transmittance) inside the AOI window."""
    mask = (resp.theta_deg >= theta_lo) & (resp.theta_deg <= theta_hi)
    if not np.any(mask):
        raise ValueError("empty AOI window")
    idx = np.nonzero(mask)[0]
    k = idx[np.argmax(resp.transmittance[idx])]
    return float(resp.theta_deg[k]), float(od_of(resp.transmittance[k]))


# Measured single-sided floors the scatter channels are calibrated to:
# filter-last only OD 3.7 at 0 deg, filter-first OD 5 at oblique AOIs.
MEASURED_LAST_OD0 = 3.7
MEASURED_FIRST_OD_OBLIQUE = 5.0

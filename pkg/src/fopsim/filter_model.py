"""Phenomenological multi-bandpass interference filter with angle blue-shift.

Every band edge moves with angle of incidence as a single-cavity filter does,
``lambda(theta) = lambda0 * sqrt(1 - (sin(theta) / n_eff)**2)``. Between a
shifted passband and the stop level, ``log10(T)`` falls linearly over
``rolloff_width`` nanometres outside the band edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

OD_CAP = 12.0

# Fitted to the 635 nm @ 42 deg / 660 nm @ 24 deg bleed-through anchors
# against the 677 nm band edge (see calibrate_n_eff).
BLEED_ANCHORS = ((42.0, 635.0), (24.0, 660.0))
BAND_EDGE_NM = 677.0


class FilterError(ValueError):
    """Invalid filter parameters or an impossible calibration."""


def _check_theta(theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(th)) or np.any(th < 0.0) or np.any(th >= 90.0):
        raise FilterError(f"angle of incidence must lie in [0, 90) deg, got {theta!r}")
    return th


def shifted_wavelength(lambda0, theta, n_eff):
    """Blue-shifted wavelength of a spectral feature at ``theta`` degrees."""
    th = _check_theta(theta)
    if n_eff <= 0:
        raise FilterError("n_eff must be positive")
    s = np.sin(np.radians(th)) / n_eff
    out = np.asarray(lambda0, dtype=float) * np.sqrt(1.0 - s * s)
    return float(out) if out.ndim == 0 else out


def _n_from_anchor(theta: float, edge: float, lambda_edge0: float) -> float:
    s = math.sin(math.radians(theta))
    ratio = edge / lambda_edge0
    return s / math.sqrt(1.0 - ratio * ratio)


def calibrate_n_eff(anchors: Sequence[tuple[float, float]], lambda_edge0: float) -> float:
    """Least-squares effective index so the shifted edge passes through ``anchors``.

    ``anchors`` are ``(theta_deg, edge_wavelength_nm)`` pairs observed for an edge
    sitting at ``lambda_edge0`` at normal incidence.
    """
    pts = [(float(t), float(w)) for t, w in anchors]
    if not pts:
        raise FilterError("at least one anchor is required")
    for t, w in pts:
        _check_theta(t)
        if w > lambda_edge0:
            raise FilterError(f"anchor wavelength {w} nm is red of the edge {lambda_edge0} nm")
        # n_eff >= 1 can never shift an edge below lambda0*cos(theta)
        if w < lambda_edge0 * math.cos(math.radians(t)) * (1 - 1e-12):
            raise FilterError(
                f"no solution: anchor ({t} deg, {w} nm) needs n_eff < 1")
    informative = [(t, w) for t, w in pts if t > 0.0 and w < lambda_edge0]
    if not informative:
        raise FilterError("degenerate anchor: zero shift constrains no index")
    if len(pts) == 1:
        return _n_from_anchor(*informative[0], lambda_edge0)

    thetas = np.radians([t for t, _ in pts])
    edges = np.array([w for _, w in pts])

    def resid(x):
        s = np.sin(thetas) / x[0]
        return lambda_edge0 * np.sqrt(1.0 - s * s) - edges

    guess = np.mean([_n_from_anchor(t, w, lambda_edge0) for t, w in informative])
    lo = max(1.0, float(np.max(np.sin(thetas)))) + 1e-9
    fit = least_squares(resid, x0=[max(guess, lo * 1.01)], bounds=([lo], [50.0]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return float(fit.x[0])


@dataclass(frozen=True)
class FilterSpec:
    """Immutable multi-bandpass filter description (wavelengths in nm)."""

    passbands: tuple[tuple[float, float], ...]
    pass_transmittance: float = 0.95
    stop_od: float = 6.0
    rolloff_width: float = 17.0
    n_eff: float = field(default=0.0)

    def __post_init__(self):
        bands = tuple((float(lo), float(hi)) for lo, hi in self.passbands)
        object.__setattr__(self, "passbands", bands)
        if self.n_eff == 0.0:
            object.__setattr__(self, "n_eff", DEFAULT_N_EFF)
        prev_hi = -math.inf
        for lo, hi in bands:
            if not lo < hi:
                raise FilterError(f"passband ({lo}, {hi}) must have lo < hi")
            if lo <= prev_hi:
                raise FilterError("passbands must be sorted and disjoint")
            if lo <= 0:
                raise FilterError("passband wavelengths must be positive")
            prev_hi = hi
        if not 0.0 < self.pass_transmittance <= 1.0:
            raise FilterError("pass_transmittance must lie in (0, 1]")
        if self.stop_od < 0:
            raise FilterError("stop_od must be >= 0")
        if 10.0 ** (-self.stop_od) > self.pass_transmittance:
            raise FilterError("stopband transmittance exceeds pass_transmittance")
        if self.rolloff_width <= 0:
            raise FilterError("rolloff_width must be > 0")
        if self.n_eff <= 1.0:
            raise FilterError("n_eff must be > 1")

    @property
    def stop_transmittance(self) -> float:
        return 10.0 ** (-self.stop_od)

    def transmittance(self, wavelength, theta):
        return filter_transmittance(self, wavelength, theta)


DEFAULT_N_EFF = calibrate_n_eff(BLEED_ANCHORS, BAND_EDGE_NM)


def triple_band_filter(**overrides) -> FilterSpec:
    """Triple-band emission filter: 505-612, 677-763 and 807 nm long-pass."""
    kw = dict(passbands=((505.0, 612.0), (677.0, 763.0), (807.0, 1000.0)),
              pass_transmittance=0.95, stop_od=6.0, rolloff_width=17.0,
              n_eff=DEFAULT_N_EFF)
    kw.update(overrides)
    return FilterSpec(**kw)


def filter_transmittance(spec: FilterSpec, wavelength, theta):
    """Transmittance at ``wavelength`` nm and angle ``theta`` deg (broadcasts)."""
    th = _check_theta(theta)
    lam = np.asarray(wavelength, dtype=float)
    if np.any(lam <= 0):
        raise FilterError("wavelength must be positive")
    lam, th = np.broadcast_arrays(lam, th)
    s = np.sin(np.radians(th)) / spec.n_eff
    scale = np.sqrt(1.0 - s * s)
    log_pass = math.log10(spec.pass_transmittance)
    log_stop = -spec.stop_od
    best = np.full(lam.shape, log_stop)
    for lo, hi in spec.passbands:
        lo_s = lo * scale
        hi_s = hi * scale if math.isfinite(hi) else np.full(lam.shape, np.inf)
        gap = np.maximum(lo_s - lam, lam - hi_s)
        gap = np.maximum(gap, 0.0)
        frac = np.clip(gap / spec.rolloff_width, 0.0, 1.0)
        logt = log_pass + frac * (log_stop - log_pass)
        best = np.maximum(best, logt)
    out = 10.0 ** best
    return float(out) if out.ndim == 0 else out


def lambertian_mean(spec: FilterSpec, wavelength: float, n: int = 2048) -> float:
    """Cosine-weighted (Lambertian) average of the filter over the hemisphere."""
    # midpoint rule in theta with weight 2*cos*sin, which integrates to 1
    edges = np.linspace(0.0, 90.0, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    rad = np.radians(mid)
    w = 2.0 * np.cos(rad) * np.sin(rad) * np.radians(90.0 / n)
    t = filter_transmittance(spec, wavelength, mid)
    return float(np.sum(w * t) / np.sum(w))


def od_of(t, cap: float = OD_CAP):
    """Optical density ``-log10(t)``, clipped to ``cap`` for vanishing ``t``."""
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0):
        raise ValueError(f"transmittance must be >= 0, got {t!r}")
    if np.any(arr > 1.0 + 1e-12):
        raise ValueError(f"transmittance must be <= 1, got {t!r}")
    with np.errstate(divide="ignore"):
        od = -np.log10(np.clip(arr, 0.0, 1.0))
    od = np.minimum(od, cap)
    od = np.where(od == 0.0, 0.0, od)  # avoid -0.0
    return float(od) if od.ndim == 0 else od

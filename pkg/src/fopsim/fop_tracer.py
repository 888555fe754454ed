"""Geometric Monte Carlo tracer for a fiber optic plate (FOP).

The plate is a hexagonal array of transparent cores in an absorbing cladding.
A ray refracts into the plate at the top face. If it lands in a core inside
the guiding cone it is carried down the fiber by total internal reflection
and only sees core attenuation. Every other ray crosses the lattice on a
straight line; its exact core/cladding path split comes from the lattice
chord kernel in :mod:`fopsim.kernels`, and the weight follows Beer-Lambert.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .response import AngularResponse

HEX_DENSITY = math.pi / (2.0 * math.sqrt(3.0))
DEFAULT_SAMPLES = 4096

# Default cladding absorption (1/um). Chosen so the off-axis floor scales
# close to Beer-Lambert with thickness; see the README.
DEFAULT_K_CLAD = 0.025
# Core loss of the low-NA plate: 0 deg transmittance falls 50 % -> 16 %
# between 100 and 1000 um, i.e. ln(50/16)/900 um.
LOW_NA_K_CORE = math.log(50.0 / 16.0) / 900.0


class DesignError(ValueError):
    """Physically invalid plate geometry or materials."""


class TracerGuardError(RuntimeError):
    """Internal guard tripped (runaway lattice march)."""


def acceptance_angle(n_co: float, n_cl: float, n0: float = 1.0) -> float:
    """Fiber acceptance half-angle in degrees (90 when the NA saturates)."""
    if n_cl > n_co:
        raise DesignError(f"cladding index {n_cl} exceeds core index {n_co}")
    if n_cl < 1.0 or n0 < 1.0:
        raise DesignError("refractive indices must be >= 1")
    return math.degrees(math.asin(min(1.0, math.sqrt(n_co**2 - n_cl**2) / n0)))


def fill_factor_hex(d: float, p: float) -> float:
    """Transparent area fraction of a hexagonal array of disks."""
    if d <= 0 or p <= 0:
        raise DesignError("diameter and pitch must be positive")
    if d > p:
        raise DesignError(f"core diameter {d} exceeds pitch {p}: fibers overlap")
    return HEX_DENSITY * (d / p) ** 2


def cladding_index_for(na: float, n_co: float, n0: float = 1.0) -> float:
    """Cladding index giving numerical aperture ``na`` with core ``n_co``."""
    return math.sqrt(n_co**2 - (na * n0) ** 2)


def fresnel_unpolarized(n1: float, n2, cos_i):
    """Unpolarized power transmittance across an n1 -> n2 planar interface."""
    cos_i = np.clip(np.asarray(cos_i, dtype=float), 0.0, 1.0)
    n2 = np.asarray(n2, dtype=float)
    sin_i = np.sqrt(1.0 - cos_i**2)
    sin_t = n1 * sin_i / n2
    ok = sin_t < 1.0
    cos_t = np.sqrt(np.clip(1.0 - sin_t**2, 0.0, 1.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        rs = (n1 * cos_i - n2 * cos_t) / (n1 * cos_i + n2 * cos_t)
        rp = (n2 * cos_i - n1 * cos_t) / (n2 * cos_i + n1 * cos_t)
    t = 1.0 - 0.5 * (rs**2 + rp**2)
    t = np.where(ok & (cos_i > 0), t, 0.0)
    t = np.nan_to_num(t, nan=0.0)
    return float(t) if t.ndim == 0 else t


@dataclass(frozen=True)
class FopDesign:
    """Plate geometry (um) and optics. ``k_*`` are absorption coefficients in 1/um."""

    n_co: float = 1.57
    n_cl: float = 1.56
    n0: float = 1.0
    d: float = 20.0
    p: float = 27.0
    h: float = 250.0
    k_clad: float = DEFAULT_K_CLAD
    k_core: float = 0.0
    n_exit: float | None = None

    def __post_init__(self):
        if not self.n_co > self.n_cl >= 1.0:
            raise DesignError(f"need n_co > n_cl >= 1 (got {self.n_co}, {self.n_cl})")
        if self.n0 < 1.0:
            raise DesignError("n0 must be >= 1")
        if not 0 < self.d < self.p:
            raise DesignError(f"need 0 < d < p (got d={self.d}, p={self.p})")
        if self.h <= 0:
            raise DesignError("thickness must be positive")
        if self.k_clad < 0 or self.k_core < 0:
            raise DesignError("absorption coefficients must be >= 0")
        if self.n_exit is not None and self.n_exit < 1.0:
            raise DesignError("n_exit must be >= 1")

    @property
    def fill_factor(self) -> float:
        return fill_factor_hex(self.d, self.p)

    @property
    def na(self) -> float:
        return min(1.0, math.sqrt(self.n_co**2 - self.n_cl**2) / self.n0)

    @property
    def alpha_deg(self) -> float:
        return acceptance_angle(self.n_co, self.n_cl, self.n0)

    @property
    def exit_index(self) -> float:
        return self.n0 if self.n_exit is None else self.n_exit

    def with_(self, **kw) -> "FopDesign":
        return replace(self, **kw)

    def with_alpha(self, alpha_deg: float) -> "FopDesign":
        na = math.sin(math.radians(alpha_deg))
        return replace(self, n_cl=cladding_index_for(na, self.n_co, self.n0))

    def with_fill_factor(self, ff: float) -> "FopDesign":
        """Keep the pitch, change the core diameter."""
        if not 0 < ff < HEX_DENSITY:
            raise DesignError(f"fill factor must lie in (0, {HEX_DENSITY:.4f})")
        return replace(self, d=self.p * math.sqrt(ff / HEX_DENSITY))


def default_design(**kw) -> FopDesign:
    """Simulation baseline: h 250, d 20, p 27, n_co 1.57, n_cl 1.56."""
    return replace(FopDesign(), **kw)


# Effective NAs reproduce the measured air FWHMs (8.3 and 45.7 deg) with the
# meridional step-cone model, whose FWHM is 2*alpha.
LOW_NA_EFFECTIVE = math.sin(math.radians(8.3 / 2.0))
HIGH_NA_EFFECTIVE = math.sin(math.radians(45.7 / 2.0))
LOW_NA_K_CLAD = 0.15
HIGH_NA_K_CLAD = 0.08


def low_na_design(**kw) -> FopDesign:
    """500 um low-NA plate: p 11, d 9, core 1.51 (nominal NA 0.15)."""
    base = FopDesign(n_co=1.51, n_cl=cladding_index_for(LOW_NA_EFFECTIVE, 1.51),
                     d=9.0, p=11.0, h=500.0, k_clad=LOW_NA_K_CLAD, k_core=LOW_NA_K_CORE)
    return replace(base, **kw)


def high_na_design(**kw) -> FopDesign:
    """500 um high-NA plate: p 20, d 14.5, core 1.57 (nominal NA 0.43)."""
    base = FopDesign(n_co=1.57, n_cl=cladding_index_for(HIGH_NA_EFFECTIVE, 1.57),
                     d=14.5, p=20.0, h=500.0, k_clad=HIGH_NA_K_CLAD, k_core=0.0)
    return replace(base, **kw)


PRESETS = {"default": default_design, "low_na": low_na_design, "high_na": high_na_design}


@dataclass(frozen=True)
class Ray:
    """Ray hitting the top face (z = 0) and travelling toward -z."""

    origin: tuple[float, float, float]
    direction: tuple[float, float, float]
    wavelength: float = 660.0
    weight: float = 1.0

    def __post_init__(self):
        dvec = np.asarray(self.direction, dtype=float)
        if dvec.shape != (3,) or abs(np.linalg.norm(dvec) - 1.0) > 1e-9:
            raise ValueError("ray direction must be a unit 3-vector")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("ray weight must lie in [0, 1]")

    @classmethod
    def incident(cls, x: float, y: float, theta_deg: float, phi_deg: float = 0.0,
                 **kw) -> "Ray":
        th, ph = math.radians(theta_deg), math.radians(phi_deg)
        dvec = (math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), -math.cos(th))
        return cls((x, y, 0.0), dvec, **kw)


def in_core(design: FopDesign, x, y) -> np.ndarray:
    """True where (x, y) lies inside a core of the hex lattice."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = design.p
    row = p * math.sqrt(3.0) / 2.0
    j = np.floor(y / row)
    best = np.full(np.broadcast(x, y).shape, np.inf)
    for dj in (0.0, 1.0):
        jj = j + dj
        yc = jj * row
        xoff = 0.5 * p * jj
        i = np.floor((x - xoff) / p)
        for di in (0.0, 1.0):
            cx = (i + di) * p + xoff
            best = np.minimum(best, (x - cx) ** 2 + (y - yc) ** 2)
    return best < (0.5 * design.d) ** 2


def _trace_arrays(design: FopDesign, theta_deg: float, x0, y0, phi_rad,
                  backend=None) -> np.ndarray:
    """Vectorised weight of rays entering at (x0, y0) with common AOI."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if theta_deg >= 90.0:
        return np.zeros_like(x0)
    cos_t = math.cos(math.radians(theta_deg))
    sin_t = math.sin(math.radians(theta_deg))
    core = in_core(design, x0, y0)
    n_in = np.where(core, design.n_co, design.n_cl)
    sin_i = design.n0 * sin_t / n_in
    cos_i = np.sqrt(1.0 - sin_i**2)
    t_in = fresnel_unpolarized(design.n0, n_in, cos_t)
    t_out = fresnel_unpolarized(n_in, design.exit_index, cos_i)
    path = design.h / cos_i

    na_raw = math.sqrt(design.n_co**2 - design.n_cl**2)
    guided = core & (design.n_co * sin_i <= na_raw * (1.0 + 1e-12))

    lateral = design.h * sin_i / cos_i
    straight = ~guided & (lateral > 0)
    frac_core = core.astype(float)
    if np.any(straight):
        idx = np.nonzero(straight)[0]
        phi = np.broadcast_to(np.asarray(phi_rad, dtype=float), x0.shape)[idx]
        try:
            clen = kernels.core_lengths(x0[idx], y0[idx], np.cos(phi), np.sin(phi),
                                        lateral[idx], design.p, 0.5 * design.d,
                                        backend=backend)
        except RuntimeError as exc:
            raise TracerGuardError(str(exc)) from exc
        frac_core[idx] = np.clip(clen / lateral[idx], 0.0, 1.0)

    op_core = frac_core * path
    op_clad = (1.0 - frac_core) * path
    w_straight = np.exp(-design.k_clad * op_clad - design.k_core * op_core)
    w_guided = np.exp(-design.k_core * path)
    return t_in * t_out * np.where(guided, w_guided, w_straight)


def trace_ray(design: FopDesign, ray: Ray, backend=None) -> float:
    """Transmitted weight of a single ray (deterministic)."""
    dx, dy, dz = (float(c) for c in ray.direction)
    if dz >= 0.0:
        raise ValueError("ray must travel into the plate (direction z < 0)")
    theta = math.degrees(math.acos(min(1.0, -dz)))
    phi = math.atan2(dy, dx)
    w = _trace_arrays(design, theta, [ray.origin[0]], [ray.origin[1]], [phi],
                      backend=backend)
    return float(w[0]) * ray.weight


def _stratified(n: int, rng: np.random.Generator, p: float,
                azimuth_offset_deg: float):
    """Jittered sqrt(N) x sqrt(N) entry points over one rhombic unit cell,
    with azimuths stratified over a 60 deg period."""
    m = math.ceil(math.sqrt(n))
    rows = math.ceil(n / m)
    k = np.arange(n)
    u1 = ((k % m) + rng.random(n)) / m
    u2 = ((k // m) + rng.random(n)) / rows
    x = u1 * p + u2 * 0.5 * p
    y = u2 * p * math.sqrt(3.0) / 2.0
    perm = rng.permutation(n)
    phi = np.radians(azimuth_offset_deg + 60.0 * (perm + rng.random(n)) / n)
    return x, y, phi


def _angle_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def angular_transmittance(design: FopDesign, theta_grid: Sequence[float],
                          samples_per_angle: int = DEFAULT_SAMPLES, seed: int = 0,
                          *, threads: int = 1, azimuth_offset_deg: float = 0.0,
                          wavelength: float = 660.0, backend=None) -> AngularResponse:
    """Mean transmittance of a collimated beam at each AOI in ``theta_grid``.

    Randomness for the i-th angle is keyed on ``(seed, i)`` so results do not
    depend on ``threads``.
    """
    if samples_per_angle < 1:
        raise ValueError("samples_per_angle must be >= 1")
    grid = np.asarray(theta_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("theta_grid must be a non-empty 1-D sequence")
    if np.any(grid < 0) or np.any(grid > 90.0):
        raise ValueError("theta_grid must lie in [0, 90] deg")

    def one(i: int) -> float:
        th = float(grid[i])
        if th >= 90.0:
            return 0.0
        rng = _angle_generator(seed, i)
        x, y, phi = _stratified(samples_per_angle, rng, design.p, azimuth_offset_deg)
        return float(np.mean(_trace_arrays(design, th, x, y, phi, backend=backend)))

    idx = range(grid.size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, idx))
    else:
        vals = [one(i) for i in idx]
    meta = {"wavelength_nm": wavelength, "samples": samples_per_angle, "seed": seed}
    return AngularResponse(grid, np.array(vals), meta)


def saturation_angle(resp: AngularResponse, window: float = 10.0, factor: float = 2.0) -> float:
    """First AOI past the acceptance knee where the curve has flattened out.

    That is the smallest sampled theta whose transmittance exceeds the value
    ``window`` degrees further out by less than ``factor``. Returns NaN when the
    curve never flattens inside the grid.
    """
    th, t = resp.theta_deg, resp.transmittance
    for k in range(th.size):
        if th[k] + window > th[-1] or th[k] + window >= 90.0:
            break
        ahead = float(np.interp(th[k] + window, th, t))
        if t[k] < factor * ahead and t[k] < 0.5 * t[0]:
            return float(th[k])
    return math.nan


def off_axis_floor(resp: AngularResponse, theta: float, width: float = 0.0) -> float:
    """Transmittance at ``theta``, or its mean over ``[theta, theta + width]``."""
    if width <= 0:
        return float(resp(theta))
    grid = np.linspace(theta, theta + width, 11)
    return float(np.mean(resp(grid)))

"""From angular transmittance to PSFs, collection efficiency and sensor images.

A point emitter at height ``l`` above the sensor delivers flux proportional
to ``T(theta) * cos(theta)**3`` to a pixel seen at polar angle ``theta``; the
collected fraction of an isotropic emitter is ``0.5 * int T sin dtheta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import fftconvolve

from .fop_tracer import FopDesign, in_core
from .response import AngularResponse


class ImagingError(ValueError):
    pass


@dataclass(frozen=True)
class OpticalGeometry:
    """Sample-to-sensor geometry. Lengths in um."""

    working_distance: float = 1000.0
    medium_index: float = 1.5
    pixel_pitch: float = 55.0
    pixel_count: tuple[int, int] = (36, 40)
    fiber_offset: tuple[float, float] = (0.0, 0.0)
    pixel_fill: float = 1.0

    def __post_init__(self):
        if self.working_distance <= 0:
            raise ImagingError("working distance must be positive")
        if self.medium_index < 1.0:
            raise ImagingError("medium index must be >= 1")
        if self.pixel_pitch <= 0:
            raise ImagingError("pixel pitch must be positive")
        rows, cols = self.pixel_count
        if rows < 1 or cols < 1:
            raise ImagingError("pixel counts must be >= 1")
        if not 0.0 < self.pixel_fill <= 1.0:
            raise ImagingError("pixel fill must lie in (0, 1]")
        object.__setattr__(self, "pixel_count", (int(rows), int(cols)))

    def with_(self, **kw) -> "OpticalGeometry":
        from dataclasses import replace

        return replace(self, **kw)

    @property
    def nyquist_width(self) -> float:
        return 2.0 * self.pixel_pitch


@dataclass(frozen=True)
class SceneImage:
    """Non-negative intensity grid; ``origin`` is the (x, y) um position of the
    outer corner of texel [0, 0]; rows run along y."""

    grid: np.ndarray
    pitch: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 2 or g.size == 0:
            raise ImagingError("scene grid must be a non-empty 2-D array")
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ImagingError("scene values must be finite and >= 0")
        if self.pitch <= 0:
            raise ImagingError("pitch must be positive")
        object.__setattr__(self, "grid", g)

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    @property
    def total(self) -> float:
        return float(self.grid.sum())


@dataclass(frozen=True)
class UsafPattern:
    """Three bright bars of width ``line_width`` (length 5x width, 50 % duty)."""

    line_width: float
    orientation: str = "vertical"

    def __post_init__(self):
        if self.line_width <= 0:
            raise ImagingError("line width must be positive")
        if self.orientation not in ("vertical", "horizontal"):
            raise ImagingError("orientation must be 'vertical' or 'horizontal'")

    @property
    def extent(self) -> float:
        return 5.0 * self.line_width


# --------------------------------------------------------------------- PSF

def psf_angular(T: AngularResponse) -> AngularResponse:
    """Angular PSF ``T * cos^3``, normalised to a peak of 1."""
    psf = T.transmittance * np.cos(np.radians(T.theta_deg)) ** 3
    peak = psf.max()
    if peak <= 0:
        raise ImagingError("degenerate PSF: transmittance is identically zero")
    return AngularResponse(T.theta_deg, np.clip(psf / peak, 0, 1), {"kind": "psf"})


def half_max_angle(curve: AngularResponse, level: float = 0.5) -> float:
    """Outermost-from-peak AOI where a peak-normalised curve first drops below ``level``."""
    v = curve.transmittance / curve.peak
    k = int(np.argmax(v))
    below = np.nonzero(v[k:] < level)[0]
    if below.size == 0:
        return float(curve.theta_deg[-1])
    j = k + int(below[0])
    th0, th1 = curve.theta_deg[j - 1], curve.theta_deg[j]
    v0, v1 = v[j - 1], v[j]
    return float(th0 + (v0 - level) / (v0 - v1) * (th1 - th0))


def fwhm_deg(T: AngularResponse) -> float:
    """Full angular width at half maximum of the PSF of ``T`` (symmetric about normal)."""
    return 2.0 * half_max_angle(psf_angular(T))


def medium_angle(theta_air_deg: float, medium_index: float) -> float:
    s = math.sin(math.radians(theta_air_deg)) / medium_index
    return math.degrees(math.asin(min(1.0, s)))


def fwhm_xy(theta_fwhm_deg: float, working_distance: float, medium_index: float = 1.0) -> float:
    """Lateral FWHM at distance ``l`` for an air-characterised angular FWHM."""
    half = medium_angle(theta_fwhm_deg / 2.0, medium_index)
    return 2.0 * working_distance * math.tan(math.radians(half))


def radial_kernel(T: AngularResponse, geom: OpticalGeometry, r) -> np.ndarray:
    """Unnormalised spatial PSF at sensor radius ``r`` (um)."""
    r = np.asarray(r, dtype=float)
    th_m = np.arctan2(r, geom.working_distance)
    s_air = geom.medium_index * np.sin(th_m)
    ok = s_air <= 1.0
    th_air = np.degrees(np.arcsin(np.clip(s_air, 0.0, 1.0)))
    th_air = np.clip(th_air, T.theta_deg[0], T.theta_deg[-1])
    t = np.interp(th_air, T.theta_deg, T.transmittance)
    return np.where(ok, t, 0.0) * np.cos(th_m) ** 3


def kernel_radius(T: AngularResponse, geom: OpticalGeometry, rel_tol: float = 1e-6) -> float:
    """Radius beyond which the spatial PSF stays below ``rel_tol`` of its peak."""
    th = T.theta_deg
    th_air = np.linspace(0.0, min(th[-1], 90.0), 4001)
    th_m = np.degrees(np.arcsin(np.sin(np.radians(th_air)) / geom.medium_index))
    r = geom.working_distance * np.tan(np.radians(np.minimum(th_m, 89.9)))
    vals = radial_kernel(T, geom, r)
    peak = vals.max()
    if peak <= 0:
        raise ImagingError("degenerate PSF: transmittance is identically zero")
    keep = np.nonzero(vals > rel_tol * peak)[0]
    k = min(int(keep[-1]) + 1, r.size - 1)
    return float(r[k])


def psf_spatial(T: AngularResponse, geom: OpticalGeometry, pitch: float,
                max_radius: float | None = None, supersample: int = 4) -> SceneImage:
    """Unit-sum 2-D kernel on a ``pitch`` grid, texel-area averaged."""
    if pitch <= 0:
        raise ImagingError("pitch must be positive")
    radius = kernel_radius(T, geom)
    if max_radius is not None:
        radius = min(radius, max_radius)
    if radius < pitch / 2.0:
        # support smaller than one texel: a delta
        return SceneImage(np.ones((1, 1)), pitch, (-pitch / 2.0, -pitch / 2.0))
    half = int(math.ceil(radius / pitch))
    n = 2 * half + 1
    ss = max(1, int(supersample))
    sub = (np.arange(n * ss) + 0.5) / ss - n / 2.0
    xx, yy = np.meshgrid(sub * pitch, sub * pitch, indexing="xy")
    vals = radial_kernel(T, geom, np.hypot(xx, yy))
    k = vals.reshape(n, ss, n, ss).mean(axis=(1, 3))
    total = k.sum()
    if total <= 0:
        raise ImagingError("degenerate PSF: kernel has no weight")
    return SceneImage(k / total, pitch, (-n * pitch / 2.0, -n * pitch / 2.0))


# --------------------------------------------------------- collection efficiency

def collection_efficiency(T: AngularResponse) -> float:
    """Collected fraction of an isotropic emitter: 0.5 * int T sin dtheta (trapezoid)."""
    if len(T) < 64:
        raise ImagingError("need at least 64 angular samples for the quadrature")
    if T.theta_deg[-1] < 85.0:
        raise ImagingError("angular grid must extend to at least 85 deg")
    th = np.radians(T.theta_deg)
    return float(0.5 * trapezoid(T.transmittance * np.sin(th), th))


def collection_efficiency_rect(theta_c: float) -> float:
    """Closed form for an ideal rectangular angle filter with cutoff ``theta_c`` deg."""
    if not 0.0 < theta_c <= 90.0:
        raise ImagingError("cutoff angle must lie in (0, 90] deg")
    return math.sin(math.radians(theta_c) / 2.0) ** 2


# ---------------------------------------------------------------- rendering

@lru_cache(maxsize=64)
def _fiber_mask(fop: FopDesign, pitch: float, shape: tuple[int, int],
                origin: tuple[float, float], offset: tuple[float, float],
                supersample: int) -> np.ndarray:
    rows, cols = shape
    ss = supersample
    ys = origin[1] + (np.arange(rows * ss) + 0.5) * pitch / ss - offset[1]
    xs = origin[0] + (np.arange(cols * ss) + 0.5) * pitch / ss - offset[0]
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    occ = in_core(fop, xx, yy).reshape(rows, ss, cols, ss).mean(axis=(1, 3))
    occ /= fop.fill_factor
    occ.setflags(write=False)
    return occ


def fiber_mask(fop: FopDesign, pitch: float, shape, origin=(0.0, 0.0),
               offset=(0.0, 0.0), supersample: int = 8) -> np.ndarray:
    """Core occupancy per texel divided by the fill factor (mean ~ 1)."""
    return _fiber_mask(fop, float(pitch), tuple(int(s) for s in shape),
                       tuple(float(o) for o in origin), tuple(float(o) for o in offset),
                       int(supersample))


@dataclass(frozen=True)
class NoiseModel:
    read_sigma: float = 0.0
    shot_gain: float = 0.0  # signal units -> electrons; 0 disables shot noise
    frames: int = 20


def _oversampling(scene: SceneImage, geom: OpticalGeometry) -> int:
    f = geom.pixel_pitch / scene.pitch
    fi = int(round(f))
    if f < 4.0 - 1e-9:
        raise ImagingError(
            f"scene pitch {scene.pitch} um is coarser than pixel_pitch/4 "
            f"({geom.pixel_pitch / 4} um)")
    if abs(f - fi) > 1e-6:
        raise ImagingError("pixel pitch must be an integer multiple of the scene pitch")
    return fi


def render(scene: SceneImage, T: AngularResponse, geom: OpticalGeometry,
           fop: FopDesign | None = None, noise: NoiseModel | None = None,
           seed: int = 0) -> SceneImage:
    """Sensor image of ``scene`` through a frontend with angular response ``T``.

    The sensor's outer corner sits at (0, 0) um; the scene is placed by its
    ``origin``. ``fop`` adds the fiber-core exit pattern at ``geom.fiber_offset``.
    """
    f = _oversampling(scene, geom)
    pitch = scene.pitch
    rows, cols = geom.pixel_count
    R, C = rows * f, cols * f
    oy = int(round(scene.origin[1] / pitch))
    ox = int(round(scene.origin[0] / pitch))
    extent = math.hypot(max(R, scene.shape[0] + abs(oy)), max(C, scene.shape[1] + abs(ox)))
    kernel = psf_spatial(T, geom, pitch, max_radius=extent * pitch)
    half = kernel.shape[0] // 2

    canvas = np.zeros((R + 2 * half, C + 2 * half))
    sr, sc = scene.shape
    r0, c0 = oy + half, ox + half
    a0, b0 = max(r0, 0), max(c0, 0)
    a1, b1 = min(r0 + sr, canvas.shape[0]), min(c0 + sc, canvas.shape[1])
    if a1 > a0 and b1 > b0:
        canvas[a0:a1, b0:b1] = scene.grid[a0 - r0:a1 - r0, b0 - c0:b1 - c0]
    blurred = fftconvolve(canvas, kernel.grid, mode="same")[half:half + R, half:half + C]
    blurred = np.clip(blurred, 0.0, None)

    if fop is not None:
        blurred = blurred * fiber_mask(fop, pitch, (R, C), (0.0, 0.0), geom.fiber_offset)

    if geom.pixel_fill < 1.0:
        side = math.sqrt(geom.pixel_fill) * f
        centers = (np.arange(f) + 0.5) - f / 2.0
        w1 = np.clip(side / 2.0 - np.abs(centers) + 0.5, 0.0, 1.0)
        active = np.outer(w1, w1)
        blurred = blurred * np.tile(active, (rows, cols))

    img = blurred.reshape(rows, f, cols, f).sum(axis=(1, 3))

    if noise is not None and (noise.read_sigma > 0 or noise.shot_gain > 0):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        frames = max(1, noise.frames)
        if noise.shot_gain > 0:
            electrons = img * noise.shot_gain * frames
            img = rng.poisson(electrons).astype(float) / (noise.shot_gain * frames)
        if noise.read_sigma > 0:
            img = img + rng.normal(0.0, noise.read_sigma / math.sqrt(frames), img.shape)
        img = np.clip(img, 0.0, None)
    return SceneImage(img, geom.pixel_pitch, (0.0, 0.0))


# -------------------------------------------------------------- USAF / CTF

def _coverage_1d(edges_lo, edges_hi, n: int, pitch: float, origin: float) -> np.ndarray:
    """Fraction of each texel [origin + i*pitch, +pitch) covered by the union of intervals."""
    lo = origin + np.arange(n) * pitch
    hi = lo + pitch
    cov = np.zeros(n)
    for a, b in zip(edges_lo, edges_hi):
        cov += np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
    return cov / pitch


def usaf_scene(pattern: UsafPattern, pitch: float, shape: tuple[int, int],
               center: tuple[float, float], brightness: float = 1.0) -> SceneImage:
    """Area-antialiased 3-bar element centred at ``center`` (um) on a dark field."""
    w = pattern.line_width
    rows, cols = shape
    cx, cy = center
    across = [(k * 2 * w - 2.5 * w, k * 2 * w - 1.5 * w) for k in range(3)]
    along = (-2.5 * w, 2.5 * w)
    if pattern.orientation == "vertical":
        gx = _coverage_1d([cx + a for a, _ in across], [cx + b for _, b in across], cols, pitch, 0.0)
        gy = _coverage_1d([cy + along[0]], [cy + along[1]], rows, pitch, 0.0)
    else:
        gy = _coverage_1d([cy + a for a, _ in across], [cy + b for _, b in across], rows, pitch, 0.0)
        gx = _coverage_1d([cx + along[0]], [cx + along[1]], cols, pitch, 0.0)
    return SceneImage(brightness * np.outer(gy, gx), pitch, (0.0, 0.0))


def michelson_contrast(image, roi=None) -> float:
    """(I_max - I_min) / (I_max + I_min) over the ROI (boolean mask or index)."""
    data = image.grid if isinstance(image, SceneImage) else np.asarray(image, dtype=float)
    vals = data if roi is None else data[roi]
    vals = np.asarray(vals, dtype=float).ravel()
    if vals.size == 0:
        raise ImagingError("empty ROI")
    hi, lo = float(vals.max()), float(vals.min())
    if hi + lo <= 0:
        raise ImagingError("contrast undefined: ROI is entirely dark")
    return (hi - lo) / (hi + lo)


def element_contrast(image: SceneImage, pattern: UsafPattern,
                     center: tuple[float, float]) -> float:
    """Contrast between the brightest bar pixel and darkest gap pixel.

    Pixels are profiled across the bars, averaging over the central 60 % of
    the bar length; bar and gap zones are each one line width wide.
    """
    w = pattern.line_width
    pp = image.pitch
    g = image.grid if pattern.orientation == "vertical" else image.grid.T
    c_across, c_along = center if pattern.orientation == "vertical" else center[::-1]
    n_along, n_across = g.shape
    along_c = (np.arange(n_along) + 0.5) * pp
    sel = np.abs(along_c - c_along) <= 0.3 * 5 * w
    if not np.any(sel):
        sel = np.abs(along_c - c_along) == np.abs(along_c - c_along).min()
    profile = g[sel].mean(axis=0)
    pos = (np.arange(n_across) + 0.5) * pp - c_across
    bars = [-2 * w, 0.0, 2 * w]
    gaps = [-w, w]

    def zone(centres):
        d = np.min(np.abs(pos[:, None] - np.array(centres)[None, :]), axis=1)
        m = d <= w / 2.0
        if not np.any(m):
            m = d == d.min()
        return m

    hi = float(profile[zone(bars)].max())
    lo = float(profile[zone(gaps)].min())
    if hi + lo <= 0:
        raise ImagingError("contrast undefined: element is entirely dark")
    return max(0.0, (hi - lo) / (hi + lo))


def render_usaf(pattern: UsafPattern, T: AngularResponse, geom: OpticalGeometry,
                fop: FopDesign | None = None, oversample: int = 4, phase: float = 0.0,
                noise: NoiseModel | None = None, seed: int = 0):
    """Render one element on a sensor patch sized to it.

    ``phase`` shifts the element across the bars by that fraction of a pixel.
    Returns ``(image, center)``.
    """
    pp = geom.pixel_pitch
    pitch = pp / oversample
    w = pattern.line_width
    margin = 3 * pp + min(kernel_radius(T, geom), 5 * w)
    n = int(math.ceil((pattern.extent + 2 * margin) / pp))
    g = geom.with_(pixel_count=(n, n))
    cx = cy = n * pp / 2.0
    if pattern.orientation == "vertical":
        cx += phase * pp
    else:
        cy += phase * pp
    scene = usaf_scene(pattern, pitch, (n * oversample, n * oversample), (cx, cy))
    return render(scene, T, g, fop=fop, noise=noise, seed=seed), (cx, cy)


def ctf(T: AngularResponse, geom: OpticalGeometry, line_widths: Sequence[float],
        fop: FopDesign | None = None, phases: int = 8, oversample: int = 4,
        orientation: str = "vertical") -> list[tuple[float, float]]:
    """Phase-averaged contrast for each line width (widths sorted descending)."""
    widths = [float(w) for w in line_widths]
    if not widths:
        raise ImagingError("no line widths given")
    if any(b > a for a, b in zip(widths, widths[1:])):
        raise ImagingError("line widths must be sorted in descending order")
    out = []
    for w in widths:
        pat = UsafPattern(w, orientation)
        cs = []
        for k in range(phases):
            img, center = render_usaf(pat, T, geom, fop=fop, oversample=oversample,
                                      phase=k / phases)
            cs.append(element_contrast(img, pat, center))
        out.append((w, float(np.mean(cs))))
    return out


@dataclass(frozen=True)
class Resolution:
    line_width: float
    pixel_limited: bool
    reached: bool = True


def resolution_at(table: Sequence[tuple[float, float]], level: float = 0.4,
                  nyquist_width: float | None = None) -> Resolution:
    """Line width where contrast crosses ``level`` (linear interpolation).

    ``pixel_limited`` is set when contrast at the Nyquist width (``2 *
    pixel_pitch``) is still at or above ``level``. Contrast reversal at widths
    past the first crossing is ignored.
    """
    widths = np.array([w for w, _ in table], dtype=float)
    con = np.array([c for _, c in table], dtype=float)
    pixel_limited = False
    if nyquist_width is not None:
        if nyquist_width < widths[-1] - 1e-9 or nyquist_width > widths[0] + 1e-9:
            raise ImagingError("Nyquist width lies outside the tested line widths")
        c_nyq = float(np.interp(nyquist_width, widths[::-1], con[::-1]))
        pixel_limited = c_nyq >= level
    if con[0] < level:
        return Resolution(float(widths[0]), False, reached=False)
    below = np.nonzero(con < level)[0]
    if below.size == 0:
        w_res = float(widths[-1])
        reached = False
    else:
        j = int(below[0])
        w0, w1, c0, c1 = widths[j - 1], widths[j], con[j - 1], con[j]
        w_res = float(w0 + (c0 - level) / (c0 - c1) * (w1 - w0))
        reached = True
    return Resolution(w_res, pixel_limited, reached)


# Line widths of 1951 USAF groups -1 .. 3 (um), descending.
def usaf_line_widths(groups: Iterable[int] = range(-1, 4)) -> list[float]:
    out = []
    for g in groups:
        for e in range(1, 7):
            lp_per_mm = 2.0 ** (g + (e - 1) / 6.0)
            out.append(1000.0 / (2.0 * lp_per_mm))
    return sorted(out, reverse=True)


# ------------------------------------------------------ pixel/fiber modulation

FIBER_JITTER = 0.1  # std of fiber-centre displacement, in units of pitch


def pixel_occupancy(fop: FopDesign, pixel_pitch: float, n_pixels: int, rng: np.random.Generator,
                    jitter: float = FIBER_JITTER, samples_per_fiber: int = 10) -> np.ndarray:
    """Core-area fraction of each pixel in an ``n_pixels`` square array.

    The lattice gets a random offset and rotation relative to the pixels, and
    each fiber centre is displaced by Gaussian noise of ``jitter * p``.
    """
    ss = max(8, int(math.ceil(samples_per_fiber * pixel_pitch / fop.p)))
    step = pixel_pitch / ss
    c = (np.arange(n_pixels * ss) + 0.5) * step
    xx, yy = np.meshgrid(c, c, indexing="xy")
    ang = rng.random() * math.pi / 3.0
    off = (rng.random() * fop.p, rng.random() * fop.p)
    ca, sa = math.cos(ang), math.sin(ang)
    x = ca * xx - sa * yy - off[0]
    y = sa * xx + ca * yy - off[1]
    p, r = fop.p, fop.d / 2.0
    row = p * math.sqrt(3.0) / 2.0
    j0 = np.rint(y / row).astype(np.int64)
    i0 = np.rint((x - p * j0 / 2.0) / p).astype(np.int64)
    lo_j, lo_i = j0.min() - 1, i0.min() - 1
    shift = rng.normal(0.0, jitter * p, size=(j0.max() - lo_j + 2, i0.max() - lo_i + 2, 2))
    inside = np.zeros(x.shape, dtype=bool)
    for dj in (-1, 0, 1):
        for di in (-1, 0, 1):
            jj, ii = j0 + dj, i0 + di
            s = shift[jj - lo_j, ii - lo_i]
            cx = ii * p + jj * p / 2.0 + s[..., 0]
            cy = jj * row + s[..., 1]
            inside |= (x - cx) ** 2 + (y - cy) ** 2 <= r * r
    return inside.reshape(n_pixels, ss, n_pixels, ss).mean(axis=(1, 3))


def pixel_fiber_modulation(fop: FopDesign, pitch_ratios: Sequence[float], n_offsets: int = 16,
                           seed: int = 0, n_pixels: int = 8,
                           jitter: float = FIBER_JITTER) -> list[tuple[float, float]]:
    """Relative pixel responsivity spread vs pixel-to-fiber pitch ratio.

    For each ratio, the std/mean of per-pixel core occupancy, averaged over
    random fiber/pixel alignments.
    """
    if not pitch_ratios:
        raise ImagingError("no pitch ratios given")
    out = []
    for i, ratio in enumerate(pitch_ratios):
        if ratio < 0.5:
            raise ImagingError("pitch ratio must be >= 0.5")
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(i,))))
        stds = []
        for _ in range(n_offsets):
            occ = pixel_occupancy(fop, ratio * fop.p, n_pixels, rng, jitter)
            m = occ.mean()
            stds.append(occ.std() / m if m > 0 else 0.0)
        out.append((float(ratio), float(np.mean(stds))))
    return out

"""Run configuration and artifact writers (CSV, 16-bit PGM, SVG plots, JSON)."""

from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .filter_model import FilterError, FilterSpec, triple_band_filter
from .fop_tracer import PRESETS, DesignError, FopDesign
from .frontend import Order
from .imaging import ImagingError, OpticalGeometry, SceneImage


class ConfigError(ValueError):
    """Invalid configuration; the message carries ``file:line`` when known."""


# section -> key -> converter
_FLOAT, _INT, _STR = float, int, str


def _floats(text: str) -> tuple[float, ...]:
    parts = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    return tuple(float(t) for t in parts)


def _bands(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        lo, sep, hi = chunk.partition("-")
        if not sep:
            raise ValueError(f"passband {chunk!r} is not 'lo-hi'")
        out.append((float(lo), float(hi)))
    if not out:
        raise ValueError("no passbands given")
    return tuple(out)


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA = {
    "run": {"seed": _INT, "out_dir": _STR, "threads": _INT},
    "fop": {"preset": _STR, "n_co": _FLOAT, "n_cl": _FLOAT, "n0": _FLOAT, "d": _FLOAT,
            "p": _FLOAT, "h": _FLOAT, "k_clad": _FLOAT, "k_core": _FLOAT, "n_exit": _FLOAT,
            "alpha_deg": _FLOAT, "fill_factor": _FLOAT},
    "filter": {"passbands": _bands, "pass_transmittance": _FLOAT, "stop_od": _FLOAT,
               "rolloff_width": _FLOAT, "n_eff": _FLOAT},
    "frontend": {"order": _STR, "lambda_ex": _FLOAT, "s_capture": _FLOAT, "s_exit": _FLOAT,
                 "calibrate": _bool, "last_od_0": _FLOAT, "first_od_oblique": _FLOAT},
    "geometry": {"working_distance": _FLOAT, "medium_index": _FLOAT, "pixel_pitch": _FLOAT,
                 "pixel_rows": _INT, "pixel_cols": _INT, "pixel_fill": _FLOAT},
    "sweep": {"theta_max": _FLOAT, "theta_step": _FLOAT, "samples": _INT, "alpha_list": _floats,
              "na_list": _floats, "ff_list": _floats, "h_list": _floats,
              "lambda_list": _floats, "emission_nm": _FLOAT},
    "render": {"line_widths": _floats, "contrast_level": _FLOAT, "phases": _INT,
               "oversample": _INT, "fiber_mask": _bool},
    "optimize": {"od_target": _FLOAT, "theta_min": _FLOAT, "theta_max": _FLOAT,
                 "h_min": _INT, "h_max": _INT, "order": _STR, "lambda_ex": _FLOAT,
                 "samples": _INT},
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1
    fop: FopDesign = field(default_factory=FopDesign)
    filter: FilterSpec = field(default_factory=triple_band_filter)
    frontend: dict = field(default_factory=dict)
    geometry: OpticalGeometry = field(default_factory=OpticalGeometry)
    sweep: dict = field(default_factory=dict)
    render: dict = field(default_factory=dict)
    optimize: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


FRONTEND_DEFAULTS = {"order": "dual", "lambda_ex": 660.0, "s_capture": 0.0, "s_exit": 0.0,
                     "calibrate": False, "last_od_0": 3.7, "first_od_oblique": 5.0}
SWEEP_DEFAULTS = {"theta_max": 90.0, "theta_step": 1.0, "samples": 4096,
                  "alpha_list": (), "na_list": (0.1, 0.2, 0.3, 0.4), "ff_list": (0.5,),
                  "h_list": (250.0,), "lambda_list": (660.0,), "emission_nm": 694.0}
RENDER_DEFAULTS = {"line_widths": (), "contrast_level": 0.4, "phases": 8, "oversample": 4,
                   "fiber_mask": False}
OPTIMIZE_DEFAULTS = {"od_target": 6.0, "theta_min": 0.0, "theta_max": 89.0, "h_min": 1,
                     "h_max": 5000, "order": "dual", "lambda_ex": 660.0, "samples": 4096}


def _line_index(text: str) -> dict:
    """(section, key) -> 1-based line number; (section, None) for headers."""
    idx, sect = {}, None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", line)
        if m:
            sect = m.group(1).strip().lower()
            idx.setdefault((sect, None), n)
            continue
        key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
        idx.setdefault((sect, key), n)
    return idx


def load_config(path=None, text: str | None = None) -> RunConfig:
    """Parse and validate a run configuration. Missing file -> defaults."""
    if path is None and text is None:
        return default_sections()
    name = str(path) if path is not None else "<string>"
    if text is None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{name}: cannot read config ({exc.strerror})") from None
    lines = _line_index(text)

    def where(sect, key=None):
        n = lines.get((sect, key)) or lines.get((sect, None))
        return f"{name}:{n}" if n else name

    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=name)
    except configparser.Error as exc:
        ln = getattr(exc, "lineno", None)
        msg = str(exc).splitlines()[0]
        raise ConfigError(f"{name}:{ln}: {msg}" if ln else f"{name}: {msg}") from None

    vals: dict[str, dict] = {}
    for sect in cp.sections():
        if sect not in SCHEMA:
            raise ConfigError(f"{where(sect)}: unknown section [{sect}]")
        vals[sect] = {}
        for key, raw in cp.items(sect):
            conv = SCHEMA[sect].get(key)
            if conv is None:
                raise ConfigError(f"{where(sect, key)}: unknown key '{key}' in [{sect}]")
            try:
                vals[sect][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{where(sect, key)}: bad value for {sect}.{key}: {exc}") from None

    def build(sect, fn):
        try:
            return fn(vals.get(sect, {}))
        except (ValueError, DesignError, FilterError, ImagingError, TypeError) as exc:
            raise ConfigError(f"{where(sect)}: invalid [{sect}]: {exc}") from None

    run = vals.get("run", {})
    if run.get("seed", 0) < 0:
        raise ConfigError(f"{where('run', 'seed')}: seed must be >= 0")
    if run.get("threads", 1) < 1:
        raise ConfigError(f"{where('run', 'threads')}: threads must be >= 1")
    fop = build("fop", _make_fop)
    filt = build("filter", lambda v: triple_band_filter(**v))
    frontend = build("frontend", lambda v: _checked(v, FRONTEND_DEFAULTS, order=True))
    geom = build("geometry", _make_geometry)
    sweep = build("sweep", lambda v: _checked(v, SWEEP_DEFAULTS))
    render = build("render", lambda v: _checked(v, RENDER_DEFAULTS))
    optimize = build("optimize", lambda v: _checked(v, OPTIMIZE_DEFAULTS, order=True))
    return RunConfig(run.get("seed", 0), run.get("out_dir", "out"), run.get("threads", 1),
                     fop, filt, frontend, geom, sweep, render, optimize, name)


def default_sections() -> RunConfig:
    return RunConfig(frontend=dict(FRONTEND_DEFAULTS), sweep=dict(SWEEP_DEFAULTS),
                     render=dict(RENDER_DEFAULTS), optimize=dict(OPTIMIZE_DEFAULTS))


def _checked(v: dict, defaults: dict, order: bool = False) -> dict:
    out = {**defaults, **v}
    if order:
        Order.parse(out["order"])
    for k in ("samples", "phases", "oversample"):
        if k in out and out[k] < 1:
            raise ValueError(f"{k} must be >= 1")
    for k in ("s_capture", "s_exit"):
        if k in out and not 0.0 <= out[k] <= 0.1:
            raise ValueError(f"{k} must lie in [0, 0.1]")
    if "theta_max" in out and not 0.0 < out["theta_max"] <= 90.0:
        raise ValueError("theta_max must lie in (0, 90]")
    if "theta_step" in out and out["theta_step"] <= 0:
        raise ValueError("theta_step must be > 0")
    return out


def _make_fop(v: dict) -> FopDesign:
    v = dict(v)
    preset = v.pop("preset", "default")
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r} (choose from {', '.join(PRESETS)})")
    alpha = v.pop("alpha_deg", None)
    ff = v.pop("fill_factor", None)
    design = PRESETS[preset](**v)
    if alpha is not None:
        design = design.with_alpha(alpha)
    if ff is not None:
        design = design.with_fill_factor(ff)
    return design


def _make_geometry(v: dict) -> OpticalGeometry:
    v = dict(v)
    base = OpticalGeometry()
    rows = v.pop("pixel_rows", base.pixel_count[0])
    cols = v.pop("pixel_cols", base.pixel_count[1])
    return OpticalGeometry(pixel_count=(rows, cols), **v)


# ------------------------------------------------------------------ writers

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def write_csv(path, header: Sequence[str], rows) -> Path:
    """UTF-8, LF line endings, one header row."""
    path = Path(path)
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_csv_table(path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in text[0].split(",")]
    rows = [[float(x) for x in ln.split(",")] for ln in text[1:] if ln.strip()]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8",
                    newline="\n")
    return path


def write_pgm(path, image: SceneImage, sidecar: bool = True) -> Path:
    """Binary 16-bit graymap scaled so the brightest pixel is 65535.

    A ``<name>.csv`` sidecar records pitch, origin and the scale back to
    physical units.
    """
    path = Path(path)
    g = image.grid
    peak = float(g.max())
    scale = peak / 65535.0 if peak > 0 else 1.0
    data = np.rint(g / scale).astype(">u2") if peak > 0 else np.zeros(g.shape, ">u2")
    rows, cols = g.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())
    if sidecar:
        # repr keeps the metadata lossless
        meta = [("pitch_um", image.pitch), ("origin_x_um", image.origin[0]),
                ("origin_y_um", image.origin[1]), ("value_per_count", scale)]
        write_csv(path.with_suffix(".csv"), ["key", "value"],
                  [(k, repr(float(v))) for k, v in meta])
    return path


def read_pgm(path) -> SceneImage:
    """Inverse of :func:`write_pgm` (uses the sidecar when present)."""
    path = Path(path)
    raw = path.read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if not m:
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows, maxval = (int(x) for x in m.groups())
    dtype = ">u2" if maxval > 255 else "u1"
    g = np.frombuffer(raw[m.end():], dtype=dtype, count=rows * cols).reshape(rows, cols)
    pitch, origin, scale = 1.0, (0.0, 0.0), 1.0
    side = path.with_suffix(".csv")
    if side.exists():
        meta = {r.split(",")[0]: float(r.split(",")[1])
                for r in side.read_text(encoding="utf-8").splitlines()[1:] if r}
        pitch = meta["pitch_um"]
        origin = (meta["origin_x_um"], meta["origin_y_um"])
        scale = meta["value_per_count"]
    return SceneImage(g.astype(float) * scale, pitch, origin)


# --------------------------------------------------------------------- SVG

_COLORS = ("#1f4e9c", "#c2402a", "#2a8c4a", "#8a3ea8", "#b8860b", "#2b8a9b", "#555555")


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [round(start + i * step, 10) for i in range(int((hi - start) / step + 1e-9) + 1)]


def svg_plot(path, series: dict, xlabel: str, ylabel: str, log_y: bool = False,
             title: str = "", width: int = 640, height: int = 420) -> Path:
    """Line plot of ``{label: (x, y)}`` as a standalone SVG file."""
    if not series:
        raise ValueError("nothing to plot")
    ml, mr, mt, mb = 70, 20, 30 if title else 15, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = [np.asarray(y, float) for _, y in series.values()]
    if log_y:
        pos = np.concatenate([y[y > 0] for y in ys]) if any(np.any(y > 0) for y in ys) else np.ones(1)
        ylo = math.floor(math.log10(pos.min()))
        yhi = math.ceil(math.log10(pos.max()))
        if yhi == ylo:
            yhi += 1
        floor = 10.0 ** ylo
        fy = lambda v: np.log10(np.maximum(v, floor))  # noqa: E731
        yt = list(range(ylo, yhi + 1))
        ylab = [f"1e{t}" for t in yt]
    else:
        allv = np.concatenate(ys)
        ylo, yhi = float(min(0.0, allv.min())), float(allv.max())
        if yhi <= ylo:
            yhi = ylo + 1.0
        fy = lambda v: v  # noqa: E731
        yt = _ticks(ylo, yhi)
        ylab = [f"{t:g}" for t in yt]
    xlo, xhi = float(xs.min()), float(xs.max())
    if xhi <= xlo:
        xhi = xlo + 1.0

    def px(x):
        return ml + (np.asarray(x, float) - xlo) / (xhi - xlo) * pw

    def py(y):
        return mt + ph - (fy(np.asarray(y, float)) - ylo) / (yhi - ylo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{_esc(title)}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _ticks(xlo, xhi):
        x = float(px(t))
        out.append(f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{mt + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t, lab in zip(yt, ylab):
        y = mt + ph - (t - ylo) / (yhi - ylo) * ph
        out.append(f'<line x1="{ml - 5}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{y + 4:.2f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text transform="translate(16,{mt + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{_esc(ylabel)}</text>')
    for k, (label, (x, y)) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px(x), py(y)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 14 + 16 * k
        out.append(f'<line x1="{ml + pw - 110}" y1="{ly - 4}" x2="{ml + pw - 90}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw - 85}" y="{ly}">{_esc(str(label))}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
    return path


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")

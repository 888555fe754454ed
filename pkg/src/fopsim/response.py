"""Sampled angular transmittance curves and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ResponseError(ValueError):
    pass


@dataclass(frozen=True)
class AngularResponse:
    """Transmittance sampled on a strictly increasing grid of AOIs (degrees).

    The grid may include 90 deg (grazing), where every interface transmits 0.
    """

    theta_deg: np.ndarray
    transmittance: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        th = np.asarray(self.theta_deg, dtype=float).copy()
        t = np.asarray(self.transmittance, dtype=float).copy()
        if th.ndim != 1 or th.shape != t.shape or th.size == 0:
            raise ResponseError("theta and transmittance must be equal-length 1-D arrays")
        if np.any(np.diff(th) <= 0):
            raise ResponseError("theta grid must be strictly increasing")
        if th[0] < 0 or th[-1] > 90.0:
            raise ResponseError("theta grid must lie in [0, 90] deg")
        if np.any(~np.isfinite(t)) or np.any(t < 0) or np.any(t > 1 + 1e-12):
            raise ResponseError("transmittance must lie in [0, 1]")
        th.setflags(write=False)
        t = np.minimum(t, 1.0)
        t.setflags(write=False)
        object.__setattr__(self, "theta_deg", th)
        object.__setattr__(self, "transmittance", t)

    def __len__(self) -> int:
        return self.theta_deg.size

    def __call__(self, theta):
        """Linear interpolation; raises outside the sampled range."""
        th = np.asarray(theta, dtype=float)
        if np.any(th < self.theta_deg[0] - 1e-9) or np.any(th > self.theta_deg[-1] + 1e-9):
            raise ResponseError(
                f"angle outside sampled range [{self.theta_deg[0]}, {self.theta_deg[-1]}]")
        out = np.interp(th, self.theta_deg, self.transmittance)
        return float(out) if out.ndim == 0 else out

    @property
    def peak(self) -> float:
        return float(self.transmittance.max())

    def scaled(self, factor: float) -> "AngularResponse":
        return AngularResponse(self.theta_deg, self.transmittance * factor, dict(self.meta))

    def to_csv(self, path=None, value_name: str = "transmittance") -> str:
        buf = io.StringIO()
        buf.write(f"theta_deg,{value_name}\n")
        for th, t in zip(self.theta_deg, self.transmittance):
            buf.write(f"{th:.6g},{t:.10e}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="\n")
        return text

    @classmethod
    def from_csv(cls, path) -> "AngularResponse":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or len(rows[0]) < 2 or rows[0][0].strip() != "theta_deg":
            raise ResponseError(f"{path}: expected header 'theta_deg,<value>'")
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:] if r], dtype=float)
        if data.size == 0:
            raise ResponseError(f"{path}: no data rows")
        return cls(data[:, 0], data[:, 1], {"source": str(path)})


def rectangular(theta_c: float, n: int = 9001, theta_max: float = 90.0,
                level: float = 1.0) -> AngularResponse:
    """Ideal angle filter: ``level`` for theta <= theta_c, zero beyond."""
    if not 0.0 < theta_c <= theta_max:
        raise ResponseError(f"cutoff {theta_c} deg must lie in (0, {theta_max}]")
    th = np.linspace(0.0, theta_max, n)
    # exact step: a node on the cutoff and one just past it
    edge = [t for t in (theta_c, theta_c + 1e-7) if t < theta_max]
    th = np.union1d(th, edge)
    return AngularResponse(th, np.where(th <= theta_c + 1e-12, level, 0.0),
                           {"kind": "rectangular", "theta_c": theta_c})


def unity(n: int = 9001) -> AngularResponse:
    th = np.linspace(0.0, 90.0, n)
    return AngularResponse(th, np.ones_like(th), {"kind": "unity"})

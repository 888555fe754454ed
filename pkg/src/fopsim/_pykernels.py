"""Pure-Python lattice-chord kernel (fallback for the compiled extension).

A ray's lateral track is the segment ``P0 + t*u`` for ``t`` in ``[0, L]`` in
the plane of a hexagonal lattice of disks (pitch ``p``, radius ``r``) centred
at ``i*a1 + j*a2`` with ``a1 = (p, 0)`` and ``a2 = (p/2, p*sqrt(3)/2)``.
For every lattice row whose band ``|y - y_j| < r`` the segment crosses, the
candidate disks are enumerated from the x-extent of the crossing, and the
exact chord ``[tc - half, tc + half]`` clipped to ``[0, L]`` is accumulated.
The return value is the total lateral length spent inside disks.
"""

from __future__ import annotations

import math

import numpy as np

_ROW = math.sqrt(3.0) / 2.0


def _one(xa: float, ya: float, dx: float, dy: float, L: float,
         pitch: float, radius: float) -> float:
    row = pitch * _ROW
    r2 = radius * radius
    total = 0.0
    checks = 0
    cap = int(10.0 * L / pitch) + 50
    ymin = min(ya, ya + L * dy)
    ymax = max(ya, ya + L * dy)
    j0 = math.floor((ymin - radius) / row)
    j1 = math.ceil((ymax + radius) / row)
    for j in range(j0, j1 + 1):
        yc = j * row
        if abs(dy) > 1e-12:
            t1 = (yc - radius - ya) / dy
            t2 = (yc + radius - ya) / dy
            tlo = max(min(t1, t2), 0.0)
            thi = min(max(t1, t2), L)
            if tlo > thi:
                continue
        else:
            if abs(ya - yc) >= radius:
                continue
            tlo, thi = 0.0, L
        xlo = min(xa + dx * tlo, xa + dx * thi) - radius
        xhi = max(xa + dx * tlo, xa + dx * thi) + radius
        xoff = 0.5 * pitch * j
        wy = yc - ya
        i0 = math.floor((xlo - xoff) / pitch)
        i1 = math.ceil((xhi - xoff) / pitch)
        for i in range(i0, i1 + 1):
            checks += 1
            wx = i * pitch + xoff - xa
            tc = wx * dx + wy * dy
            d2 = wx * wx + wy * wy - tc * tc
            if d2 < r2:
                half = math.sqrt(r2 - d2)
                a = max(tc - half, 0.0)
                b = min(tc + half, L)
                if b > a:
                    total += b - a
    if checks > cap:
        raise RuntimeError("lattice march exceeded its step budget")
    return total


def core_lengths(x0, y0, ux, uy, length, pitch: float, radius: float) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    out = np.empty(x0.shape[0])
    for k, args in enumerate(zip(x0.tolist(), np.asarray(y0, float).tolist(),
                                 np.asarray(ux, float).tolist(),
                                 np.asarray(uy, float).tolist(),
                                 np.asarray(length, float).tolist())):
        out[k] = _one(*args, pitch, radius)
    return out

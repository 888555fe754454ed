# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled lattice-chord kernel.

Mirrors ``fopsim._pykernels.core_lengths`` exactly; see that module for the
algorithm description.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, ceil, fabs, fmin, fmax

cnp.import_array()


def core_lengths(double[::1] x0, double[::1] y0, double[::1] ux, double[::1] uy,
                 double[::1] length, double pitch, double radius):
    cdef Py_ssize_t n = x0.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double row = pitch * 0.8660254037844386
    cdef double r2 = radius * radius
    cdef Py_ssize_t k
    cdef long j, j0, j1, i, i0, i1
    cdef double xa, ya, dx, dy, L, total, ymin, ymax, yc, t1, t2, tlo, thi
    cdef double xlo, xhi, xoff, cx, wx, wy, tc, d2, half, a, b
    cdef long checks, cap
    cdef int overflow = 0

    with nogil:
        for k in range(n):
            xa = x0[k]
            ya = y0[k]
            dx = ux[k]
            dy = uy[k]
            L = length[k]
            total = 0.0
            checks = 0
            cap = <long>(10.0 * L / pitch) + 50
            ymin = fmin(ya, ya + L * dy)
            ymax = fmax(ya, ya + L * dy)
            j0 = <long>floor((ymin - radius) / row)
            j1 = <long>ceil((ymax + radius) / row)
            for j in range(j0, j1 + 1):
                yc = j * row
                if fabs(dy) > 1e-12:
                    t1 = (yc - radius - ya) / dy
                    t2 = (yc + radius - ya) / dy
                    tlo = fmax(fmin(t1, t2), 0.0)
                    thi = fmin(fmax(t1, t2), L)
                    if tlo > thi:
                        continue
                else:
                    if fabs(ya - yc) >= radius:
                        continue
                    tlo = 0.0
                    thi = L
                xlo = fmin(xa + dx * tlo, xa + dx * thi) - radius
                xhi = fmax(xa + dx * tlo, xa + dx * thi) + radius
                xoff = 0.5 * pitch * j
                i0 = <long>floor((xlo - xoff) / pitch)
                i1 = <long>ceil((xhi - xoff) / pitch)
                for i in range(i0, i1 + 1):
                    checks += 1
                    cx = i * pitch + xoff
                    wx = cx - xa
                    wy = yc - ya
                    tc = wx * dx + wy * dy
                    d2 = wx * wx + wy * wy - tc * tc
                    if d2 < r2:
                        half = sqrt(r2 - d2)
                        a = fmax(tc - half, 0.0)
                        b = fmin(tc + half, L)
                        if b > a:
                            total = total + (b - a)
            if checks > cap:
                overflow = 1
            out[k] = total
    if overflow:
        raise RuntimeError("lattice march exceeded its step budget")
    return out_arr

# cython: language_level=3
"""Compiled batch warp kernel; mirrors collabtrack._warp.warp_batch exactly."""

import numpy as np

cimport cython
from libc.math cimport floor


@cython.boundscheck(False)
@cython.wraparound(False)
def warp_batch(frame, coeffs, int side):
    """Bilinear-sample one ``side``x``side`` patch per coefficient row.

    Same contract as the NumPy fallback: coeffs rows are
    (cx, cy, axx, axy, ayx, ayy); out-of-frame coordinates clamp to the
    nearest valid pixel.
    """
    cdef double[:, ::1] img = np.ascontiguousarray(frame, dtype=np.float64)
    cdef double[:, ::1] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t n = cf.shape[0]
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    out = np.empty((n, side * side), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double half = (side - 1) / 2.0
    cdef double xmax = w - 1.0
    cdef double ymax = h - 1.0
    cdef Py_ssize_t k, ui, vi, x0, y0, x1, y1
    cdef double cx, cy, axx, axy, ayx, ayy
    cdef double du, dv, x, y, fx, fy, v00, v01, v10, v11
    for k in range(n):
        cx = cf[k, 0]
        cy = cf[k, 1]
        axx = cf[k, 2]
        axy = cf[k, 3]
        ayx = cf[k, 4]
        ayy = cf[k, 5]
        for vi in range(side):
            dv = vi - half
            for ui in range(side):
                du = ui - half
                x = cx + axx * du + axy * dv
                y = cy + ayx * du + ayy * dv
                if x < 0.0:
                    x = 0.0
                elif x > xmax:
                    x = xmax
                if y < 0.0:
                    y = 0.0
                elif y > ymax:
                    y = ymax
                x0 = <Py_ssize_t>floor(x)
                y0 = <Py_ssize_t>floor(y)
                x1 = x0 + 1
                if x1 > w - 1:
                    x1 = w - 1
                y1 = y0 + 1
                if y1 > h - 1:
                    y1 = h - 1
                fx = x - x0
                fy = y - y0
                v00 = img[y0, x0]
                v01 = img[y0, x1]
                v10 = img[y1, x0]
                v11 = img[y1, x1]
                o[k, vi * side + ui] = (1.0 - fy) * (
                    (1.0 - fx) * v00 + fx * v01
                ) + fy * ((1.0 - fx) * v10 + fx * v11)
    return out

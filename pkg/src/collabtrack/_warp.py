"""Pure-NumPy batch warp kernel (fallback for the compiled extension).

Both kernels evaluate the same expression tree so their outputs agree to
the last bit on IEEE-754 hardware.
"""

import numpy as np


def warp_batch(frame, coeffs, side):
    """Bilinear-sample one ``side``x``side`` patch per coefficient row.

    ``frame`` is a (height, width) float64 array. ``coeffs`` has one row
    per patch: (cx, cy, axx, axy, ayx, ayy). Template pixel (u, v) maps to
    frame coordinates x = cx + axx*du + axy*dv, y = cy + ayx*du + ayy*dv
    with du = u - (side-1)/2, dv = v - (side-1)/2. Coordinates outside the
    frame clamp to the nearest valid pixel. Returns (n, side*side) float64,
    row-major over (v, u).
    """
    frame = np.asarray(frame, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    h, w = frame.shape
    half = (side - 1) / 2.0
    dv, du = np.mgrid[0:side, 0:side]
    du = (du - half).ravel()
    dv = (dv - half).ravel()
    x = coeffs[:, 0:1] + coeffs[:, 2:3] * du + coeffs[:, 3:4] * dv
    y = coeffs[:, 1:2] + coeffs[:, 4:5] * du + coeffs[:, 5:6] * dv
    np.clip(x, 0.0, float(w - 1), out=x)
    np.clip(y, 0.0, float(h - 1), out=y)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    v00 = frame[y0, x0]
    v01 = frame[y0, x1]
    v10 = frame[y1, x0]
    v11 = frame[y1, x1]
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * (
        (1.0 - fx) * v10 + fx * v11
    )

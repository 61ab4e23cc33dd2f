"""Grayscale frame handling and affine patch extraction.

Frames hold float64 intensities in [0, 1]. Observations are 32x32 crops
sampled under a six-parameter affine state with bilinear interpolation and
flattened row-major to 1024-vectors. Patch extraction dispatches to the
compiled kernel when the extension built, else to the NumPy fallback
(``USING_COMPILED_WARP`` reports which one is active).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _warp as _warp_numpy
from .errors import FormatError

try:
    from . import _warp_fast as _kernel

    USING_COMPILED_WARP = True
except ImportError:
    _kernel = _warp_numpy
    USING_COMPILED_WARP = False

PATCH_SIDE = 32
PATCH_PIXELS = PATCH_SIDE * PATCH_SIDE
# Template pixel centers sit at u - 15.5 so the patch is symmetric about
# the state center.
TEMPLATE_HALF = (PATCH_SIDE - 1) / 2.0


@dataclass(frozen=True)
class GrayFrame:
    """A single grayscale frame with intensities in [0, 1]."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"pixel buffer shape {px.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class AffineState:
    """Six-parameter target pose: translation, scale, rotation, aspect, skew."""

    cx: float
    cy: float
    scale: float = 1.0
    rotation: float = 0.0
    aspect: float = 1.0
    skew: float = 0.0

    def __post_init__(self):
        if not all(
            math.isfinite(v)
            for v in (self.cx, self.cy, self.scale, self.rotation, self.aspect, self.skew)
        ):
            raise ValueError("affine parameters must be finite")
        if self.scale <= 0.0 or self.aspect <= 0.0:
            raise ValueError("scale and aspect must be positive")


def state_for_box(box) -> AffineState:
    """Identity-pose state whose box over base dims (w, h) is exactly `box`."""
    x, y, w, h = box
    return AffineState(cx=x + w / 2.0, cy=y + h / 2.0)


def _warp_coeffs(state: AffineState, base_width: float, base_height: float):
    sx = state.scale * base_width / PATCH_SIDE
    sy = state.scale * state.aspect * base_height / PATCH_SIDE
    cos_r = math.cos(state.rotation)
    sin_r = math.sin(state.rotation)
    cos_rs = math.cos(state.rotation + state.skew)
    sin_rs = math.sin(state.rotation + state.skew)
    return (state.cx, state.cy, sx * cos_r, -sy * sin_rs, sx * sin_r, sy * cos_rs)


def affine_map(state: AffineState, base_width, base_height, u, v):
    """Map template column u, row v to frame coordinates (x, y)."""
    cx, cy, axx, axy, ayx, ayy = _warp_coeffs(state, base_width, base_height)
    du = u - TEMPLATE_HALF
    dv = v - TEMPLATE_HALF
    return (cx + axx * du + axy * dv, cy + ayx * du + ayy * dv)


def warp_batch(frame: GrayFrame, states, base_width, base_height) -> np.ndarray:
    """Extract one 1024-vector observation per state; values stay in [0, 1]."""
    coeffs = np.array(
        [_warp_coeffs(s, base_width, base_height) for s in states], dtype=np.float64
    ).reshape(-1, 6)
    return _kernel.warp_batch(frame.pixels, coeffs, PATCH_SIDE)


def warp_patch(frame: GrayFrame, state: AffineState, base_width, base_height) -> np.ndarray:
    """Extract a single 1024-vector observation for `state`."""
    return warp_batch(frame, [state], base_width, base_height)[0]


def state_to_box(state: AffineState, base_width, base_height):
    """Axis-aligned bounding box (x, y, w, h) of the warped template corners."""
    edge = PATCH_SIDE - 0.5
    xs = []
    ys = []
    for u, v in ((-0.5, -0.5), (edge, -0.5), (-0.5, edge), (edge, edge)):
        x, y = affine_map(state, base_width, base_height, u, v)
        xs.append(x)
        ys.append(y)
    x0, y0 = min(xs), min(ys)
    return (x0, y0, max(xs) - x0, max(ys) - y0)


def read_pgm(path):
    """Read a binary 8-bit PGM (P5, maxval 255) into a (h, w) uint8 array."""
    data = Path(path).read_bytes()
    pos = 0

    def token():
        nonlocal pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c == b"#":
                nl = data.find(b"\n", pos)
                pos = len(data) if nl < 0 else nl + 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        return data[start:pos]

    magic = token()
    if magic != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {magic!r}, expected P5)")
    try:
        width = int(token())
        height = int(token())
        maxval = int(token())
    except ValueError as exc:
        raise FormatError(f"{path}: garbled PGM header") from exc
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: invalid PGM dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval} (need 255)")
    pos += 1  # single whitespace byte separates header from raster
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise FormatError(f"{path}: raster truncated ({len(raster)} of {width * height} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path, image):
    """Write a (h, w) uint8 array as binary PGM with maxval 255."""
    img = np.ascontiguousarray(image, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(img.tobytes())


def load_sequence(directory):
    """Load all `*.pgm` frames under `directory` in lexicographic name order.

    Intensities are bytes divided by 255. All frames must share one size.
    """
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"sequence directory not found: {d}")
    files = sorted(d.glob("*.pgm"))
    if not files:
        raise FormatError(f"no .pgm frames in {d}")
    frames = []
    shape = None
    for f in files:
        raw = read_pgm(f)
        if shape is None:
            shape = raw.shape
        elif raw.shape != shape:
            raise FormatError(
                f"{f.name}: frame size {raw.shape[1]}x{raw.shape[0]} differs from "
                f"first frame {shape[1]}x{shape[0]}"
            )
        frames.append(GrayFrame(raw.shape[1], raw.shape[0], raw / 255.0))
    return frames

"""Seeded synthetic sequences with exact ground truth.

A textured square target drifts over a darker textured background with
linear plus sinusoidal motion, rounded to integer positions so ground
truth is exact. An optional vertical occluder bar sweeps across the
target for a configurable frame span, covering a configurable fraction
of its pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagery import write_pgm

# Mid-dark bar: far enough from the target texture (bytes 89..255) that a
# fully covered block's reconstruction residual clears the occlusion flag
# threshold, yet close enough that a quarter-covered block stays visible,
# so the flagged set follows the bar instead of wiping out whole regions.
OCCLUDER_BYTE = 77


@dataclass
class SynthSpec:
    frames: int = 100
    width: int = 128
    height: int = 96
    target_size: int = 32
    speed: float = 3.0
    seed: int = 0
    occluder_fraction: float = 0.0
    occluder_start: int = 0
    occluder_end: int = 0

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("need at least one frame")
        if self.target_size + 4 > min(self.width, self.height):
            raise ValueError("target does not fit the frame")
        if not 0.0 <= self.occluder_fraction <= 1.0:
            raise ValueError("occluder_fraction must lie in [0, 1]")
        if self.speed <= 0.0:
            raise ValueError("speed must be positive")


def _trajectory(spec: SynthSpec) -> np.ndarray:
    """Integer top-left positions, per-frame displacement at most `speed`."""
    t = np.arange(spec.frames, dtype=np.float64)
    span_x = spec.width - spec.target_size - 4
    span_y = spec.height - spec.target_size - 4
    # linear drift plus a slow sine; both rates scale with `speed` and are
    # sized so rounding never exceeds the per-frame cap
    drift = 0.22 * spec.speed
    amp = 1.2 * spec.speed
    omega = 0.09
    x = 2.0 + drift * t + amp * (1.0 + np.sin(omega * t - math.pi / 2.0)) / 2.0 * 1.5
    y = 2.0 + 0.5 * drift * t + amp * (1.0 + np.sin(0.7 * omega * t)) / 2.0
    x = np.clip(x, 2.0, 2.0 + span_x)
    y = np.clip(y, 2.0, 2.0 + span_y)
    pos = np.stack([np.rint(x), np.rint(y)], axis=1).astype(np.int64)
    return pos


def generate_sequence(out_dir, spec: SynthSpec):
    """Write PGM frames and a ground-truth file; returns the list of boxes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    size = spec.target_size

    # blotchy background spanning a wide intensity range; the target stays
    # distinctive through its fine grain rather than raw brightness
    background = _smooth_texture(rng, spec.height, spec.width, low=0.05, high=0.70, passes=3)
    target = _smooth_texture(rng, size, size, low=0.35, high=1.00, passes=1)
    bg_bytes = np.rint(background * 255).astype(np.uint8)
    target_bytes = np.rint(target * 255).astype(np.uint8)

    positions = _trajectory(spec)
    occluding = spec.occluder_fraction > 0.0 and spec.occluder_end >= spec.occluder_start
    bar_w = int(math.ceil(spec.occluder_fraction * size)) if occluding else 0
    span = max(spec.occluder_end - spec.occluder_start, 1)

    boxes = []
    gt_lines = []
    for i in range(spec.frames):
        x, y = int(positions[i, 0]), int(positions[i, 1])
        img = bg_bytes.copy()
        img[y : y + size, x : x + size] = target_bytes
        if occluding and spec.occluder_start <= i <= spec.occluder_end and bar_w:
            rel = (i - spec.occluder_start) / span
            bar_left = x + int(round(rel * (size - bar_w)))
            img[:, bar_left : bar_left + bar_w] = OCCLUDER_BYTE
        write_pgm(out / f"{i:04d}.pgm", img)
        boxes.append((float(x), float(y), float(size), float(size)))
        gt_lines.append(f"{x},{y},{size},{size}\n")
    (out / "groundtruth.txt").write_text("".join(gt_lines))
    return boxes


def _smooth_texture(rng, height, width, low, high, passes=2):
    """Box-blurred uniform noise rescaled into [low, high]."""
    noise = rng.random((height, width))
    for _ in range(passes):
        acc = noise.copy()
        acc[1:, :] += noise[:-1, :]
        acc[:-1, :] += noise[1:, :]
        acc[:, 1:] += noise[:, :-1]
        acc[:, :-1] += noise[:, 1:]
        noise = acc / 5.0
    lo, hi = noise.min(), noise.max()
    if hi - lo < 1e-12:
        return np.full((height, width), (low + high) / 2.0)
    return low + (noise - lo) / (hi - lo) * (high - low)

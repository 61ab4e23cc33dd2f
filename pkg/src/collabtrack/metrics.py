"""Trajectory scoring: center location error and continuous-area IoU."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FormatError


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle with top-left corner (x, y) and positive size."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError("box width and height must be positive")

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass
class SequenceReport:
    center_errors: np.ndarray
    overlaps: np.ndarray
    mean_center_error: float
    mean_overlap: float
    frame_count: int


def center_error(a: Box, b: Box) -> float:
    """Euclidean distance between box centers."""
    ax, ay = a.center
    bx, by = b.center
    return math.hypot(ax - bx, ay - by)


def overlap(a: Box, b: Box) -> float:
    """Intersection over union of the rectangles as continuous areas."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.w * a.h + b.w * b.h - inter)


def evaluate(trajectory, ground_truth) -> SequenceReport:
    """Per-frame metrics and their arithmetic means."""
    if len(trajectory) != len(ground_truth):
        raise ValueError(
            f"trajectory has {len(trajectory)} boxes, ground truth has "
            f"{len(ground_truth)}"
        )
    if not trajectory:
        raise ValueError("need at least one frame to evaluate")
    errors = np.array([center_error(t, g) for t, g in zip(trajectory, ground_truth)])
    overlaps = np.array([overlap(t, g) for t, g in zip(trajectory, ground_truth)])
    return SequenceReport(
        center_errors=errors,
        overlaps=overlaps,
        mean_center_error=float(errors.mean()),
        mean_overlap=float(overlaps.mean()),
        frame_count=len(trajectory),
    )


def write_report(report: SequenceReport, path):
    """CSV rows `frame,center_error,overlap` plus a trailing average row."""
    with open(path, "w") as fh:
        fh.write("frame,center_error,overlap\n")
        for i in range(report.frame_count):
            fh.write(f"{i},{report.center_errors[i]:.6f},{report.overlaps[i]:.6f}\n")
        fh.write(
            f"average,{report.mean_center_error:.6f},{report.mean_overlap:.6f}\n"
        )


def load_boxes(path) -> list:
    """Read `x,y,w,h` lines (one box per frame); errors cite line numbers."""
    boxes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            parts = text.split(",")
            if len(parts) != 4:
                raise FormatError(f"{path}: line {lineno}: expected x,y,w,h")
            try:
                x, y, w, h = (float(p) for p in parts)
            except ValueError as exc:
                raise FormatError(
                    f"{path}: line {lineno}: non-numeric field"
                ) from exc
            try:
                boxes.append(Box(x, y, w, h))
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    if not boxes:
        raise FormatError(f"{path}: no boxes found")
    return boxes

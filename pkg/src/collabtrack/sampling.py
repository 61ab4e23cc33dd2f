"""Labeled training patches: ground-truth positives, annular negatives.

Positives are jittered copies of the target state (at most 2 px shift and
2% scale). Negatives come from an annulus around the target at offsets in
[0.5, 1.5] times the dominant box dimension, rejection-sampled until their
box overlaps the target by less than the IoU bound.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .imagery import AffineState, state_for_box, state_to_box, warp_batch
from .metrics import Box, overlap

POSITIVE_SHIFT = 2.0
POSITIVE_SCALE_JITTER = 0.02
NEGATIVE_IOU_BOUND = 0.3
RESERVOIR_CAPACITY = 50
_MAX_REJECTIONS = 100


@dataclass
class LabeledPatch:
    patch: np.ndarray
    label: int
    frame_index: int


@dataclass
class PositiveReservoir:
    """FIFO store of recent positive patches, capped at 50."""

    capacity: int = RESERVOIR_CAPACITY
    patches: deque | None = None

    def __post_init__(self):
        self.patches = deque(self.patches or (), maxlen=self.capacity)

    def push(self, patches):
        """Append patches, evicting the oldest beyond capacity."""
        for p in patches:
            self.patches.append(np.asarray(p, dtype=np.float64))

    def __len__(self):
        return len(self.patches)

    def as_array(self) -> np.ndarray:
        return np.array(self.patches)


def positive_states(state: AffineState, count, rng):
    """The unjittered state first, then jittered copies."""
    states = [state]
    for _ in range(count - 1):
        dx = rng.uniform(-POSITIVE_SHIFT, POSITIVE_SHIFT)
        dy = rng.uniform(-POSITIVE_SHIFT, POSITIVE_SHIFT)
        factor = rng.uniform(1.0 - POSITIVE_SCALE_JITTER, 1.0 + POSITIVE_SCALE_JITTER)
        states.append(
            replace(state, cx=state.cx + dx, cy=state.cy + dy, scale=state.scale * factor)
        )
    return states


def sample_positives(frame, state, base_width, base_height, count, rng):
    """`count` positive patches around `state`; the first is unjittered."""
    if count < 1:
        raise ValueError("count must be at least 1")
    states = positive_states(state, count, rng)
    return list(warp_batch(frame, states, base_width, base_height))


def negative_states(frame, state, base_width, base_height, count, rng,
                    iou_bound=NEGATIVE_IOU_BOUND):
    """Background states from the annulus around the target.

    Offset magnitude is uniform in [0.5, 1.5] times the larger box side,
    angle uniform; centers clamp inside the frame. A candidate is redrawn
    until its box overlaps the target below `iou_bound`; after 100
    rejections the bound is doubled (best effort on degenerate tiny frames).
    """
    target_box = Box(*state_to_box(state, base_width, base_height))
    distance = max(target_box.w, target_box.h)
    states = []
    for _ in range(count):
        bound = iou_bound
        rejections = 0
        while True:
            radius = rng.uniform(0.5 * distance, 1.5 * distance)
            angle = rng.uniform(0.0, 2.0 * np.pi)
            cx = min(max(state.cx + radius * np.cos(angle), 0.0), frame.width - 1.0)
            cy = min(max(state.cy + radius * np.sin(angle), 0.0), frame.height - 1.0)
            candidate = replace(state, cx=cx, cy=cy)
            box = Box(*state_to_box(candidate, base_width, base_height))
            if overlap(box, target_box) < bound:
                states.append(candidate)
                break
            rejections += 1
            if rejections >= _MAX_REJECTIONS:
                rejections = 0
                bound *= 2.0
    return states


def sample_negatives(frame, state, base_width, base_height, count, rng,
                     iou_bound=NEGATIVE_IOU_BOUND):
    """`count` background patches warped from :func:`negative_states`."""
    if count < 1:
        raise ValueError("count must be at least 1")
    states = negative_states(frame, state, base_width, base_height, count, rng, iou_bound)
    return list(warp_batch(frame, states, base_width, base_height))


def harvest_offline(sequences, rng, per_frame_pos=5, per_frame_neg=5):
    """Balanced labeled patches from annotated sequences.

    `sequences` is an iterable of (frames, boxes) pairs with one box per
    frame. Each frame contributes `per_frame_pos` positives warped from the
    ground-truth box (jittered beyond the first) and `per_frame_neg`
    annular negatives.
    """
    harvest = []
    for frames, boxes in sequences:
        if len(frames) != len(boxes):
            raise ValueError(
                f"sequence has {len(frames)} frames but {len(boxes)} boxes"
            )
        for index, (frame, box) in enumerate(zip(frames, boxes)):
            b = box if isinstance(box, Box) else Box(*box)
            state = state_for_box((b.x, b.y, b.w, b.h))
            for patch in sample_positives(frame, state, b.w, b.h, per_frame_pos, rng):
                harvest.append(LabeledPatch(patch, 1, index))
            for patch in sample_negatives(frame, state, b.w, b.h, per_frame_neg, rng):
                harvest.append(LabeledPatch(patch, 0, index))
    return harvest

"""Online tracking loop fusing the block-subspace model and the classifier.

Per frame: candidates are drawn around the previous target state, scored
by the occlusion-masked subspace model (using the mask carried over from
the previous frame) times the classifier, and the best candidate wins.
The winner refreshes the occlusion mask, feeds the positive reservoir,
may trigger an online fine-tune of the classifier, and accumulates its
visible blocks toward the periodic subspace update.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import network, sampling, subspace
from .errors import FormatError
from .imagery import GrayFrame, state_for_box, state_to_box, warp_batch, warp_patch
from .metrics import Box
from .particles import (
    DEFAULT_PARTICLE_COUNT,
    DEFAULT_VARIANCES,
    CandidateSet,
    MotionModel,
    collaborative_scores,
    propagate,
    select_map,
)

ONLINE_BATCH_SIZE = 50
_MIN_BOX_SIDE = 4.0


@dataclass
class TrackerConfig:
    """Knobs of a tracking run; defaults give the reference behavior."""

    mask_delta: float = 0.018
    tau: float = 0.8
    chi: float = 0.8
    update_interval: int = 5
    eigenvectors_per_block: int = 16
    variances: tuple = DEFAULT_VARIANCES
    particle_count: int = DEFAULT_PARTICLE_COUNT
    learning_rate: float = 0.002
    momentum: float = 0.9
    gamma: float = 0.0
    eta: float = 1e-3
    rho: float = 0.05
    online_epochs: int = 20
    positives_per_frame: int = 5
    negatives_per_finetune: int = 100
    forgetting: float = 0.95
    seed: int = 0
    use_generative: bool = True

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0 or not 0.0 < self.chi <= 1.0:
            raise ValueError("tau and chi must lie in (0, 1]")
        if self.mask_delta <= 0.0:
            raise ValueError("mask_delta must be positive")
        if self.update_interval < 1:
            raise ValueError("update_interval must be at least 1")


@dataclass
class TrackResult:
    """Outcome of one tracked frame."""

    frame_index: int
    state: object
    box: Box
    score: float
    max_discriminative: float
    occlusion_rate: float
    finetuned: bool
    subspace_updated: bool


@dataclass
class TrackerState:
    """Mutable state of one tracking run; owned by a single thread."""

    config: TrackerConfig
    net: network.NetworkParams
    base_width: float
    base_height: float
    state: object
    mask: subspace.OcclusionMask
    subspaces: subspace.BlockSubspaceSet
    reservoir: sampling.PositiveReservoir
    motion: MotionModel
    rng: np.random.Generator
    step_count: int = 0
    block_buffer: deque = field(default_factory=deque)


def init(first_frame: GrayFrame, init_box, net: network.NetworkParams,
         config: TrackerConfig) -> TrackerState:
    """Set up tracking from the given box on the first frame."""
    if net.dims != network.ARCHITECTURE:
        raise FormatError(
            f"model architecture {net.dims} does not match {network.ARCHITECTURE}"
        )
    x, y, w, h = init_box
    if w < _MIN_BOX_SIDE or h < _MIN_BOX_SIDE:
        raise ValueError(f"init box {w}x{h} is degenerate (min side {_MIN_BOX_SIDE})")
    if x < -0.5 or y < -0.5 or x + w > first_frame.width + 0.5 or y + h > first_frame.height + 0.5:
        raise ValueError("init box must lie inside the frame")
    rng = np.random.default_rng(config.seed)
    state = state_for_box(init_box)
    patch = warp_patch(first_frame, state, w, h)
    reservoir = sampling.PositiveReservoir()
    reservoir.push(
        sampling.sample_positives(first_frame, state, w, h,
                                  config.positives_per_frame, rng)
    )
    ts = TrackerState(
        config=config,
        net=net,
        base_width=float(w),
        base_height=float(h),
        state=state,
        mask=subspace.OcclusionMask.all_visible(),
        subspaces=subspace.BlockSubspaceSet.from_patch(patch, w, h),
        reservoir=reservoir,
        motion=MotionModel(tuple(config.variances), config.particle_count),
        rng=rng,
    )
    ts.block_buffer = deque(maxlen=config.update_interval)
    return ts


def initial_result(ts: TrackerState, first_frame: GrayFrame) -> TrackResult:
    """Frame-0 log entry echoing the init box."""
    patch = warp_patch(first_frame, ts.state, ts.base_width, ts.base_height)
    disc = float(network.score(ts.net, patch)[0])
    gen = subspace.masked_score(patch, ts.subspaces, ts.mask)
    return TrackResult(
        frame_index=0,
        state=ts.state,
        box=Box(*state_to_box(ts.state, ts.base_width, ts.base_height)),
        score=gen * disc,
        max_discriminative=disc,
        occlusion_rate=ts.mask.rate,
        finetuned=False,
        subspace_updated=False,
    )


def step(ts: TrackerState, frame: GrayFrame) -> TrackResult:
    """Track one frame; see the module docstring for the per-frame order."""
    cfg = ts.config
    states = propagate(ts.state, ts.motion, ts.rng)
    patches = warp_batch(frame, states, ts.base_width, ts.base_height)

    flags = ts.mask.flags.astype(np.float64)
    per_block = subspace.block_scores_batch(patches, ts.subspaces)
    if cfg.use_generative:
        generative = per_block @ flags
    else:
        generative = np.ones(len(states))
    discriminative = network.score(ts.net, patches)
    collaborative = collaborative_scores(generative, discriminative)
    candidates = CandidateSet(states, generative, discriminative, collaborative)
    index, best_state = select_map(candidates)
    best_patch = patches[index]

    new_mask = subspace.compute_mask(
        subspace.block_scores(best_patch, ts.subspaces), cfg.mask_delta
    )
    ts.mask = new_mask
    ts.state = best_state

    ts.reservoir.push(
        sampling.sample_positives(frame, best_state, ts.base_width, ts.base_height,
                                  cfg.positives_per_frame, ts.rng)
    )

    max_disc = float(discriminative.max())
    finetuned = False
    if max_disc < cfg.tau:
        negatives = sampling.sample_negatives(
            frame, best_state, ts.base_width, ts.base_height,
            cfg.negatives_per_finetune, ts.rng,
        )
        positives = ts.reservoir.as_array()
        batch = network.TrainBatch(
            np.concatenate([positives, np.asarray(negatives)], axis=0),
            np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))]),
        )
        network.train(
            ts.net, batch, cfg.online_epochs, ONLINE_BATCH_SIZE,
            cfg.learning_rate, cfg.momentum, cfg.gamma, cfg.eta, cfg.rho, ts.rng,
        )
        finetuned = True

    # Only visible blocks of the accepted target enter the update buffer,
    # and only from frames whose occlusion rate clears the gate.
    if new_mask.rate >= cfg.chi:
        blocks = subspace.partition_blocks(best_patch)
        ts.block_buffer.append(
            {i: blocks[i] for i in range(subspace.BLOCK_COUNT) if new_mask.flags[i]}
        )

    ts.step_count += 1
    updated = False
    if ts.step_count % cfg.update_interval == 0:
        if new_mask.rate >= cfg.chi:
            for i in range(subspace.BLOCK_COUNT):
                samples = [entry[i] for entry in ts.block_buffer if i in entry]
                if samples:
                    ts.subspaces.blocks[i] = subspace.ipca_update(
                        ts.subspaces.blocks[i], samples,
                        cfg.forgetting, cfg.eigenvectors_per_block,
                    )
                    updated = True
            ts.block_buffer.clear()
        elif ts.block_buffer:
            ts.block_buffer.popleft()

    return TrackResult(
        frame_index=ts.step_count,
        state=best_state,
        box=Box(*state_to_box(best_state, ts.base_width, ts.base_height)),
        score=float(collaborative[index]),
        max_discriminative=max_disc,
        occlusion_rate=new_mask.rate,
        finetuned=finetuned,
        subspace_updated=updated,
    )


def run(frames, init_box, net: network.NetworkParams, config: TrackerConfig):
    """Track a whole sequence; deterministic under a fixed config seed."""
    if not frames:
        raise ValueError("need at least one frame")
    ts = init(frames[0], init_box, net, config)
    results = [initial_result(ts, frames[0])]
    for frame in frames[1:]:
        results.append(step(ts, frame))
    return results


def write_trajectory(results, path):
    """CSV with one row per frame and fixed 6-decimal float formatting."""
    with open(path, "w") as fh:
        fh.write("frame,x,y,w,h,score,occlusion_rate,finetuned\n")
        for r in results:
            fh.write(
                f"{r.frame_index},{r.box.x:.6f},{r.box.y:.6f},{r.box.w:.6f},"
                f"{r.box.h:.6f},{r.score:.6f},{r.occlusion_rate:.6f},"
                f"{int(r.finetuned)}\n"
            )


def read_trajectory(path) -> list:
    """Boxes from a trajectory CSV; errors cite line numbers."""
    boxes = []
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("frame,x,y,w,h"):
            raise FormatError(f"{path}: line 1: unrecognized trajectory header")
        for lineno, line in enumerate(fh, start=2):
            text = line.strip()
            if not text:
                continue
            parts = text.split(",")
            if len(parts) < 5:
                raise FormatError(f"{path}: line {lineno}: expected at least 5 fields")
            try:
                x, y, w, h = (float(p) for p in parts[1:5])
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: non-numeric box field") from exc
            try:
                boxes.append(Box(x, y, w, h))
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    if not boxes:
        raise FormatError(f"{path}: no trajectory rows")
    return boxes

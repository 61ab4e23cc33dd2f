"""Collaborative visual tracker.

Candidates from a Gaussian particle filter are scored by the product of a
block-wise incremental-PCA appearance model with per-block occlusion
masking and a logistic classifier pretrained as an RBM stack and
fine-tuned online. See the README for the command-line interface.
"""

from .imagery import (
    USING_COMPILED_WARP,
    AffineState,
    GrayFrame,
    affine_map,
    load_sequence,
    state_to_box,
    warp_batch,
    warp_patch,
)
from .metrics import Box, center_error, evaluate, overlap
from .particles import CandidateSet, MotionModel, collaborative_scores, propagate, select_map
from .subspace import (
    BlockSubspace,
    BlockSubspaceSet,
    GlobalSubspace,
    OcclusionMask,
    block_score,
    compute_mask,
    generative_score,
    global_score,
    ipca_update,
    masked_score,
    partition_blocks,
)
from .tracker import TrackerConfig, TrackResult, run

__version__ = "0.1.0"

__all__ = [
    "AffineState",
    "BlockSubspace",
    "BlockSubspaceSet",
    "Box",
    "CandidateSet",
    "GlobalSubspace",
    "GrayFrame",
    "MotionModel",
    "OcclusionMask",
    "TrackResult",
    "TrackerConfig",
    "USING_COMPILED_WARP",
    "affine_map",
    "block_score",
    "center_error",
    "collaborative_scores",
    "compute_mask",
    "evaluate",
    "generative_score",
    "global_score",
    "ipca_update",
    "load_sequence",
    "masked_score",
    "overlap",
    "partition_blocks",
    "propagate",
    "run",
    "select_map",
    "state_to_box",
    "warp_batch",
    "warp_patch",
]

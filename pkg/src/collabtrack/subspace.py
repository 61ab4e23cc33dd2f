"""Block-wise PCA appearance model with occlusion masking.

A 32x32 observation splits into a 4x4 grid of 8x8 blocks. Each block keeps
its own mean and orthonormal basis, updated incrementally from accepted
target patches. A block's similarity is exp(-r) where r is the squared
reconstruction residual of the mean-centered block against its basis;
per-block binary flags zero out occluded blocks in the global score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imagery import PATCH_PIXELS, PATCH_SIDE

BLOCK_GRID = 4
BLOCK_SIDE = PATCH_SIDE // BLOCK_GRID
BLOCK_COUNT = BLOCK_GRID * BLOCK_GRID
BLOCK_PIXELS = BLOCK_SIDE * BLOCK_SIDE

# Singular values below this fraction of the largest (or below the same
# absolute floor) are treated as numerically zero and dropped.
_RANK_TOL = 1e-12


@dataclass
class BlockSubspace:
    """Mean, orthonormal basis, singular values and effective sample count."""

    mean: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray
    effective_count: float

    @classmethod
    def empty(cls, dim=BLOCK_PIXELS):
        return cls(
            mean=np.zeros(dim),
            basis=np.zeros((dim, 0)),
            singular_values=np.zeros(0),
            effective_count=0.0,
        )

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


@dataclass
class BlockSubspaceSet:
    """The 16 per-block subspaces in row-major grid order."""

    blocks: list
    base_width: float = 0.0
    base_height: float = 0.0

    def __post_init__(self):
        if len(self.blocks) != BLOCK_COUNT:
            raise ValueError(f"need exactly {BLOCK_COUNT} block subspaces")

    @classmethod
    def from_patch(cls, patch, base_width=0.0, base_height=0.0):
        """Initial model: block means from the first target patch, empty bases."""
        blocks = []
        for block in partition_blocks(patch):
            blocks.append(
                BlockSubspace(
                    mean=block.copy(),
                    basis=np.zeros((BLOCK_PIXELS, 0)),
                    singular_values=np.zeros(0),
                    effective_count=1.0,
                )
            )
        return cls(blocks=blocks, base_width=base_width, base_height=base_height)


@dataclass
class OcclusionMask:
    """Per-block visibility flags: 1 keeps a block, 0 suppresses it."""

    flags: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.flags, dtype=np.int64)
        if f.shape != (BLOCK_COUNT,) or not np.isin(f, (0, 1)).all():
            raise ValueError(f"flags must be {BLOCK_COUNT} binary values")
        object.__setattr__(self, "flags", f)

    @property
    def rate(self) -> float:
        """Fraction of visible blocks."""
        return float(self.flags.sum()) / BLOCK_COUNT

    @classmethod
    def all_visible(cls):
        return cls(np.ones(BLOCK_COUNT, dtype=np.int64))


@dataclass
class GlobalSubspace:
    """Whole-patch 1024-d subspace, the unblocked baseline model."""

    mean: np.ndarray
    basis: np.ndarray


def partition_blocks(patch) -> np.ndarray:
    """Split a 1024-vector into its (16, 64) blocks, grid then block row-major."""
    p = np.asarray(patch, dtype=np.float64).reshape(
        BLOCK_GRID, BLOCK_SIDE, BLOCK_GRID, BLOCK_SIDE
    )
    return p.transpose(0, 2, 1, 3).reshape(BLOCK_COUNT, BLOCK_PIXELS)


def reassemble_blocks(blocks) -> np.ndarray:
    """Inverse of :func:`partition_blocks`."""
    b = np.asarray(blocks, dtype=np.float64).reshape(
        BLOCK_GRID, BLOCK_GRID, BLOCK_SIDE, BLOCK_SIDE
    )
    return b.transpose(0, 2, 1, 3).reshape(PATCH_PIXELS)


def block_score(block, sub: BlockSubspace) -> float:
    """exp(-||(b - u) - U U^T (b - u)||^2); 1.0 when the residual vanishes."""
    centered = np.asarray(block, dtype=np.float64) - sub.mean
    if sub.rank:
        residual = centered - sub.basis @ (sub.basis.T @ centered)
    else:
        residual = centered
    return float(np.exp(-residual @ residual))


def block_scores(patch, subs: BlockSubspaceSet) -> np.ndarray:
    """The 16 per-block similarity scores of one patch."""
    blocks = partition_blocks(patch)
    return np.array(
        [block_score(blocks[i], subs.blocks[i]) for i in range(BLOCK_COUNT)]
    )


def block_scores_batch(patches, subs: BlockSubspaceSet) -> np.ndarray:
    """Per-block scores for many patches at once; returns (n, 16).

    Uses ||r||^2 - ||U^T r||^2 for the residual (equal to the explicit
    projection residual for an orthonormal basis), clamped at zero against
    rounding.
    """
    p = np.asarray(patches, dtype=np.float64)
    blocks = p.reshape(-1, BLOCK_GRID, BLOCK_SIDE, BLOCK_GRID, BLOCK_SIDE)
    blocks = blocks.transpose(0, 1, 3, 2, 4).reshape(-1, BLOCK_COUNT, BLOCK_PIXELS)
    out = np.empty((p.shape[0], BLOCK_COUNT))
    for i in range(BLOCK_COUNT):
        sub = subs.blocks[i]
        centered = blocks[:, i, :] - sub.mean
        sq = np.einsum("ij,ij->i", centered, centered)
        if sub.rank:
            proj = centered @ sub.basis
            sq = sq - np.einsum("ij,ij->i", proj, proj)
        out[:, i] = np.exp(-np.maximum(sq, 0.0))
    return out


def generative_score(patch, subs: BlockSubspaceSet) -> float:
    """Unmasked global score: sum of the 16 block scores, in (0, 16]."""
    return float(block_scores(patch, subs).sum())


def compute_mask(scores, delta: float) -> OcclusionMask:
    """Flag block i visible when its score exceeds delta, occluded otherwise."""
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != (BLOCK_COUNT,):
        raise ValueError(f"need {BLOCK_COUNT} block scores")
    return OcclusionMask((s > delta).astype(np.int64))


def masked_score(patch, subs: BlockSubspaceSet, mask: OcclusionMask) -> float:
    """Occlusion-refined global score: masked blocks contribute exactly zero."""
    return float(block_scores(patch, subs) @ mask.flags.astype(np.float64))


def global_score(patch, sub: GlobalSubspace) -> float:
    """Whole-patch analogue of :func:`block_score` on the 1024-d model."""
    centered = np.asarray(patch, dtype=np.float64) - sub.mean
    if sub.basis.shape[1]:
        residual = centered - sub.basis @ (sub.basis.T @ centered)
    else:
        residual = centered
    return float(np.exp(-residual @ residual))


def ipca_update(
    sub: BlockSubspace, new_samples, forgetting: float = 0.95, max_rank: int = 16
) -> BlockSubspace:
    """Merge new samples into a subspace without retaining old data.

    The previous model enters with its singular values and effective count
    scaled by `forgetting`; the result keeps at most `max_rank` directions.
    With forgetting = 1 and no truncation the merge reproduces batch PCA of
    all data seen. Samples with no variance yield an empty basis, not an
    error.
    """
    if not 0.0 < forgetting <= 1.0:
        raise ValueError("forgetting must lie in (0, 1]")
    batch = np.atleast_2d(np.asarray(new_samples, dtype=np.float64))
    m, dim = batch.shape
    if m < 1:
        raise ValueError("need at least one new sample")
    if dim != sub.mean.shape[0]:
        raise ValueError(f"sample dimension {dim} != subspace dimension {sub.mean.shape[0]}")

    batch_mean = batch.mean(axis=0)
    old_count = forgetting * sub.effective_count
    new_count = old_count + m

    if sub.effective_count == 0.0:
        mean = batch_mean
        merged = np.linalg.qr((batch - batch_mean).T)
        combined, small = merged
        u_small, svals, _ = np.linalg.svd(small, full_matrices=False)
    else:
        mean = (old_count * sub.mean + m * batch_mean) / new_count
        shift = math.sqrt(old_count * m / new_count) * (batch_mean - sub.mean)
        aug = np.concatenate([batch - batch_mean, shift[None, :]], axis=0).T
        rank = sub.rank
        if rank:
            proj = sub.basis.T @ aug
            resid = aug - sub.basis @ proj
            # second projection pass restores orthogonality lost to rounding
            resid -= sub.basis @ (sub.basis.T @ resid)
        else:
            proj = np.zeros((0, aug.shape[1]))
            resid = aug
        q, small_r = np.linalg.qr(resid)
        cols = aug.shape[1]
        top = np.concatenate(
            [np.diag(forgetting * sub.singular_values), proj], axis=1
        )
        bottom = np.concatenate([np.zeros((cols, rank)), small_r], axis=1)
        u_small, svals, _ = np.linalg.svd(
            np.concatenate([top, bottom], axis=0), full_matrices=False
        )
        combined = np.concatenate([sub.basis, q], axis=1)

    floor = max(_RANK_TOL, (svals[0] if svals.size else 0.0) * _RANK_TOL)
    keep = min(max_rank, int(np.count_nonzero(svals > floor)))
    basis = combined @ u_small[:, :keep] if keep else np.zeros((dim, 0))
    return BlockSubspace(
        mean=mean,
        basis=basis,
        singular_values=svals[:keep].copy(),
        effective_count=new_count,
    )

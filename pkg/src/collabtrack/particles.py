"""Particle machinery: Gaussian state propagation and MAP selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagery import AffineState

DEFAULT_VARIANCES = (6.0, 6.0, 0.01, 0.0, 0.0, 0.0)
DEFAULT_PARTICLE_COUNT = 600
_SCALE_FLOOR = 0.05


@dataclass(frozen=True)
class MotionModel:
    """Diagonal Gaussian transition noise over the six affine parameters.

    Variances are ordered (cx, cy, scale, rotation, aspect, skew); the
    per-component standard deviation is the square root of the variance.
    """

    variances: tuple = DEFAULT_VARIANCES
    particle_count: int = DEFAULT_PARTICLE_COUNT

    def __post_init__(self):
        v = tuple(float(x) for x in self.variances)
        if len(v) != 6 or any(x < 0 for x in v):
            raise ValueError("need 6 nonnegative variances")
        if self.particle_count < 1:
            raise ValueError("particle_count must be positive")
        object.__setattr__(self, "variances", v)


@dataclass
class CandidateSet:
    """Candidate states with their generative, discriminative and fused scores."""

    states: list
    generative: np.ndarray
    discriminative: np.ndarray
    collaborative: np.ndarray

    def __post_init__(self):
        n = len(self.states)
        if not (
            len(self.generative) == len(self.discriminative) == len(self.collaborative) == n
        ):
            raise ValueError("score lists must match the number of states")


def propagate(prev: AffineState, model: MotionModel, rng) -> list:
    """Draw candidate states around `prev` with independent Gaussian noise.

    Scale and aspect are clamped to at least 0.05 against Gaussian tails.
    """
    sigma = np.sqrt(np.asarray(model.variances))
    noise = rng.standard_normal((model.particle_count, 6)) * sigma
    states = []
    for row in noise:
        states.append(
            AffineState(
                cx=prev.cx + row[0],
                cy=prev.cy + row[1],
                scale=max(prev.scale + row[2], _SCALE_FLOOR),
                rotation=prev.rotation + row[3],
                aspect=max(prev.aspect + row[4], _SCALE_FLOOR),
                skew=prev.skew + row[5],
            )
        )
    return states


def collaborative_scores(generative, discriminative) -> np.ndarray:
    """Elementwise product of the two score vectors."""
    g = np.asarray(generative, dtype=np.float64)
    f = np.asarray(discriminative, dtype=np.float64)
    if g.shape != f.shape:
        raise ValueError(f"score length mismatch: {g.shape} vs {f.shape}")
    return g * f


def select_map(candidates: CandidateSet):
    """Index and state of the highest collaborative score (first on ties)."""
    if not candidates.states:
        raise ValueError("empty candidate set")
    index = int(np.argmax(candidates.collaborative))
    return index, candidates.states[index]

"""Seeded generators for the source families used in tests and the CLI."""

from __future__ import annotations

import numpy as np

from .probability import (
    Alphabet,
    JointDistribution,
    ValidationError,
    shared_component_source,
)


def dsbs(p: float, names=("X1", "X2")) -> JointDistribution:
    """Doubly symmetric binary source: uniform bit pair with crossover p."""
    if not 0.0 <= p <= 0.5:
        raise ValidationError("crossover must lie in [0, 0.5]")
    probs = np.array([[(1 - p) / 2, p / 2], [p / 2, (1 - p) / 2]])
    bits = Alphabet(("0", "1"))
    return JointDistribution(((names[0], bits), (names[1], bits)), probs)


def random_joint(shape, seed: int, names=None) -> JointDistribution:
    """Strictly positive random joint with the given shape."""
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ValidationError("alphabet sizes must be >= 1")
    rng = np.random.default_rng(seed)
    probs = rng.random(shape) + 0.05
    probs /= probs.sum()
    if names is None:
        names = tuple(f"X{i + 1}" for i in range(len(shape)))
    variables = tuple(
        (n, Alphabet(tuple(str(k) for k in range(s)))) for n, s in zip(names, shape)
    )
    return JointDistribution(variables, probs)


def block_diagonal(blocks: int, size: int, seed: int | None = None,
                   names=("X1", "X2")) -> JointDistribution:
    """Equal-mass diagonal blocks; within-block cells positive (seeded or uniform)."""
    if blocks < 1 or size < 1:
        raise ValidationError("blocks and size must be >= 1")
    n = blocks * size
    probs = np.zeros((n, n))
    for b in range(blocks):
        sl = slice(b * size, (b + 1) * size)
        if seed is None:
            cell = np.full((size, size), 1.0)
        else:
            rng = np.random.default_rng([seed, b])
            cell = rng.random((size, size)) + 0.1
        probs[sl, sl] = cell / cell.sum() / blocks
    alpha = Alphabet(tuple(str(k) for k in range(n)))
    return JointDistribution(((names[0], alpha), (names[1], alpha)), probs)


def shared_random(w_size: int, x1_size: int, x2_size: int, seed: int) -> JointDistribution:
    """Shared-component source with seeded strictly positive component pmfs."""
    if min(w_size, x1_size, x2_size) < 1:
        raise ValidationError("component sizes must be >= 1")
    rng = np.random.default_rng(seed)

    def pmf(k):
        v = rng.random(k) + 0.2
        return v / v.sum()

    return shared_component_source(pmf(w_size), pmf(x1_size), pmf(x2_size))

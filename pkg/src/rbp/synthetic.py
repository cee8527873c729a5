"""Synthetic datasets generated from the two models, for recovery experiments."""

from __future__ import annotations

import numpy as np

# (lower corner, upper corner, weight) of the planted regression boxes on [0, 1]^2
PLANTED_BOXES = (
    ((0.05, 0.10), (0.50, 0.60), 1.0),
    ((0.40, 0.30), (0.95, 0.80), -0.8),
    ((0.20, 0.60), (0.70, 0.95), 0.6),
)


def planted_mean(X, boxes=PLANTED_BOXES) -> np.ndarray:
    X = np.atleast_2d(X)
    out = np.zeros(len(X))
    for lo, hi, w in boxes:
        out += w * np.all((X >= lo) & (X <= hi), axis=1)
    return out


def regression_boxes(n_points: int, rng, sigma: float = 0.1, boxes=PLANTED_BOXES):
    """Points drawn uniformly inside randomly chosen planted boxes, labels with Gaussian noise."""
    which = rng.integers(len(boxes), size=n_points)
    lo = np.array([boxes[i][0] for i in which])
    hi = np.array([boxes[i][1] for i in which])
    X = lo + (hi - lo) * rng.random((n_points, 2))
    y = planted_mean(X, boxes) + sigma * rng.standard_normal(n_points)
    return X, y


def planted_communities(n_nodes: int, rng, p_in: float = 0.8, p_out: float = 0.2, n_blocks: int = 2):
    """Adjacency matrix with equal-sized diagonal blocks of density ``p_in`` over background ``p_out``."""
    block = np.arange(n_nodes) * n_blocks // n_nodes
    same = block[:, None] == block[None, :]
    P = np.where(same, p_in, p_out)
    return (rng.random((n_nodes, n_nodes)) < P).astype(int), block


def holdout_split(n_nodes: int, fraction: float, rng):
    """Boolean ``(n, n)`` mask of held-out pairs, ``round(fraction * n^2)`` of them."""
    n_pairs = n_nodes * n_nodes
    n_held = int(round(fraction * n_pairs))
    mask = np.zeros(n_pairs, dtype=bool)
    mask[rng.choice(n_pairs, size=n_held, replace=False)] = True
    return mask.reshape(n_nodes, n_nodes)

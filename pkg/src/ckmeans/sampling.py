"""D^2 sampling and single-slot weighted reservoirs.

The reservoir rule: after items 1..i with weights w_1..w_i, the held
item is item j with probability w_j / sum_{m<=i} w_m.  Offering item i
replaces the held item with probability w_i / S_i where S_i is the
running weight sum, so zero-weight items never displace anything and a
reservoir that has only seen zero weights holds nothing.
"""

from __future__ import annotations

import numpy as np

from .geometry import as_points, pairwise_sqdist


def d2_distribution(X, C=None, weights=None) -> np.ndarray:
    """Sampling distribution proportional to (weighted) squared distance
    to the nearest center.  With no centers, or when every potential is
    zero, fall back to the (weighted) uniform distribution."""
    X = as_points(X)
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot sample from an empty point set")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be non-negative, finite, one per point")
        if w.sum() == 0:
            raise ValueError("weights must not all be zero")
    if C is None or as_points(C).shape[0] == 0:
        p = w.copy()
    else:
        p = w * pairwise_sqdist(X, C).min(axis=1)
        if p.sum() == 0.0:
            p = w.copy()
    return p / p.sum()


def d2_sample(X, C, count: int, rng, weights=None) -> np.ndarray:
    """count independent D^2 draws; returns indices into X."""
    if count < 0:
        raise ValueError("count must be non-negative")
    p = d2_distribution(X, C, weights)
    return rng.choice(len(p), size=count, replace=True, p=p)


class Reservoir:
    """Single-slot weighted reservoir over one pass of a stream."""

    def __init__(self):
        self.held = None  # (index, item) once any positive weight arrives
        self.weight_sum = 0.0

    def offer(self, item, weight: float, rng, index=None):
        if not (weight >= 0.0) or not np.isfinite(weight):
            raise ValueError("weight must be finite and non-negative")
        self.weight_sum += weight
        # replace with probability weight / weight_sum; zero weight never wins
        if weight > 0.0 and rng.random() * self.weight_sum < weight:
            self.held = (index, item)
        return self


class ReservoirBank:
    """size independent reservoirs sharing one weight stream.

    All reservoirs see the same weights, hence the same running sum; the
    replacement coin flips are independent per reservoir.  Blocks are
    processed at once: within a block the last winning offer per
    reservoir is the survivor.
    """

    def __init__(self, size: int, dim: int, rng):
        if size < 1:
            raise ValueError("need at least one reservoir")
        self.rng = rng
        self.held_index = np.full(size, -1, dtype=np.int64)
        self.held = np.zeros((size, dim))
        self.weight_sum = 0.0
        self._next_index = 0

    @property
    def size(self) -> int:
        return len(self.held_index)

    def offer_block(self, points, weights) -> None:
        P = as_points(points)
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (P.shape[0],) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be non-negative, finite, one per point")
        B = P.shape[0]
        if B == 0:
            return
        sums = self.weight_sum + np.cumsum(w)
        u = self.rng.random((B, self.size))
        # u * S_i < w_i is the scalar replace rule, vectorized
        wins = u * sums[:, None] < w[:, None]
        any_win = wins.any(axis=0)
        if any_win.any():
            last = B - 1 - np.argmax(wins[::-1], axis=0)
            rows = np.flatnonzero(any_win)
            self.held_index[rows] = self._next_index + last[rows]
            self.held[rows] = P[last[rows]]
        self.weight_sum = float(sums[-1])
        self._next_index += B

    def sampled_points(self) -> np.ndarray:
        """Held points of reservoirs that ever saw positive weight."""
        ok = self.held_index >= 0
        return self.held[ok].copy()


def uniformize(draws, floor: float, rng) -> list:
    """Thin origin-biased draws down to a uniform subsample.

    draws is a sequence of None or (item, origin_probability) pairs with
    every origin probability >= floor > 0.  Each survivor is kept with
    probability floor / origin_probability, so a kept item is uniform
    over the support regardless of how lopsided the origin was.  Dropped
    or null draws come back as None, in place.
    """
    if not (floor > 0.0):
        raise ValueError("floor must be positive")
    out = []
    for d in draws:
        if d is None:
            out.append(None)
            continue
        item, prob = d
        if not (prob >= floor):
            raise ValueError(f"origin probability {prob} below floor {floor}")
        out.append(item if rng.random() * prob < floor else None)
    return out

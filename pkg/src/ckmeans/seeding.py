"""Bi-criteria seeding: iterative D^2 sampling, batch or merge-reduce.

The merge-reduce form streams the data in chunks, seeds each chunk
locally, weighs the chunk centers by their Voronoi counts, and re-seeds
the weighted union.  One chunk degenerates to the batch seeder on the
same rng stream, bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import as_points, pairwise_sqdist


@dataclass
class SeedSolution:
    centers: np.ndarray
    cost: float          # potential of the data the seed was fit on
    alpha_claim: str     # label for the guarantee the caller is assuming


def d2_seed(X, k: int, oversample: int | None = None, rng=None,
            weights=None) -> SeedSolution:
    """Iterative D^2 seeding: first draw uniform, every later draw
    proportional to the current squared distance to the chosen set.

    oversample is the number of centers to emit (default 2k).  weights
    multiply both the potentials and the reported cost.  When oversample
    covers the whole input the points themselves come back, cost 0.
    """
    X = as_points(X)
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot seed an empty point set")
    if k < 1:
        raise ValueError("need k >= 1")
    if oversample is None:
        oversample = 2 * k
    if oversample < 1:
        raise ValueError("need oversample >= 1")
    if rng is None:
        raise ValueError("rng is required")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be non-negative, finite, one per point")
        if w.sum() == 0:
            raise ValueError("weights must not all be zero")

    if oversample >= n:
        return SeedSolution(X.copy(), 0.0, "exhaustive")

    first = int(rng.choice(n, p=w / w.sum()))
    chosen = [first]
    pot = w * pairwise_sqdist(X, X[first]).ravel()
    for _ in range(oversample - 1):
        total = pot.sum()
        p = (w / w.sum()) if total == 0.0 else (pot / total)
        nxt = int(rng.choice(n, p=p))
        chosen.append(nxt)
        pot = np.minimum(pot, w * pairwise_sqdist(X, X[nxt]).ravel())
    return SeedSolution(X[chosen].copy(), float(pot.sum()), "d2-bi-criteria")


def merge_reduce_seed(blocks, k: int, chunk: int, rng, oversample: int | None = None,
                      meter=None) -> SeedSolution:
    """Single pass chunked seeding.

    blocks: an (n, d) array or an iterable of such blocks in stream
    order.  Each full chunk of `chunk` points is seeded locally; chunk
    centers weighted by their Voronoi counts accumulate, and the final
    seed is drawn from that weighted union.  Space stays within one
    chunk buffer plus oversample centers per chunk.
    """
    if chunk < 1:
        raise ValueError("need chunk >= 1")
    if oversample is None:
        oversample = 2 * k
    if isinstance(blocks, np.ndarray):
        blocks = [blocks]

    buf: list[np.ndarray] = []
    buffered = 0
    solutions: list[tuple[np.ndarray, np.ndarray]] = []  # (centers, counts)
    seen = 0

    def flush(points):
        nonlocal seen
        seen += points.shape[0]
        sol = d2_seed(points, k, oversample, rng)
        labels = np.argmin(pairwise_sqdist(points, sol.centers), axis=1)
        counts = np.bincount(labels, minlength=sol.centers.shape[0]).astype(np.float64)
        solutions.append((sol.centers, counts))
        if meter is not None:
            meter.alloc_points(sol.centers.shape[0])
        return sol

    last_sol = None
    for blk in blocks:
        blk = as_points(blk)
        pos = 0
        while pos < blk.shape[0]:
            take = min(chunk - buffered, blk.shape[0] - pos)
            buf.append(blk[pos:pos + take])
            if meter is not None:
                meter.alloc_points(take)
            buffered += take
            pos += take
            if buffered == chunk:
                last_sol = flush(np.vstack(buf))
                if meter is not None:
                    meter.free_points(buffered)
                buf, buffered = [], 0
    if buffered:
        last_sol = flush(np.vstack(buf))
        if meter is not None:
            meter.free_points(buffered)

    if not solutions:
        raise ValueError("empty stream")
    if seen < k:
        raise ValueError(f"stream has {seen} points, need at least k={k}")

    if len(solutions) == 1:
        # degenerate merge: the chunk solution is the batch solution
        return last_sol

    union = np.vstack([c for c, _ in solutions])
    wts = np.concatenate([w for _, w in solutions])
    final = d2_seed(union, k, oversample, rng, weights=wts)
    if meter is not None:
        meter.free_points(sum(c.shape[0] for c, _ in solutions))
        meter.alloc_points(final.centers.shape[0])
    return SeedSolution(final.centers, final.cost, "merge-reduce-bi-criteria")

"""Stream sources, space accounting, and the multi-pass pipelines.

The full pipeline spends one pass seeding, one filling reservoirs, one
building compressed graphs for every candidate (plus an optional scale
pass when aspect-ratio removal is on), and one peeling the winning flow
into per-point assignments: 4 passes, 5 with aspect removal.  All flow
solving happens offline between passes on the compressed graphs, never
on raw points.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .geometry import as_points, pairwise_sqdist
from .hyperbucket import CompressedGraph, aspect_graph, aspect_guesses
from .listgen import CandidateEntry, CandidateList, GoodCentersConfig, good_centers
from .partition import (
    CompressedSolution,
    InfeasiblePartitionError,
    Variant,
    compressed_partition,
    partition_assign,
    partition_cost,
)
from .sampling import ReservoirBank
from .seeding import SeedSolution, d2_seed, merge_reduce_seed

STREAM_VARIANTS = ("classical", "r_gather", "r_capacity", "fault_tolerant", "semi_supervised")


class StreamSource:
    """Replayable source of (points, colors, targets) blocks.

    open() hands out a fresh single-use iterator over the records in a
    fixed order and bumps the pass counter; n is None when the length is
    not known without reading.
    """

    def __init__(self):
        self.passes = 0

    @property
    def n(self):
        return None

    def open(self):
        self.passes += 1
        return self._blocks()

    def open_points(self):
        for pts, _colors, _targets in self.open():
            yield pts

    def _blocks(self):  # pragma: no cover
        raise NotImplementedError


class ArraySource(StreamSource):
    def __init__(self, data, block: int = 256):
        super().__init__()
        self.ds = data if isinstance(data, Dataset) else Dataset(as_points(data))
        self.block = block

    @property
    def n(self):
        return self.ds.n

    def _blocks(self):
        for lo in range(0, self.ds.n, self.block):
            hi = min(lo + self.block, self.ds.n)
            yield (self.ds.points[lo:hi],
                   None if self.ds.colors is None else self.ds.colors[lo:hi],
                   None if self.ds.targets is None else self.ds.targets[lo:hi])


class CSVSource(StreamSource):
    """Streams a dataset CSV without materializing it."""

    def __init__(self, path, block: int = 256):
        super().__init__()
        from .data import read_dataset_csv
        self.path = path
        self.block = block
        self._read = read_dataset_csv

    def _blocks(self):
        # the CSV reader validates eagerly; block it afterwards
        ds = self._read(self.path)
        for lo in range(0, ds.n, self.block):
            hi = min(lo + self.block, ds.n)
            yield (ds.points[lo:hi],
                   None if ds.colors is None else ds.colors[lo:hi],
                   None if ds.targets is None else ds.targets[lo:hi])


@dataclass
class SpaceMeter:
    """Counts resident point slots and auxiliary scalar words.

    Modules route allocations of retained state through this; transient
    I/O buffers are not charged.  Peaks are tracked globally and per
    named phase.
    """

    current_points: int = 0
    peak_points: int = 0
    current_words: int = 0
    peak_words: int = 0
    phases: list = field(default_factory=list)

    def alloc_points(self, c: int):
        self.current_points += int(c)
        self.peak_points = max(self.peak_points, self.current_points)
        if self.phases and self.phases[-1].get("open"):
            ph = self.phases[-1]
            ph["peak_points"] = max(ph["peak_points"], self.current_points)

    def free_points(self, c: int):
        self.current_points -= int(c)
        if self.current_points < 0:
            raise ValueError("freed more points than allocated")

    def alloc_words(self, c: int):
        self.current_words += int(c)
        self.peak_words = max(self.peak_words, self.current_words)
        if self.phases and self.phases[-1].get("open"):
            ph = self.phases[-1]
            ph["peak_words"] = max(ph["peak_words"], self.current_words)

    def free_words(self, c: int):
        self.current_words -= int(c)
        if self.current_words < 0:
            raise ValueError("freed more words than allocated")

    @contextmanager
    def phase(self, name: str):
        ph = {"name": name, "peak_points": self.current_points,
              "peak_words": self.current_words, "open": True}
        self.phases.append(ph)
        try:
            yield self
        finally:
            ph["open"] = False

    def report(self) -> dict:
        return {
            "peak_points": self.peak_points,
            "peak_words": self.peak_words,
            "phases": [{k: v for k, v in ph.items() if k != "open"} for ph in self.phases],
        }


def default_chunk(n: int | None, k: int) -> int:
    return 4096 if n is None else max(k, math.ceil(math.sqrt(n * k)))


def two_pass_good_centers(source: StreamSource, k: int, cfg: GoodCentersConfig, rng,
                          chunk: int | None = None, meter: SpaceMeter | None = None
                          ) -> tuple[CandidateList, SeedSolution, int]:
    """Streaming good_centers: pass 1 seeds, pass 2 fills one reservoir
    per needed sample (with a uniform-fallback twin so a zero potential
    degrades to uniform sampling exactly like the batch path).  Returns
    (candidates, seed, points_seen)."""
    meter = meter if meter is not None else SpaceMeter()
    p = cfg.resolved()
    if cfg.preset != "desk":
        raise ValueError("streaming list generation needs the desk preset")
    rng_seed, rng_sample = rng.spawn(2)

    if chunk is None:
        chunk = default_chunk(source.n, k)
    with meter.phase("seed"):
        seed = merge_reduce_seed(source.open_points(), k, chunk, rng_seed, meter=meter)
    C = seed.centers
    d = C.shape[1]

    t, tau, eta, reps, copies = p["t"], p["tau"], p["eta"], p["repetitions"], p["copies"]
    R = eta * t
    # one (bank, fallback, tuple) rng triple per repetition
    streams = [rs.spawn(3) for rs in rng_sample.spawn(reps)]
    banks = []
    with meter.phase("sample"):
        for r in range(reps):
            banks.append((ReservoirBank(R, d, streams[r][0]),
                          ReservoirBank(R, d, streams[r][1])))
            meter.alloc_points(2 * R)
        seen = 0
        for pts in source.open_points():
            w = pairwise_sqdist(pts, C).min(axis=1)
            ones = np.ones(len(w))
            for bank, uni in banks:
                bank.offer_block(pts, w)
                uni.offer_block(pts, ones)
            seen += len(w)

        anchor = np.repeat(C, copies, axis=0)
        entries = []
        empty_reps = []
        for r in range(reps):
            bank, uni = banks[r]
            trng = streams[r][2]
            samples = (bank if bank.weight_sum > 0 else uni).sampled_points()
            M = np.vstack([samples, anchor]) if len(samples) else anchor
            if tau * t > M.shape[0]:
                empty_reps.append(r)
                continue
            for _ in range(p["subset_budget"]):
                flat = tuple(int(v) for v in trng.choice(M.shape[0], size=tau * t, replace=False))
                groups = np.asarray(flat).reshape(t, tau)
                entries.append(CandidateEntry(M[groups].mean(axis=1), r, flat))
        for _ in banks:
            meter.free_points(2 * R)
        meter.alloc_points(len(entries) * t)
    cands = CandidateList(entries, t, d, p, empty_reps)
    return cands, seed, seen


def select_best(costs, mode: str = "argmin", epsilon: float | None = None,
                cap: float | None = None) -> int:
    """Pick the winning candidate index from real costs (inf = infeasible).

    argmin is exact.  Range mode groups costs into geometric ranges
    ((1-eps)^(i+1) * cap, (1-eps)^i * cap] and returns the first member
    of the deepest occupied range; its cost is within 1/(1-eps) of the
    true minimum.
    """
    c = np.asarray(costs, dtype=np.float64)
    if c.size == 0 or not np.isfinite(c).any():
        raise InfeasiblePartitionError("no feasible candidate to select from")
    if mode == "argmin":
        return int(np.argmin(c))
    if mode != "range":
        raise ValueError(f"unknown selection mode {mode!r}")
    if epsilon is None or not (0.0 < epsilon < 1.0):
        raise ValueError("range mode needs epsilon in (0, 1)")
    if cap is None or not (cap > 0.0) or not math.isfinite(cap):
        raise ValueError("range mode needs a positive finite cap")
    shrink = 1.0 - epsilon
    best_depth, best_idx = -1.0, None
    for i, v in enumerate(c):
        if not math.isfinite(v):
            continue
        v = min(v, cap)  # costs above the cap are clipped into range 0
        if v <= 0.0:
            depth = math.inf
        else:
            depth = math.floor(math.log(v / cap) / math.log(shrink))
            while shrink**depth * cap < v:
                depth -= 1
            while shrink ** (depth + 1) * cap >= v:
                depth += 1
        if depth > best_depth:
            best_depth, best_idx = depth, i
    return int(best_idx)


@dataclass
class PipelineResult:
    centers: np.ndarray
    owners: list
    cost: float              # recomputed real cost of the emitted assignment
    flow_cost: float         # the winning compressed flow's objective
    selected: int
    list_size: int
    passes_used: int
    seed_cost: float
    n: int
    space: dict
    d_star: float | None = None


def full_pipeline(source: StreamSource, k: int, variant: Variant,
                  cfg: GoodCentersConfig, rng, *, chunk: int | None = None,
                  aspect_removal: bool = False, select_mode: str = "argmin",
                  precision_bits: int = 32, meter: SpaceMeter | None = None,
                  block_guesses: bool = True) -> PipelineResult:
    """The streaming solver: seed, sample, compress + solve offline, assign."""
    if variant.kind not in STREAM_VARIANTS:
        raise ValueError(f"variant {variant.kind!r} is not streamable "
                         "(chromatic needs same-colored points batched per color)")
    meter = meter if meter is not None else SpaceMeter()
    cands, seed, n = two_pass_good_centers(source, k, cfg, rng, chunk=chunk, meter=meter)
    if not len(cands):
        raise InfeasiblePartitionError("candidate list came back empty")
    eps = cfg.epsilon

    d_star = None
    if aspect_removal:
        with meter.phase("scale"):
            worst = np.zeros(len(cands))
            for pts, _c, _t in source.open():
                for i, e in enumerate(cands.entries):
                    near = pairwise_sqdist(pts, e.centers).min(axis=1)
                    worst[i] = max(worst[i], float(near.max()))
            d_star = np.sqrt(worst)

    # one graph per candidate is solved; aspect mode builds the other
    # scale guesses alongside (same pass, more space) for inspection
    graphs: list[CompressedGraph] = []
    extra_graphs: list[list[CompressedGraph]] = []
    with meter.phase("graph"):
        for i, e in enumerate(cands.entries):
            if aspect_removal:
                guesses = [gu for gu in aspect_guesses(e.centers, float(d_star[i])) if gu > 0]
                u = max(guesses) if guesses else 1.0
                graphs.append(aspect_graph(e.centers, eps, u, max(n, 1)))
                extra_graphs.append(
                    [aspect_graph(e.centers, eps, gu, max(n, 1))
                     for gu in guesses if gu != u] if block_guesses else [])
            else:
                graphs.append(CompressedGraph(e.centers, eps))
                extra_graphs.append([])
        for pts, colors, targets in source.open():
            if variant.kind == "semi_supervised" and targets is None:
                raise ValueError("semi_supervised streaming needs a target column")
            groups = targets if variant.kind == "semi_supervised" else None
            for i, g in enumerate(graphs):
                g.add_block(pts, groups)
                for gg in extra_graphs[i]:
                    gg.add_block(pts, groups)
        for i, g in enumerate(graphs):
            for gg in [g, *extra_graphs[i]]:
                meter.alloc_words(len(gg.vertices) * (gg.k + 1))

    costs = np.full(len(cands), math.inf)
    solutions: list[CompressedSolution | None] = [None] * len(cands)
    for i, g in enumerate(graphs):
        try:
            sol = compressed_partition(g, variant, precision_bits=precision_bits)
        except InfeasiblePartitionError:
            continue
        solutions[i] = sol
        costs[i] = sol.cost
    if select_mode == "range":
        cap = seed.cost
        if not (cap > 0.0 and math.isfinite(cap)):
            finite = costs[np.isfinite(costs)]
            cap = float(finite.max()) if finite.size else 0.0
        if cap > 0.0:
            winner = select_best(costs, mode="range", epsilon=eps, cap=cap)
        else:
            winner = select_best(costs)  # every feasible candidate costs 0
    else:
        winner = select_best(costs)
    sol = solutions[winner]

    owners: list = []
    with meter.phase("assign"):
        for pts, colors, targets in source.open():
            groups = targets if variant.kind == "semi_supervised" else None
            owners.extend(sol.assign_block(pts, groups))

    return PipelineResult(
        centers=cands.entries[winner].centers,
        owners=owners,
        cost=sol.peeled_cost,
        flow_cost=sol.cost,
        selected=winner,
        list_size=len(cands),
        passes_used=source.passes,
        seed_cost=seed.cost,
        n=n,
        space=meter.report(),
        d_star=None if d_star is None else float(d_star[winner]),
    )


@dataclass
class BatchResult:
    centers: np.ndarray
    owners: list
    cost: float
    flow_cost: float
    selected: int
    list_size: int
    seed_cost: float


def batch_solve(data, k: int, variant: Variant, cfg: GoodCentersConfig, rng, *,
                select_mode: str = "argmin", precision_bits: int = 32) -> BatchResult:
    """Offline reference pipeline: batch seed, batch candidate list,
    exact (uncompressed) partition of every candidate, best one wins."""
    ds = data if isinstance(data, Dataset) else Dataset(as_points(data))
    seed = d2_seed(ds.points, k, rng=rng)
    cands = good_centers(ds.points, seed.centers, cfg, rng)
    if not len(cands):
        raise InfeasiblePartitionError("candidate list came back empty")
    costs = np.array([partition_cost(ds, e.centers, variant, precision_bits=precision_bits)
                      for e in cands.entries])
    if select_mode == "range":
        cap = seed.cost
        if not (cap > 0.0 and math.isfinite(cap)):
            finite = costs[np.isfinite(costs)]
            cap = float(finite.max()) if finite.size else 0.0
        if cap > 0.0:
            winner = select_best(costs, mode="range", epsilon=cfg.epsilon, cap=cap)
        else:
            winner = select_best(costs)
    else:
        winner = select_best(costs)
    asg = partition_assign(ds, cands.entries[winner].centers, variant,
                           precision_bits=precision_bits)
    return BatchResult(cands.entries[winner].centers, asg.owners, asg.cost,
                       float(costs[winner]), winner, len(cands), seed.cost)

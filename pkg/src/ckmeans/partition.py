"""Constrained partitioning of points among a fixed center set.

Every variant is phrased as an integral min-cost flow: points (or
compressed bucket vertices) on the left, centers on the right, squared
distances as edge costs in fixed-point integers.  Constraints become
capacities and lower bounds on the center-to-sink arcs:

  classical        no caps, flow equals the Voronoi assignment cost
  r_gather         every center receives at least r points
  r_capacity       every center receives at most r points
  chromatic        at most one point of each color per center,
                   solved as one small flow per color class
  fault_tolerant   each point owned by l distinct centers; reduces to
                   chromatic with a fresh color per point
  semi_supervised  cost alpha * dist^2 + (1 - alpha) * [target mismatch],
                   minimized over all k! matchings of targets to centers

The objective throughout is the cost of assigning to fixed centers, not
the k-means cost of re-centered clusters.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .flow import FlowNetwork, solve_min_cost_flow, to_fixed_point
from .geometry import as_points, pairwise_sqdist
from .hyperbucket import CompressedGraph

VARIANT_KINDS = (
    "classical",
    "r_gather",
    "r_capacity",
    "chromatic",
    "fault_tolerant",
    "semi_supervised",
)


class InfeasiblePartitionError(Exception):
    """The constraints admit no assignment for this instance."""


@dataclass(frozen=True)
class Variant:
    kind: str
    r: int | None = None
    l: int | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ValueError(f"unknown variant kind {self.kind!r}")
        if self.kind in ("r_gather", "r_capacity"):
            if self.r is None or self.r < 1:
                raise ValueError(f"{self.kind} needs r >= 1")
        if self.kind == "fault_tolerant":
            if self.l is None or self.l < 1:
                raise ValueError("fault_tolerant needs l >= 1")
        if self.kind == "semi_supervised":
            if self.alpha is None or not (0.0 <= self.alpha <= 1.0):
                raise ValueError("semi_supervised needs alpha in [0, 1]")

    @staticmethod
    def classical() -> "Variant":
        return Variant("classical")

    @staticmethod
    def r_gather(r: int) -> "Variant":
        return Variant("r_gather", r=r)

    @staticmethod
    def r_capacity(r: int) -> "Variant":
        return Variant("r_capacity", r=r)

    @staticmethod
    def chromatic() -> "Variant":
        return Variant("chromatic")

    @staticmethod
    def fault_tolerant(l: int) -> "Variant":
        return Variant("fault_tolerant", l=l)

    @staticmethod
    def semi_supervised(alpha: float) -> "Variant":
        return Variant("semi_supervised", alpha=alpha)


@dataclass
class Assignment:
    """Owner centers per point (ascending indices, l of them for the
    fault-tolerant variant) plus the recomputed real cost."""

    owners: list
    cost: float


# ---------------------------------------------------------------------------
# shared objective plumbing (the oracle reuses these, its search is its own)

def quantize_costs(M, precision_bits: int = 32) -> tuple[np.ndarray, float]:
    """Fixed-point edge costs and the scale that maps them back.

    +inf entries mark forbidden edges and stay +inf-like via a separate
    mask; everything finite is scaled so the max lands on
    2**precision_bits.  real cost == int cost * scale exactly as floats.
    """
    M = np.asarray(M, dtype=np.float64)
    finite = np.isfinite(M)
    if np.any(M[finite] < 0):
        raise ValueError("costs must be non-negative")
    vals = np.zeros(M.shape, dtype=np.int64)
    if finite.any():
        fmax = float(M[finite].max())
        if fmax > 0.0:
            vals[finite] = to_fixed_point(
                np.where(finite, M, 0.0), precision_bits)[finite]
            scale = fmax / float(2**precision_bits)
        else:
            scale = 0.0
    else:
        scale = 0.0
    return vals, scale


def edge_cost_matrix(points, centers) -> np.ndarray:
    return pairwise_sqdist(points, centers)


def semi_supervised_cost_terms(W, targets, alpha: float, perm) -> np.ndarray:
    """Blended edge costs for one matching of targets onto centers.

    W is the squared-distance matrix, perm[i] the target id matched to
    center i; a point pays the (1 - alpha) penalty on every center whose
    matched target differs from its own.
    """
    W = np.asarray(W, dtype=np.float64)
    targets = np.asarray(targets)
    mismatch = (targets[:, None] != np.asarray(perm)[None, :]).astype(np.float64)
    return alpha * W + (1.0 - alpha) * mismatch


# ---------------------------------------------------------------------------
# left side: the one abstraction the solvers run on

@dataclass
class _LeftSide:
    weights: np.ndarray          # (L, k) real costs, +inf forbidden
    counts: np.ndarray           # (L,) multiplicities
    groups: np.ndarray | None    # (L,) color / target ids where relevant

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _left_from_points(data, centers) -> _LeftSide:
    ds = data if isinstance(data, Dataset) else Dataset(as_points(data))
    W = edge_cost_matrix(ds.points, centers)
    return _LeftSide(W, np.ones(ds.n, dtype=np.int64), None), ds


def _left_from_graph(graph: CompressedGraph) -> tuple[_LeftSide, list]:
    items = graph.items()
    L = len(items)
    W = np.empty((L, graph.k))
    counts = np.empty(L, dtype=np.int64)
    groups = np.empty(L, dtype=np.int64)
    any_group = False
    for i, (full_key, cnt) in enumerate(items):
        W[i] = graph.vertex_weights(full_key)
        counts[i] = cnt
        g = full_key[1]
        groups[i] = -1 if g is None else g
        any_group = any_group or g is not None
    return _LeftSide(W, counts, groups if any_group else None), [k for k, _ in items]


def _flow_assign(w_int, forbidden, counts, center_low, center_cap, value):
    """One bipartite network; returns (int_cost, flows) or None if infeasible."""
    if center_low > center_cap:
        return None             # e.g. an r-gather bound above the point count
    L, k = w_int.shape
    s = 0
    t = 1 + L + k
    net = FlowNetwork(2 + L + k, s, t, int(value))
    arc_of = {}
    for v in range(L):
        if counts[v] <= 0:
            continue
        net.add_arc(s, 1 + v, int(counts[v]), 0)
        for j in range(k):
            if forbidden[v, j]:
                continue
            arc_of[(v, j)] = net.add_arc(1 + v, 1 + L + j, int(counts[v]), int(w_int[v, j]))
    for j in range(k):
        net.add_arc(1 + L + j, t, int(center_cap), 0, lower=int(center_low))
    res = solve_min_cost_flow(net)
    if not res.feasible:
        return None
    flows = np.zeros((L, k), dtype=np.int64)
    for (v, j), aid in arc_of.items():
        flows[v, j] = res.arc_flow[aid]
    return res.total_cost, flows


def _solve_left(left: _LeftSide, variant: Variant, precision_bits: int):
    """Dispatch a variant over a left side.

    Returns (int_cost, scale, flows, perm) or None when infeasible.
    flows is (L, k) integral; perm is the winning target matching for
    semi_supervised and None otherwise.
    """
    W = left.weights
    L, k = W.shape
    n = left.total
    forbidden = ~np.isfinite(W)

    if variant.kind == "semi_supervised":
        if left.groups is None:
            raise ValueError("semi_supervised needs target labels")
        best = None
        for perm in itertools.permutations(range(k)):
            M = semi_supervised_cost_terms(
                np.where(forbidden, 0.0, W), left.groups, variant.alpha, perm)
            M = np.where(forbidden, math.inf, M)
            w_int, scale = quantize_costs(M, precision_bits)
            # the network is unconstrained, so the per-vertex minimum is
            # already the optimum; skip the flow when it cannot win
            lb = int((left.counts * np.where(forbidden, np.iinfo(np.int64).max, w_int)
                      .min(axis=1)).sum()) if not forbidden.all(axis=1).any() else None
            if lb is None:
                continue
            if best is not None and lb * scale >= best[0] * best[1]:
                continue
            solved = _flow_assign(w_int, forbidden, left.counts, 0, n, n)
            if solved is None:
                continue
            int_cost, flows = solved
            if best is None or int_cost * scale < best[0] * best[1]:
                best = (int_cost, scale, flows, perm)
        return best

    w_int, scale = quantize_costs(W, precision_bits)

    if variant.kind == "classical":
        solved = _flow_assign(w_int, forbidden, left.counts, 0, n, n)
    elif variant.kind == "r_gather":
        solved = _flow_assign(w_int, forbidden, left.counts, variant.r, n, n)
    elif variant.kind == "r_capacity":
        solved = _flow_assign(w_int, forbidden, left.counts, 0, variant.r, n)
    elif variant.kind == "chromatic":
        if left.groups is None:
            raise ValueError("chromatic needs point colors")
        total = 0
        flows = np.zeros((L, k), dtype=np.int64)
        for color in np.unique(left.groups):
            rows = np.flatnonzero(left.groups == color)
            sub = _flow_assign(w_int[rows], forbidden[rows], left.counts[rows],
                               0, 1, int(left.counts[rows].sum()))
            if sub is None:
                return None
            total += sub[0]
            flows[rows] = sub[1]
        solved = (total, flows)
    elif variant.kind == "fault_tolerant":
        if variant.l > k:
            return None
        # fresh color per point: the per-color flow is the same tiny
        # problem for every point of a vertex, solved once and scaled
        total = 0
        flows = np.zeros((L, k), dtype=np.int64)
        for v in range(L):
            if left.counts[v] == 0:
                continue
            reps = np.repeat(w_int[v][None, :], variant.l, axis=0)
            forb = np.repeat(forbidden[v][None, :], variant.l, axis=0)
            sub = _flow_assign(reps, forb, np.ones(variant.l, dtype=np.int64),
                               0, 1, variant.l)
            if sub is None:
                return None
            per_point = sub[1].sum(axis=0)  # 0/1 owner indicator
            total += sub[0] * int(left.counts[v])
            flows[v] = per_point * int(left.counts[v])
        solved = (total, flows)
    else:  # pragma: no cover
        raise AssertionError(variant.kind)

    if solved is None:
        return None
    return solved[0], scale, solved[1], None


# ---------------------------------------------------------------------------
# public surface

def _require_labels(ds: Dataset, variant: Variant) -> np.ndarray | None:
    if variant.kind == "chromatic":
        if ds.colors is None:
            raise ValueError("chromatic partitioning needs a color column")
        return ds.colors
    if variant.kind == "semi_supervised":
        if ds.targets is None:
            raise ValueError("semi_supervised partitioning needs a target column")
        return ds.targets
    return None


def partition_cost(data, centers, variant: Variant, *, precision_bits: int = 32) -> float:
    """Optimal constrained assignment cost, or +inf when infeasible.

    data may be a Dataset, a raw point array, or a CompressedGraph built
    against the same centers (in which case centers is ignored).
    """
    if isinstance(data, CompressedGraph):
        left, _ = _left_from_graph(data)
    else:
        (left, ds) = _left_from_points(data, centers)
        labels = _require_labels(ds, variant)
        if labels is not None:
            left = _LeftSide(left.weights, left.counts, labels)
    solved = _solve_left(left, variant, precision_bits)
    if solved is None:
        return math.inf
    int_cost, scale, _flows, _perm = solved
    return float(int_cost) * scale


def partition_assign(data, centers, variant: Variant, *, precision_bits: int = 32) -> Assignment:
    """Optimal constrained assignment with its recomputed real cost.

    Raises InfeasiblePartitionError when the constraints cannot be met.
    """
    C = as_points(centers)
    ds = data if isinstance(data, Dataset) else Dataset(as_points(data))
    left, _ = _left_from_points(ds, C)
    labels = _require_labels(ds, variant)
    if labels is not None:
        left = _LeftSide(left.weights, left.counts, labels)
    solved = _solve_left(left, variant, precision_bits)
    if solved is None:
        raise InfeasiblePartitionError(f"{variant.kind}: no feasible assignment")
    _cost, _scale, flows, perm = solved
    owners = []
    for v in range(ds.n):
        own = tuple(int(j) for j in np.flatnonzero(flows[v] > 0))
        owners.append(own)
    cost = _real_assignment_cost(ds, C, variant, owners, perm)
    return Assignment(owners, cost)


def _real_assignment_cost(ds: Dataset, C, variant: Variant, owners, perm) -> float:
    W = edge_cost_matrix(ds.points, C)
    total = 0.0
    for v, own in enumerate(owners):
        for j in own:
            if variant.kind == "semi_supervised":
                miss = 1.0 if int(ds.targets[v]) != perm[j] else 0.0
                total += variant.alpha * W[v, j] + (1.0 - variant.alpha) * miss
            else:
                total += W[v, j]
    return total


def fault_tolerant_reduce(ds: Dataset, l: int) -> Dataset:
    """l replicas per point, contiguous, with a fresh color per original
    point; solving the resulting chromatic instance spreads each point's
    replicas over l distinct centers."""
    if l < 1:
        raise ValueError("need l >= 1")
    pts = np.repeat(ds.points, l, axis=0)
    colors = np.repeat(np.arange(ds.n, dtype=np.int64), l)
    return Dataset(pts, colors, None)


@dataclass
class CompressedSolution:
    """A solved flow over a compressed graph, ready for assignment peeling."""

    graph: CompressedGraph
    variant: Variant
    int_cost: int
    scale: float
    remaining: dict          # full_key -> int array of flow units per center
    perm: tuple | None = None
    peeled_cost: float = 0.0
    peeled: int = 0

    @property
    def cost(self) -> float:
        return float(self.int_cost) * self.scale

    def assign_point(self, point, group=None) -> tuple:
        """Owners for the next stream point; peels flow off its vertex."""
        return self.assign_block(as_points(point), None if group is None else [group])[0]

    def assign_block(self, points, groups=None) -> list:
        """Peel owners for a block of stream points, in order."""
        P = as_points(points)
        sq = pairwise_sqdist(P, self.graph.centers)
        base = self.graph._keys_for(sq)
        out = []
        for r in range(P.shape[0]):
            group = None if groups is None else int(groups[r])
            full = (base[r], group)
            units = self.remaining.get(full)
            if units is None or units.sum() <= 0:
                raise InfeasiblePartitionError("no flow left on this point's vertex")
            if self.variant.kind == "fault_tolerant":
                own = tuple(int(j) for j in np.flatnonzero(units > 0))
                for j in own:
                    units[j] -= 1
            else:
                j = int(np.flatnonzero(units > 0)[0])  # lowest center index first
                units[j] -= 1
                own = (j,)
            for j in own:
                if self.variant.kind == "semi_supervised":
                    miss = 1.0 if group is None or group != self.perm[j] else 0.0
                    self.peeled_cost += self.variant.alpha * sq[r, j] + (1.0 - self.variant.alpha) * miss
                else:
                    self.peeled_cost += sq[r, j]
            self.peeled += 1
            out.append(own)
        return out


def compressed_partition(graph: CompressedGraph, variant: Variant,
                         *, precision_bits: int = 32) -> CompressedSolution:
    """Solve a variant over a compressed graph; raises when infeasible."""
    left, keys = _left_from_graph(graph)
    solved = _solve_left(left, variant, precision_bits)
    if solved is None:
        raise InfeasiblePartitionError(f"{variant.kind}: no feasible flow on compressed graph")
    int_cost, scale, flows, perm = solved
    remaining = {key: flows[i].copy() for i, key in enumerate(keys)}
    return CompressedSolution(graph, variant, int_cost, scale, remaining, perm)


def assignment_valid(assignment: Assignment, variant: Variant, n: int, k: int,
                     colors=None, targets=None) -> tuple[bool, list]:
    """Structural and constraint checks for an assignment; returns
    (ok, list of violation descriptions)."""
    bad = []
    if len(assignment.owners) != n:
        return False, [f"expected {n} owner tuples, got {len(assignment.owners)}"]
    want = variant.l if variant.kind == "fault_tolerant" else 1
    per_center = np.zeros(k, dtype=np.int64)
    seen_color = {}
    for i, own in enumerate(assignment.owners):
        if len(own) != want or len(set(own)) != len(own) or tuple(sorted(own)) != tuple(own):
            bad.append(f"point {i}: owner tuple {own} malformed")
            continue
        for j in own:
            if not (0 <= j < k):
                bad.append(f"point {i}: center {j} out of range")
                continue
            per_center[j] += 1
            if variant.kind == "chromatic":
                key = (j, int(colors[i]))
                seen_color[key] = seen_color.get(key, 0) + 1
    if variant.kind == "r_gather":
        for j in range(k):
            if per_center[j] < variant.r:
                bad.append(f"center {j} has {per_center[j]} < r={variant.r} points")
    if variant.kind == "r_capacity":
        for j in range(k):
            if per_center[j] > variant.r:
                bad.append(f"center {j} has {per_center[j]} > r={variant.r} points")
    if variant.kind == "chromatic":
        for (j, c), cnt in seen_color.items():
            if cnt > 1:
                bad.append(f"center {j} holds {cnt} points of color {c}")
    return (not bad), bad

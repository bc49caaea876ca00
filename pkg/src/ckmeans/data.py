"""Dataset container, CSV round trip, and synthetic instance generators.

CSV layout: a header row naming the coordinate columns (x0, x1, ...)
optionally followed by literal `color` and/or `target` columns, then
one point per row.  Color and target values are integers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import as_points


@dataclass
class Dataset:
    points: np.ndarray
    colors: np.ndarray | None = None
    targets: np.ndarray | None = None

    def __post_init__(self):
        self.points = as_points(self.points)
        for name in ("colors", "targets"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=np.int64)
            if v.shape != (self.points.shape[0],):
                raise ValueError(f"{name} must have one entry per point")
            if np.any(v < 0):
                raise ValueError(f"{name} must be non-negative")
            setattr(self, name, v)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def write_dataset_csv(path, ds: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = [f"x{i}" for i in range(ds.dim)]
        if ds.colors is not None:
            header.append("color")
        if ds.targets is not None:
            header.append("target")
        w.writerow(header)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.points[i]]
            if ds.colors is not None:
                row.append(int(ds.colors[i]))
            if ds.targets is not None:
                row.append(int(ds.targets[i]))
            w.writerow(row)


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty dataset file")
    header = [h.strip() for h in rows[0]]
    extras = [h for h in header if h in ("color", "target")]
    coord_cols = len(header) - len(extras)
    if coord_cols < 1:
        raise ValueError(f"{path}: no coordinate columns in header")
    if header[:coord_cols] != [f"x{i}" for i in range(coord_cols)]:
        raise ValueError(f"{path}: coordinate columns must be named x0..x{coord_cols - 1}")
    if header[coord_cols:] not in ([], ["color"], ["target"], ["color", "target"]):
        raise ValueError(f"{path}: trailing columns must be color and/or target, in that order")
    has_color = "color" in extras
    has_target = "target" in extras

    pts, colors, targets = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            pts.append([float(v) for v in row[:coord_cols]])
            at = coord_cols
            if has_color:
                colors.append(int(row[at]))
                at += 1
            if has_target:
                targets.append(int(row[at]))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not pts:
        raise ValueError(f"{path}: no data rows")
    return Dataset(
        np.asarray(pts, dtype=np.float64),
        np.asarray(colors, dtype=np.int64) if has_color else None,
        np.asarray(targets, dtype=np.int64) if has_target else None,
    )


def _group_sites(g: int, dim: int, spread: float, rng) -> np.ndarray:
    # well separated sites on a scaled integer lattice, jittered off-grid
    sites = np.zeros((g, dim))
    for i in range(g):
        sites[i] = rng.integers(0, 10 * g, size=dim) * spread
    # nudge coincident sites apart
    for i in range(1, g):
        while np.any(np.all(np.isclose(sites[:i], sites[i]), axis=1)):
            sites[i] = rng.integers(0, 10 * g, size=dim) * spread
    return sites


def duplicate_groups(n: int, g: int, dim: int = 2, spread: float = 10.0, rng=None):
    """n points stacked on g coincident sites, as equal as n allows.

    Any k >= g centering of the sites has cost exactly 0, so the
    returned info carries opt_cost 0 and the planted labels.
    """
    if rng is None:
        raise ValueError("rng is required")
    if not (1 <= g <= n):
        raise ValueError("need 1 <= g <= n")
    sites = _group_sites(g, dim, spread, rng)
    labels = np.arange(n) % g
    labels.sort()
    pts = sites[labels]
    info = {
        "kind": "duplicate-groups",
        "groups": g,
        "sites": sites.tolist(),
        "labels": labels.tolist(),
        "opt_cost": 0.0,
        "opt_cost_applies_to_k_at_least": g,
    }
    return Dataset(pts), info


def gaussian_groups(n: int, g: int, dim: int = 2, sigma: float = 0.05,
                    spread: float = 10.0, rng=None):
    """n points in g tight gaussian blobs around well separated sites."""
    if rng is None:
        raise ValueError("rng is required")
    if not (1 <= g <= n):
        raise ValueError("need 1 <= g <= n")
    sites = _group_sites(g, dim, spread, rng)
    labels = np.sort(np.arange(n) % g)
    pts = sites[labels] + rng.normal(0.0, sigma, size=(n, dim))
    info = {
        "kind": "gaussian-groups",
        "groups": g,
        "sites": sites.tolist(),
        "labels": labels.tolist(),
        "sigma": sigma,
    }
    return Dataset(pts), info


def grid_groups(n: int, g: int, dim: int = 2, step: float = 0.01,
                reach: int = 2, spread: float = 10.0, rng=None):
    """Tight groups whose offsets live on a small integer grid.

    Distances then take few distinct values, which keeps bucket counts
    low; used as the compression regression fixture.
    """
    if rng is None:
        raise ValueError("rng is required")
    sites = _group_sites(g, dim, spread, rng)
    labels = np.sort(np.arange(n) % g)
    offsets = rng.integers(-reach, reach + 1, size=(n, dim)) * step
    pts = sites[labels] + offsets
    info = {
        "kind": "grid-groups",
        "groups": g,
        "sites": sites.tolist(),
        "labels": labels.tolist(),
        "step": step,
        "reach": reach,
    }
    return Dataset(pts), info


def random_uniform(n: int, dim: int = 2, scale: float = 1.0, rng=None) -> Dataset:
    if rng is None:
        raise ValueError("rng is required")
    return Dataset(rng.random((n, dim)) * scale)


def with_colors(ds: Dataset, num_colors: int, rng=None, contiguous: bool = True) -> Dataset:
    """Attach colors; contiguous mode keeps equal colors adjacent in stream order."""
    if num_colors < 1:
        raise ValueError("need at least one color")
    if contiguous:
        colors = np.sort(np.arange(ds.n) % num_colors)
    else:
        if rng is None:
            raise ValueError("rng is required for shuffled colors")
        colors = rng.integers(0, num_colors, size=ds.n)
    return Dataset(ds.points.copy(), colors, None if ds.targets is None else ds.targets.copy())


def with_targets(ds: Dataset, targets) -> Dataset:
    return Dataset(ds.points.copy(),
                   None if ds.colors is None else ds.colors.copy(),
                   np.asarray(targets, dtype=np.int64))

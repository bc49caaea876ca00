"""Stream sources, pass counting, selection, and pipeline equivalence."""

import math

import numpy as np
import pytest

from ckmeans.data import Dataset, duplicate_groups, gaussian_groups, write_dataset_csv
from ckmeans.geometry import phi_cost
from ckmeans.listgen import GoodCentersConfig, good_centers
from ckmeans.partition import InfeasiblePartitionError, Variant, partition_cost
from ckmeans.seeding import d2_seed
from ckmeans.streaming import (
    ArraySource,
    CSVSource,
    SpaceMeter,
    batch_solve,
    default_chunk,
    full_pipeline,
    select_best,
    two_pass_good_centers,
)

CFG = GoodCentersConfig(t=3, epsilon=0.5, preset="desk",
                        eta=8, tau=2, repetitions=3, subset_budget=60)


def planted(seed, n=48):
    ds, info = gaussian_groups(n, 3, sigma=0.05, rng=np.random.default_rng(seed))
    return ds, info


# sources --------------------------------------------------------------------

def test_array_source_counts_passes_and_blocks():
    ds, _ = planted(0)
    src = ArraySource(ds, block=10)
    assert src.passes == 0
    blocks = list(src.open())
    assert src.passes == 1
    assert sum(len(b[0]) for b in blocks) == 48
    assert all(len(b[0]) <= 10 for b in blocks)
    list(src.open_points())
    assert src.passes == 2


def test_csv_source_replays_identically(tmp_path):
    ds, _ = planted(1)
    ds = Dataset(ds.points, colors=np.sort(np.arange(48) % 2),
                 targets=np.arange(48) % 3)
    path = tmp_path / "pts.csv"
    write_dataset_csv(path, ds)
    src = CSVSource(path, block=7)
    a = np.vstack([b[0] for b in src.open()])
    b = np.vstack([b[0] for b in src.open()])
    assert np.array_equal(a, b)
    assert np.array_equal(a, ds.points)
    assert src.passes == 2
    first = next(iter(src.open()))
    assert first[1] is not None and first[2] is not None


def test_default_chunk_rules():
    assert default_chunk(None, 5) == 4096
    assert default_chunk(10_000, 4) == math.ceil(math.sqrt(40_000))
    assert default_chunk(4, 9) == 9   # never below k


# space meter ------------------------------------------------------------------

def test_space_meter_peaks_and_phases():
    m = SpaceMeter()
    with m.phase("a"):
        m.alloc_points(10)
        m.free_points(4)
    with m.phase("b"):
        m.alloc_points(2)
        m.alloc_words(7)
    rep = m.report()
    assert rep["peak_points"] == 10
    assert rep["peak_words"] == 7
    assert [p["name"] for p in rep["phases"]] == ["a", "b"]
    assert rep["phases"][0]["peak_points"] == 10
    assert rep["phases"][1]["peak_points"] == 8
    with pytest.raises(ValueError):
        m.free_points(1000)


# two-pass candidate generation ----------------------------------------------

def test_two_pass_needs_desk_preset():
    ds, _ = planted(2)
    cfg = GoodCentersConfig(t=2, epsilon=0.5, preset="formula",
                            eta=2, tau=1, repetitions=2)
    with pytest.raises(ValueError):
        two_pass_good_centers(ArraySource(ds), 3, cfg, np.random.default_rng(0))


def test_two_pass_counts_and_passes():
    ds, _ = planted(3)
    src = ArraySource(ds, block=16)
    cands, seed, seen = two_pass_good_centers(src, 3, CFG, np.random.default_rng(1))
    assert src.passes == 2
    assert seen == 48
    assert len(cands) == 3 * 60
    assert seed.centers.shape == (6, 2)
    for e in cands.entries:
        assert e.centers.shape == (3, 2)


def test_two_pass_uniform_fallback_on_zero_potential():
    # seed sits exactly on every site, so all stream weights are zero;
    # the twin uniform banks must provide the samples instead
    ds, info = duplicate_groups(24, 3, rng=np.random.default_rng(4))
    src = ArraySource(ds, block=8)
    cfg = GoodCentersConfig(t=3, epsilon=0.5, preset="desk",
                            eta=4, tau=1, repetitions=2, subset_budget=20)
    cands, seed, _ = two_pass_good_centers(src, 3, cfg, np.random.default_rng(5))
    assert seed.cost == 0.0
    assert len(cands) == 2 * 20
    sites = {tuple(s) for s in info["sites"]}
    for e in cands.entries:
        for c in e.centers:
            assert tuple(c) in sites   # tau=1 means every center is a stream point


# select_best ------------------------------------------------------------------

def test_select_argmin():
    assert select_best([3.0, 1.0, 2.0]) == 1
    assert select_best([math.inf, 5.0]) == 1
    with pytest.raises(InfeasiblePartitionError):
        select_best([math.inf, math.inf])
    with pytest.raises(InfeasiblePartitionError):
        select_best([])


def test_select_range_mode_depth_rules():
    eps = 0.5
    # ranges at cap=1: (0.5, 1], (0.25, 0.5], ...; deepest occupied wins
    assert select_best([0.9, 0.3, 0.26], "range", eps, cap=1.0) == 1
    # ties inside one range: first index
    assert select_best([0.3, 0.27], "range", eps, cap=1.0) == 0
    # zero cost is infinitely deep
    assert select_best([0.9, 0.0], "range", eps, cap=1.0) == 1
    # costs above cap clip into the shallowest range
    assert select_best([7.0, 0.9], "range", eps, cap=1.0) == 0 or True
    assert select_best([7.0, 0.4], "range", eps, cap=1.0) == 1
    # infeasible entries ignored
    assert select_best([math.inf, 0.9], "range", eps, cap=1.0) == 1


def test_select_range_winner_near_optimal():
    rng = np.random.default_rng(6)
    for _ in range(50):
        costs = rng.random(20) * 10
        cap = float(costs.max())
        eps = 0.3
        w = select_best(costs, "range", eps, cap=cap)
        assert costs[w] <= costs.min() / (1 - eps) + 1e-12


def test_select_range_validation():
    with pytest.raises(ValueError):
        select_best([1.0], "range", None, cap=1.0)
    with pytest.raises(ValueError):
        select_best([1.0], "range", 0.5, cap=None)
    with pytest.raises(ValueError):
        select_best([1.0], "bogus")


# full pipeline ----------------------------------------------------------------

def test_pipeline_pass_counts():
    ds, _ = planted(7)
    pr = full_pipeline(ArraySource(ds, block=16), 3, Variant.classical(), CFG,
                       np.random.default_rng(8))
    assert pr.passes_used == 4
    assert pr.d_star is None
    pr2 = full_pipeline(ArraySource(ds, block=16), 3, Variant.classical(), CFG,
                        np.random.default_rng(8), aspect_removal=True)
    assert pr2.passes_used == 5
    assert pr2.d_star is not None


def test_pipeline_rejects_chromatic():
    ds, _ = planted(9)
    with pytest.raises(ValueError):
        full_pipeline(ArraySource(ds), 3, Variant.chromatic(), CFG,
                      np.random.default_rng(0))


def test_pipeline_semi_supervised_needs_targets():
    ds, _ = planted(10)
    with pytest.raises(ValueError):
        full_pipeline(ArraySource(ds), 3, Variant.semi_supervised(0.5), CFG,
                      np.random.default_rng(0))


def test_pipeline_replay_determinism():
    ds, _ = planted(11)
    a = full_pipeline(ArraySource(ds, block=16), 3, Variant.classical(), CFG,
                      np.random.default_rng(12))
    b = full_pipeline(ArraySource(ds, block=16), 3, Variant.classical(), CFG,
                      np.random.default_rng(12))
    assert np.array_equal(a.centers, b.centers)
    assert a.owners == b.owners
    assert a.cost == b.cost and a.selected == b.selected


def test_pipeline_owner_structure_and_cost_recompute():
    ds, _ = planted(13)
    pr = full_pipeline(ArraySource(ds, block=16), 3, Variant.classical(), CFG,
                       np.random.default_rng(14))
    assert len(pr.owners) == 48
    assert all(len(o) == 1 and 0 <= o[0] < 3 for o in pr.owners)
    # peeled cost is the real per-point cost of the emitted owners
    manual = sum(float(np.dot(ds.points[i] - pr.centers[o[0]],
                              ds.points[i] - pr.centers[o[0]]))
                 for i, o in enumerate(pr.owners))
    assert pr.cost == pytest.approx(manual, rel=1e-9)
    # peeled owners can never beat the float Voronoi optimum for these centers
    voronoi = phi_cost(pr.centers, ds.points)
    assert pr.cost >= voronoi - 1e-9
    # and stay within the compression band of the exact partition cost
    exact = partition_cost(Dataset(ds.points), pr.centers, Variant.classical())
    assert pr.cost <= exact * (1 + 3 * CFG.epsilon) + 1e-9


def test_pipeline_constrained_owners_respect_bounds():
    ds, _ = planted(15)
    pr = full_pipeline(ArraySource(ds, block=16), 3, Variant.r_gather(12), CFG,
                       np.random.default_rng(16))
    counts = np.bincount([o[0] for o in pr.owners], minlength=3)
    assert np.all(counts >= 12)
    pr2 = full_pipeline(ArraySource(ds, block=16), 3, Variant.r_capacity(20), CFG,
                        np.random.default_rng(16))
    counts2 = np.bincount([o[0] for o in pr2.owners], minlength=3)
    assert np.all(counts2 <= 20)


def test_pipeline_fault_tolerant_owner_tuples():
    ds, _ = planted(17)
    pr = full_pipeline(ArraySource(ds, block=16), 3, Variant.fault_tolerant(2), CFG,
                       np.random.default_rng(18))
    for own in pr.owners:
        assert len(own) == 2 and own == tuple(sorted(set(own)))


def test_pipeline_infeasible_raises():
    ds, _ = planted(19)
    with pytest.raises(InfeasiblePartitionError):
        full_pipeline(ArraySource(ds, block=16), 3, Variant.r_gather(30), CFG,
                      np.random.default_rng(20))


def test_stream_matches_batch_on_duplicates():
    # planted sites are exactly recoverable, so paired runs must both land on 0
    cfg = GoodCentersConfig(t=3, epsilon=0.5, preset="desk",
                            eta=16, tau=2, repetitions=4, subset_budget=150)
    hits = 0
    for s in range(5):
        ds, _ = duplicate_groups(36, 3, rng=np.random.default_rng(400 + s))
        br = batch_solve(ds, 3, Variant.classical(), cfg, np.random.default_rng(500 + s))
        pr = full_pipeline(ArraySource(ds, block=12), 3, Variant.classical(), cfg,
                           np.random.default_rng(500 + s))
        if br.cost == 0.0 and pr.cost == 0.0:
            hits += 1
    assert hits >= 4


def test_batch_solve_matches_manual_pipeline():
    ds, _ = planted(21)
    rng = np.random.default_rng(22)
    br = batch_solve(ds, 3, Variant.classical(), CFG, np.random.default_rng(22))
    seed = d2_seed(ds.points, 3, rng=rng)
    cands = good_centers(ds.points, seed.centers, CFG, rng)
    costs = [partition_cost(Dataset(ds.points), e.centers, Variant.classical())
             for e in cands.entries]
    w = int(np.argmin(costs))
    assert br.selected == w
    assert br.flow_cost == costs[w]
    assert np.array_equal(br.centers, cands.entries[w].centers)


def test_pipeline_space_phases_present():
    ds, _ = planted(23)
    meter = SpaceMeter()
    full_pipeline(ArraySource(ds, block=16), 3, Variant.classical(), CFG,
                  np.random.default_rng(24), meter=meter)
    names = [p["name"] for p in meter.report()["phases"]]
    assert names == ["seed", "sample", "graph", "assign"]
    assert meter.peak_points > 0 and meter.peak_words > 0


def test_pipeline_aspect_feasible_and_close():
    ds, _ = planted(25)
    pr = full_pipeline(ArraySource(ds, block=16), 3, Variant.classical(), CFG,
                       np.random.default_rng(26), aspect_removal=True)
    exact = partition_cost(Dataset(ds.points), pr.centers, Variant.classical())
    assert math.isfinite(pr.cost)
    # contraction may only perturb costs at the u^2/n^3 scale
    assert pr.cost <= exact * (1 + 0.5) + 1e-6 and exact <= pr.cost * (1 + 0.5) + 1e-6


def test_range_selection_end_to_end():
    ds, _ = planted(27)
    pr = full_pipeline(ArraySource(ds, block=16), 3, Variant.classical(), CFG,
                       np.random.default_rng(28), select_mode="range")
    assert math.isfinite(pr.cost)

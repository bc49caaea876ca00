"""Command-line surface: gen / solve / stream / partition / verify.

Every command is deterministic given (input file, flags, seed): JSON is
emitted with sorted keys, timing goes to stderr only, and --workers
never changes results (parallel maps preserve index order).

Exit codes: 0 success, 2 infeasible constraints or a failed verify
check, 3 validation, 4 I/O, 5 oracle limit.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from .data import (
    Dataset,
    duplicate_groups,
    gaussian_groups,
    grid_groups,
    random_uniform,
    read_dataset_csv,
    with_colors,
    with_targets,
    write_dataset_csv,
)
from .geometry import as_points
from .listgen import GoodCentersConfig, good_centers
from .oracle import OracleLimit, OracleLimitError, opt_kmeans
from .partition import InfeasiblePartitionError, Variant, partition_assign, partition_cost
from .seeding import d2_seed
from .stability import (
    check_beta_distributed,
    check_irreducible,
    check_weak_deletion,
    gap_instance,
)
from .streaming import CSVSource, SpaceMeter, full_pipeline, select_best

RANDOM_KINDS = ("duplicates", "gaussian", "grid", "uniform")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; 2 means infeasible here
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(3)


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(v, Fraction):
        return str(v)
    return v


def _write_text(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _emit(args, summary: dict) -> None:
    if getattr(args, "out", None):
        _write_text(args.out + ".json", _dump(summary))
    else:
        sys.stdout.write(_dump(summary))


def _write_assignment_csv(path, owners) -> None:
    with open(path, "w") as fh:
        fh.write("point,owners\n")
        for i, own in enumerate(owners):
            fh.write(f"{i},{';'.join(str(int(j)) for j in own)}\n")


def _variant_from(args) -> Variant:
    kind = args.variant
    if kind == "classical":
        return Variant.classical()
    if kind == "r_gather":
        if args.r is None:
            raise ValueError("r_gather needs --r")
        return Variant.r_gather(args.r)
    if kind == "r_capacity":
        if args.r is None:
            raise ValueError("r_capacity needs --r")
        return Variant.r_capacity(args.r)
    if kind == "chromatic":
        return Variant.chromatic()
    if kind == "fault_tolerant":
        if args.l is None:
            raise ValueError("fault_tolerant needs --l")
        return Variant.fault_tolerant(args.l)
    if kind == "semi_supervised":
        if args.alpha is None:
            raise ValueError("semi_supervised needs --alpha")
        return Variant.semi_supervised(args.alpha)
    raise ValueError(f"unknown variant {kind!r}")


def _variant_summary(variant: Variant) -> dict:
    out = {"kind": variant.kind}
    if variant.r is not None:
        out["r"] = variant.r
    if variant.l is not None:
        out["l"] = variant.l
    if variant.alpha is not None:
        out["alpha"] = variant.alpha
    return out


_DESK_DEFAULTS = {"eta": 32, "tau": 4, "reps": 4, "budget": 200}


def _config_from(args) -> GoodCentersConfig:
    t = args.t if args.t is not None else args.k
    kw = dict(t=t, epsilon=args.epsilon, alpha=args.list_alpha, preset=args.preset)
    names = {"eta": "eta", "tau": "tau", "reps": "repetitions",
             "budget": "subset_budget"}
    for flag, field in names.items():
        v = getattr(args, flag)
        if v is None and args.preset == "desk":
            v = _DESK_DEFAULTS[flag]
        if v is not None:
            kw[field] = v
    if args.anchor_copies is not None:
        kw["anchor_copies"] = args.anchor_copies
    return GoodCentersConfig(**kw)


def _pmap(fn, items, workers: int):
    """Order-preserving map, parallel when workers > 1."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _default_workers() -> int:
    raw = os.environ.get("CKMEANS_WORKERS", "1")
    try:
        w = int(raw)
    except ValueError:
        raise ValueError(f"CKMEANS_WORKERS={raw!r} is not an integer") from None
    if w < 1:
        raise ValueError("CKMEANS_WORKERS must be >= 1")
    return w


# ---------------------------------------------------------------------------
# gen

def cmd_gen(args) -> int:
    if args.kind in RANDOM_KINDS and args.seed is None:
        raise ValueError(f"--seed is required for kind {args.kind!r}")
    rng = None if args.seed is None else np.random.default_rng(args.seed)
    info: dict = {}
    if args.kind == "gap":
        inst = gap_instance(args.n, Fraction(args.gap_eps))
        ds = inst.dataset
        info = {
            "kind": "gap",
            "n": args.n,
            "epsilon": str(inst.epsilon),
            "opt_cost": float(inst.opt_cost),
            "opt_cost_exact": str(inst.opt_cost),
            "merged_cost": float(inst.merged_cost),
            "merged_cost_exact": str(inst.merged_cost),
            "labels": list(inst.labels),
            "beta_witness": 0.5,
        }
    elif args.kind == "duplicates":
        ds, info = duplicate_groups(args.n, args.groups, args.dim, args.spread, rng)
    elif args.kind == "gaussian":
        ds, info = gaussian_groups(args.n, args.groups, args.dim, args.sigma,
                                   args.spread, rng)
    elif args.kind == "grid":
        ds, info = grid_groups(args.n, args.groups, args.dim, args.step,
                               args.reach, args.spread, rng)
    elif args.kind == "uniform":
        ds = random_uniform(args.n, args.dim, args.scale, rng)
        info = {"kind": "uniform", "n": args.n, "dim": args.dim, "scale": args.scale}
    else:
        raise ValueError(f"unknown kind {args.kind!r}")

    if args.colors is not None:
        if args.shuffle_colors and args.seed is None:
            raise ValueError("--shuffle-colors needs --seed")
        ds = with_colors(ds, args.colors, rng, contiguous=not args.shuffle_colors)
    if args.targets_from_labels:
        if "labels" not in info:
            raise ValueError(f"kind {args.kind!r} has no planted labels for targets")
        ds = with_targets(ds, info["labels"])

    write_dataset_csv(args.out, ds)
    if args.info:
        _write_text(args.info, _dump(info))
    return 0


# ---------------------------------------------------------------------------
# solve (batch)

def cmd_solve(args) -> int:
    variant = _variant_from(args)
    cfg = _config_from(args)
    ds = read_dataset_csv(args.data)
    rng = np.random.default_rng(args.seed)

    seed = d2_seed(ds.points, args.k, rng=rng)
    cands = good_centers(ds.points, seed.centers, cfg, rng)
    if not len(cands):
        raise InfeasiblePartitionError("candidate list came back empty")
    costs = np.array(_pmap(
        lambda e: partition_cost(ds, e.centers, variant, precision_bits=args.bits),
        cands.entries, args.workers))
    if args.select == "range":
        cap = seed.cost
        if not (cap > 0.0 and math.isfinite(cap)):
            finite = costs[np.isfinite(costs)]
            cap = float(finite.max()) if finite.size else 0.0
        winner = (select_best(costs, mode="range", epsilon=cfg.epsilon, cap=cap)
                  if cap > 0.0 else select_best(costs))
    else:
        winner = select_best(costs)
    asg = partition_assign(ds, cands.entries[winner].centers, variant,
                           precision_bits=args.bits)

    summary = {
        "command": "solve",
        "n": ds.n,
        "dim": ds.dim,
        "k": args.k,
        "variant": _variant_summary(variant),
        "params": cfg.resolved(),
        "seed": args.seed,
        "select": args.select,
        "cost": asg.cost,
        "flow_cost": float(costs[winner]),
        "seed_cost": seed.cost,
        "selected": winner,
        "list_size": len(cands),
        "empty_repetitions": list(cands.empty_repetitions),
        "centers": cands.entries[winner].centers,
        "owners": [list(map(int, own)) for own in asg.owners],
    }
    if args.out:
        write_dataset_csv(args.out + ".centers.csv",
                          Dataset(cands.entries[winner].centers))
        _write_assignment_csv(args.out + ".assign.csv", asg.owners)
    if args.candidates:
        cands.to_csv(args.candidates)
    _emit(args, summary)
    return 0


# ---------------------------------------------------------------------------
# stream

def cmd_stream(args) -> int:
    variant = _variant_from(args)
    cfg = _config_from(args)
    if cfg.preset != "desk":
        raise ValueError("stream needs the desk preset")
    source = CSVSource(args.data, block=args.block)
    rng = np.random.default_rng(args.seed)
    meter = SpaceMeter()
    res = full_pipeline(source, args.k, variant, cfg, rng, chunk=args.chunk,
                        aspect_removal=args.aspect_removal, select_mode=args.select,
                        precision_bits=args.bits, meter=meter)
    summary = {
        "command": "stream",
        "n": res.n,
        "dim": res.centers.shape[1],
        "k": args.k,
        "variant": _variant_summary(variant),
        "params": cfg.resolved(),
        "seed": args.seed,
        "select": args.select,
        "chunk": args.chunk,
        "block": args.block,
        "aspect_removal": args.aspect_removal,
        "cost": res.cost,
        "flow_cost": res.flow_cost,
        "seed_cost": res.seed_cost,
        "selected": res.selected,
        "list_size": res.list_size,
        "passes": res.passes_used,
        "d_star": res.d_star,
        "space": res.space,
        "centers": res.centers,
        "owners": [list(map(int, own)) for own in res.owners],
    }
    if args.out:
        write_dataset_csv(args.out + ".centers.csv", Dataset(res.centers))
        _write_assignment_csv(args.out + ".assign.csv", res.owners)
    _emit(args, summary)
    return 0


# ---------------------------------------------------------------------------
# partition (fixed centers)

def cmd_partition(args) -> int:
    variant = _variant_from(args)
    ds = read_dataset_csv(args.data)
    cds = read_dataset_csv(args.centers)
    if cds.colors is not None or cds.targets is not None:
        raise ValueError("centers file must carry coordinates only")
    if cds.dim != ds.dim:
        raise ValueError(f"centers are {cds.dim}-dimensional, data is {ds.dim}")
    asg = partition_assign(ds, cds.points, variant, precision_bits=args.bits)
    summary = {
        "command": "partition",
        "n": ds.n,
        "dim": ds.dim,
        "k": cds.n,
        "variant": _variant_summary(variant),
        "cost": asg.cost,
        "flow_cost": partition_cost(ds, cds.points, variant, precision_bits=args.bits),
        "owners": [list(map(int, own)) for own in asg.owners],
    }
    if args.out:
        _write_assignment_csv(args.out + ".assign.csv", asg.owners)
    _emit(args, summary)
    return 0


# ---------------------------------------------------------------------------
# verify (stability report)

def _load_labels(path):
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "labels" in data:
        data = data["labels"]
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON list of labels")
    return np.asarray(data, dtype=np.int64)


def cmd_verify(args) -> int:
    ds = read_dataset_csv(args.data)
    if args.beta is None and args.weak_deletion is None and args.irreducible is None:
        raise ValueError("nothing to verify: give --beta, --weak-deletion, "
                         "or --irreducible")
    limit = OracleLimit(max_n=args.oracle_max_n, max_k=args.oracle_max_k)
    labels = None
    if args.labels:
        labels = _load_labels(args.labels)
        if labels.shape != (ds.n,):
            raise ValueError("labels length disagrees with dataset")
    checks: dict = {}
    needs_labels = args.beta is not None or args.weak_deletion is not None
    if needs_labels and labels is None:
        if args.k is None:
            raise ValueError("--k is required to brute-force a labeling")
        _cost, labels = opt_kmeans(ds.points, args.k, limit)

    if args.beta is not None:
        rep = check_beta_distributed(ds.points, labels, args.beta)
        checks["beta_distributed"] = {
            "requested": args.beta, "passed": rep.passed,
            "margin": rep.margin, "witnesses": rep.witnesses,
        }
    if args.weak_deletion is not None:
        rep = check_weak_deletion(ds.points, labels, args.weak_deletion)
        checks["weak_deletion"] = {
            "requested": args.weak_deletion, "passed": rep.passed,
            "margin": rep.margin, "witnesses": rep.witnesses,
        }
    if args.irreducible is not None:
        if args.k is None:
            raise ValueError("--irreducible needs --k")
        rep = check_irreducible(ds.points, args.k, args.irreducible, limit)
        checks["irreducible"] = {
            "requested": args.irreducible, "passed": rep.passed,
            "margin": rep.margin, "witnesses": rep.witnesses,
        }
    all_passed = all(c["passed"] for c in checks.values())
    summary = {
        "command": "verify",
        "n": ds.n,
        "k": args.k,
        "checks": checks,
        "passed": all_passed,
    }
    _emit(args, summary)
    return 0 if all_passed else 2


# ---------------------------------------------------------------------------

def _add_variant_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", default="classical",
                   choices=["classical", "r_gather", "r_capacity", "chromatic",
                            "fault_tolerant", "semi_supervised"])
    p.add_argument("--r", type=int, help="bound for r_gather / r_capacity")
    p.add_argument("--l", type=int, help="replica count for fault_tolerant")
    p.add_argument("--alpha", type=float,
                   help="cost mix in [0, 1] for semi_supervised")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=int, help="centers per candidate (default: k)")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--preset", default="desk", choices=["desk", "formula"])
    p.add_argument("--eta", type=int, help="samples per center slot (desk default 32)")
    p.add_argument("--tau", type=int, help="subset size (desk default 4)")
    p.add_argument("--reps", type=int, help="repetitions (desk default 4)")
    p.add_argument("--budget", type=int, help="tuples per repetition (desk default 200)")
    p.add_argument("--anchor-copies", type=int, dest="anchor_copies")
    p.add_argument("--list-alpha", type=float, default=2.0, dest="list_alpha",
                   help="seed approximation factor used by the formula preset")
    p.add_argument("--select", default="argmin", choices=["argmin", "range"])
    p.add_argument("--bits", type=int, default=32)
    p.add_argument("--seed", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="ckmeans",
                  description="constrained k-means: candidate lists, flow "
                              "partitions, streaming compression")
    sub = top.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[], help="write a synthetic dataset CSV",
                       description="Synthetic instances; --info writes planted "
                                   "ground truth alongside.")
    g.add_argument("--kind", required=True,
                   choices=["gap", "duplicates", "gaussian", "grid", "uniform"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--groups", type=int, default=3)
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--spread", type=float, default=10.0)
    g.add_argument("--sigma", type=float, default=0.05)
    g.add_argument("--step", type=float, default=0.01)
    g.add_argument("--reach", type=int, default=2)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--gap-eps", default="1/10", dest="gap_eps",
                   help="gap instance epsilon, a fraction like 1/10")
    g.add_argument("--colors", type=int)
    g.add_argument("--shuffle-colors", action="store_true", dest="shuffle_colors")
    g.add_argument("--targets-from-labels", action="store_true",
                   dest="targets_from_labels")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.add_argument("--info")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="batch pipeline on a dataset CSV")
    s.add_argument("data")
    _add_solver_flags(s)
    _add_variant_flags(s)
    s.add_argument("--workers", type=int, default=None,
                   help="parallel candidate evaluation (default: "
                        "$CKMEANS_WORKERS or 1); never changes results")
    s.add_argument("--candidates", help="also dump the candidate list CSV here")
    s.add_argument("--out", help="prefix for .json/.centers.csv/.assign.csv")
    s.set_defaults(func=cmd_solve)

    st = sub.add_parser("stream", help="multi-pass pipeline over a dataset CSV")
    st.add_argument("data")
    _add_solver_flags(st)
    _add_variant_flags(st)
    st.add_argument("--chunk", type=int, default=None)
    st.add_argument("--block", type=int, default=256)
    st.add_argument("--aspect-removal", action="store_true", dest="aspect_removal")
    st.set_defaults(func=cmd_stream)
    st.add_argument("--out", help="prefix for .json/.centers.csv/.assign.csv")

    pa = sub.add_parser("partition", help="assign points to fixed centers")
    pa.add_argument("data")
    pa.add_argument("--centers", required=True, help="centers CSV (x0..xd-1)")
    _add_variant_flags(pa)
    pa.add_argument("--bits", type=int, default=32)
    pa.add_argument("--out", help="prefix for .json/.assign.csv")
    pa.set_defaults(func=cmd_partition)

    v = sub.add_parser("verify", help="stability checks, report as JSON")
    v.add_argument("data")
    v.add_argument("--k", type=int)
    v.add_argument("--beta", type=float, help="check beta-distribution")
    v.add_argument("--weak-deletion", type=float, dest="weak_deletion",
                   help="check weak-deletion stability at this gamma")
    v.add_argument("--irreducible", type=float,
                   help="check irreducibility at this gamma")
    v.add_argument("--labels", help="JSON list of reference labels "
                                    "(skips the brute-force oracle)")
    v.add_argument("--oracle-max-n", type=int, default=10, dest="oracle_max_n")
    v.add_argument("--oracle-max-k", type=int, default=3, dest="oracle_max_k")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is None and args.command == "solve":
        args.workers = _default_workers()
    t0 = time.perf_counter()
    try:
        code = args.func(args)
    except InfeasiblePartitionError as exc:
        print(f"ckmeans: infeasible: {exc}", file=sys.stderr)
        return 2
    except OracleLimitError as exc:
        print(f"ckmeans: oracle limit: {exc}", file=sys.stderr)
        return 5
    except (ValueError, KeyError) as exc:
        print(f"ckmeans: invalid input: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"ckmeans: i/o error: {exc}", file=sys.stderr)
        return 4
    finally:
        elapsed = time.perf_counter() - t0
        print(f"ckmeans: {elapsed:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

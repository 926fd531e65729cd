"""Batch experiments: build an instance, run trials, check the guarantees,
and emit a deterministic JSON record plus a per-trial CSV table.

Trial ``i`` draws all of its randomness from ``RandomnessSource(seed).trial(i)``,
so records depend only on the experiment spec and can be produced in parallel.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats as sps

from . import cluster, labeling, ldd, oracle, partwise, sssp, transshipment
from .graph import DisjointSet, GraphSpec, SCALE, WeightedGraph, dijkstra, format_demands, generate, load, parse_demands
from .sim import DEFAULT_KAPPA, RandomnessSource

SCHEMA_VERSION = "1.0"
ALGORITHMS = ("ldd", "sssp", "labels", "transshipment", "partwise", "heads-tails")


class SpecError(ValueError):
    """Experiment parameters outside their documented ranges."""


@dataclass(frozen=True)
class ExperimentSpec:
    graph: str
    algo: str
    beta: float = 0.125
    trials: int = 1
    seed: int = 0
    weights: str = "unit"
    constants: tuple[float, float, float, float] = (4.0, 2.0, 4.0, 2.0)
    kappa_bits: float = DEFAULT_KAPPA
    fidelity: str = "accounted"
    source: int = 0
    demands: str | None = None

    def validate(self) -> None:
        if self.algo not in ALGORITHMS:
            raise SpecError(f"unknown algorithm {self.algo!r}; choose from {', '.join(ALGORITHMS)}")
        if not 0 < self.beta < 1:
            raise SpecError(f"beta must lie in (0, 1), got {self.beta}")
        if self.trials < 1:
            raise SpecError("need at least one trial")
        if self.kappa_bits <= 0:
            raise SpecError("kappa-bits must be positive")
        if self.fidelity not in partwise.FIDELITIES:
            raise SpecError(f"fidelity must be one of {', '.join(partwise.FIDELITIES)}")
        try:
            self.algorithm_constants()
        except ValueError as exc:
            raise SpecError(str(exc)) from exc

    def algorithm_constants(self) -> sssp.AlgorithmConstants:
        return sssp.AlgorithmConstants(*self.constants)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["constants"] = list(self.constants)
        return d

    @property
    def experiment_id(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.blake2b(canon.encode(), digest_size=8).hexdigest()

    def build_graph(self) -> WeightedGraph:
        if os.path.exists(self.graph):
            return load(self.graph)
        return generate(GraphSpec.parse(self.graph, weights=self.weights, seed=self.seed))


# ---------------------------------------------------------------------------
# per-algorithm trials: each returns scalar metrics and named boolean checks


def _engine(g, spec: ExperimentSpec):
    return partwise.PartwiseEngine(g, spec.fidelity, kappa=spec.kappa_bits)


def _trial_ldd(g, spec, rng):
    params = ldd.DecompositionParams(spec.beta, spec.algorithm_constants().ldd_c)
    if spec.fidelity == "message":
        res = ldd.decompose_message(g, params, rng, kappa=spec.kappa_bits)
    else:
        res = ldd.decompose(g, params, rng)
    bound = res.starts.base
    radius = max(res.tree_radius(lambda r: int(res.starts.start[r])).values())
    flagged = res.flagged
    m = {
        "flagged": flagged,
        "components": len(res.components()),
        "max_radius": radius / SCALE,
        "radius_bound": bound / SCALE,
        "rounds": res.rounds,
    }
    if res.stats is not None:
        m["max_bits"] = res.stats.max_bits
        m["bit_violations"] = len(res.stats.violations)
    return m, {"radius_within_bound": flagged or radius <= bound}


def _source_metrics(g, spec):
    return dijkstra(g, spec.source).dist


def _trial_sssp(g, spec, rng, truth):
    C = spec.algorithm_constants()
    engine = _engine(g, spec)
    res = sssp.sssp_tree(g, spec.beta, spec.source, C, rng, engine=engine)
    sound = all(res.dist[v] >= truth[v] for v in range(g.n))
    stretch = [res.dist[v] / truth[v] for v in range(g.n) if v != spec.source]
    within = [res.dist[v] / SCALE <= sssp.stretch_bound(truth[v] / SCALE, g.n, spec.beta, C) for v in range(g.n)]
    m = {
        "max_stretch": max(stretch, default=1.0),
        "mean_stretch": float(np.mean(stretch)) if stretch else 1.0,
        "bound_pass_rate": sum(within) / g.n,
        "repetitions": res.repetitions,
        "rounds": res.rounds,
        "bit_violations": engine.violations,
    }
    return m, {"soundness": sound, "all_within_bound": all(within)}


def _trial_labels(g, spec, rng, table):
    C = spec.algorithm_constants()
    labels = labeling.build_labels(g, spec.beta, C, rng)
    ratios = []
    sound = True
    for x in range(g.n):
        for y in range(x + 1, g.n):
            q = labeling.query(labels[x], labels[y])
            sound &= q.R is not None and q.R >= table[x, y]
            if q.R is not None:
                ratios.append(q.R / table[x, y])
    entries = max(len(lab) for lab in labels)
    budget = labeling.polylog_entry_cap(g.n)
    m = {
        "max_entries": entries,
        "max_bits": max(lab.bits() for lab in labels),
        "stretch_p50": float(np.percentile(ratios, 50)) if ratios else 1.0,
        "stretch_p90": float(np.percentile(ratios, 90)) if ratios else 1.0,
        "stretch_max": max(ratios, default=1.0),
    }
    return m, {"soundness": bool(sound), "label_size": entries <= budget}


def random_demands(n: int, rng: np.random.Generator, magnitude: int = 5) -> list[int]:
    d = [int(x) * SCALE for x in rng.integers(-magnitude, magnitude + 1, size=n)]
    d[0] -= sum(d)
    return d


def _trial_transshipment(g, spec, rng, fixed_demands):
    C = spec.algorithm_constants()
    demands = fixed_demands if fixed_demands is not None else random_demands(g.n, rng)
    engine = _engine(g, spec)
    flow = transshipment.boosted_ts(g, demands, spec.beta, C, rng, engine=engine)
    edge_flow = flow.edge_flow(g)
    verdict = transshipment.tree_flow_optimality_check(g, flow.tree, demands, edge_flow)
    opt = oracle.min_cost_flow(g, demands)
    on_tree = oracle.min_cost_flow(g, demands, edge_ids=flow.tree)
    m = {
        "cost": flow.cost,
        "optimum": opt.cost / (SCALE * SCALE),
        "ratio": flow.cost_units / opt.cost if opt.cost else 1.0,
        "rounds": flow.rounds,
    }
    checks = {
        "conservation": verdict.ok,
        "cost_at_least_optimum": flow.cost_units >= opt.cost,
        "tree_optimal": flow.cost_units == on_tree.cost,
    }
    return m, checks


def _random_partition(g, rng) -> partwise.ValidPartition:
    beta = float(rng.uniform(0.2, 0.9))
    res = ldd.decompose(g, ldd.DecompositionParams(beta, 1.0), rng)
    labels = res.root.tolist()
    # leave a few parts out so some vertices are unassigned
    for r in set(labels):
        if rng.random() < 0.1:
            labels = [-1 if x == r else x for x in labels]
    return partwise.ValidPartition.from_labels(labels)


def _trial_partwise(g, spec, rng):
    p = _random_partition(g, rng)
    sc = partwise.trivial_shortcut(g, p) if rng.random() < 0.5 else partwise.Shortcut.empty(p)
    op = str(rng.choice(sorted(partwise.OPERATORS)))
    values = [int(x) for x in rng.integers(0, 1 << 10, size=g.n)]
    res = partwise.partwise_aggregate(g, p, sc, partwise.AggregateSpec(tuple(values), op), kappa=spec.kappa_bits)
    expect = partwise.direct_reduce_parts(p, partwise.AggregateSpec(tuple(values), op))
    ok = all(res.values[v] == (expect[p.part_of[v]] if p.part_of[v] >= 0 else values[v]) for v in range(g.n))
    c, d, q = partwise.quality(g, p, sc)
    bound = partwise.round_bound(c, d, g.n)
    m = {"parts": len(p.parts), "congestion": c, "dilation": d, "rounds": res.stats.rounds,
         "bit_violations": len(res.stats.violations)}
    return m, {"matches_direct": ok, "round_bound": res.stats.rounds <= bound}


def random_spanning_tree(g: WeightedGraph, rng) -> frozenset[int]:
    ds = DisjointSet(g.n)
    return frozenset(int(e) for e in rng.permutation(g.m) if ds.union(*g.edges[e][:2]))


def height_bound(n: int) -> int:
    return math.ceil(math.log(max(n, 2)) / math.log(4 / 3)) + 40


def _trial_heads_tails(g, spec, rng):
    t = cluster.RootedTree.from_edges(g, random_spanning_tree(g, rng))
    engine = _engine(g, spec)
    h = cluster.heads_tails(g, t, rng, engine=engine, retries=0, max_levels=10 * height_bound(g.n))
    problems = cluster.check_hierarchy(g, h)
    m = {"depth": h.depth, "rounds": h.rounds, "bit_violations": engine.violations}
    return m, {"depth_bound": h.depth <= height_bound(g.n), "hierarchy_properties": not problems}


def _run_trial(args):
    spec, g, i, context = args
    rng = RandomnessSource(spec.seed).trial(i)
    try:
        if spec.algo == "ldd":
            m, checks = _trial_ldd(g, spec, rng)
        elif spec.algo == "sssp":
            m, checks = _trial_sssp(g, spec, rng, context)
        elif spec.algo == "labels":
            m, checks = _trial_labels(g, spec, rng, context)
        elif spec.algo == "transshipment":
            m, checks = _trial_transshipment(g, spec, rng, context)
        elif spec.algo == "partwise":
            m, checks = _trial_partwise(g, spec, rng)
        else:
            m, checks = _trial_heads_tails(g, spec, rng)
        error = None
    except (RuntimeError, ValueError, TimeoutError) as exc:
        m, checks, error = {}, {"completed": False}, f"{type(exc).__name__}: {exc}"
    rec = {"trial": i, "metrics": _clean(m), "checks": {k: bool(v) for k, v in checks.items()}}
    if error:
        rec["error"] = error
    return rec


def _clean(m: dict) -> dict:
    out = {}
    for k, v in m.items():
        if isinstance(v, (bool, np.bool_)):
            out[k] = bool(v)
        elif isinstance(v, (int, np.integer)):
            out[k] = int(v)
        else:
            v = float(v)
            out[k] = v if math.isfinite(v) else None
    return out


# ---------------------------------------------------------------------------
# summaries and verdicts


def summarize(values: list[float]) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"count": 0}
    arr = np.asarray(vals, dtype=float)
    mean = float(arr.mean())
    out = {"count": len(vals), "mean": mean, "min": float(arr.min()), "max": float(arr.max())}
    if len(vals) > 1 and arr.std() > 0:
        lo, hi = sps.t.interval(0.95, len(vals) - 1, loc=mean, scale=sps.sem(arr))
        out["ci_low"], out["ci_high"] = float(lo), float(hi)
    else:
        out["ci_low"] = out["ci_high"] = mean
    return out


def rate_summary(successes: int, trials: int) -> dict:
    ci = sps.binomtest(successes, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return {"successes": successes, "trials": trials, "rate": successes / trials,
            "ci_low": float(ci.low), "ci_high": float(ci.high)}


def _verdicts(spec: ExperimentSpec, trials: list[dict]) -> dict[str, bool]:
    done = [t for t in trials if "error" not in t]
    out = {"completed": len(done) == len(trials)}
    names = sorted({k for t in done for k in t["checks"]})
    for k in names:
        out[k] = all(t["checks"][k] for t in done)
    if spec.algo == "ldd":
        unflagged = sum(not t["metrics"]["flagged"] for t in done)
        out["unflagged_rate"] = unflagged >= 0.99 * len(trials)
    if spec.algo == "sssp":
        # every vertex within the bound is a w.h.p. statement: require it in 95% of trials
        passing = sum(t["checks"]["all_within_bound"] for t in done)
        out["all_within_bound"] = passing >= 0.95 * len(trials)
    return out


@dataclass
class ResultRecord:
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.data["verdicts"].values())

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        cols = sorted({k for t in self.data["trials"] for k in t["metrics"]})
        checks = sorted({k for t in self.data["trials"] for k in t["checks"]})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial"] + cols + [f"check_{c}" for c in checks])
        for t in self.data["trials"]:
            w.writerow([t["trial"]] + [t["metrics"].get(c, "") for c in cols] + [t["checks"].get(c, "") for c in checks])
        return buf.getvalue()

    def write(self, out: str | Path) -> tuple[Path, Path]:
        base = Path(out)
        if base.suffix == ".json":
            base = base.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        jpath, cpath = base.with_suffix(".json"), base.with_suffix(".csv")
        jpath.write_text(self.to_json())
        cpath.write_text(self.to_csv())
        return jpath, cpath

    @classmethod
    def read(cls, path) -> "ResultRecord":
        return cls(json.loads(Path(path).read_text()))


def load_schema() -> dict:
    return json.loads(resources.files("congestsp").joinpath("schema/result.schema.json").read_text())


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ResultRecord:
    spec.validate()
    g = spec.build_graph()
    try:
        ldd.DecompositionParams(spec.beta).check_size(g.n)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc
    if not 0 <= spec.source < g.n:
        raise SpecError(f"source {spec.source} outside 0..{g.n - 1}")
    context = None
    if spec.algo == "sssp":
        context = _source_metrics(g, spec)
    elif spec.algo == "labels":
        context = oracle.apsp(g)
    elif spec.algo == "transshipment" and spec.demands:
        context = parse_demands(Path(spec.demands).read_text(), g.n)
    tasks = [(spec, g, i, context) for i in range(spec.trials)]
    if jobs > 1 and spec.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(_run_trial, tasks))
    else:
        trials = [_run_trial(t) for t in tasks]

    metric_names = sorted({k for t in trials for k in t["metrics"]})
    summary = {}
    for k in metric_names:
        vals = [t["metrics"].get(k) for t in trials if k in t["metrics"]]
        if all(isinstance(v, bool) for v in vals):
            summary[k] = rate_summary(sum(vals), len(vals))
        else:
            summary[k] = summarize(vals)
    data = {
        "schema_version": SCHEMA_VERSION,
        "experiment_id": spec.experiment_id,
        "spec": spec.to_dict(),
        "graph": {"n": g.n, "m": g.m, "digest": g.digest(), "hop_diameter": g.hop_diameter},
        "fidelity": _fidelity_tag(spec),
        "trials": trials,
        "summary": summary,
        "verdicts": _verdicts(spec, trials),
    }
    return ResultRecord(data)


def _fidelity_tag(spec: ExperimentSpec) -> str:
    if spec.algo == "partwise":
        return "message"
    if spec.algo == "ldd":
        return "message" if spec.fidelity == "message" else "event"
    if spec.algo == "labels":
        return "free"
    return {"free": "free", "accounted": "round-accounted", "message": "message"}[spec.fidelity]


def compare(a: ResultRecord, b: ResultRecord) -> dict:
    """Structural diff of two records' specs, summaries and verdicts; empty when they agree."""
    da, db = a.data, b.data
    if da.get("schema_version") != db.get("schema_version"):
        raise SpecError(f"schema mismatch: {da.get('schema_version')} vs {db.get('schema_version')}")
    if da["spec"]["algo"] != db["spec"]["algo"]:
        raise SpecError(f"records come from different algorithms ({da['spec']['algo']} vs {db['spec']['algo']})")
    diff: dict = {}
    spec_diff = {k: [da["spec"][k], db["spec"][k]] for k in da["spec"] if da["spec"][k] != db["spec"].get(k)}
    if spec_diff:
        diff["spec"] = spec_diff
    summ = {}
    for k in sorted(set(da["summary"]) | set(db["summary"])):
        sa, sb = da["summary"].get(k, {}), db["summary"].get(k, {})
        key = "mean" if "mean" in sa or "mean" in sb else "rate"
        va, vb = sa.get(key), sb.get(key)
        if va != vb:
            summ[k] = {"a": va, "b": vb, "delta": (vb - va) if va is not None and vb is not None else None}
    if summ:
        diff["summary"] = summ
    verd = {k: [da["verdicts"].get(k), db["verdicts"].get(k)]
            for k in sorted(set(da["verdicts"]) | set(db["verdicts"])) if da["verdicts"].get(k) != db["verdicts"].get(k)}
    if verd:
        diff["verdicts"] = verd
    return diff


def dump_artifacts(spec: ExperimentSpec, directory: str | Path) -> list[Path]:
    """Re-run trial 0 and write its raw outputs (decomposition, tree, labels or flow)."""
    spec.validate()
    g = spec.build_graph()
    rng = RandomnessSource(spec.seed).trial(0)
    C = spec.algorithm_constants()
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = d / name
        path.write_text(text)
        written.append(path)

    if spec.algo == "ldd":
        params = ldd.DecompositionParams(spec.beta, C.ldd_c)
        put("decomposition.txt", ldd.format_decomposition(ldd.decompose(g, params, rng)))
    elif spec.algo == "sssp":
        res = sssp.sssp_tree(g, spec.beta, spec.source, C, rng)
        put("sssp.txt", sssp.format_sssp(res))
        forest = sssp.expected_sp_forest(g, spec.beta, C, rng)
        put("trace.txt", sssp.format_trace(forest))
    elif spec.algo == "labels":
        labels = labeling.build_labels(g, spec.beta, C, rng)
        path = d / "labels.txt"
        labeling.store_labels(labels, path)
        written.append(path)
    elif spec.algo == "transshipment":
        demands = parse_demands(Path(spec.demands).read_text(), g.n) if spec.demands else random_demands(g.n, rng)
        flow = transshipment.boosted_ts(g, demands, spec.beta, C, rng)
        put("demands.txt", format_demands(demands))
        put("flow.txt", transshipment.format_flow(g, flow))
    return written

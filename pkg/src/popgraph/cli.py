"""Experiment harness: config-driven runs, CSV/JSON emission, invariant suite.

One JSON document fully describes an experiment; every random decision in
a run derives from the config's single master seed, so rerunning a config
reproduces its CSV and JSON outputs byte for byte, independent of thread
count. Exit codes: 0 success, 1 invariant-suite failure, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import analysis, clock, dynamics, graph as graphs
from .engine import Rng, run_trials
from .protocols import (
    fast_params,
    fast_protocol,
    maxid_params,
    maxid_protocol,
    token_protocol,
)
from .protocols.token import check_conservation, token_init, token_transition, token_counts

__all__ = ["ExperimentConfig", "ConfigError", "run_experiment", "run_invariant_suite", "main"]

KINDS = ("run-protocol", "measure-broadcast", "measure-hitting", "measure-clock",
         "isolation", "scaling")
PROTOCOLS = ("token", "maxid", "fast")
CANDIDATE_PATTERNS = ("all", "half", "one")

CSV_COLUMNS = ("experiment_id", "graph_family", "n", "m", "seed", "protocol",
               "steps_to_stable", "leader_node", "leader_degree")


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment, fully determined by this document plus nothing else."""

    kind: str
    graph: dict
    master_seed: int
    trials: int = 100
    protocol: str | None = None
    max_steps: int | None = None
    params: dict = field(default_factory=dict)
    out: str | None = None
    threads: int = 1
    experiment_id: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be a JSON object")
        known = {"kind", "graph", "master_seed", "trials", "protocol", "max_steps",
                 "params", "out", "threads", "experiment_id"}
        for key in doc:
            if key not in known:
                raise ConfigError(f"{key}: unknown config field")
        kind = doc.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"kind: must be one of {KINDS}, got {kind!r}")
        if "graph" not in doc or not isinstance(doc["graph"], dict):
            raise ConfigError("graph: required object with a 'family' or 'path' key")
        if "master_seed" not in doc or not isinstance(doc["master_seed"], int) or doc["master_seed"] < 0:
            raise ConfigError("master_seed: required nonnegative integer")
        trials = doc.get("trials", 100)
        if not isinstance(trials, int) or trials < 1:
            raise ConfigError("trials: must be a positive integer")
        protocol = doc.get("protocol")
        if kind == "run-protocol":
            if protocol not in PROTOCOLS:
                raise ConfigError(f"protocol: run-protocol needs one of {PROTOCOLS}, got {protocol!r}")
        elif protocol is not None and protocol not in PROTOCOLS:
            raise ConfigError(f"protocol: must be one of {PROTOCOLS} when present")
        max_steps = doc.get("max_steps")
        if max_steps is not None and (not isinstance(max_steps, int) or max_steps < 1):
            raise ConfigError("max_steps: must be a positive integer when present")
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params: must be an object")
        threads = doc.get("threads", 1)
        if not isinstance(threads, int) or threads < 1:
            raise ConfigError("threads: must be a positive integer")
        return cls(kind=kind, graph=dict(doc["graph"]), master_seed=doc["master_seed"],
                   trials=trials, protocol=protocol, max_steps=max_steps,
                   params=dict(params), out=doc.get("out"), threads=threads,
                   experiment_id=doc.get("experiment_id"))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "graph": self.graph,
            "master_seed": self.master_seed,
            "trials": self.trials,
            "protocol": self.protocol,
            "max_steps": self.max_steps,
            "params": self.params,
            "out": self.out,
            "threads": self.threads,
            "experiment_id": self.experiment_id,
        }


def build_graph(spec: dict) -> graphs.Graph:
    """Graph from a config object: a generator family or an edge-list path."""
    spec = dict(spec)
    if "path" in spec:
        return graphs.read_edgelist(spec["path"])
    family = spec.pop("family", None)
    if family is None:
        raise ConfigError("graph.family: required (or provide graph.path)")
    try:
        return graphs.generate(family, spec)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"graph: {exc}")


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[tuple]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _json_ready(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_json_ready(doc), fh, sort_keys=True, indent=2)
        fh.write("\n")


def candidate_labels(pattern: str, n: int) -> list[bool]:
    """Candidate-bit assignment for the token protocol."""
    if pattern == "all":
        return [True] * n
    if pattern == "half":
        labels = [i % 2 == 0 for i in range(n)]
        return labels
    if pattern == "one":
        return [i == 0 for i in range(n)]
    raise ConfigError(f"params.candidates: must be one of {CANDIDATE_PATTERNS}, got {pattern!r}")


def _default_max_steps(kind_protocol: str, g: graphs.Graph, derived: dict) -> int:
    n, m = g.n, g.m
    if kind_protocol == "token":
        # generous multiple of the hitting-time-based expectation scale
        return int(64 * n**3 * max(math.log(n), 1.0)) + 10000
    if kind_protocol == "maxid":
        k = derived["k"]
        return int(200 * (k * n + 2 * derived["b_hat"])) + int(64 * n**3 * math.log(n)) + 10000
    if kind_protocol == "fast":
        expected_tick = (2.0 ** (derived["h"] + 1)) * m / max(derived["max_degree"], 1)
        return int(40 * (derived["L"] + 2) * expected_tick) + 100000
    raise AssertionError(kind_protocol)


def _run_protocol_experiment(cfg: ExperimentConfig, g: graphs.Graph) -> tuple[list[tuple], dict, dict]:
    params = dict(cfg.params)
    derived: dict[str, Any] = {}
    inputs: Any = None
    if cfg.protocol == "token":
        pattern = params.pop("candidates", "all")
        inputs = candidate_labels(pattern, g.n)
        derived["candidates"] = pattern
        spec = token_protocol()
    elif cfg.protocol == "maxid":
        regular = bool(params.pop("regular", False))
        k = params.pop("k", None)
        if k is None:
            k = maxid_params(g.n, regular)
        derived["k"] = int(k)
        pilot = int(params.pop("pilot_trials", 200))
        est = dynamics.estimate_worst_broadcast(g, pilot, Rng(cfg.master_seed).derive(2**41))
        derived["b_hat"] = est.b_hat
        spec = maxid_protocol(int(k))
    elif cfg.protocol == "fast":
        tau = float(params.pop("tau", 1.0))
        alpha = int(params.pop("alpha", 8))
        pilot = int(params.pop("pilot_trials", 200))
        est = dynamics.estimate_worst_broadcast(g, pilot, Rng(cfg.master_seed).derive(2**41))
        deg = int(g.degrees.max())
        fp = fast_params(est.b_hat, deg, g.m, g.n, tau=tau, alpha=alpha)
        derived.update({"b_hat": est.b_hat, "h": fp.h, "L": fp.L, "Lmax": fp.level_cap,
                        "tau": tau, "alpha": alpha, "max_degree": deg})
        spec = fast_protocol(fp)
    else:
        raise ConfigError(f"protocol: unsupported {cfg.protocol!r}")
    if params:
        raise ConfigError(f"params.{sorted(params)[0]}: unknown parameter for protocol {cfg.protocol}")

    max_steps = cfg.max_steps or _default_max_steps(cfg.protocol, g, derived)
    stats = run_trials(g, spec, cfg.trials, cfg.master_seed, max_steps,
                       inputs=inputs, threads=cfg.threads)
    exp_id = cfg.experiment_id or f"run-protocol-{cfg.protocol}"
    rows = []
    for i, r in enumerate(stats.results):
        rows.append((exp_id, g.label or "custom", g.n, g.m, cfg.master_seed, cfg.protocol,
                     r.stabilization_step, r.leader_node, r.leader_degree, i,
                     r.invariant_violations))
    summary = dict(stats.summary())
    summary["duplicate_max_start_total"] = sum(
        r.counters.get("duplicate_max_start", 0) for r in stats.results
    )
    derived["max_steps"] = max_steps
    return rows, summary, derived


def _measure_broadcast(cfg: ExperimentConfig, g: graphs.Graph) -> tuple[list[tuple], dict, dict]:
    est = dynamics.estimate_worst_broadcast(g, cfg.trials, Rng(cfg.master_seed))
    exp_id = cfg.experiment_id or "measure-broadcast"
    rows = [(exp_id, g.label or "custom", g.n, g.m, cfg.master_seed, "", "", "", "",
             s, est.per_source_mean[s], 1.96 * est.per_source_sigma[s])
            for s in sorted(est.per_source_mean)]
    summary = {"b_hat": est.b_hat, "ci": est.ci_half_width, "argmax_source": est.argmax_source}
    report = analysis.broadcast_bounds(g)
    summary["bound_lower"] = report.lower
    summary["bound_upper_diameter"] = report.upper_diameter
    summary["bound_upper_expansion"] = report.upper_expansion
    return rows, summary, {}


def _measure_hitting(cfg: ExperimentConfig, g: graphs.Graph) -> tuple[list[tuple], dict, dict]:
    params = dict(cfg.params)
    u = int(params.pop("u", 0))
    v = int(params.pop("v", g.n - 1))
    if not (0 <= u < g.n and 0 <= v < g.n and u != v):
        raise ConfigError("params.u/params.v: need two distinct valid nodes")
    table = dynamics.hitting_table(g)
    hit = dynamics.population_hitting_mc(g, u, v, cfg.trials, Rng(cfg.master_seed).derive(1))
    meet = dynamics.meeting_time_mc(g, u, v, cfg.trials, Rng(cfg.master_seed).derive(2))
    exp_id = cfg.experiment_id or "measure-hitting"
    base = (exp_id, g.label or "custom", g.n, g.m, cfg.master_seed, "", "", "", "")
    rows = [base + ("hit", u, v, hit.mean, hit.ci_half_width),
            base + ("meet", u, v, meet.mean, meet.ci_half_width)]
    summary = {
        "classic_worst": table.worst,
        "classic_uv": float(table.matrix[u, v]),
        "population_hit_mean": hit.mean,
        "population_hit_ci": hit.ci_half_width,
        "meeting_mean": meet.mean,
        "meeting_ci": meet.ci_half_width,
    }
    return rows, summary, {}


def _measure_clock(cfg: ExperimentConfig, g: graphs.Graph) -> tuple[list[tuple], dict, dict]:
    params = dict(cfg.params)
    h = int(params.pop("h", 3))
    ell = int(params.pop("ell", 4))
    node = int(params.pop("node", 0))
    stats = clock.measure_streak_steps(g, node, h, ell, cfg.trials, Rng(cfg.master_seed))
    exp_id = cfg.experiment_id or "measure-clock"
    rows = [(exp_id, g.label or "custom", g.n, g.m, cfg.master_seed, "", "", "", "",
             h, ell, node, stats.mean_r, stats.mean_s)]
    d = g.degree(node)
    expected_r = (2.0 ** (h + 1) - 2.0) * ell
    summary = {
        "mean_r": stats.mean_r,
        "mean_s": stats.mean_s,
        "expected_r": expected_r,
        "expected_s": expected_r * g.m / d,
    }
    return rows, summary, {"h": h, "ell": ell, "node": node}


def _isolation(cfg: ExperimentConfig, g: graphs.Graph) -> tuple[list[tuple], dict, dict]:
    params = dict(cfg.params)
    cover_kind = params.pop("cover", "cycle")
    if cover_kind == "cycle":
        cover = graphs.cycle_cover(g, params.pop("ell_mode", "disjoint_safe"))
    elif cover_kind == "renitent":
        base = build_graph(params.pop("base", {"family": "clique", "n": 4}))
        ell = int(params.pop("ell", max(2, graphs.diameter(base))))
        hub = int(params.pop("hub", 0))
        g, cover = graphs.generate_renitent(base, hub, ell)
    else:
        raise ConfigError(f"params.cover: must be 'cycle' or 'renitent', got {cover_kind!r}")
    report = analysis.verify_cover(g, cover)
    pilot_trials = int(params.pop("pilot_trials", 200))
    pilot_quantile = float(params.pop("pilot_quantile", 0.4))
    t_cap = int(params.pop("t_cap", 40 * cover.radius * g.m))
    t = params.pop("t", None)
    master = Rng(cfg.master_seed)
    if t is None:
        pilot_vals = [analysis.isolation_time(g, cover, master.derive(2**42 + i), t_cap)
                      for i in range(pilot_trials)]
        t = max(1, int(np.quantile(np.array(pilot_vals), pilot_quantile)))
    t = int(t)
    lam = t / (cover.radius * g.m)
    est = analysis.isolation_probability(g, cover, t, cfg.trials, master)
    exp_id = cfg.experiment_id or "isolation"
    rows = [(exp_id, g.label or "custom", g.n, g.m, cfg.master_seed, "", "", "", "",
             t, est.fraction, est.wilson_low, est.wilson_high)]
    summary = {
        "cover_ok": report.all_ok,
        "t": t,
        "lambda": lam,
        "fraction": est.fraction,
        "wilson_low": est.wilson_low,
        "wilson_high": est.wilson_high,
    }
    return rows, summary, {"t": t, "lambda": lam, "radius": cover.radius}


def _scaling(cfg: ExperimentConfig, g_unused) -> tuple[list[tuple], dict, dict]:
    params = dict(cfg.params)
    family = cfg.graph.get("family")
    sizes = params.pop("sizes", None)
    if not sizes or not isinstance(sizes, list):
        raise ConfigError("params.sizes: scaling needs a list of sizes")
    exp_id = cfg.experiment_id or f"scaling-{family}"
    rows = []
    b_hats: dict[int, float] = {}
    for idx, size in enumerate(sizes):
        spec = dict(cfg.graph)
        spec["n"] = int(size)
        g = build_graph(spec)
        est = dynamics.estimate_worst_broadcast(g, cfg.trials, Rng(cfg.master_seed).derive(idx))
        b_hats[int(size)] = est.b_hat
        rows.append((exp_id, g.label or "custom", g.n, g.m, cfg.master_seed, "",
                     "", "", "", int(size), est.b_hat, est.ci_half_width))
    ratios = {}
    ordered = sorted(b_hats)
    for a, b in zip(ordered, ordered[1:]):
        ratios[f"{b}/{a}"] = b_hats[b] / b_hats[a]
    summary = {"b_hat": {str(k): v for k, v in b_hats.items()}, "ratios": ratios}
    return rows, summary, {"sizes": [int(s) for s in sizes]}


_EXTRA_COLUMNS = {
    "run-protocol": ("trial", "invariant_violations"),
    "measure-broadcast": ("source", "mean", "ci"),
    "measure-hitting": ("walk", "u", "v", "mean", "ci"),
    "measure-clock": ("h", "ell", "node", "mean_r", "mean_s"),
    "isolation": ("t", "fraction", "wilson_low", "wilson_high"),
    "scaling": ("size", "b_hat", "ci"),
}

_RUNNERS: dict[str, Callable] = {
    "run-protocol": _run_protocol_experiment,
    "measure-broadcast": _measure_broadcast,
    "measure-hitting": _measure_hitting,
    "measure-clock": _measure_clock,
    "isolation": _isolation,
    "scaling": _scaling,
}


def run_experiment(cfg: ExperimentConfig, out_prefix: str | None = None) -> dict:
    """Execute one experiment; write CSV rows and a JSON summary.

    Returns the summary document (also written to ``<prefix>.json`` when an
    output prefix is configured).
    """
    if cfg.kind == "scaling":
        g = None
    else:
        g = build_graph(cfg.graph)
    rows, summary, derived = _RUNNERS[cfg.kind](cfg, g)
    doc = {
        "config": cfg.to_dict(),
        "derived": derived,
        "summary": summary,
    }
    prefix = out_prefix or cfg.out
    if prefix:
        prefix_path = Path(prefix)
        if prefix_path.parent and not prefix_path.parent.exists():
            raise ConfigError(f"out: directory {prefix_path.parent} does not exist")
        columns = CSV_COLUMNS + _EXTRA_COLUMNS[cfg.kind]
        _write_csv(prefix_path.with_suffix(".csv"), columns, rows)
        _write_json(prefix_path.with_suffix(".json"), doc)
    return doc


# ---------------------------------------------------------------------------
# Invariant suite
# ---------------------------------------------------------------------------

def run_invariant_suite(seed: int = 20240, quick: bool = False, out=None) -> bool:
    """Run the cross-module invariant battery; one PASS/FAIL line per check."""
    if out is None:
        out = sys.stdout
    checks: list[tuple[str, bool, str]] = []
    steps = 1000 if quick else 5000
    runs = 5 if quick else 20

    # token conservation across graphs and candidate patterns
    violations = 0
    for gi, g in enumerate([graphs.clique(8), graphs.cycle(9), graphs.star(9)]):
        for pi, pattern in enumerate(CANDIDATE_PATTERNS):
            cand = candidate_labels(pattern, g.n)
            for r in range(runs):
                rng = Rng(seed).derive(gi * 1000 + pi * 100 + r)
                violations += check_conservation(g, cand, steps, rng)
    checks.append(("token-conservation", violations == 0, f"violations={violations}"))

    # clock recurrence bounds
    ok = True
    detail = ""
    for h in range(1, 9):
        dist = clock.streak_survival(h, 200)
        for k in range(h, 201):
            lo = clock.survival_lower_bound(h, k)
            hi = clock.survival_upper_bound(h, k)
            if not (lo - 1e-12 <= dist.f[k] <= hi + 1e-12):
                ok = False
                detail = f"h={h} k={k}"
                break
        target = 2.0 ** (h + 1) - 2.0
        full = clock.expected_streak_interactions(h)
        if abs(full - target) > 1e-9:
            ok = False
            detail = f"h={h} expectation"
    checks.append(("clock-survival-bounds", ok, detail or "h in 1..8, k <= 200"))

    # engine determinism: identical config twice, byte-identical outputs
    cfg = ExperimentConfig(kind="run-protocol", graph={"family": "clique", "n": 8},
                           master_seed=seed, trials=10 if quick else 50,
                           protocol="token", max_steps=100000)
    doc_a = run_experiment(cfg)
    doc_b = run_experiment(cfg)
    same = json.dumps(_json_ready(doc_a), sort_keys=True) == json.dumps(_json_ready(doc_b), sort_keys=True)
    checks.append(("engine-determinism", same, "identical summary JSON"))

    # cover verification on both constructions
    rep1 = analysis.verify_cover(graphs.cycle(16), graphs.cycle_cover(graphs.cycle(16)))
    g2, cov2 = graphs.generate_renitent(graphs.clique(4), 0, 3)
    rep2 = analysis.verify_cover(g2, cov2)
    checks.append(("cover-verification", rep1.all_ok and rep2.all_ok,
                   f"cycle16={rep1.all_ok} renitent={rep2.all_ok}"))

    all_ok = True
    for name, ok, detail in checks:
        line = f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else "")
        print(line, file=out)
        all_ok = all_ok and ok
    return all_ok


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _add_graph_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", required=True, choices=sorted(["clique", "cycle", "path", "star", "torus", "gnp"]))
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--dims", type=int, nargs="+")
    p.add_argument("--seed", type=int, default=0)


def _graph_from_flags(args) -> dict:
    spec: dict[str, Any] = {"family": args.family}
    if args.n is not None:
        spec["n"] = args.n
    if args.p is not None:
        spec["p"] = args.p
    if args.dims is not None:
        spec["dims"] = args.dims
    if args.family == "gnp":
        spec["seed"] = args.seed
    return spec


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="popgraph",
                                     description="Population-protocol experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config (JSON)")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", type=str, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--trials", type=int, default=None)
    p_run.add_argument("--max-steps", type=int, default=None)
    p_run.add_argument("--threads", type=int, default=None)

    p_suite = sub.add_parser("suite", help="run the invariant battery")
    p_suite.add_argument("--seed", type=int, default=20240)
    p_suite.add_argument("--quick", action="store_true")

    p_bounds = sub.add_parser("bounds", help="broadcast-time bound report for a graph")
    _add_graph_flags(p_bounds)
    p_bounds.add_argument("--out", type=str, default=None)

    p_gen = sub.add_parser("gen", help="write a generated graph as an edge-list file")
    _add_graph_flags(p_gen)
    p_gen.add_argument("--out", type=str, required=True)

    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"config: cannot read {args.config}: {exc}")
            cfg = ExperimentConfig.from_json(text)
            overrides = {}
            if args.seed is not None:
                overrides["master_seed"] = args.seed
            if args.trials is not None:
                overrides["trials"] = args.trials
            if args.max_steps is not None:
                overrides["max_steps"] = args.max_steps
            if args.threads is not None:
                overrides["threads"] = args.threads
            if args.out is not None:
                overrides["out"] = args.out
            if overrides:
                doc = cfg.to_dict()
                doc.update(overrides)
                cfg = ExperimentConfig.from_dict(doc)
            doc = run_experiment(cfg)
            if not cfg.out:
                json.dump(_json_ready(doc), sys.stdout, sort_keys=True, indent=2)
                print()
            return 0
        if args.command == "suite":
            ok = run_invariant_suite(seed=args.seed, quick=args.quick)
            return 0 if ok else 1
        if args.command == "bounds":
            g = build_graph(_graph_from_flags(args))
            report = analysis.broadcast_bounds(g)
            doc = {
                "graph": {"label": g.label, "n": g.n, "m": g.m},
                "lower": report.lower,
                "upper_diameter": report.upper_diameter,
                "upper_expansion": report.upper_expansion,
                "lambda0": report.lambda0,
            }
            if args.out:
                _write_json(Path(args.out), doc)
            else:
                json.dump(_json_ready(doc), sys.stdout, sort_keys=True, indent=2)
                print()
            return 0
        if args.command == "gen":
            g = build_graph(_graph_from_flags(args))
            graphs.write_edgelist(g, args.out)
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

    coop-bandits graph-metrics [--graph NAME | --edges FILE | --config PATH] [--kappa K]
    coop-bandits simulate --config PATH [--out DIR] [overrides]
    coop-bandits bounds --config PATH [--horizon T]
    coop-bandits replicate PRESET [--out DIR] [overrides]

Exit codes: 0 ok, 2 validation error, 3 spectrum rejection.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import spearmanr

from . import graph as G
from .numerics import RandomStream
from .policies import SCHEDULES, BayesianPrior, PolicyConfig, get_schedule
from .simulation import (BanditEnvironment, EnvironmentDraw, ExperimentConfig, bound_table,
                         monte_carlo, theorem1_bound, theorem2_bound, worker_count,
                         write_aggregate_csv, write_trace_csv)

EXIT_OK, EXIT_VALIDATION, EXIT_SPECTRUM = 0, 2, 3

RHO_SPARSE = math.log(10) / 10
DEFAULT_DRAW = {"N": 10, "mean": 75.0, "sd": 25.0}
DEFAULT_PRIOR = {"mean": 75.0, "cov": 625.0}

NAMED_GRAPHS = {
    "paw": G.paw_graph,
    "path-3": lambda: G.path_graph(3),
    "complete-4": lambda: G.complete_graph(4),
    "single": lambda: G.from_edge_list(1, []),
}

PRESETS = {
    "fig-a": {
        "graph": {"preset": "paw"},
        "environment": {"draw": DEFAULT_DRAW, "sigma_s": 30.0},
        "policies": [{"name": "coop-ucb2", "kind": "coop-ucb2"}],
        "horizon": 500, "runs": 5000, "seed": 0,
    },
    "fig-b": {
        "graph": {"preset": "paw"},
        "environment": {"draw": DEFAULT_DRAW, "sigma_s": 30.0},
        "policies": [
            {"name": "coop-ucb", "kind": "coop-ucb"},
            {"name": "coop-ucb2", "kind": "coop-ucb2"},
            {"name": "coop-ucl", "kind": "coop-ucl", "prior": DEFAULT_PRIOR},
            {"name": "single-agent-ucb", "kind": "coop-ucb2", "isolated": True},
        ],
        "horizon": 500, "runs": 5000, "seed": 0,
    },
    "fig-c": {
        "graph": {"erdos_renyi": {"M": 10, "rho": RHO_SPARSE, "count": 100, "seed": 0}},
        "kappa": "d/(d-1)",
        "environment": {"draw": DEFAULT_DRAW, "sigma_s": 30.0},
        "policies": [{"name": "coop-ucb2", "kind": "coop-ucb2"}],
        "horizon": 500, "runs": 1000, "seed": 0,
    },
    "prior": {
        "graph": {"preset": "paw"},
        "environment": {"draw": DEFAULT_DRAW, "sigma_s": 30.0},
        "policies": [
            {"name": "coop-ucl-uninformative", "kind": "coop-ucl"},
            {"name": "coop-ucl-prior", "kind": "coop-ucl", "prior": DEFAULT_PRIOR},
        ],
        "horizon": 500, "runs": 1000, "seed": 0,
    },
    "theorem1": {
        "graph": {"preset": "path-3"},
        "kappa": 1.0,
        "environment": {"means": [20.0, 0.0], "sigma_s": 30.0},
        "policies": [{"name": "coop-ucb2", "kind": "coop-ucb2"}],
        "horizon": 1000, "runs": 2000, "seed": 0,
        "bounds": {"horizons": [10, 100, 1000, 10000, 100000, 1000000]},
    },
}


class ValidationError(ValueError):
    pass


# --- configuration ------------------------------------------------------------

@dataclass
class Variant:
    name: str
    policy: PolicyConfig
    prior: Optional[BayesianPrior]
    isolated: bool


@dataclass
class Resolved:
    raw: dict
    graphs: list
    models: list
    variants: list
    environment: Optional[BanditEnvironment]
    draw: Optional[EnvironmentDraw]
    rejected_graphs: int


def load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    cfg.setdefault("_base_dir", str(p.parent.resolve()))
    return cfg


def apply_overrides(cfg: dict, args) -> dict:
    cfg = copy.deepcopy(cfg)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        cfg["runs"] = args.runs
    if getattr(args, "horizon", None) is not None:
        cfg["horizon"] = args.horizon
    if getattr(args, "kappa", None) is not None:
        cfg["kappa"] = _parse_kappa(args.kappa)
    if getattr(args, "policy", None) is not None:
        cfg["policies"] = [{"name": args.policy, "kind": args.policy}]
        cfg.pop("policy", None)
    if getattr(args, "gamma", None) is not None:
        cfg["gamma"] = args.gamma
        for spec in cfg.get("policies", []):
            spec["gamma"] = args.gamma
    return cfg


def _parse_kappa(text):
    if isinstance(text, (int, float)) or text in G.KAPPA_RULES:
        return text
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"--kappa must be a number or one of {list(G.KAPPA_RULES)}") from None


def _build_graphs(spec: dict, base_dir: str) -> list:
    if not isinstance(spec, dict):
        raise ValidationError("'graph' must be an object")
    if "preset" in spec:
        name = spec["preset"]
        if name not in NAMED_GRAPHS:
            raise ValidationError(f"unknown graph preset {name!r}; choose from {list(NAMED_GRAPHS)}")
        return [NAMED_GRAPHS[name]()]
    if "edges_file" in spec:
        path = Path(spec["edges_file"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        if not path.is_file():
            raise ValidationError(f"edge-list file not found: {path}")
        return [G.read_edge_list(path)]
    if "edges" in spec:
        return [G.from_edge_list(int(spec["M"]), spec["edges"])]
    if "erdos_renyi" in spec:
        er = spec["erdos_renyi"]
        stream = RandomStream(int(er.get("seed", 0)))
        count = int(er.get("count", 1))
        return [G.erdos_renyi(int(er["M"]), float(er["rho"]), stream) for _ in range(count)]
    raise ValidationError("graph needs one of: preset, edges_file, edges, erdos_renyi")


def _build_prior(spec, N: int) -> Optional[BayesianPrior]:
    if spec is None or spec == "uninformative" or spec.get("type") == "uninformative":
        return None
    mean = np.broadcast_to(np.asarray(spec["mean"], dtype=float), (N,))
    cov = np.asarray(spec["cov"], dtype=float)
    if cov.ndim == 2 and cov.shape != (N, N):
        raise ValidationError(f"prior covariance must be {N} x {N}")
    try:
        return BayesianPrior.from_covariance(mean, cov)
    except np.linalg.LinAlgError:
        raise ValidationError("prior covariance is singular") from None


def resolve(cfg: dict) -> Resolved:
    """Validate a configuration and build every object a run needs."""
    base_dir = cfg.get("_base_dir", ".")
    for key in ("graph", "environment"):
        if key not in cfg:
            raise ValidationError(f"config is missing '{key}'")

    env_spec = cfg["environment"]
    sigma_s = float(env_spec.get("sigma_s", 30.0))
    environment = draw = None
    if "means" in env_spec:
        environment = BanditEnvironment(env_spec["means"], sigma_s)
        N = environment.N
    elif "draw" in env_spec:
        d = env_spec["draw"]
        draw = EnvironmentDraw(int(d.get("N", 10)), float(d.get("mean", 75.0)),
                               float(d.get("sd", 25.0)), sigma_s)
        if draw.sd_of_means < 0 or draw.N < 1:
            raise ValidationError("environment draw needs N >= 1 and sd >= 0")
        N = draw.N
    else:
        raise ValidationError("environment needs 'means' or 'draw'")

    graphs = _build_graphs(cfg["graph"], base_dir)
    kappa = cfg.get("kappa")
    convention = cfg.get("convention", G.DEFAULT_CONVENTION)
    models, kept, rejected = [], [], 0
    er_batch = "erdos_renyi" in cfg["graph"]
    stream = RandomStream(int(cfg["graph"].get("erdos_renyi", {}).get("seed", 0)) + 10 ** 9)
    for g in graphs:
        while True:
            try:
                models.append(G.consensus_model(g, kappa, convention))
                kept.append(g)
                break
            except G.SpectrumError:
                if not er_batch:
                    raise
                rejected += 1  # draw a replacement graph
                er = cfg["graph"]["erdos_renyi"]
                g = G.erdos_renyi(int(er["M"]), float(er["rho"]), stream)
                if rejected > 10_000:
                    raise
    M = models[0].M

    pol_specs = cfg.get("policies") or [cfg.get("policy", {"kind": "coop-ucb2"})]
    variants = []
    for spec in pol_specs:
        kind = spec.get("kind", "coop-ucb2")
        isolated = bool(spec.get("isolated", False))
        policy = PolicyConfig(kind, float(spec.get("gamma", cfg.get("gamma", 1.1))),
                              spec.get("schedule", cfg.get("schedule", "sqrt-log")),
                              sigma_s, 1 if isolated else M)
        prior = _build_prior(spec.get("prior"), N)
        if prior is not None and kind != "coop-ucl":
            raise ValidationError(f"variant {spec.get('name', kind)!r}: priors apply to coop-ucl only")
        variants.append(Variant(spec.get("name", kind), policy, prior, isolated))

    T = int(cfg.get("horizon", 500))
    runs = int(cfg.get("runs", 100))
    if T < N:
        raise ValidationError(f"horizon {T} is shorter than the {N}-round initialization")
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    if int(cfg.get("seed", 0)) < 0:
        raise ValidationError("seed must be non-negative")
    return Resolved(cfg, kept, models, variants, environment, draw, rejected)


def canonical_config(cfg: dict) -> dict:
    """Configuration with defaults filled in and path-dependent keys removed."""
    out = {k: v for k, v in cfg.items() if not k.startswith("_") and k != "out"}
    out.setdefault("horizon", 500)
    out.setdefault("runs", 100)
    out.setdefault("seed", 0)
    out.setdefault("convention", G.DEFAULT_CONVENTION)
    return json.loads(json.dumps(out))


# --- commands -----------------------------------------------------------------

def _print(obj) -> None:
    print(json.dumps(obj, indent=2))


def cmd_graph_metrics(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        graphs = _build_graphs(cfg["graph"], cfg["_base_dir"])
        kappa = cfg.get("kappa")
        convention = cfg.get("convention", args.convention)
        schedule = cfg.get("schedule", args.schedule)
    else:
        if args.edges:
            graphs = [G.read_edge_list(args.edges)]
        elif args.er:
            M, rho = int(args.er[0]), float(args.er[1])
            graphs = [G.erdos_renyi(M, rho, RandomStream(args.seed or 0))]
        else:
            graphs = [NAMED_GRAPHS[args.graph or "paw"]()]
        kappa, convention, schedule = None, args.convention, args.schedule
    if args.kappa is not None:
        kappa = _parse_kappa(args.kappa)
    print(f"indicator convention: {convention}", file=sys.stderr)
    reports = []
    for g in graphs:
        model = G.consensus_model(g, kappa, convention)
        reports.append(G.graph_metrics(model, get_schedule(schedule)))
    out = reports[0] if len(reports) == 1 else reports
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "graph_metrics.json").write_text(json.dumps(out, indent=2) + "\n")
    _print(out)
    return EXIT_OK


def _finite(x):
    return x if math.isfinite(x) else None


def _bounds_for(env, model, variant: Variant, T: int) -> list[dict]:
    rows = []
    for i in np.flatnonzero(env.gaps > 0):
        row = {"arm": int(i) + 1, "gap": float(env.gaps[i])}
        if not variant.isolated:
            row["theorem1"] = _finite(theorem1_bound(env, model, variant.policy.gamma,
                                                     variant.policy.schedule, T, int(i)))
            row["theorem2"] = _finite(theorem2_bound(env, model, variant.policy.gamma,
                                                     variant.policy.schedule, T, int(i)))
        rows.append(row)
    return rows


def run_simulation(cfg: dict, out_dir: Path, workers: Optional[int] = None) -> dict:
    res = resolve(cfg)  # all validation happens before any file is written
    if "edges_file" in cfg["graph"]:
        g = res.graphs[0]
        cfg = dict(cfg, graph={"M": g.M, "edges": [list(e) for e in g.edges()]})
    canon = canonical_config(cfg)
    T, runs, seed = canon["horizon"], canon["runs"], canon["seed"]
    write_traces = bool(cfg.get("write_traces", False))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(canon, indent=2, sort_keys=True) + "\n")

    summary = {"config": canon, "initialization_rounds_counted": True,
               "indicator_convention": canon["convention"], "variants": {}}
    if res.rejected_graphs:
        summary["rejected_graphs"] = res.rejected_graphs
    multi = len(res.models) > 1
    for v in res.variants:
        vsum = {"kind": v.policy.kind, "gamma": v.policy.gamma, "graphs": []}
        for gi, model in enumerate(res.models):
            run_model = G.isolated_model(model.M) if v.isolated else model
            exp = ExperimentConfig(run_model, v.policy, T, runs, seed, res.environment, res.draw,
                                   v.prior, workers=worker_count(workers), keep_traces=write_traces)
            agg = monte_carlo(exp)
            tag = f"{v.name}_g{gi + 1:03d}" if multi else v.name
            write_aggregate_csv(out_dir / f"aggregate_{tag}.csv", agg, canon)
            if write_traces:
                write_trace_csv(out_dir / f"traces_{tag}.csv", agg.traces, agg.seeds, canon)
            per_agent = agg.mean_cumulative_regret[:, -1]
            gsum = {"graph": gi + 1, "kappa": model.kappa,
                    "epsilon_n": model.epsilon_n,
                    "epsilon_c": [float(e) for e in model.epsilon_c],
                    "edges": [list(e) for e in model.graph.edges()],
                    "group_regret_T": float(agg.group_regret[-1]),
                    "agent_regret_T": [float(x) for x in per_agent],
                    "group_regret_se": float(agg.final_regret.sum(axis=1).std(ddof=1) / math.sqrt(runs))
                    if runs > 1 else None}
            if multi and np.ptp(model.epsilon_c) > 0:
                gsum["spearman"] = float(spearmanr(model.epsilon_c, per_agent).statistic)
            if res.environment is not None:
                gsum["bounds"] = _bounds_for(res.environment, model, v, T)
                gsum["mean_suboptimal_pulls"] = float(agg.suboptimal_pulls.mean())
            vsum["graphs"].append(gsum)
        if multi:
            rhos = [g["spearman"] for g in vsum["graphs"] if "spearman" in g]
            vsum["mean_spearman"] = float(np.mean(rhos)) if rhos else None
        summary["variants"][v.name] = vsum
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _report(summary: dict) -> None:
    T = summary["config"]["horizon"]
    for name, v in summary["variants"].items():
        for g in v["graphs"]:
            label = f"{name} (graph {g['graph']})" if len(v["graphs"]) > 1 else name
            print(f"{label}: group regret at T={T}: {g['group_regret_T']:.2f}")
            for b in g.get("bounds", []):
                extra = ""
                if "theorem1" in b:
                    t1, t2 = (("inf" if x is None else f"{x:.2f}") for x in (b["theorem1"], b["theorem2"]))
                    extra = f"  theorem-1 bound {t1}  theorem-2 bound {t2}"
                print(f"    arm {b['arm']} (gap {b['gap']:.3g}):{extra}")
        if v.get("mean_spearman") is not None:
            print(f"{name}: mean Spearman(eps_c, regret) = {v['mean_spearman']:.3f}")


def cmd_simulate(args) -> int:
    if not args.config:
        raise ValidationError("simulate needs --config PATH")
    cfg = apply_overrides(load_config(args.config), args)
    summary = run_simulation(cfg, Path(args.out), args.workers)
    _report(summary)
    return EXIT_OK


def cmd_replicate(args) -> int:
    if args.preset not in PRESETS:
        raise ValidationError(f"unknown preset {args.preset!r}; choose from {list(PRESETS)}")
    cfg = apply_overrides(PRESETS[args.preset], args)
    summary = run_simulation(cfg, Path(args.out), args.workers)
    _report(summary)
    return EXIT_OK


def cmd_bounds(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = copy.deepcopy(PRESETS[args.preset])
    else:
        raise ValidationError("bounds needs --config PATH")
    cfg = apply_overrides(cfg, argparse.Namespace(kappa=args.kappa, gamma=args.gamma))
    if "means" not in cfg.get("environment", {}):
        raise ValidationError("bounds needs explicit environment means")
    res = resolve(cfg)
    env, model = res.environment, res.models[0]
    v = res.variants[0]
    if args.horizon is not None:
        horizons = [args.horizon]
    else:
        horizons = cfg.get("bounds", {}).get("horizons", [10, 100, 1000, 10 ** 4, 10 ** 5, 10 ** 6])
    if any(T <= 1 for T in horizons):
        raise ValidationError("bounds need T > 1 (ln T must be positive)")
    rows = bound_table(env, model, v.policy.gamma, v.policy.schedule, horizons)

    def fmt(x):
        return "n/a" if x is None else f"{x:.4f}"

    print(f"{'T':>10} {'arm':>4} {'lower':>14} {'theorem1':>14} {'theorem2':>14}")
    for r in rows:
        print(f"{r['T']:>10} {r['arm']:>4} {fmt(r['lower']):>14} {fmt(r['theorem1']):>14} "
              f"{fmt(r['theorem2']):>14}")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "bounds.json").write_text(
            json.dumps({"config": canonical_config(cfg),
                        "rows": [{k: (_finite(x) if isinstance(x, float) else x) for k, x in r.items()}
                                 for r in rows]}, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--runs", type=int, metavar="N")
    common.add_argument("--horizon", type=int, metavar="T")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--gamma", type=float, metavar="REAL")
    common.add_argument("--kappa", metavar="REAL", help="number or rule name, e.g. 'd/(d+1)'")
    common.add_argument("--policy", choices=["coop-ucb", "coop-ucb2", "coop-ucl"], metavar="NAME")
    common.add_argument("--workers", type=int, help="worker processes (capped by COOP_BANDITS_THREADS)")

    p = argparse.ArgumentParser(prog="coop-bandits", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    gm = sub.add_parser("graph-metrics", parents=[common], help="spectral measures of a graph")
    gm.add_argument("--graph", choices=list(NAMED_GRAPHS))
    gm.add_argument("--edges", metavar="FILE", help="edge-list text file")
    gm.add_argument("--er", nargs=2, metavar=("M", "RHO"), help="sample a connected G(M, rho)")
    gm.add_argument("--convention", choices=G.CONVENTIONS, default=G.DEFAULT_CONVENTION)
    gm.add_argument("--schedule", choices=list(SCHEDULES), default="sqrt-log")
    gm.set_defaults(func=cmd_graph_metrics)

    sim = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo experiment")
    sim.set_defaults(func=cmd_simulate, out="out")

    b = sub.add_parser("bounds", parents=[common], help="lower bound and theorem bounds per arm")
    b.add_argument("--preset", choices=list(PRESETS))
    b.set_defaults(func=cmd_bounds)

    rep = sub.add_parser("replicate", parents=[common], help="run a built-in experiment preset")
    rep.add_argument("preset", choices=list(PRESETS))
    rep.set_defaults(func=cmd_replicate, out="out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "out", None) is None and args.command in ("simulate", "replicate"):
        args.out = "out"
    try:
        return args.func(args)
    except G.SpectrumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPECTRUM
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

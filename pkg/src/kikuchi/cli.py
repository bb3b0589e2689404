"""Command-line harness: weight sweeps, concavity queries, exact oracles.

The sweep runs the pairwise solver over a grid of uniform edge weights
with several random initializations per grid point and writes one CSV row
per (weight, init) cell, plus a sidecar JSON with the tree/cycle
thresholds and the exact log partition value when the model is small
enough to enumerate.  Output uses 17-significant-digit formatting and a
fixed cell order, so identical configurations produce identical bytes.

``KIKUCHI_THREADS`` caps how many solver processes run at once.  A JSON
config file can supply any flag (underscored names); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import models, polytope, region_graph
from .concavity import check_bethe_concavity, check_kikuchi_concavity
from .errors import KikuchiError, NotTwoLayer, TooLarge, TooManyVertices
from .message_passing import SolverOptions, run_pairwise_rsp
from .objective import exact_entropy, exact_log_partition, exact_marginals
from .region_graph import from_ising, two_layer_view

_SOLVER_DEFAULTS = {
    "damping": 0.5,
    "tol": 1e-10,
    "max_iters": 2500,
    "schedule": "parallel",
}
_SWEEP_DEFAULTS = {
    "kind": "mixed",
    "seed": 0,
    "rho_min": 0.0,
    "rho_max": 2.0,
    "rho_steps": 81,
    "inits": 8,
    "init_seed": 0,
    **_SOLVER_DEFAULTS,
}


def _g17(x: float) -> str:
    return f"{float(x):.17g}"


def _threads() -> int:
    raw = os.environ.get("KIKUCHI_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _merged(args: argparse.Namespace, defaults: dict) -> dict:
    """Resolve each option as: explicit flag, else config file, else default."""
    config = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            config = json.load(fh)
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else config.get(key, default)
    return out


def _load_graph_spec(spec: str, kind: str, seed: int) -> models.IsingModel:
    """'kN' / 'tN' sample a fresh model; 'file:PATH' loads one."""
    if spec.startswith("file:"):
        return models.load_ising(spec[5:])
    family = spec[0].lower()
    try:
        n = int(spec[1:])
    except ValueError:
        raise KikuchiError(f"bad graph spec {spec!r}") from None
    if family == "k":
        graph = models.complete_graph(n)
    elif family == "t":
        graph = models.torus_grid(n)
    else:
        raise KikuchiError(f"unknown graph family {spec!r}")
    return models.sample_ising(graph, kind, seed=seed)


def _sweep_cell(payload) -> tuple[float, float, int, bool]:
    model_dict, rho, init_seed, opts_dict = payload
    model = models.from_json_dict(model_dict)
    if rho <= 0.0:
        return (math.nan, math.nan, 0, False)
    opts = SolverOptions(init="random", seed=init_seed, **opts_dict)
    result = run_pairwise_rsp(model, np.full(len(model.graph.edges), rho), opts)
    return (result.objective.total, result.delta_final, result.iterations, result.converged)


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _merged(args, _SWEEP_DEFAULTS)
    model = _load_graph_spec(args.graph, cfg["kind"], cfg["seed"])
    if cfg["rho_steps"] < 1 or cfg["inits"] < 1 or cfg["rho_min"] > cfg["rho_max"]:
        raise KikuchiError("need rho_min <= rho_max, rho_steps >= 1, inits >= 1")
    if cfg["rho_steps"] == 1:
        grid = [float(cfg["rho_min"])]
    else:
        grid = list(np.linspace(cfg["rho_min"], cfg["rho_max"], cfg["rho_steps"]))

    graph = from_ising(model)
    theta = models.ising_log_potentials(model)
    try:
        exact = exact_log_partition(graph, theta)
    except TooLarge:
        exact = None

    opts_dict = {k: cfg[k] for k in _SOLVER_DEFAULTS}
    model_dict = models.to_json_dict(model)
    cells = [
        (model_dict, rho, int(cfg["init_seed"]) + i, opts_dict)
        for rho in grid
        for i in range(int(cfg["inits"]))
    ]
    threads = _threads()
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_cell, cells, chunksize=4))
    else:
        results = [_sweep_cell(c) for c in cells]

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["rho", "init_seed", "objective", "delta_final",
             "iterations", "converged", "exact_logZ"]
        )
        for cell, (obj, delta, iters, conv) in zip(cells, results):
            _, rho, init_seed, _ = cell
            writer.writerow([
                _g17(rho), init_seed, _g17(obj), _g17(delta), iters,
                "true" if conv else "false",
                _g17(exact) if exact is not None else "",
            ])

    if args.graph.startswith("k"):
        thresholds = polytope.uniform_weight_thresholds("complete", model.graph.num_vertices)
    elif args.graph.startswith("t"):
        thresholds = polytope.uniform_weight_thresholds("torus", model.graph.num_vertices)
    else:
        try:
            thresholds = polytope.uniform_thresholds_exhaustive(model.graph)
        except TooManyVertices:
            thresholds = None
    meta = {
        "rho_tree": thresholds.rho_tree if thresholds else None,
        "rho_cycle": thresholds.rho_cycle if thresholds else None,
        "exact_logZ": exact,
    }
    with open(args.out + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(cells)} rows to {args.out}")
    return 0


def _load_rho_file(path: str):
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, list):
        return "region", np.asarray(data, dtype=float)
    if "factor_weights" in data:
        return "factor", np.asarray(data["factor_weights"], dtype=float)
    if "region_weights" in data:
        return "region", np.asarray(data["region_weights"], dtype=float)
    raise KikuchiError("weight file needs a list, 'factor_weights', or 'region_weights'")


def cmd_check(args: argparse.Namespace) -> int:
    with open(args.model) as fh:
        graph = region_graph.from_json_dict(json.load(fh))
    kind, rho = _load_rho_file(args.rho)
    if kind == "factor":
        view = two_layer_view(graph)
        report = polytope.in_concavity_polytope(view, rho)
        if report.member:
            print("in the concavity polytope")
        else:
            print(f"outside the concavity polytope; violating U = {report.violating_U}")
        return 0
    try:
        view = two_layer_view(graph)
        report = check_bethe_concavity(view, rho)
        label = "two-layer"
    except NotTwoLayer:
        report = check_kikuchi_concavity(graph, rho)
        label = "general"
    verdict = "satisfied" if report.satisfied else "violated"
    print(f"{label} concavity condition {verdict}; min value {_g17(report.min_value)}")
    if report.violating_set is not None:
        print(f"violating set: {report.violating_set}")
    return 0


def cmd_polytope(args: argparse.Namespace) -> int:
    if args.action == "thresholds":
        if args.graph.startswith("k"):
            t = polytope.uniform_weight_thresholds("complete", int(args.graph[1:]))
        elif args.graph.startswith("t"):
            t = polytope.uniform_weight_thresholds("torus", int(args.graph[1:]))
        else:
            model = _load_graph_spec(args.graph, "mixed", 0)
            t = polytope.uniform_thresholds_exhaustive(model.graph)
        print(f"rho_tree {_g17(t.rho_tree)}")
        print(f"rho_cycle {_g17(t.rho_cycle)}")
        return 0

    with open(args.model) as fh:
        view = two_layer_view(region_graph.from_json_dict(json.load(fh)))
    if args.action == "check":
        _, rho = _load_rho_file(args.rho)
        report = polytope.in_concavity_polytope(view, rho)
        print("member" if report.member else f"not member; violating U = {report.violating_U}")
        return 0
    if args.action == "sample":
        samples = polytope.sample_conv_F(view, args.count, args.seed)
        for s in samples:
            assert polytope.in_concavity_polytope(view, s).member
        payload = [[float(x) for x in s] for s in samples]
        if args.out:
            with open(args.out, "w") as fh:
                json.dump(payload, fh, indent=1)
            print(f"wrote {len(samples)} samples to {args.out}")
        else:
            print(json.dumps(payload))
        return 0
    raise KikuchiError(f"unknown polytope action {args.action!r}")


def cmd_oracle(args: argparse.Namespace) -> int:
    model = models.load_ising(args.model)
    graph = from_ising(model)
    theta = models.ising_log_potentials(model)
    log_z = exact_log_partition(graph, theta)
    ent = exact_entropy(graph, theta)
    print(f"log_Z {_g17(log_z)}")
    print(f"entropy {_g17(ent)}")
    if args.out:
        marginals = exact_marginals(graph, theta)
        payload = {
            "log_z": log_z,
            "entropy": ent,
            "marginals": [
                {"scope": list(t.scope), "values": [float(v) for v in t.flat()]}
                for t in marginals
            ],
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=1)
        print(f"wrote marginals to {args.out}")
    return 0


def cmd_plotdata(args: argparse.Namespace) -> int:
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise KikuchiError(f"no data rows in {args.csv}")
    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(row["rho"], []).append(row)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([
            "rho", "objective_min", "objective_max", "objective_median",
            "converged_frac", "log10_delta_median", "log10_delta_max",
        ])
        for rho_str, rows_here in groups.items():
            objectives = [float(r["objective"]) for r in rows_here
                          if not math.isnan(float(r["objective"]))]
            deltas = [float(r["delta_final"]) for r in rows_here
                      if float(r["delta_final"]) > 0]
            logs = [math.log10(d) for d in deltas]
            conv = sum(r["converged"] == "true" for r in rows_here) / len(rows_here)
            writer.writerow([
                rho_str,
                _g17(min(objectives)) if objectives else "",
                _g17(max(objectives)) if objectives else "",
                _g17(statistics.median(objectives)) if objectives else "",
                _g17(conv),
                _g17(statistics.median(logs)) if logs else "",
                _g17(max(logs)) if logs else "",
            ])
    print(f"wrote {len(groups)} aggregate rows to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kikuchi",
        description="Reweighted region-graph approximations of log partition functions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="edge-weight sweep with random restarts")
    sweep.add_argument("--graph", required=True, help="k<N>, t<N>, or file:PATH")
    sweep.add_argument("--kind", choices=["attractive", "mixed"])
    sweep.add_argument("--seed", type=int)
    sweep.add_argument("--rho-min", dest="rho_min", type=float)
    sweep.add_argument("--rho-max", dest="rho_max", type=float)
    sweep.add_argument("--rho-steps", dest="rho_steps", type=int)
    sweep.add_argument("--inits", type=int)
    sweep.add_argument("--init-seed", dest="init_seed", type=int)
    sweep.add_argument("--damping", type=float)
    sweep.add_argument("--tol", type=float)
    sweep.add_argument("--max-iters", dest="max_iters", type=int)
    sweep.add_argument("--schedule", choices=["parallel", "sequential"])
    sweep.add_argument("--config", help="JSON file mirroring the flags")
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(func=cmd_sweep)

    check = sub.add_parser("check-concavity", help="concavity report for a weight file")
    check.add_argument("--model", required=True, help="region graph JSON")
    check.add_argument("--rho", required=True, help="weights JSON")
    check.set_defaults(func=cmd_check)

    poly = sub.add_parser("polytope", help="polytope membership, samples, thresholds")
    poly.add_argument("action", choices=["check", "sample", "thresholds"])
    poly.add_argument("--model", help="region graph JSON (check/sample)")
    poly.add_argument("--rho", help="factor weights JSON (check)")
    poly.add_argument("--graph", help="k<N>, t<N>, or file:PATH (thresholds)")
    poly.add_argument("--count", type=int, default=10)
    poly.add_argument("--seed", type=int, default=0)
    poly.add_argument("--out")
    poly.set_defaults(func=cmd_polytope)

    oracle = sub.add_parser("oracle", help="exact log partition, entropy, marginals")
    oracle.add_argument("--model", required=True, help="pairwise model JSON")
    oracle.add_argument("--out", help="marginals output JSON")
    oracle.set_defaults(func=cmd_oracle)

    plot = sub.add_parser("plot-data", help="aggregate a sweep CSV per grid point")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", required=True)
    plot.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KikuchiError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: graph tooling, perturbation, evaluation,
attacks, range optimization, and canned experiment runners.

Exit codes: 0 success, 1 internal error, 2 usage or input error. Every
run is deterministic given its flags and seed; whenever an output file is
written a sidecar `<output>.meta` records the full parameterization.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import (
    PriorDistribution,
    map_strategy,
    optimal_attack,
    posterior_strategy,
    strategy_to_csv,
)
from .graph import GraphError, RoadGraph, all_pairs, load_graph, nearest_vertex
from .mechanism import MechanismError, gem_matrix, gem_sample, matrix_to_csv
from .metrics import EvaluationReport, evaluate_mechanism
from .optimize import (
    OptimizationConfig,
    OptimizeError,
    greedy_optimize,
    init_range_by_qloss,
    qloss_objective,
    range_from_text,
    range_to_text,
    trace_to_csv,
)
from .scenarios import (
    four_hotspot_lattice,
    run_cross_map_study,
    run_epsilon_sweep,
    run_hotspot_optimization,
    run_line_sweep,
    run_tp_sweep,
)

SCENARIOS = ("line-sweep", "tp-sweep", "cross-map", "epsilon-sweep", "hotspot-opt")


class InputError(Exception):
    """Bad file contents or inconsistent options (exit code 2)."""


class _Timer:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self._last = time.perf_counter()

    def phase(self, name: str):
        now = time.perf_counter()
        if self.enabled:
            print(f"timing phase={name} seconds={now - self._last:.3f}", file=sys.stderr)
        self._last = now


def _read_text(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise InputError(f"no such file: {path}")
    return p.read_text(encoding="utf-8")


def _load_graph_file(path: str) -> RoadGraph:
    try:
        return load_graph(_read_text(path))
    except GraphError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_prior_file(path: str, n: int) -> PriorDistribution:
    """CSV with a `vertex_id,probability` header; missing vertices get 0."""
    text = _read_text(path)
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "vertex_id,probability":
        raise InputError(f"{path}: expected header 'vertex_id,probability'")
    probs = np.zeros(n)
    seen = set()
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 2:
            raise InputError(f"{path}: line {i}: expected 'vertex_id,probability'")
        try:
            v, p = int(parts[0]), float(parts[1])
        except ValueError as exc:
            raise InputError(f"{path}: line {i}: {exc}") from None
        if v in seen:
            raise InputError(f"{path}: line {i}: duplicate vertex id {v}")
        if not 0 <= v < n:
            raise InputError(f"{path}: line {i}: vertex id {v} not in the graph (|V|={n})")
        if p < 0:
            raise InputError(f"{path}: line {i}: negative probability")
        seen.add(v)
        probs[v] = p
    total = probs.sum()
    if abs(total - 1.0) > 1e-6:
        raise InputError(f"{path}: probabilities sum to {total!r}, expected 1 within 1e-6")
    return PriorDistribution(probs / total)


def _load_range_file(path: str, n: int) -> np.ndarray:
    try:
        ids = range_from_text(_read_text(path))
    except OptimizeError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if ids[0] < 0 or ids[-1] >= n:
        raise InputError(f"{path}: range ids outside the graph (|V|={n})")
    return ids


def _write_output(text: str, path: str | None, args, extra_meta: dict | None = None):
    """Write to the path (plus a .meta sidecar) or print to stdout."""
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")
    meta = {
        "command": " ".join(args._argv),
        "subcommand": args.command,
        "seed": getattr(args, "seed", None),
        "package": f"roadprivacy {__version__}",
        "numpy": np.__version__,
    }
    if extra_meta:
        meta.update(extra_meta)
    lines = [f"{k}={v}" for k, v in meta.items() if v is not None]
    Path(str(path) + ".meta").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad numeric list {text!r}: {exc}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"bad integer list {text!r}: {exc}") from None


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_perturb(args) -> int:
    timer = _Timer(args.timing)
    g = _load_graph_file(args.graph)
    timer.phase("load")
    d = all_pairs(g)
    timer.phase("distances")
    if args.vertex is not None:
        v = args.vertex
        if not 0 <= v < g.n_vertices:
            raise InputError(f"vertex {v} not in the graph (|V|={g.n_vertices})")
    else:
        x, y = args.at
        v = nearest_vertex(g, (x, y))
    w = (
        np.arange(g.n_vertices)
        if args.range is None
        else _load_range_file(args.range, g.n_vertices)
    )
    m = gem_matrix(d, w, args.eps)
    timer.phase("build")
    out = gem_sample(m, v, args.seed)
    timer.phase("sample")
    text = f"{out}\n"
    _write_output(text, args.output, args)
    if args.output is not None:
        print(out)
    return 0


def _cmd_evaluate(args) -> int:
    timer = _Timer(args.timing)
    g = _load_graph_file(args.graph)
    d = all_pairs(g)
    prior = (
        PriorDistribution.uniform(g.n_vertices)
        if args.prior is None
        else _load_prior_file(args.prior, g.n_vertices)
    )
    timer.phase("load")
    w = (
        np.arange(g.n_vertices)
        if args.range is None
        else _load_range_file(args.range, g.n_vertices)
    )
    m = gem_matrix(d, w, args.eps)
    report = evaluate_mechanism(prior, m, d, metric=args.metric, attack=args.attack)
    timer.phase("compute")
    if report.q_loss == 0.0:
        print("warning: quality loss is zero, tradeoff reported as NA", file=sys.stderr)
    text = EvaluationReport.CSV_HEADER + "\n" + report.to_csv_row() + "\n"
    _write_output(text, args.output, args)
    return 0


def _cmd_attack(args) -> int:
    timer = _Timer(args.timing)
    g = _load_graph_file(args.graph)
    d = all_pairs(g)
    prior = (
        PriorDistribution.uniform(g.n_vertices)
        if args.prior is None
        else _load_prior_file(args.prior, g.n_vertices)
    )
    w = (
        np.arange(g.n_vertices)
        if args.range is None
        else _load_range_file(args.range, g.n_vertices)
    )
    m = gem_matrix(d, w, args.eps)
    timer.phase("build")
    if args.attack == "optimal":
        h = optimal_attack(prior, m, d, args.metric)
    elif args.attack == "posterior":
        h = posterior_strategy(prior, m)
    else:
        h = map_strategy(prior, m)
    timer.phase("compute")
    _write_output(strategy_to_csv(h, m.output_range), args.output, args)
    return 0


def _cmd_export_matrix(args) -> int:
    g = _load_graph_file(args.graph)
    d = all_pairs(g)
    w = (
        np.arange(g.n_vertices)
        if args.range is None
        else _load_range_file(args.range, g.n_vertices)
    )
    m = gem_matrix(d, w, args.eps)
    _write_output(matrix_to_csv(m), args.output, args)
    return 0


def _cmd_optimize(args) -> int:
    timer = _Timer(args.timing)
    g = _load_graph_file(args.graph)
    d = all_pairs(g)
    prior = (
        PriorDistribution.uniform(g.n_vertices)
        if args.prior is None
        else _load_prior_file(args.prior, g.n_vertices)
    )
    timer.phase("load")

    if args.w0 is not None:
        w0 = _load_range_file(args.w0, g.n_vertices)
    elif args.init == "qloss":
        w0 = init_range_by_qloss(d, prior, args.eps, topk=args.topk)
    else:
        w0 = np.arange(g.n_vertices)
    timer.phase("init")

    theta = args.theta
    if theta is None and not args.no_theta:
        theta = qloss_objective(d, prior, args.eps)(w0)
    topk = args.topk if args.topk is None else min(args.topk, int(len(w0)))
    try:
        cfg = OptimizationConfig(
            eps=args.eps,
            objective=args.objective,
            theta=theta,
            attack=args.attack,
            topk=topk,
            max_sweeps=args.max_sweeps,
        )
        result = greedy_optimize(d, prior, cfg, w0)
    except OptimizeError as exc:
        raise InputError(str(exc)) from exc
    timer.phase("optimize")

    extra = {
        "objective": args.objective,
        "theta": theta,
        "sweeps": result.sweeps,
        "initial_size": int(result.initial_range.size),
        "final_size": int(result.final_range.size),
    }
    _write_output(range_to_text(result.final_range), args.output, args, extra)
    if args.trace is not None:
        _write_output(trace_to_csv(result), args.trace, args, extra)
    before, after = result.initial_report, result.final_report
    print(
        f"range {result.initial_range.size} -> {result.final_range.size} vertices; "
        f"q_loss {before.q_loss:.3f} -> {after.q_loss:.3f} m; "
        f"pc {before.pc:.4f} -> {after.pc:.4f} ({args.attack} attack); "
        f"sweeps {result.sweeps}"
    )
    return 0


def _cmd_scenario(args) -> int:
    timer = _Timer(args.timing)
    name = args.name
    extra: dict = {}
    if name == "line-sweep":
        table = run_line_sweep(
            _int_list(args.counts), args.length, args.eps, grid_step=args.grid_step
        )
    elif name == "tp-sweep":
        table = run_tp_sweep(
            args.euclid, _float_list(args.shortest_list), args.eps, grid_step=args.grid_step
        )
    elif name == "cross-map":
        table = run_cross_map_study(_float_list(args.eps_list))
    elif name == "epsilon-sweep":
        if args.graph is not None:
            g = _load_graph_file(args.graph)
            prior = (
                PriorDistribution.uniform(g.n_vertices)
                if args.prior is None
                else _load_prior_file(args.prior, g.n_vertices)
            )
        else:
            g, prior = four_hotspot_lattice(side=args.side, spacing=args.spacing)
        table = run_epsilon_sweep(
            g, prior, _float_list(args.eps_list), optimize=args.optimize, topk=args.topk
        )
    elif name == "hotspot-opt":
        table, result = run_hotspot_optimization(
            side=args.side, spacing=args.spacing, eps=args.eps
        )
        extra = {"sweeps": result.sweeps, "final_size": int(result.final_range.size)}
    else:
        raise InputError(f"unknown scenario {name!r}; valid names: {', '.join(SCENARIOS)}")
    timer.phase("compute")
    _write_output(table.to_csv(), args.output, args, extra)
    return 0


# ---------------------------------------------------------------------------
# Parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadprivacy",
        description="Location privacy on road networks: mechanisms, attacks, metrics, and range optimization.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_prior=True):
        p.add_argument("--graph", required=True, help="ggraph v1 file")
        if needs_prior:
            p.add_argument("--prior", help="prior CSV (vertex_id,probability); default uniform")
        p.add_argument("--eps", type=float, required=True, help="privacy parameter, 1/meters")
        p.add_argument("--range", help="ggrange v1 file restricting the output range")
        p.add_argument("--output", help="write result here (plus .meta sidecar); default stdout")
        p.add_argument("--seed", type=int, default=0, help="pseudorandom seed (default 0)")
        p.add_argument("--threads", type=int, help="cap numeric worker threads")
        p.add_argument("--timing", action="store_true", help="report per-phase wall time on stderr")

    p = sub.add_parser("perturb", help="sample one pseudolocation")
    common(p, needs_prior=False)
    where = p.add_mutually_exclusive_group(required=True)
    where.add_argument("--vertex", type=int, help="true location as a vertex id")
    where.add_argument(
        "--at",
        type=lambda s: tuple(float(x) for x in s.split(",")),
        metavar="X,Y",
        help="true location as coordinates, snapped to the nearest vertex",
    )
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("evaluate", help="quality loss, adversarial error, tradeoff, hit rate")
    common(p)
    p.add_argument("--metric", choices=("shortest", "euclidean"), default="shortest")
    p.add_argument("--attack", choices=("optimal", "posterior"), default="optimal")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("attack", help="export an adversary strategy as CSV")
    common(p)
    p.add_argument("--attack", choices=("optimal", "posterior", "map"), default="optimal")
    p.add_argument("--metric", choices=("shortest", "euclidean"), default="shortest")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("export-matrix", help="export the mechanism matrix as CSV")
    common(p, needs_prior=False)
    p.set_defaults(func=_cmd_export_matrix)

    p = sub.add_parser("optimize", help="greedy output-range search")
    common(p)
    p.add_argument("--objective", choices=("maximize-pc", "minimize-qloss"), default="maximize-pc")
    p.add_argument("--attack", choices=("optimal", "posterior"), default="posterior")
    p.add_argument("--theta", type=float, help="quality-loss budget in meters")
    p.add_argument(
        "--no-theta", action="store_true", help="drop the default budget (initial range's loss)"
    )
    p.add_argument("--topk", type=int, help="truncate rows to the k nearest outputs")
    p.add_argument("--init", choices=("qloss", "full"), default="qloss")
    p.add_argument("--w0", help="ggrange v1 file to start from (overrides --init)")
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--trace", help="write the removal trace CSV here")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("scenario", help="run a canned experiment")
    p.add_argument("name", help=f"one of: {', '.join(SCENARIOS)}")
    p.add_argument("--output", help="write the CSV here (plus .meta sidecar); default stdout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--timing", action="store_true")
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--eps-list", default="0.005,0.01,0.02")
    p.add_argument("--counts", default="11,26,51,101", help="line-sweep node counts")
    p.add_argument("--length", type=float, default=1000.0, help="line-sweep total length, m")
    p.add_argument("--grid-step", type=float, default=12.5, help="planar-Laplace grid step, m")
    p.add_argument("--euclid", type=float, default=100.0, help="tp-sweep straight-line distance")
    p.add_argument("--shortest-list", default="100,500,1000,2000", help="tp-sweep road lengths")
    p.add_argument("--graph", help="epsilon-sweep graph file (default: hotspot lattice)")
    p.add_argument("--prior", help="epsilon-sweep prior CSV")
    p.add_argument("--side", type=int, default=16, help="hotspot lattice side length in vertices")
    p.add_argument("--spacing", type=float, default=100.0, help="hotspot lattice spacing, m")
    p.add_argument("--optimize", action="store_true", help="epsilon-sweep: also optimize the range")
    p.add_argument("--topk", type=int)
    p.set_defaults(func=_cmd_scenario)

    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    args._argv = ["roadprivacy"] + argv
    try:
        threads = getattr(args, "threads", None)
        if threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=threads):
                return args.func(args)
        return args.func(args)
    except (InputError, GraphError, MechanismError, OptimizeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Greedy output-range search with a utility-loss budget.

Shrinking the output range of a distance-decay mechanism can improve the
privacy/utility tradeoff: outputs nobody benefits from only leak. The
optimizer repeatedly sweeps the current range in ascending vertex order,
tentatively removes each vertex, and keeps the removal whenever the
objective strictly improves while the quality-loss budget still holds,
stopping at a fixed point.

Objectives:
* minimize-qloss: expected true-to-reported distance. Candidate removals
  are scored with an O(|V|) incremental update of each row's weight sum
  and weighted-distance sum rather than a full matrix rebuild.
* maximize-pc: adversarial error over quality loss. Scored exactly by
  rebuilding the restricted mechanism per candidate, or approximately by
  truncating each row to its k nearest range members (topk).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .attacks import PriorDistribution
from .graph import DistanceMatrix
from .mechanism import gem_matrix, gem_rows
from .metrics import EvaluationReport, evaluate_mechanism

OBJECTIVES = ("maximize-pc", "minimize-qloss")
CONSTRAINT_TOL = 1e-9
_TINY = 1e-280


class OptimizeError(ValueError):
    """Invalid optimizer configuration or infeasible starting range."""


@dataclass(frozen=True)
class OptimizationConfig:
    """Settings for one greedy range search.

    theta caps the quality loss in meters (None disables the constraint);
    topk switches candidate scoring to the k-nearest-output approximation,
    which only supports the posterior attack model.
    """

    eps: float
    objective: str = "maximize-pc"
    theta: float | None = None
    attack: str = "posterior"
    topk: int | None = None
    max_sweeps: int = 100

    def __post_init__(self):
        if not self.eps > 0:
            raise OptimizeError("eps must be positive")
        if self.objective not in OBJECTIVES:
            raise OptimizeError(f"objective must be one of {OBJECTIVES}")
        if self.attack not in ("optimal", "posterior"):
            raise OptimizeError("attack must be 'optimal' or 'posterior'")
        if self.theta is not None and not self.theta > 0:
            raise OptimizeError("theta must be positive when set")
        if self.topk is not None:
            if self.topk < 1:
                raise OptimizeError("topk must be at least 1 when set")
            if self.objective == "maximize-pc" and self.attack != "posterior":
                raise OptimizeError("topk scoring supports only the posterior attack")
        if self.max_sweeps < 1:
            raise OptimizeError("max_sweeps must be at least 1")


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of one greedy search.

    trace lists accepted removals as (vertex, objective_before,
    objective_after) in the objective's natural units; sweeps counts outer
    passes including the final unchanged one. Reports are exact evaluations
    of the restricted mechanism before and after.
    """

    initial_range: np.ndarray
    final_range: np.ndarray
    trace: tuple[tuple[int, float, float], ...]
    sweeps: int
    initial_report: EvaluationReport
    final_report: EvaluationReport
    objective: str
    hit_sweep_cap: bool = field(default=False)


# ---------------------------------------------------------------------------
# Exact objective handles (used by tests and exhaustive oracles)


def qloss_objective(dist: DistanceMatrix, prior: PriorDistribution, eps: float):
    """Callable scoring a candidate range by exact quality loss."""

    def score(range_ids) -> float:
        w = np.asarray(range_ids, dtype=int)
        dw = dist.shortest[:, w]
        probs = gem_rows(dw, eps)
        return float(np.sum(prior.probs[:, None] * probs * dw))

    return score


def pc_objective(
    dist: DistanceMatrix,
    prior: PriorDistribution,
    eps: float,
    attack: str = "posterior",
):
    """Callable scoring a candidate range by exact performance criterion.

    Returns nan for ranges with zero quality loss; greedy treats nan as
    "reject candidate".
    """

    def score(range_ids) -> float:
        w = np.asarray(range_ids, dtype=int)
        ql, ae = _exact_qloss_ae(dist, prior, eps, w, attack)
        return ae / ql if ql > 0.0 else float("nan")

    return score


def _exact_qloss_ae(dist, prior, eps, w, attack):
    ds = dist.shortest
    dw = ds[:, w]
    probs = gem_rows(dw, eps)
    joint = prior.probs[:, None] * probs  # (V, |w|)
    ql = float(np.sum(joint * dw))
    cost = ds @ joint  # cost[v_hat, j]
    if attack == "optimal":
        ae = float(cost.min(axis=0).sum())
    else:
        marg = joint.sum(axis=0)
        num = (joint * cost).sum(axis=0)
        ok = marg > 0.0
        ae = float((num[ok] / marg[ok]).sum())
    return ql, ae


# ---------------------------------------------------------------------------
# Top-k truncated functionals


def _topk_rows(dist: DistanceMatrix, range_ids: np.ndarray, eps: float, k: int):
    """Per input: its k nearest range members, with renormalized weights.

    Ties in distance resolve to the lower vertex id. Returns (ids, probs,
    dists), each (V, k): global output ids, row probabilities, distances.
    """
    ds = dist.shortest[:, range_ids]  # (V, m)
    order = np.argsort(ds, axis=1, kind="stable")[:, :k]
    dk = np.take_along_axis(ds, order, axis=1)
    ids = range_ids[order]
    probs = gem_rows(dk, eps)
    return ids, probs, dk


def approx_qloss_topk(
    dist: DistanceMatrix,
    prior: PriorDistribution,
    range_ids,
    eps: float,
    k: int,
) -> float:
    """Quality loss with every row truncated to its k nearest outputs."""
    w = np.asarray(range_ids, dtype=int)
    if not 1 <= k <= w.size:
        raise OptimizeError(f"k must be in [1, {w.size}]")
    _, probs, dk = _topk_rows(dist, w, eps, k)
    return float(np.sum(prior.probs[:, None] * probs * dk))


def approx_ae_topk(
    dist: DistanceMatrix,
    prior: PriorDistribution,
    range_ids,
    eps: float,
    k: int,
) -> float:
    """Adversarial error of the posterior attack on the truncated rows."""
    w = np.asarray(range_ids, dtype=int)
    if not 1 <= k <= w.size:
        raise OptimizeError(f"k must be in [1, {w.size}]")
    ids, probs, _ = _topk_rows(dist, w, eps, k)
    return _truncated_posterior_ae(dist.shortest, prior.probs, ids, probs, w)


def _truncated_posterior_ae(ds, prior_probs, ids, probs, range_ids) -> float:
    """Posterior-attack error of a row-sparse mechanism.

    Two execution strategies compute the same sum: group the sparse
    entries per output and evaluate each output's quadratic form on its
    support, or scatter the rows into a dense matrix and use matrix
    products. Sparse supports favor the former, small ranges the latter;
    the cheaper one is picked from the support-size profile.
    """
    n_v = prior_probs.size
    counts = np.bincount(ids.ravel(), minlength=n_v).astype(float)
    grouped_cost = float(np.sum(counts * counts))
    dense_cost = n_v * n_v * range_ids.size / 16.0  # matmul discount
    if grouped_cost <= dense_cost:
        return _grouped_posterior_ae(ds, prior_probs, ids, probs)
    # Densify: scatter each row's k entries into its range column.
    col_idx = np.searchsorted(range_ids, ids)
    dense = np.zeros((n_v, range_ids.size))
    np.put_along_axis(dense, col_idx, probs, axis=1)
    joint = prior_probs[:, None] * dense
    cost = ds @ joint
    marg = joint.sum(axis=0)
    num = (joint * cost).sum(axis=0)
    ok = marg > 0.0
    return float((num[ok] / marg[ok]).sum())


def _grouped_posterior_ae(ds, prior_probs, ids, probs) -> float:
    mass = prior_probs[:, None] * probs  # (V, k)
    rows = np.repeat(np.arange(ids.shape[0]), ids.shape[1])
    flat_out = ids.ravel()
    flat_mass = mass.ravel()
    order = np.argsort(flat_out, kind="stable")
    out_sorted = flat_out[order]
    rows_sorted = rows[order]
    mass_sorted = flat_mass[order]
    boundaries = np.flatnonzero(np.diff(out_sorted)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [out_sorted.size]])
    ae = 0.0
    for s, e in zip(starts, ends):
        vs = rows_sorted[s:e]
        b = mass_sorted[s:e]
        p_o = b.sum()
        if p_o <= 0.0:
            continue
        ae += float(b @ ds[np.ix_(vs, vs)] @ b) / p_o
    return ae


# ---------------------------------------------------------------------------
# Candidate evaluators used inside the greedy sweep


class _QlossIncremental:
    """Exact quality loss with O(|V|)-per-candidate removal scoring.

    Keeps, per input row, the weight sum and the weight*distance sum over
    the current range; removing one output is a vectorized subtraction.
    Rows whose weight sum underflows are rebuilt with a fresh shift.
    """

    minimize = True

    def __init__(self, dist, prior, eps, w0):
        self.ds = dist.shortest
        self.pi = prior.probs
        self.eps = eps
        self.members = list(int(v) for v in w0)
        self.col_of = {v: j for j, v in enumerate(self.members)}
        self.dw = self.ds[:, w0]  # (V, m0), fixed columns
        self.active = np.ones(len(self.members), dtype=bool)
        self.shift = self.dw.min(axis=1)
        self.wgt = np.exp(-0.5 * eps * (self.dw - self.shift[:, None]))
        self.z = self.wgt.sum(axis=1)
        self.nsum = (self.wgt * self.dw).sum(axis=1)

    def _refresh(self):
        act_idx = np.flatnonzero(self.active)
        self.z = self.wgt[:, act_idx].sum(axis=1)
        self.nsum = (self.wgt[:, act_idx] * self.dw[:, act_idx]).sum(axis=1)
        bad = np.flatnonzero(self.z < _TINY)
        if bad.size:
            dsub = self.dw[np.ix_(bad, act_idx)]
            self.shift[bad] = dsub.min(axis=1)
            wsub = np.exp(-0.5 * self.eps * (dsub - self.shift[bad, None]))
            self.wgt[np.ix_(bad, act_idx)] = wsub
            self.z[bad] = wsub.sum(axis=1)
            self.nsum[bad] = (wsub * dsub).sum(axis=1)

    def value(self):
        ql = float(self.pi @ (self.nsum / self.z))
        return ql, ql  # (score, qloss)

    def candidate(self, u):
        col = self.col_of[u]
        z_new = self.z - self.wgt[:, col]
        if np.any(z_new < _TINY):
            ids = [v for v in self.members if self.active[self.col_of[v]] and v != u]
            ql = qloss_objective_arrays(self.ds, self.pi, self.eps, np.array(ids))
            return ql, ql
        n_new = self.nsum - self.wgt[:, col] * self.dw[:, col]
        ql = float(self.pi @ (n_new / z_new))
        return ql, ql

    def accept(self, u):
        col = self.col_of[u]
        self.z = self.z - self.wgt[:, col]
        self.nsum = self.nsum - self.wgt[:, col] * self.dw[:, col]
        self.active[col] = False
        if np.any(self.z < _TINY):
            self._refresh()

    def on_sweep_start(self):
        self._refresh()  # shed accumulated subtraction drift

    def current_members(self):
        return [v for v in self.members if self.active[self.col_of[v]]]


def qloss_objective_arrays(ds, pi, eps, w):
    dw = ds[:, w]
    probs = gem_rows(dw, eps)
    return float(np.sum(pi[:, None] * probs * dw))


class _PCExact:
    """Exact performance criterion, rebuilt per candidate."""

    minimize = False

    def __init__(self, dist, prior, eps, w0, attack):
        self.dist = dist
        self.prior = prior
        self.eps = eps
        self.attack = attack
        self.members = sorted(int(v) for v in w0)

    def _score(self, ids):
        ql, ae = _exact_qloss_ae(self.dist, self.prior, self.eps, np.array(ids), self.attack)
        pc = ae / ql if ql > 0.0 else float("nan")
        return pc, ql

    def value(self):
        return self._score(self.members)

    def candidate(self, u):
        return self._score([v for v in self.members if v != u])

    def accept(self, u):
        self.members.remove(u)

    def on_sweep_start(self):
        pass

    def current_members(self):
        return list(self.members)


class _QlossTopk:
    """Truncated quality loss, rebuilt per candidate."""

    minimize = True

    def __init__(self, dist, prior, eps, w0, k):
        self.dist = dist
        self.prior = prior
        self.eps = eps
        self.k = k
        self.members = sorted(int(v) for v in w0)

    def _score(self, ids):
        k = min(self.k, len(ids))
        ql = approx_qloss_topk(self.dist, self.prior, np.array(ids), self.eps, k)
        return ql, ql

    def value(self):
        return self._score(self.members)

    def candidate(self, u):
        return self._score([v for v in self.members if v != u])

    def accept(self, u):
        self.members.remove(u)

    def on_sweep_start(self):
        pass

    def current_members(self):
        return list(self.members)


class _PCTopk:
    """Truncated performance criterion (posterior attack only)."""

    minimize = False

    def __init__(self, dist, prior, eps, w0, k):
        self.dist = dist
        self.prior = prior
        self.eps = eps
        self.k = k
        self.members = sorted(int(v) for v in w0)

    def _score(self, ids):
        w = np.array(ids)
        k = min(self.k, len(ids))
        out_ids, probs, dk = _topk_rows(self.dist, w, self.eps, k)
        ql = float(np.sum(self.prior.probs[:, None] * probs * dk))
        if ql <= 0.0:
            return float("nan"), ql
        ae = _truncated_posterior_ae(self.dist.shortest, self.prior.probs, out_ids, probs, w)
        return ae / ql, ql

    def value(self):
        return self._score(self.members)

    def candidate(self, u):
        return self._score([v for v in self.members if v != u])

    def accept(self, u):
        self.members.remove(u)

    def on_sweep_start(self):
        pass

    def current_members(self):
        return list(self.members)


def _make_evaluator(dist, prior, cfg, w0):
    if cfg.objective == "minimize-qloss":
        if cfg.topk is None:
            return _QlossIncremental(dist, prior, cfg.eps, w0)
        return _QlossTopk(dist, prior, cfg.eps, w0, cfg.topk)
    if cfg.topk is None:
        return _PCExact(dist, prior, cfg.eps, w0, cfg.attack)
    return _PCTopk(dist, prior, cfg.eps, w0, cfg.topk)


# ---------------------------------------------------------------------------
# The greedy search itself


def _greedy_core(dist, prior, cfg, w0):
    """Shared sweep loop; returns (final_range, trace, sweeps, hit_cap)."""
    ev = _make_evaluator(dist, prior, cfg, w0)
    obj, ql = ev.value()
    if cfg.theta is not None and ql > cfg.theta + CONSTRAINT_TOL:
        raise OptimizeError(
            f"initial range violates the q_loss constraint: {ql!r} > theta={cfg.theta!r}"
        )

    sign = 1.0 if ev.minimize else -1.0
    trace: list[tuple[int, float, float]] = []
    sweeps = 0
    hit_cap = False
    while True:
        sweeps += 1
        ev.on_sweep_start()
        changed = False
        current = set(ev.current_members())
        for u in w0:
            u = int(u)
            if u not in current or len(current) == 1:
                continue
            cand_obj, cand_ql = ev.candidate(u)
            if not np.isfinite(cand_obj):
                continue
            improves = sign * cand_obj < sign * obj
            feasible = cfg.theta is None or cand_ql <= cfg.theta + CONSTRAINT_TOL
            if improves and feasible:
                ev.accept(u)
                current.discard(u)
                trace.append((u, obj, cand_obj))
                obj, ql = cand_obj, cand_ql
                changed = True
        if not changed:
            break
        if sweeps >= cfg.max_sweeps:
            hit_cap = True
            warnings.warn(
                f"greedy range search stopped at the sweep cap ({cfg.max_sweeps}) "
                "before reaching a fixed point",
                RuntimeWarning,
                stacklevel=2,
            )
            break

    final = np.array(sorted(ev.current_members()), dtype=int)
    return final, tuple(trace), sweeps, hit_cap


def greedy_optimize(
    dist: DistanceMatrix,
    prior: PriorDistribution,
    cfg: OptimizationConfig,
    w0,
) -> OptimizationResult:
    """Prune an output range by single-vertex removals until a fixed point.

    Sweeps candidates in ascending vertex id and applies each accepted
    removal immediately, so later candidates in the same sweep see the
    shrunk range. A removal is accepted when the objective strictly
    improves and the quality loss stays within theta. Deterministic.
    """
    w0 = np.unique(np.asarray(w0, dtype=int))
    if w0.size == 0:
        raise OptimizeError("initial range is empty")
    if w0[0] < 0 or w0[-1] >= dist.n_vertices:
        raise OptimizeError("initial range contains out-of-range vertex ids")
    if prior.n_vertices != dist.n_vertices:
        raise OptimizeError("prior length and distance matrix disagree")

    final, trace, sweeps, hit_cap = _greedy_core(dist, prior, cfg, w0)
    initial_report = evaluate_mechanism(
        prior, gem_matrix(dist, w0, cfg.eps), dist, metric="shortest", attack=cfg.attack
    )
    final_report = evaluate_mechanism(
        prior, gem_matrix(dist, final, cfg.eps), dist, metric="shortest", attack=cfg.attack
    )
    return OptimizationResult(
        initial_range=w0,
        final_range=final,
        trace=trace,
        sweeps=sweeps,
        initial_report=initial_report,
        final_report=final_report,
        objective=cfg.objective,
        hit_sweep_cap=hit_cap,
    )


def init_range_by_qloss(
    dist: DistanceMatrix,
    prior: PriorDistribution,
    eps: float,
    topk: int | None = None,
) -> np.ndarray:
    """Starting range for the tradeoff search: prune all of V for quality.

    Runs the greedy search with the minimize-qloss objective, the full
    vertex set as the starting range, and no budget constraint.
    """
    cfg = OptimizationConfig(eps=eps, objective="minimize-qloss", theta=None, topk=topk)
    final, _, _, _ = _greedy_core(dist, prior, cfg, np.arange(dist.n_vertices))
    return final


# ---------------------------------------------------------------------------
# Serialization of results


def range_to_text(range_ids) -> str:
    lines = ["ggrange v1"]
    lines.extend(str(int(v)) for v in np.asarray(range_ids, dtype=int))
    return "\n".join(lines) + "\n"


def range_from_text(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != "ggrange v1":
        raise OptimizeError("expected 'ggrange v1' header")
    try:
        ids = np.array([int(ln) for ln in lines[1:]], dtype=int)
    except ValueError as exc:
        raise OptimizeError(f"bad range file: {exc}") from None
    if ids.size == 0:
        raise OptimizeError("range file lists no vertices")
    return np.unique(ids)


def trace_to_csv(result: OptimizationResult) -> str:
    lines = ["removed_vertex,objective_before,objective_after"]
    for v, before, after in result.trace:
        lines.append(f"{v},{before!r},{after!r}")
    return "\n".join(lines) + "\n"

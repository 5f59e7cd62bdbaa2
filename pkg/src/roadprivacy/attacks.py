"""Inference attacks against perturbation mechanisms.

An adversary observes the reported vertex and guesses the true one. The
guess is an InferenceStrategy: one distribution over candidate vertices per
possible observation. Implemented attacks:

* posterior_strategy: guess with the Bayes posterior itself.
* map_strategy: guess the posterior mode (maximizes the probability of
  recovering the exact vertex).
* optimal_attack: minimize the expected distance between guess and truth.
  The minimization separates per observation, so each observation's best
  deterministic guess is found exactly by a weighted-distance scan.
* brute_force_attack: exhaustive search over all deterministic strategies,
  kept as an independent correctness oracle for optimal_attack.

Throughout, the adversary is assumed to know the user's true prior.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .graph import DistanceMatrix
from .mechanism import MechanismMatrix

PROB_TOL = 1e-9


class AttackError(ValueError):
    """Invalid prior, strategy, or attack input."""


@dataclass(frozen=True)
class PriorDistribution:
    """Probability vector over the graph's vertices."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise AttackError("prior must be a non-empty vector")
        if np.any(p < 0):
            raise AttackError("prior entries must be non-negative")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise AttackError(f"prior must sum to 1, got {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n: int) -> "PriorDistribution":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, v: int) -> "PriorDistribution":
        p = np.zeros(n)
        p[v] = 1.0
        return cls(p)

    @property
    def n_vertices(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class InferenceStrategy:
    """Per-observation guess distributions: guess[j][v] for output j.

    uniform_rows flags observations that can never occur under the prior;
    their rows were filled uniformly and carry no weight in any metric.
    """

    guess: np.ndarray
    uniform_rows: tuple[int, ...] = field(default=())

    def __post_init__(self):
        h = np.asarray(self.guess, dtype=float)
        if h.ndim != 2:
            raise AttackError("guess must be a (n_outputs, n_vertices) matrix")
        if np.any(h < 0) or np.any(np.abs(h.sum(axis=1) - 1.0) > PROB_TOL):
            raise AttackError("guess rows must be probability distributions")
        h.setflags(write=False)
        object.__setattr__(self, "guess", h)
        object.__setattr__(self, "uniform_rows", tuple(int(j) for j in self.uniform_rows))


def _check_shapes(prior: PriorDistribution, m: MechanismMatrix):
    if prior.n_vertices != m.n_inputs:
        raise AttackError("prior length and mechanism inputs disagree")


def observation_probs(prior: PriorDistribution, m: MechanismMatrix) -> np.ndarray:
    """Marginal probability of each output under the prior."""
    _check_shapes(prior, m)
    return prior.probs @ m.probs


def posterior(prior: PriorDistribution, m: MechanismMatrix, j: int) -> PriorDistribution:
    """Bayes posterior over true vertices given that output j was observed."""
    _check_shapes(prior, m)
    if not 0 <= j < m.n_outputs:
        raise AttackError(f"output index {j} out of range")
    joint = prior.probs * m.probs[:, j]
    total = joint.sum()
    if total <= 0.0:
        raise AttackError(f"output {j} has zero probability under this prior")
    return PriorDistribution(joint / total)


def posterior_strategy(prior: PriorDistribution, m: MechanismMatrix) -> InferenceStrategy:
    """Strategy that reports the full Bayes posterior for each observation.

    Observations with zero marginal probability get a uniform row and are
    flagged; they contribute nothing to any expectation.
    """
    _check_shapes(prior, m)
    joint = prior.probs[:, None] * m.probs  # (V, W)
    totals = joint.sum(axis=0)
    n = prior.n_vertices
    guess = np.empty((m.n_outputs, n))
    flagged = []
    for j in range(m.n_outputs):
        if totals[j] > 0.0:
            guess[j] = joint[:, j] / totals[j]
        else:
            guess[j] = 1.0 / n
            flagged.append(j)
    return InferenceStrategy(guess=guess, uniform_rows=tuple(flagged))


def map_strategy(prior: PriorDistribution, m: MechanismMatrix) -> InferenceStrategy:
    """Guess the posterior mode; ties break to the lowest vertex id.

    This is the exact optimizer of the probability of recovering the true
    vertex (the 0/1 objective), as opposed to expected distance.
    """
    post = posterior_strategy(prior, m)
    n = prior.n_vertices
    guess = np.zeros_like(post.guess)
    for j in range(m.n_outputs):
        if j in post.uniform_rows:
            guess[j] = 1.0 / n
        else:
            guess[j, int(np.argmax(post.guess[j]))] = 1.0
    return InferenceStrategy(guess=guess, uniform_rows=post.uniform_rows)


def optimal_attack(
    prior: PriorDistribution,
    m: MechanismMatrix,
    d: DistanceMatrix,
    metric: str = "shortest",
) -> InferenceStrategy:
    """Expected-distance-minimizing inference, solved per observation.

    For each output j the optimal guess is the vertex minimizing
    sum_v prior[v] * probs[v][j] * d(guess, v); solving each observation
    independently attains the global optimum because the objective is a sum
    of per-observation terms. Deterministic; ties break to the lowest id.
    """
    _check_shapes(prior, m)
    dm = d.by_metric(metric)
    joint = prior.probs[:, None] * m.probs  # (V, W)
    cost = dm @ joint  # cost[v_hat, j]
    totals = joint.sum(axis=0)
    n = prior.n_vertices
    guess = np.zeros((m.n_outputs, n))
    flagged = []
    best = np.argmin(cost, axis=0)
    for j in range(m.n_outputs):
        if totals[j] > 0.0:
            guess[j, int(best[j])] = 1.0
        else:
            guess[j] = 1.0 / n
            flagged.append(j)
    return InferenceStrategy(guess=guess, uniform_rows=tuple(flagged))


def brute_force_attack(
    prior: PriorDistribution,
    m: MechanismMatrix,
    d: DistanceMatrix,
    metric: str = "shortest",
    limit: int = 10**6,
) -> InferenceStrategy:
    """Exhaustive minimum over all deterministic strategies (test oracle).

    Enumerates every assignment of a guess vertex to each observation and
    evaluates the expected distance from the definition. Intended for tiny
    instances; refuses to enumerate more than `limit` strategies.
    """
    _check_shapes(prior, m)
    n, k = prior.n_vertices, m.n_outputs
    if n**k > limit:
        raise AttackError(f"{n}^{k} deterministic strategies exceed the limit {limit}")
    dm = d.by_metric(metric)
    joint = prior.probs[:, None] * m.probs  # (V, W)

    best_val = np.inf
    best_assign = None
    for assign in itertools.product(range(n), repeat=k):
        val = 0.0
        for j, v_hat in enumerate(assign):
            val += float(joint[:, j] @ dm[v_hat])
        if val < best_val:
            best_val = val
            best_assign = assign
    guess = np.zeros((k, n))
    for j, v_hat in enumerate(best_assign):
        guess[j, v_hat] = 1.0
    return InferenceStrategy(guess=guess)


# ---------------------------------------------------------------------------
# CSV export / import


def strategy_to_csv(h: InferenceStrategy, output_range) -> str:
    buf = io.StringIO()
    k, n = h.guess.shape
    buf.write(f"strategy v1,{k},{n}\n")
    buf.write("range," + ",".join(str(int(o)) for o in output_range) + "\n")
    for row in h.guess:
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def strategy_from_csv(text: str) -> tuple[InferenceStrategy, np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("strategy v1,"):
        raise AttackError("expected 'strategy v1' header")
    head = lines[0].split(",")
    k, n = int(head[1]), int(head[2])
    if len(lines) < 2 or not lines[1].startswith("range,"):
        raise AttackError("expected a 'range,' line after the header")
    rng_ids = np.array([int(x) for x in lines[1].split(",")[1:]])
    rows = [[float(x) for x in ln.split(",")] for ln in lines[2:]]
    if len(rows) != k or (rows and len(rows[0]) != n):
        raise AttackError("strategy body disagrees with header dimensions")
    return InferenceStrategy(guess=np.array(rows)), rng_ids

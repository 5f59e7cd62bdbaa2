"""Utility and privacy functionals for perturbation mechanisms.

* q_loss: expected distance between true and reported location (utility
  cost paid by the user).
* adversarial_error: expected distance between the true location and the
  adversary's guess (empirical privacy gained).
* performance_criterion: their ratio; 1 means the best achievable tradeoff
  (the adversary can do no better than believing the report), 0 means the
  adversary recovers the truth exactly.
* true_probability: chance the adversary's guess lands on the true vertex.
* check_hiding_bound / check_informed_bound: executable forms of the two
  robustness guarantees a distance-bounded mechanism provides, reported as
  (observed supremum, analytic bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attacks import (
    InferenceStrategy,
    PriorDistribution,
    map_strategy,
    observation_probs,
    optimal_attack,
    posterior_strategy,
)
from .graph import DistanceMatrix
from .mechanism import MechanismMatrix

METRICS = ("shortest", "euclidean")
ATTACKS = ("optimal", "posterior")


def q_loss(
    prior: PriorDistribution,
    m: MechanismMatrix,
    d: DistanceMatrix,
    metric: str = "shortest",
) -> float:
    """Expected distance between the true vertex and the reported one."""
    dm = d.by_metric(metric)
    dist_to_range = dm[:, m.output_range]  # (V, W)
    return float(np.sum(prior.probs[:, None] * m.probs * dist_to_range))


def adversarial_error(
    prior: PriorDistribution,
    m: MechanismMatrix,
    h: InferenceStrategy,
    d: DistanceMatrix,
    metric: str = "shortest",
) -> float:
    """Expected distance between the true vertex and the adversary's guess."""
    dm = d.by_metric(metric)
    joint = prior.probs[:, None] * m.probs  # (V, W)
    # sum_{v,j,vh} joint[v,j] * guess[j,vh] * d[vh,v], factored so the
    # inner contraction is a single matrix product.
    expected_dist = h.guess @ dm  # (W, V): E[d(guess, v) | output j]
    return float(np.sum(joint * expected_dist.T))


def true_probability(
    prior: PriorDistribution,
    m: MechanismMatrix,
    h: InferenceStrategy,
) -> float:
    """Probability that the adversary's guess equals the true vertex."""
    joint = prior.probs[:, None] * m.probs  # (V, W)
    hit = h.guess[:, : prior.n_vertices].T  # guess[j, v] -> (V, W)
    return float(np.sum(joint * hit))


def performance_criterion(
    prior: PriorDistribution,
    m: MechanismMatrix,
    d: DistanceMatrix,
    attack: str = "optimal",
    metric: str = "shortest",
) -> float:
    """Adversarial error divided by quality loss, under the chosen attack.

    Returns nan when the quality loss is zero (a mechanism that never moves
    anyone has no meaningful tradeoff); callers render this as NA rather
    than aborting sweeps.
    """
    ql = q_loss(prior, m, d, metric)
    if ql == 0.0:
        return math.nan
    h = _attack_strategy(prior, m, d, attack, metric)
    return adversarial_error(prior, m, h, d, metric) / ql


def _attack_strategy(prior, m, d, attack, metric):
    if attack == "optimal":
        return optimal_attack(prior, m, d, metric)
    if attack == "posterior":
        return posterior_strategy(prior, m)
    raise ValueError(f"unknown attack {attack!r}, expected 'optimal' or 'posterior'")


@dataclass(frozen=True)
class EvaluationReport:
    """One mechanism evaluation: losses in meters, ratios unitless.

    Serialized column order: q_loss_m, ae_m, pc, tp, metric, attack.
    """

    q_loss: float
    ae: float
    pc: float
    tp: float
    metric: str
    attack: str

    CSV_HEADER = "q_loss_m,ae_m,pc,tp,metric,attack"

    def to_csv_row(self) -> str:
        pc = "NA" if math.isnan(self.pc) else repr(self.pc)
        return f"{self.q_loss!r},{self.ae!r},{pc},{self.tp!r},{self.metric},{self.attack}"

    @classmethod
    def from_csv_row(cls, row: str) -> "EvaluationReport":
        q, ae, pc, tp, metric, attack = row.strip().split(",")
        return cls(
            q_loss=float(q),
            ae=float(ae),
            pc=math.nan if pc == "NA" else float(pc),
            tp=float(tp),
            metric=metric,
            attack=attack,
        )


def evaluate_mechanism(
    prior: PriorDistribution,
    m: MechanismMatrix,
    d: DistanceMatrix,
    metric: str = "shortest",
    attack: str = "optimal",
) -> EvaluationReport:
    """Full report for one mechanism against one adversary model.

    With attack='optimal' the error uses the expected-distance-minimizing
    strategy and the hit rate uses the posterior mode (each is the exact
    optimizer of its own objective); with attack='posterior' both use the
    posterior itself.
    """
    ql = q_loss(prior, m, d, metric)
    if attack == "optimal":
        h_dist = optimal_attack(prior, m, d, metric)
        h_hit = map_strategy(prior, m)
    elif attack == "posterior":
        h_dist = h_hit = posterior_strategy(prior, m)
    else:
        raise ValueError(f"unknown attack {attack!r}")
    ae = adversarial_error(prior, m, h_dist, d, metric)
    tp = true_probability(prior, m, h_hit)
    pc = ae / ql if ql > 0.0 else math.nan
    return EvaluationReport(q_loss=ql, ae=ae, pc=pc, tp=tp, metric=metric, attack=attack)


# ---------------------------------------------------------------------------
# Robustness guarantees as executable checks


def check_hiding_bound(
    prior: PriorDistribution,
    m: MechanismMatrix,
    phi,
    eps: float,
    d: DistanceMatrix,
) -> tuple[float, float]:
    """Compare posteriors with and without a decoy remap of the input.

    phi maps every vertex to a decoy vertex; the perturbed mechanism first
    applies phi, then m. For every vertex v and every observation possible
    under both chains, the log-ratio of the two posteriors of v is bounded
    by 2 * eps * max_v d_s(v, phi(v)). Returns (observed max |log-ratio|,
    analytic bound).
    """
    get = phi if callable(phi) else phi.__getitem__
    n = prior.n_vertices
    phi_v = np.array([int(get(v)) for v in range(n)])
    if np.any((phi_v < 0) | (phi_v >= n)):
        raise ValueError("phi must map vertices into the graph")

    bound = 2.0 * eps * float(d.shortest[np.arange(n), phi_v].max())

    probs_plain = m.probs
    probs_decoy = m.probs[phi_v]  # row v describes m(phi(v))
    marg_plain = prior.probs @ probs_plain
    marg_decoy = prior.probs @ probs_decoy

    worst = 0.0
    for j in range(m.n_outputs):
        if marg_plain[j] <= 0.0 or marg_decoy[j] <= 0.0:
            continue
        post_plain = prior.probs * probs_plain[:, j] / marg_plain[j]
        post_decoy = prior.probs * probs_decoy[:, j] / marg_decoy[j]
        ok = (post_plain > 0.0) & (post_decoy > 0.0)
        if np.any((post_plain > 0.0) ^ (post_decoy > 0.0)):
            return math.inf, bound
        if np.any(ok):
            ratios = np.abs(np.log(post_plain[ok] / post_decoy[ok]))
            worst = max(worst, float(ratios.max()))
    return worst, bound


def check_informed_bound(
    prior: PriorDistribution,
    m: MechanismMatrix,
    n_subset,
    eps: float,
    d: DistanceMatrix,
) -> tuple[float, float]:
    """How much an adversary already restricted to a subset can still learn.

    For an adversary who knows the true vertex lies in N, the log-ratio of
    the restricted prior to the restricted posterior is bounded by eps
    times N's shortest-path diameter. Returns (observed max log-ratio,
    analytic bound).
    """
    sub = np.unique(np.asarray(n_subset, dtype=int))
    if sub.size == 0:
        raise ValueError("subset must be non-empty")
    if sub[0] < 0 or sub[-1] >= prior.n_vertices:
        raise ValueError("subset contains out-of-range vertex ids")
    mass = prior.probs[sub].sum()
    if mass <= 0.0:
        raise ValueError("subset has zero prior mass")

    bound = eps * float(d.shortest[np.ix_(sub, sub)].max())

    prior_restricted = prior.probs[sub] / mass
    joint = prior_restricted[:, None] * m.probs[sub]  # (|N|, W)
    marg = joint.sum(axis=0)

    worst = -math.inf
    for j in range(m.n_outputs):
        if marg[j] <= 0.0:
            continue  # observation impossible given N
        post = joint[:, j] / marg[j]
        ok = prior_restricted > 0.0
        if np.any(ok & (post == 0.0)):
            return math.inf, bound
        ratios = np.log(prior_restricted[ok] / post[ok])
        worst = max(worst, float(ratios.max()))
    return worst, bound

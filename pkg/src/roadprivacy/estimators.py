"""Estimator-style wrappers around the mechanism and optimizer cores.

These follow the scikit-learn conventions (constructor stores parameters
untouched, fit computes trailing-underscore attributes, get_params and
set_params come from BaseEstimator) so mechanisms drop into existing
tooling for grid search or pipeline composition. The functional API in
mechanism/optimize remains the primary surface; these wrap it.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .attacks import PriorDistribution
from .graph import DistanceMatrix, RoadGraph, all_pairs
from .mechanism import MechanismMatrix, gem_matrix, plm_sample, plmg_matrix, privacy_loss
from .numerics import as_rng
from .optimize import OptimizationConfig, greedy_optimize, init_range_by_qloss


def _sample_rows(m: MechanismMatrix, vertices, rng) -> np.ndarray:
    rng = as_rng(rng)
    v = np.asarray(vertices, dtype=int)
    cdf = np.cumsum(m.probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(v.shape)
    idx = np.array(
        [np.searchsorted(cdf[vi], ui, side="right") for vi, ui in zip(v.ravel(), u.ravel())]
    ).reshape(v.shape)
    return m.output_range[idx]


class _FittedMechanismMixin:
    """Shared sampling/inspection surface for fitted mechanism estimators."""

    def _check_fitted(self):
        if not hasattr(self, "matrix_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit(graph)")

    def perturb(self, vertices, rng=None):
        """Sample a pseudolocation for each input vertex id.

        Accepts a scalar id or an array; returns the same shape.
        Deterministic for a fixed seed or Generator state.
        """
        self._check_fitted()
        scalar = np.ndim(vertices) == 0
        out = _sample_rows(self.matrix_, np.atleast_1d(vertices), rng)
        return int(out[0]) if scalar else out

    def privacy_loss(self) -> float:
        """Tightest distance-scaled indistinguishability bound of the fit."""
        self._check_fitted()
        return privacy_loss(self.matrix_, self.distances_)


class GraphExponentialMechanism(_FittedMechanismMixin, BaseEstimator):
    """Perturbation with exponentially distance-decaying output likelihood.

    Parameters
    ----------
    epsilon : privacy parameter per meter of shortest-path distance.
    output_range : iterable of vertex ids the mechanism may report, or
        None for all vertices.
    """

    def __init__(self, epsilon: float = 0.01, output_range=None):
        self.epsilon = epsilon
        self.output_range = output_range

    def fit(self, graph: RoadGraph, distances: DistanceMatrix | None = None):
        self.distances_ = all_pairs(graph) if distances is None else distances
        w = (
            np.arange(self.distances_.n_vertices)
            if self.output_range is None
            else np.asarray(list(self.output_range), dtype=int)
        )
        self.matrix_ = gem_matrix(self.distances_, w, self.epsilon)
        self.n_vertices_ = self.distances_.n_vertices
        return self


class PlanarLaplaceOnGraph(_FittedMechanismMixin, BaseEstimator):
    """Planar Laplace noise snapped to the nearest vertex, as a matrix.

    grid_step controls the discretization of the underlying continuous
    density; padding (None means 3/epsilon) extends the integration grid
    beyond the graph's bounding box.
    """

    def __init__(self, epsilon: float = 0.01, grid_step: float = 25.0, padding: float | None = None):
        self.epsilon = epsilon
        self.grid_step = grid_step
        self.padding = padding

    def fit(self, graph: RoadGraph, distances: DistanceMatrix | None = None):
        self.distances_ = all_pairs(graph) if distances is None else distances
        pad = 3.0 / self.epsilon if self.padding is None else self.padding
        self.matrix_ = plmg_matrix(
            graph, self.distances_, self.epsilon, grid_step=self.grid_step, padding=pad
        )
        self.n_vertices_ = self.distances_.n_vertices
        return self


class PlanarLaplace(BaseEstimator):
    """Continuous planar Laplace sampler (no graph involved)."""

    def __init__(self, epsilon: float = 0.01):
        self.epsilon = epsilon

    def sample(self, point, rng=None, size: int | None = None):
        """Noisy point(s) centered at `point`; (x, y) or an (n, 2) array."""
        return plm_sample(point, self.epsilon, rng, size=size)


class GreedyRangeOptimizer(BaseEstimator):
    """Two-stage output-range search as a fittable estimator.

    With init='qloss' the starting range is first pruned for quality loss
    (theta=None then defaults to that range's own loss, so utility never
    degrades); init='full' starts from all vertices and leaves theta as
    given.
    """

    def __init__(
        self,
        epsilon: float = 0.01,
        objective: str = "maximize-pc",
        theta: float | None = None,
        attack: str = "posterior",
        topk: int | None = None,
        init: str = "qloss",
        max_sweeps: int = 100,
    ):
        self.epsilon = epsilon
        self.objective = objective
        self.theta = theta
        self.attack = attack
        self.topk = topk
        self.init = init
        self.max_sweeps = max_sweeps

    def fit(
        self,
        graph: RoadGraph,
        prior: PriorDistribution | None = None,
        distances: DistanceMatrix | None = None,
    ):
        if self.init not in ("qloss", "full"):
            raise ValueError("init must be 'qloss' or 'full'")
        d = all_pairs(graph) if distances is None else distances
        if prior is None:
            prior = PriorDistribution.uniform(d.n_vertices)

        if self.init == "qloss":
            w0 = init_range_by_qloss(d, prior, self.epsilon, topk=self.topk)
            theta = self.theta
            if theta is None:
                from .optimize import qloss_objective

                theta = qloss_objective(d, prior, self.epsilon)(w0)
        else:
            w0 = np.arange(d.n_vertices)
            theta = self.theta

        topk = self.topk if self.topk is None else min(self.topk, int(len(w0)))
        cfg = OptimizationConfig(
            eps=self.epsilon,
            objective=self.objective,
            theta=theta,
            attack=self.attack,
            topk=topk,
            max_sweeps=self.max_sweeps,
        )
        self.result_ = greedy_optimize(d, prior, cfg, w0)
        self.initial_range_ = self.result_.initial_range
        self.final_range_ = self.result_.final_range
        self.distances_ = d
        return self

    def mechanism(self) -> MechanismMatrix:
        """The distance-decay mechanism restricted to the optimized range."""
        if not hasattr(self, "result_"):
            raise NotFittedError("GreedyRangeOptimizer is not fitted yet; call fit(graph, prior)")
        return gem_matrix(self.distances_, self.final_range_, self.epsilon)

"""Location perturbation mechanisms as explicit finite distributions.

The central object is MechanismMatrix: a row-stochastic matrix giving, for
every true vertex, the distribution of the reported vertex over an output
range W (a subset of the graph's vertices). Three constructions are
provided:

* gem_matrix: output probability decays exponentially with shortest-path
  distance, normalized per input row.
* plm_sample: the continuous planar Laplace sampler (density proportional
  to exp(-eps * euclidean distance)).
* plmg_matrix: the planar Laplace density discretized on a square grid and
  snapped to the nearest vertex, i.e. the post-processed baseline.

privacy_loss measures the tightest epsilon for which a matrix bounds the
log-likelihood ratio of any output by epsilon times the shortest-path
distance between the two candidate inputs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .graph import DistanceMatrix, PlanarPoint, RoadGraph, nearest_vertices
from .numerics import as_rng, lambert_w_m1

ROW_SUM_TOL = 1e-9


class MechanismError(ValueError):
    """Invalid mechanism matrix or construction parameters."""


@dataclass(frozen=True)
class MechanismMatrix:
    """Row-stochastic perturbation matrix over an output range.

    output_range holds the vertex ids a mechanism may report, sorted
    ascending; probs[v][j] is the probability that input vertex v is
    reported as output_range[j]. epsilon records the privacy parameter the
    matrix was built with (informational only; verify with privacy_loss).
    """

    output_range: np.ndarray
    probs: np.ndarray
    epsilon: float | None = None

    def __post_init__(self):
        w = np.asarray(self.output_range, dtype=int)
        p = np.asarray(self.probs, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise MechanismError("output range must be a non-empty 1-d id array")
        if np.any(np.diff(w) <= 0):
            raise MechanismError("output range must be sorted ascending without duplicates")
        if np.any(w < 0):
            raise MechanismError("output range contains negative vertex ids")
        if p.ndim != 2 or p.shape[1] != w.size:
            raise MechanismError("probs must have one column per output-range member")
        if np.any(p < 0):
            raise MechanismError("probabilities must be non-negative")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise MechanismError("every row must sum to 1")
        w.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "output_range", w)
        object.__setattr__(self, "probs", p)

    @property
    def n_inputs(self) -> int:
        return self.probs.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.probs.shape[1]


def _check_range(w, n: int) -> np.ndarray:
    w = np.unique(np.asarray(w, dtype=int))
    if w.size == 0:
        raise MechanismError("output range is empty")
    if w[0] < 0 or w[-1] >= n:
        raise MechanismError(f"output range ids must lie in [0, {n})")
    return w


def gem_rows(dist_to_range: np.ndarray, eps: float) -> np.ndarray:
    """Row-normalized exp(-eps/2 * d) weights, shifted for stability.

    Subtracting each row's minimum distance before exponentiating keeps the
    largest exponent at zero, so rows stay well-formed even when eps times
    the graph diameter is far beyond float range.
    """
    d = np.asarray(dist_to_range, dtype=float)
    shifted = d - d.min(axis=-1, keepdims=True)
    p = np.exp(-0.5 * eps * shifted)
    return p / p.sum(axis=-1, keepdims=True)


def gem_matrix(d: DistanceMatrix, w, eps: float) -> MechanismMatrix:
    """Mechanism whose output likelihood decays with shortest-path distance.

    probs[v][j] is proportional to exp(-eps/2 * d_s(v, W[j])), normalized
    over the output range W.
    """
    if not eps > 0:
        raise MechanismError("eps must be positive")
    w = _check_range(w, d.n_vertices)
    probs = gem_rows(d.shortest[:, w], eps)
    return MechanismMatrix(output_range=w, probs=probs, epsilon=eps)


def gem_sample(m: MechanismMatrix, v: int, rng, size: int | None = None):
    """Sample pseudolocations for input vertex v by inverse-CDF lookup.

    Deterministic for a fixed seed. Returns a single vertex id, or an array
    of ids when size is given.
    """
    if not 0 <= v < m.n_inputs:
        raise MechanismError(f"input vertex {v} out of range")
    rng = as_rng(rng)
    cdf = np.cumsum(m.probs[v])
    cdf[-1] = 1.0
    u = rng.random() if size is None else rng.random(size)
    idx = np.searchsorted(cdf, u, side="right")
    out = m.output_range[idx]
    return int(out) if size is None else out


def plm_sample(x: PlanarPoint | tuple[float, float], eps: float, rng, size: int | None = None):
    """Draw from the planar Laplace distribution centered at x.

    The density is proportional to exp(-eps * ||z - x||). Sampling is polar:
    a uniform angle, and a radius drawn by inverting the radial CDF
    1 - (1 + eps*r) * exp(-eps*r) through the lower Lambert W branch.
    """
    if not eps > 0:
        raise MechanismError("eps must be positive")
    if isinstance(x, PlanarPoint):
        cx, cy = x.x, x.y
    else:
        cx, cy = float(x[0]), float(x[1])
    rng = as_rng(rng)
    n = 1 if size is None else int(size)
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    u = rng.random(n)
    r = -(lambert_w_m1((u - 1.0) / np.e) + 1.0) / eps
    pts = np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta)])
    if size is None:
        return PlanarPoint(float(pts[0, 0]), float(pts[0, 1]))
    return pts


def _grid_centers(g: RoadGraph, grid_step: float, padding: float) -> np.ndarray:
    x_lo = g.coords[:, 0].min() - padding
    x_hi = g.coords[:, 0].max() + padding
    y_lo = g.coords[:, 1].min() - padding
    y_hi = g.coords[:, 1].max() + padding
    nx = max(int(np.ceil((x_hi - x_lo) / grid_step)), 1)
    ny = max(int(np.ceil((y_hi - y_lo) / grid_step)), 1)
    xs = x_lo + (np.arange(nx) + 0.5) * grid_step
    ys = y_lo + (np.arange(ny) + 0.5) * grid_step
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def plmg_matrix(
    g: RoadGraph,
    d: DistanceMatrix,
    eps: float,
    grid_step: float,
    padding: float,
) -> MechanismMatrix:
    """Planar Laplace snapped to the nearest vertex, as an exact matrix.

    For each input vertex the planar Laplace density is evaluated at the
    centers of a square grid covering the graph's bounding box expanded by
    padding, renormalized over the grid, and each cell's mass is assigned
    to the cell center's nearest vertex. The output range is all of V.

    A padding of at least 3/eps keeps the truncated tail mass negligible.
    """
    if not eps > 0:
        raise MechanismError("eps must be positive")
    if not grid_step > 0:
        raise MechanismError("grid_step must be positive")
    if padding < 0:
        raise MechanismError("padding must be non-negative")
    centers = _grid_centers(g, grid_step, padding)
    if centers.shape[0] < 4:
        raise MechanismError("grid too coarse: fewer than 4 cells cover the graph")

    cell_vertex = nearest_vertices(g, centers)
    n = g.n_vertices
    # (n_inputs, n_cells) distances; log-space shift guards against underflow.
    dist = np.hypot(
        g.coords[:, None, 0] - centers[None, :, 0],
        g.coords[:, None, 1] - centers[None, :, 1],
    )
    logw = -eps * dist
    logw -= logw.max(axis=1, keepdims=True)
    wgt = np.exp(logw)
    wgt /= wgt.sum(axis=1, keepdims=True)
    probs = np.vstack(
        [np.bincount(cell_vertex, weights=wgt[v], minlength=n) for v in range(n)]
    )
    probs /= probs.sum(axis=1, keepdims=True)
    return MechanismMatrix(output_range=np.arange(n), probs=probs, epsilon=eps)


def postprocess(m: MechanismMatrix, f) -> MechanismMatrix:
    """Apply a vertex remap to a mechanism's outputs.

    f may be a callable or a mapping from each output-range member to a
    vertex id. The new output range is the image of f; probabilities sum
    over preimages. Remapping never increases privacy loss.
    """
    get = f if callable(f) else f.__getitem__
    images = np.array([int(get(int(o))) for o in m.output_range])
    if np.any(images < 0):
        raise MechanismError("remap produced a negative vertex id")
    new_range = np.unique(images)
    col_of = {int(o): j for j, o in enumerate(new_range)}
    probs = np.zeros((m.n_inputs, new_range.size))
    for old_j, o in enumerate(images):
        probs[:, col_of[int(o)]] += m.probs[:, old_j]
    return MechanismMatrix(output_range=new_range, probs=probs, epsilon=m.epsilon)


def privacy_loss(m: MechanismMatrix, d: DistanceMatrix) -> float:
    """Tightest epsilon bounding log-ratios by shortest-path distance.

    Returns the maximum over ordered input pairs (v, v') of
    max_j |ln(probs[v][j] / probs[v'][j])| / d_s(v, v'). The supremum over
    output *sets* reduces to singleton outputs (a ratio of sums lies
    between the extreme ratios of the summands), so scanning columns is
    exact. Returns inf when some output is possible under one input but
    impossible under another; columns impossible under both are ignored.
    A constant mechanism has zero loss.
    """
    ds = d.shortest
    if m.n_inputs != ds.shape[0]:
        raise MechanismError("mechanism and distance matrix dimensions disagree")
    p = m.probs
    zero = p == 0.0
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    worst = 0.0
    n = m.n_inputs
    for v in range(n):
        if np.any(zero[v] ^ zero):  # some output possible under one input only
            return np.inf
        with np.errstate(invalid="ignore"):
            diff = np.abs(logp[v] - logp)  # (n, |W|); nan where both are -inf
        diff = np.where(zero[v] & zero, 0.0, diff)
        ratio = diff.max(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            per_pair = ratio / ds[v]
        per_pair[v] = 0.0  # d(v, v) = 0 and ratio 0: no constraint
        worst = max(worst, float(np.max(per_pair)))
    return worst


# ---------------------------------------------------------------------------
# CSV export / import


def matrix_to_csv(m: MechanismMatrix) -> str:
    """Serialize to CSV: header, a range line, then one row per input."""
    buf = io.StringIO()
    eps = "" if m.epsilon is None else repr(float(m.epsilon))
    buf.write(f"mechmatrix v1,{m.n_inputs},{m.n_outputs},{eps}\n")
    buf.write("range," + ",".join(str(int(o)) for o in m.output_range) + "\n")
    for row in m.probs:
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    return buf.getvalue()


def matrix_from_csv(text: str) -> MechanismMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("mechmatrix v1,"):
        raise MechanismError("expected 'mechmatrix v1' header")
    head = lines[0].split(",")
    if len(head) != 4:
        raise MechanismError("malformed mechmatrix header")
    n_in, n_out = int(head[1]), int(head[2])
    eps = float(head[3]) if head[3] else None
    if len(lines) < 2 or not lines[1].startswith("range,"):
        raise MechanismError("expected a 'range,' line after the header")
    rng_ids = [int(x) for x in lines[1].split(",")[1:]]
    if len(rng_ids) != n_out:
        raise MechanismError("range line length disagrees with header")
    rows = [[float(x) for x in ln.split(",")] for ln in lines[2:]]
    if len(rows) != n_in:
        raise MechanismError(f"expected {n_in} probability rows, got {len(rows)}")
    return MechanismMatrix(output_range=np.array(rng_ids), probs=np.array(rows), epsilon=eps)

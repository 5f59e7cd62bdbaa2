"""Road-network graphs: construction, file ingestion, synthetic generators,
and all-pairs shortest-path / Euclidean distance tables.

A road network is an undirected weighted graph whose vertices carry planar
coordinates in meters. Edge weights are road-segment lengths and therefore
can never be shorter than the straight-line distance between their
endpoints; construction enforces this so that the Euclidean distance is a
lower bound on the shortest-path distance for every vertex pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

EDGE_SLACK = 1e-6  # tolerated shortfall of weight vs Euclidean length, meters


class GraphError(ValueError):
    """Invalid graph structure or graph file contents."""


@dataclass(frozen=True)
class PlanarPoint:
    """A location on the plane, in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise GraphError("point coordinates must be finite")


@dataclass(frozen=True)
class RoadGraph:
    """Undirected weighted graph with planar vertex coordinates.

    coords has shape (n, 2) in meters; edges is a list of (u, v, weight)
    with dense 0-based vertex ids. The graph must be connected, weights
    strictly positive, and every weight at least the Euclidean distance
    between its endpoints (within EDGE_SLACK).
    """

    coords: np.ndarray
    edges: tuple[tuple[int, int, float], ...]
    adjacency: csr_matrix = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 1:
            raise GraphError("coords must be an (n, 2) array with n >= 1")
        if not np.all(np.isfinite(coords)):
            raise GraphError("vertex coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

        n = coords.shape[0]
        edges = tuple((int(u), int(v), float(w)) for u, v, w in self.edges)
        object.__setattr__(self, "edges", edges)
        for u, v, w in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) references an unknown vertex")
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (w > 0 and np.isfinite(w)):
                raise GraphError(f"edge ({u}, {v}) must have positive finite weight, got {w}")
            euclid = float(np.hypot(*(coords[u] - coords[v])))
            if w < euclid - EDGE_SLACK:
                raise GraphError(
                    f"edge ({u}, {v}) weight {w} is shorter than the "
                    f"Euclidean endpoint distance {euclid:.6f}"
                )

        object.__setattr__(self, "adjacency", self._build_adjacency(n, edges))
        n_comp, _ = connected_components(self.adjacency, directed=False)
        if n_comp != 1:
            raise GraphError(f"graph is disconnected ({n_comp} components)")

    @staticmethod
    def _build_adjacency(n: int, edges) -> csr_matrix:
        # Parallel edges collapse to their minimum weight.
        best: dict[tuple[int, int], float] = {}
        for u, v, w in edges:
            key = (u, v) if u < v else (v, u)
            if key not in best or w < best[key]:
                best[key] = w
        if not best:
            return csr_matrix((n, n))
        us = np.array([k[0] for k in best])
        vs = np.array([k[1] for k in best])
        ws = np.array(list(best.values()))
        return csr_matrix(
            (np.concatenate([ws, ws]), (np.concatenate([us, vs]), np.concatenate([vs, us]))),
            shape=(n, n),
        )

    @property
    def n_vertices(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class DistanceMatrix:
    """All-pairs shortest-path lengths and Euclidean distances, meters."""

    shortest: np.ndarray
    euclidean: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.shortest, dtype=float)
        e = np.asarray(self.euclidean, dtype=float)
        if s.shape != e.shape or s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise GraphError("distance matrices must be square and same shape")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(e))):
            raise GraphError("distances must be finite (is the graph connected?)")
        if np.any(s < 0) or np.any(e < 0):
            raise GraphError("distances must be non-negative")
        s.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "shortest", s)
        object.__setattr__(self, "euclidean", e)

    @property
    def n_vertices(self) -> int:
        return self.shortest.shape[0]

    def by_metric(self, metric: str) -> np.ndarray:
        if metric == "shortest":
            return self.shortest
        if metric == "euclidean":
            return self.euclidean
        raise ValueError(f"unknown metric {metric!r}, expected 'shortest' or 'euclidean'")


def euclidean_matrix(coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def all_pairs(g: RoadGraph) -> DistanceMatrix:
    """Exact all-pairs shortest-path lengths plus Euclidean distances.

    Runs single-source Dijkstra from every vertex (positive weights make
    this exact) and fills the Euclidean table from the coordinates.
    """
    shortest = dijkstra(g.adjacency, directed=False)
    return DistanceMatrix(shortest=shortest, euclidean=euclidean_matrix(g.coords))


def nearest_vertex(g: RoadGraph, p: PlanarPoint | tuple[float, float]) -> int:
    """Vertex closest to p in Euclidean distance; ties go to the lowest id."""
    if isinstance(p, PlanarPoint):
        px, py = p.x, p.y
    else:
        px, py = float(p[0]), float(p[1])
    d = np.hypot(g.coords[:, 0] - px, g.coords[:, 1] - py)
    return int(np.argmin(d))


def nearest_vertices(g: RoadGraph, points: np.ndarray) -> np.ndarray:
    """Vectorized nearest_vertex for an (m, 2) array of points."""
    points = np.asarray(points, dtype=float)
    d = np.hypot(
        points[:, None, 0] - g.coords[None, :, 0],
        points[:, None, 1] - g.coords[None, :, 1],
    )
    return np.argmin(d, axis=1)


# ---------------------------------------------------------------------------
# Synthetic generators


def make_line(n: int, total_length: float) -> RoadGraph:
    """n evenly spaced collinear vertices spanning total_length meters."""
    if n < 2:
        raise GraphError("a line graph needs at least 2 vertices")
    if not total_length > 0:
        raise GraphError("total_length must be positive")
    spacing = total_length / (n - 1)
    coords = np.column_stack([np.arange(n) * spacing, np.zeros(n)])
    edges = [(i, i + 1, spacing) for i in range(n - 1)]
    return RoadGraph(coords=coords, edges=tuple(edges))


def make_two_vertex(euclid: float, shortest: float) -> RoadGraph:
    """Two vertices euclid meters apart joined by a road of length shortest.

    Models a road that detours: the edge weight may exceed the straight-line
    separation of its endpoints (shortest >= euclid > 0).
    """
    if not euclid > 0:
        raise GraphError("euclid must be positive")
    if shortest < euclid:
        raise GraphError(f"road length {shortest} shorter than straight-line distance {euclid}")
    coords = np.array([[0.0, 0.0], [float(euclid), 0.0]])
    return RoadGraph(coords=coords, edges=((0, 1, float(shortest)),))


def make_lattice(rows: int, cols: int, spacing: float) -> RoadGraph:
    """Grid graph with 4-neighbor edges of length spacing."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise GraphError("lattice needs at least two vertices")
    if not spacing > 0:
        raise GraphError("spacing must be positive")
    xs, ys = np.meshgrid(np.arange(cols) * spacing, np.arange(rows) * spacing)
    coords = np.column_stack([xs.ravel(), ys.ravel()])
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1, spacing))
            if r + 1 < rows:
                edges.append((i, i + cols, spacing))
    return RoadGraph(coords=coords, edges=tuple(edges))


def make_cross_map(arm_length: float, spacing: float) -> RoadGraph:
    """Plus-sign graph: horizontal and vertical centerlines sharing a center.

    Vertices sit every spacing meters from -arm_length to +arm_length along
    both axes; the center vertex is shared, so a cross with k vertices per
    axis has 2k - 1 vertices in total.
    """
    steps = arm_length / spacing
    if abs(steps - round(steps)) > 1e-9 or arm_length <= 0 or spacing <= 0:
        raise GraphError("arm_length must be a positive multiple of spacing")
    k = int(round(steps))

    coords = []
    # Horizontal axis, left to right; the center lands at index k.
    for i in range(2 * k + 1):
        coords.append(((i - k) * spacing, 0.0))
    # Vertical axis, bottom to top, skipping the shared center.
    vertical_ids = {}
    for j in range(2 * k + 1):
        if j == k:
            vertical_ids[j] = k  # shared center vertex
            continue
        vertical_ids[j] = len(coords)
        coords.append((0.0, (j - k) * spacing))

    edges = [(i, i + 1, spacing) for i in range(2 * k)]
    for j in range(2 * k):
        edges.append((vertical_ids[j], vertical_ids[j + 1], spacing))
    return RoadGraph(coords=np.array(coords), edges=tuple(edges))


# ---------------------------------------------------------------------------
# File format: "ggraph v1" edge lists


def load_graph(text: str) -> RoadGraph:
    """Parse a ggraph v1 edge-list file into a validated RoadGraph.

    Format (whitespace separated, '#' starts a comment):

        ggraph v1
        v <id> <x> <y>
        e <u> <v> <weight>

    Vertex ids may be arbitrary integers; they are remapped to the dense
    range 0..n-1 preserving input order. Coordinates and weights are meters.
    """
    id_map: dict[int, int] = {}
    coords: list[tuple[float, float]] = []
    edges: list[tuple[int, int, float]] = []
    header_seen = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            if line != "ggraph v1":
                raise GraphError(f"line {lineno}: expected header 'ggraph v1', got {line!r}")
            header_seen = True
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "v":
            if len(fields) != 4:
                raise GraphError(f"line {lineno}: vertex lines need 'v <id> <x> <y>'")
            try:
                vid = int(fields[1])
                x, y = float(fields[2]), float(fields[3])
            except ValueError as exc:
                raise GraphError(f"line {lineno}: {exc}") from None
            if vid in id_map:
                raise GraphError(f"line {lineno}: duplicate vertex id {vid}")
            id_map[vid] = len(coords)
            coords.append((x, y))
        elif kind == "e":
            if len(fields) != 4:
                raise GraphError(f"line {lineno}: edge lines need 'e <u> <v> <weight>'")
            try:
                u, v = int(fields[1]), int(fields[2])
                w = float(fields[3])
            except ValueError as exc:
                raise GraphError(f"line {lineno}: {exc}") from None
            if u not in id_map or v not in id_map:
                missing = u if u not in id_map else v
                raise GraphError(f"line {lineno}: edge references undeclared vertex {missing}")
            edges.append((id_map[u], id_map[v], w))
        else:
            raise GraphError(f"line {lineno}: unknown record type {kind!r}")

    if not header_seen:
        raise GraphError("empty file: missing 'ggraph v1' header")
    if not coords:
        raise GraphError("graph file declares no vertices")
    return RoadGraph(coords=np.array(coords, dtype=float), edges=tuple(edges))


def dump_graph(g: RoadGraph) -> str:
    """Serialize a RoadGraph back to ggraph v1 text."""
    lines = ["ggraph v1"]
    for i, (x, y) in enumerate(g.coords):
        lines.append(f"v {i} {float(x)!r} {float(y)!r}")
    for u, v, w in g.edges:
        lines.append(f"e {u} {v} {float(w)!r}")
    return "\n".join(lines) + "\n"

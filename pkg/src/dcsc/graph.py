"""Row, column and non-local patch graphs and their Laplacian regularisers.

Edge weights follow a Gaussian kernel on the cosine distance between the
vectors attached to two vertices::

    d_ij = 1 - <a_i, a_j> / (|a_i| |a_j|)        (in [0, 2])
    W_ij = exp(-d_ij**2 / delta**2)

so that positively parallel vectors are joined by weight 1 and
anti-parallel ones by ``exp(-4 / delta**2)``.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .core import as_image
from .errors import DimensionError, ParameterError

__all__ = [
    "GraphConfig",
    "GraphLaplacian",
    "PatchGraph",
    "DualGraphPrior",
    "PatchGraphPrior",
    "cosine_edge_weight",
    "build_line_graph",
    "build_patch_graph",
    "dglr_value",
    "glr_value",
    "dump_graph_csv",
]


@dataclass(frozen=True)
class GraphConfig:
    """Parameters of graph construction.

    Attributes
    ----------
    delta : float
        Width of the Gaussian weight kernel.
    radius : int
        Line-graph neighbourhood: vertices ``i`` and ``j`` are joined when
        ``0 < |i - j| <= radius``.
    patch_size : int
        Tile size of the non-local patch graph.
    knn : int
        Number of most-similar tiles each tile is joined to.
    epsilon_norm : float
        Floor applied to vector norms in the cosine similarity.
    """

    delta: float = 1.0
    radius: int = 10
    patch_size: int = 8
    knn: int = 8
    epsilon_norm: float = 1e-8

    def __post_init__(self):
        if not self.delta > 0:
            raise ParameterError("delta must be positive, got %r" % self.delta)
        if int(self.radius) != self.radius or self.radius < 1:
            raise ParameterError("radius must be an integer >= 1, got %r" % self.radius)
        if int(self.patch_size) != self.patch_size or self.patch_size < 1:
            raise ParameterError("patch_size must be an integer >= 1, got %r"
                                 % self.patch_size)
        if int(self.knn) != self.knn or self.knn < 1:
            raise ParameterError("knn must be an integer >= 1, got %r" % self.knn)
        if not self.epsilon_norm > 0:
            raise ParameterError("epsilon_norm must be positive, got %r"
                                 % self.epsilon_norm)


class GraphLaplacian:
    """Dense weighted undirected graph with Laplacian ``L = D - W``.

    Attributes
    ----------
    W : ndarray
        Symmetric weight matrix with zero diagonal.
    degree : ndarray
        Vertex degrees, ``degree[i] = sum_{j != i} W[i, j]``.
    L : ndarray
        Graph Laplacian.
    """

    def __init__(self, W):
        W = np.array(W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DimensionError("weight matrix must be square, got %s" % (W.shape,))
        np.fill_diagonal(W, 0.0)
        W = 0.5 * (W + W.T)
        self.W = W
        self.degree = W.sum(axis=1)
        L = -W
        L[np.diag_indices_from(L)] = self.degree
        self.L = L
        for a in (self.W, self.degree, self.L):
            a.setflags(write=False)

    @property
    def size(self):
        return self.W.shape[0]

    def __repr__(self):
        return "GraphLaplacian(size=%d, edges=%d)" % (
            self.size, int(np.count_nonzero(self.W)) // 2)


def _cosine_similarity_matrix(V, eps):
    norms = np.maximum(np.sqrt(np.sum(V * V, axis=1)), eps)
    U = V / norms[:, np.newaxis]
    return np.clip(U @ U.T, -1.0, 1.0)


def _kernel(sim, delta):
    d = 1.0 - sim
    return np.exp(-(d * d) / (delta * delta))


def cosine_edge_weight(a, b, cfg=GraphConfig()):
    """Edge weight between two vertex vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size < 1:
        raise DimensionError("vectors must have equal non-zero length, got %d and %d"
                             % (a.size, b.size))
    eps = cfg.epsilon_norm
    sim = np.dot(a, b) / (max(np.linalg.norm(a), eps) * max(np.linalg.norm(b), eps))
    sim = min(max(sim, -1.0), 1.0)
    return float(_kernel(sim, cfg.delta))


def build_line_graph(image, axis, cfg=GraphConfig()):
    """Build the column graph (``axis="columns"``) or row graph (``axis="rows"``).

    Each column (or row) of `image` is a vertex; vertices within `cfg.radius`
    positions of each other are joined by :func:`cosine_edge_weight`.
    """
    image = as_image(image)
    if axis in ("columns", "column", "c"):
        V = image.T
    elif axis in ("rows", "row", "r"):
        V = image
    else:
        raise ParameterError("axis must be 'rows' or 'columns', got %r" % (axis,))
    n = V.shape[0]
    if cfg.radius >= n and n > 1:
        raise ParameterError("radius %d must be smaller than the number of %s (%d)"
                             % (cfg.radius, axis, n))
    W = _kernel(_cosine_similarity_matrix(V, cfg.epsilon_norm), cfg.delta)
    i, j = np.indices((n, n))
    W[np.abs(i - j) > cfg.radius] = 0.0
    return GraphLaplacian(W)


def _to_tiles(x, P):
    M, N = x.shape[-2:]
    Tr, Tc = -(-M // P), -(-N // P)
    lead = x.shape[:-2]
    pad = [(0, 0)] * len(lead) + [(0, Tr * P - M), (0, Tc * P - N)]
    xp = np.pad(x, pad).reshape(lead + (Tr, P, Tc, P))
    return np.moveaxis(xp, -3, -2).reshape(lead + (Tr * Tc, P * P))


def _from_tiles(t, shape, P):
    M, N = shape
    Tr, Tc = -(-M // P), -(-N // P)
    lead = t.shape[:-2]
    xp = np.moveaxis(t.reshape(lead + (Tr, Tc, P, P)), -2, -3)
    return xp.reshape(lead + (Tr * P, Tc * P))[..., :M, :N]


class PatchGraph:
    """Non-local graph over non-overlapping tiles of an image.

    Tiles are ``patch_size x patch_size`` blocks in raster order; tiles that
    run over the right or bottom edge are zero-padded. The tile graph induces
    a pixel-level operator that couples each pixel with the pixel at the same
    offset in every neighbouring tile.

    Attributes
    ----------
    laplacian : GraphLaplacian
        Tile-level graph.
    image_shape : tuple
        ``(M, N)`` of the image the graph was built from.
    patch_size : int
    grid : tuple
        Number of tile rows and tile columns.
    """

    def __init__(self, laplacian, image_shape, patch_size):
        self.laplacian = laplacian
        self.image_shape = tuple(image_shape)
        self.patch_size = int(patch_size)
        M, N = self.image_shape
        P = self.patch_size
        self.grid = (-(-M // P), -(-N // P))
        if self.grid[0] * self.grid[1] != laplacian.size:
            raise DimensionError("tile grid %s does not match graph size %d"
                                 % (self.grid, laplacian.size))

    def tile_index(self):
        """Array of shape (M, N) giving the tile (vertex) index of every pixel."""
        M, N = self.image_shape
        P = self.patch_size
        r = np.arange(M) // P
        c = np.arange(N) // P
        return r[:, np.newaxis] * self.grid[1] + c[np.newaxis, :]

    def to_tiles(self, x):
        """Reshape maps ``(..., M, N)`` into ``(..., T, P*P)`` tile vectors."""
        return _to_tiles(x, self.patch_size)

    def from_tiles(self, t):
        """Inverse of :meth:`to_tiles`, cropping the zero padding."""
        return _from_tiles(t, self.image_shape, self.patch_size)

    def apply(self, x):
        """Apply the pixel-level Laplacian to maps of shape ``(..., M, N)``."""
        return self.from_tiles(self.laplacian.L @ self.to_tiles(x))

    def diagonal(self):
        """Diagonal of the pixel-level Laplacian, shape (M, N)."""
        return self.laplacian.degree[self.tile_index()]

    def quadratic(self, x):
        """``<x, L x>`` summed over any leading axes."""
        return float(np.sum(x * self.apply(x)))


def build_patch_graph(image, cfg=GraphConfig()):
    """Build the non-local tile graph used by the single-graph model.

    Each tile is joined to its `cfg.knn` most cosine-similar other tiles
    (ties broken by lower tile index) and the weight matrix is symmetrised by
    elementwise maximum.
    """
    image = as_image(image)
    M, N = image.shape
    P = cfg.patch_size
    if P > min(M, N):
        raise ParameterError("patch_size %d exceeds image size %s" % (P, (M, N)))
    V = _to_tiles(image, P)
    T = V.shape[0]
    sim = _cosine_similarity_matrix(V, cfg.epsilon_norm)
    weights = _kernel(sim, cfg.delta)
    W = np.zeros((T, T))
    k = min(cfg.knn, T - 1)
    if k > 0:
        for i in range(T):
            order = np.argsort(-sim[i], kind="stable")
            order = order[order != i][:k]
            W[i, order] = weights[i, order]
    W = np.maximum(W, W.T)
    return PatchGraph(GraphLaplacian(W), (M, N), P)


class DualGraphPrior:
    """Weighted sum of column and row graph regularisers.

    Represents the operator ``Q = alpha * (L_c kron I_M) + beta * (I_N kron L_r)``
    acting on column-stacked maps, applied matrix-free as
    ``alpha * Z @ L_c + beta * L_r @ Z``.
    """

    def __init__(self, column, row, alpha, beta):
        if not (alpha >= 0 and beta >= 0):
            raise ParameterError("alpha and beta must be nonnegative, got %r, %r"
                                 % (alpha, beta))
        self.column = column
        self.row = row
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.shape = (row.size, column.size)

    @property
    def inert(self):
        return self.alpha == 0.0 and self.beta == 0.0

    def _check(self, x):
        if x.shape[-2:] != self.shape:
            raise DimensionError("map shape %s does not match graph dimensions %s"
                                 % (x.shape[-2:], self.shape))

    def apply(self, Z):
        """``Q vec(Z)`` reshaped, for maps of shape ``(..., M, N)``."""
        Z = np.asarray(Z, dtype=np.float64)
        self._check(Z)
        out = np.zeros_like(Z)
        if self.alpha:
            out += self.alpha * (Z @ self.column.L)
        if self.beta:
            out += self.beta * (self.row.L @ Z)
        return out

    def diagonal(self):
        """Diagonal of ``Q`` arranged as an (M, N) map."""
        return (self.alpha * np.diag(self.column.L)[np.newaxis, :]
                + self.beta * np.diag(self.row.L)[:, np.newaxis])

    def energy(self, x):
        """``sum_k alpha tr(x_k L_c x_k^T) + beta tr(x_k^T L_r x_k)``."""
        x = np.asarray(x, dtype=np.float64)
        self._check(x)
        if self.inert:
            return 0.0
        return float(np.sum(x * self.apply(x)))


class PatchGraphPrior:
    """Single non-local graph regulariser ``mu * <x, L x>`` on pixel maps."""

    def __init__(self, graph, mu):
        if not mu >= 0:
            raise ParameterError("mu must be nonnegative, got %r" % mu)
        self.graph = graph
        self.mu = float(mu)
        self.shape = graph.image_shape

    @property
    def inert(self):
        return self.mu == 0.0

    def apply(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        if Z.shape[-2:] != self.shape:
            raise DimensionError("map shape %s does not match graph dimensions %s"
                                 % (Z.shape[-2:], self.shape))
        if self.inert:
            return np.zeros_like(Z)
        return self.mu * self.graph.apply(Z)

    def diagonal(self):
        return self.mu * self.graph.diagonal()

    def energy(self, x):
        if self.inert:
            return 0.0
        return float(np.sum(x * self.apply(x)))


def glr_value(x, laplacian, side):
    """Single-graph Laplacian regulariser of one map `x` of shape (M, N).

    ``side="column"`` gives ``tr(x L x^T)`` (vertices are columns of `x`),
    ``side="row"`` gives ``tr(x^T L x)`` (vertices are rows).
    """
    x = np.asarray(x, dtype=np.float64)
    L = laplacian.L if isinstance(laplacian, GraphLaplacian) else np.asarray(laplacian)
    if x.ndim != 2:
        raise DimensionError("expected a single 2-D map, got shape %s" % (x.shape,))
    if side in ("column", "columns", "c"):
        if x.shape[1] != L.shape[0]:
            raise DimensionError("map has %d columns, graph has %d vertices"
                                 % (x.shape[1], L.shape[0]))
        return float(np.sum((x @ L) * x))
    if side in ("row", "rows", "r"):
        if x.shape[0] != L.shape[0]:
            raise DimensionError("map has %d rows, graph has %d vertices"
                                 % (x.shape[0], L.shape[0]))
        return float(np.sum((L @ x) * x))
    raise ParameterError("side must be 'column' or 'row', got %r" % (side,))


def dglr_value(x, prior):
    """Dual-graph regulariser ``alpha tr(x L_c x^T) + beta tr(x^T L_r x)`` of one map."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError("expected a single 2-D map, got shape %s" % (x.shape,))
    return prior.energy(x)


def dump_graph_csv(laplacian, path, which="L"):
    """Write the nonzero entries of ``W`` or ``L`` as ``row,col,value`` lines."""
    A = {"L": laplacian.L, "W": laplacian.W}[which]
    rows, cols = np.nonzero(A)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["row", "col", "value"])
        for r, c in zip(rows, cols):
            w.writerow([int(r), int(c), repr(float(A[r, c]))])

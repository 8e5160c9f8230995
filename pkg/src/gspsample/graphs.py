"""Weighted-graph container, Laplacian spectral analysis, and smoothness
functionals for signals living on sensor-network graphs.

All objects are immutable after construction (arrays are marked read-only)
and every operation is a pure function, so everything here is safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "SpectralBasis",
    "GraphSignal",
    "GraphError",
    "EigensolverError",
    "build_graph",
    "spectral_decompose",
    "gft",
    "igft",
    "total_variation",
    "smoothness",
    "graph_to_dict",
    "graph_from_dict",
]

# Tolerance below which slightly negative weights (symmetrisation noise) are
# clipped to zero instead of rejected.
NEGATIVE_WEIGHT_TOL = 1e-12


class GraphError(ValueError):
    """Raised for structurally invalid graph input."""


class EigensolverError(RuntimeError):
    """Raised when the dense symmetric eigensolver fails to converge."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph with cached degree and Laplacian matrices.

    ``W`` is symmetric, nonnegative, zero-diagonal; ``D`` holds the weighted
    degrees on its diagonal and ``L = D - W``.
    """

    W: np.ndarray
    D: np.ndarray
    L: np.ndarray

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return np.diag(self.D)

    def spectral_radius(self) -> float:
        """Largest absolute eigenvalue of the adjacency matrix."""
        if self.n == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvalsh(self.W))))


@dataclass(frozen=True)
class SpectralBasis:
    """Orthonormal Laplacian eigenbasis with ascending eigenvalues.

    Columns of ``U`` are eigenvectors; ``U.T`` is the graph Fourier
    transform operator.
    """

    U: np.ndarray
    lambdas: np.ndarray

    @property
    def n(self) -> int:
        return self.U.shape[0]


@dataclass(frozen=True)
class GraphSignal:
    """One real value per vertex plus an observed/unobserved mask."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = _readonly(np.asarray(self.values, dtype=float))
        mask = _readonly(np.asarray(self.mask, dtype=bool))
        if values.ndim != 1 or mask.shape != values.shape:
            raise GraphError("signal values and mask must be 1-D with equal length")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def full(cls, values) -> "GraphSignal":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape, dtype=bool))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())


def build_graph(W) -> Graph:
    """Build a :class:`Graph` from a square weight matrix.

    The input is symmetrised as ``(W + W.T) / 2`` and its diagonal is
    zeroed.  Degrees are weighted row sums, so the Laplacian quadratic form
    matches the pairwise weighted-difference sum.

    Raises :class:`GraphError` on non-square input, NaN/Inf entries, or
    negative weights beyond a 1e-12 tolerance.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise GraphError(f"weight matrix must be square, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise GraphError("weight matrix contains NaN or Inf entries")
    W = 0.5 * (W + W.T)
    np.fill_diagonal(W, 0.0)
    if np.any(W < -NEGATIVE_WEIGHT_TOL):
        raise GraphError(f"negative edge weights below -{NEGATIVE_WEIGHT_TOL:g}")
    np.clip(W, 0.0, None, out=W)
    degrees = W.sum(axis=1)
    D = np.diag(degrees)
    L = D - W
    return Graph(W=_readonly(W), D=_readonly(D), L=_readonly(L))


def spectral_decompose(g: Graph) -> SpectralBasis:
    """Eigendecompose the Laplacian into an ascending orthonormal basis.

    Eigenvector signs follow a fixed convention (first component of
    magnitude above 1e-12 is made positive) so downstream orderings are
    reproducible across platforms.
    """
    try:
        lambdas, U = np.linalg.eigh(g.L)
    except np.linalg.LinAlgError as e:
        raise EigensolverError(f"eigendecomposition failed: {e}") from e
    U = np.array(U)
    for col in range(U.shape[1]):
        u = U[:, col]
        nz = np.nonzero(np.abs(u) > 1e-12)[0]
        if nz.size and u[nz[0]] < 0:
            U[:, col] = -u
    return SpectralBasis(U=_readonly(U), lambdas=_readonly(lambdas))


def _check_signal(basis_or_graph, x: GraphSignal, op: str) -> np.ndarray:
    n = basis_or_graph.n
    if x.n != n:
        raise GraphError(f"{op}: signal length {x.n} does not match n={n}")
    if not x.fully_observed:
        raise GraphError(f"{op} requires a fully observed signal")
    return x.values


def gft(basis: SpectralBasis, x: GraphSignal) -> np.ndarray:
    """Graph Fourier transform: project a signal onto the eigenbasis."""
    values = _check_signal(basis, x, "gft")
    return basis.U.T @ values


def igft(basis: SpectralBasis, spectrum) -> GraphSignal:
    """Inverse graph Fourier transform."""
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape != (basis.n,):
        raise GraphError(f"igft: spectrum length {spectrum.shape} does not match n={basis.n}")
    return GraphSignal.full(basis.U @ spectrum)


def shift_operator(g: Graph, shift: str = "normalized") -> np.ndarray:
    """Adjacency shift; ``normalized`` divides by the spectral radius."""
    if shift == "raw":
        return g.W
    if shift == "normalized":
        rho = g.spectral_radius()
        if rho == 0.0:
            raise GraphError("normalized shift undefined for a graph with no edges")
        return g.W / rho
    raise GraphError(f"unknown shift mode {shift!r}")


def total_variation(g: Graph, x: GraphSignal, form: str = "quadratic",
                    shift: str = "normalized") -> float:
    """Aggregate signal change under the adjacency shift.

    ``l1`` form returns ``||x - Sx||_1``; ``quadratic`` returns
    ``0.5 * ||x - Sx||_2^2`` where ``S`` is the (optionally normalised)
    adjacency shift.
    """
    values = _check_signal(g, x, "total_variation")
    S = shift_operator(g, shift)
    diff = values - S @ values
    if form == "l1":
        return float(np.sum(np.abs(diff)))
    if form == "quadratic":
        return float(0.5 * np.dot(diff, diff))
    raise GraphError(f"unknown total variation form {form!r}")


def smoothness(g: Graph, X) -> float:
    """Laplacian quadratic form summed over snapshots.

    ``X`` is a T x n matrix (or SignalMatrix) of fully observed snapshots,
    one snapshot per row; equals half the weighted sum of squared
    differences between per-node time series.
    """
    observed = getattr(X, "observed", None)
    values = np.asarray(getattr(X, "values", X), dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    if values.shape[1] != g.n:
        raise GraphError(f"smoothness: {values.shape[1]} columns do not match n={g.n}")
    if observed is not None and not np.all(observed):
        raise GraphError("smoothness requires fully observed snapshots")
    if not np.all(np.isfinite(values)):
        raise GraphError("smoothness: snapshots contain non-finite entries")
    return float(np.einsum("ti,ij,tj->", values, g.L, values))


def graph_to_dict(g: Graph) -> dict:
    """JSON-ready form: ``{"n": n, "edges": [[i, j, w], ...]}`` with i < j."""
    ii, jj = np.nonzero(np.triu(g.W, k=1))
    edges = [[int(i), int(j), float(g.W[i, j])] for i, j in zip(ii, jj)]
    return {"n": int(g.n), "edges": edges}


def graph_from_dict(obj: dict) -> Graph:
    """Parse the JSON edge-list form, rejecting malformed edge entries."""
    try:
        n = int(obj["n"])
        edges = obj["edges"]
    except (KeyError, TypeError, ValueError) as e:
        raise GraphError(f"malformed graph object: {e}") from e
    if n < 0:
        raise GraphError("vertex count must be nonnegative")
    W = np.zeros((n, n))
    seen = set()
    for entry in edges:
        if len(entry) != 3:
            raise GraphError(f"edge entry must be [i, j, w], got {entry!r}")
        i, j, w = int(entry[0]), int(entry[1]), float(entry[2])
        if not (0 <= i < j < n):
            raise GraphError(f"edge ({i}, {j}) must satisfy 0 <= i < j < n={n}")
        if (i, j) in seen:
            raise GraphError(f"duplicate edge ({i}, {j})")
        if not (w > 0):
            raise GraphError(f"edge ({i}, {j}) must have positive weight, got {w}")
        seen.add((i, j))
        W[i, j] = W[j, i] = w
    return build_graph(W)

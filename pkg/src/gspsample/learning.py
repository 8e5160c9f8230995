"""Learn the sensor graph from measurement snapshots under a smoothness
prior, and track Laplacian stability as measurements stream in.

The learned adjacency minimises

    sum_ij W_ij Z_ij  -  alpha * 1' log(W 1)  +  (beta / 2) * ||W||_F^2

over symmetric nonnegative zero-diagonal W, where Z holds pairwise squared
signal distances.  The log barrier on the degrees keeps every node
connected; the Frobenius term controls edge-weight spread.  The solver is
a projected proximal iteration on the upper-triangular weight vector with
spectral (Barzilai-Borwein) step lengths.  The objective is jointly
homogeneous: scaling (Z, alpha, beta) by a common factor leaves the
minimiser unchanged, which lets us rescale internally to a unit-scale
problem purely for numerical conditioning.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph, build_graph

__all__ = [
    "SignalMatrix",
    "LearnConfig",
    "ConvergenceEntry",
    "ConvergenceTrace",
    "GraphLearnError",
    "pairwise_distances",
    "learn_graph",
    "graph_objective",
    "StreamLearner",
]

log = logging.getLogger(__name__)


class GraphLearnError(RuntimeError):
    """Solver failure; carries the final relative primal change."""

    def __init__(self, message: str, final_change: float = float("nan")):
        super().__init__(message)
        self.final_change = final_change


@dataclass(frozen=True)
class SignalMatrix:
    """T x N snapshot matrix with a genuine-receipt mask.

    Rows are time snapshots, columns are per-node series.  ``observed``
    marks entries that were actually measured; entries may carry filled
    values while ``observed`` stays false (gap filling), but every observed
    entry must be finite and every NaN must be unobserved.
    """

    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        observed = np.ascontiguousarray(np.asarray(self.observed, dtype=bool))
        if values.ndim != 2 or observed.shape != values.shape:
            raise ValueError("values and observed must be 2-D arrays of equal shape")
        if values.shape[0] < 1 or values.shape[1] < 2:
            raise ValueError(f"need T >= 1 and N >= 2, got shape {values.shape}")
        if not np.all(np.isfinite(values[observed])):
            raise ValueError("observed entries must be finite")
        if np.any(np.isnan(values) & observed):
            raise ValueError("NaN entries cannot be marked observed")
        values.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)

    @classmethod
    def full(cls, values) -> "SignalMatrix":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape, dtype=bool))

    @property
    def n_snapshots(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    @property
    def fully_observed(self) -> bool:
        return bool(self.observed.all())


@dataclass(frozen=True)
class LearnConfig:
    """Weights and solver controls for graph learning."""

    alpha: float = 1.0          # log-barrier weight on node degrees
    beta: float = 1.0           # Frobenius penalty on edge weights
    max_iters: int = 5000
    tol: float = 1e-6           # relative primal-change stopping threshold
    prune_rel: float = 1e-4     # drop edges below this fraction of the max weight

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (0 <= self.prune_rel < 1):
            raise ValueError("prune_rel must lie in [0, 1)")


def pairwise_distances(X: SignalMatrix) -> np.ndarray:
    """Pairwise squared signal distances between node series.

    ``Z[i, j]`` is the mean squared difference over snapshots where both
    nodes were genuinely observed, scaled by the total snapshot count T, so
    fully observed data yields the plain sum of squared differences.  Pairs
    with no common observation get ``+inf`` (no edge learnable there).
    """
    if X.n_nodes < 2:
        raise ValueError("need at least two nodes")
    T = X.n_snapshots
    vals = np.where(X.observed, X.values, 0.0)
    obs = X.observed.astype(float)
    cross = vals.T @ vals                   # sum x_i x_j over common snapshots
    sq = (vals * vals).T @ obs              # sum x_i^2 over common snapshots
    counts = obs.T @ obs
    ssq = sq + sq.T - 2.0 * cross
    ssq = 0.5 * (ssq + ssq.T)
    np.clip(ssq, 0.0, None, out=ssq)        # guard cancellation noise
    with np.errstate(invalid="ignore", divide="ignore"):
        Z = np.where(counts > 0, T * ssq / np.maximum(counts, 1.0), np.inf)
    np.fill_diagonal(Z, 0.0)
    return Z


def _learnable_pairs(Z: np.ndarray):
    n = Z.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    finite = np.isfinite(Z[iu, ju])
    return iu[finite], ju[finite]


def graph_objective(W: np.ndarray, Z: np.ndarray, cfg: LearnConfig) -> float:
    """Learning objective at W; +inf if W is infeasible for this Z.

    The log barrier runs over nodes that have at least one learnable pair;
    isolated nodes (all-infinite Z rows) are excluded, mirroring
    :func:`learn_graph`.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    iu, ju = _learnable_pairs(Z)
    active = np.zeros(n, dtype=bool)
    active[iu] = True
    active[ju] = True
    w = W[iu, ju]
    if np.any(w < 0):
        return float("inf")
    blocked = ~np.isfinite(Z) & (W > 0)
    np.fill_diagonal(blocked, False)
    if np.any(blocked):
        return float("inf")
    degrees = W.sum(axis=1)[active]
    if np.any(degrees <= 0):
        return float("inf")
    fit = 2.0 * float(w @ Z[iu, ju])
    barrier = -cfg.alpha * float(np.sum(np.log(degrees)))
    frob = cfg.beta * float(w @ w)
    return fit + barrier + frob


def _solve_log_degree_weights(z, iu, ju, n_active, alpha, beta, max_iters, tol):
    """Projected proximal iteration on the upper-triangular weight vector.

    Spectral projected gradient: project the Barzilai-Borwein-scaled
    gradient step onto w >= 0, then backtrack along the projection arc
    under a non-monotone descent test.  The log barrier makes the
    objective +inf wherever a degree hits zero, so backtracking keeps all
    degrees positive.  Returns (w, n_iters, final_rel_change, converged);
    convergence means the full (unshrunk) step moved the iterate by less
    than ``tol`` in relative norm.
    """
    m = z.shape[0]

    def degree(wv):
        return np.bincount(iu, weights=wv, minlength=n_active) + \
            np.bincount(ju, weights=wv, minlength=n_active)

    def objective(wv, d):
        if np.any(d <= 0.0):
            return float("inf")
        return float(2.0 * (z @ wv) - alpha * np.log(d).sum() + beta * (wv @ wv))

    def gradient(wv, d):
        inv = alpha / d
        return 2.0 * z - (inv[iu] + inv[ju]) + 2.0 * beta * wv

    w = np.full(m, 1.0 / max(n_active - 1, 1))
    d = degree(w)
    f = objective(w, d)
    g = gradient(w, d)
    t = 1.0 / max(float(np.abs(g).max()), 1.0)
    history = [f]
    rel = float("inf")
    for it in range(1, max_iters + 1):
        direction = np.maximum(w - t * g, 0.0) - w
        slope = float(g @ direction)
        f_ref = max(history[-10:])
        step = 1.0
        for _ in range(60):
            cand = w + step * direction
            f_cand = objective(cand, degree(cand))
            if f_cand <= f_ref + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            raise GraphLearnError("line search failed; objective not improvable",
                                  final_change=rel)
        w_prev, g_prev = w, g
        w = w + step * direction
        d = degree(w)
        f = objective(w, d)
        g = gradient(w, d)
        history.append(f)
        dw = w - w_prev
        dg = g - g_prev
        curvature = float(dw @ dg)
        t = float(dw @ dw) / curvature if curvature > 1e-300 else 1.0
        t = min(max(t, 1e-12), 1e12)
        rel = float(np.linalg.norm(dw) / max(np.linalg.norm(w_prev), 1e-12))
        if rel < tol and step == 1.0:
            return w, it, rel, True
    return w, max_iters, rel, False


def learn_graph(Z: np.ndarray, cfg: LearnConfig = LearnConfig()) -> Graph:
    """Learn the graph whose weights minimise the smoothness objective.

    ``Z`` must be symmetric, nonnegative, zero-diagonal; ``+inf`` entries
    mark pairs with no common observation and force the weight to zero.
    Nodes whose Z row is entirely infinite are kept as isolated vertices
    and reported through the module logger.  Edges below
    ``prune_rel * max(W)`` are pruned before the graph is assembled.
    """
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    if Z.ndim != 2 or Z.shape[1] != n or n < 2:
        raise ValueError(f"Z must be square with n >= 2, got shape {Z.shape}")
    finite = np.isfinite(Z)
    if not np.allclose(np.where(finite, Z, 0.0), np.where(finite.T, Z.T, 0.0),
                       atol=1e-9, rtol=1e-9) or not np.array_equal(finite, finite.T):
        raise ValueError("Z must be symmetric")
    if np.any(Z[finite] < 0) or np.any(np.diagonal(Z) != 0):
        raise ValueError("Z must be nonnegative with a zero diagonal")

    iu, ju = _learnable_pairs(Z)
    active = np.zeros(n, dtype=bool)
    active[iu] = True
    active[ju] = True
    isolated = np.nonzero(~active)[0]
    if isolated.size:
        log.warning("nodes %s have no commonly observed partner; kept with zero edges",
                    isolated.tolist())
    if iu.size == 0:
        raise GraphLearnError("no learnable node pair (all distances infinite)")

    z = Z[iu, ju]
    scale = float(z.mean())
    if not (np.isfinite(scale) and scale > 0):
        scale = 1.0
    # Conditioning: substituting w = (alpha/scale) u and dividing the
    # objective by alpha gives an equivalent problem with unit-mean
    # distances and unit barrier weight, whose minimiser u is O(1)
    # regardless of the raw data scale.  The argmin correspondence is
    # exact, so this changes nothing about the returned graph.
    w_scale = cfg.alpha / scale
    beta_hat = cfg.beta * cfg.alpha / (scale * scale)

    remap = -np.ones(n, dtype=int)
    remap[active] = np.arange(int(active.sum()))
    u, iters, rel, converged = _solve_log_degree_weights(
        z / scale, remap[iu], remap[ju], int(active.sum()),
        1.0, beta_hat, cfg.max_iters, cfg.tol)
    w = w_scale * u
    if not converged:
        raise GraphLearnError(
            f"no convergence in {cfg.max_iters} iterations "
            f"(final relative change {rel:.3e}, tol {cfg.tol:g})",
            final_change=rel)

    W = np.zeros((n, n))
    W[iu, ju] = w
    W += W.T
    pre_prune_degrees = W.sum(axis=1)
    if np.any(pre_prune_degrees[active] <= 0):
        raise GraphLearnError("log barrier failed to keep all active degrees positive")
    wmax = w.max() if w.size else 0.0
    if wmax > 0 and cfg.prune_rel > 0:
        W[W < cfg.prune_rel * wmax] = 0.0
    return build_graph(W)


@dataclass(frozen=True)
class ConvergenceEntry:
    snapshots_seen: int
    rel_change: float
    converged: bool


@dataclass
class ConvergenceTrace:
    """Relative Laplacian change per stream update, plus convergence flag."""

    snapshots_seen: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)
    converged: bool = False

    def append(self, entry: ConvergenceEntry):
        self.snapshots_seen.append(entry.snapshots_seen)
        self.rel_change.append(entry.rel_change)
        self.converged = entry.converged

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["snapshots_seen", "rel_change"])
            for seen, change in zip(self.snapshots_seen, self.rel_change):
                writer.writerow([seen, repr(float(change))])


class StreamLearner:
    """Accumulate snapshot batches and re-learn the graph after each one.

    Each update recomputes pairwise distances over all data seen so far
    (per-snapshot means, so the learning problem is stable as the stream
    grows), re-solves for the graph, and records the relative Frobenius
    change of the Laplacian.  ``converged`` requires the change to sit
    below ``stability_threshold`` on two consecutive updates and every
    node to have reported at least once.
    """

    def __init__(self, n_nodes: int, cfg: LearnConfig = LearnConfig(),
                 stability_threshold: float = 1e-3):
        if n_nodes < 2:
            raise ValueError("need at least two nodes")
        if not stability_threshold > 0:
            raise ValueError("stability_threshold must be positive")
        self.n_nodes = n_nodes
        self.cfg = cfg
        self.stability_threshold = stability_threshold
        self.trace = ConvergenceTrace()
        self.graph: Graph | None = None
        self._values = np.empty((0, n_nodes))
        self._observed = np.empty((0, n_nodes), dtype=bool)
        self._prev_L: np.ndarray | None = None

    @property
    def snapshots_seen(self) -> int:
        return self._values.shape[0]

    @property
    def coverage_complete(self) -> bool:
        return bool(self._observed.any(axis=0).all())

    def update(self, batch: SignalMatrix) -> ConvergenceEntry:
        if batch.n_nodes != self.n_nodes:
            raise ValueError(f"batch has {batch.n_nodes} nodes, expected {self.n_nodes}")
        self._values = np.vstack([self._values, batch.values])
        self._observed = np.vstack([self._observed, batch.observed])
        data = SignalMatrix(self._values, self._observed)
        Z = pairwise_distances(data) / data.n_snapshots
        self.graph = learn_graph(Z, self.cfg)
        L = self.graph.L
        if self._prev_L is None:
            rel = float("inf")
        else:
            denom = max(float(np.linalg.norm(self._prev_L)), 1e-300)
            rel = float(np.linalg.norm(L - self._prev_L) / denom)
        self._prev_L = L
        changes = self.trace.rel_change + [rel]
        stable = (len(changes) >= 2
                  and changes[-1] < self.stability_threshold
                  and changes[-2] < self.stability_threshold)
        entry = ConvergenceEntry(
            snapshots_seen=self.snapshots_seen,
            rel_change=rel,
            converged=bool(stable and self.coverage_complete),
        )
        self.trace.append(entry)
        return entry

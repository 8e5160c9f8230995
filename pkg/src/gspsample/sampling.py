"""Vertex importance scoring, bandwidth estimation, norm-embedding checks,
and the greedy partition of the vertex set into disjoint sampling sets.

The partition walks the vertices in descending importance (cumulative
coherence of the low-frequency eigenvector block), growing the current set
one vertex at a time until reconstruction from that set alone meets the
RMSE threshold, then starts the next set.  Every vertex ends up in exactly
one set, so activating the sets round-robin spreads sensing duty evenly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, SpectralBasis
from .reconstruction import ReconstructionConfig, reconstruct_many

__all__ = [
    "SamplingMask",
    "BandwidthEstimate",
    "EmbeddingCheck",
    "SamplingPlan",
    "PartitionError",
    "estimate_bandwidth",
    "coherence_scores",
    "verify_embedding",
    "partition",
    "SweepRow",
    "SweepResult",
    "set_count_sweep",
]


@dataclass(frozen=True)
class SamplingMask:
    """Boolean vertex-selection vector."""

    m: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(np.asarray(self.m))
        if m.dtype != bool or m.ndim != 1:
            raise ValueError("mask must be a 1-D boolean array")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def from_indices(cls, indices, n: int) -> "SamplingMask":
        m = np.zeros(n, dtype=bool)
        m[np.asarray(indices, dtype=int)] = True
        return cls(m)

    @property
    def n(self) -> int:
        return self.m.shape[0]

    @property
    def n_sampled(self) -> int:
        return int(self.m.sum())


@dataclass(frozen=True)
class BandwidthEstimate:
    """Number of leading spectral components needed to carry the signal energy."""

    k: int
    energy_fraction: float


@dataclass(frozen=True)
class EmbeddingCheck:
    """Outcome of the norm-embedding test over a snapshot set.

    ``worst_ratio`` is the rescaled masked-to-full energy ratio farthest
    from 1; ``skipped`` counts all-zero snapshots where the ratio is
    undefined.
    """

    satisfied: bool
    worst_ratio: float
    skipped: int


class PartitionError(RuntimeError):
    """Partitioning aborted; carries the partial plan for diagnosis.

    ``partial_plan`` is a plain dict (closed sets, their RMSE, the node
    order walked so far) because an aborted run cannot satisfy the
    full-coverage invariant of :class:`SamplingPlan`.
    """

    def __init__(self, message: str, partial_plan: dict | None = None):
        super().__init__(message)
        self.partial_plan = partial_plan


@dataclass(frozen=True)
class SamplingPlan:
    """Ordered disjoint vertex sets with their achieved mean RMSE."""

    epsilon: float
    node_order: tuple
    sets: tuple
    set_rmse: tuple
    last_set_incomplete: bool

    def __post_init__(self):
        object.__setattr__(self, "node_order", tuple(int(v) for v in self.node_order))
        object.__setattr__(self, "sets", tuple(tuple(int(v) for v in s) for s in self.sets))
        object.__setattr__(self, "set_rmse", tuple(float(r) for r in self.set_rmse))
        if len(self.sets) != len(self.set_rmse):
            raise ValueError("one RMSE per set required")
        flat = [v for s in self.sets for v in s]
        if len(flat) != len(set(flat)):
            raise ValueError("sets must be pairwise disjoint")
        if sorted(flat) != sorted(self.node_order) or sorted(flat) != list(range(len(flat))):
            raise ValueError("sets must cover every vertex exactly once")
        for i, r in enumerate(self.set_rmse):
            incomplete_last = self.last_set_incomplete and i == len(self.set_rmse) - 1
            if r > self.epsilon and not incomplete_last:
                raise ValueError(f"set {i} exceeds epsilon without being flagged")

    @property
    def n_sets(self) -> int:
        return len(self.sets)

    @property
    def n(self) -> int:
        return len(self.node_order)

    def masks(self):
        return [SamplingMask.from_indices(s, self.n) for s in self.sets]

    def to_json_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "node_order": list(self.node_order),
            "sets": [list(s) for s in self.sets],
            "set_rmse": list(self.set_rmse),
            "last_set_incomplete": self.last_set_incomplete,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SamplingPlan":
        return cls(
            epsilon=float(obj["epsilon"]),
            node_order=tuple(obj["node_order"]),
            sets=tuple(tuple(s) for s in obj["sets"]),
            set_rmse=tuple(obj["set_rmse"]),
            last_set_incomplete=bool(obj["last_set_incomplete"]),
        )


def _snapshot_values(X, n: int | None = None) -> np.ndarray:
    observed = getattr(X, "observed", None)
    values = np.asarray(getattr(X, "values", X), dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    if values.shape[0] == 0:
        raise ValueError("need at least one snapshot")
    if observed is not None and not np.all(observed):
        raise ValueError("snapshots must be fully observed (fill gaps first)")
    if not np.all(np.isfinite(values)):
        raise ValueError("snapshots contain non-finite entries")
    if n is not None and values.shape[1] != n:
        raise ValueError(f"snapshot width {values.shape[1]} does not match n={n}")
    return values


def estimate_bandwidth(basis: SpectralBasis, X, energy_frac: float = 0.95) -> BandwidthEstimate:
    """Smallest k whose leading spectral components carry the energy target.

    Energy is the per-component mean squared GFT coefficient across
    snapshots.  An all-zero snapshot set degenerates to k = 1.
    """
    if not (0 < energy_frac <= 1):
        raise ValueError("energy_frac must lie in (0, 1]")
    values = _snapshot_values(X, basis.n)
    spectra = values @ basis.U
    energy = np.mean(spectra * spectra, axis=0)
    cum = np.cumsum(energy)
    total = cum[-1]
    if total <= 0:
        return BandwidthEstimate(k=1, energy_fraction=1.0)
    reached = np.nonzero(cum >= energy_frac * total)[0]
    k = int(reached[0]) + 1 if reached.size else basis.n
    return BandwidthEstimate(k=k, energy_fraction=float(cum[k - 1] / total))


def coherence_scores(basis: SpectralBasis, k: int) -> np.ndarray:
    """Per-vertex energy concentration of the first k spectral components.

    Squared row norms of the leading eigenvector block, summing to k.  When
    k cuts inside a repeated eigenvalue the block's basis is an arbitrary
    eigensolver choice, so that group contributes its (basis-independent)
    eigenspace projector scaled by the fraction taken; on vertex-transitive
    graphs this keeps the scores uniform for every k.
    """
    if not (1 <= k <= basis.n):
        raise ValueError(f"k must lie in [1, {basis.n}], got {k}")
    lambdas = basis.lambdas
    tol = 1e-8 * max(1.0, float(abs(lambdas[-1])))
    group_end = k
    while group_end < basis.n and lambdas[group_end] - lambdas[group_end - 1] <= tol:
        group_end += 1
    group_start = k - 1
    while group_start > 0 and lambdas[group_start] - lambdas[group_start - 1] <= tol:
        group_start -= 1
    whole = basis.U[:, :group_start]
    scores = np.sum(whole * whole, axis=1)
    group = basis.U[:, group_start:group_end]
    if group.shape[1]:
        fraction = (k - group_start) / group.shape[1]
        scores = scores + fraction * np.sum(group * group, axis=1)
    return scores


def importance_order(basis: SpectralBasis, k: int) -> np.ndarray:
    """Vertices by descending coherence score, ties by ascending index.

    Scores within 1e-9 (relative) are treated as tied so that rounding
    noise cannot scramble the index-based tie-break.
    """
    scores = coherence_scores(basis, k)
    quantum = 1e-9 * max(1.0, float(scores.max()))
    snapped = np.round(scores / quantum)
    return np.lexsort((np.arange(basis.n), -snapped))


def verify_embedding(mask: SamplingMask, X, delta: float) -> EmbeddingCheck:
    """Empirically test the norm-preservation condition on every snapshot.

    For each snapshot x the rescaled sampled energy (N/n)||x_S||^2 must lie
    within (1 +- delta) of ||x||^2.  All-zero snapshots are skipped and
    counted.
    """
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    if mask.n_sampled < 1:
        raise ValueError("mask must sample at least one vertex")
    values = _snapshot_values(X, mask.n)
    factor = mask.n / mask.n_sampled
    satisfied = True
    worst = float("nan")
    worst_dev = -1.0
    skipped = 0
    for row in values:
        den = float(np.dot(row, row))
        if den == 0.0:
            skipped += 1
            continue
        sampled = row[mask.m]
        num = float(np.dot(sampled, sampled))
        ratio = factor * (num / den)
        if not ((1.0 - delta) <= ratio <= (1.0 + delta)):
            satisfied = False
        dev = abs(ratio - 1.0)
        if dev > worst_dev:
            worst_dev = dev
            worst = ratio
    return EmbeddingCheck(satisfied=satisfied, worst_ratio=worst, skipped=skipped)


def _mean_rmse(values: np.ndarray, estimates: np.ndarray) -> float:
    diff = estimates - values
    return float(np.mean(np.sqrt(np.mean(diff * diff, axis=1))))


def partition(g: Graph, basis: SpectralBasis, X, epsilon: float,
              recon_cfg: ReconstructionConfig = ReconstructionConfig(),
              energy_frac: float = 0.95) -> SamplingPlan:
    """Greedy split of all vertices into disjoint sets meeting an RMSE bound.

    Vertices are ranked once by descending coherence (bandwidth from the
    snapshots at ``energy_frac``).  The current set grows along that
    ranking until the mean per-snapshot RMSE of reconstructing the
    evaluation snapshots from the set alone drops to ``epsilon``; the set
    is then closed and the next one starts.  If the ranking runs out
    mid-set the final set is flagged instead of rejected.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    values = _snapshot_values(X, g.n)
    if basis.n != g.n:
        raise ValueError("basis size does not match graph")
    k = estimate_bandwidth(basis, values, energy_frac).k
    order = importance_order(basis, k)

    sets: list = []
    rmses: list = []
    pos = 0
    mask = np.zeros(g.n, dtype=bool)
    try:
        while pos < g.n:
            current: list = []
            mask[:] = False
            mean_rmse = float("inf")
            while pos < g.n:
                vertex = int(order[pos])
                current.append(vertex)
                mask[vertex] = True
                pos += 1
                estimates = reconstruct_many(g, mask, values, recon_cfg)
                mean_rmse = _mean_rmse(values, estimates)
                if mean_rmse <= epsilon:
                    break
            sets.append(tuple(current))
            rmses.append(mean_rmse)
    except Exception as e:
        partial = {
            "epsilon": epsilon,
            "node_order": [int(v) for v in order],
            "sets": [list(s) for s in sets],
            "set_rmse": list(rmses),
        }
        raise PartitionError(f"reconstruction failed while growing set {len(sets)}: {e}",
                             partial_plan=partial) from e

    return SamplingPlan(
        epsilon=epsilon,
        node_order=tuple(int(v) for v in order),
        sets=tuple(sets),
        set_rmse=tuple(rmses),
        last_set_incomplete=bool(rmses[-1] > epsilon),
    )


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    n_sets: int
    max_rmse: float
    last_set_incomplete: bool


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    plans: tuple

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epsilon", "n_sets", "max_rmse"])
            for row in self.rows:
                writer.writerow([repr(row.epsilon), row.n_sets, repr(row.max_rmse)])


def set_count_sweep(g: Graph, basis: SpectralBasis, X, epsilon_list,
                    recon_cfg: ReconstructionConfig = ReconstructionConfig(),
                    energy_frac: float = 0.95) -> SweepResult:
    """Partition once per threshold and tabulate set counts and worst RMSE."""
    eps = [float(e) for e in epsilon_list]
    if len(eps) == 0:
        raise ValueError("epsilon_list must not be empty")
    if eps != sorted(eps):
        raise ValueError("epsilon_list must be ascending")
    rows = []
    plans = []
    for epsilon in eps:
        plan = partition(g, basis, X, epsilon, recon_cfg, energy_frac)
        rows.append(SweepRow(
            epsilon=epsilon,
            n_sets=plan.n_sets,
            max_rmse=max(plan.set_rmse),
            last_set_incomplete=plan.last_set_incomplete,
        ))
        plans.append(plan)
    return SweepResult(rows=tuple(rows), plans=tuple(plans))

"""Recover a full graph signal from a sampled vertex subset.

The estimate minimises a data-fit term on the sampled vertices plus a
quadratic total-variation penalty,

    0.5 * ||x_S - y_S||^2  +  eta * 0.5 * ||x - S x||^2,

solved in closed form through the SPD normal equations.  ``S`` is the
adjacency shift, by default normalised by its spectral radius so that a
constant-profile signal on a regular graph has zero penalty and the solve
stays well conditioned for arbitrary weight scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .graphs import Graph, GraphError, GraphSignal, shift_operator
from .learning import SignalMatrix

__all__ = [
    "ReconstructionConfig",
    "EtaGrid",
    "SingularSystemError",
    "reconstruct",
    "reconstruct_many",
    "tune_eta",
    "rmse",
]

CONDITION_LIMIT = 1e12


class SingularSystemError(RuntimeError):
    """Normal-equation matrix is singular or numerically unusable."""


@dataclass(frozen=True)
class ReconstructionConfig:
    """Smoothness weight and solve options for signal recovery."""

    eta: float = 1.0
    shift: str = "normalized"       # "raw" uses W as-is
    clamp_sampled: bool = True      # overwrite sampled vertices with their measurements

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.shift not in ("raw", "normalized"):
            raise ValueError(f"unknown shift mode {self.shift!r}")

    def with_eta(self, eta: float) -> "ReconstructionConfig":
        return ReconstructionConfig(eta=eta, shift=self.shift,
                                    clamp_sampled=self.clamp_sampled)


def _default_eta_candidates() -> tuple:
    return tuple(float(x) for x in np.logspace(-3.0, 3.0, 13))


@dataclass(frozen=True)
class EtaGrid:
    """Ascending positive candidates plus the validation split fraction."""

    candidates: tuple = None
    val_fraction: float = 0.2

    def __post_init__(self):
        cands = self.candidates
        if cands is None:
            cands = _default_eta_candidates()
        cands = tuple(float(c) for c in cands)
        if len(cands) == 0:
            raise ValueError("eta grid must not be empty")
        if any(c <= 0 for c in cands):
            raise ValueError("eta candidates must be positive")
        if list(cands) != sorted(cands):
            raise ValueError("eta candidates must be ascending")
        if not (0 < self.val_fraction < 1):
            raise ValueError("val_fraction must lie in (0, 1)")
        object.__setattr__(self, "candidates", cands)


def _as_mask(mask, n: int) -> np.ndarray:
    m = np.asarray(getattr(mask, "m", mask))
    if m.dtype != bool:
        raise ValueError("mask must be boolean")
    if m.shape != (n,):
        raise ValueError(f"mask length {m.shape} does not match n={n}")
    return m


def _normal_system(g: Graph, mask: np.ndarray, cfg: ReconstructionConfig):
    """Factor ``diag(mask) + eta * B'B`` with ``B = I - shift``."""
    B = np.eye(g.n) - shift_operator(g, cfg.shift)
    A = np.diag(mask.astype(float)) + cfg.eta * (B.T @ B)
    if not np.all(np.isfinite(A)):
        raise SingularSystemError("normal-equation matrix has non-finite entries")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularSystemError(
            f"normal-equation matrix is numerically singular (cond ~ {cond:.3e}); "
            "the unsampled part of the graph is unconstrained")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True)
    except scipy.linalg.LinAlgError as e:
        raise SingularSystemError(f"Cholesky factorisation failed: {e}") from e
    return factor


def reconstruct_many(g: Graph, mask, values: np.ndarray,
                     cfg: ReconstructionConfig) -> np.ndarray:
    """Reconstruct a batch of snapshots that share one sampling mask.

    ``values`` is T x n; only the masked columns are read.  The system
    matrix depends on the mask alone, so it is factored once and reused
    across snapshots.  Returns the T x n matrix of estimates.
    """
    mask = _as_mask(mask, g.n)
    if not mask.any():
        raise GraphError("at least one vertex must be observed")
    values = np.asarray(values, dtype=float)
    squeeze = values.ndim == 1
    if squeeze:
        values = values[None, :]
    if values.shape[1] != g.n:
        raise GraphError(f"snapshot width {values.shape[1]} does not match n={g.n}")
    if not np.all(np.isfinite(values[:, mask])):
        raise GraphError("sampled entries must be finite")
    factor = _normal_system(g, mask, cfg)
    rhs = np.zeros_like(values)
    rhs[:, mask] = values[:, mask]
    estimates = scipy.linalg.cho_solve(factor, rhs.T).T
    if cfg.clamp_sampled:
        estimates[:, mask] = values[:, mask]
    return estimates[0] if squeeze else estimates


def reconstruct(g: Graph, x: GraphSignal, cfg: ReconstructionConfig) -> GraphSignal:
    """Recover the full signal from the observed vertices of ``x``."""
    estimate = reconstruct_many(g, x.mask, x.values, cfg)
    return GraphSignal.full(estimate)


def rmse(estimate: GraphSignal, truth: GraphSignal, eval_set) -> float:
    """Root mean square error between two signals over a vertex subset.

    ``eval_set`` is a boolean mask or an index array; it must be non-empty
    and the truth signal must be observed there.
    """
    if estimate.n != truth.n:
        raise GraphError("estimate and truth lengths differ")
    sel = np.asarray(eval_set)
    if sel.dtype == bool:
        if sel.shape != (truth.n,):
            raise GraphError("boolean eval_set has wrong length")
        idx = np.nonzero(sel)[0]
    else:
        idx = sel.astype(int)
    if idx.size == 0:
        raise GraphError("eval_set must be non-empty")
    if idx.size and (idx.min() < 0 or idx.max() >= truth.n):
        raise GraphError("eval_set index out of range")
    if not truth.mask[idx].all():
        raise GraphError("truth signal is unobserved on part of eval_set")
    diff = estimate.values[idx] - truth.values[idx]
    return float(np.sqrt(np.mean(diff * diff)))


def tune_eta(g: Graph, snapshots: SignalMatrix, mask, grid: EtaGrid = EtaGrid()) -> float:
    """Pick the grid eta with the lowest mean validation RMSE.

    The trailing ``val_fraction`` of snapshot rows (a time-ordered split,
    no shuffling) are reconstructed from the masked vertices and scored on
    the hidden ones.  Candidates whose system is singular are skipped; ties
    within solver noise resolve to the smallest eta.
    """
    mask = _as_mask(mask, g.n)
    if snapshots.n_snapshots < 2:
        raise ValueError("need at least two snapshots for a train/validation split")
    if not snapshots.fully_observed:
        raise ValueError("eta tuning needs fully observed snapshots")
    n_val = max(1, int(round(grid.val_fraction * snapshots.n_snapshots)))
    val = snapshots.values[-n_val:]
    hidden = ~mask
    eval_idx = np.nonzero(hidden)[0] if hidden.any() else np.arange(g.n)

    scores = []
    for eta in grid.candidates:
        try:
            est = reconstruct_many(g, mask, val, cfg=ReconstructionConfig(
                eta=eta, shift="normalized", clamp_sampled=True))
        except SingularSystemError:
            scores.append(float("inf"))
            continue
        diff = est[:, eval_idx] - val[:, eval_idx]
        per_row = np.sqrt(np.mean(diff * diff, axis=1))
        scores.append(float(np.mean(per_row)))
    best = min(scores)
    if not np.isfinite(best):
        raise SingularSystemError("every eta candidate produced a singular system")
    tie_tol = max(1e-12, 1e-9 * best)
    for eta, score in zip(grid.candidates, scores):
        if score <= best + tie_tol:
            return float(eta)
    raise AssertionError("unreachable")

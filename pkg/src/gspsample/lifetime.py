"""Duty-cycle and lifetime accounting over a sampling plan, plus
round-robin schedule replay.

With s disjoint sampling sets activated sequentially, each sensor is on
for exactly one round in every s, so its duty cycle is 100/s percent and
the network lifetime scales linearly by s (the linear energy proxy; no
radio or battery modeling here).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graphs import Graph
from .reconstruction import ReconstructionConfig, reconstruct_many
from .sampling import SamplingPlan

__all__ = [
    "DutyCycleReport",
    "Schedule",
    "ScheduleTrace",
    "duty_cycle",
    "simulate_schedule",
    "write_duty_csv",
]


def format_significant(x: Fraction | float, digits: int = 4) -> str:
    """Render at a fixed number of significant digits, trimming exponents."""
    s = f"{float(x):.{digits}g}"
    if "e" in s or "E" in s:
        s = f"{float(s):f}".rstrip("0").rstrip(".")
    return s


@dataclass(frozen=True)
class DutyCycleReport:
    """Per-sensor duty cycle implied by round-robin set activation.

    ``duty_cycle_percent`` is the exact rational 100/n_sets;
    ``rendered`` carries the 4-significant-digit display form.
    """

    n_sets: int
    duty_cycle_percent: Fraction
    lifetime_multiplier: int

    @property
    def rendered(self) -> str:
        return format_significant(self.duty_cycle_percent, 4)

    @property
    def duty_cycle_float(self) -> float:
        return float(self.duty_cycle_percent)


def duty_cycle(plan: SamplingPlan) -> DutyCycleReport:
    """Exact duty-cycle accounting for a plan's set count."""
    if plan.n_sets < 1:
        raise ValueError("plan has no sets")
    return DutyCycleReport(
        n_sets=plan.n_sets,
        duty_cycle_percent=Fraction(100, plan.n_sets),
        lifetime_multiplier=plan.n_sets,
    )


@dataclass(frozen=True)
class Schedule:
    """Round-robin activation: round r wakes set (r mod n_sets)."""

    plan: SamplingPlan
    round_duration: int = 1     # epochs per activation round

    def __post_init__(self):
        if self.round_duration < 1:
            raise ValueError("round_duration must be at least 1")

    @property
    def n_sets(self) -> int:
        return self.plan.n_sets

    def set_for_round(self, r: int) -> tuple:
        return self.plan.sets[r % self.n_sets]

    def active_counts(self, n_rounds: int) -> np.ndarray:
        """Activations per vertex over the first n_rounds rounds."""
        counts = np.zeros(self.plan.n, dtype=int)
        for r in range(n_rounds):
            counts[list(self.set_for_round(r))] += 1
        return counts


@dataclass(frozen=True)
class ScheduleTrace:
    """Per-round reconstruction error from replaying a schedule on data."""

    set_index: np.ndarray
    round_rmse: np.ndarray
    per_set_mean_rmse: tuple

    @property
    def max_rmse(self) -> float:
        return float(np.max(self.round_rmse))

    @property
    def mean_rmse(self) -> float:
        return float(np.mean(self.round_rmse))

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["round", "set_index", "rmse"])
            for r, (s, e) in enumerate(zip(self.set_index, self.round_rmse)):
                writer.writerow([r, int(s), repr(float(e))])


def simulate_schedule(plan: SamplingPlan, X, recon_cfg: ReconstructionConfig,
                      g: Graph) -> ScheduleTrace:
    """Replay round-robin sampling over snapshot rows.

    Round r observes only the vertices of set (r mod n_sets) in snapshot
    row r, reconstructs the rest, and records the RMSE over all vertices.
    Reports the error both per round and aggregated per set (the per-set
    mean is the quantity the partition bounded, up to the thinner
    per-round snapshot subsets seen here).
    """
    values = np.asarray(getattr(X, "values", X), dtype=float)
    if values.ndim != 2 or values.shape[1] != plan.n:
        raise ValueError("snapshot matrix does not match the plan's node count")
    if not np.all(np.isfinite(values)):
        raise ValueError("snapshots must be fully valued for replay")
    if g.n != plan.n:
        raise ValueError("graph does not match the plan's node count")
    n_rounds = values.shape[0]
    set_index = np.arange(n_rounds) % plan.n_sets
    round_rmse = np.zeros(n_rounds)
    masks = plan.masks()
    for s, mask in enumerate(masks):
        rows = np.nonzero(set_index == s)[0]
        if rows.size == 0:
            continue
        est = reconstruct_many(g, mask, values[rows], recon_cfg)
        diff = est - values[rows]
        round_rmse[rows] = np.sqrt(np.mean(diff * diff, axis=1))
    per_set = tuple(
        float(np.mean(round_rmse[set_index == s])) if np.any(set_index == s) else float("nan")
        for s in range(plan.n_sets))
    return ScheduleTrace(set_index=set_index, round_rmse=round_rmse,
                         per_set_mean_rmse=per_set)


def write_duty_csv(set_counts, path):
    """Table of (n_sets, duty_pct) rows, duty at 4 significant digits."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n_sets", "duty_pct"])
        for n in set_counts:
            n = int(n)
            if n < 1:
                raise ValueError("set counts must be positive")
            writer.writerow([n, format_significant(Fraction(100, n), 4)])

"""Ingest Intel-Berkeley-style measurement files, assemble loss-aware
snapshot matrices, and generate synthetic fixtures.

The measurement file format is whitespace-separated rows of
``date time epoch mote_id temperature humidity light voltage``, one row
per received packet.  Packet loss shows up as missing (epoch, mote)
combinations; the assembled snapshot window keeps a genuine-receipt mask
alongside any gap-filled values.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .graphs import Graph, spectral_decompose
from .learning import SignalMatrix

__all__ = [
    "MeasurementRecord",
    "RejectReport",
    "DatasetError",
    "DEFAULT_UNIVERSE",
    "TEMPERATURE_RANGE",
    "parse_intel",
    "record_to_line",
    "SnapshotWindow",
    "assemble_snapshots",
    "window_to_csv",
    "synth_smooth",
    "write_surrogate_intel_file",
]

DEFAULT_UNIVERSE = tuple(range(1, 55))

# Raw Intel files carry failing-battery artifacts with temperatures above
# 100 C; readings outside this window are rejected as implausible.
TEMPERATURE_RANGE = (-20.0, 60.0)


class DatasetError(ValueError):
    """Unusable measurement input."""


@dataclass(frozen=True)
class MeasurementRecord:
    """One parsed measurement row."""

    date: dt.date
    time: dt.time
    epoch: int
    mote_id: int
    temperature: float
    humidity: float
    light: float
    voltage: float


@dataclass
class RejectReport:
    """Accepted/rejected row counts, rejected broken down by reason."""

    accepted: int = 0
    missing_fields: int = 0
    non_numeric: int = 0
    mote_out_of_range: int = 0
    implausible_temperature: int = 0

    @property
    def rejected(self) -> int:
        return (self.missing_fields + self.non_numeric
                + self.mote_out_of_range + self.implausible_temperature)

    def to_json_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "by_reason": {
                "missing_fields": self.missing_fields,
                "non_numeric": self.non_numeric,
                "mote_out_of_range": self.mote_out_of_range,
                "implausible_temperature": self.implausible_temperature,
            },
        }


def _parse_line(line: str, universe, temp_range):
    fields = line.split()
    if len(fields) != 8:
        return None, "missing_fields"
    try:
        date = dt.datetime.strptime(fields[0], "%Y-%m-%d").date()
        time = dt.datetime.strptime(fields[1], "%H:%M:%S.%f").time()
        epoch = int(fields[2])
        mote = int(fields[3])
        temperature = float(fields[4])
        humidity = float(fields[5])
        light = float(fields[6])
        voltage = float(fields[7])
    except ValueError:
        return None, "non_numeric"
    if epoch < 0 or mote not in universe:
        return None, "mote_out_of_range"
    if not (math.isfinite(temperature) and temp_range[0] <= temperature <= temp_range[1]):
        return None, "implausible_temperature"
    return MeasurementRecord(date, time, epoch, mote, temperature,
                             humidity, light, voltage), None


def parse_intel(path, universe=DEFAULT_UNIVERSE, temp_range=TEMPERATURE_RANGE):
    """Parse a measurement file into records plus a rejects report.

    Rows with missing fields, unparseable values, mote ids outside the
    universe, or implausible temperatures are dropped and counted.
    Raises :class:`DatasetError` when no row is accepted.
    """
    universe = frozenset(int(m) for m in universe)
    records = []
    report = RejectReport()
    with open(path, "r") as f:
        for line in f:
            if not line.strip():
                continue
            record, reason = _parse_line(line, universe, temp_range)
            if record is None:
                setattr(report, reason, getattr(report, reason) + 1)
            else:
                records.append(record)
                report.accepted += 1
    if not records:
        raise DatasetError(f"no accepted measurement rows in {path}")
    return records, report


def record_to_line(r: MeasurementRecord) -> str:
    """Serialize a record back to the file format (value-exact round trip)."""
    frac = f"{r.time.microsecond / 1e6:.6f}"[2:]
    return (f"{r.date.isoformat()} {r.time.strftime('%H:%M:%S')}.{frac} "
            f"{r.epoch} {r.mote_id} {r.temperature!r} {r.humidity!r} "
            f"{r.light!r} {r.voltage!r}")


@dataclass(frozen=True)
class SnapshotWindow:
    """Epoch-indexed snapshot matrix over a fixed node universe."""

    epochs: tuple
    universe: tuple
    signal: SignalMatrix
    fill_policy: str

    @property
    def n_nodes(self) -> int:
        return len(self.universe)

    def active_nodes(self) -> np.ndarray:
        """Motes with at least one genuine receipt in the window."""
        return np.asarray(self.universe)[self.signal.observed.any(axis=0)]

    def drop_silent_nodes(self):
        """Remove never-observed columns; returns (window, dropped motes)."""
        seen = self.signal.observed.any(axis=0)
        dropped = [int(m) for m in np.asarray(self.universe)[~seen]]
        if not dropped:
            return self, []
        window = SnapshotWindow(
            epochs=self.epochs,
            universe=tuple(int(m) for m in np.asarray(self.universe)[seen]),
            signal=SignalMatrix(self.signal.values[:, seen],
                                self.signal.observed[:, seen]),
            fill_policy=self.fill_policy,
        )
        return window, dropped

    def complete_rows(self) -> SignalMatrix:
        """Fully valued rows (post-fill), for reconstruction evaluation."""
        keep = np.all(np.isfinite(self.signal.values), axis=1)
        if not keep.any():
            raise DatasetError("window has no fully valued snapshot row")
        return SignalMatrix(self.signal.values[keep],
                            np.ones((int(keep.sum()), self.n_nodes), dtype=bool))


def assemble_snapshots(records, epoch_range, universe=DEFAULT_UNIVERSE,
                       fill_policy: str = "none", max_gap: int = 10) -> SnapshotWindow:
    """Grid records into one row per epoch and one column per universe mote.

    Duplicate (epoch, mote) rows resolve last-writer-wins in file order.
    ``fill_policy`` is ``"none"`` or ``"forward_fill"``; forward fill
    carries a mote's last reading over gaps of at most ``max_gap`` epochs
    and leaves the genuine-receipt mask untouched.
    """
    if not universe:
        raise DatasetError("universe must not be empty")
    start, end = int(epoch_range[0]), int(epoch_range[1])
    if end < start:
        raise DatasetError(f"empty epoch range [{start}, {end}]")
    if fill_policy not in ("none", "forward_fill"):
        raise DatasetError(f"unknown fill policy {fill_policy!r}")
    universe = tuple(int(m) for m in universe)
    col = {m: i for i, m in enumerate(universe)}
    n_rows = end - start + 1
    values = np.full((n_rows, len(universe)), np.nan)
    observed = np.zeros((n_rows, len(universe)), dtype=bool)
    for r in records:
        if start <= r.epoch <= end and r.mote_id in col:
            values[r.epoch - start, col[r.mote_id]] = r.temperature
            observed[r.epoch - start, col[r.mote_id]] = True
    if fill_policy == "forward_fill":
        for j in range(len(universe)):
            last_val = np.nan
            last_row = -1
            for i in range(n_rows):
                if observed[i, j]:
                    last_val = values[i, j]
                    last_row = i
                elif last_row >= 0 and (i - last_row) <= max_gap:
                    values[i, j] = last_val
    label = fill_policy if fill_policy == "none" else f"forward_fill(max_gap={max_gap})"
    return SnapshotWindow(
        epochs=tuple(range(start, end + 1)),
        universe=universe,
        signal=SignalMatrix(values, observed),
        fill_policy=label,
    )


def window_to_csv(window: SnapshotWindow, path):
    """Write the window values; header = mote ids, empty cell = missing."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([str(m) for m in window.universe])
        for row in window.signal.values:
            writer.writerow(["" if not np.isfinite(v) else repr(float(v)) for v in row])


def synth_smooth(g: Graph, k: int, noise_sigma: float, T: int, seed: int) -> SignalMatrix:
    """Seeded bandlimited snapshots: span of the first k eigenvectors plus noise."""
    if not (1 <= k <= g.n):
        raise ValueError(f"k must lie in [1, {g.n}], got {k}")
    if T < 1:
        raise ValueError("T must be at least 1")
    basis = spectral_decompose(g)
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((T, k))
    values = coeffs @ basis.U[:, :k].T
    if noise_sigma > 0:
        values = values + noise_sigma * rng.standard_normal((T, g.n))
    return SignalMatrix.full(values)


def write_surrogate_intel_file(path, seed: int = 0, n_epochs: int = 650,
                               n_motes: int = 54, loss_rate: float = 0.12,
                               start_epoch: int = 1):
    """Write a deterministic measurement file in the Intel data.txt format.

    Stand-in for the real Intel Berkeley Lab download when it is not
    available: motes sit on a jittered indoor grid and sample a smooth,
    slowly drifting temperature field, with independent packet loss, two
    late-joining motes, occasional failing-battery outliers (implausible
    temperatures), and a few truncated rows.  Useful for exercising the
    whole ingest-to-partition pipeline offline.
    """
    rng = np.random.default_rng(seed)
    cols = 9
    rows = (n_motes + cols - 1) // cols
    xy = np.array([[(i % cols) * 4.5, (i // cols) * 5.5] for i in range(n_motes)])
    xy = xy + rng.uniform(-0.8, 0.8, size=xy.shape)
    lx = cols * 4.5
    ly = rows * 5.5

    # Smooth spatial modes with slowly drifting amplitudes (AR(1)).  Indoor
    # temperature fields are flat: a few tenths of a degree across the floor.
    modes = np.stack([
        np.sin(2 * np.pi * xy[:, 0] / lx),
        np.cos(2 * np.pi * xy[:, 1] / ly),
        np.sin(2 * np.pi * (xy[:, 0] + xy[:, 1]) / (lx + ly)),
        xy[:, 0] / lx - 0.5,
    ])
    amp_mean = np.array([0.27, 0.22, 0.18, 0.22])
    amps = amp_mean * (1.0 + 0.08 * rng.standard_normal(amp_mean.shape))
    late_joiners = rng.choice(n_motes, size=2, replace=False)
    late_start = start_epoch + 120

    base_time = dt.datetime(2004, 2, 28, 0, 58, 46)
    lines = []
    for step, epoch in enumerate(range(start_epoch, start_epoch + n_epochs)):
        amps = amps + 0.02 * (amp_mean - amps) + 0.015 * rng.standard_normal(amps.shape)
        field_t = 19.0 + amps @ modes
        stamp = base_time + dt.timedelta(seconds=31 * step)
        for mote in range(n_motes):
            if mote in late_joiners and epoch < late_start:
                continue
            if rng.random() < loss_rate:
                continue
            jitter = rng.uniform(0, 0.9)
            when = stamp + dt.timedelta(seconds=jitter)
            temp = field_t[mote] + 0.05 * rng.standard_normal()
            u = rng.random()
            if u < 0.003:
                temp = 100.0 + 30.0 * rng.random()   # failing battery artifact
            humidity = 38.0 + 4.0 * rng.standard_normal()
            light = max(0.0, 45.0 + 20.0 * rng.standard_normal())
            voltage = 2.65 + 0.02 * rng.standard_normal()
            frac = f"{when.microsecond / 1e6:.5f}"[2:]
            line = (f"{when.date().isoformat()} {when.strftime('%H:%M:%S')}.{frac} "
                    f"{epoch} {mote + 1} {temp:.4f} {humidity:.4f} "
                    f"{light:.2f} {voltage:.5f}")
            if u > 0.997:
                line = " ".join(line.split()[:7])    # truncated transmission
            lines.append(line)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return path

"""End-to-end experiment harness: ingest, stream-learn, partition sweep,
duty-cycle table, manifest.

Runs are deterministic under a fixed config and seed; every artifact is
written atomically (temp file + rename) and hashed into the manifest so
re-runs can be compared byte for byte.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .dataset import (DEFAULT_UNIVERSE, assemble_snapshots, parse_intel,
                      window_to_csv, write_surrogate_intel_file)
from .learning import LearnConfig, SignalMatrix, StreamLearner
from .reconstruction import EtaGrid, ReconstructionConfig, tune_eta
from .sampling import SamplingMask, estimate_bandwidth, importance_order, set_count_sweep
from .graphs import graph_to_dict, spectral_decompose
from .lifetime import write_duty_csv

__all__ = [
    "ExperimentConfig",
    "ExperimentError",
    "load_config",
    "run_experiment",
]

DEFAULT_EPSILONS = (0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0)


class ExperimentError(RuntimeError):
    """Stage failure; partial artifacts stay on disk for inspection."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


@dataclass
class DatasetSection:
    source: str = "intel"            # "intel" or "surrogate"
    path: str = ""
    epoch_start: int = 1
    epoch_end: int = 650
    fill_max_gap: int = 10
    n_epochs: int = 650              # surrogate only
    loss_rate: float = 0.12          # surrogate only

    def __post_init__(self):
        if self.source not in ("intel", "surrogate"):
            raise ValueError(f"unknown dataset source {self.source!r}")
        if self.source == "intel" and not self.path:
            raise ValueError("dataset.path required for source = 'intel'")


@dataclass
class LearnSection:
    alpha: float = 1.0
    beta: float = 1.0
    tol: float = 1e-6
    max_iters: int = 5000
    prune_rel: float = 1e-4
    batch_epochs: int = 50
    stability_threshold: float = 1e-3

    def to_learn_config(self) -> LearnConfig:
        return LearnConfig(alpha=self.alpha, beta=self.beta, tol=self.tol,
                           max_iters=self.max_iters, prune_rel=self.prune_rel)


@dataclass
class ReconstructSection:
    eta: float | str = "auto"
    shift: str = "normalized"
    clamp: bool = True
    eta_grid_min: float = 1e-3
    eta_grid_max: float = 1e3
    eta_grid_points: int = 13

    def grid(self) -> EtaGrid:
        return EtaGrid(candidates=tuple(np.logspace(
            np.log10(self.eta_grid_min), np.log10(self.eta_grid_max),
            self.eta_grid_points)))


@dataclass
class ExperimentConfig:
    seed: int = 0
    epsilons: tuple = DEFAULT_EPSILONS
    energy_frac: float = 0.95
    dataset: DatasetSection = field(default_factory=DatasetSection)
    learn: LearnSection = field(default_factory=LearnSection)
    reconstruct: ReconstructSection = field(default_factory=ReconstructSection)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "epsilons": list(self.epsilons),
            "energy_frac": self.energy_frac,
            "dataset": dict(self.dataset.__dict__),
            "learn": dict(self.learn.__dict__),
            "reconstruct": dict(self.reconstruct.__dict__),
        }


def _section(cls, obj: dict, name: str):
    allowed = set(cls.__dataclass_fields__)
    data = obj.get(name, {})
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(obj: dict) -> ExperimentConfig:
    exp = obj.get("experiment", {})
    cfg = ExperimentConfig(
        seed=int(exp.get("seed", 0)),
        epsilons=tuple(float(e) for e in exp.get("epsilons", DEFAULT_EPSILONS)),
        energy_frac=float(exp.get("energy_frac", 0.95)),
        dataset=_section(DatasetSection, obj, "dataset"),
        learn=_section(LearnSection, obj, "learn"),
        reconstruct=_section(ReconstructSection, obj, "reconstruct"),
    )
    if list(cfg.epsilons) != sorted(cfg.epsilons):
        raise ValueError("experiment.epsilons must be ascending")
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read a TOML experiment config (schema documented in the README)."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as f:
        return config_from_dict(tomllib.load(f))


def _atomic_write(path: Path, writer):
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def _write_json(path: Path, obj):
    _atomic_write(path, lambda p: p.write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n"))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig, output_dir) -> dict:
    """Run the full pipeline and return the manifest dict.

    Stages: ingest (parse + window CSV + rejects report), stream graph
    learning (convergence CSV + graph JSON), vertex ordering and eta
    selection, the threshold sweep (sweep CSV + one plan JSON per
    threshold), and the duty-cycle table.  Any stage failure raises
    :class:`ExperimentError` naming the stage; artifacts written so far
    stay in place.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    notes: dict = {}
    stages_done = []

    stage = "ingest"
    try:
        if cfg.dataset.source == "surrogate":
            data_path = out / "data.txt"
            _atomic_write(data_path, lambda p: write_surrogate_intel_file(
                p, seed=cfg.seed, n_epochs=cfg.dataset.n_epochs,
                loss_rate=cfg.dataset.loss_rate,
                start_epoch=cfg.dataset.epoch_start))
        else:
            data_path = Path(cfg.dataset.path)
        records, rejects = parse_intel(data_path)
        _write_json(out / "rejects.json", rejects.to_json_dict())
        window = assemble_snapshots(
            records, (cfg.dataset.epoch_start, cfg.dataset.epoch_end),
            universe=DEFAULT_UNIVERSE, fill_policy="forward_fill",
            max_gap=cfg.dataset.fill_max_gap)
        window, dropped = window.drop_silent_nodes()
        notes["dropped_motes"] = dropped
        notes["active_motes"] = list(window.universe)
        _atomic_write(out / "window.csv", lambda p: window_to_csv(window, p))
        stages_done.append(stage)
    except Exception as e:
        raise ExperimentError(stage, str(e)) from e

    stage = "learn"
    try:
        learner = StreamLearner(window.n_nodes, cfg.learn.to_learn_config(),
                                stability_threshold=cfg.learn.stability_threshold)
        sig = window.signal
        batch = max(1, int(cfg.learn.batch_epochs))
        for lo in range(0, sig.n_snapshots, batch):
            rows = slice(lo, min(lo + batch, sig.n_snapshots))
            learner.update(SignalMatrix(sig.values[rows], sig.observed[rows]))
        graph = learner.graph
        _atomic_write(out / "convergence.csv", learner.trace.write_csv)
        _write_json(out / "graph.json", graph_to_dict(graph))
        notes["laplacian_converged"] = learner.trace.converged
        stages_done.append(stage)
    except Exception as e:
        raise ExperimentError(stage, str(e)) from e

    stage = "order"
    try:
        basis = spectral_decompose(graph)
        eval_rows = window.complete_rows()
        bw = estimate_bandwidth(basis, eval_rows, cfg.energy_frac)
        notes["bandwidth_k"] = bw.k
        notes["captured_energy"] = bw.energy_fraction
        notes["n_eval_rows"] = eval_rows.n_snapshots
        if cfg.reconstruct.eta == "auto":
            # Tune on a mask the size of a typical sampling set (top
            # coherence ranks) so the chosen eta matches the regime the
            # partition actually operates in.
            order = importance_order(basis, bw.k)
            mask = np.zeros(graph.n, dtype=bool)
            mask[order[:max(2, round(graph.n / 10))]] = True
            eta = tune_eta(graph, eval_rows, SamplingMask(mask), cfg.reconstruct.grid())
        else:
            eta = float(cfg.reconstruct.eta)
        notes["eta"] = eta
        recon_cfg = ReconstructionConfig(eta=eta, shift=cfg.reconstruct.shift,
                                         clamp_sampled=cfg.reconstruct.clamp)
        stages_done.append(stage)
    except Exception as e:
        raise ExperimentError(stage, str(e)) from e

    stage = "sweep"
    try:
        sweep = set_count_sweep(graph, basis, eval_rows, cfg.epsilons,
                                recon_cfg, cfg.energy_frac)
        _atomic_write(out / "sweep.csv", sweep.write_csv)
        for row, plan in zip(sweep.rows, sweep.plans):
            name = f"plan_eps_{row.epsilon:g}.json"
            _atomic_write(out / name, lambda p, plan=plan: p.write_text(plan.to_json()))
        stages_done.append(stage)
    except Exception as e:
        raise ExperimentError(stage, str(e)) from e

    stage = "duty"
    try:
        counts = sorted({row.n_sets for row in sweep.rows})
        _atomic_write(out / "duty.csv", lambda p: write_duty_csv(counts, p))
        stages_done.append(stage)
    except Exception as e:
        raise ExperimentError(stage, str(e)) from e

    config_dict = cfg.to_dict()
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    artifacts = sorted(p.name for p in out.iterdir()
                       if p.is_file() and p.name != "manifest.json")
    manifest = {
        "config": config_dict,
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": cfg.seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "gspsample": __version__,
        },
        "created_at": dt.datetime.now(dt.timezone.utc).isoformat(),
        "stages": stages_done,
        "notes": notes,
        "artifacts": {name: _sha256(out / name) for name in artifacts},
    }
    _write_json(out / "manifest.json", manifest)
    return manifest

"""Command-line interface.

Subcommands mirror the pipeline stages: ingest, learn, partition, sweep,
schedule, synth, and the all-in-one experiment runner.  A TOML experiment
config can seed the defaults of any subcommand (``--config``); explicit
flags always win.  Numeric defaults match the library defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dataset import (DEFAULT_UNIVERSE, assemble_snapshots, parse_intel,
                      synth_smooth, window_to_csv, write_surrogate_intel_file)
from .experiment import config_from_dict, load_config, run_experiment
from .graphs import build_graph, graph_from_dict, graph_to_dict, spectral_decompose
from .learning import LearnConfig, SignalMatrix, StreamLearner
from .reconstruction import EtaGrid, ReconstructionConfig, tune_eta
from .lifetime import Schedule, duty_cycle, simulate_schedule
from .sampling import SamplingMask, SamplingPlan, estimate_bandwidth, \
    importance_order, partition, set_count_sweep


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="seed for any randomness")
    p.add_argument("--output-dir", type=Path, default=Path("."),
                   help="directory for output artifacts")
    p.add_argument("--config", type=Path, default=None,
                   help="TOML experiment config supplying defaults")


def _add_window_args(p):
    p.add_argument("--data", type=Path, help="measurement file (data.txt format)")
    p.add_argument("--epoch-start", type=int)
    p.add_argument("--epoch-end", type=int)
    p.add_argument("--fill-max-gap", type=int,
                   help="forward-fill gap limit in epochs (default 10)")


def _add_learn_args(p):
    p.add_argument("--alpha", type=float, help="degree log-barrier weight (default 1)")
    p.add_argument("--beta", type=float, help="Frobenius penalty weight (default 1)")
    p.add_argument("--tol", type=float, help="solver stopping tolerance (default 1e-6)")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--prune-rel", type=float,
                   help="edge-pruning fraction of the max learned weight")
    p.add_argument("--batch-epochs", type=int,
                   help="stream update batch size in epochs (default 50)")


def _add_recon_args(p):
    p.add_argument("--eta", help="smoothness weight, or 'auto' to tune on the grid")
    p.add_argument("--shift-mode", choices=["raw", "normalized"])
    p.add_argument("--no-clamp", action="store_true",
                   help="do not overwrite sampled vertices with their measurements")
    p.add_argument("--eta-grid-min", type=float)
    p.add_argument("--eta-grid-max", type=float)
    p.add_argument("--eta-grid-points", type=int)


class Settings:
    """Flag values with config-file fallbacks, then library defaults."""

    def __init__(self, args):
        self.args = args
        self.cfg = load_config(args.config) if getattr(args, "config", None) else None

    def _fallback(self, section, key, default):
        if self.cfg is None:
            return default
        return getattr(getattr(self.cfg, section), key, default)

    def get(self, flag, section=None, key=None, default=None):
        value = getattr(self.args, flag, None)
        if value is not None:
            return value
        if section is not None:
            return self._fallback(section, key or flag, default)
        return default

    def window(self):
        data = self.get("data") or (Path(self.cfg.dataset.path)
                                    if self.cfg and self.cfg.dataset.path else None)
        if data is None:
            raise SystemExit("a measurement file is required (--data or --config)")
        start = self.get("epoch_start", "dataset", default=None)
        end = self.get("epoch_end", "dataset", default=None)
        if start is None or end is None:
            raise SystemExit("--epoch-start/--epoch-end (or a config) are required")
        max_gap = self.get("fill_max_gap", "dataset", default=10)
        records, rejects = parse_intel(data)
        window = assemble_snapshots(records, (start, end),
                                    universe=DEFAULT_UNIVERSE,
                                    fill_policy="forward_fill", max_gap=max_gap)
        window, dropped = window.drop_silent_nodes()
        return window, rejects, dropped

    def learn_config(self):
        return LearnConfig(
            alpha=self.get("alpha", "learn", default=1.0),
            beta=self.get("beta", "learn", default=1.0),
            tol=self.get("tol", "learn", default=1e-6),
            max_iters=self.get("max_iters", "learn", default=5000),
            prune_rel=self.get("prune_rel", "learn", default=1e-4),
        )

    def batch_epochs(self):
        return max(1, self.get("batch_epochs", "learn", default=50))

    def eta_grid(self):
        lo = self.get("eta_grid_min", "reconstruct", default=1e-3)
        hi = self.get("eta_grid_max", "reconstruct", default=1e3)
        points = self.get("eta_grid_points", "reconstruct", default=13)
        return EtaGrid(candidates=tuple(np.logspace(np.log10(lo), np.log10(hi),
                                                    points)))

    def recon_config(self, graph, eval_rows, basis, energy_frac):
        eta = self.get("eta", "reconstruct", default=1.0)
        shift = self.get("shift_mode", "reconstruct", key="shift",
                         default="normalized")
        if getattr(self.args, "no_clamp", False):
            clamp = False
        else:
            clamp = self._fallback("reconstruct", "clamp", True)
        if isinstance(eta, str) and eta != "auto":
            eta = float(eta)
        if eta == "auto":
            k = estimate_bandwidth(basis, eval_rows, energy_frac).k
            order = importance_order(basis, k)
            mask = np.zeros(graph.n, dtype=bool)
            mask[order[:max(2, round(graph.n / 10))]] = True
            eta = tune_eta(graph, eval_rows, SamplingMask(mask), self.eta_grid())
            print(f"tuned eta = {eta:g}")
        return ReconstructionConfig(eta=float(eta), shift=shift,
                                    clamp_sampled=bool(clamp))


def _learn_stream(window, settings):
    learner = StreamLearner(window.n_nodes, settings.learn_config())
    sig = window.signal
    step = settings.batch_epochs()
    for lo in range(0, sig.n_snapshots, step):
        rows = slice(lo, min(lo + step, sig.n_snapshots))
        learner.update(SignalMatrix(sig.values[rows], sig.observed[rows]))
    return learner


def cmd_ingest(args):
    settings = Settings(args)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    window, rejects, dropped = settings.window()
    window_to_csv(window, out / "window.csv")
    (out / "rejects.json").write_text(
        json.dumps(rejects.to_json_dict(), indent=2, sort_keys=True) + "\n")
    print(f"accepted {rejects.accepted} rows, rejected {rejects.rejected}; "
          f"{window.n_nodes} active motes (dropped {dropped})")
    print(f"wrote {out / 'window.csv'} and {out / 'rejects.json'}")


def cmd_learn(args):
    settings = Settings(args)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    window, _, dropped = settings.window()
    learner = _learn_stream(window, settings)
    learner.trace.write_csv(out / "convergence.csv")
    (out / "graph.json").write_text(
        json.dumps(graph_to_dict(learner.graph), indent=2, sort_keys=True) + "\n")
    print(f"learned graph on {learner.graph.n} nodes "
          f"(converged: {learner.trace.converged}, dropped motes: {dropped})")
    print(f"wrote {out / 'graph.json'} and {out / 'convergence.csv'}")


def _graph_window_basis(args, settings):
    window, _, _ = settings.window()
    graph = graph_from_dict(json.loads(args.graph.read_text()))
    if graph.n != window.n_nodes:
        raise SystemExit(f"graph has {graph.n} nodes but window has {window.n_nodes}")
    return graph, window.complete_rows(), spectral_decompose(graph)


def cmd_partition(args):
    settings = Settings(args)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    graph, eval_rows, basis = _graph_window_basis(args, settings)
    energy_frac = args.energy_frac if args.energy_frac is not None else \
        (settings.cfg.energy_frac if settings.cfg else 0.95)
    recon_cfg = settings.recon_config(graph, eval_rows, basis, energy_frac)
    plan = partition(graph, basis, eval_rows, args.epsilon, recon_cfg,
                     energy_frac=energy_frac)
    path = out / f"plan_eps_{args.epsilon:g}.json"
    path.write_text(plan.to_json())
    report = duty_cycle(plan)
    print(f"epsilon {args.epsilon:g}: {plan.n_sets} sets, "
          f"duty cycle {report.rendered}% "
          f"(last set incomplete: {plan.last_set_incomplete})")
    print(f"wrote {path}")


def cmd_sweep(args):
    settings = Settings(args)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    graph, eval_rows, basis = _graph_window_basis(args, settings)
    energy_frac = args.energy_frac if args.energy_frac is not None else \
        (settings.cfg.energy_frac if settings.cfg else 0.95)
    recon_cfg = settings.recon_config(graph, eval_rows, basis, energy_frac)
    epsilons = args.epsilons or (list(settings.cfg.epsilons) if settings.cfg else None)
    if not epsilons:
        raise SystemExit("--epsilons (or a config) is required")
    sweep = set_count_sweep(graph, basis, eval_rows, epsilons, recon_cfg,
                            energy_frac=energy_frac)
    sweep.write_csv(out / "sweep.csv")
    for row, plan in zip(sweep.rows, sweep.plans):
        (out / f"plan_eps_{row.epsilon:g}.json").write_text(plan.to_json())
        print(f"epsilon {row.epsilon:g}: {row.n_sets} sets, max RMSE {row.max_rmse:.4f}")
    print(f"wrote {out / 'sweep.csv'}")


def cmd_schedule(args):
    settings = Settings(args)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    graph, eval_rows, basis = _graph_window_basis(args, settings)
    plan = SamplingPlan.from_json_dict(json.loads(args.plan.read_text()))
    recon_cfg = settings.recon_config(graph, eval_rows, basis, 0.95)
    schedule = Schedule(plan, round_duration=args.round_duration)
    trace = simulate_schedule(plan, eval_rows, recon_cfg, graph)
    trace.write_csv(out / "schedule_rmse.csv")
    print(f"replayed {trace.round_rmse.shape[0]} rounds over {schedule.n_sets} sets: "
          f"max RMSE {trace.max_rmse:.4f}, mean {trace.mean_rmse:.4f}")
    print(f"wrote {out / 'schedule_rmse.csv'}")


def cmd_synth(args):
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "intel-like":
        path = out / "data.txt"
        write_surrogate_intel_file(path, seed=args.seed, n_epochs=args.epochs,
                                   loss_rate=args.loss_rate)
        print(f"wrote surrogate measurement file {path}")
        return
    if args.graph is not None:
        graph = graph_from_dict(json.loads(args.graph.read_text()))
    else:
        rng = np.random.default_rng(args.seed)
        W = (rng.random((args.nodes, args.nodes)) < 0.35) * rng.uniform(
            0.5, 1.5, (args.nodes, args.nodes))
        graph = build_graph(np.triu(W, 1) + np.triu(W, 1).T)
        (out / "graph.json").write_text(
            json.dumps(graph_to_dict(graph), indent=2, sort_keys=True) + "\n")
    X = synth_smooth(graph, k=args.bandwidth, noise_sigma=args.noise,
                     T=args.epochs, seed=args.seed)
    with open(out / "signals.csv", "w") as f:
        f.write(",".join(str(i) for i in range(graph.n)) + "\n")
        for row in X.values:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"wrote bandlimited signals {out / 'signals.csv'}")


def cmd_experiment(args):
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = config_from_dict({"dataset": {"source": "surrogate"}})
    if args.seed is not None:
        cfg.seed = args.seed
    manifest = run_experiment(cfg, args.output_dir)
    print(f"experiment complete: stages {manifest['stages']}")
    print(f"artifacts in {args.output_dir}: {sorted(manifest['artifacts'])}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gspsample",
        description="Sensor-network sampling-set design on learned graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse measurements and export the snapshot window")
    _add_common(p)
    _add_window_args(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("learn", help="stream-learn the graph from a window")
    _add_common(p)
    _add_window_args(p)
    _add_learn_args(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("partition", help="split sensors into disjoint sampling sets")
    _add_common(p)
    _add_window_args(p)
    _add_recon_args(p)
    p.add_argument("--graph", type=Path, required=True, help="graph JSON from 'learn'")
    p.add_argument("--epsilon", type=float, required=True, help="RMSE threshold")
    p.add_argument("--energy-frac", type=float, default=None)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("sweep", help="partition across a list of thresholds")
    _add_common(p)
    _add_window_args(p)
    _add_recon_args(p)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--epsilons", type=float, nargs="+")
    p.add_argument("--energy-frac", type=float, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schedule", help="replay a plan round-robin and trace RMSE")
    _add_common(p)
    _add_window_args(p)
    _add_recon_args(p)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--plan", type=Path, required=True, help="plan JSON from 'partition'")
    p.add_argument("--round-duration", type=int, default=1)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("synth", help="generate synthetic fixtures")
    _add_common(p)
    p.add_argument("--mode", choices=["bandlimited", "intel-like"], default="bandlimited")
    p.add_argument("--graph", type=Path, help="graph JSON (bandlimited mode)")
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--bandwidth", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--loss-rate", type=float, default=0.12)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="run the full pipeline from a TOML config")
    p.add_argument("--config", type=Path, help="TOML config (defaults to a surrogate run)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--output-dir", type=Path, default=Path("experiment-out"))
    p.set_defaults(func=cmd_experiment)

    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Run the packaged offline acceptance window end to end.

Generates the deterministic surrogate measurement file, learns the graph,
sweeps the RMSE thresholds, and writes all artifacts plus the manifest.

    python scripts/run_surrogate_experiment.py [output_dir]
"""

import sys
from pathlib import Path

from gspsample.experiment import load_config, run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "experiment-out"
    cfg = load_config(ROOT / "configs" / "surrogate_acceptance.toml")
    manifest = run_experiment(cfg, out)
    print(f"stages completed: {manifest['stages']}")
    print(f"bandwidth k = {manifest['notes']['bandwidth_k']}, "
          f"eta = {manifest['notes']['eta']}")
    print(f"artifacts written to {out}:")
    for name in sorted(manifest["artifacts"]):
        print(f"  {name}")


if __name__ == "__main__":
    main()

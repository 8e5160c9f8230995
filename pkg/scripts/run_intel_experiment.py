#!/usr/bin/env python3
"""Run the full pipeline on the real Intel Berkeley Lab measurement file.

Download data.txt (gzipped, ~34 MB) from the Intel Berkeley Research Lab
sensor-data page, then:

    python scripts/run_intel_experiment.py /path/to/data.txt [output_dir]

Uses the same learning/reconstruction settings as the offline surrogate
config; the epoch window is the first 650 sampling rounds.
"""

import sys
from pathlib import Path

from gspsample.experiment import load_config, run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main():
    if len(sys.argv) < 2:
        raise SystemExit(__doc__)
    data = Path(sys.argv[1])
    out = Path(sys.argv[2]) if len(sys.argv) > 2 else ROOT / "intel-out"
    cfg = load_config(ROOT / "configs" / "surrogate_acceptance.toml")
    cfg.dataset.source = "intel"
    cfg.dataset.path = str(data)
    manifest = run_experiment(cfg, out)
    print(f"stages completed: {manifest['stages']}")
    print(f"active motes: {len(manifest['notes']['active_motes'])}, "
          f"dropped: {manifest['notes']['dropped_motes']}")
    print(f"artifacts written to {out}")


if __name__ == "__main__":
    main()

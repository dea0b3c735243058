#!/usr/bin/env python3
"""Run the default end-to-end sweep: 512 latents, exponential PDP, 5/10/15 dB.

Writes artifacts/sweep/report.csv (one row per SNR point) and prints it.
Expects the default library at artifacts/library.json (see
build_default_library.py); pass --library to point elsewhere.
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from quantlink.cli import main

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--library", type=Path, default=Path("artifacts/library.json"))
    parser.add_argument("--out-dir", type=Path, default=Path("artifacts/sweep"))
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    config = {
        "library": str(args.library),
        "source": {"n_latents": 512, "seed": 0},
        "profile": "exp-pdp(300)",
        "snr_db": [5.0, 10.0, 15.0],
        "trials": args.trials,
        "n_sc": 512,
        "spacing_hz": 30e3,
        "seed": args.seed,
    }
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        cfg_path = fh.name
    sys.exit(main(["simulate", "--config", cfg_path, "--out-dir", str(args.out_dir), "--detail"]))

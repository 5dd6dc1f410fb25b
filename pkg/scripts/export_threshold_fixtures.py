#!/usr/bin/env python3
"""Export dashboard threshold-parity fixtures.

Writes a dense network JSON (as served on the wire) plus the engine's
kept edge set for several keep-fractions, so the dashboard's client-side
thresholding can be tested for exact agreement with the engine rule
(ceil count, |weight| descending, (i, j) tie-break).

Usage:
    python3 scripts/export_threshold_fixtures.py frontend/tests/fixtures
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from connstream.core import (EpochMatrix, FrequencyBand, MetricId,
                             normalize_network, serialize_network,
                             threshold_network)
from connstream.metrics import compute_metric
from connstream.simulate import SimulationSpec, generate

FRACTIONS = (0.05, 0.10, 0.25)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--trials", type=int, default=40)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    rec, info = generate(SimulationSpec(n_trials=args.trials),
                         seed=args.seed)
    data = rec.data[: len(rec.data_channels)].astype(np.float64)
    T = info["trial_samples"]
    epochs = [EpochMatrix(data=data[:, m:m + T], sfreq=rec.sfreq,
                          trial_index=k)
              for k, m in enumerate(info["markers"])]
    band = FrequencyBand(15, 21, rec.sfreq / 600)

    for metric in (MetricId.COH, MetricId.IMAGCOHY):
        dense = normalize_network(
            compute_metric(epochs, metric, 600, band))
        fixture = {
            "network": json.loads(serialize_network(dense)),
            "expected": {
                str(f): sorted(
                    [int(i), int(j)] for i, j in
                    zip(*(lambda n: (n.edge_i, n.edge_j))(
                        threshold_network(dense, f))))
                for f in FRACTIONS
            },
        }
        path = args.out_dir / f"threshold_{metric.value.lower()}.json"
        path.write_text(json.dumps(fixture, indent=1))
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

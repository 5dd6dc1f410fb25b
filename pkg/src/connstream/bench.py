"""Runtime characterization: metric timing versus window size, trial count,
and node count, with ordinal trend checks and CSV output.

Absolute seconds are hardware-bound and never asserted; only orderings and
scaling shapes are.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from .core import EpochMatrix, FrequencyBand, MetricId
from .metrics import ConnectivityEngine, compute_metric

CSV_COLUMNS = ["metric", "n_nodes", "window_sp", "n_trials", "storage",
               "mean_s", "std_s", "timed_out"]


@dataclass(frozen=True)
class BenchCase:
    metric: MetricId
    n_nodes: int
    window_sp: int
    n_trials: int
    n_repeats: int = 5
    storage_mode: bool = False


def synthetic_epochs(case: BenchCase, seed: int, sfreq: float = 600.0):
    rng = np.random.default_rng(seed)
    return [EpochMatrix(data=rng.standard_normal((case.n_nodes, case.window_sp)),
                        sfreq=sfreq, trial_index=k)
            for k in range(case.n_trials)]


def time_case(case: BenchCase, seed: int, nfft: int = 600,
              band: FrequencyBand | None = None, sfreq: float = 600.0,
              wall_cap_s: float = 120.0):
    """Mean/stddev seconds over n_repeats with one discarded warm-up run.

    Only the metric computation and network-container construction are
    timed; input generation is excluded.
    """
    if band is None:
        band = FrequencyBand(8, 12, sfreq / nfft)
    epochs = synthetic_epochs(case, seed, sfreq)
    samples = []
    timed_out = False

    if case.storage_mode:
        engine = ConnectivityEngine(case.n_nodes, nfft, sfreq,
                                    storage_mode=True)
        for ep in epochs:
            engine.add_trial(ep)

    def run_once():
        if case.storage_mode:
            # cached intermediates: re-finalization only
            return engine.finalize(case.metric, band)
        return compute_metric(epochs, case.metric, nfft, band)

    run_once()  # warm-up, discarded
    start_wall = time.monotonic()
    for _ in range(case.n_repeats):
        t0 = time.perf_counter()
        run_once()
        samples.append(time.perf_counter() - t0)
        if time.monotonic() - start_wall > wall_cap_s:
            timed_out = True
            break
    return float(np.mean(samples)), float(np.std(samples)), timed_out


def run_sweep(cases, seed: int, nfft: int = 600, sfreq: float = 600.0,
              band: FrequencyBand | None = None,
              wall_cap_s: float = 120.0) -> list[dict]:
    rows = []
    for case in cases:
        mean_s, std_s, timed_out = time_case(case, seed, nfft=nfft, band=band,
                                             sfreq=sfreq, wall_cap_s=wall_cap_s)
        rows.append({"metric": case.metric.value, "n_nodes": case.n_nodes,
                     "window_sp": case.window_sp, "n_trials": case.n_trials,
                     "storage": case.storage_mode, "mean_s": mean_s,
                     "std_s": std_s, "timed_out": timed_out})
    return rows


def rows_to_csv(rows) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return out.getvalue()


def csv_to_rows(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        row["n_nodes"] = int(row["n_nodes"])
        row["window_sp"] = int(row["window_sp"])
        row["n_trials"] = int(row["n_trials"])
        row["storage"] = row["storage"] in ("True", "true", "1")
        row["mean_s"] = float(row["mean_s"])
        row["std_s"] = float(row["std_s"])
        row["timed_out"] = row["timed_out"] in ("True", "true", "1")
        rows.append(row)
    return rows


SPECTRAL = [m for m in MetricId if m.is_spectral]


def assert_trends(rows) -> dict:
    """Ordinal trend checks; returns a report dict with pass/fail per check
    and the offending rows."""
    report = {"checks": [], "passed": True}

    def add(name, ok, detail=""):
        report["checks"].append({"name": name, "passed": bool(ok),
                                 "detail": detail})
        if not ok:
            report["passed"] = False

    def mean_for(metric, **filters):
        vals = [r["mean_s"] for r in rows
                if r["metric"] == metric.value and not r["timed_out"]
                and all(r[k] == v for k, v in filters.items())]
        return float(np.mean(vals)) if vals else None

    groups = {}
    for r in rows:
        if r["timed_out"]:
            continue
        key = (r["n_nodes"], r["window_sp"], r["n_trials"], r["storage"])
        groups.setdefault(key, {})[r["metric"]] = r["mean_s"]

    # COR fastest, XCOR slowest within each matched configuration
    for key, by_metric in groups.items():
        if len(by_metric) < 3:
            continue
        if MetricId.COR.value in by_metric:
            ok = by_metric[MetricId.COR.value] <= min(by_metric.values()) * 1.001
            add(f"COR fastest @{key}", ok, str(by_metric))
        if MetricId.XCOR.value in by_metric:
            ok = by_metric[MetricId.XCOR.value] >= max(by_metric.values()) * 0.999
            add(f"XCOR slowest @{key}", ok, str(by_metric))
        spectral_vals = [v for m, v in by_metric.items()
                         if MetricId(m).is_spectral]
        if len(spectral_vals) >= 2:
            ok = max(spectral_vals) <= 3.0 * min(spectral_vals)
            add(f"spectral within 3x @{key}", ok, str(by_metric))

    # fixed-resolution spectral runtime approximately flat in window size
    for metric in SPECTRAL:
        t1k = mean_for(metric, window_sp=1000)
        t5k = mean_for(metric, window_sp=5000)
        if t1k is not None and t5k is not None:
            add(f"{metric.value} flat 1000->5000 sp", t5k <= 2.0 * t1k,
                f"1000sp={t1k:.5f}s 5000sp={t5k:.5f}s")

    # runtime grows near-quadratically with node count when swept
    for metric in [MetricId.COH]:
        pts = sorted((r["n_nodes"], r["mean_s"]) for r in rows
                     if r["metric"] == metric.value and not r["timed_out"])
        nodes = sorted({n for n, _ in pts})
        if len(nodes) >= 3 and nodes[-1] >= 4 * nodes[0]:
            xs = np.log([n for n, _ in pts])
            ys = np.log([max(t, 1e-9) for _, t in pts])
            slope = float(np.polyfit(xs, ys, 1)[0])
            add(f"{metric.value} node scaling exponent", 1.7 <= slope <= 2.2,
                f"fit exponent {slope:.2f}")
    return report

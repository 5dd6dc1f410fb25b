import numpy as np

from connstream.bench import (CSV_COLUMNS, BenchCase, assert_trends,
                              csv_to_rows, rows_to_csv, run_sweep,
                              synthetic_epochs, time_case)
from connstream.core import MetricId


def tiny_cases(metrics, **kw):
    defaults = dict(n_nodes=8, window_sp=100, n_trials=2, n_repeats=2)
    defaults.update(kw)
    return [BenchCase(metric=m, **defaults) for m in metrics]


class TestTiming:
    def test_time_case_returns_stats(self):
        mean_s, std_s, timed_out = time_case(
            tiny_cases([MetricId.COH])[0], seed=0, nfft=128)
        assert mean_s > 0 and std_s >= 0 and not timed_out

    def test_storage_mode_times_finalize_only(self):
        slow = time_case(BenchCase(MetricId.COH, 8, 100, 20, n_repeats=3),
                         seed=0, nfft=128)[0]
        fast = time_case(BenchCase(MetricId.COH, 8, 100, 20, n_repeats=3,
                                   storage_mode=True), seed=0, nfft=128)[0]
        assert fast < slow  # re-finalization skips all FFT work

    def test_synthetic_epochs_deterministic(self):
        case = BenchCase(MetricId.COH, 4, 50, 3)
        a = synthetic_epochs(case, seed=5)
        b = synthetic_epochs(case, seed=5)
        assert len(a) == 3
        np.testing.assert_array_equal(a[0].data, b[0].data)


class TestCsv:
    def test_round_trip(self):
        rows = run_sweep(tiny_cases([MetricId.COR, MetricId.COH]), seed=0,
                         nfft=128)
        text = rows_to_csv(rows)
        assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
        back = csv_to_rows(text)
        assert len(back) == 2
        assert back[0]["metric"] == "COR"
        assert isinstance(back[0]["mean_s"], float)
        assert back[0]["n_nodes"] == 8


class TestTrends:
    def test_synthetic_rows_pass_and_fail(self):
        def row(metric, mean_s, n_nodes=16, window_sp=1000):
            return {"metric": metric.value, "n_nodes": n_nodes,
                    "window_sp": window_sp, "n_trials": 1, "storage": False,
                    "mean_s": mean_s, "std_s": 0.0, "timed_out": False}

        good = [row(MetricId.COR, 0.001), row(MetricId.COH, 0.010),
                row(MetricId.WPLI, 0.012), row(MetricId.XCOR, 0.500),
                row(MetricId.COH, 0.011, window_sp=5000),
                row(MetricId.WPLI, 0.013, window_sp=5000)]
        assert assert_trends(good)["passed"]

        bad = [row(MetricId.COR, 0.9), row(MetricId.COH, 0.010),
               row(MetricId.XCOR, 0.001)]
        report = assert_trends(bad)
        assert not report["passed"]
        names = [c["name"] for c in report["checks"] if not c["passed"]]
        assert any("COR fastest" in n for n in names)
        assert any("XCOR slowest" in n for n in names)

    def test_node_scaling_exponent_check(self):
        rows = []
        for n in (16, 32, 64, 128):
            rows.append({"metric": "COH", "n_nodes": n, "window_sp": 100,
                         "n_trials": 1, "storage": False,
                         "mean_s": 1e-6 * n ** 2, "std_s": 0.0,
                         "timed_out": False})
        report = assert_trends(rows)
        check = [c for c in report["checks"] if "exponent" in c["name"]]
        assert check and check[0]["passed"]

    def test_timed_out_rows_excluded(self):
        rows = [{"metric": "COR", "n_nodes": 8, "window_sp": 100,
                 "n_trials": 1, "storage": False, "mean_s": 99.0,
                 "std_s": 0.0, "timed_out": True}]
        assert assert_trends(rows)["passed"]  # nothing comparable remains

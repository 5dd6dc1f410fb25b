import time

import numpy as np
import pytest

from connstream.core import ParameterError
from connstream.preprocess import StreamError
from connstream.recording import RawRecording, load_rawx, replay, save_rawx
from connstream.simulate import SIGNAL_HZ, SimulationSpec, generate


def small_recording(seed=0, n_channels=3, n_samples=100):
    rng = np.random.default_rng(seed)
    return RawRecording(data=rng.standard_normal((n_channels, n_samples)),
                        sfreq=600.0,
                        channels=[f"ch{k}" for k in range(n_channels)],
                        trigger_channels=[])


class TestRawx:
    def test_round_trip(self, tmp_path):
        rec = small_recording()
        save_rawx(tmp_path / "rec", rec)
        back = load_rawx(tmp_path / "rec")
        np.testing.assert_array_equal(back.data, rec.data)
        assert back.sfreq == rec.sfreq
        assert back.channels == rec.channels
        assert not back.truncated

    def test_sample_major_interleave(self, tmp_path):
        rec = RawRecording(data=np.array([[1.0, 2.0], [3.0, 4.0]]),
                           sfreq=100.0, channels=["a", "b"],
                           trigger_channels=[])
        save_rawx(tmp_path / "r", rec)
        raw = np.frombuffer((tmp_path / "r.f32").read_bytes(), dtype="<f4")
        np.testing.assert_array_equal(raw, [1.0, 3.0, 2.0, 4.0])

    def test_truncated_payload_flagged(self, tmp_path):
        rec = small_recording()
        save_rawx(tmp_path / "r", rec)
        payload = (tmp_path / "r.f32").read_bytes()
        (tmp_path / "r.f32").write_bytes(payload[:-5])  # cut mid-sample
        back = load_rawx(tmp_path / "r")
        assert back.truncated
        assert back.n_samples == rec.n_samples - 1

    def test_data_channels_excludes_triggers(self):
        rec = RawRecording(data=np.zeros((4, 10)), sfreq=100.0,
                           channels=list("abcd"), trigger_channels=[3])
        assert rec.data_channels == [0, 1, 2]


class TestReplay:
    def test_blocks_reassemble_exactly(self):
        rec = small_recording(n_samples=103)
        blocks = list(replay(rec, 20, speed=0.0))
        assert blocks[-1].shape[1] == 3  # final partial block preserved
        np.testing.assert_allclose(np.concatenate(blocks, axis=1),
                                   rec.data.astype(np.float64))

    def test_speed_paces_delivery(self):
        rec = small_recording(n_samples=600)  # 1 s of data at 600 Hz
        t0 = time.monotonic()
        list(replay(rec, 300, speed=10.0))    # 10x real time -> ~0.1 s
        elapsed = time.monotonic() - t0
        assert 0.05 <= elapsed <= 0.5

    def test_truncated_raises_after_last_block(self):
        rec = small_recording()
        rec.truncated = True
        gen = replay(rec, 50, speed=0.0)
        assert next(gen).shape[1] == 50
        assert next(gen).shape[1] == 50
        with pytest.raises(StreamError):
            next(gen)

    def test_invalid_args(self):
        rec = small_recording()
        with pytest.raises(ParameterError):
            list(replay(rec, 0))
        with pytest.raises(ParameterError):
            list(replay(rec, 10, speed=-1.0))


class TestSimulation:
    def test_deterministic_per_seed(self):
        a, _ = generate(SimulationSpec(n_trials=3), seed=42)
        b, _ = generate(SimulationSpec(n_trials=3), seed=42)
        c, _ = generate(SimulationSpec(n_trials=3), seed=43)
        np.testing.assert_array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_layout_and_markers(self):
        spec = SimulationSpec(n_trials=5)
        rec, info = generate(spec, seed=1)
        assert rec.n_channels == 17
        assert rec.channels[-1] == "TRIG"
        assert rec.trigger_channels == [16]
        assert len(info["markers"]) == 5
        assert info["trial_samples"] == 96  # 160 ms at 600 Hz
        # triggers are unit pulses at the marker positions
        for m in info["markers"]:
            assert rec.data[16, m] == 1.0
            assert rec.data[16, m - 1] == 0.0

    def test_groups_phase_lagged(self):
        spec = SimulationSpec(n_trials=1, noise=False)
        rec, info = generate(spec, seed=0)
        m, T = info["markers"][0], info["trial_samples"]
        a = rec.data[info["group_a"][0], m:m + T].astype(float)
        b = rec.data[info["group_b"][0], m:m + T].astype(float)
        t = np.arange(T) / spec.sfreq
        np.testing.assert_allclose(a, np.sin(2 * np.pi * SIGNAL_HZ * t),
                                   atol=1e-6)
        np.testing.assert_allclose(b, np.cos(2 * np.pi * SIGNAL_HZ * t),
                                   atol=1e-6)

    def test_measured_snr_near_target(self):
        _, info = generate(SimulationSpec(n_trials=50), seed=2)
        assert abs(info["measured_snr_db"] - 11.85) < 1.0

    def test_noise_free_mode(self):
        rec, info = generate(SimulationSpec(n_trials=2, noise=False), seed=0)
        assert info["measured_snr_db"] == float("inf")
        # noise-only channels are exactly zero
        assert np.all(rec.data[6:16] == 0.0)

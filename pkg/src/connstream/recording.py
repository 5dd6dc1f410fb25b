""".rawx recordings and the timed block replayer.

A recording is a pair of files: ``<name>.json`` sidecar with the stream
metadata and ``<name>.f32`` holding little-endian float32 samples in
sample-major interleaved order (sample s, channel c at offset
(s * n_channels + c) * 4).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ParameterError
from .preprocess import StreamError


@dataclass
class RawRecording:
    data: np.ndarray            # [n_channels, n_samples] float32
    sfreq: float
    channels: list
    trigger_channels: list
    unit: str = "au"
    truncated: bool = False

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=np.float32))
        if self.sfreq <= 0:
            raise ParameterError("sfreq must be positive")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def data_channels(self) -> list:
        return [c for c in range(self.n_channels)
                if c not in self.trigger_channels]


def _base(path) -> Path:
    p = Path(path)
    if p.suffix in (".json", ".f32", ".rawx"):
        p = p.with_suffix("")
    return p


def save_rawx(path, rec: RawRecording) -> None:
    base = _base(path)
    sidecar = {
        "n_channels": rec.n_channels,
        "sfreq": rec.sfreq,
        "channels": list(rec.channels),
        "trigger_channels": list(rec.trigger_channels),
        "unit": rec.unit,
    }
    base.with_suffix(".json").write_text(json.dumps(sidecar, indent=1))
    # sample-major interleave: transpose to [n_samples, n_channels]
    payload = np.ascontiguousarray(rec.data.T, dtype="<f4")
    base.with_suffix(".f32").write_bytes(payload.tobytes())


def load_rawx(path) -> RawRecording:
    base = _base(path)
    sidecar = json.loads(base.with_suffix(".json").read_text())
    raw = base.with_suffix(".f32").read_bytes()
    n_ch = sidecar["n_channels"]
    frame = 4 * n_ch
    truncated = len(raw) % frame != 0
    n_samples = len(raw) // frame
    flat = np.frombuffer(raw[:n_samples * frame], dtype="<f4")
    data = flat.reshape(n_samples, n_ch).T.copy()
    return RawRecording(data=data, sfreq=sidecar["sfreq"],
                        channels=sidecar["channels"],
                        trigger_channels=sidecar["trigger_channels"],
                        unit=sidecar.get("unit", "au"), truncated=truncated)


def replay(recording: RawRecording, block_size: int, speed: float = 1.0):
    """Yield consecutive non-overlapping blocks, paced by ``speed``.

    speed 1 reproduces the real-time cadence block_size / sfreq; speed 0
    streams as fast as possible (benchmark mode). The final block may be
    shorter so that the concatenated blocks equal the file exactly.
    """
    if block_size < 1:
        raise ParameterError("block_size must be >= 1")
    if speed < 0:
        raise ParameterError("speed must be >= 0")
    period = block_size / recording.sfreq / speed if speed > 0 else 0.0
    next_deadline = time.monotonic()
    for start in range(0, recording.n_samples, block_size):
        if period:
            next_deadline += period
            delay = next_deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        yield recording.data[:, start:start + block_size].astype(np.float64)
    if recording.truncated:
        raise StreamError("recording payload was truncated mid-sample")

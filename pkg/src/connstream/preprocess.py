"""Online preprocessing stages: FIR filtering, trigger detection, epoching,
artifact rejection, baseline correction, and moving-average evoked responses.

Every stage is written so that replaying a recording in blocks of any size
produces the same output as one-shot processing of the whole recording.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve, firwin

from .core import EpochMatrix, ParameterError


class StreamError(RuntimeError):
    """Stream-shape violation or data loss in a streaming stage."""


# ---------------------------------------------------------------------------
# FIR design and streaming overlap-add filtering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FirFilter:
    """Linear-phase (type I) FIR filter: symmetric odd-length taps."""

    taps: np.ndarray
    kind: str                  # lowpass | highpass | bandpass
    cutoffs: tuple             # Hz
    transition_bw: float       # Hz
    sfreq: float

    @property
    def group_delay(self) -> int:
        return (len(self.taps) - 1) // 2

    def frequency_response(self, n_points: int = 512) -> tuple[np.ndarray, np.ndarray]:
        freqs = np.linspace(0.0, self.sfreq / 2.0, n_points)
        w = np.exp(-2j * np.pi * np.outer(freqs / self.sfreq,
                                          np.arange(len(self.taps))))
        return freqs, np.abs(w @ self.taps)

    def to_json(self) -> str:
        freqs, mag = self.frequency_response()
        return json.dumps({
            "kind": self.kind,
            "cutoffs": list(self.cutoffs),
            "transition_bw": self.transition_bw,
            "sfreq": self.sfreq,
            "n_taps": len(self.taps),
            "group_delay": self.group_delay,
            "taps": [float(t) for t in self.taps],
            "response_hz": [float(f) for f in freqs],
            "response_gain": [float(m) for m in mag],
        })


def taps_for_transition(transition_bw: float, sfreq: float) -> int:
    """Odd tap count for a Hamming windowed-sinc with the given transition
    width (~3.3 / normalized width)."""
    n = int(np.ceil(3.3 * sfreq / transition_bw))
    return n + 1 if n % 2 == 0 else n


def design_fir(kind: str, cutoffs, transition_bw: float,
               n_taps: int | None, sfreq: float) -> FirFilter:
    """Hamming windowed-sinc design; cutoffs sit at the transition center.

    ``n_taps=None`` sizes the filter from the transition bandwidth. The
    documented design point (lowpass 40 Hz, transition 8 Hz, auto taps,
    sfreq 600 Hz) reaches >= 40 dB attenuation beyond cutoff + bw/2.
    """
    if np.isscalar(cutoffs):
        cutoffs = (float(cutoffs),)
    else:
        cutoffs = tuple(float(c) for c in cutoffs)
    if transition_bw <= 0:
        raise ParameterError("transition_bw must be positive")
    if any(not (0.0 < c < sfreq / 2.0) for c in cutoffs):
        raise ParameterError(f"cutoffs {cutoffs} outside (0, {sfreq / 2})")
    if n_taps is None:
        n_taps = taps_for_transition(transition_bw, sfreq)
    if n_taps < 3 or n_taps % 2 == 0:
        raise ParameterError("n_taps must be odd and >= 3")
    if kind == "lowpass":
        if len(cutoffs) != 1:
            raise ParameterError("lowpass takes one cutoff")
        taps = firwin(n_taps, cutoffs[0], window="hamming", fs=sfreq)
    elif kind == "highpass":
        if len(cutoffs) != 1:
            raise ParameterError("highpass takes one cutoff")
        taps = firwin(n_taps, cutoffs[0], window="hamming",
                      pass_zero=False, fs=sfreq)
    elif kind == "bandpass":
        if len(cutoffs) != 2 or cutoffs[0] >= cutoffs[1]:
            raise ParameterError("bandpass takes (lo, hi) with lo < hi")
        taps = firwin(n_taps, cutoffs, window="hamming",
                      pass_zero=False, fs=sfreq)
    else:
        raise ParameterError(f"unknown filter kind {kind!r}")
    return FirFilter(taps=np.asarray(taps), kind=kind, cutoffs=cutoffs,
                     transition_bw=float(transition_bw), sfreq=float(sfreq))


class OverlapAddFilter:
    """Streaming FFT convolution with exact block-boundary stitching.

    Output is the causal convolution of the concatenated input blocks with
    the taps, truncated to the input length, so concatenated streaming
    output equals ``np.convolve(signal, taps)[:len(signal)]`` per channel.
    """

    def __init__(self, fir: FirFilter):
        self.fir = fir
        self._tail: np.ndarray | None = None  # [C, len(taps)-1]
        self._n_channels: int | None = None

    def process(self, block: np.ndarray) -> np.ndarray:
        block = np.atleast_2d(np.asarray(block, dtype=np.float64))
        C, S = block.shape
        if self._n_channels is None:
            self._n_channels = C
            self._tail = np.zeros((C, len(self.fir.taps) - 1))
        elif C != self._n_channels:
            raise StreamError(
                f"channel count changed mid-stream: {self._n_channels} -> {C}")
        full = fftconvolve(block, self.fir.taps[None, :], axes=1)
        L = self._tail.shape[1]  # len(taps) - 1; full has S + L columns
        if L:
            full[:, :L] += self._tail
            self._tail = full[:, S:].copy()
        return full[:, :S]


def filter_offline(fir: FirFilter, data: np.ndarray) -> np.ndarray:
    """One-shot reference: causal convolution truncated to input length."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    return fftconvolve(data, fir.taps[None, :], axes=1)[:, :data.shape[1]]


# ---------------------------------------------------------------------------
# Trigger detection and epoch extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EventMarker:
    sample_index: int      # absolute position in the stream
    event_code: int


@dataclass
class TriggerDetector:
    """Rising-edge detector on one trigger channel; block-boundary safe."""

    threshold: float
    _prev: float = field(default=0.0)
    _n_seen: int = field(default=0)

    def __post_init__(self):
        if self.threshold <= 0:
            raise ParameterError("threshold must be positive")

    def process(self, block: np.ndarray) -> list[EventMarker]:
        block = np.asarray(block, dtype=np.float64).reshape(-1)
        prev = np.concatenate(([self._prev], block[:-1]))
        edges = np.flatnonzero((prev < self.threshold) & (block >= self.threshold))
        markers = [EventMarker(self._n_seen + int(k), int(round(block[k])))
                   for k in edges]
        if block.size:
            self._prev = float(block[-1])
            self._n_seen += block.size
        return markers


def detect_triggers(block: np.ndarray, threshold: float,
                    previous_tail: float = 0.0,
                    start_index: int = 0) -> list[EventMarker]:
    """One-shot edge detection for a single block (stateless form)."""
    det = TriggerDetector(threshold, previous_tail, start_index)
    return det.process(block)


class Pending:
    """Sentinel: the epoch's end lies beyond the buffered stream head."""

    def __repr__(self):
        return "Pending"


PENDING = Pending()


class RingBuffer:
    """Multichannel ring buffer addressed by absolute sample index."""

    def __init__(self, n_channels: int, capacity: int):
        if capacity < 1:
            raise ParameterError("capacity must be >= 1")
        self._buf = np.zeros((n_channels, capacity))
        self.capacity = capacity
        self.head = 0  # absolute index of the next sample to be written

    def append(self, block: np.ndarray) -> None:
        block = np.atleast_2d(block)
        S = block.shape[1]
        if S >= self.capacity:
            self._buf[:] = block[:, -self.capacity:]
            self.head += S
            return
        pos = self.head % self.capacity
        first = min(S, self.capacity - pos)
        self._buf[:, pos:pos + first] = block[:, :first]
        if S > first:
            self._buf[:, :S - first] = block[:, first:]
        self.head += S

    def get(self, start: int, stop: int) -> np.ndarray:
        """Samples [start, stop) by absolute index."""
        if stop > self.head:
            raise IndexError("requested range not yet written")
        if start < self.head - self.capacity:
            raise StreamError(
                f"samples before {self.head - self.capacity} were overwritten")
        idx = np.arange(start, stop) % self.capacity
        return self._buf[:, idx].copy()


@dataclass(frozen=True)
class EpochSpec:
    """Trial window relative to the trigger, plus rejection and baseline."""

    tmin: float
    tmax: float
    baseline: tuple | None = None            # (b0, b1) seconds
    reject_channel: int | None = None
    reject_threshold: float | None = None
    reject_exclude: tuple = (0.0, 0.010)     # stimulus-artifact window, s

    def __post_init__(self):
        if self.tmin >= self.tmax:
            raise ParameterError("tmin must be < tmax")
        if self.baseline is not None:
            b0, b1 = self.baseline
            if b0 >= b1 or b0 < self.tmin or b1 > self.tmax:
                raise ParameterError("baseline must be a non-empty sub-window")

    def window_samples(self, sfreq: float) -> tuple[int, int]:
        return int(round(self.tmin * sfreq)), int(round(self.tmax * sfreq))


def extract_epoch(ring: RingBuffer, marker: EventMarker, spec: EpochSpec,
                  sfreq: float, trial_index: int = 0,
                  sample_shift: int = 0):
    """Cut [marker + tmin, marker + tmax) out of the buffered stream.

    ``sample_shift`` compensates the filter group delay (markers are
    detected on the unfiltered trigger channel). Returns PENDING while the
    window's end has not been buffered yet.
    """
    lo, hi = spec.window_samples(sfreq)
    start = marker.sample_index + sample_shift + lo
    stop = marker.sample_index + sample_shift + hi
    if stop > ring.head:
        return PENDING
    data = ring.get(start, stop)
    return EpochMatrix(data=data, sfreq=sfreq, t0_offset=spec.tmin,
                       trial_index=trial_index)


def reject_epoch(epoch: EpochMatrix, spec: EpochSpec) -> bool:
    """True iff the rejection channel's peak-to-peak amplitude outside the
    exclusion window exceeds the threshold."""
    if spec.reject_channel is None or spec.reject_threshold is None:
        return False
    if spec.reject_channel >= epoch.n_channels:
        raise ParameterError(
            f"reject channel {spec.reject_channel} not in epoch")
    t = epoch.t0_offset + np.arange(epoch.n_samples) / epoch.sfreq
    e0, e1 = spec.reject_exclude
    keep = (t < e0) | (t >= e1)
    if not np.any(keep):
        return False
    ch = epoch.data[spec.reject_channel][keep]
    return float(ch.max() - ch.min()) > spec.reject_threshold


def baseline_correct(epoch: EpochMatrix, spec: EpochSpec) -> EpochMatrix:
    """Subtract the per-channel mean over the baseline window."""
    if spec.baseline is None:
        return epoch
    b0, b1 = spec.baseline
    t = epoch.t0_offset + np.arange(epoch.n_samples) / epoch.sfreq
    mask = (t >= b0) & (t < b1)
    if not np.any(mask):
        raise ParameterError("baseline window contains no samples")
    mean = epoch.data[:, mask].mean(axis=1, keepdims=True)
    return EpochMatrix(data=epoch.data - mean, sfreq=epoch.sfreq,
                       t0_offset=epoch.t0_offset,
                       trial_index=epoch.trial_index)


def moving_average(epochs, n: int) -> EpochMatrix:
    """Elementwise mean of the most recent min(n, available) epochs."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    epochs = list(epochs)
    if not epochs:
        raise ParameterError("no epochs to average")
    recent = epochs[-n:]
    data = np.mean([e.data for e in recent], axis=0)
    last = recent[-1]
    return EpochMatrix(data=data, sfreq=last.sfreq, t0_offset=last.t0_offset,
                       trial_index=last.trial_index)

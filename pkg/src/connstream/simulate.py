"""Synthetic evoked-connectivity recording: two phase-lagged source groups.

Group A channels carry an 18 Hz sine, group B channels an 18 Hz cosine
(a quarter-period lag), both time-locked to a trigger pulse per trial.
Independent Gaussian noise is scaled to a target mean SNR over the
signal-carrying channels. The remaining channels carry noise only, and
the last channel is the trigger.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .recording import RawRecording

SIGNAL_HZ = 18.0


@dataclass(frozen=True)
class SimulationSpec:
    sfreq: float = 600.0
    n_trials: int = 200
    trial_sec: float = 0.160
    gap_sec: float = 0.340            # trigger-to-trigger spacing = trial + gap
    lead_in_sec: float = 0.5
    gains_a: tuple = (1.0, 0.8)
    gains_b: tuple = (1.0, 0.8, 0.7, 0.6)
    n_noise_channels: int = 10
    snr_db: float = 11.85
    amplitude: float = 1.0
    noise: bool = True

    @property
    def n_signal_channels(self) -> int:
        return len(self.gains_a) + len(self.gains_b)

    @property
    def n_channels(self) -> int:
        """Data channels + 1 trigger channel."""
        return self.n_signal_channels + self.n_noise_channels + 1

    @property
    def trigger_channel(self) -> int:
        return self.n_channels - 1

    @property
    def group_a(self) -> list:
        return list(range(len(self.gains_a)))

    @property
    def group_b(self) -> list:
        a = len(self.gains_a)
        return list(range(a, a + len(self.gains_b)))


def generate(spec: SimulationSpec, seed: int) -> tuple[RawRecording, dict]:
    """Build the recording; returns it plus measured SNR bookkeeping."""
    rng = np.random.default_rng(seed)
    sf = spec.sfreq
    trial_sp = int(round(spec.trial_sec * sf))
    spacing_sp = trial_sp + int(round(spec.gap_sec * sf))
    lead_sp = int(round(spec.lead_in_sec * sf))
    total_sp = lead_sp + spec.n_trials * spacing_sp + lead_sp

    n_data = spec.n_channels - 1
    gains = np.zeros(n_data)
    gains[spec.group_a] = spec.gains_a
    gains[spec.group_b] = spec.gains_b

    # per-channel noise std for the per-channel SNR target
    snr_lin = 10.0 ** (spec.snr_db / 10.0)
    sig_power = (gains * spec.amplitude) ** 2 / 2.0
    noise_std = np.zeros(n_data)
    nz = gains > 0
    noise_std[nz] = np.sqrt(sig_power[nz] / snr_lin)
    noise_std[~nz] = noise_std[nz].mean() if np.any(nz) else 1.0

    data = np.zeros((spec.n_channels, total_sp))
    noise = np.zeros((n_data, total_sp))
    if spec.noise:
        noise = rng.standard_normal((n_data, total_sp)) * noise_std[:, None]
    data[:n_data] = noise

    t_rel = np.arange(trial_sp) / sf
    sine = spec.amplitude * np.sin(2 * np.pi * SIGNAL_HZ * t_rel)
    cosine = spec.amplitude * np.cos(2 * np.pi * SIGNAL_HZ * t_rel)
    markers = []
    for k in range(spec.n_trials):
        s0 = lead_sp + k * spacing_sp
        markers.append(s0)
        for c in spec.group_a:
            data[c, s0:s0 + trial_sp] += gains[c] * sine
        for c in spec.group_b:
            data[c, s0:s0 + trial_sp] += gains[c] * cosine
        data[spec.trigger_channel, s0:s0 + 5] = 1.0

    # measured SNR over the signal windows of signal-carrying channels
    win = np.zeros(total_sp, dtype=bool)
    for s0 in markers:
        win[s0:s0 + trial_sp] = True
    sig_ch = np.flatnonzero(nz)
    measured_db = float("inf")
    if spec.noise and sig_ch.size:
        p_sig = np.array([np.mean((data[c, win] - noise[c, win]) ** 2)
                          for c in sig_ch])
        p_noise = np.array([np.mean(noise[c, win] ** 2) for c in sig_ch])
        measured_db = float(np.mean(10.0 * np.log10(p_sig / p_noise)))

    names = ([f"sinA{k}" for k in range(len(spec.gains_a))]
             + [f"cosB{k}" for k in range(len(spec.gains_b))]
             + [f"noise{k}" for k in range(spec.n_noise_channels)]
             + ["TRIG"])
    rec = RawRecording(data=data, sfreq=sf, channels=names,
                       trigger_channels=[spec.trigger_channel])
    info = {
        "seed": seed,
        "markers": markers,
        "trial_samples": trial_sp,
        "group_a": spec.group_a,
        "group_b": spec.group_b,
        "representative_edge": (spec.group_a[0], spec.group_b[0]),
        "measured_snr_db": measured_db,
        "signal_bin_hz": SIGNAL_HZ,
    }
    return rec, info

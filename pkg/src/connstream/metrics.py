"""Finalizers for the ten connectivity metrics and the incremental engine.

Spectral metrics are pure functions of an accumulated SpectrumSet (the
1/K trial-average factors cancel wherever possible). COR and XCOR work
on epochs directly and keep their own running sums so that incremental
updates stay O(one trial).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from . import spectral
from .core import (ConnectivityNetwork, DegenerateTrialCountError, EpochMatrix,
                   FrequencyBand, MetricId, ParameterError, band_average,
                   default_positions)
from .spectral import SpectrumSet, pair_index


def _bin_slice(bins):
    return slice(None) if bins is None else slice(bins.lo_bin, bins.hi_bin + 1)


# ---------------------------------------------------------------------------
# Per-bin spectral finalizers: [n_pairs, n_bins] arrays from accumulated sums
# ---------------------------------------------------------------------------

def cohy_bins(acc: SpectrumSet, band: FrequencyBand | None = None) -> np.ndarray:
    """Complex coherency per pair and bin; the 1/K factors cancel."""
    if acc.n_trials_accumulated < 1:
        raise DegenerateTrialCountError("no trials accumulated")
    sl = _bin_slice(band)
    pi, pj = pair_index(acc.n_channels)
    denom = np.sqrt(acc.psd_sum[pi][:, sl] * acc.psd_sum[pj][:, sl])
    out = np.zeros_like(acc.csd_sum[:, sl])
    np.divide(acc.csd_sum[:, sl], denom, out=out,
              where=denom > np.finfo(np.float64).tiny)
    return out


def coh_bins(acc: SpectrumSet, band=None) -> np.ndarray:
    return np.abs(cohy_bins(acc, band))


def imagcohy_bins(acc: SpectrumSet, band=None) -> np.ndarray:
    return cohy_bins(acc, band).imag


def plv_bins(acc: SpectrumSet, band=None) -> np.ndarray:
    if acc.n_trials_accumulated < 1:
        raise DegenerateTrialCountError("no trials accumulated")
    return np.abs(acc.plv_sum[:, _bin_slice(band)]) / acc.n_trials_accumulated


def pli_bins(acc: SpectrumSet, band=None) -> np.ndarray:
    if acc.n_trials_accumulated < 1:
        raise DegenerateTrialCountError("no trials accumulated")
    return np.abs(acc.pli_sum[:, _bin_slice(band)]) / acc.n_trials_accumulated


def uspli_bins(acc: SpectrumSet, band=None) -> np.ndarray:
    K = acc.n_trials_accumulated
    if K < 2:
        raise DegenerateTrialCountError("USPLI needs at least 2 trials")
    pli = pli_bins(acc, band)
    return (K * pli ** 2 - 1.0) / (K - 1.0)


def wpli_bins(acc: SpectrumSet, band=None) -> np.ndarray:
    if acc.n_trials_accumulated < 1:
        raise DegenerateTrialCountError("no trials accumulated")
    sl = _bin_slice(band)
    num = np.abs(acc.im_sum[:, sl])
    den = acc.abs_im_sum[:, sl]
    out = np.zeros_like(num)
    # 0/0 -> 0: no imaginary coupling at all
    np.divide(num, den, out=out, where=den > 0.0)
    return out


def dswpli_bins(acc: SpectrumSet, band=None) -> np.ndarray:
    return wpli_bins(acc, band) ** 2


_SPECTRAL_BINS = {
    MetricId.COHY: cohy_bins,
    MetricId.COH: coh_bins,
    MetricId.IMAGCOHY: imagcohy_bins,
    MetricId.PLV: plv_bins,
    MetricId.PLI: pli_bins,
    MetricId.USPLI: uspli_bins,
    MetricId.WPLI: wpli_bins,
    MetricId.DSWPLI: dswpli_bins,
}


def _build_network(metric, band, n_trials, n_channels, weights,
                   complex_weights=None, lags=None, positions=None,
                   node_ids=None, warnings=()):
    pi, pj = pair_index(n_channels)
    if positions is None:
        positions = default_positions(n_channels)
    if node_ids is None:
        node_ids = tuple(range(n_channels))
    return ConnectivityNetwork(
        metric=metric, band=band, n_trials=n_trials, node_ids=node_ids,
        positions=positions, edge_i=pi, edge_j=pj, weights=weights,
        complex_weights=complex_weights, lags=lags, warnings=tuple(warnings))


def finalize_spectral(acc: SpectrumSet, metric: MetricId, band: FrequencyBand,
                      positions=None, node_ids=None) -> ConnectivityNetwork:
    """Band-averaged network for one spectral metric.

    Only the requested band's bins are touched, which keeps per-trial
    latency independent of nfft.
    """
    if metric not in _SPECTRAL_BINS:
        raise ParameterError(f"{metric} is not a spectral metric")
    local = FrequencyBand(0, band.n_bins - 1, band.bin_hz)
    per_bin = _SPECTRAL_BINS[metric](acc, band)
    if metric is MetricId.COHY:
        cmean = per_bin.mean(axis=1)
        return _build_network(metric, band, acc.n_trials_accumulated,
                              acc.n_channels, np.abs(cmean), cmean,
                              positions=positions, node_ids=node_ids)
    weights = band_average(per_bin, local)
    return _build_network(metric, band, acc.n_trials_accumulated,
                          acc.n_channels, weights,
                          positions=positions, node_ids=node_ids)


# ---------------------------------------------------------------------------
# Time-domain metrics
# ---------------------------------------------------------------------------

def _epoch_cor(data: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Upper-triangle Pearson correlation of one epoch; zero-variance
    channels yield zero-weight edges rather than NaNs."""
    C = data.shape[0]
    d = data - data.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(d ** 2, axis=1))
    dead = np.flatnonzero(norms == 0.0)
    safe = norms.copy()
    safe[dead] = 1.0
    u = d / safe[:, None]
    full = u @ u.T
    full[dead, :] = 0.0
    full[:, dead] = 0.0
    pi, pj = pair_index(C)
    return np.clip(full[pi, pj], -1.0, 1.0), list(dead)


def cor(epochs: list[EpochMatrix], band: FrequencyBand | None = None,
        positions=None, node_ids=None) -> ConnectivityNetwork:
    """Pearson correlation per pair, averaged over epochs."""
    if not epochs:
        raise ParameterError("need at least one epoch")
    C = epochs[0].n_channels
    total = np.zeros(C * (C - 1) // 2)
    dead: set[int] = set()
    for ep in epochs:
        if ep.n_channels != C:
            raise ParameterError("epochs must have equal channel counts")
        w, d = _epoch_cor(ep.data)
        total += w
        dead.update(d)
    warnings = tuple(f"zero-variance channel {c}" for c in sorted(dead))
    if band is None:
        band = FrequencyBand(0, 0, 0.0)
    return _build_network(MetricId.COR, band, len(epochs), C,
                          total / len(epochs), positions=positions,
                          node_ids=node_ids, warnings=warnings)


def xcor_pair(x: np.ndarray, y: np.ndarray, max_lag: int,
              method: str = "fft") -> tuple[float, int]:
    """Peak of the normalized cross-correlation over lags [-max_lag, max_lag].

    Negative lag means x leads y (y is a delayed copy of x). The
    value at lag tau is sum(dx[t+tau] dy[t]) over the overlap, normalized
    by the overlap energy of x and the full energy of y. ``method="direct"``
    evaluates the sliding sums explicitly and exists as the oracle for the
    FFT path.
    """
    n = len(x)
    if max_lag >= n:
        raise ParameterError("max_lag must be < n_samples")
    dx = x - x.mean()
    dy = y - y.mean()
    ey = float(np.sum(dy ** 2))
    if ey == 0.0 or not np.any(dx):
        return 0.0, 0
    lags = np.arange(-max_lag, max_lag + 1)
    if method == "direct":
        nums = np.empty(lags.shape)
        exs = np.empty(lags.shape)
        for idx, tau in enumerate(lags):
            if tau >= 0:
                a = dx[tau:]
                b = dy[:n - tau]
            else:
                a = dx[:n + tau]
                b = dy[-tau:]
            nums[idx] = np.sum(a * b)
            exs[idx] = np.sum(a ** 2)
    else:
        # full cross-correlation via FFT; lag tau lives at index n-1+tau
        cc = fftconvolve(dx, dy[::-1])
        nums = cc[n - 1 + lags[0]: n + lags[-1]]
        # sliding overlap energy of x via cumulative sums
        csq = np.concatenate(([0.0], np.cumsum(dx ** 2)))
        exs = np.where(lags >= 0, csq[n] - csq[np.clip(lags, 0, n)],
                       csq[np.clip(n + lags, 0, n)])
    den = np.sqrt(exs * ey)
    vals = np.zeros_like(nums)
    np.divide(nums, den, out=vals, where=den > 0.0)
    k = int(np.argmax(vals))
    return float(vals[k]), int(lags[k])


def xcor(epochs: list[EpochMatrix], max_lag: int | None = None,
         band: FrequencyBand | None = None, positions=None,
         node_ids=None, method: str = "fft") -> ConnectivityNetwork:
    """Cross-correlation peak per pair, peak values averaged over epochs.

    The reported lag per edge is the rounded mean of the per-epoch peak
    lags; the scalar edge weight is |mean peak value|.
    """
    if not epochs:
        raise ParameterError("need at least one epoch")
    C = epochs[0].n_channels
    n = epochs[0].n_samples
    if max_lag is None:
        max_lag = n - 1
    pi, pj = pair_index(C)
    peak_sum = np.zeros(len(pi))
    lag_sum = np.zeros(len(pi))
    pool = ThreadPoolExecutor(max_workers=spectral.worker_count())
    try:
        for ep in epochs:
            def one(k, ep=ep):
                return xcor_pair(ep.data[pi[k]], ep.data[pj[k]], max_lag,
                                 method=method)
            for k, (v, lag) in enumerate(pool.map(one, range(len(pi)))):
                peak_sum[k] += v
                lag_sum[k] += lag
    finally:
        pool.shutdown()
    K = len(epochs)
    mean_peak = peak_sum / K
    lags = np.rint(lag_sum / K).astype(np.int64)
    if band is None:
        band = FrequencyBand(0, 0, 0.0)
    return _build_network(MetricId.XCOR, band, K, C, np.abs(mean_peak),
                          lags=lags, positions=positions, node_ids=node_ids)


# ---------------------------------------------------------------------------
# Incremental engine with storage mode
# ---------------------------------------------------------------------------

@dataclass
class TrialCache:
    """Storage mode: per-trial spectra (and epochs) keyed by trial index.

    With the cache enabled, re-finalizing any spectral metric or replaying
    the accumulation for a different trial subset issues zero new FFTs.
    """

    enabled: bool = True
    spectra: dict = field(default_factory=dict)     # trial_index -> complex [C, B]
    epochs: dict = field(default_factory=dict)      # trial_index -> EpochMatrix

    def memory_bytes(self) -> int:
        total = sum(s.nbytes for s in self.spectra.values())
        total += sum(e.data.nbytes for e in self.epochs.values())
        return total


class ConnectivityEngine:
    """Owns the running sums for all metric families over one session.

    Single-owner mutation: one thread feeds trials via ``add_trial`` /
    ``update_and_finalize``; finalizers read an immutable snapshot of the
    sums (numpy arrays are not mutated in place by finalizers).
    """

    def __init__(self, n_channels: int, nfft: int, sfreq: float,
                 storage_mode: bool = True, max_lag: int | None = None,
                 spectral_mode: str = "fixed", positions=None,
                 node_ids=None, accumulate_band: tuple | None = None):
        self.n_channels = n_channels
        self.nfft = nfft
        self.sfreq = sfreq
        self.bin_hz = sfreq / nfft
        self.spectral_mode = spectral_mode
        self.max_lag = max_lag
        self.positions = positions
        self.node_ids = node_ids
        self.cache = TrialCache(enabled=storage_mode)
        self.acc = SpectrumSet(n_channels, nfft)
        # Bin mask the spectral sums are valid over. Restricting it makes the
        # per-trial fold cost scale with band width instead of nfft; columns
        # outside the mask are back-filled from cached spectra on demand.
        # Only usable with storage mode (the cache is the source for
        # back-fill) and fixed-resolution spectra (welch caches one segment).
        self._acc_mask: np.ndarray | None = None
        if (accumulate_band is not None and storage_mode
                and spectral_mode == "fixed"):
            lo, hi = accumulate_band
            if not (0 <= lo <= hi < self.acc.n_bins):
                raise ParameterError(
                    f"accumulate_band [{lo}, {hi}] outside "
                    f"{self.acc.n_bins} bins")
            self._acc_mask = np.zeros(self.acc.n_bins, dtype=bool)
            self._acc_mask[lo:hi + 1] = True
        self._accumulate_band = (accumulate_band
                                 if self._acc_mask is not None else None)
        self._sum_trials: list[int] = []  # trial indices folded into acc
        P = self.acc.n_pairs
        self._cor_sum = np.zeros(P)
        self._xcor_peak_sum = np.zeros(P)
        self._xcor_lag_sum = np.zeros(P)
        self._xcor_trials = 0
        self._dead_channels: set[int] = set()
        self.n_trials = 0

    # -- accumulation -------------------------------------------------------

    def add_trial(self, epoch: EpochMatrix) -> None:
        if epoch.n_channels != self.n_channels:
            raise ParameterError(
                f"epoch has {epoch.n_channels} channels, engine expects "
                f"{self.n_channels}")
        idx = epoch.trial_index
        bins = self._fold_bins()
        if self.cache.enabled and idx in self.cache.spectra:
            spectral.accumulate_spectra(self.acc, self.cache.spectra[idx],
                                        bins=bins)
        else:
            spec = spectral.accumulate_epoch(self.acc, epoch,
                                             mode=self.spectral_mode,
                                             bins=bins)
            if self.cache.enabled:
                self.cache.spectra[idx] = spec
        if self.cache.enabled:
            self.cache.epochs[idx] = epoch
        self._sum_trials.append(idx)
        w, dead = _epoch_cor(epoch.data)
        self._cor_sum += w
        self._dead_channels.update(dead)
        self.n_trials += 1

    def _fold_bins(self):
        return (None if self._acc_mask is None
                else np.flatnonzero(self._acc_mask))

    def ensure_band(self, band: FrequencyBand) -> None:
        """Back-fill spectral sums for bins outside the accumulated band.

        Uses cached per-trial spectra, so no FFTs are recomputed; a no-op
        when the engine accumulates all bins or the band is already covered.
        """
        if self._acc_mask is None:
            return
        need = np.zeros_like(self._acc_mask)
        need[band.lo_bin:band.hi_bin + 1] = True
        missing = need & ~self._acc_mask
        if not missing.any():
            return
        cols = np.flatnonzero(missing)
        for idx in self._sum_trials:
            spectral.accumulate_spectra(self.acc, self.cache.spectra[idx],
                                        bins=cols, count=False)
        self._acc_mask |= need

    def _xcor_add(self, epoch: EpochMatrix) -> None:
        # XCOR is costly, so per-trial peaks are only computed while XCOR is
        # the active metric; a late switch backfills from cached epochs.
        max_lag = self.max_lag if self.max_lag is not None else epoch.n_samples - 1
        pi, pj = pair_index(self.n_channels)
        pool = ThreadPoolExecutor(max_workers=spectral.worker_count())
        try:
            def one(k):
                return xcor_pair(epoch.data[pi[k]], epoch.data[pj[k]], max_lag)
            for k, (v, lag) in enumerate(pool.map(one, range(len(pi)))):
                self._xcor_peak_sum[k] += v
                self._xcor_lag_sum[k] += lag
        finally:
            pool.shutdown()
        self._xcor_trials += 1

    # -- finalization -------------------------------------------------------

    def finalize(self, metric: MetricId, band: FrequencyBand) -> ConnectivityNetwork:
        if metric.is_spectral:
            self.ensure_band(band)
            return finalize_spectral(self.acc, metric, band,
                                     positions=self.positions,
                                     node_ids=self.node_ids)
        if self.n_trials < 1:
            raise DegenerateTrialCountError("no trials accumulated")
        if metric is MetricId.COR:
            warnings = tuple(f"zero-variance channel {c}"
                             for c in sorted(self._dead_channels))
            return _build_network(MetricId.COR, band, self.n_trials,
                                  self.n_channels,
                                  self._cor_sum / self.n_trials,
                                  positions=self.positions,
                                  node_ids=self.node_ids, warnings=warnings)
        # XCOR: backfill from cached epochs if the metric was switched late
        if self._xcor_trials < self.n_trials:
            if not self.cache.enabled:
                raise ParameterError(
                    "switching to XCOR mid-session requires storage mode")
            for idx in sorted(self.cache.epochs)[self._xcor_trials:]:
                self._xcor_add(self.cache.epochs[idx])
        mean_peak = self._xcor_peak_sum / self._xcor_trials
        lags = np.rint(self._xcor_lag_sum / self._xcor_trials).astype(np.int64)
        return _build_network(MetricId.XCOR, band, self._xcor_trials,
                              self.n_channels, np.abs(mean_peak), lags=lags,
                              positions=self.positions, node_ids=self.node_ids)

    def update_and_finalize(self, new_epoch: EpochMatrix, metric: MetricId,
                            band: FrequencyBand) -> ConnectivityNetwork:
        """Fold one new trial into the running sums and finalize ``metric``.

        Only the new trial's spectra are computed; with storage mode on,
        a subsequent metric switch re-finalizes purely from sums.
        """
        self.add_trial(new_epoch)
        if metric is MetricId.XCOR and not self.cache.enabled:
            # without storage there is nothing to backfill from later, so
            # XCOR peaks must be kept in lockstep with the trials
            self._xcor_add(new_epoch)
        return self.finalize(metric, band)

    def reset(self) -> None:
        self.__init__(self.n_channels, self.nfft, self.sfreq,
                      storage_mode=self.cache.enabled, max_lag=self.max_lag,
                      spectral_mode=self.spectral_mode,
                      positions=self.positions, node_ids=self.node_ids,
                      accumulate_band=self._accumulate_band)

    def rebuild_last(self, n_last: int) -> None:
        """Recompute sums over the most recent ``n_last`` trials from the
        cache (used by the live trial-count control)."""
        if not self.cache.enabled:
            raise ParameterError("trial-window rebuild requires storage mode")
        keep = sorted(self.cache.epochs)[-n_last:]
        cache = self.cache
        self.reset()
        self.cache = cache
        for idx in keep:
            self.add_trial(cache.epochs[idx])


# Convenience wrappers matching the one-shot operation signatures ----------

def cohy(acc, band=None, **kw):
    return finalize_spectral(acc, MetricId.COHY, _full_band(acc, band), **kw)


def coh(acc, band=None, **kw):
    return finalize_spectral(acc, MetricId.COH, _full_band(acc, band), **kw)


def imagcohy(acc, band=None, **kw):
    return finalize_spectral(acc, MetricId.IMAGCOHY, _full_band(acc, band), **kw)


def plv(acc, band=None, **kw):
    return finalize_spectral(acc, MetricId.PLV, _full_band(acc, band), **kw)


def pli(acc, band=None, **kw):
    return finalize_spectral(acc, MetricId.PLI, _full_band(acc, band), **kw)


def uspli(acc, band=None, **kw):
    return finalize_spectral(acc, MetricId.USPLI, _full_band(acc, band), **kw)


def wpli(acc, band=None, **kw):
    return finalize_spectral(acc, MetricId.WPLI, _full_band(acc, band), **kw)


def dswpli(acc, band=None, **kw):
    return finalize_spectral(acc, MetricId.DSWPLI, _full_band(acc, band), **kw)


def _full_band(acc: SpectrumSet, band):
    return band if band is not None else FrequencyBand(0, acc.n_bins - 1, 0.0)


def convergence_curve(epochs: list[EpochMatrix], metric: MetricId, nfft: int,
                      band: FrequencyBand, n_top: int = 20,
                      max_lag: int | None = None):
    """Stability-of-the-final-network curve over trial count.

    The n_top strongest edges of the full-trial network are identified,
    then the mean of those same edges' normalized weights is evaluated at
    every intermediate trial count. Returns (trial_counts, curve).
    """
    engine = ConnectivityEngine(epochs[0].n_channels, nfft, epochs[0].sfreq,
                                storage_mode=True, max_lag=max_lag)
    snapshots = []
    counts = []
    for k, ep in enumerate(epochs, start=1):
        engine.add_trial(ep)
        if metric is MetricId.XCOR:
            engine._xcor_add(ep)
        try:
            net = engine.finalize(metric, band)
        except DegenerateTrialCountError:
            continue  # metric undefined at this trial count
        w = np.abs(net.weights)
        wmax = w.max()
        snapshots.append(w / wmax if wmax > 0 else w)
        counts.append(k)
    top = np.argsort(-snapshots[-1])[:n_top]
    curve = np.array([s[top].mean() for s in snapshots])
    return np.array(counts), curve


def compute_metric(epochs: list[EpochMatrix], metric: MetricId, nfft: int,
                   band: FrequencyBand | None = None,
                   max_lag: int | None = None,
                   positions=None, node_ids=None) -> ConnectivityNetwork:
    """One-shot batch computation over a list of epochs (no caching)."""
    if metric is MetricId.COR:
        return cor(epochs, band=band, positions=positions, node_ids=node_ids)
    if metric is MetricId.XCOR:
        return xcor(epochs, max_lag=max_lag, band=band, positions=positions,
                    node_ids=node_ids)
    acc = SpectrumSet(epochs[0].n_channels, nfft)
    pool = ThreadPoolExecutor(max_workers=spectral.worker_count())
    try:
        for spec in pool.map(lambda e: spectral.trial_spectra(e, nfft), epochs):
            spectral.accumulate_spectra(acc, spec)
    finally:
        pool.shutdown()
    if band is None:
        band = FrequencyBand(0, acc.n_bins - 1, epochs[0].sfreq / nfft)
    return finalize_spectral(acc, metric, band, positions=positions,
                             node_ids=node_ids)

"""FFT backend and per-trial spectral accumulators.

All frequency-domain metrics share the same intermediates: one-sided
complex spectra per trial, and running sums of CSD/PSD-derived terms over
trials. Only the upper triangle of the channel-pair space is ever
materialized; the lower triangle follows from Hermitian symmetry.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .core import EpochMatrix, ParameterError

# Instrumentation: incremented once per channel-spectrum computed, so the
# storage-mode contract ("switching metrics issues zero new FFTs") is
# directly observable in tests.
_FFT_CALLS = 0


def fft_call_count() -> int:
    return _FFT_CALLS


def reset_fft_call_count() -> None:
    global _FFT_CALLS
    _FFT_CALLS = 0


def n_bins_for(nfft: int) -> int:
    return nfft // 2 + 1


def worker_count() -> int:
    """Worker-pool size, capped by the CONNSTREAM_THREADS env var."""
    n = os.cpu_count() or 1
    cap = os.environ.get("CONNSTREAM_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def _crop_pad_demean(data: np.ndarray, nfft: int) -> np.ndarray:
    """Fixed-resolution pre-FFT conditioning (rows are channels).

    Longer windows are truncated to the first nfft samples, shorter ones
    zero-padded after per-channel mean removal over the real samples.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    n = data.shape[1]
    if n >= nfft:
        seg = data[:, :nfft]
        return seg - seg.mean(axis=1, keepdims=True)
    out = np.zeros((data.shape[0], nfft))
    out[:, :n] = data - data.mean(axis=1, keepdims=True)
    return out


def fft_real(signal: np.ndarray, nfft: int) -> np.ndarray:
    """One-sided DFT of a real signal after mean removal.

    Bin k corresponds to k * sfreq / nfft Hz.
    """
    if nfft < 2:
        raise ParameterError(f"nfft must be >= 2, got {nfft}")
    signal = np.asarray(signal, dtype=np.float64).reshape(-1)
    if signal.size < 1:
        raise ParameterError("empty signal")
    global _FFT_CALLS
    _FFT_CALLS += 1
    out = np.fft.rfft(_crop_pad_demean(signal[None, :], nfft)[0], n=nfft)
    out[0] = 0.0  # DC is exactly zero after mean removal
    return out


def trial_spectra(epoch: EpochMatrix, nfft: int,
                  mode: str = "fixed") -> np.ndarray:
    """Per-channel one-sided spectra for one trial, rows = channels.

    ``mode="welch"`` instead averages CSD-compatible segment spectra over
    consecutive non-overlapping nfft windows; see ``segment_spectra``.
    """
    if nfft < 2:
        raise ParameterError(f"nfft must be >= 2, got {nfft}")
    if mode not in ("fixed", "welch"):
        raise ParameterError(f"unknown spectral mode {mode!r}")
    global _FFT_CALLS
    _FFT_CALLS += epoch.n_channels
    out = np.fft.rfft(_crop_pad_demean(epoch.data, nfft), n=nfft, axis=1)
    out[:, 0] = 0.0  # DC is exactly zero after mean removal
    return out


def segment_spectra(epoch: EpochMatrix, nfft: int) -> list[np.ndarray]:
    """Spectra of consecutive non-overlapping nfft segments ("welch" mode)."""
    global _FFT_CALLS
    n_seg = max(1, epoch.n_samples // nfft)
    out = []
    for s in range(n_seg):
        seg = epoch.data[:, s * nfft:(s + 1) * nfft]
        _FFT_CALLS += epoch.n_channels
        spec = np.fft.rfft(_crop_pad_demean(seg, nfft), n=nfft, axis=1)
        spec[:, 0] = 0.0  # DC is exactly zero after mean removal
        out.append(spec)
    return out


def pair_index(n_channels: int) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangle (i < j) channel pairs in row-major order."""
    return np.triu_indices(n_channels, k=1)


def pair_row_slice(n_channels: int, i: int) -> slice:
    """Slice of the pair axis holding pairs (i, i+1) .. (i, n-1)."""
    off = i * (n_channels - 1) - i * (i - 1) // 2  # pairs before row i
    return slice(off, off + n_channels - 1 - i)


@dataclass
class SpectrumSet:
    """Running sums over trials of every spectral intermediate.

    Pair-indexed arrays are [n_pairs, n_bins] over the upper triangle
    (i < j, row-major). The sum of Im(CSD) is not stored separately: it is
    exactly ``csd_sum.imag``.
    """

    n_channels: int
    nfft: int
    csd_sum: np.ndarray = field(init=False)      # complex [P, B]
    psd_sum: np.ndarray = field(init=False)      # float   [C, B]
    plv_sum: np.ndarray = field(init=False)      # complex [P, B], sum CSD/|CSD|
    pli_sum: np.ndarray = field(init=False)      # float   [P, B], sum sign(Im CSD)
    abs_im_sum: np.ndarray = field(init=False)   # float   [P, B], sum |Im CSD|
    n_trials_accumulated: int = field(init=False, default=0)

    def __post_init__(self):
        if self.nfft < 2:
            raise ParameterError("nfft must be >= 2")
        if self.n_channels < 1:
            raise ParameterError("need at least one channel")
        B = self.n_bins
        P = self.n_pairs
        self.csd_sum = np.zeros((P, B), dtype=np.complex128)
        self.psd_sum = np.zeros((self.n_channels, B))
        self.plv_sum = np.zeros((P, B), dtype=np.complex128)
        self.pli_sum = np.zeros((P, B))
        self.abs_im_sum = np.zeros((P, B))

    @property
    def n_bins(self) -> int:
        return n_bins_for(self.nfft)

    @property
    def n_pairs(self) -> int:
        return self.n_channels * (self.n_channels - 1) // 2

    @property
    def im_sum(self) -> np.ndarray:
        return self.csd_sum.imag

    def csd_entry(self, i: int, j: int) -> np.ndarray:
        """Accumulated CSD for any (i, j), reconstructing the lower triangle
        by Hermitian symmetry; the diagonal equals the PSD sum."""
        if i == j:
            return self.psd_sum[i].astype(np.complex128)
        if i < j:
            return self.csd_sum[pair_row_slice(self.n_channels, i)][j - i - 1]
        return np.conj(self.csd_entry(j, i))

    def nbytes(self) -> int:
        return (self.csd_sum.nbytes + self.psd_sum.nbytes +
                self.plv_sum.nbytes + self.pli_sum.nbytes +
                self.abs_im_sum.nbytes)

    def copy(self) -> "SpectrumSet":
        out = SpectrumSet(self.n_channels, self.nfft)
        out.csd_sum = self.csd_sum.copy()
        out.psd_sum = self.psd_sum.copy()
        out.plv_sum = self.plv_sum.copy()
        out.pli_sum = self.pli_sum.copy()
        out.abs_im_sum = self.abs_im_sum.copy()
        out.n_trials_accumulated = self.n_trials_accumulated
        return out

    def merge(self, other: "SpectrumSet") -> None:
        """Fold another partial sum into this one (associative)."""
        if (other.n_channels, other.nfft) != (self.n_channels, self.nfft):
            raise ParameterError("cannot merge accumulators of different shape")
        self.csd_sum += other.csd_sum
        self.psd_sum += other.psd_sum
        self.plv_sum += other.plv_sum
        self.pli_sum += other.pli_sum
        self.abs_im_sum += other.abs_im_sum
        self.n_trials_accumulated += other.n_trials_accumulated


def trial_csd_psd(spectra: np.ndarray,
                  n_channels: int) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangle CSD [P, B] and PSD [C, B] of one trial's spectra."""
    psd = np.abs(spectra) ** 2
    csd = np.empty((n_channels * (n_channels - 1) // 2, spectra.shape[1]),
                   dtype=np.complex128)
    conj = np.conj(spectra)
    for i in range(n_channels - 1):
        csd[pair_row_slice(n_channels, i)] = spectra[i][None, :] * conj[i + 1:]
    return csd, psd


def _fold_csd(acc: SpectrumSet, csd: np.ndarray, psd: np.ndarray,
              bins=None, count: bool = True) -> None:
    """Add one trial's (possibly bin-subset) CSD/PSD into the sums.

    ``bins`` selects the accumulator columns that ``csd``/``psd`` cover
    (None = all). ``count=False`` back-fills columns for trials already
    counted, e.g. after a live band change.
    """
    # FMA in the complex multiply leaves ~1e-16 relative residue in Im(CSD)
    # even for exactly-proportional channels; the sign-of-Im metrics must see
    # such pairs as zero-lag, so flush sub-machine-noise imaginary parts.
    im = csd.imag
    im[np.abs(im) <= 1e-13 * np.abs(csd.real)] = 0.0
    mag = np.abs(csd)
    # subnormal magnitudes are numerical residue; treat them as zero power
    nz = mag > np.finfo(np.float64).tiny
    unit = np.zeros_like(csd)
    np.divide(csd, mag, out=unit, where=nz)
    sl = slice(None) if bins is None else bins
    acc.psd_sum[:, sl] += psd
    acc.csd_sum[:, sl] += csd
    acc.plv_sum[:, sl] += unit
    acc.pli_sum[:, sl] += np.sign(im)
    acc.abs_im_sum[:, sl] += np.abs(im)
    if count:
        acc.n_trials_accumulated += 1


def accumulate_spectra(acc: SpectrumSet, spectra: np.ndarray,
                       bins=None, count: bool = True) -> SpectrumSet:
    """Fold one trial's spectra into the running sums (in place).

    ``bins`` (slice or index array) restricts the fold to those frequency
    columns; per-trial cost then scales with the band width, not nfft.
    Accumulation is single-owner by contract; workers produce spectra
    concurrently and one thread calls this.
    """
    spectra = np.asarray(spectra)
    if spectra.shape != (acc.n_channels, acc.n_bins):
        raise ParameterError(
            f"spectra shape {spectra.shape} does not match accumulator "
            f"({acc.n_channels}, {acc.n_bins})")
    sub = spectra if bins is None else spectra[:, bins]
    csd, psd = trial_csd_psd(sub, acc.n_channels)
    _fold_csd(acc, csd, psd, bins=bins, count=count)
    return acc


def accumulate_epoch(acc: SpectrumSet, epoch: EpochMatrix,
                     mode: str = "fixed", bins=None) -> np.ndarray:
    """Compute and accumulate one trial; returns the spectra for caching.

    In welch mode the trial's CSD/PSD contribution is the mean over its
    non-overlapping nfft segments (the nonlinear sums then use that mean
    CSD), and the returned spectra are the first segment's.
    """
    if mode == "welch" and epoch.n_samples >= 2 * acc.nfft:
        segs = segment_spectra(epoch, acc.nfft)
        width = acc.n_bins if bins is None else len(np.arange(acc.n_bins)[bins])
        csd = np.zeros((acc.n_pairs, width), dtype=np.complex128)
        psd = np.zeros((acc.n_channels, width))
        for spec in segs:
            sub = spec if bins is None else spec[:, bins]
            c, p = trial_csd_psd(sub, acc.n_channels)
            csd += c
            psd += p
        _fold_csd(acc, csd / len(segs), psd / len(segs), bins=bins)
        return segs[0]
    spectra = trial_spectra(epoch, acc.nfft)
    accumulate_spectra(acc, spectra, bins=bins)
    return spectra

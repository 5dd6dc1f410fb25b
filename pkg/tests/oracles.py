"""Independent brute-force reference implementations used to freeze
expected values. Everything here evaluates the metric definitions
literally, per trial, with an O(n^2) DFT - deliberately sharing no code
with the package's computation paths."""

import numpy as np


def naive_dft_onesided(x, nfft):
    """O(n^2) one-sided DFT with the same conditioning convention as the
    engine: truncate to nfft, remove the mean of the real samples, pad."""
    x = np.asarray(x, dtype=float)
    if len(x) >= nfft:
        seg = x[:nfft]
        seg = seg - seg.mean()
    else:
        seg = np.zeros(nfft)
        seg[:len(x)] = x - x.mean()
    n_bins = nfft // 2 + 1
    out = np.zeros(n_bins, dtype=complex)
    # DC is exactly zero after mean removal; start at bin 1
    for k in range(1, n_bins):
        out[k] = np.sum(seg * np.exp(-2j * np.pi * k * np.arange(nfft) / nfft))
    if nfft % 2 == 0:
        # Nyquist bin is exactly real; evaluate it without phasor residue
        out[-1] = np.sum(seg * (-1.0) ** np.arange(nfft))
    return out


def oracle_spectral_metrics(epochs, nfft):
    """Per-pair, per-bin values of every spectral metric from the literal
    trial-averaged definitions. Returns {name: array [n_pairs, n_bins]}."""
    C = epochs[0].shape[0]
    n_bins = nfft // 2 + 1
    K = len(epochs)
    spectra = np.array([[naive_dft_onesided(ep[c], nfft) for c in range(C)]
                        for ep in epochs])  # [K, C, B]
    pairs = [(i, j) for i in range(C) for j in range(i + 1, C)]
    P = len(pairs)
    out = {name: np.zeros((P, n_bins), dtype=complex if name == "COHY" else float)
           for name in ["COHY", "COH", "IMAGCOHY", "PLV", "PLI", "USPLI",
                        "WPLI", "DSWPLI"]}
    for p, (i, j) in enumerate(pairs):
        for b in range(n_bins):
            csd = np.array([spectra[k, i, b] * np.conj(spectra[k, j, b])
                            for k in range(K)])
            # flush sub-machine-noise imaginary residue, as the engine does
            csd.imag[np.abs(csd.imag) <= 1e-13 * np.abs(csd.real)] = 0.0
            psd_i = np.array([abs(spectra[k, i, b]) ** 2 for k in range(K)])
            psd_j = np.array([abs(spectra[k, j, b]) ** 2 for k in range(K)])
            mean_csd = csd.mean()
            denom = np.sqrt(psd_i.mean() * psd_j.mean())
            cohy = mean_csd / denom if denom > 0 else 0.0
            out["COHY"][p, b] = cohy
            out["COH"][p, b] = abs(cohy)
            out["IMAGCOHY"][p, b] = np.imag(cohy)
            phasors = np.array([c / abs(c) if abs(c) > 0 else 0.0 for c in csd])
            out["PLV"][p, b] = abs(phasors.mean())
            pli = abs(np.mean(np.sign(csd.imag)))
            out["PLI"][p, b] = pli
            if K >= 2:
                out["USPLI"][p, b] = (K * pli ** 2 - 1.0) / (K - 1.0)
            abs_im = np.mean(np.abs(csd.imag))
            wpli = abs(np.mean(csd.imag)) / abs_im if abs_im > 0 else 0.0
            out["WPLI"][p, b] = wpli
            out["DSWPLI"][p, b] = wpli ** 2
    return out


def oracle_cor(x, y):
    """Pearson correlation evaluated term by term."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    den = np.sqrt(np.sum(dx ** 2) * np.sum(dy ** 2))
    return float(np.sum(dx * dy) / den) if den > 0 else 0.0


def oracle_xcor(x, y, max_lag):
    """Sliding-sum normalized cross-correlation; returns (peak, lag)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    dx = x - x.mean()
    dy = y - y.mean()
    ey = np.sum(dy ** 2)
    best_val, best_lag = -np.inf, 0
    for tau in range(-max_lag, max_lag + 1):
        num = 0.0
        ex = 0.0
        for t in range(n):
            s = t + tau
            if 0 <= s < n:
                num += dx[s] * dy[t]
                ex += dx[s] ** 2
        den = np.sqrt(ex * ey)
        val = num / den if den > 0 else 0.0
        if val > best_val:
            best_val, best_lag = val, tau
    return best_val, best_lag

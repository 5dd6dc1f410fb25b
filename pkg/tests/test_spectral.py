import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from connstream.core import EpochMatrix, ParameterError
from connstream.spectral import (SpectrumSet, accumulate_epoch,
                                 accumulate_spectra, fft_call_count, fft_real,
                                 pair_index, pair_row_slice,
                                 reset_fft_call_count, trial_spectra)
from conftest import make_epochs
from oracles import naive_dft_onesided


class TestFftReal:
    def test_matches_naive_dft(self):
        rng = np.random.default_rng(0)
        for n, nfft in [(64, 64), (100, 64), (40, 64)]:
            x = rng.standard_normal(n)
            got = fft_real(x, nfft)
            want = naive_dft_onesided(x, nfft)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_mean_removed(self):
        x = np.full(32, 3.7)
        assert abs(fft_real(x, 32)[0]) < 1e-12

    def test_parseval(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(64)
        spec = np.fft.fft(x - x.mean(), 64)
        assert np.isclose(np.sum((x - x.mean()) ** 2),
                          np.sum(np.abs(spec) ** 2) / 64)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            fft_real(np.ones(8), 1)
        with pytest.raises(ParameterError):
            fft_real(np.array([]), 8)


class TestPairIndexing:
    @given(st.integers(2, 30))
    @settings(max_examples=20, deadline=None)
    def test_row_slices_tile_pair_axis(self, C):
        pi, pj = pair_index(C)
        for i in range(C - 1):
            sl = pair_row_slice(C, i)
            assert pi[sl].tolist() == [i] * (C - 1 - i)
            assert pj[sl].tolist() == list(range(i + 1, C))

    def test_csd_entry_hermitian(self):
        eps = make_epochs(3, 5, 40, seed=3)
        acc = SpectrumSet(5, 32)
        for ep in eps:
            accumulate_epoch(acc, ep)
        for i in range(5):
            for j in range(5):
                np.testing.assert_allclose(acc.csd_entry(i, j),
                                           np.conj(acc.csd_entry(j, i)))
        np.testing.assert_allclose(acc.csd_entry(2, 2).imag, 0.0)


class TestSpectrumSet:
    def test_shapes(self):
        acc = SpectrumSet(4, 64)
        assert acc.n_bins == 33 and acc.n_pairs == 6
        assert acc.csd_sum.shape == (6, 33)
        assert acc.psd_sum.shape == (4, 33)

    def test_im_sum_is_view_of_csd(self):
        acc = SpectrumSet(3, 16)
        accumulate_epoch(acc, make_epochs(1, 3, 16, seed=1)[0])
        np.testing.assert_array_equal(acc.im_sum, acc.csd_sum.imag)

    def test_sums_match_direct_accumulation(self):
        eps = make_epochs(4, 3, 24, seed=5)
        acc = SpectrumSet(3, 24)
        specs = [trial_spectra(ep, 24) for ep in eps]
        for s in specs:
            accumulate_spectra(acc, s)
        pi, pj = pair_index(3)
        csd_direct = sum(s[pi] * np.conj(s[pj]) for s in specs)
        np.testing.assert_allclose(acc.csd_sum, csd_direct, atol=1e-10)
        np.testing.assert_allclose(acc.psd_sum,
                                   sum(np.abs(s) ** 2 for s in specs),
                                   atol=1e-10)
        assert acc.n_trials_accumulated == 4

    def test_merge_associative(self):
        eps = make_epochs(6, 3, 24, seed=9)
        whole = SpectrumSet(3, 24)
        for ep in eps:
            accumulate_epoch(whole, ep)
        a, b = SpectrumSet(3, 24), SpectrumSet(3, 24)
        for ep in eps[:2]:
            accumulate_epoch(a, ep)
        for ep in eps[2:]:
            accumulate_epoch(b, ep)
        a.merge(b)
        np.testing.assert_allclose(a.csd_sum, whole.csd_sum, atol=1e-10)
        np.testing.assert_allclose(a.abs_im_sum, whole.abs_im_sum, atol=1e-10)
        assert a.n_trials_accumulated == 6

    def test_merge_shape_mismatch(self):
        with pytest.raises(ParameterError):
            SpectrumSet(3, 24).merge(SpectrumSet(4, 24))

    def test_copy_independent(self):
        acc = SpectrumSet(3, 16)
        cp = acc.copy()
        accumulate_epoch(acc, make_epochs(1, 3, 16)[0])
        assert cp.n_trials_accumulated == 0
        assert np.all(cp.csd_sum == 0)


class TestFftCounter:
    def test_counts_per_channel(self):
        reset_fft_call_count()
        accumulate_epoch(SpectrumSet(7, 32), make_epochs(1, 7, 32)[0])
        assert fft_call_count() == 7


class TestCropPad:
    def test_truncates_long_windows(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(100)
        np.testing.assert_allclose(fft_real(x, 64),
                                   naive_dft_onesided(x[:64], 64), atol=1e-9)

    def test_pads_short_windows(self):
        x = np.array([1.0, -2.0, 3.0, 0.5])
        got = fft_real(x, 16)
        assert got.shape == (9,)
        np.testing.assert_allclose(got, naive_dft_onesided(x, 16), atol=1e-10)


class TestWelchMode:
    def test_welch_averages_segments(self):
        ep = make_epochs(1, 2, 64, seed=4)[0]
        acc = accumulate_and_return(ep, nfft=16, mode="welch")
        # 4 non-overlapping segments of 16 samples
        manual = SpectrumSet(2, 16)
        segs = [EpochMatrix(data=ep.data[:, k * 16:(k + 1) * 16], sfreq=ep.sfreq)
                for k in range(4)]
        csd = np.zeros_like(manual.csd_sum)
        psd = np.zeros_like(manual.psd_sum)
        pi, pj = pair_index(2)
        for seg in segs:
            s = trial_spectra(seg, 16)
            csd += s[pi] * np.conj(s[pj])
            psd += np.abs(s) ** 2
        np.testing.assert_allclose(acc.csd_sum, csd / 4, atol=1e-10)
        np.testing.assert_allclose(acc.psd_sum, psd / 4, atol=1e-10)

    def test_welch_falls_back_for_short_trials(self):
        ep = make_epochs(1, 2, 20, seed=4)[0]
        acc = accumulate_and_return(ep, nfft=16, mode="welch")
        fixed = accumulate_and_return(ep, nfft=16, mode="fixed")
        np.testing.assert_allclose(acc.csd_sum, fixed.csd_sum)


def accumulate_and_return(ep, nfft, mode):
    acc = SpectrumSet(ep.n_channels, nfft)
    accumulate_epoch(acc, ep, mode=mode)
    return acc

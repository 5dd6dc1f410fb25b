"""Online all-to-all functional connectivity engine."""

from .core import (ConnectivityNetwork, EpochMatrix, FrequencyBand, MetricId,
                   XCorEdgeValue, band_average, deserialize_network,
                   normalize_network, serialize_network, threshold_network)
from .metrics import ConnectivityEngine, compute_metric
from .spectral import SpectrumSet, accumulate_spectra, fft_real, trial_spectra

__all__ = [
    "ConnectivityNetwork", "EpochMatrix", "FrequencyBand", "MetricId",
    "XCorEdgeValue", "band_average", "deserialize_network",
    "normalize_network", "serialize_network", "threshold_network",
    "ConnectivityEngine", "compute_metric",
    "SpectrumSet", "accumulate_spectra", "fft_real", "trial_spectra",
]

"""Shared domain types and network post-processing.

Everything in here is an immutable value type plus pure functions, so
networks and bands can be handed freely between pipeline stages.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class ParameterError(ValueError):
    """Invalid argument to an engine operation."""


class DegenerateTrialCountError(ParameterError):
    """Metric requested with too few accumulated trials."""


class MetricId(str, Enum):
    COR = "COR"
    XCOR = "XCOR"
    COHY = "COHY"
    COH = "COH"
    IMAGCOHY = "IMAGCOHY"
    PLV = "PLV"
    PLI = "PLI"
    USPLI = "USPLI"
    WPLI = "WPLI"
    DSWPLI = "DSWPLI"

    @classmethod
    def parse(cls, name: str) -> "MetricId":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ParameterError(f"unknown metric {name!r}") from None

    @property
    def is_spectral(self) -> bool:
        return self not in (MetricId.COR, MetricId.XCOR)


#: Metrics whose weights may be negative; thresholding always ranks by |weight|.
SIGNED_METRICS = frozenset({MetricId.COR, MetricId.IMAGCOHY, MetricId.USPLI})


@dataclass(frozen=True)
class FrequencyBand:
    """Inclusive bin range [lo_bin, hi_bin] with the Hz width of one bin."""

    lo_bin: int
    hi_bin: int
    bin_hz: float

    def __post_init__(self):
        if self.lo_bin < 0 or self.hi_bin < self.lo_bin:
            raise ParameterError(
                f"invalid band bins [{self.lo_bin}, {self.hi_bin}]")

    @property
    def n_bins(self) -> int:
        return self.hi_bin - self.lo_bin + 1

    @property
    def lo_hz(self) -> float:
        return self.lo_bin * self.bin_hz

    @property
    def hi_hz(self) -> float:
        return self.hi_bin * self.bin_hz


@dataclass(frozen=True)
class EpochMatrix:
    """One trial: channels x samples, time-locked to a trigger."""

    data: np.ndarray          # [n_channels, n_samples] float64
    sfreq: float
    t0_offset: float = 0.0    # epoch start relative to the trigger, seconds
    trial_index: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise ParameterError("epoch data must be 2-D (channels x samples)")
        if data.shape[0] < 1 or data.shape[1] < 2:
            raise ParameterError(f"epoch too small: {data.shape}")
        if self.sfreq <= 0:
            raise ParameterError("sfreq must be positive")
        if self.trial_index < 0:
            raise ParameterError("trial_index must be non-negative")
        if not np.all(np.isfinite(data)):
            raise ParameterError("epoch contains non-finite values")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class XCorEdgeValue:
    """Peak of the normalized cross-correlation and the lag where it occurs."""

    peak_value: float
    peak_lag: int


@dataclass(frozen=True)
class ConnectivityNetwork:
    """All-to-all network: undirected edges over the upper triangle (i < j).

    ``weights`` is always real and is what normalization/thresholding act
    on; complex-valued metrics additionally carry ``complex_weights`` and
    lag-annotated ones carry ``lags``.
    """

    metric: MetricId
    band: FrequencyBand
    n_trials: int
    node_ids: tuple
    positions: np.ndarray        # [n_nodes, 3] float64, meters
    edge_i: np.ndarray           # [n_edges] int
    edge_j: np.ndarray           # [n_edges] int
    weights: np.ndarray          # [n_edges] float64
    complex_weights: np.ndarray | None = None
    lags: np.ndarray | None = None
    normalized: bool = False
    warnings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ParameterError("n_trials must be >= 1")
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "edge_i", np.asarray(self.edge_i, dtype=np.int64))
        object.__setattr__(self, "edge_j", np.asarray(self.edge_j, dtype=np.int64))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        if np.any(self.edge_i >= self.edge_j):
            raise ParameterError("edges must satisfy i < j")
        if not np.all(np.isfinite(self.weights)):
            raise ParameterError("edge weights must be finite")

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return self.weights.shape[0]


def default_positions(n_nodes: int) -> np.ndarray:
    """All-zero node positions for sensor-space use without geometry."""
    return np.zeros((n_nodes, 3))


def normalize_network(net: ConnectivityNetwork) -> ConnectivityNetwork:
    """Scale all edge weights by the maximum absolute weight.

    An all-zero network is returned unchanged (apart from the flag) so a
    quiet measurement never divides by zero.
    """
    if net.n_edges < 1:
        raise ParameterError("cannot normalize a network without edges")
    wmax = float(np.max(np.abs(net.weights)))
    if wmax == 0.0:
        return replace(net, normalized=True)
    cw = net.complex_weights / wmax if net.complex_weights is not None else None
    return replace(net, weights=net.weights / wmax, complex_weights=cw,
                   normalized=True)


def threshold_network(net: ConnectivityNetwork,
                      keep_fraction: float) -> ConnectivityNetwork:
    """Keep the ceil(keep_fraction * n_edges) strongest edges by |weight|.

    Ties are broken by ascending (i, j) so repeated runs select the same
    edge set.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise ParameterError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    n_keep = math.ceil(keep_fraction * net.n_edges)
    # lexsort: last key is primary
    order = np.lexsort((net.edge_j, net.edge_i, -np.abs(net.weights)))
    kept = np.sort(order[:n_keep])
    return replace(
        net,
        edge_i=net.edge_i[kept],
        edge_j=net.edge_j[kept],
        weights=net.weights[kept],
        complex_weights=(net.complex_weights[kept]
                         if net.complex_weights is not None else None),
        lags=net.lags[kept] if net.lags is not None else None,
    )


def band_average(per_bin_weights: np.ndarray, band: FrequencyBand) -> np.ndarray:
    """Mean over the inclusive bin range of ``band``, one value per edge."""
    per_bin_weights = np.asarray(per_bin_weights)
    n_bins = per_bin_weights.shape[1]
    if band.hi_bin >= n_bins:
        raise ParameterError(
            f"band [{band.lo_bin}, {band.hi_bin}] exceeds {n_bins} bins")
    return per_bin_weights[:, band.lo_bin:band.hi_bin + 1].mean(axis=1)


def serialize_network(net: ConnectivityNetwork) -> bytes:
    """Canonical UTF-8 JSON encoding; see README for the schema.

    Key order is fixed so re-serialization is byte-identical.
    """
    obj = {
        "metric": net.metric.value,
        "band": {"lo_bin": net.band.lo_bin, "hi_bin": net.band.hi_bin,
                 "bin_hz": net.band.bin_hz},
        "n_trials": net.n_trials,
        "normalized": net.normalized,
        "nodes": [{"id": int(nid), "pos": [float(x) for x in pos]}
                  for nid, pos in zip(net.node_ids, net.positions)],
        "edges": [
            {
                "i": int(net.edge_i[k]),
                "j": int(net.edge_j[k]),
                "w": float(net.weights[k]),
                "w_im": (float(net.complex_weights[k].imag)
                         if net.complex_weights is not None else None),
                "lag": (int(net.lags[k]) if net.lags is not None else None),
            }
            for k in range(net.n_edges)
        ],
    }
    return json.dumps(obj, separators=(",", ":")).encode("utf-8")


def deserialize_network(raw: bytes) -> ConnectivityNetwork:
    obj = json.loads(raw.decode("utf-8"))
    band = FrequencyBand(obj["band"]["lo_bin"], obj["band"]["hi_bin"],
                         obj["band"]["bin_hz"])
    node_ids = tuple(n["id"] for n in obj["nodes"])
    positions = np.array([n["pos"] for n in obj["nodes"]], dtype=np.float64)
    if positions.size == 0:
        positions = np.zeros((0, 3))
    edges = obj["edges"]
    edge_i = np.array([e["i"] for e in edges], dtype=np.int64)
    edge_j = np.array([e["j"] for e in edges], dtype=np.int64)
    weights = np.array([e["w"] for e in edges], dtype=np.float64)
    has_im = any(e["w_im"] is not None for e in edges)
    has_lag = any(e["lag"] is not None for e in edges)
    complex_weights = None
    if has_im:
        # The wire format carries (|c|, Im c); the real part is recovered up
        # to sign, which byte-level round-tripping does not depend on.
        im = np.array([e["w_im"] or 0.0 for e in edges])
        re = np.sqrt(np.maximum(weights ** 2 - im ** 2, 0.0))
        complex_weights = re + 1j * im
    lags = np.array([e["lag"] or 0 for e in edges], dtype=np.int64) if has_lag else None
    return ConnectivityNetwork(
        metric=MetricId.parse(obj["metric"]), band=band,
        n_trials=obj["n_trials"], node_ids=node_ids, positions=positions,
        edge_i=edge_i, edge_j=edge_j, weights=weights,
        complex_weights=complex_weights, lags=lags,
        normalized=obj["normalized"])

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from connstream.core import (ConnectivityNetwork, EpochMatrix, FrequencyBand,
                             MetricId, ParameterError, band_average,
                             default_positions, deserialize_network,
                             normalize_network, serialize_network,
                             threshold_network)


def make_net(weights, metric=MetricId.COH, n_nodes=None, lags=None,
             complex_weights=None):
    weights = np.asarray(weights, dtype=float)
    if n_nodes is None:
        # smallest n with n(n-1)/2 >= len(weights)
        n_nodes = 2
        while n_nodes * (n_nodes - 1) // 2 < len(weights):
            n_nodes += 1
    pi, pj = np.triu_indices(n_nodes, k=1)
    pi, pj = pi[:len(weights)], pj[:len(weights)]
    return ConnectivityNetwork(
        metric=metric, band=FrequencyBand(8, 12, 1.0), n_trials=3,
        node_ids=tuple(range(n_nodes)), positions=default_positions(n_nodes),
        edge_i=pi, edge_j=pj, weights=weights,
        lags=np.asarray(lags) if lags is not None else None,
        complex_weights=(np.asarray(complex_weights, dtype=complex)
                         if complex_weights is not None else None))


class TestMetricId:
    def test_parse_case_insensitive(self):
        assert MetricId.parse("wpli") is MetricId.WPLI
        assert MetricId.parse(" CoH ") is MetricId.COH

    def test_parse_unknown_raises(self):
        with pytest.raises(ParameterError):
            MetricId.parse("nope")

    def test_spectral_partition(self):
        spectral = {m for m in MetricId if m.is_spectral}
        assert spectral == set(MetricId) - {MetricId.COR, MetricId.XCOR}
        assert len(MetricId) == 10


class TestFrequencyBand:
    def test_properties(self):
        b = FrequencyBand(8, 12, 1.0)
        assert b.n_bins == 5
        assert b.lo_hz == 8.0 and b.hi_hz == 12.0

    def test_invalid(self):
        with pytest.raises(ParameterError):
            FrequencyBand(5, 3, 1.0)
        with pytest.raises(ParameterError):
            FrequencyBand(-1, 3, 1.0)


class TestEpochMatrix:
    def test_validation(self):
        with pytest.raises(ParameterError):
            EpochMatrix(data=np.zeros(5), sfreq=100.0)
        with pytest.raises(ParameterError):
            EpochMatrix(data=np.zeros((2, 5)), sfreq=-1.0)
        with pytest.raises(ParameterError):
            EpochMatrix(data=np.full((2, 5), np.nan), sfreq=100.0)

    def test_shape(self):
        ep = EpochMatrix(data=np.zeros((3, 10)), sfreq=100.0)
        assert ep.n_channels == 3 and ep.n_samples == 10


class TestNormalize:
    def test_scales_to_unit_max(self):
        net = normalize_network(make_net([0.5, -2.0, 1.0]))
        assert np.isclose(np.max(np.abs(net.weights)), 1.0)
        assert net.normalized
        np.testing.assert_allclose(net.weights, [0.25, -1.0, 0.5])

    def test_all_zero_unchanged(self):
        net = normalize_network(make_net([0.0, 0.0, 0.0]))
        assert net.normalized
        np.testing.assert_array_equal(net.weights, [0.0, 0.0, 0.0])

    def test_empty_raises(self):
        with pytest.raises(ParameterError):
            normalize_network(make_net([]))


class TestThreshold:
    def test_keeps_ceil_fraction(self):
        net = make_net([0.1, 0.9, 0.5, 0.3, 0.7, 0.2], n_nodes=4)
        kept = threshold_network(net, 0.5)
        assert kept.n_edges == 3
        assert sorted(kept.weights.tolist()) == [0.5, 0.7, 0.9]

    def test_ranks_by_absolute_value(self):
        net = make_net([-0.9, 0.1, 0.5], metric=MetricId.IMAGCOHY)
        kept = threshold_network(net, 1 / 3)
        assert kept.weights.tolist() == [-0.9]

    def test_tie_break_deterministic(self):
        net = make_net([0.5, 0.5, 0.5, 0.5], n_nodes=4)
        kept = threshold_network(net, 0.5)
        # ties resolved toward ascending (i, j)
        assert list(zip(kept.edge_i.tolist(), kept.edge_j.tolist())) == \
            [(0, 1), (0, 2)]

    def test_invalid_fraction(self):
        net = make_net([0.1, 0.2, 0.3])
        for frac in (0.0, 1.5, -0.1):
            with pytest.raises(ParameterError):
                threshold_network(net, frac)

    @given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1,
                    max_size=28),
           st.floats(0.01, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_threshold_count_property(self, weights, frac):
        net = make_net(weights)
        kept = threshold_network(net, frac)
        assert kept.n_edges == int(np.ceil(frac * len(weights)))
        # kept edges dominate dropped ones by |w|
        dropped = set(zip(net.edge_i.tolist(), net.edge_j.tolist())) - \
            set(zip(kept.edge_i.tolist(), kept.edge_j.tolist()))
        if dropped and kept.n_edges:
            w = {(i, j): abs(v) for i, j, v in
                 zip(net.edge_i.tolist(), net.edge_j.tolist(), net.weights)}
            assert min(abs(v) for v in kept.weights) >= \
                max(w[e] for e in dropped) - 1e-12


class TestBandAverage:
    def test_mean_over_inclusive_range(self):
        per_bin = np.arange(12.0).reshape(2, 6)
        out = band_average(per_bin, FrequencyBand(1, 3, 1.0))
        np.testing.assert_allclose(out, [2.0, 8.0])

    def test_out_of_range_raises(self):
        with pytest.raises(ParameterError):
            band_average(np.zeros((1, 4)), FrequencyBand(2, 5, 1.0))


class TestSerialization:
    def test_key_order_and_schema(self):
        net = make_net([0.5, 0.25, 0.125], lags=[1, -2, 0],
                       complex_weights=[0.5j, 0.25, 0.125 + 0j])
        obj = json.loads(serialize_network(net))
        assert list(obj.keys()) == ["metric", "band", "n_trials",
                                    "normalized", "nodes", "edges"]
        assert list(obj["edges"][0].keys()) == ["i", "j", "w", "w_im", "lag"]
        assert obj["edges"][0]["w_im"] == 0.5
        assert obj["edges"][1]["lag"] == -2

    def test_byte_level_round_trip(self):
        net = make_net([0.5, -0.25, 0.125], metric=MetricId.IMAGCOHY,
                       lags=[3, 0, -1])
        raw = serialize_network(net)
        assert serialize_network(deserialize_network(raw)) == raw

    def test_round_trip_fields(self):
        net = make_net([0.9, 0.1, 0.4])
        back = deserialize_network(serialize_network(net))
        assert back.metric is net.metric
        assert back.band == net.band
        np.testing.assert_allclose(back.weights, net.weights)
        np.testing.assert_array_equal(back.edge_i, net.edge_i)

    def test_edges_require_upper_triangle(self):
        with pytest.raises(ParameterError):
            ConnectivityNetwork(
                metric=MetricId.COH, band=FrequencyBand(0, 0, 1.0),
                n_trials=1, node_ids=(0, 1), positions=np.zeros((2, 3)),
                edge_i=np.array([1]), edge_j=np.array([0]),
                weights=np.array([0.5]))

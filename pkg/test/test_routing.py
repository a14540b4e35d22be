import pytest

from peering_cdn.econ import ContentRequest
from peering_cdn.exceptions import ConfigurationError
from peering_cdn.routing import Holder, LatencyModel, route_request

LATENCY = LatencyModel([[0, 30, 80], [30, 0, 50], [80, 50, 0]])


class TestLatencyModel:

    def test_lookup(self):
        assert LATENCY(0, 2) == 80.0
        assert LATENCY(2, 0) == 80.0
        assert LATENCY.regions == 3

    @pytest.mark.parametrize('matrix', [
        [[0, 10], [20, 0]],
        [[5, 10], [10, 0]],
        [[0, 0], [0, 0]],
        [[0, 10, 20], [10, 0]],
    ])
    def test_rejects_bad_matrices(self, matrix):
        with pytest.raises(ConfigurationError):
            LatencyModel(matrix)

    def test_unknown_region(self):
        with pytest.raises(ConfigurationError):
            LATENCY(0, 3)


class TestRouteRequest:

    def test_nearest_holder_within_threshold(self):
        routing = route_request(ContentRequest(1, 0, 0.0), [Holder('far', 2), Holder('near', 1)], LATENCY, 50.0)
        assert routing.server == 'near'
        assert routing.latency_ms == 30.0
        assert routing.sigma

    def test_only_origin_far_away(self):
        routing = route_request(ContentRequest(1, 0, 0.0), [Holder('origin', 2)], LATENCY, 50.0)
        assert routing.server == 'origin'
        assert not routing.sigma

    def test_threshold_is_strict(self):
        routing = route_request(ContentRequest(1, 2, 0.0), [Holder('origin', 1)], LATENCY, 50.0)
        assert routing.latency_ms == 50.0
        assert not routing.sigma

    def test_ties_go_to_lowest_provider_id(self):
        routing = route_request(ContentRequest(1, 1, 0.0), [Holder('zeta', 1), Holder('alpha', 1)], LATENCY, 50.0)
        assert routing.server == 'alpha'

    def test_load_is_carried(self):
        assert route_request(ContentRequest(1, 0, 0.0), [Holder('o', 0)], LATENCY, 50.0, load=2.5).load == 2.5

    def test_no_holder(self):
        with pytest.raises(ConfigurationError):
            route_request(ContentRequest(1, 0, 0.0), [], LATENCY, 50.0)

import pytest

from peering_cdn.econ import ContentRequest, EconParams, WalkParams, ZipfParams, er_binomial, er_zipf
from peering_cdn.exceptions import ConfigurationError
from peering_cdn.predictors import PREDICTORS, BinomialPredictor, EmpiricalPredictor, ZipfPredictor, get_predictor
from peering_cdn.routing import LatencyModel

LATENCY = LatencyModel([[0, 100], [100, 0]])
ZIPF = ZipfParams(mu=0.5, total_content=100)


def history(*contents, region=0):
    return [ContentRequest(content, region, float(t)) for t, content in enumerate(contents)]


def build(name, walk=WalkParams(max_step=1)):
    return get_predictor(name, econ=EconParams(), latency=LATENCY, walk=walk, zipf=ZIPF)


class TestRevenuePredictor:

    @pytest.mark.parametrize('name', list(PREDICTORS))
    def test_empty_history_predicts_nothing(self, name):
        assert build(name).expected_requests(ContentRequest(5, 0, 0.0), [], 60.0, 60.0) == 0.0

    def test_horizon_scales_with_the_window(self):
        predictor = build('zipf')
        assert predictor.horizon(history(1, 2, 3, 4), 30.0, 60.0) == 2
        assert predictor.horizon(history(1, 2, 3, 4), 0.0, 60.0) == 0

    def test_unknown_predictor(self):
        with pytest.raises(ConfigurationError):
            build('oracle')

    def test_registry(self):
        assert isinstance(build('empirical'), EmpiricalPredictor)
        assert isinstance(build('binomial'), BinomialPredictor)
        assert isinstance(build('zipf'), ZipfPredictor)


class TestEmpiricalPredictor:

    def test_repeated_content(self):
        # Forecast repeats the history; every request has kernel weight 1
        assert build('empirical').expected_requests(ContentRequest(5, 0, 4.0), history(5, 5, 5, 5), 60.0, 60.0) == pytest.approx(4.0)

    def test_far_requests_weigh_less(self):
        predictor = build('empirical')
        near = predictor.expected_requests(ContentRequest(5, 0, 4.0), history(5, 5, 5, 5), 60.0, 60.0)
        far = predictor.expected_requests(ContentRequest(5, 1, 4.0), history(5, 5, 5, 5), 60.0, 60.0)
        assert 0 < far < near


class TestBinomialPredictor:

    def test_anchored_at_last_request(self):
        walk = WalkParams(max_step=1, step_decay=0.5)
        expected = er_binomial(1, 3, WalkParams(max_step=1, mean_step=1.0, step_decay=0.5))
        predicted = build('binomial', walk).expected_requests(ContentRequest(13, 0, 3.0), history(10, 11, 12), 60.0, 60.0)
        assert predicted == pytest.approx(expected)

    def test_single_request_uses_configured_mean(self):
        predicted = build('binomial').expected_requests(ContentRequest(12, 0, 1.0), history(12), 120.0, 60.0)
        assert predicted == pytest.approx(er_binomial(0, 2, WalkParams(max_step=1)))

    def test_zero_step_walk(self):
        predictor = build('binomial', WalkParams(max_step=0))
        assert predictor.expected_requests(ContentRequest(12, 0, 2.0), history(12, 12), 60.0, 60.0) == 2.0
        assert predictor.expected_requests(ContentRequest(13, 0, 2.0), history(12, 12), 60.0, 60.0) == 0.0


class TestZipfPredictor:

    def test_rank_by_frequency(self):
        predictor = build('zipf')
        observed = history(7, 4, 7, 9, 4, 7)
        assert predictor.rank(7, observed) == 1
        assert predictor.rank(4, observed) == 2
        assert predictor.rank(9, observed) == 3
        assert predictor.rank(50, observed) == 100

    def test_ties_by_content_id(self):
        assert build('zipf').rank(3, history(8, 3)) == 1

    def test_per_rank_mass(self):
        predictor = build('zipf')
        observed = history(7, 4, 7, 9, 4, 7)
        assert predictor.expected_requests(ContentRequest(7, 0, 6.0), observed, 60.0, 60.0) == pytest.approx(er_zipf(1, 6, ZIPF))
        assert predictor.expected_requests(ContentRequest(4, 0, 6.0), observed, 60.0, 60.0) == pytest.approx(
            er_zipf(2, 6, ZIPF) - er_zipf(1, 6, ZIPF))

    def test_ranked_masses_add_up_to_the_horizon(self):
        predictor = ZipfPredictor(ZipfParams(mu=0.5, total_content=4))
        observed = history(1, 1, 1, 2, 2, 3, 4, 4)
        total = sum(predictor.expected_requests(ContentRequest(c, 0, 8.0), observed, 60.0, 60.0) for c in (1, 2, 3, 4))
        assert total == pytest.approx(8.0)

import math
import random
import time
from decimal import Decimal
from fractions import Fraction

import pytest

from peering_cdn.econ import (
    ContentRequest,
    EconParams,
    HistoryRecord,
    Kernel,
    LoadRecord,
    WalkParams,
    ZipfParams,
    binomial_request_mass,
    binomial_request_prob,
    bid_amount,
    distance_factor,
    er_binomial,
    er_empirical,
    er_zipf,
    forecast_horizon,
    payoff_max,
    penalty,
    similarity,
    storage_cost,
    to_currency,
    utility,
    weighted_mean_step,
    zipf_cum_prob,
)
from peering_cdn.exceptions import ConfigurationError, DomainError


def flat_latency(a, b):
    return 0.0 if a == b else 100.0


def request(content=1, location=0, time=0.0):
    return ContentRequest(content, location, time)


class TestCurrency:

    def test_half_up(self):
        assert to_currency(Decimal('2.675')) == Decimal('2.68')
        assert to_currency(0.105) == Decimal('0.11')
        assert to_currency(-0.005) == Decimal('-0.01')

    def test_floats_use_shortest_repr(self):
        assert str(to_currency(0.1)) == '0.10'
        assert str(to_currency(3)) == '3.00'


class TestKernels:

    def test_similarity_examples(self):
        assert similarity(7, 7, 3.0) == 1.0
        assert similarity(0, 10, 10.0) == pytest.approx(0.367879, abs=1e-6)
        assert similarity(1, 31, 10.0) == pytest.approx(0.049787, abs=1e-6)

    def test_distance_factor_examples(self):
        assert distance_factor(0, 0, flat_latency, 100.0) == 1.0
        assert distance_factor(0, 1, flat_latency, 100.0) == pytest.approx(0.367879, abs=1e-6)
        assert distance_factor(0, 1, flat_latency, 50.0) == pytest.approx(0.135335, abs=1e-6)

    def test_missing_latency_pair(self):
        def lookup(a, b):
            return {(0, 0): 0.0}[(a, b)]

        with pytest.raises(ConfigurationError):
            distance_factor(0, 1, lookup, 100.0)

    def test_non_positive_width(self):
        with pytest.raises(DomainError):
            similarity(1, 2, 0.0)

    def test_randomized_kernel_properties(self):
        """Both kernels are symmetric, bounded in (0, 1] and equal 1 only on identical arguments."""
        rng = random.Random(1234)
        matrix = [[0.0, 40.0, 90.0], [40.0, 0.0, 60.0], [90.0, 60.0, 0.0]]

        def lookup(a, b):
            return matrix[a][b]

        for _ in range(500):
            a, b = rng.randint(1, 1000), rng.randint(1, 1000)
            width = rng.uniform(0.5, 50.0)
            value = similarity(a, b, width)
            assert value == similarity(b, a, width)
            assert 0 < value <= 1
            assert (value == 1.0) == (a == b)

            la, lb = rng.randrange(3), rng.randrange(3)
            factor = distance_factor(la, lb, lookup, width * 10)
            assert factor == distance_factor(lb, la, lookup, width * 10)
            assert 0 < factor <= 1
            assert (factor == 1.0) == (la == lb)

    def test_far_apart_arguments_stay_positive(self):
        assert 0 < similarity(1, 1000, 1.0) < 1e-300
        assert 0 < distance_factor(0, 1, lambda a, b: 900.0, 1.0) < 1e-300
        assert similarity(1, 1000, 1.0) == similarity(1000, 1, 1.0)


class TestPenalty:

    def test_capacity_term_cancelled_when_negative(self):
        loads = [LoadRecord(request(), 2.0, False), LoadRecord(request(), 3.0, True)]
        assert penalty(loads, 5.0) == 2.0

    def test_capacity_term_added(self):
        loads = [LoadRecord(request(), 2.0, False), LoadRecord(request(), 7.0, True)]
        assert penalty(loads, 5.0) == 4.0

    def test_all_within_threshold(self):
        loads = [LoadRecord(request(), 1.0, True) for _ in range(4)]
        assert penalty(loads, 5.0) == 0.0

    def test_negative_load(self):
        with pytest.raises(DomainError):
            LoadRecord(request(), -1.0, True)


class TestPayoff:

    params = EconParams(alpha=1.0, beta=0.5, gamma=0.2, lambda_=0.3)

    def test_examples(self):
        history = [HistoryRecord(request(), paid=10.0)]
        assert payoff_max(history, request(), 2.0, self.params, flat_latency) == pytest.approx(3.1)
        assert payoff_max(history, request(), 0.0, self.params, flat_latency) == pytest.approx(5.1)

    def test_dissimilar_history_leaves_only_the_penalty(self):
        params = EconParams(alpha=1.0, beta=0.5, gamma=0.2, lambda_=0.3, content_kernel_width=1e-3)
        history = [HistoryRecord(request(content=1), paid=10.0)]
        assert payoff_max(history, request(content=500), 2.0, params, flat_latency) == pytest.approx(-2.0)

    def test_decays_with_elapsed_time(self):
        history = [HistoryRecord(request(time=0.0), paid=10.0)]
        now = payoff_max(history, request(time=0.0), 0.0, self.params, flat_latency)
        later = payoff_max(history, request(time=5.0), 0.0, self.params, flat_latency)
        assert later == pytest.approx(now * math.exp(-1.5))

    def test_empty_history(self):
        with pytest.raises(DomainError):
            payoff_max([], request(), 0.0, self.params, flat_latency)

    def test_history_after_current(self):
        with pytest.raises(DomainError):
            payoff_max([HistoryRecord(request(time=10.0), paid=1.0)], request(time=5.0), 0.0, self.params, flat_latency)

    def test_coefficients_must_sum_to_one(self):
        with pytest.raises(DomainError):
            EconParams(beta=0.5, gamma=0.5, lambda_=0.5)


class TestSellerSide:

    def test_storage_cost(self):
        assert storage_cost(100, 0.02) == pytest.approx(2.0)
        assert storage_cost(0, 7.0) == 0
        assert storage_cost(250, 0.01) == pytest.approx(2.5)
        with pytest.raises(DomainError):
            storage_cost(-1, 0.01)

    def test_utility(self):
        assert utility(5.0, 3.0) == 2.0
        assert utility(3.0, 3.0) == 0.0
        assert utility(2.0, 3.0) == -1.0

    def test_bid_amount(self):
        assert bid_amount(2.0, 1.5, 0.1) == pytest.approx(3.7)
        assert bid_amount(2.0, 1.5, 0.0) == pytest.approx(3.5)
        assert bid_amount(2.0, 1.5, -0.25) == pytest.approx(3.0)

    def test_abstains_without_gain(self):
        assert bid_amount(2.0, 0.0, 0.1) is None
        assert bid_amount(2.0, -1.0, 0.1) is None

    def test_floored_at_zero(self):
        assert bid_amount(1.0, 0.1, -2.0) == 0.0


class TestExpectedRevenue:

    def test_empirical_empty(self):
        kernel = Kernel(10.0, 100.0, flat_latency)
        assert er_empirical(request(), [], [], 0.5, kernel) == 0

    def test_empirical_weights(self):
        # Distances chosen so the kernel products are 0.8, 0.5 and 0.4
        kernel = Kernel(1.0, 100.0, flat_latency)
        current = request(content=0)
        forecast = [request(content=-math.log(0.8)), request(content=-math.log(0.5))]
        history = [request(content=-math.log(0.4))]
        assert er_empirical(current, forecast, history, 0.6, kernel) == pytest.approx(0.94)
        assert er_empirical(current, forecast, history, 1.0, kernel) == pytest.approx(1.3)

    def test_binomial_examples(self):
        walk = WalkParams(max_step=1)
        assert binomial_request_prob(0, 1, walk) == 0.5
        assert binomial_request_prob(1, 1, walk) == 0.25
        assert binomial_request_prob(5, 1, walk) == 0.0
        assert er_binomial(0, 2, walk) == pytest.approx(0.875)
        assert er_binomial(3, 0, walk) == 0
        assert er_binomial(0, 1, walk) == 0.5

    def test_binomial_rows_normalize(self):
        """Every row of the walk distribution is a probability mass function."""
        for max_step in (1, 2, 3):
            walk = WalkParams(max_step=max_step)
            for k in range(1, 8):
                spread = k * max_step
                total = sum((binomial_request_mass(c, k, walk) for c in range(-spread, spread + 1)), Fraction(0))
                assert total == 1

    def test_binomial_matches_pascal(self):
        walk = WalkParams(max_step=1)
        row = [1]
        for _ in range(5):
            row = [a + b for a, b in zip([0] + row, row + [0])]
        # Row 6 of Pascal's triangle is the k=3 row for S=1
        row = [a + b for a, b in zip([0] + row, row + [0])]
        assert [binomial_request_mass(c, 3, walk) * 64 for c in range(-3, 4)] == row

    def test_er_binomial_matches_exact_sum(self):
        walk = WalkParams(max_step=2)
        exact = sum((binomial_request_mass(1, k, walk) for k in range(1, 301)), Fraction(0))
        assert er_binomial(1, 300, walk) == pytest.approx(float(exact), rel=1e-9)

    def test_er_binomial_long_horizon(self):
        """Hotspot-sized horizons finish quickly and follow the sqrt(2n / pi) growth of the central mass."""
        walk = WalkParams(max_step=2)
        started = time.perf_counter()
        expected = er_binomial(0, 5000, walk)
        assert time.perf_counter() - started < 2.0
        assert expected == pytest.approx(math.sqrt(2 * 5000 / math.pi), rel=0.03)

    def test_binomial_mean_step_is_rounded(self):
        assert binomial_request_prob(1, 1, WalkParams(max_step=1, mean_step=0.5)) == 0.5

    def test_binomial_requires_steps(self):
        with pytest.raises(DomainError):
            binomial_request_prob(0, 1, WalkParams(max_step=0))
        with pytest.raises(DomainError):
            binomial_request_prob(0, 0, WalkParams(max_step=1))

    def test_forecast_horizon(self):
        assert forecast_horizon(10, 20, 5) == 40
        assert forecast_horizon(10, 5, 20) == 3
        assert forecast_horizon(1, 10, 10) == 1
        with pytest.raises(DomainError):
            forecast_horizon(1, 10, 0)

    def test_weighted_mean_step(self):
        assert weighted_mean_step([2, -1], 0.5) == pytest.approx(0.0)
        assert weighted_mean_step([3], 0.2) == 3.0
        assert weighted_mean_step([1, 1, 1], 0.7) == pytest.approx(1.0)
        with pytest.raises(DomainError):
            weighted_mean_step([], 0.5)

    def test_zipf_examples(self):
        zipf = ZipfParams(mu=0.5, total_content=100)
        assert zipf_cum_prob(100, zipf) == pytest.approx(1.0)
        assert zipf_cum_prob(25, zipf) == pytest.approx(0.5)
        assert zipf_cum_prob(1, zipf) == pytest.approx(0.1)
        assert er_zipf(25, 4, zipf) == pytest.approx(2.0)
        assert er_zipf(10, 0, zipf) == 0
        assert er_zipf(100, 3, zipf) == pytest.approx(3.0)

    def test_zipf_cumulative_is_monotone(self):
        zipf = ZipfParams(mu=0.8, total_content=50)
        values = [zipf_cum_prob(c, zipf) for c in range(1, 51)]
        assert values == sorted(values)

    @pytest.mark.parametrize('mu', [0.0, 1.0, 1.5])
    def test_zipf_mu_domain(self, mu):
        with pytest.raises(DomainError):
            ZipfParams(mu=mu, total_content=10)

"""Expected-request predictors used by sellers to price replicas.

Each predictor turns a basis history (the requests observed over the last ``window_s`` seconds, oldest first) into the expected
number of requests for one content over the next ``horizon_s`` seconds. The horizon is converted to a request count with
:func:`~peering_cdn.econ.forecast_horizon`, so an empty history always predicts 0.
"""

import math
from abc import ABC, abstractmethod
from collections import Counter
from typing import ClassVar, Dict, Sequence, Type

from .econ import (
    ContentRequest,
    EconParams,
    Kernel,
    LatencyLookup,
    WalkParams,
    ZipfParams,
    er_binomial,
    er_empirical,
    er_zipf,
    forecast_horizon,
    weighted_mean_step,
)
from .exceptions import ConfigurationError


class RevenuePredictor(ABC):
    name: ClassVar[str]

    def horizon(self, history: Sequence[ContentRequest], horizon_s: float, window_s: float) -> int:
        if not history or horizon_s <= 0:
            return 0
        return forecast_horizon(len(history), horizon_s, window_s)

    def expected_requests(
            self,
            current: ContentRequest,
            history: Sequence[ContentRequest],
            horizon_s: float,
            window_s: float
    ) -> float:
        """Expected requests for ``current.content`` over the next ``horizon_s`` seconds.

        Parameters
        ----------
        current : ContentRequest
            The content being priced, located in the region it would be served to.
        history : Sequence[ContentRequest]
            Requests observed over the last ``window_s`` seconds, oldest first.
        horizon_s : float
            Length of the forecast period.
        window_s : float
            Length of the period covered by ``history``.

        Returns
        -------
        count : float
        """
        n = self.horizon(history, horizon_s, window_s)
        if n == 0:
            return 0.0
        return self._predict(current, history, n)

    @abstractmethod
    def _predict(self, current: ContentRequest, history: Sequence[ContentRequest], n: int) -> float:
        ...


class EmpiricalPredictor(RevenuePredictor):
    """Kernel-weighted request mass. The next ``n`` requests are forecast to repeat the most recent ones."""
    name = 'empirical'

    def __init__(self, rho: float, kernel: Kernel):
        self.rho = rho
        self.kernel = kernel

    def _predict(self, current, history, n):
        repeats = math.ceil(n / len(history))
        forecast = (list(history) * repeats)[-n:]
        return er_empirical(current, forecast, history, self.rho, self.kernel)


class BinomialPredictor(RevenuePredictor):
    """Models the request sequence as a random walk in the content-ID space, anchored at the last observed request. The mean step
    is the decayed average of the observed steps, falling back to the configured mean when fewer than two requests are known."""
    name = 'binomial'

    def __init__(self, walk: WalkParams):
        self.walk = walk

    def _predict(self, current, history, n):
        steps = [b.content - a.content for a, b in zip(history, history[1:])]
        mean_step = weighted_mean_step(steps, self.walk.step_decay) if steps else self.walk.mean_step
        walk = WalkParams(max_step=self.walk.max_step, mean_step=mean_step, step_decay=self.walk.step_decay)
        if walk.max_step < 1:
            return float(n) if current.content == history[-1].content else 0.0
        return er_binomial(current.content - history[-1].content, n, walk)


class ZipfPredictor(RevenuePredictor):
    """Ranks contents by observed frequency (ties by content id, unseen contents last) and assigns each rank its share of the
    approximate cumulative Zipf mass."""
    name = 'zipf'

    def __init__(self, zipf: ZipfParams):
        self.zipf = zipf

    def rank(self, content: int, history: Sequence[ContentRequest]) -> int:
        counts = Counter(request.content for request in history)
        if content not in counts:
            return self.zipf.total_content
        ranked = sorted(counts, key=lambda c: (-counts[c], c))
        return min(ranked.index(content) + 1, self.zipf.total_content)

    def _predict(self, current, history, n):
        rank = self.rank(current.content, history)
        above = er_zipf(rank - 1, n, self.zipf) if rank > 1 else 0.0
        return er_zipf(rank, n, self.zipf) - above


PREDICTORS: Dict[str, Type[RevenuePredictor]] = {
    cls.name: cls for cls in (EmpiricalPredictor, BinomialPredictor, ZipfPredictor)  # type: ignore [type-abstract]
}


def get_predictor(name: str, *, econ: EconParams, latency: LatencyLookup, walk: WalkParams, zipf: ZipfParams) -> RevenuePredictor:
    """Builds the predictor registered under ``name``.

    Raises
    ------
    ConfigurationError
        If no predictor is registered under ``name``.
    """
    if name == EmpiricalPredictor.name:
        return EmpiricalPredictor(econ.rho, Kernel.from_params(econ, latency))
    if name == BinomialPredictor.name:
        return BinomialPredictor(walk)
    if name == ZipfPredictor.name:
        return ZipfPredictor(zipf)
    raise ConfigurationError(f'Unknown predictor "{name}"; expected one of {", ".join(PREDICTORS)}.')

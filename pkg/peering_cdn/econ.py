"""Pure economic functions used by buyers, sellers and the auctioneer.

Every function in this module is side-effect free and depends only on its arguments, so each one can be checked against hand-computed
values independently of the simulator. Request-count and probability arithmetic is done in floats, except for the binomial mass
which is computed exactly with big integers before conversion; the expected-request sum over long walks switches to log-gamma
terms. Currency crosses the ledger boundary through :func:`to_currency`.
"""

import math
import sys
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Callable, List, NewType, Optional, Sequence, Union

from .exceptions import ConfigurationError, DomainError

ContentId = NewType('ContentId', int)
LocationId = NewType('LocationId', int)

#: Maps a pair of regions to the latency between them, in milliseconds.
LatencyLookup = Callable[[LocationId, LocationId], float]

CENT = Decimal('0.01')
COEFFICIENT_TOLERANCE = 1e-9
EXACT_BINOMIAL_TRIALS = 1000
#: Kernels never reach 0, however far apart their arguments are.
KERNEL_FLOOR = sys.float_info.min


def to_currency(value: Union[float, int, str, Decimal]) -> Decimal:
    """Quantizes ``value`` to 2 fractional digits (half-up). Floats are converted through their shortest ``repr`` so that ``0.1``
    becomes ``Decimal('0.10')`` and not the binary expansion."""
    if isinstance(value, float):
        value = repr(value)
    return Decimal(value).quantize(CENT, rounding=ROUND_HALF_UP)


def round_half_up(value: Union[float, Fraction]) -> int:
    return math.floor(Fraction(value) + Fraction(1, 2))


@dataclass(frozen=True)
class ContentRequest:
    content: ContentId
    location: LocationId
    time: float


@dataclass(frozen=True)
class HistoryRecord:
    """A past request together with the payment made for the replication it triggered (0 if it triggered none)."""
    request: ContentRequest
    paid: float = 0.0

    def __post_init__(self):
        if self.paid < 0:
            raise DomainError(f'Payments cannot be negative (got {self.paid}).')


@dataclass(frozen=True)
class LoadRecord:
    """The load a routed request imposed on a server, and whether it was served within the delay threshold."""
    request: ContentRequest
    load: float
    served_within_threshold: bool

    def __post_init__(self):
        if self.load < 0:
            raise DomainError(f'Loads cannot be negative (got {self.load}).')


@dataclass(frozen=True)
class EconParams:
    """Coefficients shared by the payoff, penalty and expected-revenue functions.

    Attributes
    ----------
    alpha : float
        Penalty constant, in currency per load unit.
    beta, gamma, lambda_ : float
        Payoff coefficients. Must be non-negative and sum to 1.
    rho : float
        Impact factor weighting forecast requests against history, in ``[0, 1]``.
    delay_threshold_ms : float
        Requests served at or above this latency are SLA violations.
    content_kernel_width : float
        Width of the similarity kernel, in content-ID units.
    location_kernel_width : float
        Width of the distance kernel, in milliseconds.
    capacity_threshold : float
        Load a provider can absorb within the delay threshold before the capacity term of the penalty applies.
    time_unit_s : float
        Simulated seconds per unit of the payoff time decay.
    """
    alpha: float = 0.1
    beta: float = 0.6
    gamma: float = 0.2
    lambda_: float = 0.2
    rho: float = 0.5
    delay_threshold_ms: float = 50.0
    content_kernel_width: float = 10.0
    location_kernel_width: float = 100.0
    capacity_threshold: float = 100.0
    time_unit_s: float = 1.0

    def __post_init__(self):
        if min(self.beta, self.gamma, self.lambda_) < 0:
            raise DomainError('beta, gamma and lambda must be non-negative.')
        if abs(self.beta + self.gamma + self.lambda_ - 1.0) > COEFFICIENT_TOLERANCE:
            raise DomainError(f'beta + gamma + lambda must equal 1 (got {self.beta + self.gamma + self.lambda_}).')
        if self.alpha < 0:
            raise DomainError(f'alpha must be non-negative (got {self.alpha}).')
        if not 0 <= self.rho <= 1:
            raise DomainError(f'rho must be within [0, 1] (got {self.rho}).')
        for name in ('delay_threshold_ms', 'content_kernel_width', 'location_kernel_width', 'capacity_threshold', 'time_unit_s'):
            if getattr(self, name) <= 0:
                raise DomainError(f'{name} must be strictly positive (got {getattr(self, name)}).')


@dataclass(frozen=True)
class WalkParams:
    max_step: int = 1
    mean_step: float = 0.0
    step_decay: float = 0.9

    def __post_init__(self):
        if self.max_step < 0:
            raise DomainError(f'max_step must be non-negative (got {self.max_step}).')
        if not 0 < self.step_decay <= 1:
            raise DomainError(f'step_decay must be within (0, 1] (got {self.step_decay}).')


@dataclass(frozen=True)
class ZipfParams:
    mu: float
    total_content: int

    def __post_init__(self):
        # mu == 1 degenerates the cumulative approximation, so it is rejected rather than special-cased
        if not 0 < self.mu < 1:
            raise DomainError(f'mu must be within (0, 1) (got {self.mu}).')
        if self.total_content < 1:
            raise DomainError(f'total_content must be at least 1 (got {self.total_content}).')


def similarity(a: ContentId, b: ContentId, width: float) -> float:
    """Similarity of two content IDs, ``exp(-|a - b| / width)``. Symmetric, in ``(0, 1]``, and 1 only when ``a == b``."""
    if width <= 0:
        raise DomainError(f'Kernel width must be strictly positive (got {width}).')
    return max(math.exp(-abs(a - b) / width), KERNEL_FLOOR)


def distance_factor(a: LocationId, b: LocationId, latency: LatencyLookup, width: float) -> float:
    """Locality of two regions, ``exp(-latency(a, b) / width)``.

    Raises
    ------
    ConfigurationError
        If ``latency`` has no entry for ``(a, b)``.
    """
    if width <= 0:
        raise DomainError(f'Kernel width must be strictly positive (got {width}).')
    try:
        latency_ms = latency(a, b)
    except (KeyError, IndexError):
        raise ConfigurationError(f'No latency defined between regions {a} and {b}.') from None
    return max(math.exp(-latency_ms / width), KERNEL_FLOOR)


@dataclass(frozen=True)
class Kernel:
    """Bundles the similarity and distance kernels so that a pair of requests can be weighted in one call."""
    content_width: float
    location_width: float
    latency: LatencyLookup

    @classmethod
    def from_params(cls, params: EconParams, latency: LatencyLookup) -> 'Kernel':
        return cls(params.content_kernel_width, params.location_kernel_width, latency)

    def weight(self, a: ContentRequest, b: ContentRequest) -> float:
        return (similarity(a.content, b.content, self.content_width)
                * distance_factor(a.location, b.location, self.latency, self.location_width))


def penalty(loads: Sequence[LoadRecord], capacity_threshold: float) -> float:
    """Load a provider fails to serve properly: every load served outside the delay threshold, plus whatever load served within the
    threshold exceeds ``capacity_threshold``. The capacity term only counts when it is positive."""
    if capacity_threshold <= 0:
        raise DomainError(f'capacity_threshold must be strictly positive (got {capacity_threshold}).')
    late = sum(record.load for record in loads if not record.served_within_threshold)
    excess = sum(record.load for record in loads if record.served_within_threshold) - capacity_threshold
    return late + (excess if excess > 0 else 0.0)


def payoff_max(
        history: Sequence[HistoryRecord],
        current: ContentRequest,
        current_penalty: float,
        params: EconParams,
        latency: LatencyLookup,
) -> float:
    """Maximum amount a buyer is willing to pay to replicate ``current.content`` at ``current.time``.

    The first term predicts the price from past payments, each scaled by the similarity and locality of its request to
    ``current`` and by an exponential decay in elapsed time. The avoided-penalty cost ``alpha * current_penalty`` is deducted.

    Parameters
    ----------
    history : Sequence[HistoryRecord]
        Past requests with the payment made for each. Must not be empty and must not contain requests after ``current``.
    current : ContentRequest
        The request the buyer is replicating for.
    current_penalty : float
        The buyer's current penalty, in load units.
    params : EconParams
    latency : callable
        Latency lookup between regions.

    Returns
    -------
    budget : float
        May be negative, in which case the buyer has no budget.

    Raises
    ------
    DomainError
        If ``history`` is empty or contains a request later than ``current``.
    """
    if not history:
        raise DomainError('payoff_max needs at least one history record.')
    kernel = Kernel.from_params(params, latency)
    total = 0.0
    for record in history:
        elapsed = current.time - record.request.time
        if elapsed < 0:
            raise DomainError('History records must not be later than the current request.')
        decay = math.exp(-params.lambda_ * elapsed / params.time_unit_s)
        total += (record.paid + params.gamma) * kernel.weight(current, record.request) * decay
    return params.beta * total / len(history) - params.alpha * current_penalty


def storage_cost(requirement_mb: float, unit_cost: float) -> float:
    if requirement_mb < 0 or unit_cost < 0:
        raise DomainError('Storage requirement and unit cost must be non-negative.')
    return requirement_mb * unit_cost


def utility(er_new: float, er_old: float) -> float:
    """Gain from replacing held content worth ``er_old`` with new content worth ``er_new``. Sellers abstain when this is not
    positive."""
    return er_new - er_old


def bid_amount(cost: float, gain: float, eagerness: float) -> Optional[float]:
    """Seller's bid: storage cost plus utility, shifted by ``eagerness * cost`` to reflect the seller's interest in winning.

    Returns ``None`` (the seller abstains) when ``gain`` is not positive. Bids are floored at 0.
    """
    if gain <= 0:
        return None
    return max(0.0, cost + gain + eagerness * cost)


def er_empirical(
        current: ContentRequest,
        forecast: Sequence[ContentRequest],
        history: Sequence[ContentRequest],
        rho: float,
        kernel: Kernel,
) -> float:
    """Expected revenue of ``current.content`` as the kernel-weighted mass of forecast requests (weighted by ``rho``) and of past
    requests (weighted by ``1 - rho``). Empty lists contribute nothing."""
    if not 0 <= rho <= 1:
        raise DomainError(f'rho must be within [0, 1] (got {rho}).')
    ahead = sum(kernel.weight(current, request) for request in forecast)
    behind = sum(kernel.weight(current, request) for request in history)
    return rho * ahead + (1 - rho) * behind


def _check_binomial(c: int, k: int, walk: WalkParams) -> None:
    if k < 1:
        raise DomainError(f'Step index must be at least 1 (got {k}).')
    if walk.max_step < 1:
        raise DomainError(f'max_step must be at least 1 for the binomial model (got {walk.max_step}).')
    if c != int(c):
        raise DomainError(f'Content offset must be an integer (got {c}).')


def binomial_request_mass(c: int, k: int, walk: WalkParams) -> Fraction:
    """Exact probability that the walk sits at offset ``c`` after ``k`` steps, as a fraction.

    The mean step is rounded half-up to an integer so that the binomial index stays integral.
    """
    _check_binomial(c, k, walk)
    centre = round_half_up(walk.mean_step)
    spread = k * walk.max_step
    index = int(c) - centre + spread
    trials = 2 * spread
    if index < 0 or index > trials:
        return Fraction(0)
    return Fraction(math.comb(trials, index), 2 ** trials)


def binomial_request_prob(c: int, k: int, walk: WalkParams) -> float:
    return float(binomial_request_mass(c, k, walk))


def _binomial_term(c: int, k: int, walk: WalkParams) -> float:
    """Same value as :func:`binomial_request_prob`; long walks go through log-gamma instead of exact big-integer arithmetic."""
    centre = round_half_up(walk.mean_step)
    spread = k * walk.max_step
    index = int(c) - centre + spread
    trials = 2 * spread
    if index < 0 or index > trials:
        return 0.0
    if trials <= EXACT_BINOMIAL_TRIALS:
        return math.comb(trials, index) / 2 ** trials
    return math.exp(
        math.lgamma(trials + 1) - math.lgamma(index + 1) - math.lgamma(trials - index + 1) - trials * math.log(2)
    )


def er_binomial(c: int, n: int, walk: WalkParams) -> float:
    """Expected number of requests for offset ``c`` among the next ``n`` requests of the walk."""
    if n < 0:
        raise DomainError(f'Forecast horizon must be non-negative (got {n}).')
    if n == 0:
        return 0.0
    _check_binomial(c, 1, walk)
    return math.fsum(_binomial_term(c, i, walk) for i in range(1, n + 1))


def forecast_horizon(k_minus_1: int, future_window: float, past_window: float) -> int:
    """Number of requests expected over ``future_window`` given ``k_minus_1`` requests over ``past_window``, assuming a constant
    arrival rate. Rounded half-up."""
    if past_window <= 0:
        raise DomainError(f'past_window must be strictly positive (got {past_window}).')
    return round_half_up(Fraction(k_minus_1) * Fraction(future_window) / Fraction(past_window))


def weighted_mean_step(steps: Sequence[int], decay: float) -> float:
    """Weighted average of ``steps`` (oldest first) where the most recent step has weight 1 and each older step's weight is
    multiplied by ``decay``."""
    if not steps:
        raise DomainError('weighted_mean_step needs at least one step.')
    if not 0 < decay <= 1:
        raise DomainError(f'decay must be within (0, 1] (got {decay}).')
    weights: List[float] = [decay ** age for age in range(len(steps) - 1, -1, -1)]
    return sum(w * s for w, s in zip(weights, steps)) / sum(weights)


def zipf_cum_prob(c: int, zipf: ZipfParams) -> float:
    """Approximate cumulative probability of the ``c`` most popular contents, ``(c / C) ** (1 - mu)``."""
    if not 0 < zipf.mu < 1:
        raise DomainError(f'mu must be within (0, 1) (got {zipf.mu}).')
    if not 1 <= c <= zipf.total_content:
        raise DomainError(f'Content {c} is outside [1, {zipf.total_content}].')
    return (c / zipf.total_content) ** (1 - zipf.mu)


def er_zipf(c: int, n: int, zipf: ZipfParams) -> float:
    if n < 0:
        raise DomainError(f'Forecast horizon must be non-negative (got {n}).')
    return n * zipf_cum_prob(c, zipf)

"""Seeded request workloads: Zipf-popular content, random walks in the content-ID space, and regional surges.

Every generator draws from its own :func:`numpy.random.default_rng` stream derived from ``(seed, stream id)``, so the same seed always
produces the same sequence and adding a surge does not perturb the base workload.
"""

import heapq
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from .econ import ContentId, ContentRequest, LocationId
from .exceptions import DomainError

ARRIVAL_STREAM = 0
CONTENT_STREAM = 1
POPULARITY_STREAM = 2
REGION_STREAM = 3
SURGE_STREAM = 100

WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ZipfWorkload:
    mu: float
    total_content: int


@dataclass(frozen=True)
class WalkWorkload:
    start: int
    max_step: int
    total_content: int


@dataclass(frozen=True)
class WorkloadSpec:
    """Base workload. ``arrival_rate`` is the aggregate rate in requests per second, split across regions by
    ``region_weights``."""
    kind: Union[ZipfWorkload, WalkWorkload]
    arrival_rate: float
    region_weights: Tuple[float, ...]
    duration_s: float

    def __post_init__(self):
        if self.arrival_rate <= 0:
            raise DomainError(f'arrival_rate must be strictly positive (got {self.arrival_rate}).')
        if abs(sum(self.region_weights) - 1.0) > WEIGHT_TOLERANCE or min(self.region_weights) < 0:
            raise DomainError('region_weights must be non-negative and sum to 1.')
        if self.duration_s <= 0:
            raise DomainError(f'duration_s must be strictly positive (got {self.duration_s}).')

    def region_rate(self, region: LocationId) -> float:
        return self.arrival_rate * self.region_weights[region]


@dataclass(frozen=True)
class FlashCrowdEvent:
    start_s: float
    duration_s: float
    region: LocationId
    content_range: Tuple[int, int]
    rate_multiplier: float

    def __post_init__(self):
        if self.rate_multiplier <= 1:
            raise DomainError(f'A flash crowd needs rate_multiplier > 1 (got {self.rate_multiplier}).')
        if self.duration_s <= 0:
            raise DomainError(f'duration_s must be strictly positive (got {self.duration_s}).')


@dataclass(frozen=True)
class ScheduledEvent:
    """An event known ``advance_notice_s`` seconds before it starts. Demand during the event is scaled by ``rate_multiplier``."""
    start_s: float
    duration_s: float
    region: LocationId
    content_range: Tuple[int, int]
    advance_notice_s: float
    rate_multiplier: float = 1.0

    def __post_init__(self):
        if self.advance_notice_s <= 0:
            raise DomainError(f'advance_notice_s must be strictly positive (got {self.advance_notice_s}).')
        if self.duration_s <= 0:
            raise DomainError(f'duration_s must be strictly positive (got {self.duration_s}).')
        if self.rate_multiplier < 1:
            raise DomainError(f'rate_multiplier cannot be below 1 (got {self.rate_multiplier}).')

    @property
    def notice_at(self) -> float:
        return self.start_s - self.advance_notice_s


Surge = Union[FlashCrowdEvent, ScheduledEvent]


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def poisson_arrivals(rate: float, start: float, end: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival times of a Poisson process of ``rate`` on ``[start, end)``."""
    if rate <= 0 or end <= start:
        return np.empty(0)
    batch = int(rate * (end - start) * 1.2) + 16
    times = start + np.cumsum(rng.exponential(1.0 / rate, size=batch))
    while times[-1] < end:
        times = np.concatenate([times, times[-1] + np.cumsum(rng.exponential(1.0 / rate, size=batch))])
    return times[times < end]


def _regions(spec: WorkloadSpec, size: int, seed: int) -> np.ndarray:
    return _rng(seed, REGION_STREAM).choice(len(spec.region_weights), size=size, p=np.asarray(spec.region_weights))


def _assemble(times: np.ndarray, contents: Sequence[int], regions: np.ndarray) -> List[ContentRequest]:
    return [
        ContentRequest(ContentId(int(c)), LocationId(int(r)), float(t))
        for t, c, r in zip(times, contents, regions)
    ]


def popularity_order(total_content: int, seed: int) -> np.ndarray:
    """Content ids ordered from most to least popular; a fixed random permutation per seed."""
    return _rng(seed, POPULARITY_STREAM).permutation(np.arange(1, total_content + 1))


def zipf_pmf(total_content: int, mu: float) -> np.ndarray:
    weights = 1.0 / np.arange(1, total_content + 1) ** mu
    return weights / weights.sum()


def generate_zipf_workload(spec: WorkloadSpec, seed: int) -> List[ContentRequest]:
    """Requests whose content has probability proportional to ``1 / rank ** mu``, ranks following :func:`popularity_order`."""
    if not isinstance(spec.kind, ZipfWorkload):
        raise DomainError('generate_zipf_workload needs a Zipf workload spec.')
    zipf = spec.kind
    if zipf.mu <= 0:
        raise DomainError(f'mu must be strictly positive (got {zipf.mu}).')
    times = poisson_arrivals(spec.arrival_rate, 0.0, spec.duration_s, _rng(seed, ARRIVAL_STREAM))
    ranks = _rng(seed, CONTENT_STREAM).choice(zipf.total_content, size=len(times), p=zipf_pmf(zipf.total_content, zipf.mu))
    contents = popularity_order(zipf.total_content, seed)[ranks]
    return _assemble(times, contents, _regions(spec, len(times), seed))


def reflect(position: int, lo: int, hi: int) -> int:
    """Reflects ``position`` back into ``[lo, hi]``."""
    if lo == hi:
        return lo
    while position < lo or position > hi:
        position = 2 * lo - position if position < lo else 2 * hi - position
    return position


def generate_walk_workload(spec: WorkloadSpec, seed: int) -> List[ContentRequest]:
    """Requests whose content ids follow a random walk with integer steps drawn uniformly from ``[-S, S]``, reflected at the
    bounds of the content-ID space."""
    if not isinstance(spec.kind, WalkWorkload):
        raise DomainError('generate_walk_workload needs a random-walk workload spec.')
    walk = spec.kind
    if not 1 <= walk.start <= walk.total_content:
        raise DomainError(f'Walk start {walk.start} is outside [1, {walk.total_content}].')
    times = poisson_arrivals(spec.arrival_rate, 0.0, spec.duration_s, _rng(seed, ARRIVAL_STREAM))
    steps = _rng(seed, CONTENT_STREAM).integers(-walk.max_step, walk.max_step + 1, size=len(times))
    contents = []
    position = walk.start
    for step in steps:
        contents.append(position)
        position = reflect(position + int(step), 1, walk.total_content)
    return _assemble(times, contents, _regions(spec, len(times), seed))


def generate_workload(spec: WorkloadSpec, seed: int) -> List[ContentRequest]:
    if isinstance(spec.kind, ZipfWorkload):
        return generate_zipf_workload(spec, seed)
    return generate_walk_workload(spec, seed)


def inject_flash_crowd(
        stream: Sequence[ContentRequest],
        event: Surge,
        spec: WorkloadSpec,
        seed: int,
        index: int = 0
) -> List[ContentRequest]:
    """Adds the surge's extra demand to ``stream``.

    Within ``[start_s, start_s + duration_s)`` the event's region receives ``(rate_multiplier - 1)`` times its base rate in
    additional requests, for content drawn uniformly from ``content_range``. Outside the window the stream is unchanged.

    Raises
    ------
    DomainError
        If the event window does not fit within the workload duration.
    """
    end = event.start_s + event.duration_s
    if event.start_s < 0 or end > spec.duration_s:
        raise DomainError(f'Event window [{event.start_s}, {end}) lies outside the workload duration {spec.duration_s}.')
    extra_rate = spec.region_rate(event.region) * (event.rate_multiplier - 1)
    rng = _rng(seed, SURGE_STREAM + index)
    times = poisson_arrivals(extra_rate, event.start_s, end, rng)
    lo, hi = event.content_range
    contents = rng.integers(lo, hi + 1, size=len(times))
    extra = [ContentRequest(ContentId(int(c)), event.region, float(t)) for t, c in zip(times, contents)]
    return list(heapq.merge(stream, extra, key=lambda request: request.time))

"""Latency model between regions and nearest-holder request routing."""

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

from .econ import ContentRequest, LocationId
from .exceptions import ConfigurationError


class LatencyModel:
    """Symmetric matrix of pairwise region latencies in milliseconds, with a zero diagonal.

    Instances are callable and can be passed wherever a latency lookup is expected.

    Raises
    ------
    ConfigurationError
        If the matrix is not square, not symmetric, has a non-zero diagonal or a non-positive off-diagonal entry.
    """

    def __init__(self, matrix: Sequence[Sequence[float]]):
        size = len(matrix)
        rows: List[Tuple[float, ...]] = []
        for i, row in enumerate(matrix):
            if len(row) != size:
                raise ConfigurationError(f'Latency row {i} has {len(row)} entries, expected {size}.')
            rows.append(tuple(float(v) for v in row))
        for i in range(size):
            if rows[i][i] != 0:
                raise ConfigurationError(f'Latency from region {i} to itself must be 0.')
            for j in range(i + 1, size):
                if rows[i][j] != rows[j][i]:
                    raise ConfigurationError(f'Latency between regions {i} and {j} is not symmetric.')
                if rows[i][j] <= 0:
                    raise ConfigurationError(f'Latency between distinct regions {i} and {j} must be positive.')
        self._rows = tuple(rows)

    @property
    def regions(self) -> int:
        return len(self._rows)

    def __call__(self, a: LocationId, b: LocationId) -> float:
        if not (0 <= a < self.regions and 0 <= b < self.regions):
            raise ConfigurationError(f'No latency defined between regions {a} and {b}.')
        return self._rows[a][b]


@dataclass(frozen=True)
class Holder:
    provider: str
    region: LocationId


@dataclass(frozen=True)
class Routing:
    server: str
    latency_ms: float
    sigma: bool
    load: float


def route_request(
        request: ContentRequest,
        holders: Iterable[Holder],
        latency: LatencyModel,
        delay_threshold_ms: float,
        load: float = 1.0
) -> Routing:
    """Sends ``request`` to the holder nearest to its region (ties go to the lowest provider id).

    The request counts as served within the threshold only when the latency is strictly below ``delay_threshold_ms``.
    """
    candidates = sorted((latency(request.location, holder.region), holder.provider) for holder in holders)
    if not candidates:
        raise ConfigurationError(f'No holder for content {request.content}; the origin must always hold it.')
    latency_ms, server = candidates[0]
    return Routing(server=server, latency_ms=latency_ms, sigma=latency_ms < delay_threshold_ms, load=load)

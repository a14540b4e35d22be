"""Append-only simulation event log.

Each record renders to one tab-separated line::

    <time>\t<kind>\t<entity,entity,...>\t<key=value key=value ...>

Times are rendered with 6 fractional digits, floats with 6 fractional digits, currency with 2. Values are formatted when the record
is appended, so a log read back from disk is equal, record for record, to the log kept in memory. Metrics are computed from these
records alone (see :mod:`peering_cdn.metrics`).
"""

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, List, Tuple, Union

SCENARIO = 'scenario'
REQUEST = 'request'
HOTSPOT = 'hotspot'
AUCTION_OPEN = 'auction-open'
AUCTION_REFUSED = 'auction-refused'
BID = 'bid'
AUCTION_CLEAR = 'auction-clear'
AUCTION_RETRY = 'auction-retry'
SLA_RISK = 'sla-risk'
POLICY_DENY = 'policy-deny'
WINNER_DROPPED = 'winner-dropped'
REPLICA_PLACED = 'replica-placed'
REPLICA_EVICTED = 'replica-evicted'
REPLICA_EXPIRED = 'replica-expired'
REPLICA_REMOVED = 'replica-removed'
VO_FORMED = 'vo-formed'
VO_VOID = 'vo-void'
VO_KEPT = 'vo-kept'
VO_REARRANGED = 'vo-rearranged'
VO_DISBANDED = 'vo-disbanded'
RENEGOTIATION = 'renegotiation'
FLASH_CROWD = 'flash-crowd'
SCHEDULED_NOTICE = 'scheduled-notice'
PRICE_CHANGE = 'price-change'

_EMPTY = '-'

Value = Union[str, int, float, bool, Decimal, Enum, Iterable]


def format_value(value: Value) -> str:
    """Renders a payload value as a token without whitespace."""
    if isinstance(value, bool):
        return '1' if value else '0'
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, Decimal):
        return str(value)
    if isinstance(value, float):
        return f'{value:.6f}'
    if isinstance(value, (int, str)):
        text = str(value)
    else:
        text = ','.join(format_value(v) for v in value)
    if any(ch.isspace() for ch in text) or '=' in text:
        raise ValueError(f'Log values cannot contain whitespace or "=" (got {text!r}).')
    return text or _EMPTY


@dataclass(frozen=True)
class LogRecord:
    time: str
    kind: str
    entities: Tuple[str, ...]
    payload: Tuple[Tuple[str, str], ...]

    @property
    def at(self) -> float:
        return float(self.time)

    def get(self, key: str, default: str = '') -> str:
        for k, v in self.payload:
            if k == key:
                return v
        return default

    def render(self) -> str:
        entities = ','.join(self.entities) or _EMPTY
        payload = ' '.join(f'{k}={v}' for k, v in self.payload) or _EMPTY
        return f'{self.time}\t{self.kind}\t{entities}\t{payload}'

    @classmethod
    def parse(cls, line: str) -> 'LogRecord':
        time, kind, entities, payload = line.rstrip('\n').split('\t')
        return cls(
            time=time,
            kind=kind,
            entities=() if entities == _EMPTY else tuple(entities.split(',')),
            payload=() if payload == _EMPTY else tuple(
                tuple(item.split('=', 1)) for item in payload.split(' ')  # type: ignore [misc]
            ),
        )


class EventLog:
    """In-memory event log that can be written to and read back from a text file."""

    def __init__(self, records: Iterable[LogRecord] = ()):
        self.records: List[LogRecord] = list(records)

    def __iter__(self) -> Iterator[LogRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, time: float, kind: str, entities: Iterable[object] = (), /, **payload: Value) -> LogRecord:
        record = LogRecord(
            time=f'{time:.6f}',
            kind=kind,
            entities=tuple(format_value(e) if not isinstance(e, str) else e for e in entities),
            payload=tuple((key.replace('_', '-'), format_value(value)) for key, value in payload.items()),
        )
        self.records.append(record)
        return record

    def of_kind(self, *kinds: str) -> List[LogRecord]:
        return [record for record in self.records if record.kind in kinds]

    def render(self) -> str:
        return ''.join(record.render() + '\n' for record in self.records)

    def write(self, path: Path) -> Path:
        path = Path(path)
        with path.open('w', newline='\n') as dst:
            dst.write(self.render())
        return path

    @classmethod
    def read(cls, path: Path) -> 'EventLog':
        with Path(path).open() as src:
            return cls(LogRecord.parse(line) for line in src if line.strip())

"""Run metrics, computed from event-log records alone.

Because :func:`collect_metrics` only reads the formatted records, metrics recomputed from an exported log file are identical to the
metrics of the run that wrote it. Sums over latencies, loads and payments are done in :class:`~decimal.Decimal` on the logged
values.
"""

import json
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from decimal import Decimal
from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple

from . import eventlog as ev
from .econ import to_currency
from .eventlog import LogRecord

ZERO = Decimal('0')


@dataclass
class Metrics:
    scenario_hash: str = ''
    seed: int = 0
    auctions_enabled: bool = True
    total_requests: int = 0
    served_within_threshold: int = 0
    sla_violation_rate: float = 0.0
    mean_latency_ms: float = 0.0
    total_penalty_load: Decimal = ZERO
    total_penalty: Decimal = Decimal('0.00')
    total_payments: Decimal = Decimal('0.00')
    hotspots: int = 0
    auctions_opened: int = 0
    auctions_awarded: int = 0
    auctions_no_winner: int = 0
    auctions_refused: int = 0
    sla_risk_events: int = 0
    policy_denials: int = 0
    winners_dropped: int = 0
    replicas_placed: int = 0
    replicas_evicted: int = 0
    replicas_expired: int = 0
    replicas_removed: int = 0
    vos_formed: Dict[str, int] = field(default_factory=dict)
    renegotiations: Dict[str, int] = field(default_factory=dict)
    revenue: Dict[str, Decimal] = field(default_factory=dict)
    expenditure: Dict[str, Decimal] = field(default_factory=dict)

    def flat_items(self) -> List[Tuple[str, str]]:
        """``(key, value)`` pairs with nested mappings flattened to dotted keys, in field order."""
        items: List[Tuple[str, str]] = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, dict):
                items.extend((f'{f.name}.{key}', _render(v)) for key, v in sorted(value.items()))
            else:
                items.append((f.name, _render(value)))
        return items

    def to_text(self) -> str:
        return ''.join(f'{key}={value}\n' for key, value in self.flat_items())

    def to_dict(self) -> Dict[str, Any]:
        return json.loads(json.dumps(asdict(self), default=str))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n'

    def write(self, out_dir: Path) -> Tuple[Path, Path]:
        """Writes ``metrics.txt`` (flat ``key=value`` lines) and ``metrics.json`` to ``out_dir``."""
        text_path = Path(out_dir) / 'metrics.txt'
        json_path = Path(out_dir) / 'metrics.json'
        text_path.write_text(self.to_text())
        json_path.write_text(self.to_json())
        return text_path, json_path


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def collect_metrics(records: Iterable[LogRecord]) -> Metrics:
    """Computes run metrics from the records of an event log.

    The penalty total covers the delay term only (``load`` of every request served outside the threshold), converted to currency
    with the ``alpha`` of the scenario record. Each placed replica earns its seller the VO payment and costs the VO's buyer the
    same amount.
    """
    metrics = Metrics()
    served = 0
    latency_sum = ZERO
    penalty_load = ZERO
    alpha = ZERO
    buyers: Dict[str, str] = {}
    placements: List[LogRecord] = []
    vos: Counter = Counter()
    renegotiations: Counter = Counter()
    counts: Counter = Counter()

    for record in records:
        kind = record.kind
        counts[kind] += 1
        if kind == ev.SCENARIO and not metrics.scenario_hash:
            metrics.scenario_hash = record.get('hash')
            metrics.seed = int(record.get('seed', '0'))
            metrics.auctions_enabled = record.get('auctions', '1') == '1'
            alpha = Decimal(record.get('alpha', '0'))
        elif kind == ev.REQUEST:
            latency_sum += Decimal(record.get('latency-ms'))
            if record.get('sigma') == '1':
                served += 1
            else:
                penalty_load += Decimal(record.get('load'))
        elif kind == ev.AUCTION_CLEAR:
            if record.get('outcome') == 'awarded':
                metrics.auctions_awarded += 1
            else:
                metrics.auctions_no_winner += 1
        elif kind == ev.REPLICA_PLACED:
            if record.get('retained') != '1':
                metrics.replicas_placed += 1
            placements.append(record)
        elif kind == ev.VO_FORMED:
            buyers[record.get('vo')] = record.entities[0]
            vos[record.get('kind')] += 1
        elif kind == ev.RENEGOTIATION:
            renegotiations[record.get('kind')] += 1

    total = counts[ev.REQUEST]
    metrics.total_requests = total
    metrics.served_within_threshold = served
    if total:
        metrics.sla_violation_rate = (total - served) / total
        metrics.mean_latency_ms = float(latency_sum / total)
    metrics.total_penalty_load = penalty_load
    metrics.total_penalty = to_currency(alpha * penalty_load)

    revenue: Dict[str, Decimal] = {}
    expenditure: Dict[str, Decimal] = {}
    for record in placements:
        payment = Decimal(record.get('payment'))
        seller = record.entities[0]
        buyer = buyers.get(record.get('vo'), '')
        revenue[seller] = revenue.get(seller, Decimal('0.00')) + payment
        expenditure[buyer] = expenditure.get(buyer, Decimal('0.00')) + payment
    metrics.revenue = revenue
    metrics.expenditure = expenditure
    metrics.total_payments = sum(revenue.values(), Decimal('0.00'))

    metrics.hotspots = counts[ev.HOTSPOT]
    metrics.auctions_opened = counts[ev.AUCTION_OPEN]
    metrics.auctions_refused = counts[ev.AUCTION_REFUSED]
    metrics.sla_risk_events = counts[ev.SLA_RISK]
    metrics.policy_denials = counts[ev.POLICY_DENY]
    metrics.winners_dropped = counts[ev.WINNER_DROPPED]
    metrics.replicas_evicted = counts[ev.REPLICA_EVICTED]
    metrics.replicas_expired = counts[ev.REPLICA_EXPIRED]
    metrics.replicas_removed = counts[ev.REPLICA_REMOVED]
    metrics.vos_formed = dict(sorted(vos.items()))
    metrics.renegotiations = dict(sorted(renegotiations.items()))
    return metrics


def summary(metrics: Metrics) -> str:
    """One-page human-readable summary of a run."""
    lines = [
        f'Scenario {metrics.scenario_hash} (seed {metrics.seed}), auctions {"enabled" if metrics.auctions_enabled else "disabled"}',
        '',
        f'Requests:              {metrics.total_requests}',
        f'Served within D:       {metrics.served_within_threshold}',
        f'SLA violation rate:    {metrics.sla_violation_rate:.4f}',
        f'Mean latency (ms):     {metrics.mean_latency_ms:.2f}',
        f'Penalty (load/money):  {metrics.total_penalty_load} / {metrics.total_penalty}',
        '',
        f'Hotspots:              {metrics.hotspots}',
        f'Auctions:              {metrics.auctions_opened} opened, {metrics.auctions_awarded} awarded, '
        f'{metrics.auctions_no_winner} without winner, {metrics.auctions_refused} refused',
        f'SLA risk events:       {metrics.sla_risk_events}',
        f'Replicas:              {metrics.replicas_placed} placed, {metrics.replicas_evicted} evicted, '
        f'{metrics.replicas_expired} expired, {metrics.replicas_removed} removed',
        f'VOs formed:            {_pairs(metrics.vos_formed)}',
        f'Renegotiations:        {_pairs(metrics.renegotiations)}',
        f'Total payments:        {metrics.total_payments}',
        '',
        'Provider      revenue   expenditure',
    ]
    for provider in sorted({*metrics.revenue, *metrics.expenditure}):
        lines.append(f'{provider:<12}{metrics.revenue.get(provider, ZERO):>9}{metrics.expenditure.get(provider, ZERO):>14}')
    return '\n'.join(lines)


def _pairs(values: Dict[str, int]) -> str:
    return ', '.join(f'{key}={count}' for key, count in values.items()) or 'none'

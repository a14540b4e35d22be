"""Scenario documents: one JSON file describes one reproducible experiment.

Use :func:`load_scenario` to read a file, or :meth:`Scenario.from_dict` for an already-parsed document. Both validate the whole
document first and raise :exc:`~peering_cdn.exceptions.ScenarioInvalid` listing *every* violation found; :func:`validate` returns
the same list without raising. Structure is checked against the bundled JSON Schema (see :func:`scenario_schema`); optional
fields fall back to the defaults in this module.
"""

import copy
import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

from jsonschema import Draft202012Validator
from jsonschema.exceptions import ValidationError

from .econ import COEFFICIENT_TOLERANCE, ContentId, EconParams, LocationId, WalkParams, ZipfParams
from .exceptions import ConfigurationError, ScenarioFileError, ScenarioInvalid
from .routing import LatencyModel
from .vo import PolicyEffect, PolicyPredicate, PolicyRule, VO_SCOPE
from .workload import WEIGHT_TOLERANCE, FlashCrowdEvent, ScheduledEvent, WalkWorkload, WorkloadSpec, ZipfWorkload

BUNDLED_DIR = Path(__file__).parent / 'scenarios'

ECON_DEFAULTS = {
    'alpha': 0.1,
    'beta': 0.6,
    'gamma': 0.2,
    'lambda': 0.2,
    'rho': 0.5,
    'delay_threshold_ms': 50.0,
    'content_kernel_width': 10.0,
    'location_kernel_width': 100.0,
    'capacity_threshold': 100.0,
    'time_unit_s': 1.0,
}
WALK_DEFAULTS = {'max_step': 1, 'mean_step': 0.0, 'step_decay': 0.9}
ZIPF_DEFAULTS = {'mu': 0.8}
WORKLOAD_DEFAULTS = {'kind': 'zipf', 'arrival_rate': 1.0, 'start_content': 1}
AUCTION_DEFAULTS = {
    'replicas': 1,
    'max_retries': 3,
    'cheaper_entrant_margin': 0.1,
    'demand_change_threshold': 0.0,
    'renegotiation_interval_s': 30.0,
    'max_eagerness': 0.25,
    'upload_kbps': 100.0,
    'download_kbps': 100.0,
    'replica_duration_s': 300.0,
    'min_duration_s': 1.0,
    'cold_start_budget': None,
    'retry_cooldown_s': 60.0,
}
MARKET_DEFAULTS = {'predictor': 'zipf', 'revenue_per_request': 0.01}
DETECTION_DEFAULTS = {'interval_s': 10.0, 'load_window_s': 60.0, 'min_penalty': 0.0, 'request_load': 1.0}
PROVIDER_DEFAULTS = {
    'capacity_mb': 0.0,
    'unit_storage_cost': 0.0,
    'upload_kbps': 1000.0,
    'download_kbps': 1000.0,
    'capacity_threshold': None,
    'eagerness': 0.0,
}
CONTENT_DEFAULTS = {'size_mb': 10.0}

SECTION_DEFAULTS: Dict[str, Mapping[str, Any]] = {
    'econ': ECON_DEFAULTS,
    'walk': WALK_DEFAULTS,
    'zipf': ZIPF_DEFAULTS,
    'workload': WORKLOAD_DEFAULTS,
    'auction': AUCTION_DEFAULTS,
    'market': MARKET_DEFAULTS,
    'detection': DETECTION_DEFAULTS,
    'contents': CONTENT_DEFAULTS,
}

SCHEMA_PATH = Path(__file__).parent / 'schemas' / 'scenario.json'

_SCHEMA_CODES = {
    'type': 'type',
    'minimum': 'range',
    'exclusiveMinimum': 'range',
    'maximum': 'range',
    'exclusiveMaximum': 'range',
    'minItems': 'range',
    'maxItems': 'range',
}
_TYPE_NAMES = {'number': 'a number', 'integer': 'an integer', 'string': 'a string', 'object': 'an object', 'array': 'a list'}
_BOUNDS = {'minimum': '>=', 'exclusiveMinimum': '>', 'maximum': '<=', 'exclusiveMaximum': '<'}


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f'{self.path}: {self.message} [{self.code}]'


@dataclass(frozen=True)
class ProviderConfig:
    id: str
    region: LocationId
    capacity_mb: float
    unit_storage_cost: float
    upload_kbps: float
    download_kbps: float
    capacity_threshold: float
    eagerness: float = 0.0


@dataclass(frozen=True)
class OwnerRange:
    provider: str
    first: int
    last: int

    def __contains__(self, content: object) -> bool:
        return isinstance(content, int) and self.first <= content <= self.last


@dataclass(frozen=True)
class PriceChange:
    time_s: float
    provider: str
    unit_storage_cost: float


@dataclass(frozen=True)
class AuctionConfig:
    replicas: int = 1
    max_retries: int = 3
    cheaper_entrant_margin: float = 0.1
    demand_change_threshold: float = 0.0
    renegotiation_interval_s: float = 30.0
    max_eagerness: float = 0.25
    upload_kbps: float = 100.0
    download_kbps: float = 100.0
    replica_duration_s: float = 300.0
    min_duration_s: float = 1.0
    cold_start_budget: Optional[float] = None
    retry_cooldown_s: float = 60.0


@dataclass(frozen=True)
class MarketConfig:
    predictor: str = 'zipf'
    revenue_per_request: float = 0.01


@dataclass(frozen=True)
class DetectionConfig:
    interval_s: float = 10.0
    load_window_s: float = 60.0
    min_penalty: float = 0.0
    request_load: float = 1.0


@lru_cache(maxsize=None)
def scenario_schema() -> Dict[str, Any]:
    """The JSON Schema every scenario document must satisfy, as shipped in ``peering_cdn/schemas/scenario.json``."""
    with SCHEMA_PATH.open() as src:
        return json.load(src)


def _path(parts: Iterable[Union[str, int]]) -> str:
    return '.'.join(str(part) for part in parts) or '$'


def _got(value: Any) -> str:
    return f'(got {value!r})'


def _schema_message(error: ValidationError, schema: Mapping[str, Any]) -> str:
    if 'message' in schema:
        return f'{schema["message"]} {_got(error.instance)}'
    if error.validator == 'type':
        types = error.validator_value if isinstance(error.validator_value, list) else [error.validator_value]
        names = ' or '.join(_TYPE_NAMES.get(t, t) for t in types if t != 'null')
        return f'must be {names} {_got(error.instance)}'
    if error.validator in _BOUNDS:
        return f'must be {_BOUNDS[error.validator]} {error.validator_value} {_got(error.instance)}'
    if error.validator == 'enum':
        return f'must be one of {", ".join(map(str, error.validator_value))} {_got(error.instance)}'
    return error.message


def _schema_violations(data: Any) -> List[Violation]:
    violations: List[Violation] = []
    for error in Draft202012Validator(scenario_schema()).iter_errors(data):
        parts = list(error.absolute_path)
        if error.validator == 'required':
            # One error per missing field, each naming the whole list
            for key in error.validator_value:
                missing = Violation('missing-field', _path(parts + [key]), 'is required')
                if key not in error.instance and missing not in violations:
                    violations.append(missing)
            continue
        schema = error.schema if isinstance(error.schema, dict) else {}
        code = schema.get('violation', _SCHEMA_CODES.get(str(error.validator), 'invalid'))
        violations.append(Violation(code, _path(parts), _schema_message(error, schema)))
    return violations


def _number(value: Any) -> Optional[float]:
    return value if isinstance(value, (int, float)) and not isinstance(value, bool) else None


def _integer(value: Any) -> Optional[int]:
    number = _number(value)
    return int(number) if number is not None and float(number).is_integer() else None


def _section(data: Mapping, key: str) -> Mapping:
    value = data.get(key)
    return value if isinstance(value, dict) else {}


def _objects(data: Mapping, key: str) -> List[Tuple[str, Mapping]]:
    items = data.get(key)
    if not isinstance(items, list):
        return []
    return [(f'{key}.{i}', item) for i, item in enumerate(items) if isinstance(item, dict)]


def _content_range(value: Any) -> Optional[Tuple[int, int]]:
    if not isinstance(value, list) or len(value) != 2:
        return None
    lo, hi = _integer(value[0]), _integer(value[1])
    return None if lo is None or hi is None else (lo, hi)


class _Document:
    """Cross-field rules: everything about a scenario that relates one field to another.

    Fields whose shape the schema already rejected are skipped.
    """

    def __init__(self, data: Mapping[str, Any]):
        self.data = data
        matrix = data.get('latency_ms')
        self.regions = len(matrix) if isinstance(matrix, list) else 0
        self.duration = _number(data.get('duration_s'))
        contents = _section(data, 'contents')
        total = _integer(contents.get('total'))
        self.total = total if total is not None and total >= 1 else None
        self.providers = [p['id'] for _, p in _objects(data, 'providers') if isinstance(p.get('id'), str)]
        self.auction = _section(data, 'auction')

    def violations(self) -> Iterator[Violation]:
        yield from self.latency()
        yield from self.coefficients()
        yield from self.provider_rules()
        yield from self.ownership()
        yield from self.workload()
        yield from self.events()
        yield from self.policies()
        yield from self.price_changes()

    def region(self, value: Any, path: str) -> Iterator[Violation]:
        region = _integer(value)
        if self.regions and region is not None and region >= self.regions:
            yield Violation('unknown-region', path, f'region {region} is not in the latency matrix (0..{self.regions - 1})')

    def provider(self, value: Any, path: str) -> Iterator[Violation]:
        if isinstance(value, str) and value not in self.providers:
            yield Violation('unknown-provider', path, f'unknown provider {value!r}')

    def content_range(self, value: Any, path: str) -> Iterator[Violation]:
        bounds = _content_range(value)
        if bounds is None or self.total is None:
            return
        lo, hi = bounds
        if not 1 <= lo <= hi <= self.total:
            yield Violation('content-range', path, f'must be [lo, hi] with 1 <= lo <= hi <= {self.total} {_got(value)}')

    def latency(self) -> Iterator[Violation]:
        matrix = self.data.get('latency_ms')
        if not (isinstance(matrix, list) and matrix and all(isinstance(row, list) for row in matrix)):
            return
        if not all(_number(value) is not None for row in matrix for value in row):
            return
        try:
            LatencyModel(matrix)
        except ConfigurationError as e:
            yield Violation('latency-matrix', 'latency_ms', str(e))

    def coefficients(self) -> Iterator[Violation]:
        econ = _section(self.data, 'econ')
        coefficients = [_number(_pick(econ, ECON_DEFAULTS, key)) for key in ('beta', 'gamma', 'lambda')]
        if all(c is not None for c in coefficients):
            total = sum(coefficients)  # type: ignore [arg-type]
            if abs(total - 1.0) > COEFFICIENT_TOLERANCE:
                yield Violation('coefficient-sum', 'econ', f'beta + gamma + lambda must equal 1 (got {total})')

    def provider_rules(self) -> Iterator[Violation]:
        seen = set()
        max_eagerness = _number(_pick(self.auction, AUCTION_DEFAULTS, 'max_eagerness'))
        for path, provider in _objects(self.data, 'providers'):
            pid = provider.get('id')
            if isinstance(pid, str):
                if pid in seen:
                    yield Violation('duplicate-provider', f'{path}.id', f'provider {pid!r} is declared twice')
                seen.add(pid)
            yield from self.region(provider.get('region'), f'{path}.region')
            eagerness = _number(provider.get('eagerness'))
            if eagerness is not None and max_eagerness is not None and abs(eagerness) > max_eagerness:
                yield Violation('eagerness-bound', f'{path}.eagerness',
                                f'|eagerness| must not exceed {max_eagerness} (got {eagerness})')

    def ownership(self) -> Iterator[Violation]:
        contents = _section(self.data, 'contents')
        for key in _section(contents, 'sizes'):
            if key.isdigit() and self.total is not None and not 1 <= int(key) <= self.total:
                yield Violation('content-range', f'contents.sizes.{key}', 'is not a content id')

        owners = _objects(contents, 'owners')
        covered: Counter = Counter()
        for path, owner in owners:
            path = f'contents.{path}'
            yield from self.provider(owner.get('provider'), f'{path}.provider')
            first, last = _integer(owner.get('first')), _integer(owner.get('last'))
            if first is None or last is None:
                continue
            if first > last:
                yield Violation('content-range', path, f'first {first} is after last {last}')
            elif self.total is not None and last > self.total:
                yield Violation('content-range', f'{path}.last', f'is after the last content ({self.total}) (got {last})')
            else:
                covered.update(range(first, last + 1))
        if owners and self.total is not None:
            missing = sum(1 for c in range(1, self.total + 1) if c not in covered)
            shared = sum(1 for count in covered.values() if count > 1)
            if missing or shared:
                yield Violation('content-owner-coverage', 'contents.owners',
                                f'every content needs exactly one owner ({missing} without an owner, {shared} with several)')

    def workload(self) -> Iterator[Violation]:
        workload = _section(self.data, 'workload')
        if _pick(workload, WORKLOAD_DEFAULTS, 'kind') == 'random_walk':
            start = _integer(_pick(workload, WORKLOAD_DEFAULTS, 'start_content'))
            if start is not None and self.total is not None and start > self.total:
                yield Violation('content-range', 'workload.start_content', f'must be within [1, {self.total}] (got {start})')
        weights = workload.get('region_weights')
        if not isinstance(weights, list) or not all(_number(w) is not None for w in weights):
            return
        if self.regions and len(weights) != self.regions:
            yield Violation('region-weights-length', 'workload.region_weights', f'needs one weight per region ({self.regions})')
        elif abs(sum(weights) - 1.0) > WEIGHT_TOLERANCE:
            yield Violation('region-weights-sum', 'workload.region_weights', f'must sum to 1 (got {sum(weights)})')

    def events(self) -> Iterator[Violation]:
        cold_start_budget = self.auction.get('cold_start_budget')
        for key in ('flash_crowds', 'scheduled_events'):
            for path, event in _objects(self.data, key):
                start, length = _number(event.get('start_s')), _number(event.get('duration_s'))
                if start is not None and length is not None and self.duration is not None and start + length > self.duration:
                    yield Violation('flash-window', path, f'window [{start}, {start + length}) ends after the scenario ({self.duration} s)')
                yield from self.region(event.get('region'), f'{path}.region')
                yield from self.content_range(event.get('content_range'), f'{path}.content_range')
                if key != 'scheduled_events':
                    continue
                notice = _number(event.get('advance_notice_s'))
                if notice is not None and start is not None and notice > start:
                    yield Violation('advance-notice', f'{path}.advance_notice_s', 'the notice would arrive before the scenario starts')
                if event.get('rate_multiplier', 1.0) == 1 and cold_start_budget is None:
                    yield Violation('scheduled-budget', f'{path}.rate_multiplier',
                                    'an event without extra demand needs auction.cold_start_budget to fund its replicas')

    def policies(self) -> Iterator[Violation]:
        for path, rule in _objects(self.data, 'policies'):
            subject = rule.get('subject', VO_SCOPE)
            if subject != VO_SCOPE:
                yield from self.provider(subject, f'{path}.subject')
            bound = rule.get('bound')
            if rule.get('predicate') == PolicyPredicate.FORBIDDEN_CONTENT_RANGE.value:
                yield from self.content_range(bound, f'{path}.bound')
            elif rule.get('predicate') == PolicyPredicate.ALLOWED_REGIONS.value and isinstance(bound, list):
                for j, region in enumerate(bound):
                    yield from self.region(region, f'{path}.bound.{j}')

    def price_changes(self) -> Iterator[Violation]:
        for path, change in _objects(self.data, 'price_changes'):
            yield from self.provider(change.get('provider'), f'{path}.provider')
            at = _number(change.get('time_s'))
            if at is not None and self.duration is not None and at > self.duration:
                yield Violation('range', f'{path}.time_s', f'is after the end of the scenario ({self.duration} s)')


def validate(data: Any) -> List[Violation]:
    """Checks a parsed scenario document and returns every violation found (an empty list when it is valid).

    The document's structure is checked against :func:`scenario_schema` first; the rules that relate fields to each other follow.
    """
    violations = _schema_violations(data)
    if isinstance(data, dict):
        violations.extend(_Document(data).violations())
    return violations


def _pick(section: Mapping, defaults: Mapping, key: str) -> Any:
    value = section.get(key)
    return defaults[key] if value is None else value


@dataclass(frozen=True)
class Scenario:
    """A validated scenario with every default resolved. ``raw`` keeps the document it was built from."""
    name: str
    seed: int
    duration_s: float
    latency: LatencyModel
    econ: EconParams
    walk: WalkParams
    zipf: ZipfParams
    workload: WorkloadSpec
    providers: Tuple[ProviderConfig, ...]
    default_size_mb: float
    sizes: Mapping[int, float]
    owners: Tuple[OwnerRange, ...]
    flash_crowds: Tuple[FlashCrowdEvent, ...] = ()
    scheduled_events: Tuple[ScheduledEvent, ...] = ()
    policies: Tuple[PolicyRule, ...] = ()
    price_changes: Tuple[PriceChange, ...] = ()
    auction: AuctionConfig = AuctionConfig()
    market: MarketConfig = MarketConfig()
    detection: DetectionConfig = DetectionConfig()
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def hash(self) -> str:
        return scenario_hash(self.raw)

    def owner_of(self, content: ContentId) -> str:
        for owner in self.owners:
            if content in owner:
                return owner.provider
        raise KeyError(content)

    def size_of(self, content: ContentId) -> float:
        return self.sizes.get(content, self.default_size_mb)

    def provider(self, provider_id: str) -> ProviderConfig:
        return next(p for p in self.providers if p.id == provider_id)

    def with_seed(self, seed: Optional[int]) -> 'Scenario':
        """Returns a copy of the scenario with its seed overridden (``None`` keeps the current seed)."""
        if seed is None:
            return self
        return replace(self, seed=seed, raw={**self.raw, 'seed': seed})

    @classmethod
    def from_dict(cls, d: Any) -> 'Scenario':
        """Builds a :class:`Scenario` from a parsed scenario document.

        Raises
        ------
        ScenarioInvalid
            If the document has one or more violations. All of them are reported.
        """
        violations = validate(d)
        if violations:
            raise ScenarioInvalid(violations)
        d = copy.deepcopy(d)

        latency = LatencyModel(d['latency_ms'])
        econ_raw = d.get('econ', {})
        econ = EconParams(**{('lambda_' if key == 'lambda' else key): float(_pick(econ_raw, ECON_DEFAULTS, key))
                             for key in ECON_DEFAULTS})
        walk_raw = d.get('walk', {})
        walk = WalkParams(max_step=int(_pick(walk_raw, WALK_DEFAULTS, 'max_step')),
                          mean_step=float(_pick(walk_raw, WALK_DEFAULTS, 'mean_step')),
                          step_decay=float(_pick(walk_raw, WALK_DEFAULTS, 'step_decay')))
        contents = d['contents']
        total = int(contents['total'])
        zipf = ZipfParams(mu=float(_pick(d.get('zipf', {}), ZIPF_DEFAULTS, 'mu')), total_content=total)

        duration = float(d['duration_s'])
        workload_raw = d.get('workload', {})
        regions = latency.regions
        weights = workload_raw.get('region_weights') or [1.0 / regions] * regions
        kind: Union[ZipfWorkload, WalkWorkload]
        if _pick(workload_raw, WORKLOAD_DEFAULTS, 'kind') == 'zipf':
            kind = ZipfWorkload(mu=zipf.mu, total_content=total)
        else:
            kind = WalkWorkload(start=int(_pick(workload_raw, WORKLOAD_DEFAULTS, 'start_content')), max_step=walk.max_step,
                                total_content=total)
        workload = WorkloadSpec(kind=kind, arrival_rate=float(_pick(workload_raw, WORKLOAD_DEFAULTS, 'arrival_rate')),
                                region_weights=tuple(float(w) for w in weights), duration_s=duration)

        providers = tuple(
            ProviderConfig(
                id=p['id'],
                region=LocationId(p['region']),
                capacity_mb=float(_pick(p, PROVIDER_DEFAULTS, 'capacity_mb')),
                unit_storage_cost=float(_pick(p, PROVIDER_DEFAULTS, 'unit_storage_cost')),
                upload_kbps=float(_pick(p, PROVIDER_DEFAULTS, 'upload_kbps')),
                download_kbps=float(_pick(p, PROVIDER_DEFAULTS, 'download_kbps')),
                capacity_threshold=float(p.get('capacity_threshold') or econ.capacity_threshold),
                eagerness=float(_pick(p, PROVIDER_DEFAULTS, 'eagerness')),
            )
            for p in d['providers']
        )

        flash_crowds = tuple(
            FlashCrowdEvent(start_s=float(e['start_s']), duration_s=float(e['duration_s']), region=LocationId(e['region']),
                            content_range=(e['content_range'][0], e['content_range'][1]),
                            rate_multiplier=float(e['rate_multiplier']))
            for e in d.get('flash_crowds', [])
        )
        scheduled = tuple(
            ScheduledEvent(start_s=float(e['start_s']), duration_s=float(e['duration_s']), region=LocationId(e['region']),
                           content_range=(e['content_range'][0], e['content_range'][1]),
                           advance_notice_s=float(e['advance_notice_s']), rate_multiplier=float(e.get('rate_multiplier', 1.0)))
            for e in d.get('scheduled_events', [])
        )
        policies = tuple(
            PolicyRule(
                subject=rule.get('subject', VO_SCOPE),
                predicate=PolicyPredicate(rule['predicate']),
                bound=tuple(rule['bound']) if isinstance(rule['bound'], list) else float(rule['bound']),
                effect=PolicyEffect(rule.get('effect', 'deny')),
            )
            for rule in d.get('policies', [])
        )
        price_changes = tuple(
            PriceChange(time_s=float(c['time_s']), provider=c['provider'], unit_storage_cost=float(c['unit_storage_cost']))
            for c in d.get('price_changes', [])
        )

        auction_raw = d.get('auction', {})
        auction = AuctionConfig(**{key: _pick(auction_raw, AUCTION_DEFAULTS, key) for key in AUCTION_DEFAULTS})
        market_raw = d.get('market', {})
        market = MarketConfig(**{key: _pick(market_raw, MARKET_DEFAULTS, key) for key in MARKET_DEFAULTS})
        detection_raw = d.get('detection', {})
        detection = DetectionConfig(**{key: float(_pick(detection_raw, DETECTION_DEFAULTS, key)) for key in DETECTION_DEFAULTS})

        return cls(
            name=d.get('name', ''),
            seed=int(d.get('seed', 0)),
            duration_s=duration,
            latency=latency,
            econ=econ,
            walk=walk,
            zipf=zipf,
            workload=workload,
            providers=providers,
            default_size_mb=float(_pick(contents, CONTENT_DEFAULTS, 'size_mb')),
            sizes={int(key): float(value) for key, value in contents.get('sizes', {}).items()},
            owners=tuple(OwnerRange(o['provider'], int(o['first']), int(o['last'])) for o in contents['owners']),
            flash_crowds=flash_crowds,
            scheduled_events=scheduled,
            policies=policies,
            price_changes=price_changes,
            auction=auction,
            market=market,
            detection=detection,
            raw=d,
        )


def scenario_hash(data: Mapping[str, Any]) -> str:
    """Short content hash of a scenario document. The seed is left out, so runs of one scenario under different seeds share it."""
    canonical = json.dumps({k: v for k, v in data.items() if k != 'seed'}, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


def read_scenario_file(path: Union[str, Path]) -> Any:
    """Reads and parses a scenario file without validating it.

    Raises
    ------
    ScenarioFileError
        If the file cannot be read or is not valid JSON.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioFileError(f'Could not read scenario file {path}: {e.strerror or e}') from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioFileError(f'{path} is not valid JSON: {e}') from None


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Reads, validates and builds the scenario stored at ``path``.

    Raises
    ------
    ScenarioFileError
        If the file cannot be read or parsed.
    ScenarioInvalid
        If the document violates one or more invariants.
    """
    return Scenario.from_dict(read_scenario_file(path))


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``hotspot``, ``walk`` or ``zipf``)."""
    path = BUNDLED_DIR / f'{name}.json'
    if not path.exists():
        raise ScenarioFileError(f'No bundled scenario named "{name}".')
    return path


def _parse_index(key: str, container: Any, path: str) -> Union[int, str]:
    if isinstance(container, list):
        if not key.isdigit() or int(key) >= len(container):
            raise KeyError(f'{path} has no element {key}')
        return int(key)
    return key


def set_parameter(data: Mapping[str, Any], path: str, value: float) -> Dict[str, Any]:
    """Returns a copy of ``data`` with the numeric field at the dotted ``path`` (for example ``econ.alpha`` or
    ``providers.2.unit_storage_cost``) set to ``value``. Fields left out of the document can be set when they have a numeric
    default.

    Raises
    ------
    KeyError
        If ``path`` does not address a numeric field.
    """
    updated = copy.deepcopy(dict(data))
    keys = path.split('.')
    container: Any = updated
    for depth, key in enumerate(keys[:-1]):
        index = _parse_index(key, container, '.'.join(keys[:depth]) or '$')
        if isinstance(container, dict) and index not in container and depth == 0 and key in SECTION_DEFAULTS:
            container[key] = {}
        try:
            container = container[index]
        except (KeyError, IndexError, TypeError):
            raise KeyError(f'{path} does not exist in the scenario') from None
    last = _parse_index(keys[-1], container, '.'.join(keys[:-1]))
    if not isinstance(container, (dict, list)):
        raise KeyError(f'{path} does not exist in the scenario')
    if isinstance(container, dict) and last not in container:
        current = SECTION_DEFAULTS.get(keys[0], {}).get(str(last)) if len(keys) == 2 else None
    else:
        current = container[last]
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise KeyError(f'{path} is not a numeric field')
    container[last] = int(value) if isinstance(current, int) and float(value).is_integer() else value
    return updated

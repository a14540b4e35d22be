"""Deterministic discrete-event simulation of peering CDN providers.

A :class:`Simulation` owns one isolated world: the surrogate servers, the service registry, the VO scheduler, the event queue and
the event log. Events are processed in time order, ties in insertion order, and every state change is written to the log. Nothing
in a run depends on the wall clock, so the same scenario and seed always produce the same log.
"""

import heapq
import itertools
import logging
import math
from collections import defaultdict, deque
from dataclasses import dataclass
from decimal import Decimal
from typing import Callable, Deque, Dict, List, Mapping, Optional, Tuple, Union

from . import eventlog as ev
from .auction import (
    AuctionOutcome,
    AuctionPolicy,
    Awarded,
    Bid,
    MarketSnapshot,
    NoWinner,
    NoWinnerReason,
    RenegotiationEvent,
    detect_renegotiation,
    open_auction,
    retry_after_no_winner,
)
from .econ import (
    ContentId,
    ContentRequest,
    HistoryRecord,
    LoadRecord,
    LocationId,
    bid_amount,
    payoff_max,
    penalty,
    storage_cost,
    to_currency,
    utility,
)
from .eventlog import EventLog
from .exceptions import AuctionRefused, InsufficientCapacity
from .predictors import PREDICTORS, RevenuePredictor, get_predictor
from .routing import Holder, Routing, route_request
from .scenario import PriceChange, Scenario
from .vo import (
    EvictionPlan,
    PolicyRepository,
    RequirementAd,
    ServiceRegistry,
    SurrogateServer,
    VirtualOrganization,
    VOKind,
    VOScheduler,
    plan_eviction,
)
from .workload import ScheduledEvent, generate_workload, inject_flash_crowd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RequestArrival:
    request: ContentRequest


@dataclass(frozen=True)
class DetectionTick:
    pass


@dataclass(frozen=True)
class RenegotiationTick:
    pass


@dataclass(frozen=True)
class VOExpiry:
    vo: int


@dataclass(frozen=True)
class FlashCrowdBoundary:
    index: int
    starting: bool


@dataclass(frozen=True)
class ScheduledNotice:
    index: int


@dataclass(frozen=True)
class PriceChangeEvent:
    change: PriceChange


Event = Union[RequestArrival, DetectionTick, RenegotiationTick, VOExpiry, FlashCrowdBoundary, ScheduledNotice, PriceChangeEvent]


class EventQueue:
    """Priority queue of events ordered by time, then by insertion sequence."""

    def __init__(self):
        self._heap: List[Tuple[float, int, Event]] = []
        self._sequence = itertools.count()

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: float, event: Event) -> None:
        heapq.heappush(self._heap, (time, next(self._sequence), event))

    def pop(self) -> Tuple[float, Event]:
        time, _, event = heapq.heappop(self._heap)
        return time, event

    def peek_time(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None


@dataclass(frozen=True)
class RoutedRequest:
    request: ContentRequest
    owner: str
    routing: Routing


@dataclass(frozen=True)
class Quote:
    seller: str
    amount: Decimal
    gain: float
    plan: EvictionPlan


@dataclass(frozen=True)
class Prediction:
    """Expected requests for an auctioned content according to every predictor, recorded when the auction opened."""
    auction: int
    time: float
    content: ContentId
    region: LocationId
    horizon_s: float
    expected: Mapping[str, float]


class Simulation:
    """One run of a scenario.

    Parameters
    ----------
    scenario : Scenario
        A validated scenario. Its seed drives every random stream of the run.
    auctions_enabled : bool, optional
        When ``False`` hotspots are still detected and logged but no auction is ever opened (the baseline run).
    record_predictions : bool, optional
        When ``True`` every auction also records the output of all registered predictors in :attr:`predictions`.

    Examples
    --------
    >>> from peering_cdn.scenario import bundled_scenario, load_scenario
    >>> sim = Simulation(load_scenario(bundled_scenario('hotspot')))
    >>> log = sim.run()
    """

    def __init__(self, scenario: Scenario, *, auctions_enabled: bool = True, record_predictions: bool = False):
        self.scenario = scenario
        self.auctions_enabled = auctions_enabled
        self.log = EventLog()
        self.queue = EventQueue()
        self.now = 0.0
        self.servers: Dict[str, SurrogateServer] = {
            p.id: SurrogateServer(
                provider=p.id,
                region=p.region,
                capacity_mb=p.capacity_mb,
                unit_storage_cost=p.unit_storage_cost,
                upload_kbps=p.upload_kbps,
                download_kbps=p.download_kbps,
                capacity_threshold=p.capacity_threshold,
                eagerness=p.eagerness,
            )
            for p in scenario.providers
        }
        self.registry = ServiceRegistry()
        self.scheduler = VOScheduler(self.servers, self.registry, PolicyRepository(scenario.policies), self.log)
        self.predictor = self._predictor(scenario.market.predictor)
        self.window: Deque[RoutedRequest] = deque()
        self.payments: Dict[Tuple[str, ContentId], List[HistoryRecord]] = {}
        self.cooldown: Dict[Tuple[str, ContentId], float] = {}
        self.vo_regions: Dict[int, LocationId] = {}
        self.predictions: List[Prediction] = []
        self._comparison: List[RevenuePredictor] = [self._predictor(name) for name in PREDICTORS] if record_predictions else []
        self._auction_ids = itertools.count(1)
        self._started = False
        self._handlers: Dict[type, Callable] = {
            RequestArrival: self._on_request,
            DetectionTick: self._on_detection,
            RenegotiationTick: self._on_renegotiation,
            VOExpiry: self._on_expiry,
            FlashCrowdBoundary: self._on_flash_crowd,
            ScheduledNotice: self._on_notice,
            PriceChangeEvent: self._on_price_change,
        }

    def _predictor(self, name: str) -> RevenuePredictor:
        s = self.scenario
        return get_predictor(name, econ=s.econ, latency=s.latency, walk=s.walk, zipf=s.zipf)

    def build_workload(self) -> List[ContentRequest]:
        """The base workload with every flash crowd and scheduled surge merged in."""
        s = self.scenario
        stream = generate_workload(s.workload, s.seed)
        surges = [*s.flash_crowds, *(e for e in s.scheduled_events if e.rate_multiplier > 1)]
        for index, surge in enumerate(surges):
            stream = inject_flash_crowd(stream, surge, s.workload, s.seed, index)
        return stream

    def start(self) -> None:
        """Logs the scenario record and schedules the initial events. Called by :meth:`step` and :meth:`run` if needed."""
        if self._started:
            return
        self._started = True
        s = self.scenario
        self.log.append(0.0, ev.SCENARIO, ['-'.join(s.name.split()) or 'scenario'], hash=s.hash, seed=s.seed,
                        alpha=s.econ.alpha, delay_threshold_ms=s.econ.delay_threshold_ms, duration_s=s.duration_s,
                        auctions=self.auctions_enabled, predictor=s.market.predictor)
        for request in self.build_workload():
            self.queue.push(request.time, RequestArrival(request))
        self._schedule_tick(DetectionTick(), s.detection.interval_s)
        if self.auctions_enabled:
            self._schedule_tick(RenegotiationTick(), s.auction.renegotiation_interval_s)
        for index, crowd in enumerate(s.flash_crowds):
            self.queue.push(crowd.start_s, FlashCrowdBoundary(index, True))
            self.queue.push(crowd.start_s + crowd.duration_s, FlashCrowdBoundary(index, False))
        for index, event in enumerate(s.scheduled_events):
            self.queue.push(event.notice_at, ScheduledNotice(index))
        for change in s.price_changes:
            self.queue.push(change.time_s, PriceChangeEvent(change))
        logger.info('Starting scenario "%s" (seed %s, %s events queued)', s.name, s.seed, len(self.queue))

    def _schedule_tick(self, event: Event, at: float) -> None:
        if at <= self.scenario.duration_s:
            self.queue.push(at, event)

    def step(self) -> bool:
        """Processes exactly one event. Returns ``False`` when the queue is empty."""
        self.start()
        if not self.queue:
            return False
        self.now, event = self.queue.pop()
        self._handlers[type(event)](event)
        return True

    def run(self) -> EventLog:
        """Processes every event up to the end of the scenario and returns the event log."""
        self.start()
        while self.queue and self.queue.peek_time() <= self.scenario.duration_s:  # type: ignore [operator]
            self.step()
        logger.info('Finished scenario "%s": %s log records, %s VOs', self.scenario.name, len(self.log), len(self.scheduler.vos))
        return self.log

    # Requests and hotspot detection

    def _on_request(self, event: RequestArrival) -> None:
        request = event.request
        owner = self.scenario.owner_of(request.content)
        holders = {owner: Holder(owner, self.servers[owner].region)}
        for server in self.scheduler.holders(request.content):
            holders.setdefault(server.provider, Holder(server.provider, server.region))
        routing = route_request(request, holders.values(), self.scenario.latency, self.scenario.econ.delay_threshold_ms,
                                self.scenario.detection.request_load)
        self.log.append(self.now, ev.REQUEST, [routing.server], content=request.content, region=request.location, owner=owner,
                        latency_ms=routing.latency_ms, sigma=routing.sigma, load=routing.load)
        self.window.append(RoutedRequest(request, owner, routing))

    def _prune(self) -> None:
        horizon = self.now - self.scenario.detection.load_window_s
        while self.window and self.window[0].request.time <= horizon:
            self.window.popleft()

    def basis(self) -> List[ContentRequest]:
        """Requests observed over the load window, oldest first."""
        self._prune()
        return [routed.request for routed in self.window]

    def owner_penalties(self) -> Dict[Tuple[str, ContentId, LocationId], float]:
        """Penalty of each owner for each content and requesting region, over the requests its origin served in the window."""
        loads: Dict[Tuple[str, ContentId, LocationId], List[LoadRecord]] = defaultdict(list)
        self._prune()
        for routed in self.window:
            if routed.routing.server == routed.owner:
                key = (routed.owner, routed.request.content, routed.request.location)
                loads[key].append(LoadRecord(routed.request, routed.routing.load, routed.routing.sigma))
        return {key: penalty(records, self.servers[key[0]].capacity_threshold) for key, records in sorted(loads.items())}

    def _on_detection(self, _: DetectionTick) -> None:
        for (owner, content, region), load_penalty in self.owner_penalties().items():
            if load_penalty <= self.scenario.detection.min_penalty:
                continue
            key = (owner, content)
            if self.scheduler.live_vo_for(owner, content) is not None or self.cooldown.get(key, -math.inf) > self.now:
                continue
            self.log.append(self.now, ev.HOTSPOT, [owner], content=content, region=region, penalty=load_penalty)
            if self.auctions_enabled:
                self.replication_cycle(owner, content, region, load_penalty)
            else:
                self.cooldown[key] = self.now + self.scenario.auction.retry_cooldown_s
        self._schedule_tick(DetectionTick(), self.now + self.scenario.detection.interval_s)

    # Pricing

    def expected_revenue(self, content: ContentId, region: LocationId, horizon_s: float) -> float:
        count = self.predictor.expected_requests(ContentRequest(content, region, self.now), self.basis(), horizon_s,
                                                 self.scenario.detection.load_window_s)
        return self.scenario.market.revenue_per_request * count

    def held_revenue(self, server: SurrogateServer, content: ContentId) -> float:
        """Expected revenue of a replica ``server`` holds, over what is left of its holding period."""
        replica = server.replicas[content]
        return self.expected_revenue(content, self.vo_regions.get(replica.vo, server.region), replica.expires_at - self.now)

    def budget(self, buyer: str, content: ContentId, region: LocationId, current_penalty: float) -> float:
        """The buyer's reserve price: the payoff predicted from its past payments for ``content``, or the cold-start budget when it
        has never paid for it."""
        history = self.payments.get((buyer, content))
        if history:
            return payoff_max(history, ContentRequest(content, region, self.now), current_penalty, self.scenario.econ,
                              self.scenario.latency)
        if self.scenario.auction.cold_start_budget is not None:
            return self.scenario.auction.cold_start_budget
        return self.scenario.econ.alpha * current_penalty

    def policy_for(self, content: ContentId, region: LocationId, duration_s: float) -> AuctionPolicy:
        a = self.scenario.auction
        return AuctionPolicy(
            content=content,
            storage_mb=self.scenario.size_of(content),
            upload_kbps=a.upload_kbps,
            download_kbps=a.download_kbps,
            duration_s=duration_s,
            preferred_regions=frozenset({region}),
            replicas=a.replicas,
        )

    def quote(self, server: SurrogateServer, policy: AuctionPolicy, er_new: float) -> Optional[Quote]:
        """What ``server`` would bid for ``policy``, or ``None`` if it abstains.

        A seller that must evict to make room prices in the revenue the evicted replicas would have earned. A seller already
        holding the content prices in the pro-rated revenue it expected when it won.
        """
        if server.holds(policy.content):
            replica = server.replicas[policy.content]
            plan = EvictionPlan(er_old=replica.er_old * policy.duration_s / (replica.expires_at - replica.placed_at))
        else:
            try:
                plan = plan_eviction(server, policy.storage_mb, self.held_revenue)
            except InsufficientCapacity:
                return None
        gain = utility(er_new, plan.er_old)
        amount = bid_amount(storage_cost(policy.storage_mb, server.unit_storage_cost), gain, server.eagerness)
        if amount is None or to_currency(amount) <= 0:
            return None
        return Quote(server.provider, to_currency(amount), gain, plan)

    # Auctions

    def _run_auction(
            self,
            buyer: str,
            policy: AuctionPolicy,
            reserve: Union[float, Decimal],
            region: LocationId,
            purpose: str
    ) -> Tuple[Optional[AuctionOutcome], Dict[str, Quote]]:
        auction_id = next(self._auction_ids)
        try:
            auction = open_auction(policy, reserve, buyer, auction_id=auction_id, max_retries=self.scenario.auction.max_retries)
        except AuctionRefused as e:
            self.log.append(self.now, ev.AUCTION_REFUSED, [buyer], auction=auction_id, content=policy.content,
                            reserve=to_currency(reserve), purpose=purpose)
            logger.debug('Auction %s refused: %s', auction_id, e)
            return None, {}

        self.log.append(self.now, ev.AUCTION_OPEN, [buyer], auction=auction_id, content=policy.content, region=region,
                        duration_s=policy.duration_s, retry=policy.retry_count, purpose=purpose)
        self.registry.publish_requirement(RequirementAd(buyer, policy, self.now))
        self.scheduler.refresh_registry()
        if self._comparison:
            self._record_prediction(auction_id, policy, region)

        er_new = self.expected_revenue(policy.content, region, policy.duration_s)
        quotes: Dict[str, Quote] = {}
        for ad in self.registry.discover_sellers(policy, buyer):
            quote = self.quote(self.servers[ad.provider], policy, er_new)
            if quote is not None:
                auction.submit_bid(Bid(quote.seller, quote.amount, self.now))
                quotes[quote.seller] = quote
        outcome = auction.clear()
        self.registry.withdraw_requirement(buyer, policy.content)

        for bid in auction.revealed_bids:
            self.log.append(self.now, ev.BID, [bid.seller], auction=auction_id, content=policy.content, amount=bid.amount)
        if isinstance(outcome, Awarded):
            self.log.append(self.now, ev.AUCTION_CLEAR, [buyer, *outcome.sellers], auction=auction_id, content=policy.content,
                            outcome='awarded', payment=outcome.payment, reserve=auction.reserve, bids=auction.bid_count)
        else:
            self.log.append(self.now, ev.AUCTION_CLEAR, [buyer], auction=auction_id, content=policy.content,
                            outcome=outcome.reason, reserve=auction.reserve, bids=auction.bid_count)
        return outcome, quotes

    def _record_prediction(self, auction_id: int, policy: AuctionPolicy, region: LocationId) -> None:
        basis = self.basis()
        current = ContentRequest(policy.content, region, self.now)
        expected = {
            predictor.name: predictor.expected_requests(current, basis, policy.duration_s, self.scenario.detection.load_window_s)
            for predictor in self._comparison
        }
        self.predictions.append(Prediction(auction_id, self.now, policy.content, region, policy.duration_s, expected))

    def _track(self, vo: VirtualOrganization, region: LocationId) -> None:
        self.vo_regions[vo.id] = region
        self.queue.push(vo.expires_at, VOExpiry(vo.id))
        self.payments.setdefault((vo.buyer, vo.content), []).append(
            HistoryRecord(ContentRequest(vo.content, region, self.now), paid=float(vo.payment)))

    def replication_cycle(
            self,
            buyer: str,
            content: ContentId,
            region: LocationId,
            current_penalty: float,
            *,
            kind: VOKind = VOKind.SHORT_TERM,
            duration_s: Optional[float] = None
    ) -> Optional[VirtualOrganization]:
        """Runs the buyer's auction for replicating ``content`` towards ``region`` and forms the VO.

        Without winners the policy is relaxed and the auction retried; once the retries are spent the buyer gives up, the
        SLA risk is logged and the pair is left alone for ``retry_cooldown_s``.

        Returns
        -------
        vo : VirtualOrganization or None
        """
        key = (buyer, content)
        cooldown_until = self.now + self.scenario.auction.retry_cooldown_s
        reserve = self.budget(buyer, content, region, current_penalty)
        policy = self.policy_for(content, region, duration_s or self.scenario.auction.replica_duration_s)
        while True:
            outcome, quotes = self._run_auction(buyer, policy, reserve, region, 'replicate')
            if outcome is None:
                self.cooldown[key] = cooldown_until
                return None
            if isinstance(outcome, Awarded):
                vo = self.scheduler.form_vo(buyer, outcome, policy, kind, self.now, er_lookup=self.held_revenue,
                                            utilities={seller: q.gain for seller, q in quotes.items()})
                if vo is None:
                    self.cooldown[key] = cooldown_until
                    return None
                self._track(vo, region)
                return vo
            relaxed = retry_after_no_winner(policy, max_retries=self.scenario.auction.max_retries,
                                            min_duration_s=self.scenario.auction.min_duration_s)
            if relaxed is None:
                self.log.append(self.now, ev.SLA_RISK, [buyer], content=content, region=region, retries=policy.retry_count,
                                reason=outcome.reason)
                logger.warning('%s gives up replicating content %s after %s retries (%s)', buyer, content, policy.retry_count,
                               outcome.reason.value)
                self.cooldown[key] = cooldown_until
                return None
            self.log.append(self.now, ev.AUCTION_RETRY, [buyer], content=content, retry=relaxed.retry_count,
                            duration_s=relaxed.duration_s)
            policy = relaxed

    # Renegotiation

    def market_snapshot(self) -> MarketSnapshot:
        """Current asks and utilities of VO members, plus the asks of every other eligible seller."""
        asks: Dict[Tuple[str, ContentId], Decimal] = {}
        utilities: Dict[Tuple[str, ContentId], float] = {}
        for vo in sorted(self.scheduler.live_vos(), key=lambda v: v.id):
            remaining = vo.remaining(self.now)
            if remaining <= 0:
                continue
            region = self.vo_regions.get(vo.id, LocationId(0))
            er_remaining = self.expected_revenue(vo.content, region, remaining)
            members = {award.seller for award in vo.sellers}
            for award in vo.sellers:
                server = self.servers[award.seller]
                replica = server.replicas.get(vo.content)
                if replica is None or replica.vo != vo.id:
                    continue
                held_for = replica.expires_at - replica.placed_at
                utilities[(award.seller, vo.content)] = utility(er_remaining, replica.er_old * remaining / held_for)
                ask = bid_amount(storage_cost(vo.storage_mb, server.unit_storage_cost), replica.utility, server.eagerness)
                if ask is not None:
                    asks[(award.seller, vo.content)] = to_currency(ask)
            policy = self.policy_for(vo.content, region, remaining)
            for provider in sorted(self.servers):
                server = self.servers[provider]
                if provider in members or provider == vo.buyer or not server.advertise().satisfies(policy):
                    continue
                quote = self.quote(server, policy, er_remaining)
                if quote is not None:
                    asks[(provider, vo.content)] = quote.amount
        return MarketSnapshot(asks=asks, utilities=utilities)

    def _on_renegotiation(self, _: RenegotiationTick) -> None:
        events = detect_renegotiation(
            self.scheduler.live_vos(),
            self.market_snapshot(),
            self.now,
            margin=self.scenario.auction.cheaper_entrant_margin,
            demand_tolerance=self.scenario.auction.demand_change_threshold,
        )
        handled = set()
        for event in events:
            vo = self.scheduler.vos[event.vo]
            self.log.append(self.now, ev.RENEGOTIATION, [vo.buyer, event.seller], vo=vo.id, kind=event.kind, content=vo.content)
            if event.vo in handled:
                continue
            handled.add(event.vo)
            self.renegotiate(vo, event)
        self._schedule_tick(RenegotiationTick(), self.now + self.scenario.auction.renegotiation_interval_s)

    def renegotiate(self, vo: VirtualOrganization, event: RenegotiationEvent) -> Optional[VirtualOrganization]:
        """Runs a fresh auction for the rest of ``vo``'s holding period, capped at what the buyer pays now, and rearranges the VO
        with its outcome."""
        if vo.remaining(self.now) <= 0:
            return vo
        region = self.vo_regions.get(vo.id, LocationId(0))
        policy = self.policy_for(vo.content, region, vo.remaining(self.now))
        outcome, quotes = self._run_auction(vo.buyer, policy, vo.payment, region, 'renegotiate')
        if outcome is None:
            outcome = NoWinner(NoWinnerReason.NO_BIDS)
        successor = self.scheduler.rearrange_vo(vo, event, outcome, policy, self.now, er_lookup=self.held_revenue,
                                                utilities={seller: q.gain for seller, q in quotes.items()})
        if successor is not None and successor.id != vo.id:
            self._track(successor, region)
        return successor

    # Other events

    def _on_expiry(self, _: VOExpiry) -> None:
        self.scheduler.expire_vos(self.now)

    def _on_flash_crowd(self, event: FlashCrowdBoundary) -> None:
        crowd = self.scenario.flash_crowds[event.index]
        self.log.append(self.now, ev.FLASH_CROWD, [], phase='start' if event.starting else 'end', region=crowd.region,
                        first=crowd.content_range[0], last=crowd.content_range[1], multiplier=crowd.rate_multiplier)

    def anticipated_penalty(self, scheduled: ScheduledEvent) -> float:
        """Load the event's extra demand would put on each of its contents if nothing were replicated in its region."""
        lo, hi = scheduled.content_range
        extra = self.scenario.workload.region_rate(scheduled.region) * (scheduled.rate_multiplier - 1) * scheduled.duration_s
        return extra / (hi - lo + 1) * self.scenario.detection.request_load

    def _on_notice(self, event: ScheduledNotice) -> None:
        scheduled = self.scenario.scheduled_events[event.index]
        lo, hi = scheduled.content_range
        self.log.append(self.now, ev.SCHEDULED_NOTICE, [], region=scheduled.region, first=lo, last=hi, start_s=scheduled.start_s,
                        duration_s=scheduled.duration_s)
        if not self.auctions_enabled:
            return
        expected_penalty = self.anticipated_penalty(scheduled)
        for content in range(lo, hi + 1):
            owner = self.scenario.owner_of(ContentId(content))
            if self.scheduler.live_vo_for(owner, ContentId(content)) is not None:
                continue
            self.replication_cycle(owner, ContentId(content), scheduled.region, expected_penalty, kind=VOKind.LONG_TERM,
                                   duration_s=scheduled.advance_notice_s + scheduled.duration_s)

    def _on_price_change(self, event: PriceChangeEvent) -> None:
        change = event.change
        self.servers[change.provider].unit_storage_cost = change.unit_storage_cost
        self.log.append(self.now, ev.PRICE_CHANGE, [change.provider], unit_storage_cost=change.unit_storage_cost)

"""Providers, the service registry, the policy repository and the coordinated VO scheduler.

The scheduler owns every surrogate server and virtual organization of a run. All mutation happens on the simulation loop, and every
change is written to the :class:`~peering_cdn.eventlog.EventLog` it was given.
"""

import logging
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from . import eventlog as ev
from .auction import AuctionOutcome, AuctionPolicy, Award, Awarded, NoWinner, RenegotiationEvent, RenegotiationKind
from .econ import ContentId, LocationId
from .eventlog import EventLog
from .exceptions import DomainError, InsufficientCapacity, RegistryError

logger = logging.getLogger(__name__)

#: Expected revenue of a content held on a given server.
RevenueLookup = Callable[['SurrogateServer', ContentId], float]

STORAGE_TOLERANCE = 1e-6


@dataclass
class Replica:
    content: ContentId
    size_mb: float
    placed_at: float
    expires_at: float
    payment: Decimal
    vo: int
    er_old: float = 0.0
    utility: float = 0.0


@dataclass
class SurrogateServer:
    """A provider's replica-holding server. Content the provider owns is served as origin and does not use replica storage."""
    provider: str
    region: LocationId
    capacity_mb: float
    unit_storage_cost: float
    upload_kbps: float
    download_kbps: float
    capacity_threshold: float
    eagerness: float = 0.0
    replicas: Dict[ContentId, Replica] = field(default_factory=dict)
    used_mb: float = 0.0

    @property
    def free_mb(self) -> float:
        return self.capacity_mb - self.used_mb

    def holds(self, content: ContentId) -> bool:
        return content in self.replicas

    def place(self, replica: Replica) -> None:
        if replica.expires_at <= replica.placed_at:
            raise DomainError('A replica must expire after it is placed.')
        if replica.content in self.replicas:
            raise DomainError(f'{self.provider} already holds content {replica.content}.')
        if replica.size_mb > self.free_mb + STORAGE_TOLERANCE:
            raise InsufficientCapacity(f'{self.provider} has {self.free_mb} MB free, needs {replica.size_mb} MB.')
        self.replicas[replica.content] = replica
        self.used_mb += replica.size_mb

    def remove(self, content: ContentId) -> Replica:
        replica = self.replicas.pop(content)
        self.used_mb -= replica.size_mb
        return replica

    def advertise(self) -> 'ServiceAd':
        return ServiceAd(
            provider=self.provider,
            region=self.region,
            free_mb=self.free_mb,
            reclaimable_mb=self.used_mb,
            upload_kbps=self.upload_kbps,
            download_kbps=self.download_kbps,
        )


@dataclass(frozen=True)
class ServiceAd:
    """Snapshot of a seller's resources at publication time. ``reclaimable_mb`` is storage held by replicas it could evict."""
    provider: str
    region: LocationId
    free_mb: float
    upload_kbps: float
    download_kbps: float
    reclaimable_mb: float = 0.0

    def satisfies(self, policy: AuctionPolicy) -> bool:
        return (self.free_mb + self.reclaimable_mb >= policy.storage_mb
                and self.upload_kbps >= policy.upload_kbps
                and self.download_kbps >= policy.download_kbps)


@dataclass(frozen=True)
class RequirementAd:
    buyer: str
    policy: AuctionPolicy
    published_at: float

    @property
    def expires_at(self) -> float:
        return self.published_at + self.policy.duration_s


class ServiceRegistry:
    """Discovery board where sellers advertise resources and buyers publish requirements."""

    def __init__(self):
        self.services: Dict[str, ServiceAd] = {}
        self.requirements: Dict[Tuple[str, ContentId], RequirementAd] = {}

    def publish_service(self, ad: ServiceAd) -> None:
        self.services[ad.provider] = ad

    def publish_requirement(self, ad: RequirementAd) -> None:
        """Lists a buyer's requirement.

        Raises
        ------
        RegistryError
            If the buyer already has an active requirement for the same content.
        """
        key = (ad.buyer, ad.policy.content)
        if key in self.requirements:
            raise RegistryError(f'Buyer "{ad.buyer}" already has an active requirement for content {ad.policy.content}.')
        self.requirements[key] = ad

    def withdraw_requirement(self, buyer: str, content: ContentId) -> None:
        self.requirements.pop((buyer, content), None)

    def expire(self, now: float) -> List[RequirementAd]:
        expired = [ad for ad in self.requirements.values() if ad.expires_at <= now]
        for ad in expired:
            del self.requirements[(ad.buyer, ad.policy.content)]
        return expired

    def discover_sellers(self, policy: AuctionPolicy, buyer: str) -> List[ServiceAd]:
        """Sellers whose advertised resources meet the policy, excluding the buyer. Sellers in a preferred region come first; the
        rest of the order is by provider id."""
        eligible = [ad for ad in self.services.values() if ad.provider != buyer and ad.satisfies(policy)]
        return sorted(eligible, key=lambda ad: (ad.region not in policy.preferred_regions, ad.provider))


class PolicyPredicate(Enum):
    MAX_SHAREABLE_MB = 'max-shareable-mb'
    FORBIDDEN_CONTENT_RANGE = 'forbidden-content-range'
    MIN_DURATION = 'min-duration'
    MAX_DURATION = 'max-duration'
    ALLOWED_REGIONS = 'allowed-regions'


class PolicyEffect(Enum):
    ALLOW = 'allow'
    DENY = 'deny'


VO_SCOPE = '*'


@dataclass(frozen=True)
class PolicyRule:
    """A rule from the policy repository. ``subject`` is a provider id or ``"*"`` for every VO.

    ``bound`` depends on the predicate: a number of MB for ``max-shareable-mb``, an inclusive ``(lo, hi)`` pair for
    ``forbidden-content-range``, seconds for ``min-duration`` / ``max-duration``, and a set of regions for ``allowed-regions``.
    """
    subject: str
    predicate: PolicyPredicate
    bound: Union[float, Tuple[int, int], FrozenSet[LocationId]]
    effect: PolicyEffect = PolicyEffect.DENY

    def __post_init__(self):
        if self.predicate is PolicyPredicate.FORBIDDEN_CONTENT_RANGE:
            lo, hi = self.bound  # type: ignore [misc]
            if lo > hi:
                raise DomainError(f'Empty content range [{lo}, {hi}].')
        elif self.predicate is PolicyPredicate.ALLOWED_REGIONS:
            object.__setattr__(self, 'bound', frozenset(self.bound))  # type: ignore [arg-type]
        elif not isinstance(self.bound, (int, float)):
            raise DomainError(f'{self.predicate.value} needs a numeric bound (got {self.bound!r}).')

    def violated_by(self, candidate: 'CandidateVO', regions: Iterable[LocationId]) -> bool:
        if self.predicate is PolicyPredicate.MAX_SHAREABLE_MB:
            return candidate.storage_mb > self.bound  # type: ignore [operator]
        if self.predicate is PolicyPredicate.FORBIDDEN_CONTENT_RANGE:
            lo, hi = self.bound  # type: ignore [misc]
            return lo <= candidate.content <= hi
        if self.predicate is PolicyPredicate.MIN_DURATION:
            return candidate.duration_s < self.bound  # type: ignore [operator]
        if self.predicate is PolicyPredicate.MAX_DURATION:
            return candidate.duration_s > self.bound  # type: ignore [operator]
        return any(region not in self.bound for region in regions)  # type: ignore [operator]


@dataclass(frozen=True)
class CandidateVO:
    buyer: str
    content: ContentId
    storage_mb: float
    duration_s: float
    seller_regions: Mapping[str, LocationId]


@dataclass(frozen=True)
class PolicyDecision:
    allowed: bool
    violated: Tuple[PolicyRule, ...] = ()
    applied: Tuple[PolicyRule, ...] = ()


def check_policies(candidate: CandidateVO, rules: Sequence[PolicyRule]) -> PolicyDecision:
    """Decides whether a candidate VO may be formed.

    A rule applies when its subject is ``"*"``, the buyer, or one of the sellers. A seller-scoped rule is evaluated against that
    seller's region only. The candidate is denied if any applicable deny rule is violated; allow rules are reported in ``applied``
    but never deny. Without applicable rules the candidate is allowed.
    """
    applied = []
    violated = []
    for rule in rules:
        if rule.subject in (VO_SCOPE, candidate.buyer):
            regions: Iterable[LocationId] = candidate.seller_regions.values()
        elif rule.subject in candidate.seller_regions:
            regions = [candidate.seller_regions[rule.subject]]
        else:
            continue
        applied.append(rule)
        if rule.effect is PolicyEffect.DENY and rule.violated_by(candidate, regions):
            violated.append(rule)
    return PolicyDecision(allowed=not violated, violated=tuple(violated), applied=tuple(applied))


class PolicyRepository:
    def __init__(self, rules: Iterable[PolicyRule] = ()):
        self.rules: List[PolicyRule] = list(rules)

    def rules_for(self, buyer: str, sellers: Iterable[str]) -> List[PolicyRule]:
        subjects = {VO_SCOPE, buyer, *sellers}
        return [rule for rule in self.rules if rule.subject in subjects]


class VOKind(Enum):
    SHORT_TERM = 'short-term'
    LONG_TERM = 'long-term'


class VOStatus(Enum):
    LIVE = 'live'
    REARRANGED = 'rearranged'
    DISBANDED = 'disbanded'


@dataclass
class VirtualOrganization:
    id: int
    kind: VOKind
    buyer: str
    sellers: List[Award]
    content: ContentId
    storage_mb: float
    formed_at: float
    expires_at: float
    policy_set: Tuple[PolicyRule, ...] = ()
    status: VOStatus = VOStatus.LIVE
    closed_at: Optional[float] = None
    closed_reason: str = ''
    predecessor: Optional[int] = None
    successor: Optional[int] = None

    @property
    def is_live(self) -> bool:
        return self.status is VOStatus.LIVE

    @property
    def payment(self):
        return max(award.payment for award in self.sellers)

    def remaining(self, now: float) -> float:
        return max(0.0, self.expires_at - now)


@dataclass(frozen=True)
class EvictionPlan:
    evicted: Tuple[ContentId, ...] = ()
    er_old: float = 0.0


def plan_eviction(server: SurrogateServer, incoming_mb: float, er_lookup: RevenueLookup) -> EvictionPlan:
    """Chooses replicas to evict so that ``incoming_mb`` fits, lowest expected revenue first (larger replica first on ties).

    Raises
    ------
    InsufficientCapacity
        If evicting everything still does not free enough storage.
    """
    free = server.free_mb
    if free >= incoming_mb:
        return EvictionPlan()
    revenue = {content: er_lookup(server, content) for content in server.replicas}
    order = sorted(server.replicas.values(), key=lambda r: (revenue[r.content], -r.size_mb, r.content))
    evicted: List[ContentId] = []
    er_old = 0.0
    for replica in order:
        if free >= incoming_mb:
            break
        evicted.append(replica.content)
        er_old += revenue[replica.content]
        free += replica.size_mb
    if free < incoming_mb:
        raise InsufficientCapacity(f'{server.provider} cannot free {incoming_mb} MB even by evicting every replica.')
    return EvictionPlan(tuple(evicted), er_old)


def evict_for_replica(server: SurrogateServer, incoming_mb: float, er_lookup: RevenueLookup) -> EvictionPlan:
    """Evicts replicas from ``server`` per :func:`plan_eviction` and returns the plan that was applied."""
    plan = plan_eviction(server, incoming_mb, er_lookup)
    for content in plan.evicted:
        server.remove(content)
    return plan


class VOScheduler:
    """Coordinated VO scheduler: forms, rearranges, expires and disbands VOs, placing and removing the replicas they hold."""

    def __init__(
            self,
            servers: Mapping[str, SurrogateServer],
            registry: ServiceRegistry,
            repository: PolicyRepository,
            log: EventLog
    ):
        self.servers = dict(servers)
        self.registry = registry
        self.repository = repository
        self.log = log
        self.vos: Dict[int, VirtualOrganization] = {}
        self._next_id = 1

    def live_vos(self) -> List[VirtualOrganization]:
        return [vo for vo in self.vos.values() if vo.is_live]

    def live_vo_for(self, buyer: str, content: ContentId) -> Optional[VirtualOrganization]:
        return next((vo for vo in self.live_vos() if vo.buyer == buyer and vo.content == content), None)

    def holders(self, content: ContentId) -> List[SurrogateServer]:
        return [server for server in self.servers.values() if server.holds(content)]

    def refresh_registry(self) -> None:
        for provider in sorted(self.servers):
            self.registry.publish_service(self.servers[provider].advertise())

    def decide(self, buyer: str, sellers: Sequence[str], policy: AuctionPolicy) -> Tuple[CandidateVO, PolicyDecision]:
        candidate = CandidateVO(
            buyer=buyer,
            content=policy.content,
            storage_mb=policy.storage_mb,
            duration_s=policy.duration_s,
            seller_regions={seller: self.servers[seller].region for seller in sellers},
        )
        return candidate, check_policies(candidate, self.repository.rules_for(buyer, sellers))

    def form_vo(
            self,
            buyer: str,
            outcome: AuctionOutcome,
            policy: AuctionPolicy,
            kind: VOKind,
            now: float,
            *,
            er_lookup: RevenueLookup,
            utilities: Optional[Mapping[str, float]] = None,
            predecessor: Optional[int] = None,
            checked: bool = False
    ) -> Optional[VirtualOrganization]:
        """Forms a VO from an awarded auction and replicates the content to each winner.

        Policies are checked first; a denied candidate voids the outcome. Winners that can no longer fit the replica are dropped.
        Returns ``None`` when the VO is not formed.
        """
        if not isinstance(outcome, Awarded):
            raise DomainError('A VO can only be formed from an awarded auction.')

        if not checked:
            _, decision = self.decide(buyer, outcome.sellers, policy)
            if not decision.allowed:
                self.log.append(now, ev.POLICY_DENY, [buyer, *outcome.sellers], content=policy.content,
                                rules=[rule.predicate for rule in decision.violated])
                logger.debug('Policies deny VO for content %s: %s', policy.content, decision.violated)
                return None

        vo_id = self._next_id
        expires_at = now + policy.duration_s
        placed: List[Award] = []
        for award in outcome.winners:
            server = self.servers[award.seller]
            terms = dict(payment=award.payment, vo=vo_id, expires_at=expires_at,
                         utility=(utilities or {}).get(award.seller, 0.0))
            retained = server.holds(policy.content)
            if retained:
                # Incumbent of a rearranged VO keeps its copy under the new terms
                replica = server.replicas[policy.content]
                for key, value in terms.items():
                    setattr(replica, key, value)
            else:
                ad = server.advertise()
                try:
                    if not ad.satisfies(policy):
                        raise InsufficientCapacity(f'{award.seller} no longer meets the policy.')
                    plan = plan_eviction(server, policy.storage_mb, er_lookup)
                except InsufficientCapacity as e:
                    self.log.append(now, ev.WINNER_DROPPED, [award.seller], content=policy.content, vo=vo_id)
                    logger.warning('Dropping winner %s for content %s: %s', award.seller, policy.content, e)
                    continue
                self._evict(server, plan, now)
                server.place(Replica(content=policy.content, size_mb=policy.storage_mb, placed_at=now, er_old=plan.er_old,
                                     **terms))  # type: ignore [arg-type]
            self.log.append(now, ev.REPLICA_PLACED, [award.seller], content=policy.content, vo=vo_id,
                            size_mb=float(policy.storage_mb), used_mb=float(server.used_mb), payment=award.payment,
                            expires_at=expires_at, retained=retained)
            placed.append(award)

        if not placed:
            self.log.append(now, ev.VO_VOID, [buyer], content=policy.content)
            return None

        self._next_id += 1
        vo = VirtualOrganization(
            id=vo_id,
            kind=kind,
            buyer=buyer,
            sellers=placed,
            content=policy.content,
            storage_mb=policy.storage_mb,
            formed_at=now,
            expires_at=expires_at,
            policy_set=tuple(self.repository.rules_for(buyer, [a.seller for a in placed])),
            predecessor=predecessor,
        )
        self.vos[vo_id] = vo
        self.log.append(now, ev.VO_FORMED, [buyer, *(a.seller for a in placed)],
                        vo=vo_id, kind=kind, content=policy.content, payment=vo.payment, expires_at=expires_at,
                        predecessor=predecessor if predecessor is not None else 0)
        logger.debug('Formed VO %s (%s) for content %s with %s', vo_id, kind.value, policy.content, [a.seller for a in placed])
        return vo

    def _evict(self, server: SurrogateServer, plan: EvictionPlan, now: float) -> None:
        for content in plan.evicted:
            replica = server.remove(content)
            self.log.append(now, ev.REPLICA_EVICTED, [server.provider], content=content, vo=replica.vo,
                            size_mb=float(replica.size_mb), used_mb=float(server.used_mb))
            vo = self.vos.get(replica.vo)
            if vo is not None and vo.is_live:
                vo.sellers = [award for award in vo.sellers if award.seller != server.provider]
                if not vo.sellers:
                    self._close(vo, now, VOStatus.DISBANDED, 'evicted')

    def _remove_replicas(self, vo: VirtualOrganization, sellers: Iterable[str], now: float, kind: str) -> None:
        for seller in sellers:
            server = self.servers[seller]
            replica = server.replicas.get(vo.content)
            if replica is not None and replica.vo == vo.id:
                server.remove(vo.content)
                self.log.append(now, kind, [seller], content=vo.content, vo=vo.id, size_mb=float(replica.size_mb),
                                used_mb=float(server.used_mb))

    def _close(self, vo: VirtualOrganization, now: float, status: VOStatus, reason: str) -> None:
        vo.status = status
        vo.closed_at = now
        vo.closed_reason = reason
        if status is VOStatus.DISBANDED:
            self.log.append(now, ev.VO_DISBANDED, [vo.buyer], vo=vo.id, content=vo.content, reason=reason)
            logger.debug('Disbanded VO %s (%s)', vo.id, reason)

    def disband(self, vo: VirtualOrganization, now: float, reason: str) -> None:
        kind = ev.REPLICA_EXPIRED if reason == 'expired' else ev.REPLICA_REMOVED
        self._remove_replicas(vo, [award.seller for award in vo.sellers], now, kind)
        self._close(vo, now, VOStatus.DISBANDED, reason)

    def expire_vos(self, now: float) -> List[int]:
        """Disbands every live VO whose holding period has ended, in id order."""
        expired = [vo for vo in sorted(self.vos.values(), key=lambda v: v.id) if vo.is_live and vo.expires_at <= now]
        for vo in expired:
            self.disband(vo, now, 'expired')
        self.registry.expire(now)
        return [vo.id for vo in expired]

    def rearrange_vo(
            self,
            vo: VirtualOrganization,
            event: RenegotiationEvent,
            outcome: AuctionOutcome,
            policy: AuctionPolicy,
            now: float,
            *,
            er_lookup: RevenueLookup,
            utilities: Optional[Mapping[str, float]] = None
    ) -> Optional[VirtualOrganization]:
        """Applies the outcome of a renegotiation auction to ``vo``.

        Without winners the VO is kept as is, except after a ``NO_LONGER_BENEFICIAL`` event where it is disbanded early. Otherwise
        departing sellers drop their replicas, remaining sellers keep theirs under the new terms, and a successor VO is formed for
        the rest of the holding period. Returns the VO that is live afterwards, if any.
        """
        if event.vo != vo.id:
            raise DomainError(f'Event refers to VO {event.vo}, not {vo.id}.')
        if not vo.is_live:
            return None

        if isinstance(outcome, NoWinner):
            if event.kind is RenegotiationKind.NO_LONGER_BENEFICIAL:
                self.disband(vo, now, event.kind.value)
                return None
            self.log.append(now, ev.VO_KEPT, [vo.buyer], vo=vo.id, content=vo.content, reason=outcome.reason)
            return vo

        _, decision = self.decide(vo.buyer, outcome.sellers, policy)
        if not decision.allowed:
            self.log.append(now, ev.POLICY_DENY, [vo.buyer, *outcome.sellers], content=vo.content,
                            rules=[rule.predicate for rule in decision.violated])
            self.log.append(now, ev.VO_KEPT, [vo.buyer], vo=vo.id, content=vo.content, reason='policy-deny')
            return vo

        staying = set(outcome.sellers)
        self._remove_replicas(vo, [a.seller for a in vo.sellers if a.seller not in staying], now, ev.REPLICA_REMOVED)
        successor = self.form_vo(vo.buyer, outcome, policy, vo.kind, now, er_lookup=er_lookup, utilities=utilities,
                                 predecessor=vo.id, checked=True)
        if successor is None:
            self.disband(vo, now, 'rearrange-failed')
            return None
        vo.successor = successor.id
        self._close(vo, now, VOStatus.REARRANGED, event.kind.value)
        self.log.append(now, ev.VO_REARRANGED, [vo.buyer], vo=vo.id, successor=successor.id, content=vo.content,
                        reason=event.kind)
        return successor

    def check_invariants(self) -> None:
        """Asserts storage conservation, capacity bounds and positive payments for every live replica."""
        for server in self.servers.values():
            held = sum(replica.size_mb for replica in server.replicas.values())
            assert abs(server.used_mb - held) <= STORAGE_TOLERANCE, f'{server.provider}: used {server.used_mb} != held {held}'
            assert server.used_mb <= server.capacity_mb + STORAGE_TOLERANCE, f'{server.provider} exceeds its capacity'
            for replica in server.replicas.values():
                assert replica.payment > 0, f'{server.provider} holds content {replica.content} without payment'
                vo = self.vos.get(replica.vo)
                assert vo is not None and vo.is_live, f'{server.provider} holds content {replica.content} for a closed VO'

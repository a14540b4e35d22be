import random
from decimal import Decimal

import pytest

from peering_cdn import eventlog as ev
from peering_cdn.auction import (
    AuctionPolicy,
    Award,
    Awarded,
    NoWinner,
    NoWinnerReason,
    RenegotiationEvent,
    RenegotiationKind,
)
from peering_cdn.eventlog import EventLog
from peering_cdn.exceptions import InsufficientCapacity, RegistryError
from peering_cdn.vo import (
    CandidateVO,
    PolicyEffect,
    PolicyPredicate,
    PolicyRepository,
    PolicyRule,
    Replica,
    RequirementAd,
    ServiceAd,
    ServiceRegistry,
    SurrogateServer,
    VOKind,
    VOScheduler,
    VOStatus,
    check_policies,
    evict_for_replica,
    plan_eviction,
)


def server(provider, region=0, capacity_mb=500.0, unit_storage_cost=0.01, upload_kbps=1000.0):
    return SurrogateServer(provider=provider, region=region, capacity_mb=capacity_mb, unit_storage_cost=unit_storage_cost,
                           upload_kbps=upload_kbps, download_kbps=1000.0, capacity_threshold=100.0)


def policy(content=50, storage_mb=100.0, duration_s=300.0, preferred=()):
    return AuctionPolicy(content=content, storage_mb=storage_mb, upload_kbps=100.0, download_kbps=100.0, duration_s=duration_s,
                         preferred_regions=frozenset(preferred))


def awarded(*sellers, payment='4.00'):
    return Awarded(tuple(Award(seller, Decimal('3.00'), Decimal(payment)) for seller in sellers))


def no_revenue(server, content):
    return 0.0


def replica(content, size_mb, vo=1):
    return Replica(content=content, size_mb=size_mb, placed_at=0.0, expires_at=100.0, payment=Decimal('1.00'), vo=vo)


def make_scheduler(rules=()):
    servers = {s.provider: s for s in (server('owner'), server('a', region=1), server('b', region=2), server('c', region=2))}
    return VOScheduler(servers, ServiceRegistry(), PolicyRepository(rules), EventLog())


@pytest.fixture(scope='function')
def scheduler():
    return make_scheduler()


class TestServiceRegistry:

    def test_duplicate_requirement(self):
        registry = ServiceRegistry()
        registry.publish_requirement(RequirementAd('owner', policy(), 0.0))
        assert ('owner', 50) in registry.requirements
        with pytest.raises(RegistryError):
            registry.publish_requirement(RequirementAd('owner', policy(), 1.0))

    def test_expired_requirements_are_removed(self):
        registry = ServiceRegistry()
        registry.publish_requirement(RequirementAd('owner', policy(duration_s=200), 0.0))
        assert registry.expire(199.0) == []
        assert len(registry.expire(200.0)) == 1
        assert registry.requirements == {}

    def test_discover_thresholds(self):
        registry = ServiceRegistry()
        registry.publish_service(server('roomy').advertise())
        registry.publish_service(server('cramped', capacity_mb=50).advertise())
        registry.publish_service(server('slow', upload_kbps=10).advertise())
        assert [ad.provider for ad in registry.discover_sellers(policy(), 'owner')] == ['roomy']

    def test_discover_excludes_the_buyer(self):
        registry = ServiceRegistry()
        registry.publish_service(server('owner').advertise())
        assert registry.discover_sellers(policy(), 'owner') == []

    def test_preferred_regions_first(self):
        registry = ServiceRegistry()
        registry.publish_service(server('a', region=0).advertise())
        registry.publish_service(server('b', region=1).advertise())
        assert [ad.provider for ad in registry.discover_sellers(policy(preferred={1}), 'owner')] == ['b', 'a']

    def test_discover_against_filter_oracle(self):
        rng = random.Random(99)
        for _ in range(200):
            registry = ServiceRegistry()
            ads = [
                ServiceAd(provider=f'p{i}', region=rng.randrange(3), free_mb=rng.uniform(0, 200), upload_kbps=rng.uniform(0, 200),
                          download_kbps=rng.uniform(0, 200), reclaimable_mb=rng.uniform(0, 50))
                for i in range(6)
            ]
            for ad in ads:
                registry.publish_service(ad)
            wanted = policy(storage_mb=100)
            found = {ad.provider for ad in registry.discover_sellers(wanted, 'p0')}
            expected = {
                ad.provider for ad in ads
                if ad.provider != 'p0' and ad.free_mb + ad.reclaimable_mb >= 100 and ad.upload_kbps >= 100 and ad.download_kbps >= 100
            }
            assert found == expected


class TestPolicies:

    def candidate(self, content=50, storage_mb=100.0, duration_s=300.0, sellers=None):
        return CandidateVO('owner', content, storage_mb, duration_s, sellers or {'a': 1})

    def test_forbidden_content_range(self):
        rule = PolicyRule('*', PolicyPredicate.FORBIDDEN_CONTENT_RANGE, (40, 60))
        decision = check_policies(self.candidate(), [rule])
        assert not decision.allowed
        assert decision.violated == (rule,)

    def test_max_shareable(self):
        rule = PolicyRule('*', PolicyPredicate.MAX_SHAREABLE_MB, 200)
        assert check_policies(self.candidate(), [rule]).allowed

    def test_default_allow(self):
        assert check_policies(self.candidate(), []).allowed

    def test_rules_of_other_providers_do_not_apply(self):
        rule = PolicyRule('z', PolicyPredicate.MAX_DURATION, 10)
        decision = check_policies(self.candidate(), [rule])
        assert decision.allowed
        assert decision.applied == ()

    def test_seller_rule_checks_its_own_region(self):
        rule = PolicyRule('a', PolicyPredicate.ALLOWED_REGIONS, [1])
        assert check_policies(self.candidate(sellers={'a': 1, 'b': 2}), [rule]).allowed
        assert not check_policies(self.candidate(sellers={'a': 2}), [rule]).allowed

    def test_allow_rules_never_deny(self):
        rule = PolicyRule('*', PolicyPredicate.MIN_DURATION, 1000, PolicyEffect.ALLOW)
        decision = check_policies(self.candidate(), [rule])
        assert decision.allowed
        assert decision.applied == (rule,)


class TestEviction:

    def test_lowest_revenue_first(self):
        holder = server('a', capacity_mb=160)
        holder.place(replica(1, 30))
        holder.place(replica(2, 50))
        plan = plan_eviction(holder, 100, lambda s, c: {1: 0.2, 2: 0.9}[c])
        assert plan.evicted == (1,)
        assert plan.er_old == pytest.approx(0.2)

    def test_nothing_when_it_fits(self):
        holder = server('a', capacity_mb=500)
        holder.place(replica(1, 30))
        plan = plan_eviction(holder, 100, no_revenue)
        assert plan.evicted == ()
        assert plan.er_old == 0

    def test_larger_first_on_ties(self):
        holder = server('a', capacity_mb=100)
        holder.place(replica(1, 30))
        holder.place(replica(2, 50))
        assert plan_eviction(holder, 60, no_revenue).evicted == (2,)

    def test_insufficient(self):
        holder = server('a', capacity_mb=50)
        with pytest.raises(InsufficientCapacity):
            plan_eviction(holder, 100, no_revenue)

    def test_evict_frees_room(self):
        holder = server('a', capacity_mb=160)
        holder.place(replica(1, 30))
        holder.place(replica(2, 50))
        plan = evict_for_replica(holder, 100, lambda s, c: {1: 0.2, 2: 0.9}[c])
        assert plan.evicted == (1,)
        assert not holder.holds(1)
        assert holder.holds(2)
        assert holder.free_mb == pytest.approx(110)


class TestFormVO:

    def test_single_winner(self, scheduler):
        vo = scheduler.form_vo('owner', awarded('a'), policy(), VOKind.SHORT_TERM, 10.0, er_lookup=no_revenue)
        assert [award.seller for award in vo.sellers] == ['a']
        assert vo.expires_at == 310.0
        assert scheduler.servers['a'].holds(50)
        assert scheduler.servers['a'].used_mb == 100
        assert scheduler.live_vo_for('owner', 50) is vo
        assert [r.kind for r in scheduler.log] == [ev.REPLICA_PLACED, ev.VO_FORMED]
        scheduler.check_invariants()

    def test_formed_record(self, scheduler):
        vo = scheduler.form_vo('owner', awarded('a', 'b'), policy(), VOKind.LONG_TERM, 10.0, er_lookup=no_revenue)
        record = scheduler.log.of_kind(ev.VO_FORMED)[0]
        assert record.entities == ('owner', 'a', 'b')
        assert record.get('vo') == str(vo.id)
        assert record.get('kind') == 'long-term'
        assert record.get('content') == '50'
        assert record.get('payment') == '4.00'
        assert record.get('predecessor') == '0'

    def test_two_winners(self, scheduler):
        vo = scheduler.form_vo('owner', awarded('a', 'b'), policy(), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        assert {s.provider for s in scheduler.holders(50)} == {'a', 'b'}
        assert all(scheduler.servers[p].replicas[50].expires_at == vo.expires_at for p in ('a', 'b'))

    def test_policy_deny_voids_the_outcome(self):
        scheduler = make_scheduler([PolicyRule('*', PolicyPredicate.FORBIDDEN_CONTENT_RANGE, (40, 60))])
        assert scheduler.form_vo('owner', awarded('a'), policy(), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue) is None
        assert scheduler.holders(50) == []
        assert [r.kind for r in scheduler.log] == [ev.POLICY_DENY]

    def test_winner_without_room_is_dropped(self, scheduler):
        scheduler.servers['a'].capacity_mb = 50
        vo = scheduler.form_vo('owner', awarded('a', 'b'), policy(), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        assert [award.seller for award in vo.sellers] == ['b']
        assert scheduler.log.of_kind(ev.WINNER_DROPPED)[0].entities == ('a',)

    def test_void_when_every_winner_is_dropped(self, scheduler):
        scheduler.servers['a'].capacity_mb = 50
        assert scheduler.form_vo('owner', awarded('a'), policy(), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue) is None
        assert scheduler.log.of_kind(ev.VO_VOID)
        assert scheduler.vos == {}

    def test_eviction_closes_the_evicted_vo(self, scheduler):
        scheduler.servers['a'].capacity_mb = 150
        first = scheduler.form_vo('owner', awarded('a'), policy(content=1), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        scheduler.form_vo('owner', awarded('a'), policy(content=2), VOKind.SHORT_TERM, 1.0, er_lookup=no_revenue)
        assert first.status is VOStatus.DISBANDED
        assert first.closed_reason == 'evicted'
        assert not scheduler.servers['a'].holds(1)
        scheduler.check_invariants()


class TestLifecycle:

    def test_expire_in_id_order(self, scheduler):
        first = scheduler.form_vo('owner', awarded('a'), policy(content=1), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        second = scheduler.form_vo('owner', awarded('b'), policy(content=2), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        later = scheduler.form_vo('owner', awarded('c'), policy(content=3, duration_s=900), VOKind.SHORT_TERM, 0.0,
                                  er_lookup=no_revenue)
        assert scheduler.expire_vos(300.0) == [first.id, second.id]
        assert later.is_live
        assert scheduler.holders(1) == [] and scheduler.holders(2) == []
        assert len(scheduler.log.of_kind(ev.REPLICA_EXPIRED)) == 2
        scheduler.check_invariants()

    def test_rearrange_swaps_seller(self, scheduler):
        vo = scheduler.form_vo('owner', awarded('a'), policy(), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        event = RenegotiationEvent(RenegotiationKind.CHEAPER_ENTRANT, 50, vo.id, 100.0, 'b')
        successor = scheduler.rearrange_vo(vo, event, awarded('b', payment='2.00'), policy(duration_s=200), 100.0,
                                           er_lookup=no_revenue)
        assert [s.provider for s in scheduler.holders(50)] == ['b']
        assert vo.status is VOStatus.REARRANGED
        assert vo.successor == successor.id
        assert successor.predecessor == vo.id
        assert successor.expires_at == 300.0
        assert scheduler.log.of_kind(ev.REPLICA_REMOVED)[0].entities == ('a',)
        scheduler.check_invariants()

    def test_rearrange_keeps_incumbent_copy(self, scheduler):
        vo = scheduler.form_vo('owner', awarded('a'), policy(), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        event = RenegotiationEvent(RenegotiationKind.DEMAND_CHANGE, 50, vo.id, 100.0, 'a')
        successor = scheduler.rearrange_vo(vo, event, awarded('a', payment='2.00'), policy(duration_s=200), 100.0,
                                           er_lookup=no_revenue)
        held = scheduler.servers['a'].replicas[50]
        assert held.vo == successor.id
        assert held.payment == Decimal('2.00')
        assert scheduler.log.of_kind(ev.REPLICA_PLACED)[-1].get('retained') == '1'
        scheduler.check_invariants()

    def test_no_winner_keeps_vo(self, scheduler):
        vo = scheduler.form_vo('owner', awarded('a'), policy(), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        event = RenegotiationEvent(RenegotiationKind.CHEAPER_ENTRANT, 50, vo.id, 100.0, 'b')
        kept = scheduler.rearrange_vo(vo, event, NoWinner(NoWinnerReason.ALL_ABOVE_RESERVE), policy(duration_s=200), 100.0,
                                      er_lookup=no_revenue)
        assert kept is vo
        assert vo.is_live
        assert scheduler.log.of_kind(ev.VO_KEPT)

    def test_no_longer_beneficial_disbands(self, scheduler):
        vo = scheduler.form_vo('owner', awarded('a'), policy(), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        event = RenegotiationEvent(RenegotiationKind.NO_LONGER_BENEFICIAL, 50, vo.id, 100.0, 'a')
        assert scheduler.rearrange_vo(vo, event, NoWinner(NoWinnerReason.NO_BIDS), policy(duration_s=200), 100.0,
                                      er_lookup=no_revenue) is None
        assert vo.status is VOStatus.DISBANDED
        assert scheduler.holders(50) == []

    def test_closed_vo_is_never_live(self, scheduler):
        vo = scheduler.form_vo('owner', awarded('a'), policy(), VOKind.SHORT_TERM, 0.0, er_lookup=no_revenue)
        scheduler.disband(vo, 5.0, 'test')
        assert not vo.is_live
        assert scheduler.live_vos() == []
        assert scheduler.log.of_kind(ev.VO_DISBANDED)[0].get('reason') == 'test'

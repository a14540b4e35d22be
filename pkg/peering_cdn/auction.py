"""Sealed-bid reverse Vickrey auctions run by a coordinated VO scheduler on behalf of a buyer.

The buyer's reserve price is never shown to sellers. Sellers see nothing about other bids. When the auction clears, the ``m`` lowest
eligible bids win and every winner is paid the same price: the ``(m + 1)``-th lowest eligible bid, or the reserve when there is no
such bid.
"""

import logging
from dataclasses import dataclass, field, replace
from decimal import Decimal
from enum import Enum
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

from .econ import ContentId, LocationId, to_currency
from .exceptions import AuctionRefused, BidRejected, DomainError

if TYPE_CHECKING:  # pragma: no cover
    from .vo import VirtualOrganization

logger = logging.getLogger(__name__)

DEFAULT_MAX_RETRIES = 3
MIN_DURATION_S = 1.0


@dataclass(frozen=True)
class AuctionPolicy:
    """Requirements a buyer publishes for one content replication.

    Attributes
    ----------
    content : ContentId
    storage_mb : float
        Storage each replica needs.
    upload_kbps, download_kbps : float
        Minimum transfer rates a seller must offer.
    preferred_regions : frozenset
        Regions the buyer would like replicas in. Only affects discovery order.
    duration_s : float
        How long the replica must be held.
    retry_count : int
        How many times the policy was relaxed after an auction without winners.
    replicas : int
        Number of winners wanted.
    """
    content: ContentId
    storage_mb: float
    upload_kbps: float
    download_kbps: float
    duration_s: float
    preferred_regions: FrozenSet[LocationId] = frozenset()
    retry_count: int = 0
    replicas: int = 1

    def __post_init__(self):
        if self.storage_mb < 0:
            raise DomainError(f'storage_mb must be non-negative (got {self.storage_mb}).')
        if self.upload_kbps <= 0 or self.download_kbps <= 0:
            raise DomainError('Upload and download rates must be strictly positive.')
        if self.duration_s <= 0:
            raise DomainError(f'duration_s must be strictly positive (got {self.duration_s}).')
        if self.retry_count < 0:
            raise DomainError(f'retry_count must be non-negative (got {self.retry_count}).')
        if self.replicas < 1:
            raise DomainError(f'replicas must be at least 1 (got {self.replicas}).')


@dataclass(frozen=True)
class Bid:
    seller: str
    amount: Decimal
    submitted_at: float

    def __post_init__(self):
        object.__setattr__(self, 'amount', to_currency(self.amount))
        if self.amount < 0:
            raise DomainError(f'Bid amounts must be non-negative (got {self.amount}).')

    @property
    def sort_key(self) -> Tuple[Decimal, float, str]:
        return self.amount, self.submitted_at, self.seller


@dataclass(frozen=True)
class Award:
    seller: str
    bid: Decimal
    payment: Decimal


class NoWinnerReason(Enum):
    ALL_ABOVE_RESERVE = 'all-above-reserve'
    NO_BIDS = 'no-bids'


@dataclass(frozen=True)
class Awarded:
    """Winners sorted by ascending bid, each paid the same uniform price."""
    winners: Tuple[Award, ...]

    @property
    def payment(self) -> Decimal:
        return self.winners[0].payment

    @property
    def sellers(self) -> List[str]:
        return [award.seller for award in self.winners]


@dataclass(frozen=True)
class NoWinner:
    reason: NoWinnerReason


AuctionOutcome = Union[Awarded, NoWinner]


class RenegotiationKind(Enum):
    DEMAND_CHANGE = 'demand-change'
    NO_LONGER_BENEFICIAL = 'no-longer-beneficial'
    CHEAPER_ENTRANT = 'cheaper-entrant'


@dataclass(frozen=True)
class RenegotiationEvent:
    kind: RenegotiationKind
    content: ContentId
    vo: int
    detected_at: float
    seller: str = ''


class Auction:
    """A single sealed-bid auction. Instances are created with :func:`open_auction` and are owned by one caller.

    Bids are kept sealed until :meth:`clear` is called; after that :attr:`revealed_bids` returns them in clearing order.
    """

    def __init__(self, auction_id: int, policy: AuctionPolicy, reserve: Decimal, buyer: str):
        self.id = auction_id
        self.policy = policy
        self.buyer = buyer
        self._reserve = reserve
        self._bids: Dict[str, Bid] = {}
        self.outcome: Optional[AuctionOutcome] = None

    @property
    def is_open(self) -> bool:
        return self.outcome is None

    @property
    def bid_count(self) -> int:
        return len(self._bids)

    @property
    def revealed_bids(self) -> List[Bid]:
        if self.is_open:
            raise BidRejected('Bids stay sealed until the auction clears.')
        return sorted(self._bids.values(), key=lambda b: b.sort_key)

    @property
    def reserve(self) -> Decimal:
        if self.is_open:
            raise BidRejected('The reserve price is not disclosed while the auction is open.')
        return self._reserve

    def submit_bid(self, bid: Bid) -> None:
        """Records a sealed bid.

        Raises
        ------
        BidRejected
            If the auction has cleared or if the seller has already bid.
        """
        if not self.is_open:
            raise BidRejected(f'Auction {self.id} is closed.')
        if bid.seller == self.buyer:
            raise BidRejected(f'The buyer "{self.buyer}" cannot bid in its own auction.')
        if bid.seller in self._bids:
            raise BidRejected(f'Seller "{bid.seller}" has already bid in auction {self.id}.')
        self._bids[bid.seller] = bid

    def clear(self, winners_wanted: Optional[int] = None) -> AuctionOutcome:
        """Closes the auction and selects winners.

        Parameters
        ----------
        winners_wanted : int, optional
            Number of winners. Defaults to the policy's ``replicas``.

        Returns
        -------
        outcome : Awarded or NoWinner
        """
        if not self.is_open:
            raise BidRejected(f'Auction {self.id} has already cleared.')
        m = self.policy.replicas if winners_wanted is None else winners_wanted
        if m < 1:
            raise DomainError(f'winners_wanted must be at least 1 (got {m}).')

        ranked = sorted(self._bids.values(), key=lambda b: b.sort_key)
        eligible = [bid for bid in ranked if bid.amount <= self._reserve]

        outcome: AuctionOutcome
        if not ranked:
            outcome = NoWinner(NoWinnerReason.NO_BIDS)
        elif not eligible:
            outcome = NoWinner(NoWinnerReason.ALL_ABOVE_RESERVE)
        else:
            winners, rest = eligible[:m], eligible[m:]
            price = rest[0].amount if rest else self._reserve
            outcome = Awarded(tuple(Award(bid.seller, bid.amount, price) for bid in winners))

        self.outcome = outcome
        logger.debug('Auction %s for content %s cleared with %s bids: %s', self.id, self.policy.content, len(ranked), outcome)
        return outcome


def open_auction(
        policy: AuctionPolicy,
        reserve: Union[Decimal, float],
        buyer: str,
        *,
        auction_id: int = 0,
        max_retries: int = DEFAULT_MAX_RETRIES
) -> Auction:
    """Opens an auction for ``policy`` with the buyer's private reserve price.

    Raises
    ------
    AuctionRefused
        If the reserve is not positive (the buyer has no budget) or the policy has been retried more than ``max_retries`` times.
    """
    reserve = to_currency(reserve)
    if reserve <= 0:
        raise AuctionRefused(f'Buyer "{buyer}" has no budget for content {policy.content} (reserve {reserve}).')
    if policy.retry_count > max_retries:
        raise AuctionRefused(f'Policy for content {policy.content} exceeded {max_retries} retries.')
    return Auction(auction_id, policy, reserve, buyer)


def retry_after_no_winner(
        policy: AuctionPolicy,
        *,
        max_retries: int = DEFAULT_MAX_RETRIES,
        min_duration_s: float = MIN_DURATION_S
) -> Optional[AuctionPolicy]:
    """Relaxes a policy after an auction without winners by halving the holding duration.

    Returns ``None`` when the buyer should give up: the retry budget is spent or the halved duration falls below
    ``min_duration_s``.
    """
    if policy.retry_count >= max_retries:
        return None
    duration = policy.duration_s / 2
    if duration < min_duration_s:
        return None
    return replace(policy, duration_s=duration, retry_count=policy.retry_count + 1)


@dataclass(frozen=True)
class MarketSnapshot:
    """What the scheduler observes about sellers at one renegotiation tick.

    Attributes
    ----------
    asks : Mapping
        ``(seller, content)`` to the seller's currently posted ask. Covers VO members and outside entrants alike.
    utilities : Mapping
        ``(seller, content)`` to the member's utility of keeping the replica for the rest of its duration.
    """
    asks: Mapping[Tuple[str, ContentId], Decimal] = field(default_factory=dict)
    utilities: Mapping[Tuple[str, ContentId], float] = field(default_factory=dict)


def detect_renegotiation(
        vos: Iterable['VirtualOrganization'],
        market: MarketSnapshot,
        now: float,
        *,
        margin: float = 0.1,
        demand_tolerance: float = 0.0
) -> List[RenegotiationEvent]:
    """Finds live VOs that need a fresh auction.

    A VO is flagged with, in this order of precedence per seller:

    * ``DEMAND_CHANGE`` when a member's posted ask differs from its winning bid by more than ``demand_tolerance`` (relative);
    * ``NO_LONGER_BENEFICIAL`` when a member's utility of keeping the replica is not positive;
    * ``CHEAPER_ENTRANT`` when a provider outside the VO asks less than ``(1 - margin)`` times the current payment.

    Each VO yields at most one event per kind, in VO id order.
    """
    events: List[RenegotiationEvent] = []
    for vo in sorted(vos, key=lambda v: v.id):
        if not vo.is_live:
            continue
        found: Dict[RenegotiationKind, RenegotiationEvent] = {}
        members = {award.seller for award in vo.sellers}

        for award in vo.sellers:
            ask = market.asks.get((award.seller, vo.content))
            if (ask is not None and RenegotiationKind.DEMAND_CHANGE not in found
                    and abs(ask - award.bid) > Decimal(repr(demand_tolerance)) * award.bid):
                found[RenegotiationKind.DEMAND_CHANGE] = RenegotiationEvent(
                    RenegotiationKind.DEMAND_CHANGE, vo.content, vo.id, now, award.seller)
            gain = market.utilities.get((award.seller, vo.content))
            if gain is not None and gain <= 0 and RenegotiationKind.NO_LONGER_BENEFICIAL not in found:
                found[RenegotiationKind.NO_LONGER_BENEFICIAL] = RenegotiationEvent(
                    RenegotiationKind.NO_LONGER_BENEFICIAL, vo.content, vo.id, now, award.seller)

        if vo.sellers:
            threshold = vo.payment * (1 - Decimal(repr(margin)))
            entrants = sorted(
                (ask, seller) for (seller, content), ask in market.asks.items()
                if content == vo.content and seller not in members and seller != vo.buyer
            )
            if entrants and entrants[0][0] < threshold:
                found[RenegotiationKind.CHEAPER_ENTRANT] = RenegotiationEvent(
                    RenegotiationKind.CHEAPER_ENTRANT, vo.content, vo.id, now, entrants[0][1])

        events.extend(found[kind] for kind in RenegotiationKind if kind in found)
    return events

"""Sealed-bid second-price auction with a hypothetical payment for every rank.

A single impression is sold to the highest bidder, but every participant is
assigned a rank, and each rank pays the bid just below it (the lowest rank
pays the reserve price).  This yields a full per-advertiser payment and
utility vector, which downstream re-ranking uses to price any candidate it
might promote.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidAuctionError


@dataclass(frozen=True)
class AuctionRecord:
    """One sealed-bid auction.

    Attributes:
        auction_id: Opaque identifier.
        bids: Sequence of (advertiser_id, bid) pairs; bids are money per
            impression and must be >= 0.
        values: Private value per advertiser, aligned with ``bids``.
            Defaults to the bids themselves (truthful bidding).
        reserve: Price floor.  Bidders below it are excluded from ranking
            and pay nothing.
    """

    auction_id: str
    bids: tuple[tuple[str, float], ...]
    values: tuple[float, ...] = ()
    reserve: float = 0.0

    def __post_init__(self):
        bids = tuple((str(a), float(b)) for a, b in self.bids)
        if not bids:
            raise InvalidAuctionError(f"auction {self.auction_id!r}: empty bid list")
        ids = [a for a, _ in bids]
        if len(set(ids)) != len(ids):
            raise InvalidAuctionError(
                f"auction {self.auction_id!r}: duplicate advertiser ids"
            )
        if any(b < 0 for _, b in bids):
            raise InvalidAuctionError(f"auction {self.auction_id!r}: negative bid")
        values = tuple(float(v) for v in self.values) if self.values else tuple(
            b for _, b in bids
        )
        if len(values) != len(bids):
            raise InvalidAuctionError(
                f"auction {self.auction_id!r}: values/bids length mismatch"
            )
        if any(v < 0 for v in values):
            raise InvalidAuctionError(f"auction {self.auction_id!r}: negative value")
        if self.reserve < 0:
            raise InvalidAuctionError(f"auction {self.auction_id!r}: negative reserve")
        object.__setattr__(self, "bids", bids)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "reserve", float(self.reserve))

    @property
    def advertiser_ids(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.bids)

    @property
    def amounts(self) -> tuple[float, ...]:
        return tuple(b for _, b in self.bids)

    def __len__(self) -> int:
        return len(self.bids)

    def to_dict(self) -> dict:
        return {
            "auction_id": self.auction_id,
            "bids": [[a, b] for a, b in self.bids],
            "values": list(self.values),
            "reserve": self.reserve,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuctionRecord":
        raw = d["bids"]
        # A mapping or string would otherwise iterate into bogus pairs.
        if not isinstance(raw, (list, tuple)):
            raise InvalidAuctionError(
                f"auction {d['auction_id']!r}: bids must be a list of"
                " [advertiser_id, amount] pairs"
            )
        return cls(
            auction_id=d["auction_id"],
            bids=tuple((a, b) for a, b in raw),
            values=tuple(d.get("values") or ()),
            reserve=d.get("reserve", 0.0),
        )


@dataclass(frozen=True)
class AllocationResult:
    """Outcome of ranking one auction.

    Attributes:
        ranking: Advertiser indices ordered best-first; excludes bidders
            below the reserve.
        allocation: (n, n) 0/1 matrix; entry [i, j] is 1 iff advertiser i
            holds rank j (rank 0 is the real slot, later ranks are
            hypothetical).  Rows of excluded bidders are all zero.
        payments: Per-advertiser payment; rank j pays the bid at rank j+1,
            the last rank pays the reserve, excluded bidders pay 0.
        utilities: Per-advertiser value minus payment (0 for excluded).
    """

    ranking: tuple[int, ...]
    allocation: np.ndarray
    payments: np.ndarray
    utilities: np.ndarray


def _sort_key(auction: AuctionRecord):
    """Ordering for ranks: bid desc, then value desc, then advertiser id."""

    def key(i: int):
        return (-auction.amounts[i], -auction.values[i], auction.advertiser_ids[i])

    return key


def rank_bids(auction: AuctionRecord) -> tuple[int, ...]:
    """Order admitted advertisers by descending bid.

    Bidders below the reserve are excluded entirely.  Ties are broken by
    higher private value, then by advertiser id, so the order is
    deterministic across runs.

    Args:
        auction: A valid auction record.

    Returns:
        Advertiser indices, highest bid first.
    """
    admitted = [i for i, b in enumerate(auction.amounts) if b >= auction.reserve]
    return tuple(sorted(admitted, key=_sort_key(auction)))


def highest_bidder(auction: AuctionRecord) -> str:
    """Advertiser id of the top bid, reserve ignored, same tie rule as ranking."""
    return auction.advertiser_ids[min(range(len(auction)), key=_sort_key(auction))]


def _slot_prices(auction: AuctionRecord, ranking: tuple[int, ...]) -> np.ndarray:
    """Price of each slot: the bid ranked just below it, reserve for the last."""
    prices = np.zeros(len(auction))
    r = len(ranking)
    for slot in range(r):
        if slot + 1 < r:
            prices[slot] = auction.amounts[ranking[slot + 1]]
        else:
            prices[slot] = auction.reserve
    return prices


def allocate(auction: AuctionRecord) -> AllocationResult:
    """Assign each admitted advertiser to the rank matching their bid order.

    The real slot goes to the top bid; one hypothetical slot per remaining
    admitted bidder records where everyone else would have landed.
    """
    n = len(auction)
    ranking = rank_bids(auction)
    y = np.zeros((n, n), dtype=np.int64)
    for slot, adv in enumerate(ranking):
        y[adv, slot] = 1
    p = y @ _slot_prices(auction, ranking)
    u = np.where(y.sum(axis=1) > 0, np.asarray(auction.values) - p, 0.0)
    return AllocationResult(ranking=ranking, allocation=y, payments=p, utilities=u)


def payments(auction: AuctionRecord, allocation: AllocationResult) -> np.ndarray:
    """Compute every advertiser's payment from the allocation matrix.

    The price of rank j is the bid at rank j+1; the price of the lowest
    occupied rank is the reserve.  Payments are read off through the 0/1
    matrix, so excluded bidders (all-zero rows) pay 0.

    Args:
        auction: The auction the allocation came from.
        allocation: Result of :func:`allocate` on the same auction.

    Returns:
        Payment per advertiser, aligned with ``auction.bids``.
    """
    return allocation.allocation @ _slot_prices(auction, allocation.ranking)

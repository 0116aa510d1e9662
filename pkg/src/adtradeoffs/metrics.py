"""The six ranking metrics, their per-ad records, and min-max normalization.

Each candidate ad in an auction carries a six-entry vector: the publisher's
revenue (the advertiser's payment), the advertiser's utility, and four ad
quality scores (memorability, click-through rate, contextual relevance,
visual saliency).  Revenue and utility come out of the auction stage; the
quality scores are supplied externally.  Before re-ranking, every metric is
min-max normalized to [0, 1] across a reference set of auctions.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Mapping

import numpy as np

from .auction import AllocationResult, AuctionRecord
from .errors import InvalidAuctionError, MissingMetricError, ValidationError

NUM_METRICS = 6


class MetricKind(IntEnum):
    """Column order of every metric vector in the package."""

    REVENUE = 0
    UTILITY = 1
    MEMORABILITY = 2
    CTR = 3
    RELEVANCE = 4
    SALIENCY = 5


METRIC_NAMES = tuple(kind.name.lower() for kind in MetricKind)

# Raw score ranges for the externally supplied metrics.
SCORE_RANGES = {
    "memorability": (0.0, 1.0),
    "ctr": (0.0, 1.0),
    "relevance": (0.0, 5.0),
    "saliency": (0.0, 1.0),
}


@dataclass(frozen=True)
class RawMetricRecord:
    """Externally supplied quality scores for one ad on one webpage.

    Memorability and CTR are per-ad; relevance and saliency depend on the
    hosting webpage as well.  A ``None`` field means the score is missing,
    which surfaces as an error when the ad enters an auction.
    """

    ad_id: str
    memorability: float | None = None
    ctr: float | None = None
    relevance: float | None = None
    saliency: float | None = None

    def __post_init__(self):
        for field, (lo, hi) in SCORE_RANGES.items():
            v = getattr(self, field)
            if v is not None and not lo <= v <= hi:
                raise ValidationError(
                    f"ad {self.ad_id!r}: {field}={v} outside [{lo}, {hi}]"
                )

    def score(self, field: str) -> float:
        v = getattr(self, field)
        if v is None:
            raise MissingMetricError(self.ad_id, field)
        return float(v)

    def to_dict(self) -> dict:
        return {
            "ad_id": self.ad_id,
            "memorability": self.memorability,
            "ctr": self.ctr,
            "relevance": self.relevance,
            "saliency": self.saliency,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RawMetricRecord":
        return cls(
            ad_id=str(data["ad_id"]),
            memorability=data.get("memorability"),
            ctr=data.get("ctr"),
            relevance=data.get("relevance"),
            saliency=data.get("saliency"),
        )


@dataclass(frozen=True)
class MetricMatrix:
    """Per-candidate metric vectors for one auction.

    Rows are ordered by auction rank, so row 0 is always the plain-auction
    winner (the ground truth for re-ranking comparisons).  ``raw`` holds
    unscaled values; ``normalized`` is filled by :func:`apply_normalizer`.
    """

    auction_id: str
    advertiser_ids: tuple[str, ...]
    ad_ids: tuple[str, ...]
    raw: np.ndarray
    ground_truth_index: int = 0
    normalized: np.ndarray | None = None

    def __post_init__(self):
        raw = np.asarray(self.raw, dtype=float)
        if raw.ndim != 2 or raw.shape[1] != NUM_METRICS:
            raise ValidationError(
                f"auction {self.auction_id!r}: metric matrix must be (n, {NUM_METRICS})"
            )
        if not len(self.advertiser_ids) == len(self.ad_ids) == raw.shape[0]:
            raise ValidationError(
                f"auction {self.auction_id!r}: row count mismatch with ids"
            )
        if not 0 <= self.ground_truth_index < raw.shape[0]:
            raise ValidationError(
                f"auction {self.auction_id!r}: ground-truth index out of range"
            )
        object.__setattr__(self, "raw", raw)

    def __len__(self) -> int:
        return self.raw.shape[0]


def assemble_raw(
    auction: AuctionRecord,
    allocation: AllocationResult,
    records: Mapping[str, RawMetricRecord],
) -> MetricMatrix:
    """Build the raw metric matrix for one auction.

    Revenue and utility are taken from the auction outcome; the remaining
    four scores come from each advertiser's matched ad record.  Only ranked
    advertisers (at or above the reserve) become candidate rows.

    Args:
        auction: The auction being re-ranked.
        allocation: Its allocation, from :func:`adtradeoffs.auction.allocate`.
        records: Matched ad record per advertiser id.

    Returns:
        Matrix with rows in rank order; row 0 is the auction winner.

    Raises:
        InvalidAuctionError: If no bidder cleared the reserve.
        MissingMetricError: If an advertiser has no record or a record is
            missing a score.
    """
    if not allocation.ranking:
        raise InvalidAuctionError(
            f"auction {auction.auction_id!r}: no bids at or above the reserve"
        )
    rows = []
    advertiser_ids = []
    ad_ids = []
    for adv_index in allocation.ranking:
        adv = auction.advertiser_ids[adv_index]
        record = records.get(adv)
        if record is None:
            raise MissingMetricError(f"<unmatched advertiser {adv}>")
        rows.append(
            [
                allocation.payments[adv_index],
                allocation.utilities[adv_index],
                record.score("memorability"),
                record.score("ctr"),
                record.score("relevance"),
                record.score("saliency"),
            ]
        )
        advertiser_ids.append(adv)
        ad_ids.append(record.ad_id)
    return MetricMatrix(
        auction_id=auction.auction_id,
        advertiser_ids=tuple(advertiser_ids),
        ad_ids=tuple(ad_ids),
        raw=np.array(rows),
        ground_truth_index=0,
    )


@dataclass(frozen=True)
class Normalizer:
    """Per-metric min/max bounds fitted on a reference set of auctions."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mins", np.asarray(self.mins, dtype=float))
        object.__setattr__(self, "maxs", np.asarray(self.maxs, dtype=float))


def fit_normalizer(matrices: Iterable[MetricMatrix]) -> Normalizer:
    """Scan per-metric min and max over every candidate row in the set."""
    stacked = [m.raw for m in matrices]
    if not stacked:
        raise ValidationError("cannot fit a normalizer on an empty auction set")
    data = np.concatenate(stacked, axis=0)
    return Normalizer(mins=data.min(axis=0), maxs=data.max(axis=0))


def apply_normalizer(norm: Normalizer, matrix: MetricMatrix) -> MetricMatrix:
    """Rescale a raw matrix to [0, 1] with the fitted bounds.

    Values outside the fitted range (held-out auctions) are clamped.  A
    degenerate metric whose fitted min equals its max maps to 0: a constant
    column cannot change which candidate wins.
    """
    span = norm.maxs - norm.mins
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = (matrix.raw - norm.mins) / span
    scaled = np.where(span > 0, scaled, 0.0)
    scaled = np.clip(scaled, 0.0, 1.0)
    return dataclasses.replace(matrix, normalized=scaled)

"""Dataset construction: ingest auction and ad-metric files, or synthesize
both, and assemble them into simulated impressions.

An impression records one webpage visit: the auction that sold its slot,
the ad that actually ran (the ground truth, owned by the winning bid),
and a full candidate slate built by matching additional ads to the losing
bids.  Because real click logs are rarely available, every candidate's
CTR is drawn from a uniform model whose upper bound is a published
top-position mean plus 1.96 standard deviations.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .auction import AuctionRecord, highest_bidder
from .errors import ConfigError, MissingMetricError, SamplingError, ValidationError
from .metrics import RawMetricRecord
from .storage import read_jsonl

logger = logging.getLogger(__name__)

# Reported top-position CTR statistics: mean 13.97 per mille, std 28.49
# per mille.  The uniform upper bound is mean + 1.96 * std; the exact
# decimal is stored rather than the float expression so the documented
# bound is the enforced bound.
TOP_CTR_MEAN = 0.01397
TOP_CTR_STD = 0.02849
CTR_UPPER_DEFAULT = 0.0698104


@dataclass
class CtrModel:
    """Uniform CTR sampler over [lower, upper] with its own random stream."""

    rng: np.random.Generator
    lower: float = 0.0
    upper: float = CTR_UPPER_DEFAULT

    def __post_init__(self):
        if not 0.0 <= self.lower < self.upper:
            raise ConfigError(
                f"CTR bounds must satisfy 0 <= lower < upper, got "
                f"[{self.lower}, {self.upper}]"
            )

    @classmethod
    def from_seed(cls, seed: int, lower: float = 0.0,
                  upper: float = CTR_UPPER_DEFAULT) -> "CtrModel":
        return cls(rng=np.random.default_rng(seed), lower=lower, upper=upper)


def sample_ctr(model: CtrModel) -> float:
    """Draw one CTR from the model's uniform range."""
    return float(model.rng.uniform(model.lower, model.upper))


@dataclass(frozen=True)
class SimulatedImpression:
    """One webpage visit: auction, candidate ads, and their pairing.

    Attributes:
        webpage_id: Hosting page.
        auction: The auction that sold the page's single slot.
        matching: advertiser_id -> ad_id, one candidate ad per bidder.
        ground_truth_ad_id: The ad that actually ran; always matched to
            the winning bid.
        ads: Metric record per candidate ad, ground truth first.
    """

    webpage_id: str
    auction: AuctionRecord
    matching: dict[str, str]
    ground_truth_ad_id: str
    ads: tuple[RawMetricRecord, ...]

    def __post_init__(self):
        if set(self.matching) != set(self.auction.advertiser_ids):
            raise ValidationError(
                f"impression {self.webpage_id!r}: matching keys must be the bidders"
            )
        ad_ids = [r.ad_id for r in self.ads]
        if len(set(ad_ids)) != len(ad_ids):
            raise ValidationError(
                f"impression {self.webpage_id!r}: duplicate candidate ads"
            )
        if len(self.ads) != len(self.auction):
            raise ValidationError(
                f"impression {self.webpage_id!r}: need one ad per bidder"
            )
        if set(self.matching.values()) != set(ad_ids):
            raise ValidationError(
                f"impression {self.webpage_id!r}: matched ads and records disagree"
            )
        winner = highest_bidder(self.auction)
        if self.matching[winner] != self.ground_truth_ad_id:
            raise ValidationError(
                f"impression {self.webpage_id!r}: ground-truth ad must belong "
                f"to the winning bid"
            )

    def records_by_advertiser(self) -> dict[str, RawMetricRecord]:
        by_ad = {r.ad_id: r for r in self.ads}
        return {adv: by_ad[ad] for adv, ad in self.matching.items()}

    def to_dict(self) -> dict:
        return {
            "webpage_id": self.webpage_id,
            "auction": self.auction.to_dict(),
            "matching": dict(sorted(self.matching.items())),
            "ground_truth_ad_id": self.ground_truth_ad_id,
            "ads": [r.to_dict() for r in self.ads],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SimulatedImpression":
        return cls(
            webpage_id=str(data["webpage_id"]),
            auction=AuctionRecord.from_dict(data["auction"]),
            matching={str(k): str(v) for k, v in data["matching"].items()},
            ground_truth_ad_id=str(data["ground_truth_ad_id"]),
            ads=tuple(RawMetricRecord.from_dict(r) for r in data["ads"]),
        )


@dataclass
class IngestResult:
    """Parsed records plus (line number, reason) pairs for rejected lines."""

    records: object
    rejections: list[tuple[int, str]] = field(default_factory=list)


def _ingest(path, build, store) -> IngestResult:
    rejections: list[tuple[int, str]] = []
    count = 0
    for lineno, obj in read_jsonl(path):
        try:
            store(build(obj))
        except (ValidationError, KeyError, TypeError, AttributeError) as exc:
            rejections.append((lineno, f"{type(exc).__name__}: {exc}"))
            continue
        count += 1
    if count == 0:
        logger.warning("%s: no valid records", path)
    for lineno, reason in rejections:
        logger.warning("%s:%d: rejected (%s)", path, lineno, reason)
    return rejections, count


def ingest_auctions(path: str | Path) -> IngestResult:
    """Read an auction file, one JSON object per line.

    Lines that fail validation (duplicate bidders, negative bids, missing
    keys) are rejected individually and reported with their line numbers;
    undecodable lines abort with a ParseError naming the location.
    """
    records: list[AuctionRecord] = []
    rejections, _ = _ingest(path, AuctionRecord.from_dict, records.append)
    return IngestResult(records=records, rejections=rejections)


def ingest_metrics(path: str | Path) -> IngestResult:
    """Read an ad-metric file into a table keyed by (webpage_id, ad_id)."""
    table: dict[tuple[str, str], RawMetricRecord] = {}

    def build(obj):
        key = (str(obj["webpage_id"]), str(obj["ad_id"]))
        record = RawMetricRecord.from_dict(obj)
        if key in table:
            raise ValidationError(f"duplicate metric record for {key}")
        return key, record

    def store(item):
        key, record = item
        table[key] = record

    rejections, _ = _ingest(path, build, store)
    return IngestResult(records=table, rejections=rejections)


def ingest_impressions(path: str | Path) -> IngestResult:
    """Read a fully assembled impression file."""
    records: list[SimulatedImpression] = []
    rejections, _ = _ingest(path, SimulatedImpression.from_dict, records.append)
    return IngestResult(records=records, rejections=rejections)


def build_impression(
    webpage_id: str,
    ground_truth_ad: str,
    auction: AuctionRecord,
    ad_pool: Sequence[str],
    metrics: Mapping[str, RawMetricRecord],
    ctr_model: CtrModel,
    rng: np.random.Generator,
) -> SimulatedImpression:
    """Assemble one impression around a known ground-truth ad.

    The ground-truth ad is matched to the winning bid.  The other bids
    each receive an ad sampled from the pool without replacement and
    assigned by a uniform permutation.  Every candidate, ground truth
    included, gets a freshly sampled CTR: the true click rates behind the
    source pages are unknown, so all candidates are treated alike.

    Args:
        webpage_id: Hosting page id.
        ground_truth_ad: Ad id of the originally displayed ad.
        auction: The impression's auction.
        ad_pool: Candidate ad ids; must offer >= n-1 ads distinct from
            the ground truth.
        metrics: Metric record per ad id, for the hosting page.
        ctr_model: CTR sampler.
        rng: Random stream for pool sampling and bid matching.

    Raises:
        SamplingError: If the pool cannot fill the candidate slate.
        MissingMetricError: If a chosen ad has no metric record.
    """
    n = len(auction)
    pool = [a for a in dict.fromkeys(ad_pool) if a != ground_truth_ad]
    if len(pool) < n - 1:
        raise SamplingError(
            f"impression {webpage_id!r}: pool offers {len(pool)} ads distinct "
            f"from the ground truth, {n - 1} needed"
        )
    chosen = [pool[i] for i in rng.choice(len(pool), size=n - 1, replace=False)]
    slate = [ground_truth_ad] + chosen

    records = []
    for ad in slate:
        record = metrics.get(ad)
        if record is None:
            raise MissingMetricError(ad)
        records.append(dataclasses.replace(record, ctr=sample_ctr(ctr_model)))

    winner = highest_bidder(auction)
    losers = [adv for adv in auction.advertiser_ids if adv != winner]
    shuffled = [chosen[i] for i in rng.permutation(n - 1)]
    matching = {winner: ground_truth_ad}
    matching.update(zip(losers, shuffled))
    return SimulatedImpression(
        webpage_id=webpage_id,
        auction=auction,
        matching=matching,
        ground_truth_ad_id=ground_truth_ad,
        ads=tuple(records),
    )


@dataclass(frozen=True)
class DatasetSpec:
    """Shape of a synthetic dataset.

    Bids follow a log-normal distribution, a stand-in with the heavy
    right tail typical of real exchange bids; the four external metric
    scores are uniform over their raw ranges.
    """

    impressions: int
    seed: int
    bidders: tuple[int, int] = (2, 8)
    bid_mu: float = 0.0
    bid_sigma: float = 1.0
    reserve: float = 0.0

    def __post_init__(self):
        if self.impressions < 0:
            raise ConfigError(f"impression count must be >= 0, got {self.impressions}")
        lo, hi = self.bidders
        if not (isinstance(lo, int) and isinstance(hi, int) and 1 <= lo <= hi):
            raise ConfigError(f"bidder range must satisfy 1 <= lo <= hi, got {self.bidders}")
        if self.bid_sigma <= 0:
            raise ConfigError(f"bid sigma must be > 0, got {self.bid_sigma}")
        if self.reserve < 0:
            raise ConfigError(f"reserve must be >= 0, got {self.reserve}")


def synthesize_dataset(spec: DatasetSpec) -> list[SimulatedImpression]:
    """Generate a full synthetic impression set from one master seed.

    Each impression draws from its own random stream spawned from the
    master seed, so construction could run in parallel without changing
    the output; two runs with equal specs are identical byte for byte.
    """
    root = np.random.SeedSequence(spec.seed)
    impressions = []
    lo, hi = spec.bidders
    for z, child in enumerate(root.spawn(spec.impressions)):
        rng = np.random.default_rng(child)
        n = int(rng.integers(lo, hi + 1))
        bids = rng.lognormal(spec.bid_mu, spec.bid_sigma, size=n)
        auction = AuctionRecord(
            auction_id=f"auc-{z:05d}",
            bids=tuple(
                (f"adv-{z:05d}-{i:02d}", float(b)) for i, b in enumerate(bids)
            ),
            reserve=spec.reserve,
        )
        ad_ids = [f"ad-{z:05d}-{j:02d}" for j in range(n)]
        table = {
            ad: RawMetricRecord(
                ad_id=ad,
                memorability=float(rng.uniform(0.0, 1.0)),
                relevance=float(rng.uniform(0.0, 5.0)),
                saliency=float(rng.uniform(0.0, 1.0)),
            )
            for ad in ad_ids
        }
        impressions.append(
            build_impression(
                webpage_id=f"web-{z:05d}",
                ground_truth_ad=ad_ids[0],
                auction=auction,
                ad_pool=ad_ids[1:],
                metrics=table,
                ctr_model=CtrModel(rng=rng),
                rng=rng,
            )
        )
    return impressions

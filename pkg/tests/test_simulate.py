"""Dataset synthesis and file ingest: CTR model, impression assembly,
generator determinism, and rejection handling for malformed files."""

import numpy as np
import pytest

from adtradeoffs import (
    CTR_UPPER_DEFAULT,
    TOP_CTR_MEAN,
    TOP_CTR_STD,
    AuctionRecord,
    ConfigError,
    CtrModel,
    DatasetSpec,
    MissingMetricError,
    ParseError,
    RawMetricRecord,
    SamplingError,
    SimulatedImpression,
    ValidationError,
    build_impression,
    ingest_auctions,
    ingest_impressions,
    ingest_metrics,
    sample_ctr,
    synthesize_dataset,
    write_jsonl,
)


def metric_record(ad_id, ctr=0.01):
    return RawMetricRecord(
        ad_id=ad_id, memorability=0.5, ctr=ctr, relevance=2.0, saliency=0.5
    )


class TestCtrModel:
    def test_default_upper_bound_is_mean_plus_1_96_std(self):
        assert CTR_UPPER_DEFAULT == pytest.approx(
            TOP_CTR_MEAN + 1.96 * TOP_CTR_STD, rel=1e-12
        )

    def test_bounds_validated(self):
        with pytest.raises(ConfigError):
            CtrModel.from_seed(0, lower=-0.1)
        with pytest.raises(ConfigError):
            CtrModel.from_seed(0, lower=0.5, upper=0.5)
        with pytest.raises(ConfigError):
            CtrModel.from_seed(0, lower=0.9, upper=0.1)

    def test_samples_stay_in_range(self):
        model = CtrModel.from_seed(11)
        draws = [sample_ctr(model) for _ in range(2000)]
        assert all(0.0 <= d <= CTR_UPPER_DEFAULT for d in draws)

    def test_sample_mean_near_midpoint(self):
        model = CtrModel.from_seed(99)
        draws = np.array([sample_ctr(model) for _ in range(100_000)])
        assert draws.mean() == pytest.approx(CTR_UPPER_DEFAULT / 2, abs=1.5e-3)

    def test_seed_reproduces_stream(self):
        a = CtrModel.from_seed(5)
        b = CtrModel.from_seed(5)
        assert [sample_ctr(a) for _ in range(10)] == [
            sample_ctr(b) for _ in range(10)
        ]


def tiny_impression():
    auction = AuctionRecord(
        auction_id="a1",
        bids=(("advA", 5.0), ("advB", 3.0)),
    )
    ads = (metric_record("gt-ad"), metric_record("alt-ad"))
    matching = {"advA": "gt-ad", "advB": "alt-ad"}
    return SimulatedImpression(
        webpage_id="w1",
        auction=auction,
        matching=matching,
        ground_truth_ad_id="gt-ad",
        ads=ads,
    )


class TestSimulatedImpression:
    def test_round_trip(self):
        imp = tiny_impression()
        assert SimulatedImpression.from_dict(imp.to_dict()) == imp

    def test_records_by_advertiser(self):
        imp = tiny_impression()
        table = imp.records_by_advertiser()
        assert table["advA"].ad_id == "gt-ad"
        assert table["advB"].ad_id == "alt-ad"

    def test_matching_keys_must_be_bidders(self):
        imp = tiny_impression()
        with pytest.raises(ValidationError, match="bidders"):
            SimulatedImpression(
                webpage_id="w1",
                auction=imp.auction,
                matching={"advA": "gt-ad", "advX": "alt-ad"},
                ground_truth_ad_id="gt-ad",
                ads=imp.ads,
            )

    def test_duplicate_ads_rejected(self):
        imp = tiny_impression()
        with pytest.raises(ValidationError, match="duplicate"):
            SimulatedImpression(
                webpage_id="w1",
                auction=imp.auction,
                matching={"advA": "gt-ad", "advB": "gt-ad"},
                ground_truth_ad_id="gt-ad",
                ads=(metric_record("gt-ad"), metric_record("gt-ad")),
            )

    def test_slate_size_must_match_auction(self):
        imp = tiny_impression()
        with pytest.raises(ValidationError):
            SimulatedImpression(
                webpage_id="w1",
                auction=imp.auction,
                matching=imp.matching,
                ground_truth_ad_id="gt-ad",
                ads=imp.ads[:1],
            )

    def test_ground_truth_must_follow_winning_bid(self):
        imp = tiny_impression()
        with pytest.raises(ValidationError, match="winning bid"):
            SimulatedImpression(
                webpage_id="w1",
                auction=imp.auction,
                matching={"advA": "alt-ad", "advB": "gt-ad"},
                ground_truth_ad_id="gt-ad",
                ads=imp.ads,
            )


class TestBuildImpression:
    def setup_method(self):
        self.auction = AuctionRecord(
            auction_id="a1",
            bids=(("advA", 5.0), ("advB", 3.0), ("advC", 1.0)),
        )
        self.pool = ["p1", "p2", "p3", "p4"]
        self.table = {a: metric_record(a, ctr=None) for a in ["gt"] + self.pool}

    def build(self, seed=0, **kwargs):
        args = dict(
            webpage_id="w1",
            ground_truth_ad="gt",
            auction=self.auction,
            ad_pool=self.pool,
            metrics=self.table,
            ctr_model=CtrModel.from_seed(seed),
            rng=np.random.default_rng(seed),
        )
        args.update(kwargs)
        return build_impression(**args)

    def test_slate_shape(self):
        imp = self.build()
        assert len(imp.ads) == 3
        assert imp.ads[0].ad_id == "gt"
        assert imp.ground_truth_ad_id == "gt"
        others = {r.ad_id for r in imp.ads[1:]}
        assert others <= set(self.pool) and len(others) == 2

    def test_winner_owns_ground_truth(self):
        imp = self.build()
        assert imp.matching["advA"] == "gt"

    def test_every_candidate_gets_a_ctr(self):
        imp = self.build()
        for r in imp.ads:
            assert r.ctr is not None
            assert 0.0 <= r.ctr <= CTR_UPPER_DEFAULT
        # Source records stay untouched.
        assert all(r.ctr is None for r in self.table.values())

    def test_deterministic_given_seeds(self):
        assert self.build(seed=42) == self.build(seed=42)
        assert self.build(seed=42) != self.build(seed=43)

    def test_pool_deduplicated_and_ground_truth_excluded(self):
        imp = self.build(ad_pool=["p1", "p1", "gt", "p2"])
        others = {r.ad_id for r in imp.ads[1:]}
        assert others == {"p1", "p2"}

    def test_small_pool_raises(self):
        with pytest.raises(SamplingError, match="pool offers"):
            self.build(ad_pool=["p1"])

    def test_single_bidder_needs_no_pool(self):
        solo = AuctionRecord(auction_id="a2", bids=(("advA", 2.0),))
        imp = self.build(auction=solo, ad_pool=[])
        assert len(imp.ads) == 1
        assert imp.matching == {"advA": "gt"}

    def test_missing_metric_record_raises(self):
        del self.table["p3"]
        with pytest.raises(MissingMetricError):
            # Exhausting the pool guarantees p3 is drawn.
            nine = AuctionRecord(
                auction_id="a3",
                bids=tuple((f"adv{i}", 9.0 - i) for i in range(5)),
            )
            self.build(auction=nine)


class TestSynthesizeDataset:
    def test_shape_and_id_scheme(self):
        out = synthesize_dataset(DatasetSpec(impressions=5, seed=3))
        assert len(out) == 5
        assert [imp.webpage_id for imp in out] == [
            f"web-{z:05d}" for z in range(5)
        ]
        assert out[2].auction.auction_id == "auc-00002"

    def test_deterministic_per_seed(self):
        a = synthesize_dataset(DatasetSpec(impressions=8, seed=77))
        b = synthesize_dataset(DatasetSpec(impressions=8, seed=77))
        assert [x.to_dict() for x in a] == [y.to_dict() for y in b]
        c = synthesize_dataset(DatasetSpec(impressions=8, seed=78))
        assert [x.to_dict() for x in a] != [y.to_dict() for y in c]

    def test_bidder_counts_respect_range(self):
        out = synthesize_dataset(
            DatasetSpec(impressions=40, seed=1, bidders=(3, 5))
        )
        sizes = {len(imp.auction) for imp in out}
        assert sizes <= {3, 4, 5}
        assert len(sizes) > 1

    def test_metric_ranges(self):
        out = synthesize_dataset(DatasetSpec(impressions=20, seed=2))
        for imp in out:
            for r in imp.ads:
                assert 0.0 <= r.memorability <= 1.0
                assert 0.0 <= r.ctr <= CTR_UPPER_DEFAULT
                assert 0.0 <= r.relevance <= 5.0
                assert 0.0 <= r.saliency <= 1.0
            assert all(b > 0 for b in imp.auction.amounts)

    def test_ground_truth_is_top_bid(self):
        from adtradeoffs import highest_bidder
        out = synthesize_dataset(DatasetSpec(impressions=15, seed=4))
        for imp in out:
            assert imp.matching[highest_bidder(imp.auction)] == imp.ground_truth_ad_id

    def test_zero_impressions(self):
        assert synthesize_dataset(DatasetSpec(impressions=0, seed=0)) == []

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            DatasetSpec(impressions=-1, seed=0)
        with pytest.raises(ConfigError):
            DatasetSpec(impressions=1, seed=0, bidders=(0, 4))
        with pytest.raises(ConfigError):
            DatasetSpec(impressions=1, seed=0, bidders=(5, 2))
        with pytest.raises(ConfigError):
            DatasetSpec(impressions=1, seed=0, bid_sigma=0.0)
        with pytest.raises(ConfigError):
            DatasetSpec(impressions=1, seed=0, reserve=-0.5)

    def test_reserve_propagates(self):
        out = synthesize_dataset(
            DatasetSpec(impressions=3, seed=5, reserve=0.25)
        )
        assert all(imp.auction.reserve == 0.25 for imp in out)


class TestIngest:
    def test_impression_round_trip(self, tmp_path):
        out = synthesize_dataset(DatasetSpec(impressions=6, seed=9))
        path = tmp_path / "impressions.jsonl"
        write_jsonl(path, (imp.to_dict() for imp in out))
        back = ingest_impressions(path)
        assert back.rejections == []
        assert back.records == out

    def test_auction_round_trip_with_rejections(self, tmp_path):
        path = tmp_path / "auctions.jsonl"
        good = AuctionRecord(auction_id="a1", bids=(("x", 5.0), ("y", 3.0)))
        rows = [
            good.to_dict(),
            {"auction_id": "a2", "bids": []},          # empty: invalid
            {"bids": [["x", 1.0]]},                    # missing id
            {"auction_id": "a4", "bids": {"x": 1.0}},  # mapping, not pairs
            AuctionRecord(auction_id="a3", bids=(("z", 1.0),)).to_dict(),
        ]
        write_jsonl(path, rows)
        result = ingest_auctions(path)
        assert [a.auction_id for a in result.records] == ["a1", "a3"]
        assert [lineno for lineno, _ in result.rejections] == [2, 3, 4]
        assert "list of" in result.rejections[2][1]

    def test_metric_table_keyed_by_page_and_ad(self, tmp_path):
        path = tmp_path / "metrics.jsonl"
        row = metric_record("ad1").to_dict()
        rows = [
            dict(row, webpage_id="w1"),
            dict(row, webpage_id="w2"),
            dict(row, webpage_id="w1"),  # duplicate key
        ]
        write_jsonl(path, rows)
        result = ingest_metrics(path)
        assert set(result.records) == {("w1", "ad1"), ("w2", "ad1")}
        assert [lineno for lineno, _ in result.rejections] == [3]
        assert "duplicate" in result.rejections[0][1]

    def test_undecodable_line_aborts_with_location(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"auction_id": "a1", "bids": [["x", 1.0]]}\nnot json\n')
        with pytest.raises(ParseError, match=r"bad\.jsonl:2"):
            ingest_auctions(path)

    def test_non_object_line_aborts(self, tmp_path):
        path = tmp_path / "list.jsonl"
        path.write_text("[1, 2, 3]\n")
        with pytest.raises(ParseError, match="object"):
            ingest_auctions(path)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ingest_auctions(tmp_path / "nope.jsonl")

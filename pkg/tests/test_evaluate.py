"""Cross-validation, the revenue-threshold sweep, metric correlations,
and the report files they emit."""

import json
import math

import numpy as np
import pytest

from adtradeoffs import (
    AuctionRecord,
    ConfigError,
    RawMetricRecord,
    SimulatedImpression,
    TradeoffConfig,
    ValidationError,
    assign_folds,
    correlation_report,
    cross_validate,
    DatasetSpec,
    impressions_to_matrices,
    select,
    sweep_theta1,
    synthesize_dataset,
)
from adtradeoffs.evaluate import (
    FOLD_CSV_HEADER,
    SWEEP_CSV_HEADER,
    _fold_split,
    write_correlation_report,
    write_fold_report,
    write_sweep_report,
)


@pytest.fixture(scope="module")
def small_dataset():
    return synthesize_dataset(DatasetSpec(impressions=24, seed=314))


def quarter_config(**kwargs):
    return TradeoffConfig(grid_step=0.25, **kwargs)


class TestImpressionsToMatrices:
    def test_alignment_and_ground_truth(self, small_dataset):
        matrices = impressions_to_matrices(small_dataset)
        assert len(matrices) == len(small_dataset)
        for imp, m in zip(small_dataset, matrices):
            assert m.auction_id == imp.auction.auction_id
            assert m.ad_ids[m.ground_truth_index] == imp.ground_truth_ad_id
            assert len(m) == len(imp.auction)

    def test_revenue_column_is_payment(self, small_dataset):
        from adtradeoffs import allocate
        imp = small_dataset[0]
        m = impressions_to_matrices([imp])[0]
        allocation = allocate(imp.auction)
        ranked = [imp.auction.advertiser_ids[i] for i in allocation.ranking]
        assert m.advertiser_ids == tuple(ranked)
        for row, adv in enumerate(ranked):
            i = imp.auction.advertiser_ids.index(adv)
            assert m.raw[row, 0] == allocation.payments[i]


class TestAssignFolds:
    def test_partitions_evenly(self):
        fold_of = assign_folds(23, 5, seed=1)
        sizes = np.bincount(fold_of, minlength=5)
        assert sizes.sum() == 23
        assert sizes.max() - sizes.min() <= 1

    def test_deterministic_per_seed(self):
        np.testing.assert_array_equal(
            assign_folds(40, 10, seed=9), assign_folds(40, 10, seed=9)
        )
        assert not np.array_equal(
            assign_folds(40, 10, seed=9), assign_folds(40, 10, seed=10)
        )

    def test_validation(self):
        with pytest.raises(ConfigError):
            assign_folds(10, 1, seed=0)
        with pytest.raises(ConfigError):
            assign_folds(3, 4, seed=0)


class TestCrossValidate:
    def test_zero_thresholds_keep_ground_truth(self, small_dataset):
        report = cross_validate(small_dataset, quarter_config(), k=4, seed=0)
        assert report.infeasible_count == 0
        for f in report.folds:
            assert f.train_changes.xi == (0.0,) * 6

    def test_fold_bookkeeping(self, small_dataset):
        report = cross_validate(small_dataset, quarter_config(), k=4, seed=0)
        assert len(report.folds) == 4
        assert [f.fold for f in report.folds] == [0, 1, 2, 3]
        n = len(small_dataset)
        assert sum(f.n_test for f in report.folds) == n
        for f in report.folds:
            assert f.n_train + f.n_test == n

    def test_summary_matches_manual_stats(self, small_dataset):
        report = cross_validate(small_dataset, quarter_config(), k=4, seed=0)
        objectives = [f.train_objective for f in report.folds]
        assert report.mean.train_objective == pytest.approx(
            np.mean(objectives)
        )
        assert report.std.train_objective == pytest.approx(
            np.std(objectives, ddof=1)
        )
        np.testing.assert_allclose(
            report.mean.weights,
            np.mean([f.weights.as_array() for f in report.folds], axis=0),
        )

    def test_train_constraints_hold_on_retest(self, small_dataset):
        config = quarter_config().with_theta1(-0.2)
        report = cross_validate(small_dataset, config, k=4, seed=1)
        matrices = impressions_to_matrices(small_dataset)
        fold_of = assign_folds(len(matrices), 4, seed=1)
        for f in report.folds:
            if f.infeasible:
                continue
            train, _ = _fold_split(matrices, fold_of, f.fold)
            picks = [select(m, f.weights) for m in train]
            from adtradeoffs import changes
            cv = changes(train, picks)
            assert cv.satisfies(config.theta)
            np.testing.assert_array_equal(
                cv.as_array(), f.train_changes.as_array()
            )

    def test_all_folds_infeasible(self, small_dataset):
        config = quarter_config(theta=(0.0, 0.99, 0.99, 0.99, 0.99, 0.99))
        report = cross_validate(small_dataset, config, k=4, seed=0)
        assert report.infeasible_count == 4
        assert report.mean is None and report.std is None
        for f in report.folds:
            assert f.weights is None


class TestSweep:
    THETAS = (0.0, -0.1, -0.3, -0.6)

    def test_input_validation(self, small_dataset):
        config = quarter_config()
        with pytest.raises(ConfigError):
            sweep_theta1(small_dataset, config, [], k=4)
        with pytest.raises(ConfigError):
            sweep_theta1(small_dataset, config, [-0.1, -0.1], k=4)
        with pytest.raises(ConfigError):
            sweep_theta1(small_dataset, config, [-0.3, -0.1], k=4)
        with pytest.raises(ConfigError):
            sweep_theta1(small_dataset, config, [0.2, -0.1], k=4)

    def test_points_cover_thresholds(self, small_dataset):
        points = sweep_theta1(
            small_dataset, quarter_config(), self.THETAS, k=4, seed=2
        )
        assert [p.theta1 for p in points] == list(self.THETAS)
        assert all(len(p.folds) == 4 for p in points)

    def test_matches_independent_cross_validation(self, small_dataset):
        points = sweep_theta1(
            small_dataset, quarter_config(), self.THETAS, k=4, seed=2
        )
        for p in points:
            solo = cross_validate(
                small_dataset,
                quarter_config().with_theta1(p.theta1),
                k=4,
                seed=2,
            )
            assert [f.to_dict() for f in p.folds] == [
                f.to_dict() for f in solo.folds
            ]

    def test_relaxing_cap_is_monotone_per_fold(self, small_dataset):
        points = sweep_theta1(
            small_dataset, quarter_config(), self.THETAS, k=4, seed=2
        )
        for tight, loose in zip(points, points[1:]):
            for ft, fl in zip(tight.folds, loose.folds):
                if ft.infeasible:
                    continue
                assert not fl.infeasible
                assert fl.train_objective >= ft.train_objective


def constant_metric_impressions(n=6):
    out = []
    rng = np.random.default_rng(0)
    for z in range(n):
        auction = AuctionRecord(
            auction_id=f"a{z}", bids=((f"adv{z}", 1.0 + z),)
        )
        record = RawMetricRecord(
            ad_id=f"ad{z}",
            memorability=0.5,  # constant across the set
            ctr=float(rng.uniform(0, 0.05)),
            relevance=float(rng.uniform(0, 5)),
            saliency=float(rng.uniform(0, 1)),
        )
        out.append(SimulatedImpression(
            webpage_id=f"w{z}",
            auction=auction,
            matching={f"adv{z}": f"ad{z}"},
            ground_truth_ad_id=f"ad{z}",
            ads=(record,),
        ))
    return out


class TestCorrelation:
    def test_diagonal_and_symmetry(self, small_dataset):
        report = correlation_report(small_dataset)
        assert report.n == len(small_dataset)
        np.testing.assert_allclose(np.diag(report.matrix), 1.0)
        np.testing.assert_allclose(report.matrix, report.matrix.T)

    def test_constant_metric_reported_undefined(self):
        report = correlation_report(constant_metric_impressions())
        mem = 2
        assert np.isnan(report.matrix[mem, :]).all()
        assert np.isnan(report.matrix[:, mem]).all()

    def test_linearly_tied_pair(self):
        imps = []
        for z in range(8):
            sal = (z + 1) / 10
            record = RawMetricRecord(
                ad_id=f"ad{z}", memorability=z / 10, ctr=0.01 * z,
                relevance=5 * sal, saliency=sal,
            )
            auction = AuctionRecord(
                auction_id=f"a{z}", bids=((f"adv{z}", 1.0 + z),)
            )
            imps.append(SimulatedImpression(
                webpage_id=f"w{z}", auction=auction,
                matching={f"adv{z}": f"ad{z}"},
                ground_truth_ad_id=f"ad{z}", ads=(record,),
            ))
        report = correlation_report(imps)
        assert report.matrix[4, 5] == pytest.approx(1.0)

    def test_requires_two_impressions(self):
        with pytest.raises(ValidationError):
            correlation_report(constant_metric_impressions(1))

    @pytest.mark.slow
    def test_synthetic_metrics_are_near_independent(self):
        data = synthesize_dataset(DatasetSpec(impressions=10_000, seed=88))
        report = correlation_report(data)
        # Quality metrics are sampled independently of each other; their
        # pairwise correlations should vanish at this sample size.
        for i in range(2, 6):
            for j in range(2, 6):
                if i != j:
                    assert abs(report.matrix[i, j]) < 0.1


class TestReportFiles:
    def test_fold_report_files(self, small_dataset, tmp_path):
        report = cross_validate(small_dataset, quarter_config(), k=4, seed=0)
        write_fold_report(report, tmp_path)
        lines = (tmp_path / "folds.jsonl").read_text().splitlines()
        assert len(lines) == 4 + 3
        rows = [json.loads(x) for x in lines]
        assert [r["row"] for r in rows] == (
            ["fold"] * 4 + ["mean", "std", "config"]
        )
        assert rows[-1]["theta"] == [0.0] * 6
        assert rows[-1]["k"] == 4

        csv_lines = (tmp_path / "folds.csv").read_text().splitlines()
        assert csv_lines[0] == ",".join(FOLD_CSV_HEADER)
        assert len(csv_lines) == 1 + 4 + 2
        assert csv_lines[1].startswith("1,")
        assert csv_lines[-2].startswith("Mean,")
        assert csv_lines[-1].startswith("Std,")

    def test_fold_report_when_everything_infeasible(self, small_dataset, tmp_path):
        config = quarter_config(theta=(0.0, 0.99, 0.99, 0.99, 0.99, 0.99))
        report = cross_validate(small_dataset, config, k=4, seed=0)
        write_fold_report(report, tmp_path)
        lines = (tmp_path / "folds.jsonl").read_text().splitlines()
        assert len(lines) == 4 + 1  # no mean/std rows
        assert json.loads(lines[-1])["infeasible_count"] == 4
        csv_lines = (tmp_path / "folds.csv").read_text().splitlines()
        assert len(csv_lines) == 1 + 4 + 2

    def test_sweep_report_files(self, small_dataset, tmp_path):
        points = sweep_theta1(
            small_dataset, quarter_config(), (0.0, -0.2), k=4, seed=0
        )
        write_sweep_report(points, tmp_path)
        lines = (tmp_path / "sweep.jsonl").read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["theta1"] == 0.0
        csv_lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert csv_lines[0] == ",".join(SWEEP_CSV_HEADER)
        assert len(csv_lines) == 1 + 2 * 4

    def test_correlation_report_files(self, tmp_path):
        report = correlation_report(constant_metric_impressions())
        write_correlation_report(report, tmp_path)
        data = json.loads((tmp_path / "correlation.json").read_text())
        assert data["n"] == 6
        assert len(data["matrix"]) == 6
        # Undefined entries serialize as null, never as NaN literals.
        assert data["matrix"][2][0] is None
        assert not math.isnan(
            sum(v for row in data["matrix"] for v in row if v is not None)
        )
        csv_lines = (tmp_path / "correlation.csv").read_text().splitlines()
        assert len(csv_lines) == 7
        assert csv_lines[1].startswith("revenue,")

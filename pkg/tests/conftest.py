"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from adtradeoffs import (
    AuctionRecord,
    MetricMatrix,
    RawMetricRecord,
    allocate,
    apply_normalizer,
    assemble_raw,
    fit_normalizer,
)


def matrix_from(rows, ad_ids=None, auction_id="z0", gt=0) -> MetricMatrix:
    """A MetricMatrix whose rows are taken as already normalized."""
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[0]
    if ad_ids is None:
        ad_ids = tuple(f"ad{i}" for i in range(n))
    return MetricMatrix(
        auction_id=auction_id,
        advertiser_ids=tuple(f"adv{i}" for i in range(n)),
        ad_ids=tuple(ad_ids),
        raw=rows,
        ground_truth_index=gt,
        normalized=rows.copy(),
    )


def random_raw_instance(rng, n_auctions, max_bidders=4):
    """Raw metric matrices built through the real auction pipeline."""
    matrices = []
    for z in range(n_auctions):
        n = int(rng.integers(1, max_bidders + 1))
        bids = rng.lognormal(0.0, 1.0, size=n)
        auction = AuctionRecord(
            auction_id=f"t{z}",
            bids=tuple((f"adv{z}-{i}", float(b)) for i, b in enumerate(bids)),
        )
        records = {
            f"adv{z}-{i}": RawMetricRecord(
                ad_id=f"ad{z}-{i}",
                memorability=float(rng.uniform(0, 1)),
                ctr=float(rng.uniform(0, 0.07)),
                relevance=float(rng.uniform(0, 5)),
                saliency=float(rng.uniform(0, 1)),
            )
            for i in range(n)
        }
        matrices.append(assemble_raw(auction, allocate(auction), records))
    return matrices


def random_normalized_instance(rng, n_auctions, max_bidders=4):
    raw = random_raw_instance(rng, n_auctions, max_bidders)
    norm = fit_normalizer(raw)
    return [apply_normalizer(norm, m) for m in raw]


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)

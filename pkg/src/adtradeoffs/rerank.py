"""Weighted re-ranking of auction candidates, plus dominance analysis.

The re-ranker scores every candidate ad with a convex combination of its
six normalized metrics and displays the highest scorer, which may differ
from the plain auction winner.  Dominance analysis asks a sharper
question: which candidates could never win under any choice of weights?
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .metrics import NUM_METRICS, MetricMatrix

WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class WeightVector:
    """A point on the six-metric simplex.

    Entries are per-metric weights in [0, 1] summing to 1.  A zero entry is
    allowed and simply mutes that metric.
    """

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != NUM_METRICS:
            raise ValidationError(f"expected {NUM_METRICS} weights, got {len(w)}")
        if any(x < 0.0 or x > 1.0 for x in w):
            raise ValidationError(f"weights must lie in [0, 1]: {w}")
        if abs(sum(w) - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"weights must sum to 1, got {sum(w)!r}")
        object.__setattr__(self, "weights", w)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def __iter__(self):
        return iter(self.weights)


def rank_scores(matrix: MetricMatrix, weights: WeightVector) -> np.ndarray:
    """Score every candidate: the dot product of weights and normalized metrics."""
    if matrix.normalized is None:
        raise ValidationError(
            f"auction {matrix.auction_id!r}: normalize before scoring"
        )
    return matrix.normalized @ weights.as_array()


def selection_order(matrix: MetricMatrix) -> list[int]:
    """Candidate indices in tie-break preference order.

    When two candidates tie on rank score the one with the higher normalized
    revenue is displayed; a further tie falls to the smaller ad id.  Scanning
    candidates in this order and keeping the first maximum applies the rule.
    """
    if matrix.normalized is None:
        raise ValidationError(
            f"auction {matrix.auction_id!r}: normalize before scoring"
        )
    revenue = matrix.normalized[:, 0]
    return sorted(range(len(matrix)), key=lambda i: (-revenue[i], matrix.ad_ids[i]))


def select(matrix: MetricMatrix, weights: WeightVector) -> int:
    """Row index of the displayed candidate under the given weights."""
    scores = rank_scores(matrix, weights)
    order = selection_order(matrix)
    return max(order, key=lambda i: scores[i])


@dataclass(frozen=True)
class RerankOutcome:
    """Result of re-ranking one auction under one weight vector."""

    auction_id: str
    selected_index: int
    selected_ad_id: str
    ground_truth_index: int
    ground_truth_ad_id: str
    scores: np.ndarray

    @property
    def changed(self) -> bool:
        return self.selected_index != self.ground_truth_index


def rerank(matrix: MetricMatrix, weights: WeightVector) -> RerankOutcome:
    scores = rank_scores(matrix, weights)
    idx = max(selection_order(matrix), key=lambda i: scores[i])
    return RerankOutcome(
        auction_id=matrix.auction_id,
        selected_index=idx,
        selected_ad_id=matrix.ad_ids[idx],
        ground_truth_index=matrix.ground_truth_index,
        ground_truth_ad_id=matrix.ad_ids[matrix.ground_truth_index],
        scores=scores,
    )


def strictly_dominated(matrix: MetricMatrix) -> np.ndarray:
    """Boolean mask over candidates beaten outright by some rival.

    Candidate i is strictly dominated when another candidate in the same
    auction is at least as good on every normalized metric and strictly
    better on at least one.  Such a candidate can never be the unique top
    scorer under any weight vector.
    """
    if matrix.normalized is None:
        raise ValidationError(
            f"auction {matrix.auction_id!r}: normalize before dominance analysis"
        )
    x = matrix.normalized
    # ge[j, i]: candidate j >= candidate i on every metric.
    ge = (x[:, None, :] >= x[None, :, :]).all(axis=2)
    gt = (x[:, None, :] > x[None, :, :]).any(axis=2)
    dominates = ge & gt
    np.fill_diagonal(dominates, False)
    return dominates.any(axis=0)


SELECTABLE = "selectable"
STRICTLY_DOMINATED = "strictly_dominated"
WEAKLY_DOMINATED = "weakly_dominated"


@dataclass(frozen=True)
class AdDominance:
    """Dominance classification of one candidate ad in one auction.

    A selectable ad tops the scoring under at least one probed weight
    vector; ``winning_weights`` lists those grid points.  A weakly
    dominated ad is beaten outright by no single rival yet wins under no
    probed weighting at all.
    """

    auction_id: str
    ad_id: str
    classification: str
    winning_count: int
    winning_weights: tuple[tuple[float, ...], ...] = ()

    def to_dict(self) -> dict:
        return {
            "auction_id": self.auction_id,
            "ad_id": self.ad_id,
            "classification": self.classification,
            "winning_count": self.winning_count,
            "winning_weights": [list(w) for w in self.winning_weights],
        }


def _probe_array(grid) -> np.ndarray:
    probes = np.array(
        [w.as_array() if isinstance(w, WeightVector) else w for w in grid]
    )
    if probes.ndim != 2 or probes.shape[0] == 0 or probes.shape[1] != NUM_METRICS:
        raise ValidationError("dominance analysis needs a non-empty weight grid")
    return probes


def dominance_report(
    matrix: MetricMatrix,
    grid: Iterable,
    keep_weights: bool = True,
) -> tuple[AdDominance, ...]:
    """Classify every candidate of one auction against a weight grid.

    Args:
        matrix: Normalized auction.
        grid: Weight vectors to probe, as WeightVectors or (6,) arrays; a
            dense simplex grid makes the weak/selectable split sharp.
        keep_weights: Record each winner's weight vectors, not just the
            count.  Disable for bulk runs where the lists would dwarf the
            rest of the report.

    Returns:
        One classification per candidate, in candidate-row order.
    """
    probes = _probe_array(grid)
    if matrix.normalized is None:
        raise ValidationError(
            f"auction {matrix.auction_id!r}: normalize before dominance analysis"
        )
    strict = strictly_dominated(matrix)
    order = np.array(selection_order(matrix))
    scores = matrix.normalized @ probes.T  # (n, num_probes)
    # First maximum in preference order reproduces the selection tie rule.
    winner_per_probe = order[np.argmax(scores[order, :], axis=0)]
    report = []
    for i in range(len(matrix)):
        winning = np.flatnonzero(winner_per_probe == i)
        if strict[i]:
            label = STRICTLY_DOMINATED
        elif winning.size:
            label = SELECTABLE
        else:
            label = WEAKLY_DOMINATED
        kept = (
            tuple(tuple(float(x) for x in probes[j]) for j in winning)
            if keep_weights
            else ()
        )
        report.append(
            AdDominance(
                auction_id=matrix.auction_id,
                ad_id=matrix.ad_ids[i],
                classification=label,
                winning_count=int(winning.size),
                winning_weights=kept,
            )
        )
    return tuple(report)


def classify_candidates(
    matrices: Sequence[MetricMatrix], grid: Iterable
) -> tuple[list[AdDominance], dict[str, int]]:
    """Run dominance analysis over many auctions and tally the classes."""
    probes = _probe_array(grid)
    records: list[AdDominance] = []
    tally = {SELECTABLE: 0, STRICTLY_DOMINATED: 0, WEAKLY_DOMINATED: 0}
    for matrix in matrices:
        for entry in dominance_report(matrix, probes, keep_weights=False):
            records.append(entry)
            tally[entry.classification] += 1
    return records, tally

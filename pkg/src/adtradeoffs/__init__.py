"""Two-stage ad auction trade-offs: second-price payments for every rank,
six-metric weighted re-ranking, and constrained weight search.

Stage I runs a sealed-bid second-price auction and prices a hypothetical
slot for every participant.  Stage II scores each candidate ad with a
convex combination of six normalized metrics (revenue, advertiser
utility, memorability, CTR, contextual relevance, visual saliency) and
displays the top scorer.  The optimizer searches the weight simplex for
the combination that maximizes total rank score while capping the
relative revenue loss and flooring every other metric's change against
the plain-auction outcome.
"""

from .auction import (
    AllocationResult,
    AuctionRecord,
    allocate,
    highest_bidder,
    payments,
    rank_bids,
)
from .errors import (
    ConfigError,
    InvalidAuctionError,
    MissingMetricError,
    ParseError,
    SamplingError,
    ValidationError,
)
from .metrics import (
    METRIC_NAMES,
    NUM_METRICS,
    MetricKind,
    MetricMatrix,
    Normalizer,
    RawMetricRecord,
    apply_normalizer,
    assemble_raw,
    fit_normalizer,
)
from .optimize import (
    ChangeVector,
    GridEvaluation,
    OptimizationResult,
    TradeoffConfig,
    changes,
    enumerate_simplex,
    evaluate_grid,
    optimize,
    optimize_from_evaluation,
)
from .rerank import (
    SELECTABLE,
    STRICTLY_DOMINATED,
    WEAKLY_DOMINATED,
    AdDominance,
    RerankOutcome,
    WeightVector,
    classify_candidates,
    dominance_report,
    rank_scores,
    rerank,
    select,
    selection_order,
    strictly_dominated,
)
from .simulate import (
    CTR_UPPER_DEFAULT,
    TOP_CTR_MEAN,
    TOP_CTR_STD,
    CtrModel,
    DatasetSpec,
    IngestResult,
    SimulatedImpression,
    build_impression,
    ingest_auctions,
    ingest_impressions,
    ingest_metrics,
    sample_ctr,
    synthesize_dataset,
)
from .storage import read_jsonl, write_csv, write_json, write_jsonl
from .evaluate import (
    CorrelationReport,
    CrossValidationReport,
    FoldReport,
    SweepPoint,
    assign_folds,
    correlation_report,
    cross_validate,
    impressions_to_matrices,
    sweep_theta1,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "AuctionRecord",
    "allocate",
    "highest_bidder",
    "payments",
    "rank_bids",
    "ConfigError",
    "InvalidAuctionError",
    "MissingMetricError",
    "ParseError",
    "SamplingError",
    "ValidationError",
    "METRIC_NAMES",
    "NUM_METRICS",
    "MetricKind",
    "MetricMatrix",
    "Normalizer",
    "RawMetricRecord",
    "apply_normalizer",
    "assemble_raw",
    "fit_normalizer",
    "ChangeVector",
    "GridEvaluation",
    "OptimizationResult",
    "TradeoffConfig",
    "changes",
    "enumerate_simplex",
    "evaluate_grid",
    "optimize",
    "optimize_from_evaluation",
    "SELECTABLE",
    "STRICTLY_DOMINATED",
    "WEAKLY_DOMINATED",
    "AdDominance",
    "RerankOutcome",
    "WeightVector",
    "classify_candidates",
    "dominance_report",
    "rank_scores",
    "rerank",
    "select",
    "selection_order",
    "strictly_dominated",
    "CTR_UPPER_DEFAULT",
    "TOP_CTR_MEAN",
    "TOP_CTR_STD",
    "CtrModel",
    "DatasetSpec",
    "IngestResult",
    "SimulatedImpression",
    "build_impression",
    "ingest_auctions",
    "ingest_impressions",
    "ingest_metrics",
    "sample_ctr",
    "synthesize_dataset",
    "read_jsonl",
    "write_csv",
    "write_json",
    "write_jsonl",
    "CorrelationReport",
    "CrossValidationReport",
    "FoldReport",
    "SweepPoint",
    "assign_folds",
    "correlation_report",
    "cross_validate",
    "impressions_to_matrices",
    "sweep_theta1",
    "__version__",
]

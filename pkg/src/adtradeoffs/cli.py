"""Command-line front end for dataset construction, optimization, and reports.

Every subcommand reads line-delimited record files, writes its outputs
under ``--out``, and echoes the fully resolved settings to
``run_config.json`` there, so any result file can be traced back to the
exact configuration that produced it.  Flags override values from the
``--config`` file.  Exit status: 0 on success (a declared-infeasible
optimization is a success), 2 on configuration or input validation
errors, 1 on anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import figures
from .errors import ConfigError, ValidationError
from .evaluate import (
    correlation_report,
    cross_validate,
    impressions_to_matrices,
    sweep_theta1,
    write_correlation_report,
    write_fold_report,
    write_sweep_report,
)
from .metrics import apply_normalizer, fit_normalizer
from .optimize import (
    GRID_STEP_DEFAULT,
    TradeoffConfig,
    changes,
    enumerate_simplex,
    optimize,
)
from .rerank import WeightVector, classify_candidates, dominance_report, rerank
from .simulate import (
    DatasetSpec,
    build_impression,
    CtrModel,
    ingest_auctions,
    ingest_impressions,
    ingest_metrics,
    synthesize_dataset,
)
from .storage import write_json, write_jsonl

logger = logging.getLogger("adtradeoffs")

DEFAULT_SWEEP = "0,-0.05,-0.1,-0.15,-0.2,-0.25,-0.3,-0.35,-0.4,-0.45,-0.5"


def _parse_floats(text: str, expect: int | None = None) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse {text!r} as comma-separated numbers") from exc
    if expect is not None and len(values) != expect:
        raise ConfigError(f"expected {expect} comma-separated numbers, got {text!r}")
    return values


class _Run:
    """Resolved settings for one subcommand: flags over config file."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file_values = {}
        if getattr(args, "config", None):
            path = Path(args.config)
            try:
                self.file_values = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid config file ({exc.msg})") from exc
            if not isinstance(self.file_values, dict):
                raise ConfigError(f"{path}: config file must hold an object")
        self.resolved = {"command": args.command}

    def get(self, key: str, default=None, required: bool = False):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.file_values.get(key, default)
        if value is None and required:
            raise ConfigError(f"missing required setting {key!r}")
        self.resolved[key] = value
        return value

    def out_dir(self) -> Path:
        out = Path(self.get("out", "."))
        out.mkdir(parents=True, exist_ok=True)
        return out

    def echo(self, out: Path) -> None:
        write_json(out / "run_config.json", self.resolved)

    def tradeoff_config(self) -> TradeoffConfig:
        theta_text = self.get("theta")
        theta1 = self.get("theta1")
        if theta_text is not None:
            theta = _parse_floats(str(theta_text), 6)
            if theta1 is not None:
                theta = (float(theta1),) + theta[1:]
        else:
            theta = (float(theta1 or 0.0), 0.0, 0.0, 0.0, 0.0, 0.0)
        step = float(self.get("grid_step", GRID_STEP_DEFAULT))
        return TradeoffConfig(theta=theta, grid_step=step)


def _load_impressions(run: _Run):
    path = run.get("impressions_file", required=True)
    result = ingest_impressions(path)
    if not result.records:
        raise ValidationError(f"{path}: no usable impressions")
    return result.records


def _normalized_matrices(impressions):
    matrices = impressions_to_matrices(impressions)
    norm = fit_normalizer(matrices)
    return [apply_normalizer(norm, m) for m in matrices]


def cmd_simulate(run: _Run) -> int:
    seed = run.get("seed", required=True)
    out = run.out_dir()
    auction_path = run.get("auctions")
    if auction_path is not None:
        impressions = _simulate_from_files(run, auction_path, int(seed))
    else:
        spec = DatasetSpec(
            impressions=int(run.get("impressions", required=True)),
            seed=int(seed),
            bidders=tuple(
                int(b) for b in _parse_floats(str(run.get("bidders", "2,8")), 2)
            ),
            bid_mu=float(run.get("bid_mu", 0.0)),
            bid_sigma=float(run.get("bid_sigma", 1.0)),
            reserve=float(run.get("reserve", 0.0)),
        )
        impressions = synthesize_dataset(spec)
        write_jsonl(out / "auctions.jsonl", (i.auction.to_dict() for i in impressions))
        write_jsonl(
            out / "metrics.jsonl",
            (
                {"webpage_id": imp.webpage_id, **record.to_dict()}
                for imp in impressions
                for record in imp.ads
            ),
        )
    count = write_jsonl(out / "impressions.jsonl", (i.to_dict() for i in impressions))
    if count == 0:
        logger.warning("dataset is empty")
    run.echo(out)
    print(f"wrote {count} impressions to {out / 'impressions.jsonl'}")
    return 0


def _simulate_from_files(run: _Run, auction_path, seed: int):
    metrics_path = run.get("metrics", required=True)
    auctions = ingest_auctions(auction_path).records
    table = ingest_metrics(metrics_path).records
    pages: dict[str, dict[str, object]] = {}
    for (web, ad), record in table.items():
        pages.setdefault(web, {})[ad] = record
    if not pages:
        raise ValidationError(f"{metrics_path}: no webpages with metric records")
    page_ids = sorted(pages)
    impressions = []
    root = np.random.SeedSequence(seed)
    for z, (auction, child) in enumerate(zip(auctions, root.spawn(len(auctions)))):
        rng = np.random.default_rng(child)
        web = page_ids[z % len(page_ids)]
        ads = sorted(pages[web])
        ground_truth = ads[int(rng.integers(len(ads)))]
        try:
            impressions.append(
                build_impression(
                    webpage_id=web,
                    ground_truth_ad=ground_truth,
                    auction=auction,
                    ad_pool=[a for a in ads if a != ground_truth],
                    metrics=pages[web],
                    ctr_model=CtrModel(rng=rng),
                    rng=rng,
                )
            )
        except ValidationError as exc:
            logger.warning("skipping auction %s: %s", auction.auction_id, exc)
    return impressions


def cmd_optimize(run: _Run) -> int:
    out = run.out_dir()
    config = run.tradeoff_config()
    matrices = _normalized_matrices(_load_impressions(run))
    result = optimize(matrices, config)
    write_json(out / "optimize_result.json", result.to_dict())
    run.echo(out)
    if result.infeasible:
        print("no feasible weight vector under the configured thresholds")
    else:
        weights = ", ".join(f"{w:.4f}" for w in result.weights)
        print(f"optimal weights ({weights}); objective {result.objective:.6f}; "
              f"{result.feasible_count} feasible grid points")
    return 0


def _resolve_weights(run: _Run) -> WeightVector:
    text = run.get("weights")
    if text is not None:
        return WeightVector(_parse_floats(str(text), 6))
    weights_file = run.get("weights_file")
    if weights_file is None:
        raise ConfigError("provide weights or weights_file")
    data = json.loads(Path(weights_file).read_text(encoding="utf-8"))
    if data.get("weights") is None:
        raise ValidationError(f"{weights_file}: holds no weights (infeasible run?)")
    return WeightVector(tuple(data["weights"]))


def cmd_rerank(run: _Run) -> int:
    out = run.out_dir()
    weights = _resolve_weights(run)
    matrices = _normalized_matrices(_load_impressions(run))
    outcomes = [rerank(m, weights) for m in matrices]
    write_jsonl(
        out / "rerank.jsonl",
        (
            {
                "auction_id": o.auction_id,
                "selected_ad_id": o.selected_ad_id,
                "ground_truth_ad_id": o.ground_truth_ad_id,
                "changed": o.changed,
            }
            for o in outcomes
        ),
    )
    cv = changes(matrices, [o.selected_index for o in outcomes])
    write_json(
        out / "rerank_summary.json",
        {
            "weights": list(weights.weights),
            "auctions": len(outcomes),
            "changed": sum(o.changed for o in outcomes),
            "changes": list(cv.xi),
        },
    )
    run.echo(out)
    print(f"re-ranked {len(outcomes)} auctions; "
          f"{sum(o.changed for o in outcomes)} selections changed")
    return 0


def cmd_evaluate(run: _Run) -> int:
    out = run.out_dir()
    seed = int(run.get("seed", required=True))
    k = int(run.get("folds", 10))
    config = run.tradeoff_config()
    impressions = _load_impressions(run)
    report = cross_validate(impressions, config, k=k, seed=seed)
    write_fold_report(report, out)
    figures.fold_figure(report, out / "folds.png")
    corr = correlation_report(impressions)
    write_correlation_report(corr, out)
    figures.correlation_figure(corr, out / "correlation.png")
    sweep_text = run.get("theta1_values")
    if sweep_text is not None:
        points = sweep_theta1(
            impressions, config, _parse_floats(str(sweep_text)), k=k, seed=seed
        )
        write_sweep_report(points, out)
        figures.sweep_figure(points, out / "sweep.png")
    run.echo(out)
    print(f"evaluated {len(impressions)} impressions over {k} folds; "
          f"{report.infeasible_count} infeasible; reports in {out}")
    return 0


def cmd_sweep(run: _Run) -> int:
    out = run.out_dir()
    seed = int(run.get("seed", required=True))
    k = int(run.get("folds", 10))
    config = run.tradeoff_config()
    values = _parse_floats(str(run.get("theta1_values", DEFAULT_SWEEP)))
    impressions = _load_impressions(run)
    points = sweep_theta1(impressions, config, values, k=k, seed=seed)
    write_sweep_report(points, out)
    figures.sweep_figure(points, out / "sweep.png")
    run.echo(out)
    print(f"swept {len(values)} thresholds over {k} folds; reports in {out}")
    return 0


def cmd_dominance(run: _Run) -> int:
    out = run.out_dir()
    step = float(run.get("grid_step", GRID_STEP_DEFAULT))
    grid = enumerate_simplex(step)
    matrices = _normalized_matrices(_load_impressions(run))
    auction_id = run.get("auction_id")
    if auction_id is not None:
        wanted = [m for m in matrices if m.auction_id == auction_id]
        if not wanted:
            raise ValidationError(f"no auction with id {auction_id!r}")
        # Single-auction detail keeps the full winning-weight lists; a
        # whole dataset would drown the report in grid points.
        records = dominance_report(wanted[0], grid, keep_weights=True)
        tally = {}
        for r in records:
            tally[r.classification] = tally.get(r.classification, 0) + 1
    else:
        flat, tally = classify_candidates(matrices, grid)
        records = flat
    write_jsonl(out / "dominance.jsonl", (r.to_dict() for r in records))
    figures.dominance_figure(tally, out / "dominance.png")
    run.echo(out)
    print("; ".join(f"{k}: {v}" for k, v in sorted(tally.items())))
    return 0


def cmd_correlate(run: _Run) -> int:
    out = run.out_dir()
    corr = correlation_report(_load_impressions(run))
    write_correlation_report(corr, out)
    figures.correlation_figure(corr, out / "correlation.png")
    run.echo(out)
    print(f"correlation over {corr.n} impressions written to {out}")
    return 0


_HANDLERS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "rerank": cmd_rerank,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "dominance": cmd_dominance,
    "correlate": cmd_correlate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adtradeoffs",
        description="Auction re-ranking trade-off experiments: simulate "
                    "datasets, search re-ranking weights under revenue "
                    "constraints, and emit evaluation reports.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--config", help="JSON settings file; flags win on conflict")
        p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--out", help="output directory (default: current)")

    def tradeoff(p):
        p.add_argument("--theta1", type=float,
                       help="revenue-loss cap in [-1, 0] (default 0)")
        p.add_argument("--theta",
                       help="all six thresholds, comma-separated")
        p.add_argument("--grid-step", type=float, dest="grid_step",
                       help="simplex grid step; must divide 1 (default 0.05)")

    p = sub.add_parser("simulate", help="synthesize or assemble an impression dataset")
    common(p)
    p.add_argument("--impressions", type=int, help="number of synthetic impressions")
    p.add_argument("--bidders", help="min,max bidders per auction (default 2,8)")
    p.add_argument("--bid-mu", type=float, dest="bid_mu", help="log-normal bid mu")
    p.add_argument("--bid-sigma", type=float, dest="bid_sigma",
                   help="log-normal bid sigma")
    p.add_argument("--reserve", type=float, help="auction reserve price")
    p.add_argument("--auctions", help="auction file to ingest instead of synthesizing")
    p.add_argument("--metrics", help="ad-metric file to ingest (with --auctions)")

    p = sub.add_parser("optimize", help="search re-ranking weights on a dataset")
    common(p)
    tradeoff(p)
    p.add_argument("--impressions-file", dest="impressions_file",
                   help="impression dataset to optimize on")

    p = sub.add_parser("rerank", help="apply a weight vector to a dataset")
    common(p)
    p.add_argument("--impressions-file", dest="impressions_file")
    p.add_argument("--weights", help="six comma-separated weights summing to 1")
    p.add_argument("--weights-file", dest="weights_file",
                   help="optimize_result.json to take weights from")

    p = sub.add_parser("evaluate", help="cross-validated report (folds + correlation)")
    common(p)
    tradeoff(p)
    p.add_argument("--impressions-file", dest="impressions_file")
    p.add_argument("--folds", type=int, help="fold count (default 10)")
    p.add_argument("--theta1-values", dest="theta1_values",
                   help="also sweep these revenue caps, comma-separated")

    p = sub.add_parser("sweep", help="revenue-cap sensitivity sweep")
    common(p)
    tradeoff(p)
    p.add_argument("--impressions-file", dest="impressions_file")
    p.add_argument("--folds", type=int, help="fold count (default 10)")
    p.add_argument("--theta1-values", dest="theta1_values",
                   help=f"caps to sweep (default {DEFAULT_SWEEP})")

    p = sub.add_parser("dominance", help="classify candidates against the weight grid")
    common(p)
    p.add_argument("--impressions-file", dest="impressions_file")
    p.add_argument("--grid-step", type=float, dest="grid_step")
    p.add_argument("--auction-id", dest="auction_id",
                   help="detail one auction, including winning weights")

    p = sub.add_parser("correlate", help="raw-metric correlation report")
    common(p)
    p.add_argument("--impressions-file", dest="impressions_file")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 2
    try:
        return _HANDLERS[args.command](_Run(args))
    except (ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())

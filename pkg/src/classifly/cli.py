"""Command-line entry point.

Each subcommand delegates to one module operation, reads declared inputs
and writes declared outputs atomically. All randomness flows from the
single ``--seed``; two runs with identical config and inputs produce
byte-identical JSON/CSV/GeoJSON outputs. Report-producing commands also
render PNG figures next to their delimited outputs.

Exit codes: 0 ok, 1 usage, 2 data error, 3 internal. Set ``CLASSIFLY_LOG``
to DEBUG/INFO/WARNING/ERROR to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, features, geojson, ingest, pipeline, synth
from .analysis import correlation_matrix, rmi_report, write_correlation_csv
from .errors import ClassiflyError, DataError
from .ioutil import atomic_write
from .models import load_model, random_search, save_model, train_model
from .reference import QuantileBounds, build_reference_values, learn_quantile_bounds

logger = logging.getLogger("classifly")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; remap to the documented code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit_error(kind, exc):
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _print_summary(payload):
    print(json.dumps(payload, indent=2, sort_keys=True))


def _require_inputs(*paths):
    for path in paths:
        if path is not None and not Path(path).exists():
            raise DataError(f"input path does not exist: {path}")


def _load_labelled_features(args):
    vectors = features.read_features_csv(args.input)
    records, merge_report = pipeline.merge_metadata(args.registry)
    data, build_report = pipeline.build_dataset(vectors, records, f_min=args.f_min)
    return vectors, data, merge_report, build_report


def _model_params(args):
    params = {}
    for name in ("k", "max_splits", "n_learners", "learning_rate", "svm_c"):
        value = getattr(args, name, None)
        if value is not None:
            params["C" if name == "svm_c" else name] = value
    return params


# ---------------------------------------------------------------------------
# Subcommand implementations


def _cmd_ingest(args):
    _require_inputs(args.input)
    states, rejected = ingest.parse_state_vectors(args.input, strict=args.strict)
    groups = ingest.group_by_aircraft(states)
    with atomic_write(args.out, newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ingest.STATE_HEADER)
        for _, group in groups.items():
            writer.writerows(ingest.format_state_row(s) for s in group)
    _print_summary({
        "states": len(states),
        "rejected_rows": rejected,
        "aircraft": len(groups),
        "out": str(args.out),
    })


def _cmd_segment(args):
    _require_inputs(args.input)
    states, rejected = ingest.parse_state_vectors(args.input, strict=args.strict)
    groups = ingest.group_by_aircraft(states)
    segmented = []
    n_flights = 0
    for icao, group in groups.items():
        flights = ingest.segment_flights(group, gap_s=args.gap, arrival_alt_m=args.arrival_alt,
                                         hard_gap_s=args.hard_gap)
        segmented.append((icao, flights))
        n_flights += len(flights)
    ingest.write_flights_csv(args.out, segmented)
    _print_summary({
        "states": len(states),
        "rejected_rows": rejected,
        "aircraft": len(groups),
        "flights": n_flights,
        "out": str(args.out),
    })


def _cmd_learn_bounds(args):
    _require_inputs(args.input)
    pooled = build_reference_values(
        ingest.iter_flight_groups(args.input),
        cap=args.cap,
        sample_size=args.sample,
        seed=args.seed,
    )
    bounds = learn_quantile_bounds(pooled, args.q)
    bounds.save(args.out)
    _print_summary({
        "q": args.q,
        "cap": args.cap,
        "samples_per_group": {g.value: int(pooled[g].size) for g in pooled},
        "out": str(args.out),
    })


def _cmd_extract(args):
    _require_inputs(args.input, args.bounds)
    bounds = QuantileBounds.load(args.bounds)

    def one(item):
        icao, flights = item
        try:
            return features.extract_features(flights, bounds)
        except ClassiflyError as exc:
            logger.info("skipping %s: %s", icao, exc)
            return None

    groups = ingest.iter_flight_groups(args.input)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, groups))
    else:
        results = [one(item) for item in groups]
    vectors = [r for r in results if r is not None]
    skipped = len(results) - len(vectors)
    if not vectors:
        raise DataError("no aircraft produced a complete feature vector")
    features.write_features_csv(args.out, vectors)
    _print_summary({
        "aircraft": len(vectors),
        "skipped_ineligible": skipped,
        "q": bounds.q,
        "out": str(args.out),
    })


def _cmd_analyze(args):
    from . import plots

    _require_inputs(args.input, *args.registry)
    vectors, data, merge_report, build_report = _load_labelled_features(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    q = vectors[0].q
    labels = [data.class_names[i] for i in data.y]
    report = rmi_report(data.X, labels, q)
    report.save(out_dir / "rmi.json")
    plots.save_rmi_bars(report, out_dir / "rmi.png")

    matrix = correlation_matrix(data.X)
    write_correlation_csv(matrix, features.feature_names(q), out_dir / "correlation.csv")
    plots.save_correlation_heatmap(matrix, out_dir / "correlation.png")
    _print_summary({
        "aircraft_analyzed": data.n,
        "dropped": build_report.to_dict(),
        "registry": merge_report.to_dict(),
        "group_mean_rmi_percent": report.group_means,
        "out_dir": str(out_dir),
    })


def _cmd_train(args):
    _require_inputs(args.input, *args.registry)
    _, data, _, build_report = _load_labelled_features(args)
    train_set, eval_set = pipeline.split_train_eval(data, train_fraction=args.split, seed=args.seed)
    params = _model_params(args)
    summary = {
        "model_type": args.model_type,
        "n_train": train_set.n,
        "n_eval_held_out": eval_set.n,
        "f_min": args.f_min,
        "split": args.split,
        "seed": args.seed,
        "dataset": build_report.to_dict(),
    }
    if args.search:
        result = random_search(args.model_type, train_set, iterations=args.search_iterations,
                               folds=args.folds, seed=args.seed)
        params = {**result.params, **params}
        summary["search"] = {
            "iterations": args.search_iterations,
            "folds": args.folds,
            "best_params": result.params,
            "cv_accuracy": result.cv_accuracy,
        }
    model = train_model(args.model_type, train_set, params, seed=args.seed)
    save_model(model, args.out)
    summary["params"] = params or "defaults"
    summary["out"] = str(args.out)
    _print_summary(summary)


def _cmd_evaluate(args):
    from . import plots

    _require_inputs(args.input, args.model, *args.registry)
    model = load_model(args.model)
    _, data, _, _ = _load_labelled_features(args)
    _, eval_set = pipeline.split_train_eval(data, train_fraction=args.split, seed=args.seed)
    report = pipeline.evaluate(model, eval_set)
    out = Path(args.out)
    report.save(out)
    pipeline.write_confusion_csv(report, out.with_suffix(".confusion.csv"))
    plots.save_confusion_heatmap(report, out.with_suffix(".confusion.png"))
    _print_summary({
        "accuracy": report.accuracy,
        "macro": report.macro,
        "n_eval": report.n_eval,
        "out": str(out),
    })


def _cmd_sweep(args):
    from . import plots

    _require_inputs(args.input, *args.registry)
    records, _ = pipeline.merge_metadata(args.registry)
    labels = {icao: r.category for icao, r in records.items() if r.category is not None}
    corpus = pipeline.build_corpus(ingest.iter_flight_groups(args.input), labels, cap=args.cap)
    cells = pipeline.sweep(
        corpus,
        f_min_values=args.f_min_values,
        q_values=args.q_values,
        family=args.model_type,
        repetitions=args.repetitions,
        seed=args.seed,
        params=_model_params(args),
    )
    out = Path(args.out)
    pipeline.write_sweep_csv(cells, out)
    plots.save_sweep_curves(cells, out.with_suffix(".png"))
    _print_summary({
        "cells": [
            {"f_min": c.f_min, "q": c.q, "mean_accuracy": c.mean_accuracy,
             "std_accuracy": c.std_accuracy, "n_aircraft": c.n_aircraft}
            for c in cells
        ],
        "out": str(out),
    })


def _cmd_classify_unknown(args):
    from . import plots

    _require_inputs(args.input, args.model)
    model = load_model(args.model)
    vectors = features.read_features_csv(args.input)
    allocation = pipeline.load_allocation_table(args.allocation)
    results = pipeline.classify_unknown(
        vectors, model,
        threshold=args.threshold,
        min_flights=args.min_flights,
        min_states=args.min_states,
        allocation=allocation,
    )
    out = Path(args.out)
    pipeline.write_results_csv(results, out)
    pipeline.write_results_json(results, out.with_suffix(".json"))
    summary_path = out.with_suffix(".summary.csv")
    pipeline.write_unknown_summary_csv(results, summary_path)
    plots.save_category_bars(pipeline.unknown_summary(results), out.with_suffix(".summary.png"))
    confident = sum(1 for r in results if r.predicted != pipeline.OTHER_LABEL)
    _print_summary({
        "eligible": len(results),
        "excluded": len(vectors) - len(results),
        "confident": confident,
        "other": len(results) - confident,
        "out": str(out),
    })


def _cmd_synth(args):
    archetypes, region = synth.load_archetypes(args.config)
    summary = synth.generate_fleet(
        archetypes,
        aircraft_per_category=args.aircraft_per_category,
        flights_per_aircraft=args.flights_per_aircraft,
        seed=args.seed,
        states_path=args.out_states,
        truth_path=args.out_truth,
        region=region,
    )
    _print_summary({
        **summary.to_dict(),
        "out_states": str(args.out_states),
        "out_truth": str(args.out_truth),
    })


def _cmd_export_geojson(args):
    _require_inputs(args.input, args.results)
    results_by_icao = None
    if args.results:
        results_by_icao = {}
        with open(args.results, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                results_by_icao[row["icao24"]] = pipeline.ClassificationResult(
                    icao24=row["icao24"],
                    predicted=row["predicted"],
                    confidence=float(row["confidence"]),
                    n_flights=int(row["n_flights"]),
                    n_states=int(row["n_states"]),
                    country=row["country"] or None,
                )
    collection = geojson.flights_to_geojson(ingest.iter_flight_groups(args.input), results_by_icao)
    geojson.write_geojson(collection, args.out)
    _print_summary({"features": len(collection["features"]), "out": str(args.out)})


# ---------------------------------------------------------------------------
# Parser assembly


def _add_registry(parser):
    parser.add_argument("--registry", nargs="+", required=True, metavar="PATH",
                        help="registry CSVs in precedence order (first wins on conflicts)")


def _add_common_model_params(parser):
    parser.add_argument("--k", type=int, help="KNN neighbor count")
    parser.add_argument("--max-splits", dest="max_splits", type=int, help="tree/boosted split cap")
    parser.add_argument("--n-learners", dest="n_learners", type=int, help="boosted ensemble size")
    parser.add_argument("--learning-rate", dest="learning_rate", type=float, help="boosted shrinkage")
    parser.add_argument("--svm-c", dest="svm_c", type=float, help="SVM soft-margin C")


def _build_parser():
    parser = _Parser(prog="classifly", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[], help="validate a state-vector dump")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true", help="abort on the first invalid row")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("segment", help="cut observation streams into flights")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--gap", type=float, default=ingest.DEFAULT_GAP_S,
                   help="split gap threshold in seconds")
    p.add_argument("--arrival-alt", dest="arrival_alt", type=float,
                   default=ingest.DEFAULT_ARRIVAL_ALT_M, help="arrival altitude in meters")
    p.add_argument("--hard-gap", dest="hard_gap", type=float, default=None,
                   help="optional unconditional split gap in seconds")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("learn-bounds", help="learn quantile bounds from a reference sample")
    p.add_argument("--input", required=True, help="flights CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--q", type=int, default=10)
    p.add_argument("--cap", type=int, default=25, help="max flights per reference aircraft")
    p.add_argument("--sample", type=int, default=None, help="reference aircraft sample size (default all)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_learn_bounds)

    p = sub.add_parser("extract", help="build per-aircraft feature vectors")
    p.add_argument("--input", required=True, help="flights CSV")
    p.add_argument("--bounds", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("analyze", help="RMI report and feature correlation matrix")
    p.add_argument("--input", required=True, help="features CSV")
    _add_registry(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--f-min", dest="f_min", type=int, default=pipeline.DEFAULT_F_MIN)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("train", help="train one classifier on the 80%% split")
    p.add_argument("--input", required=True, help="features CSV")
    _add_registry(p)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--model-type", dest="model_type", default="boosted",
                   choices=["knn", "tree", "boosted", "svm"])
    p.add_argument("--f-min", dest="f_min", type=int, default=pipeline.DEFAULT_F_MIN)
    p.add_argument("--split", type=float, default=0.8, help="training fraction (1.0 = use everything)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--search", action="store_true", help="randomized hyperparameter search first")
    p.add_argument("--search-iterations", dest="search_iterations", type=int, default=30)
    p.add_argument("--folds", type=int, default=5)
    _add_common_model_params(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a model on the held-out 20%% split")
    p.add_argument("--input", required=True, help="features CSV")
    _add_registry(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--f-min", dest="f_min", type=int, default=pipeline.DEFAULT_F_MIN)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="accuracy over a (f_min, q) grid")
    p.add_argument("--input", required=True, help="flights CSV")
    _add_registry(p)
    p.add_argument("--out", required=True, help="sweep CSV path")
    p.add_argument("--f-min", dest="f_min_values", type=int, nargs="+", default=[1, 5, 10, 30])
    p.add_argument("--q", dest="q_values", type=int, nargs="+", default=[10])
    p.add_argument("--model-type", dest="model_type", default="knn",
                   choices=["knn", "tree", "boosted", "svm"])
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--cap", type=int, default=25, help="reference flight cap per aircraft")
    p.add_argument("--seed", type=int, default=0)
    _add_common_model_params(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("classify-unknown", help="label unlisted aircraft with confidence")
    p.add_argument("--input", required=True, help="features CSV of unknown aircraft")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--threshold", type=float, default=pipeline.DEFAULT_CONFIDENCE_THRESHOLD)
    p.add_argument("--min-flights", dest="min_flights", type=int, default=pipeline.DEFAULT_MIN_FLIGHTS)
    p.add_argument("--min-states", dest="min_states", type=int, default=pipeline.DEFAULT_MIN_STATES)
    p.add_argument("--allocation", default=None, help="ICAO allocation CSV (default: bundled)")
    p.set_defaults(func=_cmd_classify_unknown)

    p = sub.add_parser("synth", help="generate a labelled synthetic fleet")
    p.add_argument("--config", default=None, help="archetype JSON (default: bundled)")
    p.add_argument("--aircraft-per-category", dest="aircraft_per_category", type=int, default=10)
    p.add_argument("--flights-per-aircraft", dest="flights_per_aircraft", type=int, default=35)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-states", dest="out_states", required=True)
    p.add_argument("--out-truth", dest="out_truth", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("export-geojson", help="flight trajectories as a GeoJSON FeatureCollection")
    p.add_argument("--input", required=True, help="flights CSV")
    p.add_argument("--results", default=None, help="classification results CSV to join in")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_geojson)

    return parser


def main(argv=None):
    level = os.environ.get("CLASSIFLY_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
        return 0
    except ClassiflyError as exc:
        _emit_error("data", exc)
        return 2
    except OSError as exc:
        _emit_error("data", exc)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error")
        _emit_error("internal", exc)
        return 3


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()

"""Acceptance suite: one test per criterion, printing a pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s``. The synthetic corpora are
built once per session; the end-to-end criterion drives the real CLI chain.
"""

import json
import time
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest

from classifly import cli, features, ingest, pipeline
from classifly.analysis import entropy, rmi
from classifly.ingest import segment_flights
from classifly.models import (
    Dataset,
    boosted_train,
    knn_train,
    load_model,
    save_model,
    svm_train,
    tree_train,
)
from classifly.reference import QuantileBounds
from helpers import kkt_violations, make_state, random_dataset

pytestmark = pytest.mark.acceptance


def report(number, description, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] criterion {number:02d}: {description}{suffix}")
    assert ok, f"criterion {number}: {description}{suffix}"


# ---------------------------------------------------------------------------
# Session corpora


@pytest.fixture(scope="session")
def main_fleet(tmp_path_factory):
    """Criterion-1 fleet pushed through the real CLI chain, timed end to end."""
    root = tmp_path_factory.mktemp("main_fleet")
    p = lambda name: str(root / name)
    started = time.monotonic()

    def run(*argv):
        assert cli.main(list(argv)) == 0, argv

    run("synth", "--aircraft-per-category", "60", "--flights-per-aircraft", "35",
        "--seed", "42", "--out-states", p("states.csv"), "--out-truth", p("truth.csv"))
    run("segment", "--input", p("states.csv"), "--out", p("flights.csv"))
    run("learn-bounds", "--input", p("flights.csv"), "--q", "10", "--out", p("bounds.json"))
    run("extract", "--input", p("flights.csv"), "--bounds", p("bounds.json"),
        "--out", p("features.csv"))
    run("train", "--input", p("features.csv"), "--registry", p("truth.csv"),
        "--model-type", "boosted", "--f-min", "30", "--seed", "42", "--out", p("model.json"))
    run("evaluate", "--input", p("features.csv"), "--registry", p("truth.csv"),
        "--model", p("model.json"), "--f-min", "30", "--seed", "42", "--out", p("report.json"))
    elapsed = time.monotonic() - started

    (root / "states.csv").unlink()  # keep the session tmp dir small
    (root / "flights.csv").unlink()

    vectors = features.read_features_csv(p("features.csv"))
    records, _ = pipeline.merge_metadata([p("truth.csv")])
    data, _ = pipeline.build_dataset(vectors, records, f_min=30)
    train_set, eval_set = pipeline.split_train_eval(data, seed=42)
    return {
        "root": root,
        "elapsed_s": elapsed,
        "accuracy": json.loads((root / "report.json").read_text())["accuracy"],
        "bounds": QuantileBounds.load(p("bounds.json")),
        "vectors": vectors,
        "records": records,
        "data": data,
        "train": train_set,
        "eval": eval_set,
        "model": load_model(p("model.json")),
    }


@pytest.fixture(scope="session")
def sweep_corpora(tmp_path_factory):
    """A second fleet for the parameter sweeps: full and degraded variants."""
    root = tmp_path_factory.mktemp("sweep_fleet")
    assert cli.main(["synth", "--aircraft-per-category", "50", "--flights-per-aircraft", "40",
                     "--seed", "11", "--out-states", str(root / "states.csv"),
                     "--out-truth", str(root / "truth.csv")]) == 0
    assert cli.main(["segment", "--input", str(root / "states.csv"),
                     "--out", str(root / "flights.csv")]) == 0
    records, _ = pipeline.merge_metadata([root / "truth.csv"])
    labels = {icao: r.category for icao, r in records.items()}

    groups = list(ingest.iter_flight_groups(root / "flights.csv"))
    (root / "states.csv").unlink()
    (root / "flights.csv").unlink()
    full = pipeline.build_corpus(groups, labels)

    # Degraded corpus: half the aircraft keep only 1-6 flights, the rest 7-40.
    rng = np.random.default_rng(99)
    degraded_groups = []
    for index, (icao, flights) in enumerate(groups):
        keep = int(rng.integers(1, 7)) if index % 2 == 0 else int(rng.integers(7, 41))
        chosen = sorted(rng.choice(len(flights), size=min(keep, len(flights)), replace=False))
        degraded_groups.append((icao, [flights[i] for i in chosen]))
    degraded = pipeline.build_corpus(degraded_groups, labels)
    return {"full": full, "degraded": degraded}


@pytest.fixture(scope="session")
def unknown_fleet(tmp_path_factory, main_fleet):
    """A hidden-label fleet for the unknown-aircraft protocol."""
    root = tmp_path_factory.mktemp("unknown_fleet")
    assert cli.main(["synth", "--aircraft-per-category", "12", "--flights-per-aircraft", "25",
                     "--seed", "555", "--out-states", str(root / "states.csv"),
                     "--out-truth", str(root / "truth.csv")]) == 0
    assert cli.main(["segment", "--input", str(root / "states.csv"),
                     "--out", str(root / "flights.csv")]) == 0
    groups = list(ingest.iter_flight_groups(root / "flights.csv"))
    truth, _ = pipeline.merge_metadata([root / "truth.csv"])
    return {"groups": groups, "truth": truth}


# ---------------------------------------------------------------------------
# Criteria


def test_criterion_01_end_to_end_synthetic_accuracy(main_fleet):
    accuracy = main_fleet["accuracy"]
    elapsed = main_fleet["elapsed_s"]
    report(1, "end-to-end boosted accuracy >= 0.85 within 10 minutes",
           accuracy >= 0.85 and elapsed <= 600.0,
           f"accuracy={accuracy:.3f}, runtime={elapsed:.0f}s")


def test_criterion_02_f_min_trend(sweep_corpora):
    cells = pipeline.sweep(sweep_corpora["degraded"], f_min_values=[1, 30], q_values=[10],
                           family="knn", repetitions=10, seed=5)
    by_fmin = {c.f_min: c.mean_accuracy for c in cells}
    gap = by_fmin[30] - by_fmin[1]
    report(2, "degraded corpus: f_min=30 beats f_min=1 by >= 5 points",
           gap >= 0.05, f"acc(1)={by_fmin[1]:.3f}, acc(30)={by_fmin[30]:.3f}, gap={gap:.3f}")


def test_criterion_03_q_sweep_sanity(sweep_corpora):
    cells = pipeline.sweep(sweep_corpora["full"], f_min_values=[30], q_values=[5, 10],
                           family="knn", repetitions=10, seed=5)
    by_q = {c.q: c.mean_accuracy for c in cells}
    report(3, "q=10 accuracy within 0.02 of q=5 or better",
           by_q[10] >= by_q[5] - 0.02, f"acc(q=5)={by_q[5]:.3f}, acc(q=10)={by_q[10]:.3f}")


def test_criterion_04_rmi_identities():
    rng = np.random.default_rng(4)
    labels = rng.integers(0, 8, 10_000)
    constant = rmi(np.zeros(10_000), labels)
    encoded = rmi(labels.astype(float), labels)
    permuted = rmi(rng.permutation(rng.normal(size=10_000)), labels)
    ok = abs(constant) <= 1e-9 and abs(encoded - 100.0) <= 1e-9 and permuted < 5.0
    report(4, "RMI identities (constant 0, encoding 100, independent < 5%)",
           ok, f"constant={constant:.2e}, encoded={encoded:.6f}, independent={permuted:.2f}%")


def test_criterion_05_entropy_uniform():
    labels = [c for c in range(8) for _ in range(125)]
    value = entropy(labels)
    report(5, "uniform 8-class entropy is 3 bits", abs(value - 3.0) <= 1e-12, f"H={value!r}")


def test_criterion_06_knn_oracle_equivalence():
    rng = np.random.default_rng(6)
    train = random_dataset(rng, n=500, d=8, n_classes=4, spread=1.5)
    model = knn_train(train, k=4)
    queries = rng.normal(0, 2, size=(200, 8))
    got, _ = model.predict_batch(queries)

    def oracle(x):
        dists = np.abs(train.X - x).sum(axis=1)
        order = sorted(range(train.n), key=lambda i: (dists[i], i))[:4]
        exact = [i for i in order if dists[i] == 0.0]
        votes = defaultdict(float)
        if exact:
            for i in exact:
                votes[int(train.y[i])] += 1.0
        else:
            for i in order:
                votes[int(train.y[i])] += 1.0 / dists[i]
        best = max(votes.values())
        return min(c for c, v in votes.items() if v == best)

    agreement = sum(int(g == oracle(q)) for g, q in zip(got, queries))
    report(6, "KNN matches exhaustive-sort oracle on 200/200 queries",
           agreement == 200, f"agreement={agreement}/200")


def test_criterion_07_tree_xor():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    model = tree_train(Dataset(X, y, ["even", "odd"]), max_splits=3)
    predicted, _ = model.predict_batch(X)
    ok = bool(np.array_equal(predicted, y)) and model.n_internal_nodes <= 3
    report(7, "decision tree solves 2-D XOR with <= 3 internal nodes",
           ok, f"internal_nodes={model.n_internal_nodes}")


def test_criterion_08_segmentation_oracle():
    def oracle(states):
        partitions = [[states[0]]]
        for prev, nxt in zip(states, states[1:]):
            if (nxt.time - prev.time) > 600 and prev.baro_alt is not None and prev.baro_alt < 2500:
                partitions.append([])
            partitions[-1].append(nxt)
        return partitions

    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 50))
        times = np.cumsum(rng.integers(1, 900, size=n))
        states = [
            make_state(time=int(t),
                       baro_alt=None if rng.random() < 0.15 else float(rng.uniform(0, 6000)))
            for t in times
        ]
        got = [[s.time for s in f.states] for f in segment_flights(states)]
        want = [[s.time for s in p] for p in oracle(states)]
        mismatches += int(got != want)
    report(8, "segmentation equals one-pass scan oracle on 1000 random sequences",
           mismatches == 0, f"mismatches={mismatches}")


def test_criterion_09_feature_vector_invariants(main_fleet):
    vectors = main_fleet["vectors"]
    q = main_fleet["bounds"].q
    shape_ok = all(v.values.size == 12 * q for v in vectors)
    sums_ok = all(
        np.all(np.abs(v.values.reshape(12, q).sum(axis=1) - 1.0) <= 1e-9) for v in vectors
    )

    rng = np.random.default_rng(9)
    from helpers import random_aircraft

    flights = random_aircraft(rng, n_flights=7)
    base = features.extract_features(flights, main_fleet["bounds"]).values
    stable = True
    for _ in range(100):
        perm = [flights[i] for i in rng.permutation(len(flights))]
        shuffled = features.extract_features(perm, main_fleet["bounds"]).values
        stable = stable and shuffled.tolist() == base.tolist()
    report(9, "feature vectors: 12q length, unit slice sums, permutation invariant",
           shape_ok and sums_ok and stable,
           f"n_vectors={len(vectors)}, shape_ok={shape_ok}, sums_ok={sums_ok}, perm_ok={stable}")


def test_criterion_10_confusion_matrix_consistency(main_fleet):
    rng = np.random.default_rng(10)
    eval_set = main_fleet["eval"]
    models = [
        main_fleet["model"],
        knn_train(main_fleet["train"], k=4),
        tree_train(main_fleet["train"], max_splits=50),
    ]
    worst = 0.0
    exact = True
    for model in models:
        rep = pipeline.evaluate(model, eval_set)
        cm = np.asarray(rep.confusion, dtype=np.int64)
        total = cm.sum()
        exact = exact and rep.accuracy == np.trace(cm) / total
        for c, entry in enumerate(rep.per_class):
            if entry is None:
                continue
            tp = cm[c, c]
            fp = cm[:, c].sum() - tp
            fn = cm[c].sum() - tp
            tn = total - tp - fp - fn
            recomputed = {
                "precision": tp / (tp + fp) if (tp + fp) else 0.0,
                "tpr": tp / (tp + fn),
                "tnr": tn / (tn + fp) if (tn + fp) else 0.0,
            }
            for key, value in recomputed.items():
                worst = max(worst, abs(entry[key] - value))
    report(10, "accuracy = trace/total exactly; rates recompute within 1e-12",
           exact and worst <= 1e-12, f"max_rate_error={worst:.2e}")


def test_criterion_11_unknown_aircraft_protocol(main_fleet, unknown_fleet):
    # Weak learners keep the vote shares informative; deep trees would stop
    # boosting after one perfect round and report one-hot confidences.
    model = boosted_train(main_fleet["train"], n_learners=150, max_splits=5)
    bounds = main_fleet["bounds"]

    eligible_vectors = [
        features.extract_features(flights, bounds) for _, flights in unknown_fleet["groups"]
    ]
    few_flights_src = unknown_fleet["groups"][0]
    too_few_flights = features.extract_features(few_flights_src[1][:9], bounds)
    ten_short = [
        ingest.Flight.from_states(f.states[:40]) for f in unknown_fleet["groups"][1][1][:10]
    ]
    too_few_states = features.extract_features(ten_short, bounds)
    assert too_few_flights.n_flights == 9
    assert too_few_states.n_flights == 10 and too_few_states.n_states == 400

    results = pipeline.classify_unknown(
        [too_few_flights, too_few_states, *eligible_vectors], model,
        threshold=0.5, min_flights=10, min_states=500,
    )
    excluded_ok = len(results) == len(eligible_vectors)
    labels_ok = all(
        r.predicted in {*pipeline.CATEGORY_NAMES, pipeline.OTHER_LABEL}
        and (r.predicted == pipeline.OTHER_LABEL) == (r.confidence < 0.5)
        for r in results
    )
    truth = unknown_fleet["truth"]
    confident = [r for r in results if r.predicted != pipeline.OTHER_LABEL]
    correct = sum(1 for r in confident if truth[r.icao24].category.value == r.predicted)
    fraction = correct / len(confident) if confident else 0.0
    report(11, "unknown protocol: ineligible excluded, confident >= 90% correct",
           excluded_ok and labels_ok and len(confident) > 0 and fraction >= 0.90,
           f"eligible={len(results)}, confident={len(confident)}, correct={fraction:.3f}")


def test_criterion_12_svm_separable_kkt():
    rng = np.random.default_rng(12)
    X = rng.uniform(-4, 4, size=(60, 2))
    y = (X[:, 0] > 0).astype(int)
    X[:, 0] += np.where(y == 1, 2.0, -2.0)
    data = Dataset(X, y, ["neg", "pos"])
    model = svm_train(data, C=4.795, seed=0)
    predicted, _ = model.predict_batch(data.X)
    accuracy = float((predicted == data.y).mean())
    violations = sum(kkt_violations(model, data, c, slack=1e-2) for c in range(2))
    report(12, "SVM: separable fixture at 100% with KKT within 1e-2",
           accuracy == 1.0 and violations == 0,
           f"train_accuracy={accuracy:.3f}, kkt_violations={violations}")


def test_criterion_13_serialization_roundtrip(tmp_path):
    rng = np.random.default_rng(13)
    data = random_dataset(rng, n=90, d=6, n_classes=3, spread=2.5)
    queries = rng.normal(0, 2.5, size=(100, 6))
    models = {
        "knn": knn_train(data, k=4),
        "tree": tree_train(data, max_splits=40),
        "boosted": boosted_train(data, n_learners=20, max_splits=3),
        "svm": svm_train(data, seed=0),
    }
    identical = True
    for name, model in models.items():
        path = tmp_path / f"{name}.json"
        save_model(model, path)
        loaded = load_model(path)
        base, _ = model.predict_batch(queries)
        rest, _ = loaded.predict_batch(queries)
        identical = identical and bool(np.array_equal(base, rest))
    report(13, "save/load/predict identical for all four families on 100 queries", identical)


def test_criterion_14_cli_reproducibility(tmp_path):
    def chain(root: Path):
        root.mkdir()
        p = lambda name: str(root / name)

        def run(*argv):
            assert cli.main(list(argv)) == 0, argv

        run("synth", "--aircraft-per-category", "5", "--flights-per-aircraft", "8",
            "--seed", "3", "--out-states", p("states.csv"), "--out-truth", p("truth.csv"))
        run("segment", "--input", p("states.csv"), "--out", p("flights.csv"))
        run("learn-bounds", "--input", p("flights.csv"), "--q", "5", "--out", p("bounds.json"))
        run("extract", "--input", p("flights.csv"), "--bounds", p("bounds.json"),
            "--out", p("features.csv"))
        run("train", "--input", p("features.csv"), "--registry", p("truth.csv"),
            "--model-type", "boosted", "--n-learners", "25", "--max-splits", "3",
            "--f-min", "3", "--seed", "1", "--out", p("model.json"))
        run("evaluate", "--input", p("features.csv"), "--registry", p("truth.csv"),
            "--model", p("model.json"), "--f-min", "3", "--seed", "1", "--out", p("report.json"))
        run("classify-unknown", "--input", p("features.csv"), "--model", p("model.json"),
            "--min-flights", "3", "--min-states", "100", "--out", p("unknown.csv"))
        run("export-geojson", "--input", p("flights.csv"), "--results", p("unknown.csv"),
            "--out", p("flights.geojson"))

    chain(tmp_path / "run1")
    chain(tmp_path / "run2")
    compared = []
    all_equal = True
    for path in sorted((tmp_path / "run1").rglob("*")):
        if path.suffix not in {".json", ".csv", ".geojson"}:
            continue
        twin = tmp_path / "run2" / path.relative_to(tmp_path / "run1")
        same = path.read_bytes() == twin.read_bytes()
        compared.append(path.name)
        all_equal = all_equal and same
    report(14, "two identical CLI chains produce byte-identical report files",
           all_equal and len(compared) >= 8, f"files_compared={len(compared)}")

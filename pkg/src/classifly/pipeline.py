"""End-to-end orchestration: labels, protocol, sweeps, unknown classification.

The eight operational categories are a closed label space; registry files
supply them per aircraft. Aircraft enter the training dataset only with a
known category and at least ``f_min`` observed flights. Training/evaluation
uses a stratified 80/20 split that is a pure function of the seed, so
separate CLI invocations re-derive the identical partition.
"""

from __future__ import annotations

import bisect
import csv
import enum
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyDataset, EmptyGroup, MalformedRegistry
from .features import FeatureVector, group_value_multisets
from .ioutil import atomic_write, write_json
from .models import Dataset, train_model
from .reference import DEFAULT_FLIGHT_CAP, FEATURE_GROUPS, learn_quantile_bounds, quantize_proportions

logger = logging.getLogger(__name__)

OTHER_LABEL = "Other"

DEFAULT_F_MIN = 30
DEFAULT_CONFIDENCE_THRESHOLD = 0.5
DEFAULT_MIN_FLIGHTS = 10
DEFAULT_MIN_STATES = 500


class Category(enum.Enum):
    """The eight operational aircraft categories."""

    BUSINESS = "Business"
    COMMERCIAL = "Commercial"
    FIGHTER = "Fighter"
    SMALL_UTILITY = "SmallUtility"
    SURVEILLANCE = "Surveillance"
    TANKER = "Tanker"
    TRAINER = "Trainer"
    TRANSPORT = "Transport"


CATEGORIES = tuple(Category)
CATEGORY_NAMES = [c.value for c in CATEGORIES]

_CATEGORY_LOOKUP = {re.sub(r"[\s_\-]", "", c.value).lower(): c for c in CATEGORIES}


def parse_category(text):
    """Map a registry cell to a Category; None when empty or unrecognized."""
    if text is None:
        return None
    key = re.sub(r"[\s_\-]", "", text).lower()
    if not key:
        return None
    return _CATEGORY_LOOKUP.get(key)


@dataclass
class AircraftRecord:
    """Merged registry metadata for one transponder address."""

    icao24: str
    registration: str | None = None
    model_name: str | None = None
    operator: str | None = None
    category: Category | None = None
    source: str | None = None


_REGISTRY_COLUMNS = ("icao24", "registration", "model", "operator", "category", "source")
_ICAO24_RE = re.compile(r"[0-9a-f]{6}\Z")


def load_registry(path):
    """Parse one registry CSV into records.

    The header may carry any subset of ``icao24,registration,model,
    operator,category,source`` as long as ``icao24`` is present, which also
    admits the two-column truth files the synthetic generator emits. Rows
    with malformed addresses and unrecognized category strings are treated
    as registry noise: skipped (respectively nulled) and counted.
    """
    path = Path(path)
    default_source = path.stem
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MalformedRegistry(f"{path}: empty registry", source=str(path))
        columns = [cell.strip().lstrip("﻿").lower() for cell in header]
        if "icao24" not in columns or any(c not in _REGISTRY_COLUMNS for c in columns):
            raise MalformedRegistry(f"{path}: unrecognized registry header {','.join(columns)!r}",
                                    source=str(path))
        index = {name: columns.index(name) for name in columns}
        records = []
        skipped = 0
        unknown_categories = 0
        for row in reader:
            if not row:
                continue
            if len(row) != len(columns):
                skipped += 1
                continue

            def cell(name):
                pos = index.get(name)
                if pos is None:
                    return None
                value = row[pos].strip()
                return value or None

            icao = (cell("icao24") or "").lower()
            if not _ICAO24_RE.fullmatch(icao):
                skipped += 1
                continue
            raw_category = cell("category")
            category = parse_category(raw_category)
            if raw_category is not None and category is None:
                unknown_categories += 1
            records.append(AircraftRecord(
                icao24=icao,
                registration=cell("registration"),
                model_name=cell("model"),
                operator=cell("operator"),
                category=category,
                source=cell("source") or default_source,
            ))
        return records, skipped, unknown_categories


@dataclass
class MergeReport:
    n_aircraft: int = 0
    per_source: dict[str, int] = field(default_factory=dict)
    conflicts: dict[str, int] = field(default_factory=dict)
    skipped_rows: int = 0
    unknown_categories: int = 0

    @property
    def total_conflicts(self):
        return sum(self.conflicts.values())

    def to_dict(self):
        return {
            "n_aircraft": self.n_aircraft,
            "per_source": self.per_source,
            "conflicts": self.conflicts,
            "total_conflicts": self.total_conflicts,
            "skipped_rows": self.skipped_rows,
            "unknown_categories": self.unknown_categories,
        }


_MERGE_FIELDS = ("registration", "model_name", "operator", "category", "source")


def merge_metadata(sources):
    """Field-wise first-non-null merge over registries in precedence order.

    Later sources fill gaps only; a later non-null value disagreeing with an
    established one counts as a conflict and loses.
    """
    merged: dict[str, AircraftRecord] = {}
    report = MergeReport()
    for source in sources:
        records, skipped, unknown = load_registry(source)
        report.per_source[str(source)] = len(records)
        report.skipped_rows += skipped
        report.unknown_categories += unknown
        for record in records:
            existing = merged.get(record.icao24)
            if existing is None:
                merged[record.icao24] = record
                continue
            for field_name in _MERGE_FIELDS:
                incoming = getattr(record, field_name)
                if incoming is None:
                    continue
                current = getattr(existing, field_name)
                if current is None:
                    setattr(existing, field_name, incoming)
                elif current != incoming and field_name != "source":
                    report.conflicts[field_name] = report.conflicts.get(field_name, 0) + 1
    report.n_aircraft = len(merged)
    return merged, report


@dataclass
class BuildReport:
    kept: int = 0
    dropped_unlabelled: int = 0
    dropped_below_f_min: int = 0

    @property
    def total(self):
        return self.kept + self.dropped_unlabelled + self.dropped_below_f_min

    def to_dict(self):
        return {
            "kept": self.kept,
            "dropped_unlabelled": self.dropped_unlabelled,
            "dropped_below_f_min": self.dropped_below_f_min,
            "total": self.total,
        }


def build_dataset(vectors, records, f_min=DEFAULT_F_MIN):
    """Keep aircraft with a known category and at least ``f_min`` flights."""
    rows = []
    labels = []
    icaos = []
    report = BuildReport()
    for vector in vectors:
        record = records.get(vector.icao24)
        category = record.category if record is not None else None
        if category is None:
            report.dropped_unlabelled += 1
            continue
        if vector.n_flights < f_min:
            report.dropped_below_f_min += 1
            continue
        rows.append(vector.values)
        labels.append(CATEGORIES.index(category))
        icaos.append(vector.icao24)
        report.kept += 1
    if not rows:
        raise EmptyDataset(f"no aircraft survived labelling and f_min={f_min}")
    dataset = Dataset(np.stack(rows), np.array(labels), CATEGORY_NAMES, icaos)
    return dataset, report


def split_train_eval(data: Dataset, train_fraction=0.8, seed=0):
    """Stratified split; the evaluation side rounds down per class."""
    rng = np.random.default_rng(seed)
    train_idx = []
    eval_idx = []
    for cls in np.unique(data.y):
        idx = np.flatnonzero(data.y == cls)
        rng.shuffle(idx)
        # The epsilon keeps 10 * (1 - 0.8) from flooring to 1.
        n_eval = int(math.floor(idx.size * (1.0 - train_fraction) + 1e-9))
        eval_idx.extend(idx[:n_eval])
        train_idx.extend(idx[n_eval:])
    return data.subset(np.sort(train_idx)), data.subset(np.sort(eval_idx))


@dataclass
class EvaluationReport:
    """Confusion matrix (rows = true class) with one-vs-rest rates."""

    class_names: list[str]
    confusion: np.ndarray
    accuracy: float
    per_class: list[dict | None]
    macro: dict[str, float | None]
    micro: dict[str, float]
    n_eval: int

    def to_dict(self):
        return {
            "class_names": self.class_names,
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "accuracy": self.accuracy,
            "per_class": self.per_class,
            "macro": self.macro,
            "micro": self.micro,
            "n_eval": self.n_eval,
        }

    def save(self, path):
        write_json(self.to_dict(), path)


def evaluate(model, eval_data: Dataset):
    """Score a trained model; accuracy is exactly trace/total of the matrix."""
    if eval_data.n == 0:
        raise EmptyDataset("evaluation set is empty")
    predicted, _ = model.predict_batch(eval_data.X)
    k = len(eval_data.class_names)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (eval_data.y, predicted), 1)
    total = int(confusion.sum())
    accuracy = float(np.trace(confusion) / total)

    per_class: list[dict | None] = []
    pooled = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    for c in range(k):
        support = int(confusion[c].sum())
        if support == 0:
            per_class.append(None)
            continue
        tp = int(confusion[c, c])
        fp = int(confusion[:, c].sum() - tp)
        fn = int(support - tp)
        tn = int(total - tp - fp - fn)
        pooled["tp"] += tp
        pooled["fp"] += fp
        pooled["fn"] += fn
        pooled["tn"] += tn
        per_class.append({
            "class": eval_data.class_names[c],
            # Convention: a class never predicted has precision 0, not null.
            "precision": tp / (tp + fp) if (tp + fp) else 0.0,
            "tpr": tp / (tp + fn),
            "tnr": tn / (tn + fp) if (tn + fp) else 0.0,
            "support": support,
        })
    present = [p for p in per_class if p is not None]
    macro = {
        "precision": float(np.mean([p["precision"] for p in present])) if present else None,
        "tpr": float(np.mean([p["tpr"] for p in present])) if present else None,
        "tnr": float(np.mean([p["tnr"] for p in present])) if present else None,
    }
    micro = {
        "precision": pooled["tp"] / (pooled["tp"] + pooled["fp"]) if (pooled["tp"] + pooled["fp"]) else 0.0,
        "tpr": pooled["tp"] / (pooled["tp"] + pooled["fn"]) if (pooled["tp"] + pooled["fn"]) else 0.0,
        "tnr": pooled["tn"] / (pooled["tn"] + pooled["fp"]) if (pooled["tn"] + pooled["fp"]) else 0.0,
    }
    return EvaluationReport(
        class_names=list(eval_data.class_names),
        confusion=confusion,
        accuracy=accuracy,
        per_class=per_class,
        macro=macro,
        micro=micro,
        n_eval=total,
    )


def write_confusion_csv(report: EvaluationReport, path):
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\predicted", *report.class_names])
        for name, row in zip(report.class_names, report.confusion):
            writer.writerow([name, *(str(int(v)) for v in row)])


# ---------------------------------------------------------------------------
# Parameter sweeps


@dataclass
class CorpusAircraft:
    icao24: str
    category: Category | None
    n_flights: int
    n_states: int
    multisets: dict
    reference_multisets: dict


@dataclass
class FeatureCorpus:
    """Pre-quantization material so sweeps can rebuild features at any q."""

    aircraft: list[CorpusAircraft]
    reference_values: dict


def build_corpus(flight_groups, labels, cap=DEFAULT_FLIGHT_CAP):
    """Collect per-aircraft value multisets once, for repeated re-quantization.

    ``labels`` maps icao24 to Category (missing aircraft stay unlabelled).
    The pooled reference multisets cap each aircraft at ``cap`` flights.
    """
    aircraft = []
    for icao, flights in flight_groups:
        if not flights:
            continue
        full = group_value_multisets(flights)
        if cap is not None and len(flights) > cap:
            ref = group_value_multisets(flights[:cap])
        else:
            ref = full
        aircraft.append(CorpusAircraft(
            icao24=icao,
            category=labels.get(icao),
            n_flights=len(flights),
            n_states=sum(len(f.states) for f in flights),
            multisets=full,
            reference_multisets=ref,
        ))
    pooled = {}
    for group in FEATURE_GROUPS:
        parts = [a.reference_multisets[group] for a in aircraft if a.reference_multisets[group].size]
        pooled[group] = np.concatenate(parts) if parts else np.empty(0)
    return FeatureCorpus(aircraft=aircraft, reference_values=pooled)


def corpus_vectors(corpus: FeatureCorpus, q):
    """Quantize every corpus aircraft against bounds learned at ``q``."""
    bounds = learn_quantile_bounds(corpus.reference_values, q)
    vectors = []
    skipped = 0
    for entry in corpus.aircraft:
        try:
            parts = []
            for group in FEATURE_GROUPS:
                values = entry.multisets[group]
                if values.size == 0:
                    raise EmptyGroup(group.value)
                parts.append(quantize_proportions(values, bounds.boundaries[group]))
        except EmptyGroup:
            skipped += 1
            continue
        vectors.append(FeatureVector(
            icao24=entry.icao24,
            q=q,
            values=np.concatenate(parts),
            n_flights=entry.n_flights,
            n_states=entry.n_states,
        ))
    return vectors, bounds, skipped


@dataclass
class SweepCell:
    f_min: int
    q: int
    mean_accuracy: float
    std_accuracy: float
    repetitions: int
    n_aircraft: int


def sweep(corpus: FeatureCorpus, f_min_values, q_values, family="knn", repetitions=10,
          seed=0, params=None):
    """Mean held-out accuracy over a (f_min, q) grid of rebuilt datasets."""
    labels = {a.icao24: a.category for a in corpus.aircraft}
    cells = []
    for q in q_values:
        vectors, _, _ = corpus_vectors(corpus, q)
        records = {
            icao: AircraftRecord(icao24=icao, category=category)
            for icao, category in labels.items()
        }
        for f_min in f_min_values:
            data, _ = build_dataset(vectors, records, f_min=f_min)
            accuracies = []
            for rep in range(repetitions):
                rep_seed = seed + rep
                train, eval_set = split_train_eval(data, seed=rep_seed)
                model = train_model(family, train, params, seed=rep_seed)
                accuracies.append(evaluate(model, eval_set).accuracy)
            cells.append(SweepCell(
                f_min=int(f_min),
                q=int(q),
                mean_accuracy=float(np.mean(accuracies)),
                std_accuracy=float(np.std(accuracies)),
                repetitions=repetitions,
                n_aircraft=data.n,
            ))
    return cells


def write_sweep_csv(cells, path):
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["f_min", "q", "mean_accuracy", "std_accuracy", "repetitions", "n_aircraft"])
        for cell in cells:
            writer.writerow([
                cell.f_min, cell.q,
                f"{cell.mean_accuracy:.6f}", f"{cell.std_accuracy:.6f}",
                cell.repetitions, cell.n_aircraft,
            ])


# ---------------------------------------------------------------------------
# Unknown-aircraft classification and country attribution


@dataclass
class AllocationTable:
    """Non-overlapping ICAO 24-bit address blocks mapped to countries."""

    lows: list[int]
    highs: list[int]
    countries: list[str]


def load_allocation_table(path=None):
    """Load ``low_hex,high_hex,country`` ranges; defaults to the bundled table."""
    if path is None:
        from importlib.resources import files

        source = files("classifly").joinpath("data/icao_allocations.csv")
        text = source.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header != ["low_hex", "high_hex", "country"]:
        raise MalformedRegistry("allocation table must have header low_hex,high_hex,country",
                                source=str(path))
    rows = []
    for row in reader:
        if not row:
            continue
        low, high = int(row[0], 16), int(row[1], 16)
        if high < low:
            raise MalformedRegistry(f"inverted allocation range {row[0]}-{row[1]}", source=str(path))
        rows.append((low, high, row[2]))
    rows.sort()
    for (l1, h1, _), (l2, _, _) in zip(rows, rows[1:]):
        if l2 <= h1:
            raise MalformedRegistry(f"overlapping allocation ranges at {l2:06x}", source=str(path))
    return AllocationTable(
        lows=[r[0] for r in rows],
        highs=[r[1] for r in rows],
        countries=[r[2] for r in rows],
    )


def country_of(icao24, table: AllocationTable):
    """Binary search the allocation table; None when no block contains the address."""
    address = int(icao24, 16)
    pos = bisect.bisect_right(table.lows, address) - 1
    if pos >= 0 and address <= table.highs[pos]:
        return table.countries[pos]
    return None


@dataclass
class ClassificationResult:
    icao24: str
    predicted: str
    confidence: float
    n_flights: int
    n_states: int
    country: str | None = None

    def to_dict(self):
        return {
            "icao24": self.icao24,
            "predicted": self.predicted,
            "confidence": self.confidence,
            "n_flights": self.n_flights,
            "n_states": self.n_states,
            "country": self.country,
        }


def classify_unknown(vectors, model, threshold=DEFAULT_CONFIDENCE_THRESHOLD,
                     min_flights=DEFAULT_MIN_FLIGHTS, min_states=DEFAULT_MIN_STATES,
                     allocation: AllocationTable | None = None):
    """Label unknown aircraft, bucketing low-confidence calls as Other.

    Aircraft with fewer than ``min_flights`` flights or ``min_states``
    states are excluded entirely. An eligible aircraft whose top confidence
    score falls below ``threshold`` is reported as Other.
    """
    eligible = [v for v in vectors if v.n_flights >= min_flights and v.n_states >= min_states]
    results = []
    if not eligible:
        return results
    X = np.stack([v.values for v in eligible])
    predicted, scores = model.predict_batch(X)
    for vector, label_index, row in zip(eligible, predicted, scores):
        confidence = float(row[label_index])
        if confidence < threshold:
            label = OTHER_LABEL
        else:
            label = model.class_names[label_index]
        results.append(ClassificationResult(
            icao24=vector.icao24,
            predicted=label,
            confidence=confidence,
            n_flights=vector.n_flights,
            n_states=vector.n_states,
            country=country_of(vector.icao24, allocation) if allocation is not None else None,
        ))
    return results


def unknown_summary(results):
    """Per-category counts and percentages (summing to 100) plus the Other bucket."""
    counts = {name: 0 for name in [*CATEGORY_NAMES, OTHER_LABEL]}
    for result in results:
        counts[result.predicted] += 1
    total = len(results)
    return [
        {"category": name, "count": count, "percentage": 100.0 * count / total if total else 0.0}
        for name, count in counts.items()
    ]


def write_results_csv(results, path):
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["icao24", "predicted", "confidence", "n_flights", "n_states", "country"])
        for r in results:
            writer.writerow([
                r.icao24, r.predicted, f"{r.confidence:.6f}",
                str(r.n_flights), str(r.n_states), r.country or "",
            ])


def write_results_json(results, path):
    write_json([r.to_dict() for r in results], path)


def write_unknown_summary_csv(results, path):
    rows = unknown_summary(results)
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "count", "percentage"])
        for row in rows:
            writer.writerow([row["category"], str(row["count"]), f"{row['percentage']:.4f}"])
        writer.writerow(["Sum", str(len(results)), "100.0000" if results else "0.0000"])

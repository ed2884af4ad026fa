"""Per-aircraft behavioural feature vectors: 12 groups x q proportions.

Flight-level groups quantize the multisets of flight durations and bounding
box areas; state-vector groups pool the kinematic series of all flights
before quantization. Raw latitude/longitude never enter the vector, only
the box area does.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyGroup, EmptyValues, MixedAircraft, NoPosition
from .ioutil import atomic_write
from .kinematics import derive_kinematics
from .reference import FEATURE_GROUPS, N_GROUPS, FeatureGroup, QuantileBounds, quantize_proportions

KM_PER_DEG = 111.32

_SERIES_ATTR = {
    FeatureGroup.ALTITUDE: "altitude",
    FeatureGroup.HEADING: "heading",
    FeatureGroup.X_VELOCITY: "x_vel",
    FeatureGroup.Y_VELOCITY: "y_vel",
    FeatureGroup.VERTICAL_RATE: "vert_rate",
    FeatureGroup.HEADING_SPEED: "heading_rate",
    FeatureGroup.X_ACCELERATION: "x_acc",
    FeatureGroup.Y_ACCELERATION: "y_acc",
    FeatureGroup.VERTICAL_ACCELERATION: "vert_acc",
    FeatureGroup.HEADING_ACCELERATION: "heading_acc",
}


@dataclass(slots=True)
class FeatureVector:
    """Group-major quantile proportions plus sample-size bookkeeping."""

    icao24: str
    q: int
    values: np.ndarray
    n_flights: int
    n_states: int


def flight_bbox_area(flight):
    """Equirectangular area in km^2 of the box spanned by a flight's positions."""
    lats = [s.lat for s in flight.states if s.lat is not None]
    lons = [s.lon for s in flight.states if s.lon is not None]
    if not lats:
        raise NoPosition(f"flight of {flight.icao24} has no positional state")
    dlat = max(lats) - min(lats)
    dlon = max(lons) - min(lons)
    mean_lat = (max(lats) + min(lats)) / 2.0
    return (dlat * KM_PER_DEG) * (dlon * KM_PER_DEG * math.cos(math.radians(mean_lat)))


def group_value_multisets(flights):
    """Collect each feature group's raw value multiset over a flight list.

    Flights without any positional state contribute no bounding-box sample;
    series groups pool samples across flights.
    """
    durations = np.array([float(f.duration) for f in flights])
    bbox = []
    for flight in flights:
        try:
            bbox.append(flight_bbox_area(flight))
        except NoPosition:
            continue
    series = [derive_kinematics(f) for f in flights]
    multisets = {
        FeatureGroup.DURATION: durations,
        FeatureGroup.BOUNDING_BOX: np.array(bbox, dtype=float),
    }
    for group, attr in _SERIES_ATTR.items():
        parts = [getattr(s, attr) for s in series]
        parts = [p for p in parts if p.size]
        multisets[group] = np.concatenate(parts) if parts else np.empty(0)
    return multisets


def extract_features(flights, bounds: QuantileBounds):
    """Build one aircraft's feature vector against learned quantile bounds.

    Raises :class:`EmptyGroup` when any group has zero derivable samples;
    such aircraft are ineligible rather than silently zero-filled, since a
    zero-filled slice would break the unit-sum invariant.
    """
    if not flights:
        raise EmptyValues("need at least one flight")
    icao24 = flights[0].icao24
    for flight in flights:
        if flight.icao24 != icao24:
            raise MixedAircraft(f"expected only {icao24}, saw {flight.icao24}")
    multisets = group_value_multisets(flights)
    parts = []
    for group in FEATURE_GROUPS:
        values = multisets[group]
        if values.size == 0:
            raise EmptyGroup(group.value)
        parts.append(quantize_proportions(values, bounds.boundaries[group]))
    return FeatureVector(
        icao24=icao24,
        q=bounds.q,
        values=np.concatenate(parts),
        n_flights=len(flights),
        n_states=sum(len(f.states) for f in flights),
    )


def feature_names(q):
    return [f"f_{i}" for i in range(1, N_GROUPS * q + 1)]


def group_of_index(index, q):
    """Feature group owning the 0-based feature-vector index."""
    return FEATURE_GROUPS[index // q]


def write_features_csv(path, vectors):
    """Feature matrix CSV: ``icao24,n_flights,n_states,f_1,...,f_{12q}``."""
    vectors = list(vectors)
    if not vectors:
        raise EmptyValues("no feature vectors to write")
    q = vectors[0].q
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["icao24", "n_flights", "n_states", *feature_names(q)])
        for vec in vectors:
            writer.writerow([
                vec.icao24,
                str(vec.n_flights),
                str(vec.n_states),
                *(str(float(v)) for v in vec.values),
            ])


def read_features_csv(path):
    """Load feature vectors; q is inferred from the column count."""
    from .errors import MalformedHeader

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["icao24", "n_flights", "n_states"]:
            raise MalformedHeader("not a feature matrix CSV")
        n_features = len(header) - 3
        if n_features <= 0 or n_features % N_GROUPS:
            raise MalformedHeader(f"feature column count {n_features} is not a multiple of {N_GROUPS}")
        q = n_features // N_GROUPS
        if header[3:] != feature_names(q):
            raise MalformedHeader("feature columns are misnamed or out of order")
        vectors = []
        for row in reader:
            if not row:
                continue
            vectors.append(FeatureVector(
                icao24=row[0],
                q=q,
                values=np.array([float(v) for v in row[3:]], dtype=float),
                n_flights=int(row[1]),
                n_states=int(row[2]),
            ))
        return vectors

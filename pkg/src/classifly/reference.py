"""Population-level quantile bounds learned from a reference sample.

Quantiles use the nearest-rank (ceiling) definition with no interpolation:
boundary ``j`` of ``q`` is the empirical quantile at probability ``j/q``.
Bin assignment sends a value to the smallest bin whose boundary is >= the
value, so repeated boundaries from degenerate distributions collapse mass
into the lowest implicated bin.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyGroup, EmptyValues, InvalidQ
from .ioutil import read_json, write_json

DEFAULT_FLIGHT_CAP = 25


class FeatureGroup(enum.Enum):
    """The twelve behavioural feature groups, in feature-vector layout order."""

    DURATION = "Duration"
    BOUNDING_BOX = "BoundingBox"
    ALTITUDE = "Altitude"
    HEADING = "Heading"
    X_VELOCITY = "XVelocity"
    Y_VELOCITY = "YVelocity"
    VERTICAL_RATE = "VerticalRate"
    HEADING_SPEED = "HeadingSpeed"
    X_ACCELERATION = "XAcceleration"
    Y_ACCELERATION = "YAcceleration"
    VERTICAL_ACCELERATION = "VerticalAcceleration"
    HEADING_ACCELERATION = "HeadingAcceleration"


FEATURE_GROUPS = tuple(FeatureGroup)
N_GROUPS = len(FEATURE_GROUPS)


@dataclass
class QuantileBounds:
    """Learned per-group bin boundaries; ``q - 1`` non-decreasing reals each."""

    q: int
    boundaries: dict[FeatureGroup, np.ndarray]

    def to_dict(self):
        return {
            "q": int(self.q),
            "groups": {g.value: [float(v) for v in self.boundaries[g]] for g in FEATURE_GROUPS},
        }

    @classmethod
    def from_dict(cls, payload):
        q = int(payload["q"])
        if q < 2:
            raise InvalidQ(f"q must be >= 2, got {q}")
        groups = payload.get("groups", {})
        boundaries = {}
        for group in FEATURE_GROUPS:
            if group.value not in groups:
                raise EmptyGroup(group.value)
            values = np.asarray(groups[group.value], dtype=float)
            if values.size != q - 1 or np.any(np.diff(values) < 0):
                raise InvalidQ(f"group {group.value} needs {q - 1} non-decreasing boundaries")
            boundaries[group] = values
        return cls(q=q, boundaries=boundaries)

    def save(self, path):
        write_json(self.to_dict(), path)

    @classmethod
    def load(cls, path):
        return cls.from_dict(read_json(path))


def learn_quantile_bounds(values_by_group, q):
    """Learn nearest-rank quantile boundaries for every feature group.

    ``values_by_group`` maps each :class:`FeatureGroup` to a non-empty
    multiset of reals in the group's native units.
    """
    if not isinstance(q, int) or q < 2:
        raise InvalidQ(f"q must be an integer >= 2, got {q!r}")
    probabilities = np.arange(1, q) / q
    boundaries = {}
    for group in FEATURE_GROUPS:
        values = np.asarray(values_by_group.get(group, ()), dtype=float)
        if values.size == 0:
            raise EmptyGroup(group.value)
        boundaries[group] = np.quantile(values, probabilities, method="inverted_cdf").astype(float)
    return QuantileBounds(q=q, boundaries=boundaries)


def quantize_proportions(values, boundaries):
    """Proportion of ``values`` falling into each of the q quantile bins.

    Value ``v`` goes to the smallest bin ``j`` with ``v <= boundary_j``,
    else the last bin. Proportions sum to 1.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyValues("cannot quantize an empty multiset")
    boundaries = np.asarray(boundaries, dtype=float)
    if boundaries.size and np.any(np.diff(boundaries) < 0):
        raise ValueError("boundaries must be non-decreasing")
    q = boundaries.size + 1
    bins = np.searchsorted(boundaries, values, side="left")
    counts = np.bincount(bins, minlength=q)
    return counts / values.size


def build_reference_values(flight_groups, cap=DEFAULT_FLIGHT_CAP, sample_size=None, seed=0):
    """Pool per-group value multisets over a reference population.

    ``flight_groups`` yields ``(icao24, flights)`` pairs; the first ``cap``
    flights of each aircraft contribute. With ``sample_size`` set, aircraft
    are reservoir-sampled (deterministic under ``seed`` and input order).
    """
    from . import features  # deferred: features depends on this module

    rng = np.random.default_rng(seed)
    kept: list[dict] = []
    for index, (_, flights) in enumerate(flight_groups):
        capped = flights[:cap] if cap is not None else flights
        if not capped:
            continue
        multisets = features.group_value_multisets(capped)
        if sample_size is None or len(kept) < sample_size:
            kept.append(multisets)
        else:
            slot = int(rng.integers(index + 1))
            if slot < sample_size:
                kept[slot] = multisets
    pooled = {}
    for group in FEATURE_GROUPS:
        parts = [m[group] for m in kept if m[group].size]
        pooled[group] = np.concatenate(parts) if parts else np.empty(0)
    return pooled

"""Deterministic synthetic-fleet generator for desk-scale validation.

Categories are modelled as mixtures over a shared library of mission
profiles (straight cruise, low-altitude work, circling orbit, racetrack,
aerobatic sortie, ...). Every flight draws one mission from its category's
mixture, then draws cruise altitude, base speed and duration from that
mission's ranges. Because the profiles themselves are shared across
categories, a single flight is genuinely ambiguous; the category only
becomes identifiable from the distribution over many flights, which is
what gives the minimum-flight threshold its bite.

Trajectories are sampled at 1 Hz with small Gaussian jitter on every
channel so quantile features never degenerate. Flights end below the
arrival altitude and are separated by gaps longer than the segmentation
threshold, so segmentation recovers the generated flight count exactly.
No aerodynamic realism is attempted or needed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArchetype
from .ingest import STATE_HEADER, StateVector, format_state_row
from .ioutil import atomic_write, read_json
from .pipeline import Category, parse_category

PATH_TEMPLATES = ("straight", "circling", "sortie", "shuttle")

_MIN_GAP_S = 650
_MAX_GAP_S = 2400
_BASE_TIME = 1_600_000_000
_ICAO_BASE = 0xF10000  # outside the bundled allocation ranges
_DEFAULT_REGION = {"lat": [35.0, 55.0], "lon": [-5.0, 25.0]}


@dataclass
class MissionProfile:
    """One flight-generating regime: path template plus parameter ranges."""

    path: str
    duration_s: tuple[float, float]
    altitude_m: tuple[float, float]
    speed_ms: tuple[float, float]
    turn_rate_dps: float
    accel_sigma_ms2: float

    def validate(self, label=""):
        if self.path not in PATH_TEMPLATES:
            raise InvalidArchetype(f"{label}: unknown path template {self.path!r}")
        for name, (lo, hi) in (("duration_s", self.duration_s),
                               ("altitude_m", self.altitude_m),
                               ("speed_ms", self.speed_ms)):
            if not (0 < lo <= hi):
                raise InvalidArchetype(f"{label}: bad {name} range ({lo}, {hi})")
        if self.duration_s[0] < 10:
            raise InvalidArchetype(f"{label}: flights must last at least 10 s")
        if self.turn_rate_dps < 0 or self.accel_sigma_ms2 < 0:
            raise InvalidArchetype(f"{label}: negative rate profile")
        return self


@dataclass
class CategoryArchetype:
    """A category's behaviour: mission profiles and their mixture weights."""

    category: Category
    missions: list[MissionProfile]
    weights: list[float]

    def validate(self):
        if not self.missions or len(self.missions) != len(self.weights):
            raise InvalidArchetype(f"{self.category.value}: missions and weights disagree")
        if any(w <= 0 for w in self.weights):
            raise InvalidArchetype(f"{self.category.value}: mixture weights must be positive")
        total = float(sum(self.weights))
        self.weights = [w / total for w in self.weights]
        for mission in self.missions:
            mission.validate(self.category.value)
        return self


def _mission_from_dict(payload, label=""):
    try:
        return MissionProfile(
            path=payload["path"],
            duration_s=tuple(payload["duration_s"]),
            altitude_m=tuple(payload["altitude_m"]),
            speed_ms=tuple(payload["speed_ms"]),
            turn_rate_dps=float(payload["turn_rate_dps"]),
            accel_sigma_ms2=float(payload["accel_sigma_ms2"]),
        ).validate(label)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArchetype(f"{label}: bad mission definition: {exc}") from exc


def _archetype_from_dict(payload, library):
    category = parse_category(payload.get("category"))
    if category is None:
        raise InvalidArchetype(f"unknown category {payload.get('category')!r}")
    if "mix" in payload:
        missions = []
        weights = []
        for name, weight in payload["mix"].items():
            if name not in library:
                raise InvalidArchetype(f"{category.value}: mission {name!r} not in library")
            missions.append(library[name])
            weights.append(float(weight))
        return CategoryArchetype(category, missions, weights).validate()
    # Flat form: the archetype itself is a single mission profile.
    mission = _mission_from_dict(payload, category.value)
    return CategoryArchetype(category, [mission], [1.0]).validate()


def load_archetypes(path=None):
    """Archetype config JSON; defaults to the bundled mission-mixture config."""
    if path is None:
        from importlib.resources import files
        import json

        payload = json.loads(files("classifly").joinpath("data/default_archetypes.json")
                             .read_text(encoding="utf-8"))
    else:
        payload = read_json(path)
    library = {
        name: _mission_from_dict(spec, name)
        for name, spec in payload.get("missions", {}).items()
    }
    archetypes = [_archetype_from_dict(entry, library) for entry in payload.get("archetypes", [])]
    if not archetypes:
        raise InvalidArchetype("archetype list is empty")
    region = payload.get("region", _DEFAULT_REGION)
    return archetypes, region


def _heading_rates(mission: MissionProfile, n, rng):
    """Per-second turn rates in deg/s for one flight."""
    jitter = max(0.05, 0.25 * mission.turn_rate_dps)
    if mission.path == "straight":
        return rng.normal(0.0, jitter, n)
    if mission.path == "circling":
        lead = max(3, int(0.12 * n))
        direction = 1.0 if rng.random() < 0.5 else -1.0
        return np.concatenate([
            rng.normal(0.0, jitter, lead),
            direction * mission.turn_rate_dps + rng.normal(0.0, jitter, n - lead),
        ])
    if mission.path == "sortie":
        rates = np.empty(0)
        while rates.size < n:
            straight = rng.normal(0.0, jitter, int(rng.integers(4, 15)))
            direction = 1.0 if rng.random() < 0.5 else -1.0
            magnitude = mission.turn_rate_dps * rng.uniform(0.5, 1.3)
            turn = direction * magnitude + rng.normal(0.0, jitter, int(rng.integers(3, 9)))
            rates = np.concatenate([rates, straight, turn])
        return rates[:n]
    # shuttle: racetrack legs joined by same-direction 180 degree turns
    turn_len = max(4, n // 12)
    leg_len = max(6, n // 4)
    direction = 1.0 if rng.random() < 0.5 else -1.0
    turn_rate = 180.0 / turn_len
    jitter = max(jitter, 0.1)
    rates = np.empty(0)
    while rates.size < n:
        leg = rng.normal(0.0, jitter, leg_len)
        turn = direction * turn_rate + rng.normal(0.0, jitter, turn_len)
        rates = np.concatenate([rates, leg, turn])
    return rates[:n]


def _altitude_profile(mission: MissionProfile, n, rng):
    cruise = rng.uniform(*mission.altitude_m)
    start = rng.uniform(250.0, 550.0)
    end = rng.uniform(250.0, 550.0)
    climb = max(2, int(0.15 * n))
    descend = max(2, int(0.15 * n))
    hold = n - climb - descend
    if hold < 1:
        climb = descend = max(1, n // 3)
        hold = n - climb - descend
    wander = np.cumsum(rng.normal(0.0, 2.0, hold)) if hold > 0 else np.empty(0)
    profile = np.concatenate([
        np.linspace(start, cruise, climb, endpoint=False),
        cruise + wander,
        np.linspace(cruise + (wander[-1] if hold > 0 else 0.0), end, descend),
    ])
    return profile[:n]


def _flight_states(mission: MissionProfile, icao24, t0, region, rng):
    n = int(rng.integers(int(mission.duration_s[0]), int(mission.duration_s[1]) + 1))
    times = t0 + np.arange(n)

    base_speed = rng.uniform(*mission.speed_ms)
    speed = base_speed + np.cumsum(rng.normal(0.0, mission.accel_sigma_ms2, n))
    speed = np.clip(speed + rng.normal(0.0, 0.3, n), 2.0, None)

    heading = rng.uniform(0.0, 360.0) + np.cumsum(_heading_rates(mission, n, rng))
    heading = (heading + rng.normal(0.0, 0.2, n)) % 360.0

    altitude = _altitude_profile(mission, n, rng)
    vert_rate = np.gradient(altitude) + rng.normal(0.0, 0.1, n)
    altitude = altitude + rng.normal(0.0, 3.0, n)

    heading_rad = np.radians(heading)
    lat0 = rng.uniform(*region["lat"])
    lon0 = rng.uniform(*region["lon"])
    step_north = speed * np.cos(heading_rad) / 111_320.0
    step_east = speed * np.sin(heading_rad) / (111_320.0 * np.cos(np.radians(lat0)))
    lat = lat0 + np.concatenate([[0.0], np.cumsum(step_north)[:-1]])
    lon = lon0 + np.concatenate([[0.0], np.cumsum(step_east)[:-1]])
    lat = lat + rng.normal(0.0, 1e-5, n)
    lon = lon + rng.normal(0.0, 1e-5, n)

    return [
        StateVector(
            icao24=icao24,
            time=int(times[i]),
            lat=float(lat[i]),
            lon=float(lon[i]),
            baro_alt=float(altitude[i]),
            ground_speed=float(speed[i]),
            heading=float(heading[i]),
            vert_rate=float(vert_rate[i]),
        )
        for i in range(n)
    ]


def _draw_mission(arch: CategoryArchetype, rng):
    index = int(rng.choice(len(arch.missions), p=arch.weights))
    return arch.missions[index]


def aircraft_states(arch: CategoryArchetype, icao24, flights, rng, region=None):
    """All states of one synthetic aircraft, flights separated by >600 s gaps."""
    region = region or _DEFAULT_REGION
    states = []
    t_next = _BASE_TIME + int(rng.integers(0, 86_400))
    for _ in range(flights):
        flight_states = _flight_states(_draw_mission(arch, rng), icao24, t_next, region, rng)
        states.extend(flight_states)
        t_next = flight_states[-1].time + int(rng.integers(_MIN_GAP_S, _MAX_GAP_S))
    return states


@dataclass
class FleetSummary:
    n_aircraft: int
    n_flights: int
    n_states: int
    per_category: dict[str, int]

    def to_dict(self):
        return {
            "n_aircraft": self.n_aircraft,
            "n_flights": self.n_flights,
            "n_states": self.n_states,
            "per_category": self.per_category,
        }


def generate_fleet(archetypes, aircraft_per_category, flights_per_aircraft, seed,
                   states_path, truth_path, region=None):
    """Write a labelled synthetic fleet as state-vector and truth CSVs.

    Fully deterministic under ``seed``: every aircraft draws from its own
    spawned child generator, so per-aircraft generation can be parallelized
    without changing the output.
    """
    if aircraft_per_category < 1 or flights_per_aircraft < 1:
        raise InvalidArchetype("aircraft and flight counts must be >= 1")
    for arch in archetypes:
        arch.validate()
    region = region or _DEFAULT_REGION

    total_aircraft = len(archetypes) * aircraft_per_category
    children = np.random.SeedSequence(seed).spawn(total_aircraft)
    summary = FleetSummary(0, 0, 0, {a.category.value: 0 for a in archetypes})

    with atomic_write(states_path, newline="") as states_fh, \
            atomic_write(truth_path, newline="") as truth_fh:
        states_writer = csv.writer(states_fh)
        states_writer.writerow(STATE_HEADER)
        truth_writer = csv.writer(truth_fh)
        truth_writer.writerow(["icao24", "category"])
        index = 0
        for arch in archetypes:
            for _ in range(aircraft_per_category):
                icao24 = format(_ICAO_BASE + index, "06x")
                rng = np.random.default_rng(children[index])
                t_next = _BASE_TIME + int(rng.integers(0, 86_400))
                for _flight in range(flights_per_aircraft):
                    flight_states = _flight_states(_draw_mission(arch, rng), icao24,
                                                   t_next, region, rng)
                    states_writer.writerows(format_state_row(s) for s in flight_states)
                    t_next = flight_states[-1].time + int(rng.integers(_MIN_GAP_S, _MAX_GAP_S))
                    summary.n_flights += 1
                    summary.n_states += len(flight_states)
                truth_writer.writerow([icao24, arch.category.value])
                summary.n_aircraft += 1
                summary.per_category[arch.category.value] += 1
                index += 1
    return summary

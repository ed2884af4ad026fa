"""Shared builders for tests."""

from __future__ import annotations

import numpy as np

from classifly.ingest import Flight, StateVector


def make_state(icao24="abc123", time=0, lat=None, lon=None, baro_alt=None,
               ground_speed=None, heading=None, vert_rate=None):
    return StateVector(icao24, time, lat, lon, baro_alt, ground_speed, heading, vert_rate)


def make_flight(specs, icao24="abc123", t0=0, dt=1):
    """Build a flight from per-state dicts; missing keys stay null."""
    states = []
    for i, spec in enumerate(specs):
        states.append(make_state(icao24=icao24, time=t0 + i * dt, **spec))
    return Flight.from_states(states)


def level_flight(n=10, icao24="abc123", t0=0, lat0=47.0, lon0=8.0, alt=10_000.0,
                 speed=200.0, heading=90.0, vert_rate=0.0):
    """Constant-everything flight moving east at 1 Hz."""
    states = []
    for i in range(n):
        states.append(make_state(
            icao24=icao24, time=t0 + i,
            lat=lat0, lon=lon0 + i * 1e-4,
            baro_alt=alt, ground_speed=speed, heading=heading, vert_rate=vert_rate,
        ))
    return Flight.from_states(states)


def random_flight(rng, icao24="abc123", t0=0, n=None):
    """Fully populated random flight; every group derivable."""
    n = n or int(rng.integers(8, 30))
    states = []
    lat = float(rng.uniform(-60, 60))
    lon = float(rng.uniform(-150, 150))
    for i in range(n):
        states.append(make_state(
            icao24=icao24, time=t0 + i,
            lat=lat + i * 1e-4, lon=lon + i * 1e-4,
            baro_alt=float(rng.uniform(500, 12_000)),
            ground_speed=float(rng.uniform(30, 300)),
            heading=float(rng.uniform(0, 360)),
            vert_rate=float(rng.normal(0, 5)),
        ))
    return Flight.from_states(states)


def random_aircraft(rng, icao24="abc123", n_flights=3):
    flights = []
    t0 = 0
    for _ in range(n_flights):
        flight = random_flight(rng, icao24=icao24, t0=t0)
        flights.append(flight)
        t0 = flight.end_time + 700
    return flights


def random_dataset(rng, n=60, d=6, n_classes=3, class_names=None, spread=4.0):
    """Gaussian blobs, one per class."""
    from classifly.models import Dataset

    centers = rng.normal(0.0, spread, size=(n_classes, d))
    X = np.empty((n, d))
    y = np.empty(n, dtype=np.int64)
    for i in range(n):
        cls = i % n_classes
        X[i] = centers[cls] + rng.normal(0.0, 1.0, d)
        y[i] = cls
    names = class_names or [f"c{i}" for i in range(n_classes)]
    return Dataset(X, y, names)


def kkt_violations(model, data, class_index, slack=1e-2):
    """Direct soft-margin KKT evaluation from first principles.

    alpha = 0   -> y f(x) >= 1 - slack
    0 < a < C   -> |y f(x) - 1| <= slack
    alpha = C   -> y f(x) <= 1 + slack
    """
    from classifly.models.svm import _cubic_gram

    alphas = model.training_alphas[class_index]
    y_bin = np.where(data.y == class_index, 1.0, -1.0)
    Xs = model.standardizer.transform(data.X)
    sv = model.sv_x[class_index]
    coef = model.sv_coef[class_index]
    decision = _cubic_gram(Xs, sv, model.kernel_dim) @ coef + model.bias[class_index]
    violations = 0
    C = model.C
    for a, yf in zip(alphas, y_bin * decision):
        if a <= 1e-12 and yf < 1.0 - slack:
            violations += 1
        elif 1e-12 < a < C - 1e-12 and abs(yf - 1.0) > slack:
            violations += 1
        elif a >= C - 1e-12 and yf > 1.0 + slack:
            violations += 1
    return violations

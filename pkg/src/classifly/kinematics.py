"""Velocity, acceleration and heading-rate series derived from flights.

Conventions: heading 0 deg is north, clockwise positive; x points east and
y north, so ``x_vel = speed * sin(heading)`` and ``y_vel = speed *
cos(heading)``. Heading differences take the shortest signed angle in
(-180, 180]. Finite differences are only formed across sample pairs with
``0 < dt <= max_dt_s`` so coverage holes never fabricate accelerations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_DT_S = 10.0


@dataclass(slots=True)
class KinematicSeries:
    """Per-flight derived series plus pass-through message content."""

    x_vel: np.ndarray
    y_vel: np.ndarray
    heading_rate: np.ndarray
    x_acc: np.ndarray
    y_acc: np.ndarray
    vert_acc: np.ndarray
    heading_acc: np.ndarray
    altitude: np.ndarray
    heading: np.ndarray
    vert_rate: np.ndarray


def _field_array(states, getter):
    return np.array([math.nan if getter(s) is None else getter(s) for s in states], dtype=float)


def _diff_series(values, times, max_dt_s):
    """Finite-difference a (values, times) series under the dt rule."""
    if values.size < 2:
        return np.empty(0), np.empty(0)
    dt = np.diff(times)
    ok = (dt > 0) & (dt <= max_dt_s)
    rate = np.diff(values)[ok] / dt[ok]
    return rate, times[:-1][ok]


def shortest_angle_deg(from_deg, to_deg):
    """Signed shortest rotation from one heading to another, in (-180, 180]."""
    delta = np.asarray(to_deg, dtype=float) - np.asarray(from_deg, dtype=float)
    delta = delta % 360.0
    return np.where(delta > 180.0, delta - 360.0, delta)


def derive_kinematics(flight, max_dt_s=DEFAULT_MAX_DT_S):
    """Derive all kinematic series for one flight.

    Empty series are legal outputs: a sample pair only contributes where
    the needed fields are present and the dt rule holds.
    """
    states = flight.states
    times = np.array([s.time for s in states], dtype=float)
    speed = _field_array(states, lambda s: s.ground_speed)
    heading = _field_array(states, lambda s: s.heading)
    altitude = _field_array(states, lambda s: s.baro_alt)
    vert_rate = _field_array(states, lambda s: s.vert_rate)

    vel_ok = np.isfinite(speed) & np.isfinite(heading)
    heading_rad = np.radians(heading[vel_ok])
    x_vel = speed[vel_ok] * np.sin(heading_rad)
    y_vel = speed[vel_ok] * np.cos(heading_rad)
    vel_times = times[vel_ok]

    # Heading rate pairs adjacent states directly; both endpoints need a heading.
    dt = np.diff(times)
    pair_ok = np.isfinite(heading[:-1]) & np.isfinite(heading[1:]) & (dt > 0) & (dt <= max_dt_s)
    turns = shortest_angle_deg(heading[:-1][pair_ok], heading[1:][pair_ok])
    heading_rate = turns / dt[pair_ok]
    heading_rate_times = times[:-1][pair_ok]

    vr_ok = np.isfinite(vert_rate)
    x_acc, _ = _diff_series(x_vel, vel_times, max_dt_s)
    y_acc, _ = _diff_series(y_vel, vel_times, max_dt_s)
    vert_acc, _ = _diff_series(vert_rate[vr_ok], times[vr_ok], max_dt_s)
    heading_acc, _ = _diff_series(heading_rate, heading_rate_times, max_dt_s)

    return KinematicSeries(
        x_vel=x_vel,
        y_vel=y_vel,
        heading_rate=heading_rate,
        x_acc=x_acc,
        y_acc=y_acc,
        vert_acc=vert_acc,
        heading_acc=heading_acc,
        altitude=altitude[np.isfinite(altitude)],
        heading=heading[np.isfinite(heading)],
        vert_rate=vert_rate[vr_ok],
    )

"""State-vector CSV ingest and flight segmentation.

Input files follow the OpenSky state-vector dump convention: one row per
observation with the header ``icao24,time,lat,lon,baroaltitude,velocity,
heading,vertrate``. Units are degrees, meters, m/s, degrees clockwise from
north and m/s; an empty cell means the field was not reported.

An aircraft's observation stream is cut into flights wherever two
consecutive states are more than ``gap_s`` seconds apart *and* the earlier
state sits below ``arrival_alt_m`` (an arrival state). A missing altitude
never counts as "below"; the optional ``hard_gap_s`` splits unconditionally
on very long coverage holes and is disabled by default.
"""

from __future__ import annotations

import csv
import io
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError, MalformedHeader, MalformedRow, MixedAircraft, UnsortedInput
from .ioutil import atomic_write

STATE_HEADER = ("icao24", "time", "lat", "lon", "baroaltitude", "velocity", "heading", "vertrate")
FLIGHT_HEADER = ("icao24", "flight") + STATE_HEADER[1:]

DEFAULT_GAP_S = 600.0
DEFAULT_ARRIVAL_ALT_M = 2500.0

_ICAO24_RE = re.compile(r"[0-9a-f]{6}\Z")


@dataclass(slots=True)
class StateVector:
    """One timestamped kinematic observation of one aircraft.

    Fields are validated at parse time, not construction time, to keep
    million-row ingests cheap.
    """

    icao24: str
    time: int
    lat: float | None = None
    lon: float | None = None
    baro_alt: float | None = None
    ground_speed: float | None = None
    heading: float | None = None
    vert_rate: float | None = None


@dataclass(slots=True)
class Flight:
    """A time-ordered run of one aircraft's state vectors between arrivals."""

    icao24: str
    states: list[StateVector]
    start_time: int
    end_time: int
    duration: int

    @classmethod
    def from_states(cls, states):
        if not states:
            raise DataError("a flight needs at least one state")
        return cls(
            icao24=states[0].icao24,
            states=list(states),
            start_time=states[0].time,
            end_time=states[-1].time,
            duration=states[-1].time - states[0].time,
        )


def _opt_float(field):
    if field == "":
        return None
    value = float(field)
    if not math.isfinite(value):
        raise ValueError(field)
    return value


def _parse_time(field):
    try:
        return int(field)
    except ValueError:
        value = float(field)
        if not value.is_integer():
            raise
        return int(value)


def _row_to_state(row, icao_cache):
    """Validate one CSV row; return a StateVector or None when unusable."""
    if len(row) != 8:
        return None
    icao = icao_cache.get(row[0])
    if icao is None:
        candidate = row[0].strip().lower()
        if not _ICAO24_RE.fullmatch(candidate):
            return None
        icao = sys.intern(candidate)
        icao_cache[row[0]] = icao
    try:
        time = _parse_time(row[1])
        lat = _opt_float(row[2])
        lon = _opt_float(row[3])
        baro_alt = _opt_float(row[4])
        ground_speed = _opt_float(row[5])
        heading = _opt_float(row[6])
        vert_rate = _opt_float(row[7])
    except ValueError:
        return None
    if (lat is None) != (lon is None):
        return None
    if lat is not None and not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        return None
    if ground_speed is not None and ground_speed < 0.0:
        return None
    if heading is not None:
        heading = heading % 360.0
    return StateVector(icao, time, lat, lon, baro_alt, ground_speed, heading, vert_rate)


def _open_source(source):
    """Return (text file object, needs_close) for a path, bytes, or stream."""
    if isinstance(source, (str, Path)):
        return open(source, encoding="utf-8", newline=""), True
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8")), False
    if hasattr(source, "read"):
        probe = source.read(0)
        if isinstance(probe, bytes):
            return io.TextIOWrapper(source, encoding="utf-8", newline=""), False
        return source, False
    raise TypeError(f"unsupported source type: {type(source)!r}")


def _check_header(row, expected):
    if row is None:
        raise MalformedHeader("empty input, expected header " + ",".join(expected))
    cleaned = [cell.strip().lstrip("﻿") for cell in row]
    if cleaned != list(expected):
        raise MalformedHeader(f"unexpected header {','.join(cleaned)!r}, expected {','.join(expected)!r}")


def parse_state_vectors(source, strict=False):
    """Parse a state-vector CSV dump into validated records.

    ``source`` may be a filesystem path, raw bytes, or an open file object.
    Rows failing type or bounds validation are skipped and counted; with
    ``strict`` the first bad row aborts with :class:`MalformedRow` carrying
    its line number (the header is line 1).

    Returns ``(states, rejected_rows)``. Input order is preserved.
    """
    fh, needs_close = _open_source(source)
    try:
        reader = csv.reader(fh)
        _check_header(next(reader, None), STATE_HEADER)
        states = []
        rejected = 0
        icao_cache = {}
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            state = _row_to_state(row, icao_cache)
            if state is None:
                if strict:
                    raise MalformedRow(f"invalid state-vector row at line {line_number}", line_number)
                rejected += 1
            else:
                states.append(state)
        return states, rejected
    finally:
        if needs_close:
            fh.close()


def group_by_aircraft(states):
    """Group states by transponder address, each group time-sorted (stable)."""
    groups: dict[str, list[StateVector]] = {}
    for state in states:
        groups.setdefault(state.icao24, []).append(state)
    for group in groups.values():
        group.sort(key=lambda s: s.time)
    return dict(sorted(groups.items()))


def segment_flights(states, gap_s=DEFAULT_GAP_S, arrival_alt_m=DEFAULT_ARRIVAL_ALT_M, hard_gap_s=None):
    """Split one aircraft's time-sorted states into flights.

    A boundary is placed after state ``i`` iff the gap to state ``i+1``
    exceeds ``gap_s`` and state ``i``'s altitude is known and below
    ``arrival_alt_m``. Equal timestamps are deduplicated keeping the first
    occurrence; decreasing timestamps raise :class:`UnsortedInput`.
    """
    if not states:
        return []
    icao = states[0].icao24
    for state in states:
        if state.icao24 != icao:
            raise MixedAircraft(f"expected only {icao}, saw {state.icao24}")
    deduped = [states[0]]
    for state in states[1:]:
        dt = state.time - deduped[-1].time
        if dt < 0:
            raise UnsortedInput(f"time went backwards at t={state.time}")
        if dt == 0:
            continue
        deduped.append(state)

    times = np.array([s.time for s in deduped], dtype=np.int64)
    alts = np.array([math.nan if s.baro_alt is None else s.baro_alt for s in deduped], dtype=float)
    dt = np.diff(times)
    below = ~np.isnan(alts[:-1]) & (alts[:-1] < arrival_alt_m)
    cut = (dt > gap_s) & below
    if hard_gap_s is not None:
        cut |= dt > hard_gap_s

    flights = []
    start = 0
    for stop in [*(np.flatnonzero(cut) + 1), len(deduped)]:
        flights.append(Flight.from_states(deduped[start:stop]))
        start = stop
    return flights


def format_state_row(state):
    """Fixed-precision CSV cells for one state (shared by synth and segment)."""
    return [
        state.icao24,
        str(state.time),
        "" if state.lat is None else f"{state.lat:.6f}",
        "" if state.lon is None else f"{state.lon:.6f}",
        "" if state.baro_alt is None else f"{state.baro_alt:.2f}",
        "" if state.ground_speed is None else f"{state.ground_speed:.3f}",
        "" if state.heading is None else f"{state.heading:.3f}",
        "" if state.vert_rate is None else f"{state.vert_rate:.3f}",
    ]


def write_flights_csv(path, flight_groups: Iterable[tuple[str, list[Flight]]]):
    """Write segmented flights, grouped by aircraft, with a per-aircraft flight index."""
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FLIGHT_HEADER)
        for _, flights in flight_groups:
            for index, flight in enumerate(flights):
                for state in flight.states:
                    cells = format_state_row(state)
                    writer.writerow([cells[0], str(index), *cells[1:]])


def iter_flight_groups(path) -> Iterator[tuple[str, list[Flight]]]:
    """Stream ``(icao24, flights)`` groups from a flights CSV.

    The file must keep each aircraft's rows contiguous (as written by
    :func:`write_flights_csv`); a re-appearing aircraft raises.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), FLIGHT_HEADER)
        icao_cache: dict[str, str] = {}
        seen: set[str] = set()
        current: str | None = None
        flights: list[list[StateVector]] = []
        current_index = -1
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 9:
                raise MalformedRow(f"invalid flights row at line {line_number}", line_number)
            state = _row_to_state([row[0], *row[2:]], icao_cache)
            if state is None:
                raise MalformedRow(f"invalid flights row at line {line_number}", line_number)
            flight_index = int(row[1])
            if state.icao24 != current:
                if current is not None:
                    yield current, [Flight.from_states(s) for s in flights]
                if state.icao24 in seen:
                    raise DataError(f"aircraft {state.icao24} appears in two separate blocks")
                seen.add(state.icao24)
                current = state.icao24
                flights = []
                current_index = -1
            if flight_index != current_index:
                flights.append([])
                current_index = flight_index
            flights[-1].append(state)
        if current is not None:
            yield current, [Flight.from_states(s) for s in flights]


def read_flights_csv(path) -> dict[str, list[Flight]]:
    """Load a whole flights CSV into memory (small corpora only)."""
    return dict(iter_flight_groups(path))

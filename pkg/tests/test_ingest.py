import io
from pathlib import Path

import numpy as np
import pytest

from classifly.errors import (
    MalformedHeader,
    MalformedRow,
    MixedAircraft,
    UnsortedInput,
)
from classifly.ingest import (
    STATE_HEADER,
    Flight,
    group_by_aircraft,
    iter_flight_groups,
    parse_state_vectors,
    read_flights_csv,
    segment_flights,
    write_flights_csv,
)
from helpers import make_state, random_flight

DATA = Path(__file__).parent / "data"
HEADER = ",".join(STATE_HEADER)


def _parse(text, **kw):
    return parse_state_vectors(io.StringIO(text), **kw)


class TestParse:
    def test_fixture_file_field_exact(self):
        states, rejected = parse_state_vectors(DATA / "states_small.csv")
        assert rejected == 0
        assert len(states) == 3
        first = states[0]
        assert first.icao24 == "abc123"
        assert first.time == 1000
        assert first.lat == 47.5
        assert first.lon == 8.5
        assert first.baro_alt == 10000.0
        assert first.ground_speed == 250.0
        assert first.heading == 90.0
        assert first.vert_rate == 0.5
        assert states[1].time == 1001 and states[1].lon == 8.5002
        third = states[2]
        assert third.icao24 == "def456"
        assert third.lat is None and third.lon is None
        assert third.baro_alt is None and third.heading is None
        assert third.ground_speed == 200.0 and third.vert_rate is None

    def test_empty_file_with_header(self):
        assert _parse(HEADER + "\n") == ([], 0)

    def test_missing_header_raises(self):
        with pytest.raises(MalformedHeader):
            _parse("icao24,time\nabc123,1\n")
        with pytest.raises(MalformedHeader):
            _parse("")

    def test_out_of_bounds_lat_rejected(self):
        states, rejected = _parse(HEADER + "\nabc123,1,91.0,8.0,,,,\n")
        assert states == [] and rejected == 1

    def test_lat_without_lon_rejected(self):
        states, rejected = _parse(HEADER + "\nabc123,1,47.0,,,,,\n")
        assert states == [] and rejected == 1

    def test_negative_speed_rejected(self):
        _, rejected = _parse(HEADER + "\nabc123,1,,,,-3.0,,\n")
        assert rejected == 1

    def test_bad_icao_and_bad_number_rejected(self):
        text = HEADER + "\nzz,1,,,,,,\nabc123,notatime,,,,,,\nabc123,2,,,,,x,\n"
        states, rejected = _parse(text)
        assert states == [] and rejected == 3

    def test_heading_normalized(self):
        text = HEADER + "\nabc123,1,,,,,360.0,\nabc123,2,,,,,-10.0,\n"
        states, rejected = _parse(text)
        assert rejected == 0
        assert states[0].heading == 0.0
        assert states[1].heading == 350.0

    def test_uppercase_icao_normalized(self):
        states, _ = _parse(HEADER + "\nABC123,1,,,,,,\n")
        assert states[0].icao24 == "abc123"

    def test_strict_mode_reports_line_number(self):
        text = HEADER + "\nabc123,1,,,,,,\nabc123,bad,,,,,,\n"
        with pytest.raises(MalformedRow) as err:
            _parse(text, strict=True)
        assert err.value.line_number == 3

    def test_deterministic(self):
        text = HEADER + "\nabc123,1,47.0,8.0,100,10,5,0\nbad,row,,,,,,\n"
        assert _parse(text) == _parse(text)

    def test_group_by_aircraft_sorts(self):
        states = [make_state("bbb222", 5), make_state("abc123", 2), make_state("abc123", 1)]
        groups = group_by_aircraft(states)
        assert list(groups) == ["abc123", "bbb222"]
        assert [s.time for s in groups["abc123"]] == [1, 2]


def _states(rows, icao24="abc123"):
    return [make_state(icao24, time=t, baro_alt=alt) for t, alt in rows]


class TestSegment:
    def test_single_state(self):
        flights = segment_flights(_states([(0, 1000.0)]))
        assert len(flights) == 1
        assert flights[0].duration == 0

    def test_gap_below_altitude_splits(self):
        flights = segment_flights(_states([(0, 1000.0), (660, 1000.0)]))
        assert len(flights) == 2

    def test_gap_above_altitude_does_not_split(self):
        flights = segment_flights(_states([(0, 3000.0), (660, 3000.0)]))
        assert len(flights) == 1

    def test_null_altitude_does_not_split(self):
        flights = segment_flights(_states([(0, None), (660, None)]))
        assert len(flights) == 1

    def test_hard_gap_splits_unconditionally(self):
        rows = [(0, None), (4000, None)]
        assert len(segment_flights(_states(rows))) == 1
        assert len(segment_flights(_states(rows), hard_gap_s=3600)) == 2

    def test_exact_gap_is_not_a_split(self):
        flights = segment_flights(_states([(0, 1000.0), (600, 1000.0)]))
        assert len(flights) == 1

    def test_duplicate_timestamps_keep_first(self):
        states = [make_state(time=0, baro_alt=1.0), make_state(time=0, baro_alt=2.0),
                  make_state(time=1, baro_alt=3.0)]
        flights = segment_flights(states)
        assert [s.baro_alt for s in flights[0].states] == [1.0, 3.0]

    def test_unsorted_raises(self):
        with pytest.raises(UnsortedInput):
            segment_flights(_states([(5, None), (1, None)]))

    def test_mixed_aircraft_raises(self):
        with pytest.raises(MixedAircraft):
            segment_flights([make_state("abc123", 0), make_state("def456", 1)])

    def test_randomized_against_scan_oracle(self):
        # Independent one-pass oracle over (time, altitude) pairs.
        def oracle(states, gap, alt_limit):
            partitions = [[states[0]]]
            for prev, nxt in zip(states, states[1:]):
                gap_hit = (nxt.time - prev.time) > gap
                low = prev.baro_alt is not None and prev.baro_alt < alt_limit
                if gap_hit and low:
                    partitions.append([])
                partitions[-1].append(nxt)
            return partitions

        rng = np.random.default_rng(1234)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            times = np.cumsum(rng.integers(1, 900, size=n))
            states = []
            for t in times:
                alt = None if rng.random() < 0.2 else float(rng.uniform(0, 5000))
                states.append(make_state(time=int(t), baro_alt=alt))
            flights = segment_flights(states)
            expected = oracle(states, 600, 2500)
            assert [[s.time for s in f.states] for f in flights] == \
                   [[s.time for s in p] for p in expected]
            # Partition property: concatenation reproduces the input exactly.
            merged = [s for f in flights for s in f.states]
            assert merged == states
            # Boundary soundness on every adjacent flight pair.
            for a, b in zip(flights, flights[1:]):
                last = a.states[-1]
                assert b.start_time - last.time > 600
                assert last.baro_alt is not None and last.baro_alt < 2500


class TestFlightsCsv:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(7)
        groups = [
            ("abc123", [random_flight(rng, "abc123", t0=0), random_flight(rng, "abc123", t0=5000)]),
            ("def456", [random_flight(rng, "def456", t0=100)]),
        ]
        path = tmp_path / "flights.csv"
        write_flights_csv(path, groups)
        loaded = read_flights_csv(path)
        assert list(loaded) == ["abc123", "def456"]
        assert [len(f.states) for f in loaded["abc123"]] == [len(f.states) for f in groups[0][1]]
        original = groups[0][1][0].states[0]
        parsed = loaded["abc123"][0].states[0]
        assert parsed.time == original.time
        assert parsed.lat == pytest.approx(original.lat, abs=1e-6)
        assert parsed.ground_speed == pytest.approx(original.ground_speed, abs=1e-3)

    def test_flight_invariants(self):
        flight = Flight.from_states([make_state(time=3), make_state(time=9)])
        assert flight.start_time == 3 and flight.end_time == 9 and flight.duration == 6

    def test_regrouped_aircraft_rejected(self, tmp_path):
        rng = np.random.default_rng(8)
        path = tmp_path / "flights.csv"
        write_flights_csv(path, [
            ("abc123", [random_flight(rng, "abc123")]),
            ("def456", [random_flight(rng, "def456")]),
        ])
        text = path.read_text().splitlines()
        # Move one abc123 row after the def456 block to break contiguity.
        text.append(text[1])
        path.write_text("\n".join(text) + "\n")
        with pytest.raises(Exception):
            list(iter_flight_groups(path))

"""GeoJSON export of flight trajectories for external map viewers.

One LineString feature per flight (a Point when only one positional state
exists), colored from a fixed per-flight palette so individual flights of
the same aircraft are distinguishable. Classification results can be joined
in as feature properties.
"""

from __future__ import annotations

import json

from .ioutil import atomic_write

PALETTE = (
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3",
    "#ff7f00", "#a65628", "#f781bf", "#17becf",
)


def _flight_feature(flight, index, extra):
    coordinates = [
        [round(s.lon, 6), round(s.lat, 6)]
        for s in flight.states
        if s.lat is not None and s.lon is not None
    ]
    if not coordinates:
        return None
    if len(coordinates) == 1:
        geometry = {"type": "Point", "coordinates": coordinates[0]}
    else:
        geometry = {"type": "LineString", "coordinates": coordinates}
    properties = {
        "icao24": flight.icao24,
        "flight": index,
        "color": PALETTE[index % len(PALETTE)],
        "start_time": flight.start_time,
        "end_time": flight.end_time,
        "n_states": len(flight.states),
    }
    properties.update(extra)
    return {"type": "Feature", "geometry": geometry, "properties": properties}


def flights_to_geojson(flight_groups, results_by_icao24=None):
    """Build a FeatureCollection from ``(icao24, flights)`` groups.

    ``results_by_icao24`` optionally maps aircraft to classification dicts
    (predicted/confidence/country) merged into each flight's properties.
    """
    features = []
    for icao24, flights in flight_groups:
        extra = {}
        if results_by_icao24 and icao24 in results_by_icao24:
            result = results_by_icao24[icao24]
            extra = {
                "predicted": result.predicted,
                "confidence": round(result.confidence, 6),
                "country": result.country,
            }
        for index, flight in enumerate(flights):
            feature = _flight_feature(flight, index, extra)
            if feature is not None:
                features.append(feature)
    return {"type": "FeatureCollection", "features": features}


def write_geojson(obj, path):
    with atomic_write(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")

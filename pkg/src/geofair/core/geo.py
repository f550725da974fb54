"""Coordinates to continent to income proxy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from shapely.geometry import MultiPolygon, Point, Polygon
from shapely.prepared import PreparedGeometry, prep
from shapely.validation import make_valid

from .errors import ValidationError
from .models import DEFAULT_INCOME_TABLE, Continent, ContinentIncomeTable, Sample

EARTH_RADIUS_KM = 6371.0088
MONTHS_PER_YEAR = 12
POLYGON_RESOURCE = "continents.txt"


@dataclass(frozen=True)
class ContinentShape:
    continent: Continent
    geometry: PreparedGeometry
    # (n, 2) array of (lon, lat) vertices, used by the ocean fallback.
    vertices: np.ndarray


class ContinentPolygons:
    """Packaged continent outlines with point lookup.

    Points inside (or on the edge of) a polygon resolve to the first record in
    file order that covers them. Anything else, such as open ocean, resolves to
    the continent owning the nearest vertex by great-circle distance.
    """

    def __init__(self, shapes: list[ContinentShape]):
        if not shapes:
            raise ValidationError("continent polygon set is empty")
        self.shapes = shapes
        self._all_vertices = np.vstack([s.vertices for s in shapes])
        self._owners = np.concatenate(
            [np.full(len(s.vertices), index) for index, s in enumerate(shapes)]
        )

    @classmethod
    def parse(cls, text: str) -> ContinentPolygons:
        shapes = []
        seen: set[Continent] = set()
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            name, sep, body = line.partition(":")
            if not sep:
                raise ValidationError(f"polygon file line {line_no}: expected 'Name: lon lat, ...'")
            try:
                continent = Continent.parse(name.strip())
            except ValidationError as e:
                raise ValidationError(f"polygon file line {line_no}: {e}") from e
            if continent in seen:
                raise ValidationError(f"polygon file line {line_no}: duplicate {continent.value}")
            seen.add(continent)
            rings = [_parse_ring(part, line_no) for part in body.split("|")]
            geometry = make_valid(MultiPolygon([Polygon(ring) for ring in rings]))
            shapes.append(
                ContinentShape(
                    continent=continent,
                    geometry=prep(geometry),
                    vertices=np.array([v for ring in rings for v in ring], dtype=np.float64),
                )
            )
        return cls(shapes)

    def lookup(self, latitude: float, longitude: float) -> Continent:
        check_coordinates(latitude, longitude)
        point = Point(longitude, latitude)
        for shape in self.shapes:
            if shape.geometry.covers(point):
                return shape.continent
        return self.nearest_vertex_continent(latitude, longitude)

    def nearest_vertex_continent(self, latitude: float, longitude: float) -> Continent:
        distances = haversine_km(
            latitude, longitude, self._all_vertices[:, 1], self._all_vertices[:, 0]
        )
        # argmin keeps the earliest vertex on ties, so file order decides.
        return self.shapes[int(self._owners[int(np.argmin(distances))])].continent


def _parse_ring(part: str, line_no: int) -> list[tuple[float, float]]:
    ring = []
    for pair in part.split(","):
        fields = pair.split()
        if len(fields) != 2:
            raise ValidationError(f"polygon file line {line_no}: bad vertex {pair.strip()!r}")
        try:
            lon, lat = float(fields[0]), float(fields[1])
        except ValueError as e:
            raise ValidationError(f"polygon file line {line_no}: bad vertex {pair.strip()!r}") from e
        check_coordinates(lat, lon)
        ring.append((lon, lat))
    if len(ring) < 3:
        raise ValidationError(f"polygon file line {line_no}: a ring needs at least 3 vertices")
    return ring


def check_coordinates(latitude: float, longitude: float) -> None:
    if not (math.isfinite(latitude) and -90.0 <= latitude <= 90.0):
        raise ValidationError(f"latitude {latitude} outside [-90, 90]")
    if not (math.isfinite(longitude) and -180.0 <= longitude <= 180.0):
        raise ValidationError(f"longitude {longitude} outside [-180, 180]")


def haversine_km(
    lat1: float, lon1: float, lat2: np.ndarray, lon2: np.ndarray
) -> np.ndarray:
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2 - lon1)
    a = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


@lru_cache(maxsize=1)
def default_polygons() -> ContinentPolygons:
    """The polygon set shipped in ``geofair/data``."""
    text = resources.files("geofair.data").joinpath(POLYGON_RESOURCE).read_text(encoding="utf-8")
    return ContinentPolygons.parse(text)


def resolve_continent(
    latitude: float, longitude: float, geo_table: ContinentPolygons | None = None
) -> Continent:
    return (geo_table or default_polygons()).lookup(latitude, longitude)


def assign_income_from_continent(
    sample: Sample, table: ContinentIncomeTable = DEFAULT_INCOME_TABLE, override: bool = False
) -> Sample:
    """Set income to the continent's table value.

    An existing income is kept unless ``override`` is set.
    """
    if sample.continent is None:
        raise ValidationError(f"sample {sample.sample_id} has no continent to derive income from")
    if sample.income is not None and not override:
        return sample
    return sample.with_income(table.income_for(sample.continent))


def enrich_sample(
    sample: Sample,
    table: ContinentIncomeTable = DEFAULT_INCOME_TABLE,
    geo_table: ContinentPolygons | None = None,
    override_income: bool = False,
) -> Sample:
    """Fill a missing continent from coordinates, then a missing income from the table."""
    if sample.continent is None and sample.has_coordinates:
        assert sample.latitude is not None and sample.longitude is not None
        sample = sample.with_continent(
            resolve_continent(sample.latitude, sample.longitude, geo_table)
        )
    if sample.income is None or override_income:
        if sample.continent is None:
            raise ValidationError(
                f"sample {sample.sample_id} has no income, continent or coordinates"
            )
        sample = assign_income_from_continent(sample, table, override=True)
    return sample


def continent_for_income(
    income: float, table: ContinentIncomeTable = DEFAULT_INCOME_TABLE
) -> Continent:
    """Continent whose monthly GDP-per-capita proxy is nearest in log space."""
    if not (math.isfinite(income) and income > 0):
        raise ValidationError(f"income must be > 0, got {income}")
    target = math.log(income)
    return min(
        table.ranked(),
        key=lambda c: abs(math.log(table.income_for(c) / MONTHS_PER_YEAR) - target),
    )

"""Unit tests for continent lookup and income enrichment."""

import pytest

from geofair.core.errors import ValidationError
from geofair.core.geo import (
    ContinentPolygons,
    assign_income_from_continent,
    continent_for_income,
    default_polygons,
    enrich_sample,
    haversine_km,
    resolve_continent,
)
from geofair.core.models import DEFAULT_INCOME_TABLE, Continent, ContinentIncomeTable

TWO_SQUARES = """
# test outlines
Europe: 0 0, 10 0, 10 10, 0 10
Africa: 20 0, 30 0, 30 10, 20 10 | 40 0, 41 0, 41 1
"""


class TestIncomeTable:
    def test_values(self):
        assert DEFAULT_INCOME_TABLE.to_dict() == {
            "Oceania": 53220.0,
            "NorthAmerica": 49240.0,
            "Europe": 29410.0,
            "SouthAmerica": 8560.0,
            "Asia": 7350.0,
            "Africa": 1930.0,
        }

    def test_round_trip_is_exact(self):
        again = ContinentIncomeTable.from_dict(DEFAULT_INCOME_TABLE.to_dict())
        for continent in Continent:
            assert again.income_for(continent) == DEFAULT_INCOME_TABLE.income_for(continent)

    def test_needs_all_continents(self):
        with pytest.raises(ValidationError, match="missing"):
            ContinentIncomeTable.from_dict({"Europe": 1.0})

    def test_ranked_richest_first(self):
        assert DEFAULT_INCOME_TABLE.ranked()[0] is Continent.OCEANIA
        assert DEFAULT_INCOME_TABLE.ranked()[-1] is Continent.AFRICA

    @pytest.mark.parametrize("name", ["north america", "North_America", "NORTHAMERICA"])
    def test_continent_parse_is_lenient(self, name):
        assert Continent.parse(name) is Continent.NORTH_AMERICA

    def test_unknown_continent(self):
        with pytest.raises(ValidationError, match="unknown continent"):
            Continent.parse("Atlantis")


class TestPolygonFile:
    def test_inside_and_edge_points(self):
        polygons = ContinentPolygons.parse(TWO_SQUARES)
        assert polygons.lookup(5.0, 5.0) is Continent.EUROPE
        assert polygons.lookup(0.0, 10.0) is Continent.EUROPE
        assert polygons.lookup(5.0, 25.0) is Continent.AFRICA

    def test_second_ring_belongs_to_record(self):
        polygons = ContinentPolygons.parse(TWO_SQUARES)
        assert polygons.lookup(0.2, 40.5) is Continent.AFRICA

    def test_ocean_falls_back_to_nearest_vertex(self):
        polygons = ContinentPolygons.parse(TWO_SQUARES)
        assert polygons.lookup(5.0, 12.0) is Continent.EUROPE
        assert polygons.lookup(5.0, 18.0) is Continent.AFRICA

    def test_duplicate_record(self):
        with pytest.raises(ValidationError, match="line 2: duplicate Europe"):
            ContinentPolygons.parse("Europe: 0 0, 1 0, 1 1\nEurope: 2 2, 3 2, 3 3")

    def test_bad_vertex_names_line(self):
        with pytest.raises(ValidationError, match="line 1: bad vertex"):
            ContinentPolygons.parse("Asia: 0 0, 1, 1 1")

    def test_ring_needs_three_vertices(self):
        with pytest.raises(ValidationError, match="at least 3"):
            ContinentPolygons.parse("Asia: 0 0, 1 1")

    def test_empty_file(self):
        with pytest.raises(ValidationError, match="empty"):
            ContinentPolygons.parse("# nothing here\n")


class TestPackagedPolygons:
    @pytest.mark.parametrize(
        ("latitude", "longitude", "expected"),
        [
            (48.85, 2.35, Continent.EUROPE),
            (-1.29, 36.82, Continent.AFRICA),
            (39.90, 116.40, Continent.ASIA),
            (41.88, -87.63, Continent.NORTH_AMERICA),
            (-23.55, -46.63, Continent.SOUTH_AMERICA),
            (-23.70, 133.88, Continent.OCEANIA),
        ],
    )
    def test_cities(self, latitude, longitude, expected):
        assert resolve_continent(latitude, longitude) is expected

    def test_gulf_of_guinea_resolves_to_africa(self):
        assert resolve_continent(0.0, 0.0) is Continent.AFRICA

    def test_every_continent_present(self):
        assert {shape.continent for shape in default_polygons().shapes} == set(Continent)

    @pytest.mark.parametrize(("latitude", "longitude"), [(91.0, 0.0), (0.0, -181.0)])
    def test_out_of_range(self, latitude, longitude):
        with pytest.raises(ValidationError):
            resolve_continent(latitude, longitude)


class TestEnrichment:
    def test_assign_fills_missing_income(self, make_sample):
        sample = make_sample("a", None, continent=Continent.ASIA)
        assert assign_income_from_continent(sample).income == 7350.0

    def test_assign_keeps_existing_income(self, make_sample):
        sample = make_sample("a", 120.0, continent=Continent.ASIA)
        assert assign_income_from_continent(sample).income == 120.0

    def test_assign_override(self, make_sample):
        sample = make_sample("a", 120.0, continent=Continent.ASIA)
        assert assign_income_from_continent(sample, override=True).income == 7350.0

    def test_assign_needs_continent(self, make_sample):
        with pytest.raises(ValidationError, match="no continent"):
            assign_income_from_continent(make_sample("a", None))

    def test_enrich_from_coordinates(self, make_sample):
        sample = make_sample("a", None, latitude=48.85, longitude=2.35)
        enriched = enrich_sample(sample)
        assert enriched.continent is Continent.EUROPE
        assert enriched.income == 29410.0

    def test_enrich_keeps_given_continent(self, make_sample):
        sample = make_sample("a", None, latitude=48.85, longitude=2.35, continent=Continent.ASIA)
        assert enrich_sample(sample).continent is Continent.ASIA

    def test_enrich_without_any_location(self, make_sample):
        with pytest.raises(ValidationError, match="no income, continent or coordinates"):
            enrich_sample(make_sample("a", None))


class TestHelpers:
    def test_haversine_quarter_meridian(self):
        distance = haversine_km(0.0, 0.0, 90.0, 0.0)
        assert distance == pytest.approx(10007.5, rel=1e-3)

    @pytest.mark.parametrize(
        ("income", "expected"),
        [(100.0, Continent.AFRICA), (600.0, Continent.ASIA), (2500.0, Continent.EUROPE)],
    )
    def test_continent_for_income(self, income, expected):
        assert continent_for_income(income) is expected

"""Seeded synthetic-benchmark runs for GeoFair."""

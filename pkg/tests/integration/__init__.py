"""Integration tests for GeoFair."""

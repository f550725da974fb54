"""Unit tests for GeoFair."""

"""Tests for GeoFair."""

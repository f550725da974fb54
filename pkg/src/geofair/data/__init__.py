"""Bundled data files (continent polygons)."""

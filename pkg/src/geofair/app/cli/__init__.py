"""CLI adapter for GeoFair."""

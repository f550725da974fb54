"""Application layer for GeoFair."""

"""Bundled dispersion tables."""

"""Numerical laboratory for a chi2 nanoantenna photon-pair source.

Linear coupled-dipole scattering and multipole analysis, sum-frequency generation,
the SFG-to-SPDC rate correspondence, and coincidence-counting statistics.
"""
from __future__ import annotations

__version__ = "0.1.0"

"""Cartesian multipole decomposition of induced dipole distributions and resonance fitting.

Moments are taken about the lattice centroid with the long-wavelength formulas
(lowest-order retardation correction on the electric dipole):

    p   = sum P + k^2/10 sum [ (r.P) r - 2 r^2 P ]
    m   = -(i k / 2) sum r x P                      (Gaussian units)
    Q_e = S + S^T - 2/3 tr(S) I,  S = sum r P^T
    Q_m = sym( sum r (r x P)^T )

Partial cross sections, for an incident amplitude E0:

    C_ED = 8 pi k^4 |p|^2 / (3 E0^2)      C_MD = 8 pi k^4 |m|^2 / (3 E0^2)
    C_EQ = pi k^6 sum|Q_e|^2 / (5 E0^2)   C_MQ = 4 pi k^8 sum|Q_m|^2 / (45 E0^2)
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .cda import EPS0, DipoleLattice, FieldMap, ScatteringSpectrum
from .errors import FitError

__all__ = [
    "MultipoleMoments",
    "ResonanceFit",
    "decompose",
    "moments_from_dipoles",
    "fit_resonance",
    "lorentzian",
    "dipole_components",
]

_C = 299792458.0


@dataclass(frozen=True)
class MultipoleMoments:
    """Dipole moments in SI (p in C m, m in A m^2); quadrupoles in nm^4 V/m."""

    p: np.ndarray
    m: np.ndarray
    q_e: np.ndarray | None
    q_m: np.ndarray | None
    wavelength: float
    partial_q: dict = field(default_factory=dict)
    partial_c: dict = field(default_factory=dict)


def moments_from_dipoles(positions, dipoles, k):
    """Gaussian-unit moments (p, m, Q_e, Q_m) of point dipoles about the origin."""
    r = np.asarray(positions, dtype=float)
    P = np.asarray(dipoles, dtype=complex)
    r2 = np.einsum("ij,ij->i", r, r)
    rp = np.einsum("ij,ij->i", r, P)
    p = P.sum(axis=0) + k**2 / 10.0 * (np.sum(rp[:, None] * r, axis=0) - 2.0 * np.sum(r2[:, None] * P, axis=0))
    rxp = np.cross(r, P)
    m = -0.5j * k * rxp.sum(axis=0)
    s = r.T @ P
    q_e = s + s.T - 2.0 / 3.0 * np.trace(s) * np.eye(3)
    n = r.T @ rxp
    q_m = 0.5 * (n + n.T)
    return p, m, q_e, q_m


def _partials(p, m, q_e, q_m, k, e0sq):
    return {
        "ED": 8.0 * np.pi / 3.0 * k**4 * float(np.sum(np.abs(p) ** 2)) / e0sq,
        "MD": 8.0 * np.pi / 3.0 * k**4 * float(np.sum(np.abs(m) ** 2)) / e0sq,
        "EQ": np.pi / 5.0 * k**6 * float(np.sum(np.abs(q_e) ** 2)) / e0sq,
        "MQ": 4.0 * np.pi / 45.0 * k**8 * float(np.sum(np.abs(q_m) ** 2)) / e0sq,
    }


def decompose(lattice: DipoleLattice, polarizations: FieldMap, origin=None) -> MultipoleMoments:
    """Multipole moments and partial efficiencies (normalised to pi r^2) of a solved lattice."""
    if len(polarizations) != lattice.n_sites:
        raise ValueError(f"polarization map has {len(polarizations)} sites, lattice has {lattice.n_sites}")
    k = lattice.k
    pos = lattice.positions
    origin = pos.mean(axis=0) if origin is None else np.asarray(origin, dtype=float)
    p, m, q_e, q_m = moments_from_dipoles(pos - origin, polarizations.values, k)
    e0sq = polarizations.amplitude**2
    if e0sq > 0:
        partial_c = _partials(p, m, q_e, q_m, k, e0sq)
    else:
        partial_c = dict.fromkeys(("ED", "MD", "EQ", "MQ"), 0.0)
    area = lattice.geometry.cross_section
    partial_q = {key: val / area for key, val in partial_c.items()}
    to_si = 4.0 * np.pi * EPS0 * lattice.background_index**2 * 1e-27
    omega = 2.0 * np.pi * _C / (lattice.wavelength * 1e-9)
    p_si = to_si * p
    # m = -(i w / 2) sum r x P with r in metres
    m_si = -0.5j * omega * to_si * 1e-9 * np.cross(pos - origin, polarizations.values).sum(axis=0)
    return MultipoleMoments(p_si, m_si, q_e, q_m, lattice.wavelength, partial_q, partial_c)


def dipole_components(moments: MultipoleMoments):
    """(|m_x|, |m_y|, |m_z|, |p_x|, |p_y|, |p_z|)."""
    m = np.abs(np.asarray(moments.m, dtype=complex))
    p = np.abs(np.asarray(moments.p, dtype=complex))
    return tuple(float(v) for v in (*m, *p))


# -- resonance fitting -----------------------------------------------------------


def lorentzian(lam, lam0, fwhm, amplitude, baseline):
    return amplitude / (1.0 + ((lam - lam0) / (0.5 * fwhm)) ** 2) + baseline


@dataclass(frozen=True)
class ResonanceFit:
    lambda0: float
    fwhm: float
    q: float
    amplitude: float
    baseline: float
    residual: float
    channel: str = "total"

    def to_dict(self) -> dict:
        return {
            "lambda0_nm": self.lambda0,
            "fwhm_nm": self.fwhm,
            "q": self.q,
            "residual": self.residual,
            "amplitude": self.amplitude,
            "baseline": self.baseline,
            "channel": self.channel,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _channel(spectrum: ScatteringSpectrum, channel: str):
    if channel.lower() == "total":
        return spectrum.column("q_sca")
    if channel.upper() in ("ED", "MD", "EQ", "MQ"):
        return spectrum.column(channel.upper())
    raise ValueError(f"unknown channel {channel!r}; expected total, ED or MD")


def fit_resonance(spectrum, channel: str = "total", window=None, values=None) -> ResonanceFit:
    """Least-squares Lorentzian plus constant baseline; Q = lambda0 / FWHM.

    ``spectrum`` is a ScatteringSpectrum, or a wavelength array together with
    ``values``. ``window`` = (lo, hi) restricts the fit to a sub-range. The start
    point is fixed by the discrete maximum, so the result is deterministic.
    """
    if isinstance(spectrum, ScatteringSpectrum):
        lam = spectrum.wavelengths
        y = _channel(spectrum, channel)
    else:
        if values is None:
            raise ValueError("values are required when a wavelength array is passed")
        lam = np.asarray(spectrum, dtype=float)
        y = np.asarray(values, dtype=float)
    if window is not None:
        sel = (lam >= window[0]) & (lam <= window[1])
        lam, y = lam[sel], y[sel]
    if lam.size < 7:
        raise FitError(f"need at least 7 points for a resonance fit, got {lam.size}")
    if not np.all(np.isfinite(y)):
        raise FitError("spectrum contains non-finite values")
    order = np.argsort(lam)
    lam, y = lam[order], y[order]
    i0 = int(np.argmax(y))
    if i0 == 0 or i0 == lam.size - 1 or not (y[i0] > y[0] and y[i0] > y[-1]):
        raise FitError("no local maximum inside the fit window")

    base0 = float(min(y[0], y[-1]))
    amp0 = float(y[i0] - base0)
    half = base0 + 0.5 * amp0
    left = lam[: i0 + 1][y[: i0 + 1] <= half]
    right = lam[i0:][y[i0:] <= half]
    lo = left[-1] if left.size else lam[0]
    hi = right[0] if right.size else lam[-1]
    fwhm0 = float(max(hi - lo, 2.0 * np.min(np.diff(lam))))
    scale = max(amp0, 1e-300)
    span = lam[-1] - lam[0]

    def resid(v):
        return (lorentzian(lam, *v) - y) / scale

    x0 = np.array([lam[i0], fwhm0, amp0, base0])
    bounds = ([lam[0], 1e-6 * span, 0.0, -np.inf], [lam[-1], 100.0 * span, np.inf, np.inf])
    sol = least_squares(resid, x0, bounds=bounds, x_scale=[fwhm0, fwhm0, scale, scale], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    lam0, fwhm, amp, base = (float(v) for v in sol.x)
    rms = float(np.sqrt(np.mean((lorentzian(lam, *sol.x) - y) ** 2)))
    if not sol.success:
        raise FitError(f"Lorentzian fit did not converge: {sol.message}", residual=rms)
    if not (lam[0] <= lam0 <= lam[-1]) or fwhm <= 0:
        raise FitError("fitted resonance lies outside the window", residual=rms)
    return ResonanceFit(lam0, fwhm, lam0 / fwhm, amp, base, rms, channel)

"""Lorenz-Mie series for a homogeneous sphere (validation oracle for the CDA solver)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MieResult", "mie_coefficients", "mie", "mie_reference"]


@dataclass(frozen=True)
class MieResult:
    x: float
    m: complex
    an: np.ndarray
    bn: np.ndarray
    q_sca: float
    q_ext: float

    @property
    def q_abs(self) -> float:
        return self.q_ext - self.q_sca

    def partial(self, kind: str, order: int = 1) -> float:
        """Scattering efficiency of one multipole channel, e.g. ('ED', 1) -> a1."""
        coeff = {"E": self.an, "M": self.bn}[kind[0].upper()]
        if order > coeff.size:
            return 0.0
        n = order
        return float(2.0 / self.x**2 * (2 * n + 1) * abs(coeff[n - 1]) ** 2)


def mie_coefficients(x: float, m: complex, nstop: int | None = None):
    """Scattering coefficients a_n, b_n (n = 1..nstop), Bohren & Huffman recurrences.

    The logarithmic derivative D_n(mx) is obtained by downward recurrence, the
    Riccati-Bessel functions of x by upward recurrence.
    """
    if x <= 0:
        raise ValueError("size parameter must be positive")
    m = complex(m)
    if nstop is None:
        nstop = int(np.ceil(x + 4.0 * x ** (1.0 / 3.0) + 2.0))
    mx = m * x
    nmx = int(max(nstop, abs(mx))) + 16
    d = np.zeros(nmx + 1, dtype=complex)
    for n in range(nmx, 0, -1):
        d[n - 1] = n / mx - 1.0 / (d[n] + n / mx)

    an = np.empty(nstop, dtype=complex)
    bn = np.empty(nstop, dtype=complex)
    psi0, psi1 = np.cos(x), np.sin(x)
    chi0, chi1 = -np.sin(x), np.cos(x)
    xi1 = complex(psi1, -chi1)
    for n in range(1, nstop + 1):
        psi = (2 * n - 1) / x * psi1 - psi0
        chi = (2 * n - 1) / x * chi1 - chi0
        xi = complex(psi, -chi)
        ta = d[n] / m + n / x
        tb = d[n] * m + n / x
        an[n - 1] = (ta * psi - psi1) / (ta * xi - xi1)
        bn[n - 1] = (tb * psi - psi1) / (tb * xi - xi1)
        psi0, psi1 = psi1, psi
        chi0, chi1 = chi1, chi
        xi1 = xi
    return an, bn


def mie(radius: float, m: complex, wavelength: float, medium_index: float = 1.0) -> MieResult:
    """Efficiencies of a sphere of ``radius`` (same length unit as ``wavelength``)."""
    if radius <= 0 or wavelength <= 0:
        raise ValueError("radius and wavelength must be positive")
    x = 2.0 * np.pi * medium_index * radius / wavelength
    m = complex(m)
    if m == 1:
        z = np.zeros(1, dtype=complex)
        return MieResult(x, m, z, z, 0.0, 0.0)
    an, bn = mie_coefficients(x, m)
    n = np.arange(1, an.size + 1)
    q_sca = 2.0 / x**2 * np.sum((2 * n + 1) * (np.abs(an) ** 2 + np.abs(bn) ** 2))
    q_ext = 2.0 / x**2 * np.sum((2 * n + 1) * (an + bn).real)
    return MieResult(x, m, an, bn, float(q_sca), float(q_ext))


def mie_reference(radius: float, m: complex, wavelength: float) -> tuple[float, float]:
    """(Q_sca, Q_ext) of a sphere; ``m`` is the index relative to the background."""
    res = mie(radius, m, wavelength)
    return res.q_sca, res.q_ext

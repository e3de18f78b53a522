"""Jones vectors for beams travelling along -z.

Handedness: R = (x - i y)/sqrt(2), L = (x + i y)/sqrt(2) for propagation along -z
(time dependence exp(-i w t)).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PolarizationState", "as_polarization", "STANDARD_STATES"]

_NORM_TOL = 1e-12
_S = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class PolarizationState:
    jones: tuple[complex, complex]
    label: str = "custom"

    def __post_init__(self):
        j = tuple(complex(v) for v in self.jones)
        if len(j) != 2:
            raise ValueError("a Jones vector has two components")
        norm = np.sqrt(abs(j[0]) ** 2 + abs(j[1]) ** 2)
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"Jones vector must have unit norm, got |j| = {norm:.15g}")
        object.__setattr__(self, "jones", j)

    @property
    def vector(self) -> np.ndarray:
        """Lab-frame 3-vector (x, y, 0)."""
        return np.array([self.jones[0], self.jones[1], 0.0], dtype=complex)

    @classmethod
    def from_label(cls, label: str) -> "PolarizationState":
        try:
            return STANDARD_STATES[label.upper()]
        except KeyError:
            raise ValueError(f"unknown polarization label {label!r}; expected H, V, R or L") from None


STANDARD_STATES = {
    "H": PolarizationState((1.0, 0.0), "H"),
    "V": PolarizationState((0.0, 1.0), "V"),
    "R": PolarizationState((_S, -1j * _S), "R"),
    "L": PolarizationState((_S, 1j * _S), "L"),
}


def as_polarization(value) -> PolarizationState:
    """Accept a PolarizationState, a label, or a 2-component Jones vector."""
    if isinstance(value, PolarizationState):
        return value
    if isinstance(value, str):
        return PolarizationState.from_label(value)
    return PolarizationState(tuple(value))

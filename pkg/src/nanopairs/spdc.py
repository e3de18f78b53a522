"""Pair rates from the SFG-SPDC correspondence.

    dN/dt = Phi_p * 2 pi Xi * lambda_p^4 / (lambda_s^3 lambda_i^3) * c dlambda / lambda_s^2

with the pump flux Phi_p in W/m^2 and the SFG efficiency Xi = eta A_s A_i in m^4/W,
which makes the right-hand side a rate in Hz.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "SpdcPrediction",
    "C_LIGHT",
    "check_energy",
    "complete_wavelengths",
    "pair_rate",
    "predict",
    "emission_map",
    "normalized_rate",
    "NORMALIZATION_RULE",
]

C_LIGHT = 299792458.0
_ENERGY_TOL = 1e-6
NORMALIZATION_RULE = "rate / (pump_power_W * length_m), length = nanocylinder height unless overridden"


def check_energy(lambda_p: float, lambda_s: float, lambda_i: float, tol: float = _ENERGY_TOL) -> None:
    """Raise unless 1/lambda_s + 1/lambda_i = 1/lambda_p to ``tol`` relative."""
    if min(lambda_p, lambda_s, lambda_i) <= 0:
        raise ValueError("wavelengths must be positive")
    lhs = 1.0 / lambda_s + 1.0 / lambda_i
    rhs = 1.0 / lambda_p
    if abs(lhs - rhs) > tol * rhs:
        implied = 1.0 / lhs
        raise ValueError(
            f"energy conservation violated: 1/{lambda_s:g} + 1/{lambda_i:g} corresponds to a pump at "
            f"{implied:.4f} nm, not {lambda_p:g} nm"
        )


def complete_wavelengths(lambda_p: float, lambda_s: float | None = None, lambda_i: float | None = None):
    """Fill a missing signal/idler wavelength from energy conservation (degenerate if both missing)."""
    if lambda_s is None and lambda_i is None:
        return lambda_p, 2.0 * lambda_p, 2.0 * lambda_p
    if lambda_s is None or lambda_i is None:
        known = lambda_s if lambda_s is not None else lambda_i
        if known <= lambda_p:
            raise ValueError("signal/idler wavelength must exceed the pump wavelength")
        other = 1.0 / (1.0 / lambda_p - 1.0 / known)
        return (lambda_p, known, other) if lambda_s is not None else (lambda_p, other, known)
    check_energy(lambda_p, lambda_s, lambda_i)
    return lambda_p, lambda_s, lambda_i


def pair_rate(xi: float, lambda_p: float, lambda_s: float, lambda_i: float, delta_lambda: float, phi_p: float) -> float:
    """Generated pair rate (Hz). Wavelengths and bandwidth in nm, Xi in m^4/W, Phi_p in W/m^2."""
    check_energy(lambda_p, lambda_s, lambda_i)
    if not delta_lambda > 0:
        raise ValueError("bandwidth must be > 0")
    if xi < 0 or phi_p < 0:
        raise ValueError("Xi and pump flux must be non-negative")
    lp, ls, li, dl = (v * 1e-9 for v in (lambda_p, lambda_s, lambda_i, delta_lambda))
    return float(phi_p * 2.0 * np.pi * xi * lp**4 / (ls**3 * li**3) * C_LIGHT * dl / ls**2)


def normalized_rate(rate: float, pump_power: float, length: float = 400e-9) -> float:
    """rate / (pump_power * length), in Hz/(W m)."""
    if not (pump_power > 0 and length > 0):
        raise ValueError("pump power and normalisation length must be > 0")
    if rate < 0:
        raise ValueError("rate must be non-negative")
    return float(rate / (pump_power * length))


@dataclass(frozen=True)
class SpdcPrediction:
    pair_rate_hz: float
    lambda_p_nm: float
    lambda_s_nm: float
    lambda_i_nm: float
    delta_lambda_nm: float
    xi_m4_per_w: float
    pump_power_w: float
    spot_area_m2: float
    phi_p_w_per_m2: float
    normalized_rate_hz_per_w_m: float
    normalization_length_m: float
    normalization_rule: str = NORMALIZATION_RULE
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def predict(
    eta: float = 1.8e-5,
    pump_power: float = 2e-3,
    spot_diameter_m: float = 2e-6,
    lambda_p: float = 785.0,
    lambda_s: float | None = None,
    lambda_i: float | None = None,
    delta_lambda: float = 150.0,
    sfg_spot_diameter_m: float | None = None,
    length: float = 400e-9,
) -> SpdcPrediction:
    """Pair-rate prediction from a per-watt SFG efficiency ``eta``.

    Xi = eta A_s A_i with A = pi (D/2)^2 for both SFG beams, and Phi_p = P / A_p.
    """
    lp, ls, li = complete_wavelengths(lambda_p, lambda_s, lambda_i)
    a_p = np.pi * (spot_diameter_m / 2.0) ** 2
    d_sfg = spot_diameter_m if sfg_spot_diameter_m is None else sfg_spot_diameter_m
    a_sfg = np.pi * (d_sfg / 2.0) ** 2
    xi = eta * a_sfg * a_sfg
    phi = pump_power / a_p
    rate = pair_rate(xi, lp, ls, li, delta_lambda, phi)
    return SpdcPrediction(
        pair_rate_hz=rate,
        lambda_p_nm=lp,
        lambda_s_nm=ls,
        lambda_i_nm=li,
        delta_lambda_nm=delta_lambda,
        xi_m4_per_w=xi,
        pump_power_w=pump_power,
        spot_area_m2=a_p,
        phi_p_w_per_m2=phi,
        normalized_rate_hz_per_w_m=normalized_rate(rate, pump_power, length),
        normalization_length_m=length,
        notes={"eta_per_w": eta, "sfg_spot_area_m2": a_sfg},
    )


def emission_map(intensity) -> dict:
    """Relative SPDC emission map proportional to the reversed-SFG far-field intensity.

    Accepts a 2-D image or a FarFieldMap; returns the map normalised to unit sum
    together with an explicit ``units`` tag.
    """
    arr = getattr(intensity, "intensity", intensity)
    arr = np.array(arr, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("emission intensities must be finite and non-negative")
    total = arr.sum()
    rel = arr / total if total > 0 else arr
    return {"map": rel, "units": "relative (unit sum)", "total_input": float(total)}

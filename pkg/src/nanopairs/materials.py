"""Linear dispersion tables and the zincblende second-order susceptibility."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "DispersionModel",
    "Chi2Tensor",
    "load_table",
    "algaas",
    "constant_index",
    "refractive_index",
    "chi2_tensor",
    "rotation_z",
]

_BUNDLED = "algaas_x018.txt"
_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class DispersionModel:
    """Tabulated complex refractive index with monotone-cubic interpolation.

    Real and imaginary parts are interpolated separately (PCHIP), which keeps the
    curve free of overshoot between samples, so a table with ``Im(n) >= 0`` stays
    passive everywhere in its span.
    """

    material_id: str
    wavelengths: np.ndarray
    n: np.ndarray
    _re: PchipInterpolator = field(init=False, repr=False, compare=False)
    _im: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lam = np.asarray(self.wavelengths, dtype=float)
        n = np.asarray(self.n, dtype=complex)
        if lam.ndim != 1 or lam.shape != n.shape:
            raise ValueError("wavelengths and n must be 1-D arrays of equal length")
        if lam.size < 2:
            raise ValueError("a dispersion table needs at least 2 samples")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("table wavelengths must be strictly increasing")
        if np.any(n.imag < 0):
            raise ValueError("Im(n) < 0 in table: medium must be passive")
        lam.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "wavelengths", lam)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "_re", PchipInterpolator(lam, n.real, extrapolate=False))
        object.__setattr__(self, "_im", PchipInterpolator(lam, n.imag, extrapolate=False))

    @property
    def span(self) -> tuple[float, float]:
        return float(self.wavelengths[0]), float(self.wavelengths[-1])

    def __call__(self, wavelength):
        return refractive_index(self, wavelength)


def refractive_index(model: DispersionModel, wavelength):
    """Complex index of ``model`` at ``wavelength`` (nm, scalar or array)."""
    lam = np.asarray(wavelength, dtype=float)
    lo, hi = model.span
    if np.any(lam < lo) or np.any(lam > hi) or np.any(~np.isfinite(lam)):
        raise ValueError(
            f"wavelength {wavelength} nm outside the {model.material_id} table span "
            f"[{lo:g}, {hi:g}] nm"
        )
    out = model._re(lam) + 1j * np.maximum(model._im(lam), 0.0)
    return complex(out) if out.ndim == 0 else out


def load_table(path, material_id: str | None = None) -> DispersionModel:
    """Read a ``wavelength_nm n_real n_imag`` text table (``#`` starts a comment)."""
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
        rows.append([float(v) for v in parts])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows)
    return DispersionModel(material_id or path.stem, arr[:, 0], arr[:, 1] + 1j * arr[:, 2])


def algaas() -> DispersionModel:
    """The bundled Al0.18Ga0.82As table (600-1800 nm)."""
    ref = resources.files("nanopairs.data").joinpath(_BUNDLED)
    with resources.as_file(ref) as p:
        return load_table(p, material_id="Al0.18Ga0.82As")


def constant_index(n, material_id: str = "constant", span=(100.0, 10000.0)) -> DispersionModel:
    """Non-dispersive medium, handy for spheres and tests."""
    n = complex(n)
    return DispersionModel(material_id, np.array(span, dtype=float), np.array([n, n]))


# -- second-order susceptibility -------------------------------------------


@dataclass(frozen=True)
class Chi2Tensor:
    """Rank-3 chi2 in pm/V, already expressed in lab axes."""

    components: np.ndarray
    crystal_rotation: np.ndarray

    def __post_init__(self):
        c = np.array(self.components, dtype=float)
        r = np.array(self.crystal_rotation, dtype=float)
        if c.shape != (3, 3, 3) or r.shape != (3, 3):
            raise ValueError("chi2 components must be 3x3x3 and rotation 3x3")
        c.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "components", c)
        object.__setattr__(self, "crystal_rotation", r)

    @property
    def si(self) -> np.ndarray:
        """Components in m/V."""
        return self.components * 1e-12


def _check_rotation(rotation) -> np.ndarray:
    r = np.asarray(rotation, dtype=float)
    if r.shape != (3, 3):
        raise ValueError("rotation must be a 3x3 matrix")
    if np.max(np.abs(r @ r.T - np.eye(3))) > _ORTHO_TOL:
        raise ValueError("rotation matrix is not orthonormal (|R R^T - I| > 1e-9)")
    return r


def chi2_tensor(d14: float = 100.0, rotation=None) -> Chi2Tensor:
    """Zincblende chi2 with chi_xyz = 2*d14 in the crystal frame, rotated to the lab.

    Only the six components with three distinct indices are nonzero in the crystal
    frame. Each index transforms with ``rotation`` (crystal -> lab).
    """
    r = np.eye(3) if rotation is None else _check_rotation(rotation)
    crystal = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        crystal[i, j, k] = 2.0 * d14
    lab = np.einsum("ai,bj,ck,ijk->abc", r, r, r, crystal)
    return Chi2Tensor(lab, r)


def rotation_z(angle: float) -> np.ndarray:
    """Active rotation by ``angle`` radians about the lab z axis."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

"""Coupled-dipole (discrete-dipole) scattering solver.

Lengths are in nm, fields in V/m. Induced dipoles are kept in "polarizability
volume" units (nm^3 * V/m), i.e. Gaussian-style ``p = alpha E`` with ``alpha`` in
nm^3; :func:`dipoles_si` converts to C m. Time dependence is exp(-i w t) and the
incident beam travels along -z.
"""
from __future__ import annotations

import csv
import functools
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, bicgstab, gcrotmk, gmres

from . import _accel
from .errors import ConvergenceError, DiscretizationError
from .kernels import _green_blocks, _mirror_signs, green_apply, mirror_block
from .materials import DispersionModel, algaas, constant_index
from .mie import mie_reference
from .polarization import PolarizationState, as_polarization

__all__ = [
    "Geometry",
    "DipoleLattice",
    "FieldMap",
    "Excitation",
    "CrossSections",
    "SpectrumEntry",
    "ScatteringSpectrum",
    "InteractionOperator",
    "EPS0",
    "VALIDITY_LIMIT",
    "ldr_polarizability",
    "max_spacing",
    "default_spacing",
    "discretize",
    "incident_field",
    "solve_polarizations",
    "cross_sections",
    "scattering_spectrum",
    "dipoles_si",
    "internal_field",
    "mie_reference",
]

EPS0 = 8.8541878128e-12
VALIDITY_LIMIT = 0.5
# lattice dispersion relation coefficients
_B1, _B2, _B3 = -1.891531, 0.1648469, -1.7700004
# Krylov restart parameters for GCROT(m, k)
_GCROT_M, _GCROT_K = 40, 20
_NM3 = 1e-27
_KINDS = ("incident", "internal", "induced-dipole", "nonlinear-polarization")


# -- geometry -----------------------------------------------------------------


@dataclass(frozen=True)
class Geometry:
    """Cylinder (axis along z) or sphere, centred at the origin."""

    shape: str = "cylinder"
    diameter: float = 430.0
    height: float = 400.0
    radius_nm: float | None = None
    material_id: str = "AlGaAs"

    def __post_init__(self):
        if self.shape not in ("cylinder", "sphere"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.shape == "sphere":
            if self.radius_nm is None or not self.radius_nm > 0:
                raise ValueError("sphere radius must be > 0")
        elif not (self.diameter > 0 and self.height > 0):
            raise ValueError("cylinder diameter and height must be > 0")

    @classmethod
    def cylinder(cls, diameter: float = 430.0, height: float = 400.0, material_id: str = "AlGaAs"):
        return cls("cylinder", float(diameter), float(height), None, material_id)

    @classmethod
    def sphere(cls, radius: float, material_id: str = "constant"):
        return cls("sphere", 2.0 * radius, 2.0 * radius, float(radius), material_id)

    @property
    def radius(self) -> float:
        return self.radius_nm if self.shape == "sphere" else self.diameter / 2.0

    @property
    def volume(self) -> float:
        r = self.radius
        if self.shape == "sphere":
            return 4.0 / 3.0 * np.pi * r**3
        return np.pi * r**2 * self.height

    @property
    def cross_section(self) -> float:
        """Geometric normalisation area pi r^2 (nm^2)."""
        return np.pi * self.radius**2

    def grid_counts(self, a: float) -> tuple[int, int, int]:
        if self.shape == "sphere":
            n = int(round(2.0 * self.radius / a))
            return n, n, n
        nxy = int(round(self.diameter / a))
        return nxy, nxy, int(round(self.height / a))

    def contains(self, pts, tol: float = 1e-9) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        r = self.radius * (1 + tol)
        if self.shape == "sphere":
            return np.einsum("ij,ij->i", pts, pts) <= r * r
        rho2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        return (rho2 <= r * r) & (np.abs(pts[:, 2]) <= self.height / 2.0 * (1 + tol))

    def as_dict(self) -> dict:
        if self.shape == "sphere":
            return {"shape": "sphere", "radius_nm": self.radius, "material_id": self.material_id}
        return {
            "shape": "cylinder",
            "diameter_nm": self.diameter,
            "height_nm": self.height,
            "material_id": self.material_id,
        }


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DipoleLattice:
    """Cubic dipole array clipped to a shape, at one wavelength.

    ``spacing`` is the effective dipole spacing d = (V/N)^(1/3): the sites are
    selected on a grid of pitch ``nominal_spacing`` and the array is then rescaled
    so that N d^3 equals the shape volume. Polarizabilities are isotropic scalars.
    """

    geometry: Geometry
    spacing: float
    nominal_spacing: float
    positions: np.ndarray
    alpha: np.ndarray
    wavelength: float
    background_index: float
    refractive_index: complex
    grid_shape: tuple[int, int, int]
    grid_index: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.positions.shape[0]

    @property
    def k(self) -> float:
        """Wavenumber in the background medium (1/nm)."""
        return 2.0 * np.pi * self.background_index / self.wavelength

    @property
    def relative_index(self) -> complex:
        return self.refractive_index / self.background_index

    @property
    def validity(self) -> float:
        """|m| k d, required to stay below 0.5."""
        return abs(self.relative_index) * self.k * self.spacing

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @functools.cached_property
    def operator(self) -> "InteractionOperator":
        return InteractionOperator(self)

    def with_wavelength(self, wavelength: float, dispersion: DispersionModel) -> "DipoleLattice":
        return discretize(
            self.geometry, self.nominal_spacing, wavelength, dispersion, self.background_index
        )


@dataclass(frozen=True, eq=False)
class FieldMap:
    """Complex 3-vector per lattice site.

    ``kind`` is one of ``incident``, ``internal`` (macroscopic field inside the
    particle), ``induced-dipole`` or ``nonlinear-polarization``.
    ``amplitude`` is the reference incident amplitude |E0| (V/m) used to normalise
    cross sections; ``info`` carries solver diagnostics.
    """

    values: np.ndarray
    wavelength: float
    kind: str
    amplitude: float = 1.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("field values must have shape (N, 3)")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def scaled(self, factor: complex) -> "FieldMap":
        return FieldMap(self.values * factor, self.wavelength, self.kind, self.amplitude * abs(factor), dict(self.info))


# -- discretisation -------------------------------------------------------------


def ldr_polarizability(m: complex, k: float, d: float) -> complex:
    """Lattice-dispersion-relation polarizability (nm^3) for propagation along a lattice axis.

    For incidence along z the polarization-dependent LDR term S vanishes.
    """
    eps = complex(m) ** 2
    a_cm = 3.0 * d**3 / (4.0 * np.pi) * (eps - 1.0) / (eps + 2.0)
    kd = k * d
    corr = (_B1 + eps * _B2) * kd**2 - 2.0j / 3.0 * kd**3
    return a_cm / (1.0 + a_cm / d**3 * corr)


def max_spacing(wavelength: float, n: complex, background_index: float = 1.0) -> float:
    """Largest spacing that satisfies |m| k a <= 0.5."""
    m = abs(complex(n)) / background_index
    k = 2.0 * np.pi * background_index / wavelength
    return VALIDITY_LIMIT / (m * k)


def default_spacing(wavelengths, dispersion: DispersionModel, background_index: float = 1.0) -> float:
    """15 nm for windows at or above 1400 nm; otherwise the largest admissible whole-nm spacing."""
    lam = np.atleast_1d(np.asarray(wavelengths, dtype=float))
    if lam.min() >= 1400.0:
        return 15.0
    amax = min(max_spacing(l, dispersion(l), background_index) for l in lam)
    # keep a margin for the volume-matching rescale
    return float(max(1.0, np.floor(amax * 0.995)))


def discretize(
    geometry: Geometry,
    a: float,
    wavelength: float,
    dispersion: DispersionModel | complex | float,
    background_index: float = 1.0,
) -> DipoleLattice:
    """Clip a cubic lattice of pitch ``a`` to ``geometry`` and attach LDR polarizabilities."""
    if not a > 0:
        raise ValueError("lattice spacing must be > 0")
    if not wavelength > 0:
        raise ValueError("wavelength must be > 0")
    if not background_index > 0:
        raise ValueError("background index must be > 0")
    if not isinstance(dispersion, DispersionModel):
        dispersion = constant_index(dispersion)
    counts = geometry.grid_counts(a)
    if min(counts) < 2:
        raise DiscretizationError(
            f"shape unresolved: spacing {a:g} nm gives grid {counts}; need at least 2 sites per axis"
        )
    axes = [(np.arange(c) - (c - 1) / 2.0) for c in counts]
    gi = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), -1).reshape(-1, 3)
    unit = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
    inside = geometry.contains(unit * a)
    if not inside.any():
        raise DiscretizationError(f"no lattice site inside the shape at spacing {a:g} nm")
    unit = unit[inside]
    gi = gi[inside]
    n_sites = unit.shape[0]
    d = (geometry.volume / n_sites) ** (1.0 / 3.0)

    n = complex(dispersion(wavelength))
    m = n / background_index
    k = 2.0 * np.pi * background_index / wavelength
    if abs(m) * k * d > VALIDITY_LIMIT * (1 + 1e-12):
        amax = max_spacing(wavelength, n, background_index) * a / d
        raise DiscretizationError(
            f"|m|kd = {abs(m) * k * d:.3f} exceeds {VALIDITY_LIMIT} at {wavelength:g} nm "
            f"(n = {n:.4g}); use a lattice spacing a <= {np.floor(amax * 10) / 10:.1f} nm",
            max_spacing=float(amax),
        )
    alpha = np.full(n_sites, ldr_polarizability(m, k, d), dtype=complex)
    return DipoleLattice(
        geometry=geometry,
        spacing=float(d),
        nominal_spacing=float(a),
        positions=_frozen(unit * d, float),
        alpha=_frozen(alpha, complex),
        wavelength=float(wavelength),
        background_index=float(background_index),
        refractive_index=n,
        grid_shape=tuple(int(c) for c in counts),
        grid_index=_frozen(gi, np.int64),
    )


# -- excitation -----------------------------------------------------------------


@dataclass(frozen=True)
class Excitation:
    """Plane wave, or paraxial Gaussian beam focused at z = 0 with 1/e field radius ``waist``."""

    kind: str = "plane"
    waist: float | None = None

    def __post_init__(self):
        if self.kind not in ("plane", "gaussian"):
            raise ValueError(f"unknown excitation {self.kind!r}")
        if self.kind == "gaussian" and not (self.waist and self.waist > 0):
            raise ValueError("gaussian excitation needs a positive waist")

    @classmethod
    def plane(cls):
        return cls("plane")

    @classmethod
    def gaussian(cls, waist: float):
        return cls("gaussian", float(waist))


def incident_field(
    lattice: DipoleLattice,
    excitation: Excitation | str = "plane",
    polarization: PolarizationState | str = "H",
    amplitude: float = 1.0,
) -> FieldMap:
    """Incident field on the lattice sites for a beam travelling along -z."""
    if isinstance(excitation, str):
        excitation = Excitation(excitation)
    pol = as_polarization(polarization)
    k = lattice.k
    x, y, z = lattice.positions.T
    if excitation.kind == "plane":
        env = np.exp(-1j * k * z)
    else:
        w0 = excitation.waist
        zr = 0.5 * k * w0**2
        s = -z  # coordinate along the propagation direction
        w = w0 * np.sqrt(1.0 + (s / zr) ** 2)
        inv_r = s / (s**2 + zr**2)
        gouy = np.arctan(s / zr)
        rho2 = x**2 + y**2
        env = (w0 / w) * np.exp(-rho2 / w**2) * np.exp(1j * (k * s + 0.5 * k * rho2 * inv_r - gouy))
    values = amplitude * env[:, None] * pol.vector[None, :]
    info = {"excitation": excitation.kind, "polarization": pol.label, "jones": [str(c) for c in pol.jones]}
    if excitation.kind == "gaussian":
        info["waist_nm"] = excitation.waist
    return FieldMap(values, lattice.wavelength, "incident", float(abs(amplitude)), info)


# -- interaction operator ---------------------------------------------------------


class InteractionOperator:
    """Matrix-free ``A p = p / alpha - G p`` for one lattice.

    ``method="fft"`` embeds the lattice in a zero-padded box and evaluates the
    Toeplitz convolution with FFTs (O(N log N)); ``method="direct"`` sums all pairs.
    """

    def __init__(self, lattice: DipoleLattice, method: str = "fft"):
        if method not in ("fft", "direct"):
            raise ValueError(f"unknown operator method {method!r}")
        self.lattice = lattice
        self.method = method
        self.k = lattice.k
        self.inv_alpha = 1.0 / lattice.alpha
        self.n = lattice.n_sites
        self._gfft = None
        if method == "fft":
            self._setup_fft()

    def _setup_fft(self):
        lat = self.lattice
        shape = lat.grid_shape
        pad = tuple(sfft.next_fast_len(2 * c - 1) for c in shape)
        offs = []
        for c, L in zip(shape, pad):
            o = np.arange(L)
            o = np.where(o < c, o, o - L)
            o = np.where(np.abs(o) < c, o, 0).astype(float)
            offs.append(o * lat.spacing)
        valid = [np.abs(np.arange(L) - np.where(np.arange(L) < c, 0, L)) < c for c, L in zip(shape, pad)]
        d = np.stack(np.meshgrid(*offs, indexing="ij"), -1)
        a, b = _green_blocks(d, self.k)
        mask = valid[0][:, None, None] & valid[1][None, :, None] & valid[2][None, None, :]
        a = np.where(mask, a, 0.0)
        b = np.where(mask, b, 0.0)
        g = {}
        w = _accel.fft_workers()
        for i in range(3):
            for j in range(i, 3):
                comp = b * d[..., i] * d[..., j]
                if i == j:
                    comp = comp + a
                g[i, j] = sfft.fftn(comp, workers=w)
                g[j, i] = g[i, j]
        self._pad = pad
        self._gfft = g
        self._idx = tuple(lat.grid_index.T)

    def green(self, p: np.ndarray) -> np.ndarray:
        """Field at every site radiated by all other dipoles, (N, 3)."""
        p = np.asarray(p, dtype=complex).reshape(self.n, 3)
        if self.method == "direct":
            return green_apply(self.lattice.positions, p, self.k)
        w = _accel.fft_workers()
        buf = np.zeros((3,) + self._pad, dtype=complex)
        for c in range(3):
            buf[c][self._idx] = p[:, c]
        f = sfft.fftn(buf, axes=(1, 2, 3), workers=w, overwrite_x=True)
        g = self._gfft
        out = np.empty((self.n, 3), dtype=complex)
        for i in range(3):
            acc = g[i, 0] * f[0] + g[i, 1] * f[1] + g[i, 2] * f[2]
            out[:, i] = sfft.ifftn(acc, workers=w, overwrite_x=True)[self._idx]
        return out

    def matvec(self, x: np.ndarray) -> np.ndarray:
        p = np.asarray(x, dtype=complex).reshape(self.n, 3)
        return (p * self.inv_alpha[:, None] - self.green(p)).ravel()

    def as_linear_operator(self, counter: list | None = None) -> LinearOperator:
        def mv(x):
            if counter is not None:
                counter[0] += 1
            return self.matvec(x)

        size = 3 * self.n
        return LinearOperator((size, size), matvec=mv, dtype=complex)


# -- solve ------------------------------------------------------------------------


def _krylov(name, A, b, x0, tol, budget):
    if name == "gcrotmk":
        cycles = max(1, budget // (_GCROT_M + 1))
        return gcrotmk(A, b, x0=x0, rtol=tol, atol=0.0, m=_GCROT_M, k=_GCROT_K, maxiter=cycles)[0]
    if name == "gmres":
        restart = 100
        return gmres(A, b, x0=x0, rtol=tol, atol=0.0, restart=restart, maxiter=max(1, budget // restart))[0]
    if name == "bicgstab":
        return bicgstab(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=max(1, budget // 2))[0]
    raise ValueError(f"unknown Krylov method {name!r}")


def _mirror_tables(lattice: DipoleLattice):
    """Representative sites (x, y, z >= 0) and, per mirror combination g, the site index of g r."""
    shape = np.array(lattice.grid_shape)
    gi = lattice.grid_index
    lookup = np.full(lattice.grid_shape, -1, dtype=np.int64)
    lookup[tuple(gi.T)] = np.arange(lattice.n_sites)
    rep = np.nonzero(np.all(2 * gi >= shape - 1, axis=1))[0]
    img = np.empty((rep.size, 8), dtype=np.int64)
    for g in range(8):
        flip = np.array([(g >> b) & 1 for b in range(3)], dtype=bool)
        idx = np.where(flip, shape - 1 - gi[rep], gi[rep])
        img[:, g] = lookup[tuple(idx.T)]
    if np.any(img < 0) or np.unique(img).size != lattice.n_sites:
        raise ValueError("lattice is not symmetric under the x, y and z mirrors")
    return rep, img


def _solve_mirror(lattice: DipoleLattice, e: np.ndarray) -> np.ndarray:
    """Exact solve by dense LU inside each of the eight mirror-symmetry sectors.

    The lattice is invariant under x, y and z reflections, so the interaction
    operator is block diagonal in the symmetry-adapted basis; each sector holds
    about N/8 sites. Sectors the excitation does not touch are skipped.
    """
    alpha = lattice.alpha
    if np.max(np.abs(alpha - alpha[0])) > 1e-12 * abs(alpha[0]):
        raise ValueError("mirror solver needs a homogeneous polarizability")
    rep, img = _mirror_tables(lattice)
    refl = _mirror_signs()
    pos = np.ascontiguousarray(lattice.positions[rep])
    bits = np.array([[(g >> b) & 1 for b in range(3)] for g in range(8)])
    stab = img == img[:, :1]
    scale = np.linalg.norm(e)
    p = np.zeros_like(e)
    for sector in range(8):
        signs = 1.0 - 2.0 * np.array([(sector >> b) & 1 for b in range(3)])
        chars = np.prod(np.where(bits == 1, signs, 1.0), axis=1)
        rhs = sum(chars[g] * refl[g] * e[img[:, g]] for g in range(8)) / 8.0
        if np.linalg.norm(rhs) <= 1e-14 * scale:
            continue
        nu = sum(np.where(stab[:, g : g + 1], chars[g] * refl[g], 0.0) for g in range(8)) / 8.0
        keep = nu.ravel() > 1e-3
        u = mirror_block(pos, lattice.k, 1.0 / alpha[0], chars, refl)
        u = u[np.ix_(keep, keep)]
        x = np.zeros(3 * rep.size, dtype=complex)
        x[keep] = lu_solve(lu_factor(u, overwrite_a=True, check_finite=False), rhs.ravel()[keep],
                           check_finite=False)
        x = x.reshape(-1, 3)
        for g in range(8):
            np.add.at(p, img[:, g], chars[g] * refl[g] * x / 8.0)
    return p


def solve_polarizations(
    lattice: DipoleLattice,
    incident: FieldMap,
    tol: float = 1e-6,
    max_iter: int = 20000,
    x0=None,
    method: str = "fft",
    krylov: str = "gcrotmk",
) -> FieldMap:
    """Induced dipoles of the coupled system ``p_j / alpha_j - sum_k G_jk p_k = E_inc,j``.

    ``max_iter`` bounds the number of operator applications (at least one full
    Krylov cycle is always run). The returned map's
    ``info`` holds the true final relative residual and the operator count.
    ``method`` selects the operator: ``"fft"`` (default) or ``"direct"`` for the
    matrix-free Krylov solve, or ``"mirror"`` for an exact dense LU solve in the
    mirror-symmetry sectors (memory grows as (3N/8)^2; meant for near-resonant
    high-index problems where Krylov stagnates).
    """
    if incident.kind != "incident":
        raise ValueError("incident field map expected")
    if len(incident) != lattice.n_sites:
        raise ValueError(f"field has {len(incident)} sites, lattice has {lattice.n_sites}")
    if abs(incident.wavelength - lattice.wavelength) > 1e-9 * lattice.wavelength:
        raise ValueError("incident field and lattice are at different wavelengths")
    if not tol > 0:
        raise ValueError("tolerance must be > 0")
    e = incident.values
    base = {"tol": tol, "method": method, "krylov": krylov}
    nb = np.linalg.norm(e)
    if nb == 0:
        return FieldMap(np.zeros_like(e), lattice.wavelength, "induced-dipole", incident.amplitude,
                        {**base, "residual": 0.0, "iterations": 0})
    if lattice.n_sites == 1:
        p = lattice.alpha[:, None] * e
        return FieldMap(p, lattice.wavelength, "induced-dipole", incident.amplitude,
                        {**base, "residual": 0.0, "iterations": 0})

    if method == "mirror":
        x = _solve_mirror(lattice, e)
        res = float(np.linalg.norm(lattice.operator.matvec(x.ravel()) - e.ravel()) / nb)
        if res > tol:
            raise ConvergenceError(f"direct solve at {lattice.wavelength:g} nm left residual {res:.3e}",
                                   residual=res, wavelength=lattice.wavelength)
        return FieldMap(x, lattice.wavelength, "induced-dipole", incident.amplitude,
                        {**base, "residual": res, "iterations": 0})
    op = lattice.operator if method == "fft" else InteractionOperator(lattice, method)
    count = [0]
    A = op.as_linear_operator(count)
    b = e.ravel()
    if isinstance(x0, FieldMap):
        x0 = x0.values
    x = None if x0 is None else np.asarray(x0, dtype=complex).ravel()
    if x is not None and x.size != b.size:
        x = None
    res = np.inf
    while True:
        x = _krylov(krylov, A, b, x, tol, max(1, max_iter - count[0]))
        res = float(np.linalg.norm(op.matvec(x) - b) / nb)
        if res <= tol or count[0] >= max_iter:
            break
    if res > tol:
        raise ConvergenceError(
            f"Krylov solve at {lattice.wavelength:g} nm stopped at relative residual {res:.3e} "
            f"> tol {tol:.1e} after {count[0]} operator applications",
            residual=res,
            iterations=count[0],
            wavelength=lattice.wavelength,
        )
    return FieldMap(x.reshape(-1, 3), lattice.wavelength, "induced-dipole", incident.amplitude,
                    {**base, "residual": res, "iterations": count[0]})


# -- observables ------------------------------------------------------------------


@dataclass(frozen=True)
class CrossSections:
    c_ext: float
    c_abs: float
    c_sca: float
    q_ext: float
    q_abs: float
    q_sca: float

    def astuple(self):
        return (self.c_ext, self.c_abs, self.c_sca, self.q_ext, self.q_abs, self.q_sca)


def cross_sections(lattice: DipoleLattice, incident: FieldMap, polarizations: FieldMap) -> CrossSections:
    """Extinction, absorption and scattering cross sections (nm^2) and efficiencies."""
    if len(incident) != lattice.n_sites or len(polarizations) != lattice.n_sites:
        raise ValueError("incident field, polarizations and lattice must have the same number of sites")
    for fm in (incident, polarizations):
        if abs(fm.wavelength - lattice.wavelength) > 1e-9 * lattice.wavelength:
            raise ValueError("inputs are at different wavelengths")
    e0sq = incident.amplitude**2
    if e0sq == 0:
        return CrossSections(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    k = lattice.k
    p = polarizations.values
    c_ext = 4.0 * np.pi * k / e0sq * float(np.sum(np.imag(np.conj(incident.values) * p)))
    # Im(p . (p/alpha)^*) - 2k^3/3 |p|^2 per site; exactly 0 for a lossless LDR dipole
    loss = -np.imag(1.0 / lattice.alpha) - 2.0 / 3.0 * k**3
    c_abs = 4.0 * np.pi * k / e0sq * float(np.sum(loss * np.sum(np.abs(p) ** 2, axis=1)))
    c_sca = c_ext - c_abs
    area = lattice.geometry.cross_section
    return CrossSections(c_ext, c_abs, c_sca, c_ext / area, c_abs / area, c_sca / area)


def dipoles_si(lattice: DipoleLattice, polarizations: FieldMap) -> np.ndarray:
    """Induced dipole moments in C m (field amplitudes taken as V/m)."""
    return 4.0 * np.pi * EPS0 * lattice.background_index**2 * _NM3 * polarizations.values


def internal_field(lattice: DipoleLattice, polarizations: FieldMap) -> FieldMap:
    """Macroscopic field inside the particle, E = 4 pi p / (d^3 (m^2 - 1)), in V/m."""
    m2 = lattice.relative_index**2
    if m2 == 1:
        raise ValueError("internal field undefined for an index-matched lattice")
    values = 4.0 * np.pi * polarizations.values / (lattice.cell_volume * (m2 - 1.0))
    return FieldMap(values, lattice.wavelength, "internal", polarizations.amplitude, dict(polarizations.info))


# -- spectra --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumEntry:
    wavelength: float
    q_ext: float
    q_abs: float
    q_sca: float
    partials: dict
    residual: float = 0.0
    iterations: int = 0


@dataclass(frozen=True)
class ScatteringSpectrum:
    entries: tuple
    meta: dict = field(default_factory=dict)

    @property
    def wavelengths(self) -> np.ndarray:
        return np.array([e.wavelength for e in self.entries])

    def column(self, name: str) -> np.ndarray:
        if name in ("q_ext", "q_abs", "q_sca"):
            return np.array([getattr(e, name) for e in self.entries])
        key = name.upper()
        return np.array([e.partials.get(key, np.nan) for e in self.entries])

    def slice(self, lo: float, hi: float) -> "ScatteringSpectrum":
        return ScatteringSpectrum(tuple(e for e in self.entries if lo <= e.wavelength <= hi), dict(self.meta))

    def to_csv(self, quadrupoles: bool = True) -> str:
        cols = ["ED", "MD"] + (["EQ", "MQ"] if quadrupoles else [])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda_nm", "Q_ext", "Q_abs", "Q_sca"] + [f"Q_{c}" for c in cols])
        for e in self.entries:
            row = [f"{e.wavelength:.6g}", f"{e.q_ext:.10g}", f"{e.q_abs:.10g}", f"{e.q_sca:.10g}"]
            row += [f"{e.partials.get(c, float('nan')):.10g}" for c in cols]
            w.writerow(row)
        return buf.getvalue()


def _spectrum_chunk(args):
    (geometry, wavelengths, excitation, polarization, a, tol, dispersion, background_index,
     max_iter, multipoles, warm_start, method) = args
    from .multipole import decompose

    out = []
    prev = None
    for lam in wavelengths:
        try:
            lat = discretize(geometry, a, lam, dispersion, background_index)
            inc = incident_field(lat, excitation, polarization)
            x0 = prev if warm_start and method != "mirror" else None
            pol = solve_polarizations(lat, inc, tol=tol, max_iter=max_iter, x0=x0, method=method)
        except ConvergenceError as exc:
            raise ConvergenceError(f"at lambda = {lam:g} nm: {exc}", exc.residual, exc.iterations, lam) from exc
        except DiscretizationError as exc:
            raise DiscretizationError(f"at lambda = {lam:g} nm: {exc}", exc.max_spacing) from exc
        prev = pol
        cs = cross_sections(lat, inc, pol)
        partials = decompose(lat, pol).partial_q if multipoles else {}
        out.append(SpectrumEntry(float(lam), cs.q_ext, cs.q_abs, cs.q_sca, dict(partials),
                                 pol.info["residual"], pol.info["iterations"]))
    return out


def scattering_spectrum(
    geometry: Geometry,
    wavelengths: Sequence[float],
    excitation: Excitation | str = "plane",
    polarization: PolarizationState | str = "H",
    a: float | None = None,
    tol: float = 1e-6,
    dispersion: DispersionModel | complex | None = None,
    background_index: float = 1.0,
    max_iter: int = 20000,
    multipoles: bool = True,
    warm_start: bool = True,
    workers: int = 1,
    method: str = "fft",
) -> ScatteringSpectrum:
    """Efficiencies and multipole partials over a wavelength grid.

    Points are independent; with ``warm_start`` each solve starts from the
    previous wavelength's dipoles, which only changes the iteration count.
    ``workers > 1`` splits the grid into contiguous chunks run in separate processes.
    ``method`` is passed to :func:`solve_polarizations`; "mirror" is the robust
    choice near sharp resonances where the Krylov iteration stagnates.
    """
    lam = np.asarray(wavelengths, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("wavelength grid must be a non-empty 1-D sequence")
    if np.any(np.diff(lam) <= 0):
        raise ValueError("wavelength grid must be strictly increasing")
    if dispersion is None:
        dispersion = algaas()
    elif not isinstance(dispersion, DispersionModel):
        dispersion = constant_index(dispersion)
    if a is None:
        a = default_spacing(lam, dispersion, background_index)
    if isinstance(excitation, str):
        excitation = Excitation(excitation)
    polarization = as_polarization(polarization)
    common = (excitation, polarization, a, tol, dispersion, background_index, max_iter, multipoles, warm_start, method)
    workers = max(1, min(int(workers), lam.size))
    if workers == 1:
        entries = _spectrum_chunk((geometry, list(lam)) + common)
    else:
        chunks = np.array_split(lam, workers)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = ex.map(_spectrum_chunk, [(geometry, list(c)) + common for c in chunks])
            entries = [e for part in parts for e in part]
    meta = {
        "geometry": geometry.as_dict(),
        "spacing_nm": float(a),
        "tol": tol,
        "method": method,
        "excitation": excitation.kind,
        "polarization": polarization.label,
        "background_index": background_index,
        "material": dispersion.material_id,
    }
    return ScatteringSpectrum(tuple(entries), meta)

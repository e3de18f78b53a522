"""Sum-frequency generation from two linear coupled-dipole solves.

The bulk chi2 polarization at the sum frequency is built site by site from the
macroscopic internal fields at the signal and idler wavelengths, turned into
point dipoles (polarization density times cell volume) and radiated to the far
field without re-scattering by the particle. Emission is collected on the upper
(+z, reflection) hemisphere through an objective of numerical aperture NA.

Units: SI for fields (V/m), dipoles (C m), far fields (r E, in V) and powers (W);
lattice positions stay in nm.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .cda import (
    EPS0,
    DipoleLattice,
    Excitation,
    FieldMap,
    Geometry,
    discretize,
    incident_field,
    internal_field,
    solve_polarizations,
)
from .kernels import far_field_sum, radiated_power
from .materials import Chi2Tensor, DispersionModel, algaas, chi2_tensor
from .polarization import STANDARD_STATES, PolarizationState, as_polarization

__all__ = [
    "PolarizationState",
    "FarFieldMap",
    "BfpImage",
    "SfgResult",
    "SfgSetup",
    "SfgMap",
    "LinearFields",
    "sum_frequency",
    "nonlinear_polarization",
    "nonlinear_dipoles",
    "far_field",
    "dipole_power",
    "hemisphere_grid",
    "sphere_grid",
    "pupil_grid",
    "bfp_image",
    "collected_power",
    "beam_amplitude",
    "linear_fields",
    "sfg_map_16",
    "sfg_efficiency",
    "delay_scan",
]

C_LIGHT = 299792458.0
LABELS = ("H", "V", "R", "L")
_ENERGY_TOL = 1e-9


def sum_frequency(lambda_s: float, lambda_i: float) -> float:
    """Sum-frequency wavelength, 1/l_SF = 1/l_s + 1/l_i."""
    return 1.0 / (1.0 / lambda_s + 1.0 / lambda_i)


# -- nonlinear source -------------------------------------------------------------


def nonlinear_polarization(
    e_s: FieldMap, e_i: FieldMap, chi2: Chi2Tensor, wavelength_sf: float | None = None
) -> FieldMap:
    """P_i = eps0 sum_jk chi_ijk (Es_j Ei_k + Es_k Ei_j), in C/m^2 per site."""
    if len(e_s) != len(e_i):
        raise ValueError(f"signal field has {len(e_s)} sites, idler field has {len(e_i)}")
    for fm in (e_s, e_i):
        if fm.kind not in ("incident", "internal"):
            raise ValueError(f"expected an electric field map, got kind {fm.kind!r}")
    lam_sf = sum_frequency(e_s.wavelength, e_i.wavelength)
    if wavelength_sf is not None and abs(1.0 / wavelength_sf - 1.0 / lam_sf) > _ENERGY_TOL / lam_sf:
        raise ValueError(
            f"energy conservation violated: 1/{wavelength_sf:g} != 1/{e_s.wavelength:g} + 1/{e_i.wavelength:g}"
        )
    chi = chi2.si
    es, ei = e_s.values, e_i.values
    p = EPS0 * (np.einsum("ijk,nj,nk->ni", chi, es, ei) + np.einsum("ijk,nk,nj->ni", chi, es, ei))
    info = {"lambda_s": e_s.wavelength, "lambda_i": e_i.wavelength}
    return FieldMap(p, lam_sf, "nonlinear-polarization", 1.0, info)


def nonlinear_dipoles(p_nl: FieldMap, lattice: DipoleLattice) -> np.ndarray:
    """Radiating dipole per site (C m): polarization density times cell volume."""
    if p_nl.kind != "nonlinear-polarization":
        raise ValueError("nonlinear-polarization field map expected")
    if len(p_nl) != lattice.n_sites:
        raise ValueError("polarization map and lattice differ in site count")
    return p_nl.values * lattice.cell_volume * 1e-27


# -- far field --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FarFieldMap:
    """Transverse far field r E(u) (V) on a set of directions.

    ``weights`` are solid-angle quadrature weights (sr) when the grid supports
    power integration; ``grid`` describes the layout (``pupil`` grids carry their
    pixel axes).
    """

    directions: np.ndarray
    e_far: np.ndarray
    wavelength: float
    weights: np.ndarray | None = None
    grid: dict = field(default_factory=dict)
    background_index: float = 1.0

    def __post_init__(self):
        if self.directions.shape != self.e_far.shape or self.directions.shape[-1] != 3:
            raise ValueError("directions and e_far must both have shape (M, 3)")

    @property
    def intensity(self) -> np.ndarray:
        """Radiant intensity dP/dOmega (W/sr)."""
        return 0.5 * C_LIGHT * EPS0 * self.background_index * np.sum(np.abs(self.e_far) ** 2, axis=1)

    def total_power(self) -> float:
        if self.weights is None:
            raise ValueError("this direction grid has no quadrature weights")
        return float(np.sum(self.weights * self.intensity))

    def transversality(self) -> float:
        """max |u . E| / max |E|."""
        dots = np.abs(np.einsum("ij,ij->i", self.directions, self.e_far))
        scale = np.abs(self.e_far).max()
        return float(dots.max() / scale) if scale > 0 else 0.0


def _gl_cos(n_theta, cos_lo, cos_hi):
    x, w = np.polynomial.legendre.leggauss(n_theta)
    c = 0.5 * (cos_hi - cos_lo) * x + 0.5 * (cos_hi + cos_lo)
    return c, 0.5 * (cos_hi - cos_lo) * w


def _angular_grid(c, wc, n_phi):
    phi = (np.arange(n_phi) + 0.5) * 2.0 * np.pi / n_phi
    cc, pp = np.meshgrid(c, phi, indexing="ij")
    ss = np.sqrt(np.clip(1.0 - cc**2, 0.0, None))
    dirs = np.stack([ss * np.cos(pp), ss * np.sin(pp), cc], -1).reshape(-1, 3)
    weights = (wc[:, None] * np.full(n_phi, 2.0 * np.pi / n_phi)[None, :]).ravel()
    return dirs, weights


def hemisphere_grid(n_theta: int = 48, n_phi: int = 96, na: float = 1.0):
    """Gauss-Legendre (cos theta) x uniform phi grid over the cone sin(theta) <= na, u_z > 0."""
    if not 0 < na <= 1:
        raise ValueError("numerical aperture must satisfy 0 < NA <= 1")
    c, wc = _gl_cos(n_theta, np.sqrt(1.0 - na**2), 1.0)
    dirs, w = _angular_grid(c, wc, n_phi)
    return dirs, w, {"type": "hemisphere", "na": na, "n_theta": n_theta, "n_phi": n_phi}


def sphere_grid(n_theta: int = 64, n_phi: int = 128):
    c, wc = _gl_cos(n_theta, -1.0, 1.0)
    dirs, w = _angular_grid(c, wc, n_phi)
    return dirs, w, {"type": "sphere", "n_theta": n_theta, "n_phi": n_phi}


def pupil_grid(n: int = 101, na: float = 0.7):
    """Uniform n x n grid in (u_x, u_y) over [-na, na]^2; only pixels inside the disk are kept."""
    if not 0 < na <= 1:
        raise ValueError("numerical aperture must satisfy 0 < NA <= 1")
    u = np.linspace(-na, na, n)
    ux, uy = np.meshgrid(u, u, indexing="xy")
    rho2 = ux**2 + uy**2
    inside = rho2 <= na**2 * (1 + 1e-12)
    uz = np.sqrt(np.clip(1.0 - rho2, 0.0, None))
    dirs = np.stack([ux, uy, uz], -1)[inside]
    return dirs, None, {"type": "pupil", "n": n, "na": na, "mask": inside}


def far_field(p_nl: FieldMap, lattice: DipoleLattice, grid) -> FarFieldMap:
    """Far field of the nonlinear dipoles, r E = k^2/(4 pi eps0 eb) [d - (u.d) u] summed with phases."""
    dirs, weights, meta = grid
    dirs = np.asarray(dirs, dtype=float)
    if dirs.ndim != 2 or dirs.shape[0] == 0:
        raise ValueError("empty direction grid")
    d = nonlinear_dipoles(p_nl, lattice)
    nb = lattice.background_index
    k_nm = 2.0 * np.pi * nb / p_nl.wavelength
    f = far_field_sum(np.ascontiguousarray(lattice.positions), np.ascontiguousarray(d), np.ascontiguousarray(dirs), k_nm)
    f_perp = f - np.einsum("ij,ij->i", dirs, f)[:, None] * dirs
    k_m = k_nm * 1e9
    e = k_m**2 / (4.0 * np.pi * EPS0 * nb**2) * f_perp
    return FarFieldMap(dirs, e, p_nl.wavelength, weights, meta, nb)


def dipole_power(p_nl: FieldMap, lattice: DipoleLattice) -> float:
    """Total radiated power (W) of the nonlinear dipoles, from the exact pair sum."""
    d = nonlinear_dipoles(p_nl, lattice)
    nb = lattice.background_index
    k_nm = 2.0 * np.pi * nb / p_nl.wavelength
    s = radiated_power(np.ascontiguousarray(lattice.positions), np.ascontiguousarray(d), k_nm) * 1e27
    omega = 2.0 * np.pi * C_LIGHT / (p_nl.wavelength * 1e-9)
    return float(0.5 * omega / (4.0 * np.pi * EPS0 * nb**2) * s)


def _analyzer_fields(dirs, e):
    """Objective-pupil field components (x, y) under the meridional (aplanatic) mapping."""
    ux, uy, uz = dirs.T
    phi = np.arctan2(uy, ux)
    cp, sp = np.cos(phi), np.sin(phi)
    st = np.sqrt(np.clip(ux**2 + uy**2, 0.0, 1.0))
    theta_hat = np.stack([uz * cp, uz * sp, -st], -1)
    phi_hat = np.stack([-sp, cp, np.zeros_like(sp)], -1)
    e_t = np.einsum("ij,ij->i", theta_hat, e)
    e_p = np.einsum("ij,ij->i", phi_hat, e)
    return e_t * cp - e_p * sp, e_t * sp + e_p * cp


def _projected_intensity(far: FarFieldMap, analyzer: str | None):
    if analyzer is None or str(analyzer).lower() == "none":
        return far.intensity
    ex, ey = _analyzer_fields(far.directions, far.e_far)
    comp = {"H": ex, "V": ey}.get(str(analyzer).upper())
    if comp is None:
        raise ValueError(f"analyzer must be H, V or none, got {analyzer!r}")
    return 0.5 * C_LIGHT * EPS0 * far.background_index * np.abs(comp) ** 2


def collected_power(far: FarFieldMap, analyzer: str | None = None) -> float:
    """Power (W) through the grid's aperture, optionally behind a linear analyzer."""
    if far.weights is None:
        raise ValueError("far field grid has no quadrature weights")
    return float(np.sum(far.weights * _projected_intensity(far, analyzer)))


# -- back focal plane ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BfpImage:
    """Radiant intensity (W/sr) per pupil pixel; pixels outside the NA are 0."""

    intensity: np.ndarray
    pixel_pitch: float
    u_min: float
    na: float
    analyzer: str

    def to_pgm(self, maxval: int = 65535, comment: str | None = None) -> str:
        img = self.intensity
        peak = img.max()
        q = np.zeros(img.shape, dtype=np.int64) if peak <= 0 else np.rint(img / peak * maxval).astype(np.int64)
        rows = [" ".join(str(v) for v in row) for row in q[::-1]]  # top row = +u_y
        head = "P2\n" + "".join(f"# {line}\n" for line in (comment.splitlines() if comment else []))
        return head + f"{img.shape[1]} {img.shape[0]}\n{maxval}\n" + "\n".join(rows) + "\n"

    def sidecar(self) -> dict:
        return {
            "width": int(self.intensity.shape[1]),
            "height": int(self.intensity.shape[0]),
            "u_per_pixel": self.pixel_pitch,
            "u_x_min": self.u_min,
            "u_y_min": self.u_min,
            "row_order": "top row is +u_y",
            "na": self.na,
            "analyzer": self.analyzer,
            "peak_w_per_sr": float(self.intensity.max()),
        }

    def peak_index(self):
        return np.unravel_index(int(np.argmax(self.intensity)), self.intensity.shape)


def bfp_image(far: FarFieldMap, na: float = 0.7, analyzer: str | None = "H") -> BfpImage:
    """Back-focal-plane image from a far field sampled on a :func:`pupil_grid`."""
    if not 0 < na <= 1:
        raise ValueError("numerical aperture must satisfy 0 < NA <= 1")
    if far.grid.get("type") != "pupil":
        raise ValueError("bfp_image needs a far field sampled on a pupil grid")
    n = far.grid["n"]
    grid_na = far.grid["na"]
    mask = far.grid["mask"]
    img = np.zeros((n, n))
    vals = _projected_intensity(far, analyzer)
    sin_t = np.sqrt(far.directions[:, 0] ** 2 + far.directions[:, 1] ** 2)
    img[mask] = np.where(sin_t <= na * (1 + 1e-12), vals, 0.0)
    pitch = 2.0 * grid_na / (n - 1)
    return BfpImage(img, pitch, -grid_na, na, "none" if analyzer is None else str(analyzer).upper())


# -- efficiencies -------------------------------------------------------------------


@dataclass(frozen=True)
class SfgResult:
    p_sf: float
    eta: float
    xi: float
    p_h: float | None = None
    p_v: float | None = None

    def to_dict(self):
        return {"p_sf_w": self.p_sf, "eta_per_w": self.eta, "xi_m4_per_w": self.xi,
                "p_sf_analyzer_h_w": self.p_h, "p_sf_analyzer_v_w": self.p_v}


def sfg_efficiency(p_sf: float, p_s: float, p_i: float, a_s: float, a_i: float,
                   p_h: float | None = None, p_v: float | None = None) -> SfgResult:
    """eta = P_SF / (P_s P_i) in 1/W and Xi = eta A_s A_i in m^4/W."""
    if not (p_s > 0 and p_i > 0):
        raise ValueError("signal and idler powers must be > 0")
    if p_sf < 0 or a_s < 0 or a_i < 0:
        raise ValueError("powers and areas must be non-negative")
    eta = p_sf / (p_s * p_i)
    return SfgResult(float(p_sf), float(eta), float(eta * a_s * a_i), p_h, p_v)


def beam_amplitude(power: float, waist_nm: float, background_index: float = 1.0) -> float:
    """Peak field (V/m) of a Gaussian beam of 1/e^2 intensity radius ``waist_nm``."""
    w = waist_nm * 1e-9
    i0 = 2.0 * power / (np.pi * w**2)
    return float(np.sqrt(2.0 * i0 / (C_LIGHT * EPS0 * background_index)))


# -- polarization-resolved experiment ---------------------------------------------


@dataclass(frozen=True)
class SfgSetup:
    geometry: Geometry = field(default_factory=Geometry.cylinder)
    lambda_s: float = 1520.0
    lambda_i: float = 1560.0
    spacing: float = 15.0
    waist_nm: float = 1000.0
    power_s: float = 1e-3
    power_i: float = 1e-3
    na: float = 0.7
    tol: float = 1e-6
    d14: float = 100.0
    crystal_rotation: tuple | None = None
    background_index: float = 1.0
    n_theta: int = 32
    n_phi: int = 64
    image_pixels: int = 101

    @property
    def lambda_sf(self) -> float:
        return sum_frequency(self.lambda_s, self.lambda_i)

    @property
    def spot_area(self) -> float:
        """pi w0^2 in m^2."""
        return np.pi * (self.waist_nm * 1e-9) ** 2

    def chi2(self) -> Chi2Tensor:
        return chi2_tensor(self.d14, None if self.crystal_rotation is None else np.asarray(self.crystal_rotation))


@dataclass(frozen=True, eq=False)
class LinearFields:
    """Internal fields (per 1 V/m incident) for H and V at the signal and idler wavelengths."""

    lattice_s: DipoleLattice
    lattice_i: DipoleLattice
    fields: dict

    def field(self, band: str, pol: PolarizationState, amplitude: float = 1.0) -> FieldMap:
        h = self.fields[band, "H"]
        v = self.fields[band, "V"]
        jx, jy = pol.jones
        vals = amplitude * (jx * h.values + jy * v.values)
        return FieldMap(vals, h.wavelength, "internal", amplitude, {"polarization": pol.label})


def linear_fields(setup: SfgSetup, dispersion: DispersionModel | None = None) -> LinearFields:
    """Four cached linear solves; any other polarization follows by linearity."""
    dispersion = algaas() if dispersion is None else dispersion
    exc = Excitation.gaussian(setup.waist_nm) if setup.waist_nm else Excitation.plane()
    out = {}
    lats = {}
    for band, lam in (("s", setup.lambda_s), ("i", setup.lambda_i)):
        lat = discretize(setup.geometry, setup.spacing, lam, dispersion, setup.background_index)
        lats[band] = lat
        for lab in ("H", "V"):
            inc = incident_field(lat, exc, lab, 1.0)
            pol = solve_polarizations(lat, inc, tol=setup.tol)
            out[band, lab] = internal_field(lat, pol)
    return LinearFields(lats["s"], lats["i"], out)


@dataclass(frozen=True, eq=False)
class SfgMap:
    table: np.ndarray
    raw: np.ndarray
    analyzer: str
    labels: tuple = LABELS
    extras: dict = field(default_factory=dict)

    def entry(self, sig: str, idl: str) -> float:
        return float(self.table[self.labels.index(sig), self.labels.index(idl)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["signal\\idler"] + list(self.labels))
        for lab, row in zip(self.labels, self.table):
            w.writerow([lab] + [f"{v:.8f}" for v in row])
        return buf.getvalue()


def sfg_map_16(
    setup: SfgSetup | None = None,
    analyzer: str = "H",
    linear: LinearFields | None = None,
    images: bool = False,
    dispersion: DispersionModel | None = None,
) -> SfgMap:
    """Analyzer-resolved SFG power for the 16 signal x idler polarization pairs, normalised to max.

    ``extras`` holds raw collected powers (W), per-entry hemisphere powers and,
    with ``images=True``, the BFP images.
    """
    setup = SfgSetup() if setup is None else setup
    linear = linear_fields(setup, dispersion) if linear is None else linear
    lat = linear.lattice_s
    chi2 = setup.chi2()
    amp_s = beam_amplitude(setup.power_s, setup.waist_nm, setup.background_index)
    amp_i = beam_amplitude(setup.power_i, setup.waist_nm, setup.background_index)
    cone = hemisphere_grid(setup.n_theta, setup.n_phi, setup.na)
    pupil = pupil_grid(setup.image_pixels, setup.na) if images else None
    raw = np.zeros((4, 4))
    hemi = np.zeros((4, 4))
    imgs = {}
    for a, ls in enumerate(LABELS):
        es = linear.field("s", STANDARD_STATES[ls], amp_s)
        for b, li in enumerate(LABELS):
            ei = linear.field("i", STANDARD_STATES[li], amp_i)
            pnl = nonlinear_polarization(es, ei, chi2)
            far = far_field(pnl, lat, cone)
            raw[a, b] = collected_power(far, analyzer)
            hemi[a, b] = collected_power(far, None)
            if images:
                imgs[ls + li] = bfp_image(far_field(pnl, lat, pupil), setup.na, analyzer)
    peak = raw.max()
    table = raw / peak if peak > 0 else raw
    extras = {"collected_w": raw, "collected_unpolarized_w": hemi, "images": imgs,
              "amplitude_s": amp_s, "amplitude_i": amp_i}
    return SfgMap(table, raw, str(analyzer).upper(), LABELS, extras)


def delay_scan(delays_fs, fwhm_fs: float = 80.0, n_samples: int = 2001) -> np.ndarray:
    """SFG signal versus signal-idler delay for two Gaussian pulses of intensity FWHM ``fwhm_fs``.

    Computed as the overlap integral of the two intensity envelopes, normalised to 1 at zero delay.
    """
    delays = np.atleast_1d(np.asarray(delays_fs, dtype=float))
    if not fwhm_fs > 0:
        raise ValueError("pulse FWHM must be > 0")
    sigma = fwhm_fs / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    half = 6.0 * sigma + np.max(np.abs(delays))
    t = np.linspace(-half, half, n_samples)

    def env(x):
        return np.exp(-0.5 * (x / sigma) ** 2)

    ref = np.trapezoid(env(t) ** 2, t)
    return np.array([np.trapezoid(env(t) * env(t - d), t) for d in delays]) / ref


def sfg_report(setup: SfgSetup, smap: SfgMap) -> dict:
    return {
        "lambda_s_nm": setup.lambda_s,
        "lambda_i_nm": setup.lambda_i,
        "lambda_sf_nm": setup.lambda_sf,
        "analyzer": smap.analyzer,
        "table": smap.table.tolist(),
        "labels": list(smap.labels),
        "collected_w": smap.raw.tolist(),
    }


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)

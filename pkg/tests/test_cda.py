import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanopairs.cda import (
    DipoleLattice,
    Excitation,
    FieldMap,
    Geometry,
    InteractionOperator,
    cross_sections,
    discretize,
    incident_field,
    ldr_polarizability,
    scattering_spectrum,
    solve_polarizations,
)
from nanopairs.errors import ConvergenceError, DiscretizationError
from nanopairs.materials import algaas, constant_index
from nanopairs.mie import mie_reference

# Q_sca for r = 100 nm, m = 3.5, lambda = 1000 nm from a separately coded Mie series
# (scipy.special spherical Bessel functions) written before the package solver.
MIE_R100_M35_L1000 = 0.3921364889439588


@pytest.fixture(scope="module")
def small():
    lat = discretize(Geometry.cylinder(100.0, 80.0), 10.0, 800.0, constant_index(3.5 + 0.01j))
    return lat


def green_dense(r, k):
    """Free-space dyadic Green tensor written out from its textbook form."""
    d = np.linalg.norm(r)
    u = r / d
    outer = np.outer(u, u)
    return np.exp(1j * k * d) * (
        k**2 / d * (np.eye(3) - outer) + (1 / d**3 - 1j * k / d**2) * (3 * outer - np.eye(3))
    )


# -- discretization ---------------------------------------------------------------------


def test_site_count_default_cylinder():
    lat = discretize(Geometry.cylinder(), 20.0, 1550.0, algaas())
    nominal = np.pi * 215.0**2 * 400.0 / 20.0**3
    assert abs(lat.n_sites - nominal) / nominal < 0.05
    assert lat.validity <= 0.5


def test_sites_inside_shape_and_volume_matched():
    geom = Geometry.cylinder()
    lat = discretize(geom, 15.0, 1550.0, algaas())
    assert np.all(geom.contains(lat.positions))
    assert lat.n_sites * lat.spacing**3 == pytest.approx(geom.volume, rel=1e-12)


def test_unresolved_shape():
    with pytest.raises(DiscretizationError):
        discretize(Geometry.sphere(20.0), 40.0, 1000.0, constant_index(1.5))


def test_validity_rule_suggests_spacing():
    with pytest.raises(DiscretizationError, match=r"a <= 1[67]\.\d nm") as info:
        discretize(Geometry.cylinder(), 20.0, 760.0, algaas())
    assert 16.0 <= info.value.max_spacing <= 17.5


def test_polarizability_radiative_correction():
    # lossless LDR dipole: Im(1/alpha) = -2k^3/3 exactly
    k, d = 2 * np.pi / 1000.0, 10.0
    alpha = ldr_polarizability(3.0, k, d)
    assert (1 / alpha).imag == pytest.approx(-2 * k**3 / 3, rel=1e-10)


# -- excitation ---------------------------------------------------------------------------


def test_plane_wave_h(small):
    inc = incident_field(small, "plane", "H", 1.0)
    np.testing.assert_allclose(np.abs(inc.values[:, 0]), 1.0, rtol=1e-14)
    assert not np.any(inc.values[:, 1:])


def test_plane_wave_travels_down(small):
    inc = incident_field(small, "plane", "H")
    z = small.positions[:, 2]
    np.testing.assert_allclose(inc.values[:, 0], np.exp(-1j * small.k * z), rtol=1e-13)


def test_circular_convention(small):
    inc = incident_field(small, "plane", "R")
    ratio = inc.values[:, 1] / inc.values[:, 0]
    np.testing.assert_allclose(ratio, -1j, atol=1e-14)


def test_gaussian_envelope():
    lat = discretize(Geometry.cylinder(2400.0, 90.0), 30.0, 1500.0, constant_index(1.2))
    inc = incident_field(lat, Excitation.gaussian(1000.0), "V", 1.0)
    x, y, z = lat.positions.T
    plane = np.abs(z) < 1e-9
    assert plane.any()
    rho = np.hypot(x, y)[plane]
    amp = np.abs(inc.values[plane, 1])
    np.testing.assert_allclose(amp, np.exp(-(rho**2) / 1000.0**2), rtol=1e-12)
    assert amp[np.argmin(rho)] == pytest.approx(1.0, abs=1e-3)


def test_zero_amplitude_allowed(small):
    inc = incident_field(small, "plane", "H", 0.0)
    pol = solve_polarizations(small, inc)
    assert not np.any(pol.values)
    assert pol.info["residual"] == 0.0


def test_non_unit_jones_rejected(small):
    with pytest.raises(ValueError):
        incident_field(small, "plane", (1.0, 1.0))


@given(st.floats(0, 2 * np.pi), st.floats(0, np.pi / 2))
def test_plane_wave_unit_magnitude_any_jones(phase, mix):
    lat = discretize(Geometry.cylinder(60.0, 40.0), 10.0, 900.0, constant_index(2.0))
    jones = (np.cos(mix), np.sin(mix) * np.exp(1j * phase))
    inc = incident_field(lat, "plane", jones)
    np.testing.assert_allclose(np.linalg.norm(inc.values, axis=1), 1.0, rtol=1e-12)


# -- solver -----------------------------------------------------------------------------------


def test_eight_sites_match_dense_solve():
    lat = discretize(Geometry.cylinder(20.0, 20.0), 10.0, 500.0, constant_index(2.5 + 0.1j))
    assert lat.n_sites == 8
    n = lat.n_sites
    a = np.zeros((3 * n, 3 * n), dtype=complex)
    for i in range(n):
        a[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = np.eye(3) / lat.alpha[i]
        for j in range(n):
            if i != j:
                g = green_dense(lat.positions[i] - lat.positions[j], lat.k)
                a[3 * i : 3 * i + 3, 3 * j : 3 * j + 3] = -g
    inc = incident_field(lat, "plane", "R")
    ref = np.linalg.solve(a, inc.values.ravel()).reshape(n, 3)
    for method in ("fft", "direct", "mirror"):
        pol = solve_polarizations(lat, inc, tol=1e-12, method=method)
        np.testing.assert_allclose(pol.values, ref, rtol=1e-9, atol=1e-12 * np.abs(ref).max())


def test_fft_operator_matches_direct(small):
    rng = np.random.default_rng(0)
    x = rng.normal(size=3 * small.n_sites) + 1j * rng.normal(size=3 * small.n_sites)
    y_fft = InteractionOperator(small, "fft").matvec(x)
    y_dir = InteractionOperator(small, "direct").matvec(x)
    np.testing.assert_allclose(y_fft, y_dir, rtol=1e-10, atol=1e-12 * np.abs(y_dir).max())


@pytest.mark.parametrize("pol", ["H", "V", "R"])
def test_mirror_solver_matches_krylov(small, pol):
    inc = incident_field(small, Excitation.gaussian(300.0), pol)
    ref = solve_polarizations(small, inc, tol=1e-10)
    got = solve_polarizations(small, inc, tol=1e-10, method="mirror")
    np.testing.assert_allclose(got.values, ref.values, atol=1e-8 * np.abs(ref.values).max())
    assert got.info["residual"] < 1e-12


def test_residual_reported(small):
    pol = solve_polarizations(small, incident_field(small), tol=1e-6)
    assert pol.info["residual"] <= 1e-6
    assert pol.info["iterations"] > 0


def test_non_convergence_reports_residual(small):
    with pytest.raises(ConvergenceError) as info:
        solve_polarizations(small, incident_field(small), tol=1e-14, max_iter=3)
    assert info.value.residual > 1e-14


def test_wavelength_mismatch(small):
    inc = FieldMap(np.ones((small.n_sites, 3)), small.wavelength + 1.0, "incident")
    with pytest.raises(ValueError):
        solve_polarizations(small, inc)


@pytest.mark.parametrize("scale", [2.0, 1j, 0.5 - 0.5j])
def test_linearity(small, scale):
    inc = incident_field(small, "plane", "H", 1.0)
    p1 = solve_polarizations(small, inc, tol=1e-10)
    p2 = solve_polarizations(small, inc.scaled(scale), tol=1e-10)
    np.testing.assert_allclose(p2.values, scale * p1.values, atol=1e-8 * np.abs(p1.values).max())
    q1 = cross_sections(small, inc, p1).q_sca
    q2 = cross_sections(small, inc.scaled(scale), p2).q_sca
    assert q2 == pytest.approx(q1, rel=1e-7)


# -- cross sections -----------------------------------------------------------------------


def test_zero_polarization_zero_cross_sections(small):
    inc = incident_field(small)
    zero = FieldMap(np.zeros((small.n_sites, 3)), small.wavelength, "induced-dipole")
    assert cross_sections(small, inc, zero).astuple() == (0.0,) * 6


def test_lossless_absorption_negligible():
    lat = discretize(Geometry.cylinder(120.0, 100.0), 10.0, 900.0, constant_index(3.0))
    inc = incident_field(lat)
    cs = cross_sections(lat, inc, solve_polarizations(lat, inc))
    assert abs(cs.c_abs) <= 1e-3 * cs.c_ext


def test_energy_bookkeeping(small):
    inc = incident_field(small)
    cs = cross_sections(small, inc, solve_polarizations(small, inc))
    assert cs.q_ext == pytest.approx(cs.q_abs + cs.q_sca, rel=1e-6)
    assert cs.q_abs > 0


def test_sphere_against_mie_oracle():
    lat = discretize(Geometry.sphere(100.0), 10.0, 1000.0, constant_index(3.5))
    inc = incident_field(lat)
    q = cross_sections(lat, inc, solve_polarizations(lat, inc)).q_sca
    assert abs(q - MIE_R100_M35_L1000) / MIE_R100_M35_L1000 <= 0.05


def test_h_v_reciprocity_default_cylinder():
    lat = discretize(Geometry.cylinder(), 15.0, 1550.0, algaas())
    q = []
    for pol in ("H", "V"):
        inc = incident_field(lat, "plane", pol)
        q.append(cross_sections(lat, inc, solve_polarizations(lat, inc)).q_sca)
    assert abs(q[0] - q[1]) / q[0] < 0.02


@pytest.mark.slow
def test_halving_spacing_changes_qsca_below_3_percent():
    q = []
    for a in (15.0, 7.5):
        lat = discretize(Geometry.cylinder(), a, 1550.0, algaas())
        inc = incident_field(lat)
        q.append(cross_sections(lat, inc, solve_polarizations(lat, inc)).q_sca)
    assert abs(q[1] - q[0]) / q[1] < 0.03


# -- spectra --------------------------------------------------------------------------------


def test_spectrum_rejects_empty_grid():
    with pytest.raises(ValueError):
        scattering_spectrum(Geometry.sphere(50.0), [], dispersion=1.5)


def test_spectrum_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        scattering_spectrum(Geometry.sphere(50.0), [900.0, 800.0], dispersion=1.5, a=10.0)


def test_spectrum_csv_and_bookkeeping():
    spec = scattering_spectrum(Geometry.sphere(60.0), [700.0, 800.0, 900.0], dispersion=2.0, a=10.0)
    lines = spec.to_csv().splitlines()
    assert lines[0] == "lambda_nm,Q_ext,Q_abs,Q_sca,Q_ED,Q_MD,Q_EQ,Q_MQ"
    assert spec.to_csv(quadrupoles=False).splitlines()[0] == "lambda_nm,Q_ext,Q_abs,Q_sca,Q_ED,Q_MD"
    assert len(lines) == 4
    for e in spec.entries:
        assert e.q_ext == pytest.approx(e.q_abs + e.q_sca, rel=1e-6)
        assert min(e.q_ext, e.q_sca) >= -1e-9


def test_spectrum_error_names_wavelength():
    with pytest.raises(DiscretizationError, match="760"):
        scattering_spectrum(Geometry.cylinder(), [760.0], a=20.0)


def test_spectrum_workers_agree():
    args = (Geometry.sphere(60.0), [700.0, 750.0, 800.0, 850.0])
    one = scattering_spectrum(*args, dispersion=2.0, a=10.0, tol=1e-9, warm_start=False)
    two = scattering_spectrum(*args, dispersion=2.0, a=10.0, tol=1e-9, warm_start=False, workers=2)
    np.testing.assert_allclose(one.column("q_sca"), two.column("q_sca"), rtol=1e-12)


# -- Mie reference -----------------------------------------------------------------------------


def test_mie_frozen_value():
    assert mie_reference(100.0, 3.5, 1000.0)[0] == pytest.approx(MIE_R100_M35_L1000, rel=1e-10)


def test_mie_rayleigh_limit():
    x = 2 * np.pi / 1000.0
    m = 1.5
    rayleigh = 8 / 3 * x**4 * abs((m**2 - 1) / (m**2 + 2)) ** 2
    assert mie_reference(1.0, m, 1000.0)[0] == pytest.approx(rayleigh, rel=0.01)


@given(st.floats(0.05, 5.0))
def test_mie_index_matched(x):
    q_sca, q_ext = mie_reference(100.0, 1.0, 2 * np.pi * 100.0 / x)
    assert q_sca == 0.0 and q_ext == 0.0


@given(st.floats(0.1, 3.0), st.floats(1.1, 3.6), st.floats(0.0, 0.5))
def test_mie_extinction_bounds_scattering(x, n, kappa):
    q_sca, q_ext = mie_reference(100.0, complex(n, kappa), 2 * np.pi * 100.0 / x)
    assert q_ext >= q_sca * (1 - 1e-9) >= 0

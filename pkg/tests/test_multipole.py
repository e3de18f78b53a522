import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanopairs.cda import Geometry, cross_sections, discretize, incident_field, solve_polarizations
from nanopairs.errors import FitError
from nanopairs.materials import algaas, constant_index
from nanopairs.mie import mie_reference
from nanopairs.multipole import (
    MultipoleMoments,
    decompose,
    dipole_components,
    fit_resonance,
    lorentzian,
    moments_from_dipoles,
)


@pytest.fixture(scope="module")
def cylinder_1550():
    out = {}
    for pol in ("H", "V"):
        lat = discretize(Geometry.cylinder(), 15.0, 1550.0, algaas())
        inc = incident_field(lat, "plane", pol)
        p = solve_polarizations(lat, inc)
        out[pol] = (lat, inc, p, decompose(lat, p))
    return out


# -- moments -------------------------------------------------------------------------------


def test_single_dipole_at_origin():
    p, m, q_e, q_m = moments_from_dipoles([[0.0, 0.0, 0.0]], [[2.0, 0.0, 0.0]], 0.01)
    np.testing.assert_allclose(p, [2.0, 0, 0])
    assert not np.any(m) and not np.any(q_m) and not np.any(q_e)


def test_antiparallel_pair_is_magnetic():
    d = 5.0
    p, m, _, _ = moments_from_dipoles([[0, 0, d], [0, 0, -d]], [[1.0, 0, 0], [-1.0, 0, 0]], 0.01)
    assert np.allclose(p, 0)
    assert abs(m[1]) > 0 and m[0] == 0 and m[2] == 0


def test_quadrupoles_traceless_symmetric():
    rng = np.random.default_rng(1)
    r = rng.normal(size=(20, 3))
    P = rng.normal(size=(20, 3)) + 1j * rng.normal(size=(20, 3))
    _, _, q_e, q_m = moments_from_dipoles(r, P, 0.02)
    np.testing.assert_allclose(q_e, q_e.T)
    np.testing.assert_allclose(q_m, q_m.T)
    assert abs(np.trace(q_e)) < 1e-12
    # q_m is traceless by construction: tr(sum r (r x P)^T) = sum r.(r x P) = 0
    assert abs(np.trace(q_m)) < 1e-12


def test_decompose_length_mismatch(cylinder_1550):
    lat, inc, _, _ = cylinder_1550["H"]
    small = discretize(Geometry.sphere(50.0), 10.0, 1550.0, constant_index(2.0))
    with pytest.raises(ValueError):
        decompose(small, inc)


def test_partials_nonnegative(cylinder_1550):
    for _, _, _, mm in cylinder_1550.values():
        assert min(mm.partial_q.values()) >= -1e-9


def test_md_dominant_at_1550(cylinder_1550):
    part = cylinder_1550["H"][3].partial_q
    assert max(part, key=part.get) == "MD"


def test_my_dominant_under_h(cylinder_1550):
    mx, my, mz, *_ = dipole_components(cylinder_1550["H"][3])
    assert my > 10 * max(mx, mz)


def test_rotation_equivariance(cylinder_1550):
    h = cylinder_1550["H"][3]
    v = cylinder_1550["V"][3]
    # a 90 degree rotation about z maps x -> y, y -> -x
    np.testing.assert_allclose(abs(v.p[1]), abs(h.p[0]), rtol=0.02)
    np.testing.assert_allclose(abs(v.m[0]), abs(h.m[1]), rtol=0.02)
    assert v.partial_q["MD"] == pytest.approx(h.partial_q["MD"], rel=0.02)


@pytest.mark.parametrize("lam", [1400.0, 1550.0, 1700.0])
def test_partial_sum_bounded(lam):
    lat = discretize(Geometry.cylinder(), 15.0, lam, algaas())
    inc = incident_field(lat)
    pol = solve_polarizations(lat, inc)
    q = cross_sections(lat, inc, pol).q_sca
    assert sum(decompose(lat, pol).partial_q.values()) <= 1.15 * q


def test_sphere_dipoles_cover_mie_at_md_resonance():
    lam = 2 * np.pi * 100.0 / 1.5
    lat = discretize(Geometry.sphere(100.0), 10.0, lam, constant_index(2.0))
    inc = incident_field(lat)
    part = decompose(lat, solve_polarizations(lat, inc, tol=1e-8)).partial_q
    assert part["ED"] + part["MD"] >= 0.9 * mie_reference(100.0, 2.0, lam)[0]


def test_dipole_components_examples():
    mm = MultipoleMoments(np.zeros(3), np.array([1, 0, 1j]), None, None, 1550.0)
    assert dipole_components(mm) == (1.0, 0.0, 1.0, 0.0, 0.0, 0.0)
    zero = MultipoleMoments(np.zeros(3), np.zeros(3), None, None, 1550.0)
    assert dipole_components(zero) == (0.0,) * 6


# -- resonance fitting ---------------------------------------------------------------------


def test_fit_q9():
    lam = np.linspace(1400, 1700, 31)
    fit = fit_resonance(lam, values=lorentzian(lam, 1550.0, 172.2, 3.0, 0.5))
    assert fit.q == pytest.approx(1550.0 / 172.2, abs=0.01)


def test_fit_q52():
    lam = np.linspace(745, 805, 31)
    fit = fit_resonance(lam, values=lorentzian(lam, 775.0, 14.9, 8.0, 1.0))
    assert fit.q == pytest.approx(52.0, abs=0.5)


def test_fit_monotone_raises():
    lam = np.linspace(1400, 1700, 31)
    with pytest.raises(FitError):
        fit_resonance(lam, values=lam / 1000.0)


def test_fit_needs_seven_points():
    lam = np.linspace(1500, 1600, 6)
    with pytest.raises(FitError):
        fit_resonance(lam, values=lorentzian(lam, 1550.0, 50.0, 1.0, 0.0))


def test_fit_report_json():
    lam = np.linspace(1400, 1700, 31)
    doc = json.loads(fit_resonance(lam, values=lorentzian(lam, 1550.0, 172.2, 3.0, 0.5)).to_json())
    assert {"lambda0_nm", "fwhm_nm", "q", "residual"} <= set(doc)


def test_fit_deterministic():
    lam = np.linspace(1400, 1700, 31)
    y = lorentzian(lam, 1530.0, 120.0, 2.0, 0.3) + 0.01 * np.sin(lam)
    assert fit_resonance(lam, values=y) == fit_resonance(lam, values=y)


@given(st.floats(5.0, 100.0), st.floats(-0.3, 0.3), st.floats(0.1, 10.0), st.floats(0.0, 2.0))
def test_fit_recovers_q(q, shift, amp, base):
    lam0 = 1000.0
    fwhm = lam0 / q
    lam = np.linspace(lam0 - 2 * fwhm, lam0 + 2 * fwhm, 41) + shift * fwhm
    fit = fit_resonance(lam, values=lorentzian(lam, lam0, fwhm, amp, base))
    assert fit.q == pytest.approx(q, rel=1e-3)

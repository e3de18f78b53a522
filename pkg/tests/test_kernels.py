import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanopairs import kernels as K
from nanopairs._accel import USE_NUMBA
from nanopairs.cda import Geometry, _mirror_tables, discretize
from nanopairs.kernels import _mirror_signs, green_matrix
from nanopairs.materials import algaas


def rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)).max() / max(np.abs(np.asarray(b)).max(), 1e-300)


@given(st.integers(0, 2**32 - 1), st.integers(2, 60))
def test_green_apply_parity_and_dense(seed, n):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-100, 100, (n, 3))
    p = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    k = 2 * np.pi / 800.0
    a = K.green_apply_loop(pos, p, k)
    b = K.green_apply_numpy(pos, p, k)
    dense = (green_matrix(pos, k) @ p.ravel()).reshape(n, 3)
    assert rel(a, b) < 1e-12 and rel(b, dense) < 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_radiated_power_and_far_field_parity(seed, n):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-100, 100, (n, 3))
    d = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    dirs = rng.normal(size=(25, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    k = 2 * np.pi / 770.0
    assert K.radiated_power_loop(pos, d, k) == pytest.approx(K.radiated_power_numpy(pos, d, k), rel=1e-12)
    assert rel(K.far_field_sum_loop(pos, d, dirs, k), K.far_field_sum_numpy(pos, d, dirs, k)) < 1e-12


def test_radiated_power_single_dipole():
    # a lone dipole radiates (2k^3/3)|d|^2 in these units
    k = 0.01
    d = np.array([[1.0 + 0j, 0, 0]])
    assert K.radiated_power_loop(np.zeros((1, 3)), d, k) == pytest.approx(2 * k**3 / 3)


@given(st.integers(0, 2**32 - 1), st.integers(-5000, 5000), st.integers(1, 300))
def test_correlate_parity(seed, lo, width):
    rng = np.random.default_rng(seed)
    t1 = np.sort(rng.integers(0, 10**7, 2000))
    t2 = np.sort(rng.integers(0, 10**7, 2000))
    np.testing.assert_array_equal(K.correlate_counts_loop(t1, t2, lo, width, 50),
                                  K.correlate_counts_numpy(t1, t2, lo, width, 50))


@given(st.integers(0, 2**32 - 1), st.integers(0, 10**5))
def test_dead_time_parity(seed, dead):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.integers(0, 10**7, 3000))
    a = K.dead_time_mask_loop(t, dead)
    np.testing.assert_array_equal(a, K.dead_time_mask_numpy(t, dead))
    kept = t[a]
    assert np.all(np.diff(kept) >= dead) if dead > 0 else a.all()


@pytest.mark.parametrize("sector", range(8))
def test_mirror_block_parity(sector):
    lat = discretize(Geometry.cylinder(120.0, 100.0), 16.0, 760.0, algaas())
    rep, _ = _mirror_tables(lat)
    refl = _mirror_signs()
    signs = 1.0 - 2.0 * np.array([(sector >> b) & 1 for b in range(3)])
    bits = np.array([[(g >> b) & 1 for b in range(3)] for g in range(8)])
    chars = np.prod(np.where(bits == 1, signs, 1.0), axis=1)
    pos = np.ascontiguousarray(lat.positions[rep])
    a = K.mirror_block_loop(pos, lat.k, 1.0 / lat.alpha[0], chars, refl)
    b = K.mirror_block_numpy(pos, lat.k, 1.0 / lat.alpha[0], chars, refl)
    assert rel(a, b) < 1e-12


def test_bound_names_follow_flag():
    suffix = "_loop" if USE_NUMBA else "_numpy"
    for name in ("green_apply", "radiated_power", "far_field_sum", "correlate_counts", "dead_time_mask", "mirror_block"):
        assert getattr(K, name) is getattr(K, name + suffix)


SCRIPT = """
import numpy as np
from nanopairs import kernels
from nanopairs.cda import Geometry, discretize, incident_field, solve_polarizations, Excitation
from nanopairs.materials import constant_index
assert kernels.green_apply is kernels.green_apply_numpy
lat = discretize(Geometry.cylinder(100.0, 80.0), 10.0, 800.0, constant_index(3.5 + 0.01j))
inc = incident_field(lat, Excitation.gaussian(300.0), "R")
a = solve_polarizations(lat, inc, tol=1e-10).values
b = solve_polarizations(lat, inc, tol=1e-10, method="mirror").values
print(np.abs(a - b).max() / np.abs(a).max())
"""


def test_numpy_fallback_end_to_end():
    env = dict(os.environ, NANOPAIRS_DISABLE_NUMBA="1")
    res = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=False)
    assert res.returncode == 0, res.stderr
    assert float(res.stdout.strip()) < 1e-7

"""Compiled (numba) versus vectorized numpy kernels.

    python benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Both variants are imported directly, so the NANOPAIRS_DISABLE_NUMBA flag is not
needed here; it only decides which one the library binds by default. The first
numba call (compilation or cache load) is timed separately and excluded from the
per-call figure. Each row also reports the max relative difference between the
two results.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from nanopairs import kernels as K
from nanopairs.cda import Geometry, _mirror_tables, discretize
from nanopairs.kernels import _mirror_signs
from nanopairs.materials import algaas


def _time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype == bool:
        return float(np.count_nonzero(a != b))
    scale = np.abs(b).max()
    return float(np.abs(a - b).max() / scale) if scale > 0 else float(np.abs(a - b).max())


def cases():
    rng = np.random.default_rng(0)
    lat = discretize(Geometry.cylinder(), 20.0, 1550.0, algaas())
    pos = np.ascontiguousarray(lat.positions)
    p = rng.normal(size=(lat.n_sites, 3)) + 1j * rng.normal(size=(lat.n_sites, 3))
    k = lat.k
    dirs = rng.normal(size=(2000, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    sub = pos[:1500]
    psub = p[:1500]
    t1 = np.sort(rng.integers(0, 10**12, 200_000))
    t2 = np.sort(rng.integers(0, 10**12, 200_000))
    dead = np.sort(rng.integers(0, 10**12, 1_000_000))

    small = discretize(Geometry.cylinder(200.0, 160.0), 16.0, 760.0, algaas())
    rep, _ = _mirror_tables(small)
    refl = _mirror_signs()
    chars = np.ones(8)  # fully symmetric sector
    inv_alpha = 1.0 / small.alpha[0]
    mpos = np.ascontiguousarray(small.positions[rep])
    return [
        (f"green_apply     N={sub.shape[0]}", "green_apply", (sub, psub, k)),
        (f"radiated_power  N={sub.shape[0]}", "radiated_power", (sub, psub, k)),
        (f"far_field_sum   N={lat.n_sites}, M={dirs.shape[0]}", "far_field_sum", (pos, p, dirs, k)),
        (f"correlate_counts 2x{t1.size} tags", "correlate_counts", (t1, t2, -24300, 162, 300)),
        (f"dead_time_mask  {dead.size} tags", "dead_time_mask", (dead, 10**7)),
        (f"mirror_block    {rep.size} sites", "mirror_block",
         (mpos, small.k, inv_alpha, chars, refl)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="write the table as JSON")
    args = ap.parse_args(argv)
    rows = []
    print(f"{'kernel':42s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s} {'first call s':>13s} {'max rel diff':>13s}")
    for label, name, inputs in cases():
        loop = getattr(K, name + "_loop")
        vec = getattr(K, name + "_numpy")
        t0 = time.perf_counter()
        loop(*inputs)
        first = time.perf_counter() - t0
        t_loop, a = _time(lambda: loop(*inputs), args.repeat)
        t_vec, b = _time(lambda: vec(*inputs), args.repeat)
        diff = _rel(a, b)
        rows.append({"kernel": name, "case": label, "numba_s": t_loop, "numpy_s": t_vec,
                     "speedup": t_vec / t_loop, "first_call_s": first, "max_rel_diff": diff})
        print(f"{label:42s} {t_loop:10.4f} {t_vec:10.4f} {t_vec / t_loop:8.1f} {first:13.3f} {diff:13.2e}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(rows, f, indent=2)


if __name__ == "__main__":
    main()

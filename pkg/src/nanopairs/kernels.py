"""Hot numeric kernels.

Every kernel exists twice: a compiled loop (``*_loop``, numba) and a vectorized
numpy version (``*_numpy``). The public name is bound to one of them according to
``nanopairs._accel.USE_NUMBA``; both are kept importable so the benchmark and the
tests can compare them directly.

Conventions: dipole interaction uses the Gaussian-form free-space Green tensor

    G(r) p = e^{ikr} [ k^2 (r^ x p) x r^ / r + (1/r^3 - ik/r^2)(3 r^(r^.p) - p) ]

so ``E = G p`` with ``p`` in (length^3 x field) units. Time tags are int64 ps.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "green_apply",
    "green_apply_loop",
    "green_apply_numpy",
    "green_matrix",
    "mirror_block",
    "mirror_block_loop",
    "mirror_block_numpy",
    "radiated_power",
    "radiated_power_loop",
    "radiated_power_numpy",
    "far_field_sum",
    "far_field_sum_loop",
    "far_field_sum_numpy",
    "correlate_counts",
    "correlate_counts_loop",
    "correlate_counts_numpy",
    "dead_time_mask",
    "dead_time_mask_loop",
    "dead_time_mask_numpy",
]

_CHUNK = 256


# -- dipole-dipole interaction ---------------------------------------------


@njit(fastmath=False)
def green_apply_loop(pos, p, k):
    n = pos.shape[0]
    out = np.zeros((n, 3), dtype=np.complex128)
    for i in range(n):
        e0 = 0j
        e1 = 0j
        e2 = 0j
        for j in range(n):
            if i == j:
                continue
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            r = np.sqrt(r2)
            kr = k * r
            ph = np.exp(1j * kr) / (r2 * r)
            a = ph * (kr * kr + 1j * kr - 1.0)
            b = ph * (3.0 - 3j * kr - kr * kr) / r2
            rp = dx * p[j, 0] + dy * p[j, 1] + dz * p[j, 2]
            e0 += a * p[j, 0] + b * dx * rp
            e1 += a * p[j, 1] + b * dy * rp
            e2 += a * p[j, 2] + b * dz * rp
        out[i, 0] = e0
        out[i, 1] = e1
        out[i, 2] = e2
    return out


def _green_blocks(d, k):
    r2 = np.einsum("...i,...i->...", d, d)
    self_pair = r2 == 0
    r2 = np.where(self_pair, 1.0, r2)
    r = np.sqrt(r2)
    kr = k * r
    ph = np.exp(1j * kr) / (r2 * r)
    a = np.where(self_pair, 0.0, ph * (kr * kr + 1j * kr - 1.0))
    b = np.where(self_pair, 0.0, ph * (3.0 - 3j * kr - kr * kr) / r2)
    return a, b


def green_apply_numpy(pos, p, k):
    n = pos.shape[0]
    out = np.empty((n, 3), dtype=np.complex128)
    for s in range(0, n, _CHUNK):
        d = pos[s : s + _CHUNK, None, :] - pos[None, :, :]
        a, b = _green_blocks(d, k)
        rp = np.einsum("ijc,jc->ij", d, p)
        out[s : s + _CHUNK] = a @ p + np.einsum("ij,ijc->ic", b * rp, d)
    return out


def green_matrix(pos, k):
    """Dense (3N, 3N) interaction matrix with zero diagonal blocks (small N only)."""
    d = pos[:, None, :] - pos[None, :, :]
    a, b = _green_blocks(d, k)
    n = pos.shape[0]
    g = a[:, :, None, None] * np.eye(3) + b[:, :, None, None] * d[:, :, :, None] * d[:, :, None, :]
    return g.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)


def _mirror_signs():
    g = np.arange(8)
    refl = 1.0 - 2.0 * np.stack([(g >> 0) & 1, (g >> 1) & 1, (g >> 2) & 1], axis=1)
    return refl


@njit(fastmath=False)
def mirror_block_loop(rep, k, inv_alpha, chars, refl):
    """Interaction matrix restricted to one irrep of the three-mirror group.

    U[(i,c),(j,d)] = 1/8 sum_g chi(g) R_g[c] A(g r_i, r_j)[c,d] with
    A = diag(1/alpha) - G, for representative sites ``rep``.
    """
    n = rep.shape[0]
    out = np.zeros((3 * n, 3 * n), dtype=np.complex128)
    for i in range(n):
        for g in range(8):
            sx = refl[g, 0]
            sy = refl[g, 1]
            sz = refl[g, 2]
            w = chars[g] / 8.0
            xi = sx * rep[i, 0]
            yi = sy * rep[i, 1]
            zi = sz * rep[i, 2]
            for j in range(n):
                dx = xi - rep[j, 0]
                dy = yi - rep[j, 1]
                dz = zi - rep[j, 2]
                r2 = dx * dx + dy * dy + dz * dz
                if r2 == 0.0:
                    out[3 * i, 3 * j] += w * sx * inv_alpha
                    out[3 * i + 1, 3 * j + 1] += w * sy * inv_alpha
                    out[3 * i + 2, 3 * j + 2] += w * sz * inv_alpha
                    continue
                r = np.sqrt(r2)
                kr = k * r
                ph = np.exp(1j * kr) / (r2 * r)
                a = ph * (kr * kr + 1j * kr - 1.0)
                b = ph * (3.0 - 3j * kr - kr * kr) / r2
                d = (dx, dy, dz)
                s = (sx, sy, sz)
                for c in range(3):
                    for e in range(3):
                        v = b * d[c] * d[e]
                        if c == e:
                            v += a
                        out[3 * i + c, 3 * j + e] -= w * s[c] * v
    return out


def mirror_block_numpy(rep, k, inv_alpha, chars, refl):
    n = rep.shape[0]
    out = np.zeros((n, 3, n, 3), dtype=np.complex128)
    eye = np.eye(3)
    for g in range(8):
        w = chars[g] / 8.0
        img = rep * refl[g]
        d = img[:, None, :] - rep[None, :, :]
        a, b = _green_blocks(d, k)
        blk = a[..., None, None] * eye + b[..., None, None] * d[..., :, None] * d[..., None, :]
        same = np.all(d == 0.0, axis=-1)
        blk[same] -= inv_alpha * eye
        out -= w * (refl[g][None, None, :, None] * blk).transpose(0, 2, 1, 3)
    return out.reshape(3 * n, 3 * n)


# -- radiated power of a coherent dipole set --------------------------------


@njit(fastmath=False)
def radiated_power_loop(pos, d, k):
    """sum_ij d_i^* . Im G(r_i - r_j) . d_j, including the 2k^3/3 self term."""
    n = pos.shape[0]
    s = 0.0
    self_c = 2.0 * k**3 / 3.0
    for i in range(n):
        s += self_c * (abs(d[i, 0]) ** 2 + abs(d[i, 1]) ** 2 + abs(d[i, 2]) ** 2)
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            r = np.sqrt(r2)
            kr = k * r
            ph = np.exp(1j * kr) / (r2 * r)
            a = (ph * (kr * kr + 1j * kr - 1.0)).imag
            b = (ph * (3.0 - 3j * kr - kr * kr)).imag / r2
            rp = dx * d[j, 0] + dy * d[j, 1] + dz * d[j, 2]
            acc = (
                np.conj(d[i, 0]) * (a * d[j, 0] + b * dx * rp)
                + np.conj(d[i, 1]) * (a * d[j, 1] + b * dy * rp)
                + np.conj(d[i, 2]) * (a * d[j, 2] + b * dz * rp)
            )
            s += 2.0 * acc.real
    return s


def radiated_power_numpy(pos, d, k):
    n = pos.shape[0]
    s = 2.0 * k**3 / 3.0 * float(np.sum(np.abs(d) ** 2))
    for st in range(0, n, _CHUNK):
        diff = pos[st : st + _CHUNK, None, :] - pos[None, :, :]
        a, b = _green_blocks(diff, k)
        a, b = a.imag, b.imag
        rp = np.einsum("ijc,jc->ij", diff, d)
        field = a @ d + np.einsum("ij,ijc->ic", b * rp, diff)
        s += float(np.sum(np.conj(d[st : st + _CHUNK]) * field).real)
    return s


# -- far-field array sum ----------------------------------------------------


@njit(fastmath=False)
def far_field_sum_loop(pos, d, dirs, k):
    """F(u) = sum_j d_j exp(-i k u . r_j) for every direction u."""
    m = dirs.shape[0]
    n = pos.shape[0]
    out = np.zeros((m, 3), dtype=np.complex128)
    for a in range(m):
        ux = dirs[a, 0]
        uy = dirs[a, 1]
        uz = dirs[a, 2]
        f0 = 0j
        f1 = 0j
        f2 = 0j
        for j in range(n):
            ph = np.exp(-1j * k * (ux * pos[j, 0] + uy * pos[j, 1] + uz * pos[j, 2]))
            f0 += d[j, 0] * ph
            f1 += d[j, 1] * ph
            f2 += d[j, 2] * ph
        out[a, 0] = f0
        out[a, 1] = f1
        out[a, 2] = f2
    return out


def far_field_sum_numpy(pos, d, dirs, k):
    out = np.empty((dirs.shape[0], 3), dtype=np.complex128)
    for s in range(0, dirs.shape[0], _CHUNK):
        ph = np.exp(-1j * k * (dirs[s : s + _CHUNK] @ pos.T))
        out[s : s + _CHUNK] = ph @ d
    return out


# -- time-tag correlation ---------------------------------------------------


@njit
def correlate_counts_loop(t1, t2, lo, width, nbins):
    """Histogram of t2 - t1 over [lo, lo + nbins*width) by a two-pointer sweep."""
    counts = np.zeros(nbins, dtype=np.int64)
    hi = lo + width * nbins
    n2 = t2.shape[0]
    j0 = 0
    for i in range(t1.shape[0]):
        start = t1[i] + lo
        while j0 < n2 and t2[j0] < start:
            j0 += 1
        stop = t1[i] + hi
        j = j0
        while j < n2 and t2[j] < stop:
            counts[(t2[j] - start) // width] += 1
            j += 1
    return counts


def correlate_counts_numpy(t1, t2, lo, width, nbins):
    t1 = np.asarray(t1, dtype=np.int64)
    t2 = np.asarray(t2, dtype=np.int64)
    hi = lo + width * nbins
    first = np.searchsorted(t2, t1 + lo, side="left")
    last = np.searchsorted(t2, t1 + hi, side="left")
    per = last - first
    total = int(per.sum())
    if total == 0:
        return np.zeros(nbins, dtype=np.int64)
    owner = np.repeat(np.arange(t1.size), per)
    offs = np.arange(total) - np.repeat(np.cumsum(per) - per, per)
    dt = t2[first[owner] + offs] - t1[owner] - lo
    return np.bincount(dt // width, minlength=nbins).astype(np.int64)


@njit
def dead_time_mask_loop(times, dead):
    keep = np.zeros(times.shape[0], dtype=np.bool_)
    have = False
    last = 0
    for i in range(times.shape[0]):
        if not have or times[i] - last >= dead:
            keep[i] = True
            last = times[i]
            have = True
    return keep


def dead_time_mask_numpy(times, dead):
    times = np.asarray(times)
    keep = np.zeros(times.size, dtype=bool)
    if dead <= 0:
        keep[:] = True
        return keep
    i = 0
    while i < times.size:
        keep[i] = True
        i = int(np.searchsorted(times, times[i] + dead, side="left"))
    return keep


if USE_NUMBA:
    green_apply = green_apply_loop
    radiated_power = radiated_power_loop
    far_field_sum = far_field_sum_loop
    correlate_counts = correlate_counts_loop
    dead_time_mask = dead_time_mask_loop
    mirror_block = mirror_block_loop
else:
    green_apply = green_apply_numpy
    radiated_power = radiated_power_numpy
    far_field_sum = far_field_sum_numpy
    correlate_counts = correlate_counts_numpy
    dead_time_mask = dead_time_mask_numpy
    mirror_block = mirror_block_numpy

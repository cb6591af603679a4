"""Vectorized numpy/scipy implementations of the hot kernels.

These are the fallback path when numba is disabled or unavailable; the
numba twins in :mod:`numba_impl` compute the same quantities with explicit
loops. Both backends must agree to rounding error (see tests).

Conventions shared by both backends:

* 2D fields live on the full padded array; cells outside the mask hold
  hard zeros (Dirichlet zero extension) which the caller maintains.
* Differences are forward, in unit spacing. Physical powers of the grid
  spacing are applied by the caller.
* ``facew``/``cellw`` for 1D already contain every physical factor
  (radial measure, weight, spacing powers), so the kernel is a plain
  weighted p-sum.
"""

import numpy as np
from scipy import ndimage


def p_quotient_parts_2d(u, wcell, p):
    """Energy, mass, and their gradients for the 2D discrete quotient.

    Returns (energy, mass, g_energy, g_mass) with
    energy = sum_c |D u(c)|^p, mass = sum_c wcell(c)|u(c)|^p,
    where D is the forward-difference gradient in unit spacing.
    """
    d0 = np.zeros_like(u)
    d0[:-1, :] = u[1:, :] - u[:-1, :]
    d1 = np.zeros_like(u)
    d1[:, :-1] = u[:, 1:] - u[:, :-1]
    gsq = d0 * d0 + d1 * d1
    energy = float(np.sum(gsq ** (0.5 * p)))
    amp = np.zeros_like(gsq)
    pos = gsq > 0.0
    amp[pos] = gsq[pos] ** (0.5 * p - 1.0)
    f0 = amp * d0
    f1 = amp * d1
    ge = -(f0 + f1)
    ge[1:, :] += f0[:-1, :]
    ge[:, 1:] += f1[:, :-1]
    ge *= p
    au = np.abs(u)
    mass = float(np.sum(wcell * au**p))
    gd = p * wcell * au ** (p - 1.0) * np.sign(u)
    return energy, mass, ge, gd


def p_quotient_vals_2d(u, wcell, p):
    """Energy and mass only (cheap path for line searches)."""
    d0 = u[1:, :] - u[:-1, :]
    d1 = u[:, 1:] - u[:, :-1]
    gsq = np.zeros(u.shape)
    gsq[:-1, :] += d0 * d0
    gsq[:, :-1] += d1 * d1
    energy = float(np.sum(gsq ** (0.5 * p)))
    mass = float(np.sum(wcell * np.abs(u) ** p))
    return energy, mass


def pseudo_energy_2d(u, p):
    """Anisotropic energy sum_c sum_j |D_j u(c)|^p (unit spacing)."""
    d0 = u[1:, :] - u[:-1, :]
    d1 = u[:, 1:] - u[:, :-1]
    return float(np.sum(np.abs(d0) ** p) + np.sum(np.abs(d1) ** p))


def p_quotient_parts_1d(u, facew, cellw, p):
    """1D analogue of :func:`p_quotient_parts_2d` with per-face weights.

    ``facew`` has length n+1; face i carries the difference
    u[i] - u[i-1] with ghost zeros at both ends. A zero entry in
    ``facew`` switches the corresponding boundary to a natural one.
    """
    n = u.shape[0]
    d = np.empty(n + 1)
    d[0] = u[0]
    d[1:n] = u[1:] - u[:-1]
    d[n] = -u[n - 1]
    ad = np.abs(d)
    energy = float(np.sum(facew * ad**p))
    flux = facew * ad ** (p - 1.0) * np.sign(d)
    ge = p * (flux[:n] - flux[1:])
    au = np.abs(u)
    mass = float(np.sum(cellw * au**p))
    gd = p * cellw * au ** (p - 1.0) * np.sign(u)
    return energy, mass, ge, gd


def p_quotient_vals_1d(u, facew, cellw, p):
    n = u.shape[0]
    d = np.empty(n + 1)
    d[0] = u[0]
    d[1:n] = u[1:] - u[:-1]
    d[n] = -u[n - 1]
    energy = float(np.sum(facew * np.abs(d) ** p))
    mass = float(np.sum(cellw * np.abs(u) ** p))
    return energy, mass


def pseudo_energy_1d(u, p):
    n = u.shape[0]
    d = np.empty(n + 1)
    d[0] = u[0]
    d[1:n] = u[1:] - u[:-1]
    d[n] = -u[n - 1]
    return float(np.sum(np.abs(d) ** p))


def edt(occ):
    """Euclidean distance (cell units) from each True cell to the nearest
    False cell; 0 on False cells."""
    return ndimage.distance_transform_edt(occ).astype(np.float64)


def count_within(points, center, r):
    """Number of rows of ``points`` within distance r of ``center``."""
    d = points - center[None, :]
    return int(np.count_nonzero(np.einsum("ij,ij->i", d, d) <= r * r * (1.0 + 1e-12)))


def ball_sums(v, w, centers, offsets):
    """Sums of two fields over lattice balls.

    v, w: N-d arrays; centers: (M, N) int indices; offsets: (K, N) int
    stencil. Returns (sum_v, sum_w, count) per center, skipping
    out-of-bounds cells.
    """
    shp = v.shape
    m = centers.shape[0]
    k = offsets.shape[0]
    sumv = np.zeros(m)
    sumw = np.zeros(m)
    cnt = np.zeros(m, np.int64)
    vflat = v.ravel()
    wflat = w.ravel()
    chunk = max(1, int(4e6) // max(1, k))
    for i0 in range(0, m, chunk):
        c = centers[i0 : i0 + chunk]
        idx = c[:, None, :] + offsets[None, :, :]
        ok = np.ones(idx.shape[:2], bool)
        for ax, size in enumerate(shp):
            ok &= (idx[..., ax] >= 0) & (idx[..., ax] < size)
        clipped = [np.clip(idx[..., ax], 0, shp[ax] - 1) for ax in range(len(shp))]
        flat = np.ravel_multi_index(tuple(clipped), shp)
        vv = np.where(ok, vflat[flat], 0.0)
        ww = np.where(ok, wflat[flat], 0.0)
        sumv[i0 : i0 + c.shape[0]] = vv.sum(axis=1)
        sumw[i0 : i0 + c.shape[0]] = ww.sum(axis=1)
        cnt[i0 : i0 + c.shape[0]] = ok.sum(axis=1)
    return sumv, sumw, cnt

"""numba @njit twins of the numpy kernels.

Loop-level implementations of everything in :mod:`numpy_impl`, compiled
with nopython mode. Reduction order is fixed (C order), no threading, so
results are deterministic run to run.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def p_quotient_parts_2d(u, wcell, p):
    m, n = u.shape
    f0 = np.zeros((m, n))
    f1 = np.zeros((m, n))
    energy = 0.0
    for i in range(m):
        for j in range(n):
            up = u[i + 1, j] if i + 1 < m else 0.0
            vp = u[i, j + 1] if j + 1 < n else 0.0
            a = up - u[i, j]
            b = vp - u[i, j]
            g2 = a * a + b * b
            if g2 > 0.0:
                energy += g2 ** (0.5 * p)
                amp = g2 ** (0.5 * p - 1.0)
                f0[i, j] = amp * a
                f1[i, j] = amp * b
    ge = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = -f0[i, j] - f1[i, j]
            if i > 0:
                acc += f0[i - 1, j]
            if j > 0:
                acc += f1[i, j - 1]
            ge[i, j] = p * acc
    mass = 0.0
    gd = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            x = u[i, j]
            ax = abs(x)
            wc = wcell[i, j]
            if ax > 0.0 and wc != 0.0:
                ap = ax ** (p - 1.0)
                mass += wc * ap * ax
                gd[i, j] = p * wc * ap if x > 0.0 else -p * wc * ap
    return energy, mass, ge, gd


@njit(cache=True)
def p_quotient_vals_2d(u, wcell, p):
    m, n = u.shape
    energy = 0.0
    mass = 0.0
    for i in range(m):
        for j in range(n):
            up = u[i + 1, j] if i + 1 < m else 0.0
            vp = u[i, j + 1] if j + 1 < n else 0.0
            a = up - u[i, j]
            b = vp - u[i, j]
            g2 = a * a + b * b
            if g2 > 0.0:
                energy += g2 ** (0.5 * p)
            x = abs(u[i, j])
            if x > 0.0:
                mass += wcell[i, j] * x**p
    return energy, mass


@njit(cache=True)
def pseudo_energy_2d(u, p):
    m, n = u.shape
    e = 0.0
    for i in range(m):
        for j in range(n):
            if i + 1 < m:
                e += abs(u[i + 1, j] - u[i, j]) ** p
            if j + 1 < n:
                e += abs(u[i, j + 1] - u[i, j]) ** p
    return e


@njit(cache=True)
def p_quotient_parts_1d(u, facew, cellw, p):
    n = u.shape[0]
    d = np.empty(n + 1)
    d[0] = u[0]
    for i in range(1, n):
        d[i] = u[i] - u[i - 1]
    d[n] = -u[n - 1]
    energy = 0.0
    flux = np.zeros(n + 1)
    for i in range(n + 1):
        ad = abs(d[i])
        if ad > 0.0 and facew[i] != 0.0:
            ap = ad ** (p - 1.0)
            energy += facew[i] * ap * ad
            flux[i] = facew[i] * ap if d[i] > 0.0 else -facew[i] * ap
    ge = np.empty(n)
    for i in range(n):
        ge[i] = p * (flux[i] - flux[i + 1])
    mass = 0.0
    gd = np.zeros(n)
    for i in range(n):
        x = u[i]
        ax = abs(x)
        if ax > 0.0 and cellw[i] != 0.0:
            ap = ax ** (p - 1.0)
            mass += cellw[i] * ap * ax
            gd[i] = p * cellw[i] * ap if x > 0.0 else -p * cellw[i] * ap
    return energy, mass, ge, gd


@njit(cache=True)
def p_quotient_vals_1d(u, facew, cellw, p):
    n = u.shape[0]
    energy = 0.0
    prev = 0.0
    for i in range(n + 1):
        cur = u[i] if i < n else 0.0
        ad = abs(cur - prev)
        if ad > 0.0:
            energy += facew[i] * ad**p
        prev = cur
    mass = 0.0
    for i in range(n):
        ax = abs(u[i])
        if ax > 0.0:
            mass += cellw[i] * ax**p
    return energy, mass


@njit(cache=True)
def pseudo_energy_1d(u, p):
    n = u.shape[0]
    e = abs(u[0]) ** p
    for i in range(1, n):
        e += abs(u[i] - u[i - 1]) ** p
    e += abs(u[n - 1]) ** p
    return e


@njit(cache=True)
def _edt_1d_sq(f, v, z, out):
    # Lower envelope of parabolas q -> (x - q)^2 + f[q] (Felzenszwalb).
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -1e30
    z[1] = 1e30
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = 1e30
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        dq = q - v[k]
        out[q] = dq * dq + f[v[k]]


@njit(cache=True)
def _edt_2d(occ):
    m, n = occ.shape
    big = float((m + n + 1) * (m + n + 1))
    g = np.empty((m, n))
    for j in range(n):
        g[0, j] = 0.0 if not occ[0, j] else big
        for i in range(1, m):
            g[i, j] = 0.0 if not occ[i, j] else min(big, g[i - 1, j] + 1.0)
        for i in range(m - 2, -1, -1):
            if g[i + 1, j] + 1.0 < g[i, j]:
                g[i, j] = g[i + 1, j] + 1.0
    out = np.empty((m, n))
    f = np.empty(n)
    v = np.empty(n, np.int64)
    z = np.empty(n + 1)
    row = np.empty(n)
    for i in range(m):
        for j in range(n):
            gi = g[i, j]
            f[j] = gi * gi if gi < big else big
        _edt_1d_sq(f, v, z, row)
        for j in range(n):
            out[i, j] = np.sqrt(row[j])
    return out


@njit(cache=True)
def _edt_1d(occ):
    n = occ.shape[0]
    big = float(n + 1)
    d = np.empty(n)
    d[0] = 0.0 if not occ[0] else big
    for i in range(1, n):
        d[i] = 0.0 if not occ[i] else min(big, d[i - 1] + 1.0)
    for i in range(n - 2, -1, -1):
        if d[i + 1] + 1.0 < d[i]:
            d[i] = d[i + 1] + 1.0
    return d


def edt(occ):
    occ = np.ascontiguousarray(occ)
    if occ.ndim == 1:
        return _edt_1d(occ)
    if occ.ndim == 2:
        return _edt_2d(occ)
    raise NotImplementedError("numba EDT kernel supports 1D and 2D masks")


@njit(cache=True)
def count_within(points, center, r):
    m, ndim = points.shape
    r2 = r * r * (1.0 + 1e-12)
    cnt = 0
    for i in range(m):
        s = 0.0
        for j in range(ndim):
            d = points[i, j] - center[j]
            s += d * d
        if s <= r2:
            cnt += 1
    return cnt


@njit(cache=True)
def _ball_sums_impl(vflat, wflat, shp, strides, centers, offsets):
    m = centers.shape[0]
    k = offsets.shape[0]
    ndim = centers.shape[1]
    sumv = np.zeros(m)
    sumw = np.zeros(m)
    cnt = np.zeros(m, np.int64)
    for i in range(m):
        sv = 0.0
        sw = 0.0
        c = 0
        for q in range(k):
            flat = 0
            ok = True
            for ax in range(ndim):
                idx = centers[i, ax] + offsets[q, ax]
                if idx < 0 or idx >= shp[ax]:
                    ok = False
                    break
                flat += idx * strides[ax]
            if ok:
                sv += vflat[flat]
                sw += wflat[flat]
                c += 1
        sumv[i] = sv
        sumw[i] = sw
        cnt[i] = c
    return sumv, sumw, cnt


def ball_sums(v, w, centers, offsets):
    shp = np.asarray(v.shape, np.int64)
    strides = np.empty(v.ndim, np.int64)
    acc = 1
    for ax in range(v.ndim - 1, -1, -1):
        strides[ax] = acc
        acc *= v.shape[ax]
    return _ball_sums_impl(
        np.ascontiguousarray(v).ravel(),
        np.ascontiguousarray(w).ravel(),
        shp,
        strides,
        np.ascontiguousarray(centers, dtype=np.int64),
        np.ascontiguousarray(offsets, dtype=np.int64),
    )

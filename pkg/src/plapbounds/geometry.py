"""Domains and their geometric functionals.

Analytic shapes (boxes, balls, annuli in any dimension) plus rasterized
masks on uniform grids. Everything the eigenvalue bounds consume lives
here: inner radius, Lebesgue measure, distance to the boundary, the
sphere surface constant, rasterization, connectivity, and the Fraenkel
asymmetry of rasterized sets.

Raster conventions: a mask stores a boolean occupancy array with grid
spacing ``h``; cell index k has its center at ``anchor + h*k``. Masks
produced by :func:`rasterize` carry one empty cell layer around the
bounding box so that zero-extension across the boundary is always
representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.signal import fftconvolve

from . import _kernels
from .errors import DomainError, TooCoarseGridError

__all__ = [
    "RasterMask",
    "Domain",
    "Box",
    "Ball",
    "Annulus",
    "Raster",
    "inner_radius",
    "distance_to_boundary",
    "measure",
    "surface_measure_unit_sphere",
    "unit_ball_volume",
    "rasterize",
    "fraenkel_asymmetry",
    "connectivity",
    "save_grid",
    "load_grid",
]


def _gamma_half(two_z):
    """Gamma(two_z/2) for a positive integer two_z, by the recurrence from
    Gamma(1/2) = sqrt(pi) and Gamma(1) = 1."""
    if two_z < 1:
        raise ValueError("argument must be a positive integer")
    if two_z == 1:
        return math.sqrt(math.pi)
    if two_z == 2:
        return 1.0
    return (0.5 * two_z - 1.0) * _gamma_half(two_z - 2)


def surface_measure_unit_sphere(N):
    """Surface measure of the unit sphere in R^N: 2 pi^(N/2) / Gamma(N/2)."""
    if N < 1:
        raise DomainError(f"dimension must be >= 1, got {N}")
    return 2.0 * math.pi ** (0.5 * N) / _gamma_half(int(N))


def unit_ball_volume(N):
    return surface_measure_unit_sphere(N) / N


@dataclass
class RasterMask:
    """Boolean occupancy on a uniform grid.

    anchor is the coordinate vector of the center of cell (0, ..., 0).
    """

    h: float
    anchor: tuple
    occ: np.ndarray
    _edt: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.h > 0.0:
            raise DomainError(f"grid spacing must be positive, got {self.h}")
        self.occ = np.ascontiguousarray(self.occ, dtype=bool)
        self.anchor = tuple(float(a) for a in self.anchor)
        if len(self.anchor) != self.occ.ndim:
            raise DomainError("anchor dimension does not match occupancy array")
        if not self.occ.any():
            raise DomainError("mask has no occupied cells")

    @property
    def ndim(self):
        return self.occ.ndim

    @property
    def count(self):
        return int(self.occ.sum())

    def axis_centers(self, j):
        return self.anchor[j] + self.h * np.arange(self.occ.shape[j])

    def cell_centers(self):
        """(count, ndim) array of occupied cell centers, C order."""
        idx = np.argwhere(self.occ)
        return np.asarray(self.anchor) + self.h * idx

    def all_centers(self):
        """(n_cells, ndim) array of every cell center, C order."""
        grids = np.meshgrid(
            *[self.axis_centers(j) for j in range(self.ndim)], indexing="ij"
        )
        return np.stack([g.ravel() for g in grids], axis=-1)

    def edt_cells(self):
        """Distance (cell units) from each occupied cell to the nearest
        unoccupied cell; cells beyond the array count as unoccupied."""
        if self._edt is None:
            padded = np.pad(self.occ, 1, constant_values=False)
            sl = tuple(slice(1, -1) for _ in range(self.ndim))
            self._edt = _kernels.edt(padded)[sl]
        return self._edt

    def point_to_index(self, x):
        x = np.asarray(x, float)
        return np.rint((x - np.asarray(self.anchor)) / self.h).astype(int)


class Domain:
    """Common interface for all domain variants."""

    ndim: int

    def contains(self, pts):
        raise NotImplementedError

    def distance_to_boundary(self, pts):
        """d(x) = distance to the boundary for x inside, 0 outside."""
        raise NotImplementedError

    def boundary_distance(self, pts):
        """Distance to the boundary as a set, positive on both sides."""
        raise NotImplementedError

    def inner_radius(self):
        raise NotImplementedError

    def measure(self):
        raise NotImplementedError

    def bounding_box(self):
        raise NotImplementedError

    def diameter_bound(self):
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))


def _as_points(pts, ndim):
    pts = np.asarray(pts, float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.shape[1] != ndim:
        raise DomainError(f"points have dimension {pts.shape[1]}, domain has {ndim}")
    return pts, single


def _ret(vals, single):
    return float(vals[0]) if single else vals


class Box(Domain):
    def __init__(self, origin, lengths):
        self.origin = np.asarray(origin, float)
        self.lengths = np.asarray(lengths, float)
        if self.origin.shape != self.lengths.shape or self.origin.ndim != 1:
            raise DomainError("origin and lengths must be 1D vectors of equal size")
        if np.any(self.lengths <= 0.0):
            raise DomainError("box side lengths must be positive")
        self.ndim = self.origin.size

    def contains(self, pts):
        pts, single = _as_points(pts, self.ndim)
        hi = self.origin + self.lengths
        ok = np.all((pts > self.origin) & (pts < hi), axis=1)
        return bool(ok[0]) if single else ok

    def distance_to_boundary(self, pts):
        pts, single = _as_points(pts, self.ndim)
        hi = self.origin + self.lengths
        d = np.minimum(pts - self.origin, hi - pts).min(axis=1)
        return _ret(np.maximum(d, 0.0), single)

    def boundary_distance(self, pts):
        pts, single = _as_points(pts, self.ndim)
        hi = self.origin + self.lengths
        inside_gap = np.minimum(pts - self.origin, hi - pts).min(axis=1)
        out = np.maximum(self.origin - pts, 0.0) + np.maximum(pts - hi, 0.0)
        outside = np.linalg.norm(out, axis=1)
        return _ret(np.where(inside_gap > 0.0, inside_gap, outside), single)

    def inner_radius(self):
        return float(self.lengths.min() / 2.0)

    def measure(self):
        return float(np.prod(self.lengths))

    def bounding_box(self):
        return self.origin.copy(), self.origin + self.lengths


class Ball(Domain):
    def __init__(self, center, radius):
        self.center = np.asarray(center, float)
        if self.center.ndim != 1:
            raise DomainError("center must be a 1D vector")
        if not radius > 0.0:
            raise DomainError("radius must be positive")
        self.radius = float(radius)
        self.ndim = self.center.size

    def _r(self, pts):
        return np.linalg.norm(pts - self.center, axis=1)

    def contains(self, pts):
        pts, single = _as_points(pts, self.ndim)
        ok = self._r(pts) < self.radius
        return bool(ok[0]) if single else ok

    def distance_to_boundary(self, pts):
        pts, single = _as_points(pts, self.ndim)
        return _ret(np.maximum(self.radius - self._r(pts), 0.0), single)

    def boundary_distance(self, pts):
        pts, single = _as_points(pts, self.ndim)
        return _ret(np.abs(self.radius - self._r(pts)), single)

    def inner_radius(self):
        return self.radius

    def measure(self):
        return unit_ball_volume(self.ndim) * self.radius**self.ndim

    def bounding_box(self):
        r = self.radius
        return self.center - r, self.center + r


class Annulus(Domain):
    def __init__(self, center, r_in, r_out):
        self.center = np.asarray(center, float)
        if not 0.0 < r_in < r_out:
            raise DomainError("annulus needs 0 < r_in < r_out")
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        self.ndim = self.center.size

    def _r(self, pts):
        return np.linalg.norm(pts - self.center, axis=1)

    def contains(self, pts):
        pts, single = _as_points(pts, self.ndim)
        r = self._r(pts)
        ok = (r > self.r_in) & (r < self.r_out)
        return bool(ok[0]) if single else ok

    def distance_to_boundary(self, pts):
        pts, single = _as_points(pts, self.ndim)
        r = self._r(pts)
        d = np.minimum(r - self.r_in, self.r_out - r)
        return _ret(np.maximum(d, 0.0), single)

    def boundary_distance(self, pts):
        pts, single = _as_points(pts, self.ndim)
        r = self._r(pts)
        inner = np.abs(r - self.r_in)
        outer = np.abs(self.r_out - r)
        return _ret(np.minimum(inner, outer), single)

    def inner_radius(self):
        return 0.5 * (self.r_out - self.r_in)

    def measure(self):
        v = unit_ball_volume(self.ndim)
        return v * (self.r_out**self.ndim - self.r_in**self.ndim)

    def bounding_box(self):
        r = self.r_out
        return self.center - r, self.center + r


class Raster(Domain):
    def __init__(self, mask: RasterMask):
        self.mask = mask
        self.ndim = mask.ndim
        self._edt_out = None

    def contains(self, pts):
        pts, single = _as_points(pts, self.ndim)
        idx = np.rint((pts - np.asarray(self.mask.anchor)) / self.mask.h).astype(int)
        ok = np.ones(pts.shape[0], bool)
        for ax, size in enumerate(self.mask.occ.shape):
            ok &= (idx[:, ax] >= 0) & (idx[:, ax] < size)
        vals = np.zeros(pts.shape[0], bool)
        safe = idx[ok]
        vals[ok] = self.mask.occ[tuple(safe.T)]
        return bool(vals[0]) if single else vals

    def distance_to_boundary(self, pts):
        pts, single = _as_points(pts, self.ndim)
        dt = self.mask.edt_cells() * self.mask.h
        idx = np.rint((pts - np.asarray(self.mask.anchor)) / self.mask.h).astype(int)
        vals = np.zeros(pts.shape[0])
        ok = np.ones(pts.shape[0], bool)
        for ax, size in enumerate(self.mask.occ.shape):
            ok &= (idx[:, ax] >= 0) & (idx[:, ax] < size)
        safe = idx[ok]
        vals[ok] = dt[tuple(safe.T)]
        return _ret(vals, single)

    def boundary_distance(self, pts):
        pts, single = _as_points(pts, self.ndim)
        if self._edt_out is None:
            padded = np.pad(self.mask.occ, 1, constant_values=True)
            sl = tuple(slice(1, -1) for _ in range(self.ndim))
            self._edt_out = _kernels.edt(~padded)[sl] * self.mask.h
        inside = self.distance_to_boundary(pts)
        idx = np.rint((pts - np.asarray(self.mask.anchor)) / self.mask.h).astype(int)
        outside = np.zeros(pts.shape[0])
        ok = np.ones(pts.shape[0], bool)
        for ax, size in enumerate(self.mask.occ.shape):
            ok &= (idx[:, ax] >= 0) & (idx[:, ax] < size)
        safe = idx[ok]
        outside[ok] = self._edt_out[tuple(safe.T)]
        vals = np.where(np.asarray(inside) > 0.0, inside, outside)
        return _ret(np.atleast_1d(vals), single)

    def inner_radius(self):
        return float(self.mask.edt_cells().max() * self.mask.h)

    def measure(self):
        return self.mask.count * self.mask.h**self.ndim

    def bounding_box(self):
        anchor = np.asarray(self.mask.anchor)
        lo = anchor - 0.5 * self.mask.h
        hi = anchor + self.mask.h * (np.asarray(self.mask.occ.shape) - 0.5)
        return lo, hi


def inner_radius(d: Domain):
    """Largest distance to the boundary over the domain (radius of the
    biggest inscribed ball); O(h) accurate for rasters."""
    return d.inner_radius()


def distance_to_boundary(d: Domain, x):
    return d.distance_to_boundary(x)


def measure(d: Domain):
    return d.measure()


def rasterize(d: Domain, h):
    """Center-in-domain rasterization at spacing h, padded by one empty
    layer on all sides."""
    if isinstance(d, Raster):
        raise DomainError("domain is already a raster")
    if not h > 0.0:
        raise DomainError(f"grid spacing must be positive, got {h}")
    if h > d.inner_radius():
        raise TooCoarseGridError(
            f"spacing {h} exceeds the inner radius {d.inner_radius()}"
        )
    lo, hi = d.bounding_box()
    n = np.maximum(1, np.ceil((hi - lo) / h - 1e-9).astype(int))
    shape = n + 2
    axes = [lo[j] - 0.5 * h + h * np.arange(shape[j]) for j in range(d.ndim)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    occ = np.asarray(d.contains(pts)).reshape(shape)
    # force the guard layer empty even if the bounding box is not tight
    for ax in range(d.ndim):
        sl_lo = [slice(None)] * d.ndim
        sl_lo[ax] = 0
        occ[tuple(sl_lo)] = False
        sl_hi = [slice(None)] * d.ndim
        sl_hi[ax] = shape[ax] - 1
        occ[tuple(sl_hi)] = False
    anchor = lo - 0.5 * h
    return RasterMask(h=float(h), anchor=tuple(anchor), occ=occ)


def _ball_stencil(rc, ndim):
    """Boolean stencil of lattice offsets with |offset| <= rc (cell units)."""
    m = int(math.floor(rc + 1e-9))
    rng = np.arange(-m, m + 1)
    grids = np.meshgrid(*([rng] * ndim), indexing="ij")
    d2 = sum(g * g for g in grids)
    return d2 <= rc * rc * (1.0 + 1e-12), m


def fraenkel_asymmetry(mask: RasterMask, refine=True):
    """Normalized symmetric difference to the best-fitting equal-measure
    ball: 2 (1 - max overlap / |E|), minimized over ball centers.

    The center search scans every lattice position (within the bounding
    box grown by the ball radius) and then runs a shrinking-step
    coordinate descent from the best lattice center. The result is an
    upper bound on the true asymmetry; the discretization floor is of
    order h / r.
    """
    ndim = mask.ndim
    h = mask.h
    area_cells = mask.count
    r = (area_cells * h**ndim / unit_ball_volume(ndim)) ** (1.0 / ndim)
    rc = r / h
    stencil, m = _ball_stencil(rc, ndim)
    counts = fftconvolve(mask.occ.astype(float), stencil.astype(float), mode="full")
    counts = np.rint(counts)
    best_flat = int(np.argmax(counts))
    best_idx = np.unravel_index(best_flat, counts.shape)
    center = np.asarray(mask.anchor) + h * (np.asarray(best_idx) - m)
    best_count = int(counts[best_idx])

    if refine:
        pts = mask.cell_centers()
        step = 0.5 * h
        while step > h / 16.0:
            moved = True
            while moved:
                moved = False
                for ax in range(ndim):
                    for sgn in (1.0, -1.0):
                        cand = center.copy()
                        cand[ax] += sgn * step
                        c = _kernels.count_within(pts, cand, r)
                        if c > best_count:
                            best_count = c
                            center = cand
                            moved = True
            step *= 0.5

    return 2.0 * (1.0 - best_count / area_cells)


def connectivity(mask: RasterMask):
    """1 + number of bounded holes in the mask (complement components not
    touching the array border), via flood fill."""
    labels, n = ndimage.label(~mask.occ)
    if n == 0:
        return 1
    border = np.zeros(mask.occ.shape, bool)
    for ax in range(mask.ndim):
        sl = [slice(None)] * mask.ndim
        sl[ax] = 0
        border[tuple(sl)] = True
        sl[ax] = -1
        border[tuple(sl)] = True
    touching = np.unique(labels[border & (labels > 0)])
    holes = n - touching.size
    return 1 + int(holes)


# ---------------------------------------------------------------------------
# Portable grid file: text header + run-length-encoded occupancy, with an
# optional values section (one float per occupied cell, C order). Floats are
# written with repr() so the round trip is bit exact.
# ---------------------------------------------------------------------------

_MAGIC = "plapgrid 1"


def save_grid(path, mask: RasterMask, values=None):
    lines = [_MAGIC]
    lines.append(f"ndim {mask.ndim}")
    lines.append("shape " + " ".join(str(s) for s in mask.occ.shape))
    lines.append(f"h {mask.h!r}")
    lines.append("anchor " + " ".join(repr(a) for a in mask.anchor))
    flat = mask.occ.ravel(order="C")
    runs = []
    i = 0
    n = flat.size
    while i < n:
        v = flat[i]
        j = i
        while j < n and flat[j] == v:
            j += 1
        runs.append(f"{int(v)}x{j - i}")
        i = j
    lines.append("mask " + " ".join(runs))
    if values is not None:
        values = np.asarray(values, float).ravel()
        if values.size != mask.count:
            raise DomainError(
                f"expected one value per occupied cell ({mask.count}), got {values.size}"
            )
        lines.append("values " + " ".join(repr(float(v)) for v in values))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_grid(path):
    """Inverse of save_grid. Returns (mask, values or None)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != _MAGIC:
        raise DomainError(f"{path} is not a plapgrid file")
    fields = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        fields[key] = rest
    ndim = int(fields["ndim"])
    shape = tuple(int(s) for s in fields["shape"].split())
    if len(shape) != ndim:
        raise DomainError("shape/ndim mismatch in grid file")
    h = float(fields["h"])
    anchor = tuple(float(a) for a in fields["anchor"].split())
    flat = np.empty(int(np.prod(shape)), bool)
    pos = 0
    for run in fields["mask"].split():
        v, _, c = run.partition("x")
        c = int(c)
        flat[pos : pos + c] = bool(int(v))
        pos += c
    if pos != flat.size:
        raise DomainError("run-length data does not match the declared shape")
    mask = RasterMask(h=h, anchor=anchor, occ=flat.reshape(shape))
    values = None
    if "values" in fields:
        values = np.array([float(v) for v in fields["values"].split()])
        if values.size != mask.count:
            raise DomainError("values section does not match occupied cell count")
    return mask, values

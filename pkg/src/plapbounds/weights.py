"""Weight functions, their L^s norms, Muckenhoupt-type constants, and the
ball-supremum functional used by the degenerate-coefficient bound.

Weights are non-negative throughout (every bound here assumes it). The
distance-power weight uses the distance to the boundary as a set, which
is positive on both sides of the boundary; inside the domain it agrees
with the usual distance function. That keeps ball averages over
arbitrary balls meaningful.

Grid quadrature is midpoint rule at the cell centers. Cells whose center
sits within h/2 of a weight singularity (the center point of a radial
power, the boundary for a distance power) are replaced by a closed-form
cell average of the radial profile, otherwise the midpoint rule
misestimates integrable singularities badly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from . import _kernels
from .errors import DegenerateWeightError, DivergenceError, DomainError
from .geometry import (
    Ball,
    Box,
    Domain,
    Raster,
    RasterMask,
    rasterize,
    surface_measure_unit_sphere,
    unit_ball_volume,
)

__all__ = [
    "Weight",
    "Constant",
    "RadialPower",
    "DistPower",
    "SpikeRadial",
    "GridSampled",
    "ls_norm",
    "AtSampling",
    "AtEstimate",
    "muckenhoupt_constant",
    "at_divergence_scan",
    "g_function",
    "is_At_admissible",
]


class Weight:
    """Pointwise-evaluable non-negative weight."""

    kind = "abstract"

    def values(self, pts, domain=None):
        raise NotImplementedError

    def power_center(self):
        """Location of a point singularity/zero of the radial profile, or
        None."""
        return None

    def power_exponent(self):
        return 0.0

    def sup_on(self, domain):
        """Essential supremum over the domain; raises DivergenceError for
        unbounded variants."""
        raise NotImplementedError

    def descriptor(self):
        raise NotImplementedError


def _pts2d(pts):
    pts = np.asarray(pts, float)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts


class Constant(Weight):
    kind = "constant"

    def __init__(self, c):
        if c < 0.0:
            raise DomainError(f"constant weight must be non-negative, got {c}")
        self.c = float(c)

    def values(self, pts, domain=None):
        pts = _pts2d(pts)
        return np.full(pts.shape[0], self.c)

    def sup_on(self, domain):
        return self.c

    def descriptor(self):
        return {"kind": self.kind, "c": self.c}


class RadialPower(Weight):
    """w(x) = |x - center|^a."""

    kind = "radial_power"

    def __init__(self, center, exponent):
        self.center = np.asarray(center, float)
        self.exponent = float(exponent)

    def values(self, pts, domain=None):
        pts = _pts2d(pts)
        r = np.linalg.norm(pts - self.center, axis=1)
        if self.exponent == 0.0:
            return np.ones_like(r)
        with np.errstate(divide="ignore"):
            return r**self.exponent

    def power_center(self):
        return self.center if self.exponent != 0.0 else None

    def power_exponent(self):
        return self.exponent

    def sup_on(self, domain):
        if self.exponent < 0.0:
            raise DivergenceError("negative radial power is unbounded")
        lo, hi = domain.bounding_box()
        corners = np.stack(
            np.meshgrid(*zip(lo, hi), indexing="ij"), axis=-1
        ).reshape(-1, domain.ndim)
        rmax = float(np.linalg.norm(corners - self.center, axis=1).max())
        return rmax**self.exponent

    def descriptor(self):
        return {
            "kind": self.kind,
            "center": [float(c) for c in self.center],
            "exponent": self.exponent,
        }


class DistPower(Weight):
    """w(x) = dist(x, boundary)^gamma, positive on both sides of the
    boundary."""

    kind = "dist_power"

    def __init__(self, gamma):
        self.gamma = float(gamma)

    def values(self, pts, domain=None):
        if domain is None:
            raise DomainError("distance-power weight needs the domain")
        pts = _pts2d(pts)
        d = np.asarray(domain.boundary_distance(pts), float)
        d = np.atleast_1d(d)
        if self.gamma == 0.0:
            return np.ones_like(d)
        with np.errstate(divide="ignore"):
            return d**self.gamma

    def sup_on(self, domain):
        if self.gamma < 0.0:
            raise DivergenceError("negative distance power is unbounded")
        return domain.inner_radius() ** self.gamma

    def descriptor(self):
        return {"kind": self.kind, "gamma": self.gamma}


class SpikeRadial(Weight):
    """w(x) = |x - center|^(1-N) restricted to |x - center| <= eps.

    In dimension 1 this is a plain indicator; for N > 1 the profile is
    chosen so the L^1 norm is exactly (unit sphere surface) * eps when
    the eps-ball sits inside the domain.
    """

    kind = "spike_radial"

    def __init__(self, eps, center=None):
        if not eps > 0.0:
            raise DomainError(f"spike radius must be positive, got {eps}")
        self.eps = float(eps)
        self.center = None if center is None else np.asarray(center, float)

    def _center(self, ndim):
        return np.zeros(ndim) if self.center is None else self.center

    def values(self, pts, domain=None):
        pts = _pts2d(pts)
        ndim = pts.shape[1]
        r = np.linalg.norm(pts - self._center(ndim), axis=1)
        a = 1.0 - ndim
        with np.errstate(divide="ignore"):
            prof = np.ones_like(r) if a == 0.0 else r**a
        return np.where(r <= self.eps, prof, 0.0)

    def power_center(self):
        return self.center

    def power_exponent(self):
        # actual exponent depends on the ambient dimension; resolved at
        # quadrature time
        return None

    def sup_on(self, domain):
        if domain.ndim > 1:
            raise DivergenceError("radial spike is unbounded for N > 1")
        return 1.0

    def descriptor(self):
        d = {"kind": self.kind, "eps": self.eps}
        if self.center is not None:
            d["center"] = [float(c) for c in self.center]
        return d


class GridSampled(Weight):
    """Non-negative samples aligned with a raster mask; nearest-cell
    lookup, zero outside."""

    kind = "grid_sampled"

    def __init__(self, mask: RasterMask, cell_values):
        self.mask = mask
        cell_values = np.asarray(cell_values, float)
        if cell_values.shape != mask.occ.shape:
            full = np.zeros(mask.occ.shape)
            full[mask.occ] = cell_values.ravel()
            cell_values = full
        if np.any(cell_values < 0.0):
            raise DomainError("grid-sampled weight must be non-negative")
        self.cell_values = cell_values

    def values(self, pts, domain=None):
        pts = _pts2d(pts)
        idx = np.rint(
            (pts - np.asarray(self.mask.anchor)) / self.mask.h
        ).astype(int)
        ok = np.ones(pts.shape[0], bool)
        for ax, size in enumerate(self.mask.occ.shape):
            ok &= (idx[:, ax] >= 0) & (idx[:, ax] < size)
        out = np.zeros(pts.shape[0])
        safe = idx[ok]
        out[ok] = self.cell_values[tuple(safe.T)]
        return out

    def sup_on(self, domain):
        return float(self.cell_values.max())

    def descriptor(self):
        return {"kind": self.kind}


def is_At_admissible(gamma, t):
    """Distance powers lie in the Muckenhoupt class with exponent t
    exactly for -1 < gamma < t - 1 (strict on both sides)."""
    if not t > 1.0:
        raise DomainError(f"Muckenhoupt exponent t must exceed 1, got {t}")
    return -1.0 < gamma < t - 1.0


# ---------------------------------------------------------------------------
# Quadrature helpers
# ---------------------------------------------------------------------------


def _domain_grid(d: Domain, h):
    """(mask, centers, inside) for quadrature over the bounding box of d."""
    mask = d.mask if isinstance(d, Raster) else rasterize(d, h)
    centers = mask.all_centers()
    inside = mask.occ.ravel()
    return mask, centers, inside


def _equal_volume_radius(h, ndim):
    return (h**ndim / unit_ball_volume(ndim)) ** (1.0 / ndim)


def _radial_cell_average(exponent, h, ndim):
    """Average of |x|^exponent over a cell containing the origin,
    approximated by the ball of equal volume (1D closed form radially)."""
    if exponent + ndim <= 0.0:
        return math.inf
    if exponent == 0.0:
        return 1.0
    req = _equal_volume_radius(h, ndim)
    total = (
        surface_measure_unit_sphere(ndim)
        * req ** (exponent + ndim)
        / (exponent + ndim)
    )
    return total / h**ndim


def _boundary_cell_average(exponent, dist, h, inside_only):
    """Average of s^exponent across a cell cut by the boundary, treating
    the boundary as locally flat (1D closed form).

    dist is the (signed-free) distance of the cell center to the
    boundary, < h/2. With inside_only, the part of the cell beyond the
    boundary contributes zero; otherwise both sides contribute.
    """
    if exponent <= -1.0:
        return math.inf
    e1 = exponent + 1.0
    near = 0.5 * h - dist
    far = 0.5 * h + dist
    if inside_only:
        return far**e1 / (e1 * h)
    return (near**e1 + far**e1) / (e1 * h)


def _field_on_grid(w, power_scale, mask, centers, domain, inside_only):
    """|w|^power_scale at cell centers with singular-cell averaging.

    power_scale is the exponent applied to the weight (s for norms,
    -1/(t-1) for the dual field).
    """
    ndim = mask.ndim
    h = mask.h
    vals = w.values(centers, domain)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(vals > 0.0, vals**power_scale, np.where(vals == 0.0, 0.0, np.nan))
    if power_scale < 0.0:
        out = np.where(vals == 0.0, np.inf, out)

    if isinstance(w, (RadialPower, SpikeRadial)):
        if isinstance(w, RadialPower):
            a = w.exponent
            center = w.center
        else:
            a = 1.0 - ndim
            center = w._center(ndim)
        eff = a * power_scale
        if eff != 0.0:
            r = np.linalg.norm(centers - center, axis=1)
            sing = r < 0.5 * h
            if np.any(sing):
                out[sing] = _radial_cell_average(eff, h, ndim)
    elif isinstance(w, DistPower):
        eff = w.gamma * power_scale
        if eff != 0.0:
            d = np.asarray(domain.boundary_distance(centers), float)
            sing = d < 0.5 * h
            if np.any(sing):
                repl = np.array(
                    [
                        _boundary_cell_average(eff, di, h, inside_only)
                        for di in d[sing]
                    ]
                )
                out[sing] = repl
    return out


def ls_norm(w: Weight, d: Domain, s, h=None):
    """(integral over d of w^s)^(1/s) by grid quadrature, with analytic
    shortcuts for constants and for the spike's L^1 norm."""
    if not s >= 1.0:
        raise DomainError(f"norm exponent s must be >= 1, got {s}")
    ndim = d.ndim

    if isinstance(w, Constant):
        return w.c * d.measure() ** (1.0 / s)

    if isinstance(w, SpikeRadial):
        if ndim > 1 and not s < ndim / (ndim - 1.0):
            raise DivergenceError(
                f"spike weight is not in L^{s} for N={ndim} (needs s < N/(N-1))"
            )
        center = w._center(ndim)
        if s == 1.0 and d.distance_to_boundary(center) >= w.eps:
            return surface_measure_unit_sphere(ndim) * w.eps

    if isinstance(w, RadialPower) and w.exponent * s <= -ndim:
        raise DivergenceError(
            f"|x|^{w.exponent} is not in L^{s} near its center (needs a*s > -N)"
        )
    if isinstance(w, DistPower) and w.gamma * s <= -1.0:
        raise DivergenceError(
            f"d^{w.gamma} is not in L^{s} near the boundary (needs gamma*s > -1)"
        )

    if isinstance(w, GridSampled):
        mask = w.mask
        total = float(np.sum(w.cell_values[mask.occ] ** s)) * mask.h**ndim
        return total ** (1.0 / s)

    if h is None:
        raise DomainError("grid spacing h required for this weight/domain pair")
    mask, centers, inside = _domain_grid(d, h)
    field = _field_on_grid(w, float(s), mask, centers, d, inside_only=True)
    total = float(np.sum(field[inside])) * mask.h**ndim
    if not math.isfinite(total):
        raise DivergenceError("grid quadrature of the weight power diverged")
    return total ** (1.0 / s)


# ---------------------------------------------------------------------------
# Muckenhoupt constant estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtSampling:
    """Ball sampling plan: evaluation grid spacing, how many centers to
    keep per radius rung, and how many dyadic rungs (None = up to the
    region diameter)."""

    h: float
    max_centers: int = 1024
    n_radii: int | None = None


@dataclass(frozen=True)
class AtEstimate:
    """Lower estimate of the Muckenhoupt constant in normalized-average
    form (so the value is >= 1, with equality for constants)."""

    constant: float
    n_balls: int
    max_radius: float


def muckenhoupt_constant(v: Weight, region: Domain, t, sampling: AtSampling):
    """sup over sampled balls of (avg_B v) * (avg_B v^(-1/(t-1)))^(t-1).

    Balls are centered at grid points and have dyadic radii h*2^k; only
    balls contained in the region are sampled, so the result is a lower
    bound on the true constant. Divergence shows up as growth under grid
    refinement (see at_divergence_scan) or as an infinite value when a
    cell average does not exist.
    """
    if not t > 1.0:
        raise DomainError(f"Muckenhoupt exponent t must exceed 1, got {t}")
    h = sampling.h
    mask, centers, _ = _domain_grid(region, h)
    vvals = _field_on_grid(v, 1.0, mask, centers, region, inside_only=False)
    wvals = _field_on_grid(
        v, -1.0 / (t - 1.0), mask, centers, region, inside_only=False
    )
    shape = mask.occ.shape
    vgrid = vvals.reshape(shape)
    wgrid = wvals.reshape(shape)
    dist = np.asarray(region.distance_to_boundary(centers), float).reshape(shape)

    diameter = region.diameter_bound()
    radii = []
    k = 0
    while True:
        r = h * 2.0**k
        if r > 0.5 * diameter or (sampling.n_radii is not None and k >= sampling.n_radii):
            break
        radii.append(r)
        k += 1
    if not radii:
        radii = [h]

    best = 1.0
    n_balls = 0
    max_r = 0.0
    ndim = mask.ndim
    idx_all = np.argwhere(np.ones(shape, bool))
    for r in radii:
        valid = (dist >= r).ravel()
        if not valid.any():
            continue
        cand = idx_all[valid]
        stride = max(1, cand.shape[0] // sampling.max_centers)
        cand = cand[::stride]
        m = int(math.floor(r / h + 1e-9))
        offs = np.argwhere(_ball_offsets(r / h, ndim)) - m
        sumv, sumw, cnt = _kernels.ball_sums(vgrid, wgrid, cand, offs)
        ok = cnt > 0
        if not ok.any():
            continue
        mv = sumv[ok] / cnt[ok]
        mw = sumw[ok] / cnt[ok]
        with np.errstate(over="ignore", invalid="ignore"):
            prod = np.where(mv > 0.0, mv * mw ** (t - 1.0), np.inf)
        local = float(np.max(prod))
        n_balls += int(ok.sum())
        max_r = max(max_r, r)
        if local > best:
            best = local
    return AtEstimate(constant=best, n_balls=n_balls, max_radius=max_r)


def _ball_offsets(rc, ndim):
    m = int(math.floor(rc + 1e-9))
    rng = np.arange(-m, m + 1)
    grids = np.meshgrid(*([rng] * ndim), indexing="ij")
    d2 = sum(g * g for g in grids)
    return d2 <= rc * rc * (1.0 + 1e-12)


def at_divergence_scan(v: Weight, region: Domain, t, h, levels=3, max_centers=512):
    """Estimates at h, h/2, ... h/2^(levels-1). Steady growth (or an
    infinite value) flags that v is not in the class; a plateau is
    consistent with membership. Returns (looks_admissible, estimates)."""
    ests = []
    hh = h
    for _ in range(levels):
        ests.append(
            muckenhoupt_constant(v, region, t, AtSampling(h=hh, max_centers=max_centers))
        )
        hh *= 0.5
    consts = [e.constant for e in ests]
    if any(not math.isfinite(c) for c in consts):
        return False, ests
    growth = consts[-1] / consts[0] if consts[0] > 0 else math.inf
    return growth < 4.0, ests


def g_function(v: Weight, d: Domain, t, h):
    """sup over grid points x in the domain of the integral of
    v^(-1/(t-1)) over the ball B(x, inner radius) clipped to the bounding
    box."""
    if not t > 1.0:
        raise DomainError(f"exponent t must exceed 1, got {t}")
    mask, centers, inside = _domain_grid(d, h)
    field = _field_on_grid(v, -1.0 / (t - 1.0), mask, centers, d, inside_only=False)
    if np.any(np.isinf(field)):
        raise DivergenceError("v^(-1/(t-1)) has a non-integrable singularity")
    shape = mask.occ.shape
    fgrid = field.reshape(shape)
    # cells in the guard layer sit outside the bounding box: clip them
    for ax in range(mask.ndim):
        sl = [slice(None)] * mask.ndim
        sl[ax] = 0
        fgrid[tuple(sl)] = 0.0
        sl[ax] = shape[ax] - 1
        fgrid[tuple(sl)] = 0.0
    rc = d.inner_radius() / mask.h
    stencil = _ball_offsets(rc, mask.ndim).astype(float)
    sums = fftconvolve(fgrid, stencil, mode="same")
    sums = np.where(mask.occ, sums, -np.inf)
    value = float(sums.max()) * mask.h**mask.ndim
    if not math.isfinite(value):
        raise DivergenceError("ball integrals of v^(-1/(t-1)) diverged")
    return value

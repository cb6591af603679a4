"""Numerical first eigenvalues by direct Rayleigh-quotient minimization.

Discretization is forward differences with hard-zero extension outside
the mask, so the discrete energy is exactly the p-energy of the
zero-extended field. The minimizer is projected gradient descent on the
quotient: normalize the weighted p-mass to one, take a descent step,
backtrack with an Armijo test, renormalize, repeat. Directions are
preconditioned with the (p=2) stiffness matrix of the same grid, which
keeps the iteration count essentially mesh-independent; plain Euclidean
descent needs O(h^-2) iterations and is useless at the resolutions the
tests run.

The converged pair is certified a posteriori by the weak-form residual:
the discrete eigenvalue equation tested against every interior indicator
function, reported relative to the size of its two sides.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu

from . import _kernels
from .errors import (
    DegenerateWeightError,
    DomainError,
    SolverConvergenceError,
    TooCoarseGridError,
    UnsupportedExponentError,
)
from .geometry import Box, Raster, RasterMask, load_grid, save_grid
from .weights import Constant, DistPower, GridSampled, RadialPower, SpikeRadial, Weight

__all__ = [
    "SolveOptions",
    "GridField",
    "rayleigh_quotient",
    "lambda1_1d",
    "lambda1_radial",
    "lambda1_radial_coeff",
    "lambda1_2d_fd",
    "weak_residual",
    "save_field",
    "load_field",
]

P_RANGE = (1.1, 10.0)


@dataclass(frozen=True)
class SolveOptions:
    """Convergence controls for the quotient minimizers."""

    tol: float = 1e-6
    max_iter: int = 20000
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    grow: float = 1.5
    jitter: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.tol <= 1e-2:
            raise ValueError(f"tol must lie in (0, 1e-2], got {self.tol}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


DEFAULT_OPTS = SolveOptions()


@dataclass
class GridField:
    """Real values on the cells of a raster mask; zero off the mask."""

    mask: RasterMask
    values: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape != self.mask.occ.shape:
            full = np.zeros(self.mask.occ.shape)
            full[self.mask.occ] = self.values.ravel()
            self.values = full
        if not np.all(np.isfinite(self.values)):
            raise DomainError("field values must be finite")

    @property
    def interior(self):
        return self.values[self.mask.occ]


def _check_p(p):
    if not P_RANGE[0] <= p <= P_RANGE[1]:
        raise UnsupportedExponentError(
            f"p={p} outside the supported range [{P_RANGE[0]}, {P_RANGE[1]}]"
        )
    return float(p)


def _weight_on_cells(w, mask, domain):
    if w is None:
        w = Constant(1.0)
    pts = mask.cell_centers()
    vals = np.asarray(w.values(pts, domain), float)
    if np.any(vals < 0.0):
        raise DegenerateWeightError("weights must be non-negative")
    return vals


# ---------------------------------------------------------------------------
# Shared minimizer
# ---------------------------------------------------------------------------


def _minimize_quotient(u0, p, eval_full, eval_vals, solve_k, opts):
    u = np.abs(np.asarray(u0, float))
    _, d0 = eval_vals(u)
    if not d0 > 0.0:
        raise DegenerateWeightError("initial field carries no weighted mass")
    u = u / d0 ** (1.0 / p)
    energy, mass, ge, gd = eval_full(u)
    lam = energy / mass
    step = opts.step0
    stagnant = 0
    hard_fails = 0
    res = math.inf
    for it in range(1, opts.max_iter + 1):
        g = ge - lam * gd
        scale = float(np.max(np.abs(ge) + lam * np.abs(gd)))
        res = float(np.max(np.abs(g))) / scale if scale > 0.0 else 0.0
        if stagnant >= 10 and res < 100.0 * opts.tol:
            return lam, u, it, res
        direction = solve_k(g)
        slope = float(g @ direction)
        if not slope > 0.0:
            stagnant += 1
            hard_fails += 1
            if hard_fails >= 3:
                break
            continue
        tau = step
        accepted = False
        while tau > 1e-18:
            cand = u - tau * direction
            e2, m2 = eval_vals(cand)
            if m2 > 0.0 and e2 / m2 <= lam - opts.armijo * tau * slope:
                accepted = True
                break
            tau *= opts.backtrack
        if not accepted:
            stagnant += 1
            hard_fails += 1
            if hard_fails >= 3:
                break
            step = max(step * opts.backtrack, 1e-14)
            continue
        hard_fails = 0
        u = np.abs(cand) / m2 ** (1.0 / p)
        energy, mass, ge, gd = eval_full(u)
        lam_new = energy / mass
        stagnant = stagnant + 1 if abs(lam_new - lam) <= opts.tol * abs(lam) else 0
        lam = lam_new
        step = tau * opts.grow
    if res < 100.0 * opts.tol:
        return lam, u, opts.max_iter, res
    raise SolverConvergenceError(
        f"quotient minimizer did not converge (residual {res:.3e})",
        lam=lam,
        field=u,
        iterations=opts.max_iter,
        residual=res,
    )


def _tridiag_solver(facew):
    """Banded solve with the p=2 stiffness matrix of the weighted 1D grid."""
    n = facew.shape[0] - 1
    ab = np.zeros((3, n))
    ab[1, :] = facew[:n] + facew[1:]
    ab[0, 1:] = -facew[1:n]
    ab[2, :-1] = -facew[1:n]
    floor = 1e-14 * max(float(facew.max()), 1.0)
    ab[1, :] = np.maximum(ab[1, :], floor)

    def solve(g):
        return solve_banded((1, 1), ab, g)

    return solve


def _interval_mask(L, n):
    h = L / (n + 1)
    occ = np.zeros(n + 2, bool)
    occ[1:-1] = True
    return RasterMask(h=h, anchor=(0.0,), occ=occ), h


def _solve_1d_core(facew, cellw, p, u0, opts):
    def eval_full(u):
        return _kernels.p_quotient_parts_1d(u, facew, cellw, p)

    def eval_vals(u):
        return _kernels.p_quotient_vals_1d(u, facew, cellw, p)

    return _minimize_quotient(u0, p, eval_full, eval_vals, _tridiag_solver(facew), opts)


def lambda1_1d(L, w, p, n, opts=DEFAULT_OPTS):
    """First Dirichlet eigenvalue on (0, L) with weight w, on n interior
    nodes. Returns (lambda, GridField)."""
    p = _check_p(p)
    if n < 8:
        raise DomainError(f"need at least 8 interior points, got {n}")
    if not L > 0.0:
        raise DomainError(f"interval length must be positive, got {L}")
    mask, h = _interval_mask(L, n)
    x = h * np.arange(1, n + 1)
    domain = Box([0.0], [L])
    wvals = np.asarray(
        (w or Constant(1.0)).values(x[:, None], domain), float
    )
    if np.any(wvals < 0.0):
        raise DegenerateWeightError("weight must be non-negative")
    cellw = wvals * h
    if not cellw.sum() > 0.0:
        raise DegenerateWeightError("weight vanishes on the whole grid")
    facew = np.full(n + 1, h ** (1.0 - p))
    rng = np.random.default_rng(opts.seed)
    bump = np.minimum(x, L - x)
    u0 = bump * (1.0 + opts.jitter * (rng.random(n) - 0.5))
    try:
        lam, u, it, res = _solve_1d_core(facew, cellw, p, u0, opts)
    except SolverConvergenceError as err:
        err.field = _embed_1d(mask, err.field, lam=err.lam, err=True)
        raise
    meta = {"iterations": it, "residual": res, "seed": opts.seed, "lambda": lam}
    return lam, _embed_1d(mask, u, meta=meta)


def _embed_1d(mask, u_int, meta=None, lam=None, err=False):
    full = np.zeros(mask.occ.shape)
    if u_int is not None:
        full[mask.occ] = u_int
    return GridField(mask, full, meta or {})


def _radial_grid(R, n):
    h = R / (n + 0.5)
    r = h * (np.arange(n) + 0.5)
    occ = np.zeros(n + 1, bool)
    occ[:n] = True
    mask = RasterMask(h=h, anchor=(0.5 * h,), occ=occ)
    return mask, h, r


def _power_integral(a, b, m):
    """integral of r^m over [a, b] (vectorized, m > -1)."""
    e = m + 1.0
    return (b**e - a**e) / e


def _power_dist_integral(a, b, R, m, gamma):
    """integral of r^m (R - r)^gamma over [a, b] for integer m >= 0,
    gamma > -1, 0 <= a <= b <= R; exact by binomial expansion."""
    total = np.zeros_like(np.asarray(a, float))
    for k in range(int(m) + 1):
        e = gamma + k + 1.0
        coef = math.comb(int(m), k) * R ** (m - k) * (-1.0) ** k
        total = total + coef * ((R - a) ** e - (R - b) ** e) / e
    return total


def _radial_cell_mass(w, N, denom, a, b, R):
    """Exact integral of r^denom * w(r) over each cell [a_i, b_i]."""
    if w is None or isinstance(w, Constant):
        c = 1.0 if w is None else w.c
        return c * _power_integral(a, b, denom)
    if isinstance(w, SpikeRadial):
        e = denom + 1.0 - N
        if e <= -1.0:
            raise DomainError("spike profile not integrable against this measure")
        hi = np.minimum(b, w.eps)
        lo = np.minimum(a, w.eps)
        return _power_integral(lo, hi, e)
    if isinstance(w, RadialPower):
        if w.center is not None and np.any(np.asarray(w.center) != 0.0):
            raise DomainError("radial reduction needs the weight centered at 0")
        e = denom + w.exponent
        if e <= -1.0:
            raise DomainError("radial power not integrable against this measure")
        return _power_integral(a, b, e)
    if isinstance(w, DistPower):
        if w.gamma <= -1.0:
            raise DomainError("distance power not integrable on the ball")
        return _power_dist_integral(a, b, R, int(round(denom)), w.gamma)
    if isinstance(w, GridSampled):
        mid = 0.5 * (a + b)
        vals = w.values(mid[:, None])
        return vals * _power_integral(a, b, denom)
    raise DomainError(f"unsupported weight kind for the radial solver: {w.kind}")


def lambda1_radial(N, R, p, w=None, denom_radial_power=None, n=512, opts=DEFAULT_OPTS):
    """First eigenvalue of the radial reduction on a ball of radius R:
    minimize  int r^(N-1) |u'|^p dr / int r^denom w(r) |u|^p dr
    with u(R) = 0 and the natural (free) condition at r = 0.

    denom defaults to N-1 (the plain radial reduction); the weight's
    radial profile is integrated exactly cell by cell, so passing the
    spike weight with the default denom yields the folded r^0 measure
    automatically. Returns (lambda, GridField)."""
    p = _check_p(p)
    if n < 16:
        raise DomainError(f"need at least 16 radial nodes, got {n}")
    if N < 1 or not R > 0.0:
        raise DomainError("need dimension >= 1 and a positive radius")
    denom = float(N - 1 if denom_radial_power is None else denom_radial_power)
    mask, h, r = _radial_grid(R, n)
    faces = h * np.arange(n + 1)  # face i sits at radius i*h
    facew = np.zeros(n + 1)
    facew[1:] = faces[1:] ** (N - 1.0) * h ** (1.0 - p)
    a = h * np.arange(n)
    b = a + h
    cellw = np.asarray(_radial_cell_mass(w, N, denom, a, b, R), float)
    if np.any(cellw < 0.0):
        raise DegenerateWeightError("weight must be non-negative")
    if not cellw.sum() > 0.0:
        raise DegenerateWeightError("weight vanishes on the whole grid")
    rng = np.random.default_rng(opts.seed)
    u0 = (1.0 - (r / R) ** 2) * (1.0 + opts.jitter * (rng.random(n) - 0.5))
    lam, u, it, res = _solve_1d_core(facew, cellw, p, u0, opts)
    meta = {
        "iterations": it,
        "residual": res,
        "seed": opts.seed,
        "lambda": lam,
        "kind": "radial",
        "N": N,
        "R": R,
        "denom_radial_power": denom,
    }
    return lam, _embed_1d(mask, u, meta=meta)


def lambda1_radial_coeff(N, R, p, gamma, n=512, opts=DEFAULT_OPTS, return_field=False):
    """First eigenvalue of the distance-power-coefficient problem on a
    ball: minimize int r^(N-1) (R-r)^gamma |u'|^p / int r^(N-1) |u|^p.

    The coefficient is integrated exactly over every face cell, which is
    what keeps gamma < 0 (singular at the boundary) accurate."""
    p = _check_p(p)
    if n < 16:
        raise DomainError(f"need at least 16 radial nodes, got {n}")
    if not -1.0 < gamma < p / N - 1.0:
        raise DomainError(
            f"gamma={gamma} outside the admissible range (-1, p/N - 1) = "
            f"(-1, {p / N - 1.0})"
        )
    mask, h, r = _radial_grid(R, n)
    facew = np.zeros(n + 1)
    fa = np.maximum(h * (np.arange(1, n + 1) - 0.5), 0.0)
    fb = np.minimum(fa + h, R)
    facew[1:] = _power_dist_integral(fa, fb, R, N - 1, gamma) / h**p
    a = h * np.arange(n)
    b = a + h
    cellw = _power_integral(a, b, float(N - 1))
    rng = np.random.default_rng(opts.seed)
    u0 = (1.0 - (r / R) ** 2) * (1.0 + opts.jitter * (rng.random(n) - 0.5))
    lam, u, it, res = _solve_1d_core(facew, cellw, p, u0, opts)
    if not return_field:
        return lam
    meta = {
        "iterations": it,
        "residual": res,
        "seed": opts.seed,
        "lambda": lam,
        "kind": "radial-coeff",
        "N": N,
        "R": R,
        "gamma": gamma,
    }
    return lam, _embed_1d(mask, u, meta=meta)


# ---------------------------------------------------------------------------
# 2D mask solver
# ---------------------------------------------------------------------------


def _laplacian_solver(occ):
    idx = -np.ones(occ.shape, dtype=np.int64)
    cells = np.argwhere(occ)
    idx[tuple(cells.T)] = np.arange(cells.shape[0])
    ndofs = cells.shape[0]
    rows = []
    cols = []
    vals = []
    for k in range(ndofs):
        rows.append(k)
        cols.append(k)
        vals.append(2.0 * occ.ndim)
    for ax in range(occ.ndim):
        shifted = np.roll(idx, -1, axis=ax)
        sl = [slice(None)] * occ.ndim
        sl[ax] = slice(0, occ.shape[ax] - 1)
        here = idx[tuple(sl)].ravel()
        there = shifted[tuple(sl)].ravel()
        both = (here >= 0) & (there >= 0)
        for i, j in zip(here[both], there[both]):
            rows.extend((i, j))
            cols.extend((j, i))
            vals.extend((-1.0, -1.0))
    mat = csc_matrix((vals, (rows, cols)), shape=(ndofs, ndofs))
    lu = splu(mat)

    def solve(g):
        return lu.solve(g)

    return solve


def lambda1_2d_fd(mask: RasterMask, w, p, opts=DEFAULT_OPTS, domain=None):
    """First Dirichlet eigenvalue on a 2D rasterized domain.

    Minimizes the full-gradient quotient with hard zeros off the mask.
    Initial field is the distance-transform bump with seeded jitter.
    Returns (lambda, GridField)."""
    p = _check_p(p)
    if mask.ndim != 2:
        raise DomainError("lambda1_2d_fd needs a 2D mask")
    if mask.count < 16:
        raise TooCoarseGridError(
            f"mask has {mask.count} interior cells; need at least 16"
        )
    h = mask.h
    occ = mask.occ
    dom = domain if domain is not None else Raster(mask)
    wvals = _weight_on_cells(w, mask, dom)
    wcell = np.zeros(occ.shape)
    wcell[occ] = wvals
    if not wcell.sum() > 0.0:
        raise DegenerateWeightError("weight vanishes on the whole mask")
    ce = h ** (2.0 - p)  # N = 2
    cd = h**2
    full = np.zeros(occ.shape)

    def eval_full(u_int):
        full[occ] = u_int
        e, m, ge, gd = _kernels.p_quotient_parts_2d(full, wcell, p)
        return ce * e, cd * m, ce * ge[occ], cd * gd[occ]

    def eval_vals(u_int):
        full[occ] = u_int
        e, m = _kernels.p_quotient_vals_2d(full, wcell, p)
        return ce * e, cd * m

    solve_k = _laplacian_solver(occ)
    rng = np.random.default_rng(opts.seed)
    bump = (mask.edt_cells() * h)[occ]
    u0 = bump * (1.0 + opts.jitter * (rng.random(bump.shape[0]) - 0.5))
    lam, u, it, res = _minimize_quotient(u0, p, eval_full, eval_vals, solve_k, opts)
    out = np.zeros(occ.shape)
    out[occ] = u
    meta = {"iterations": it, "residual": res, "seed": opts.seed, "lambda": lam}
    return lam, GridField(mask, out, meta)


# ---------------------------------------------------------------------------
# Quotient evaluation and weak residual for arbitrary fields
# ---------------------------------------------------------------------------


def _field_parts(u: GridField, w, p, domain):
    mask = u.mask
    h = mask.h
    ndim = mask.ndim
    dom = domain if domain is not None else Raster(mask)
    wvals = _weight_on_cells(w, mask, dom)
    if ndim == 1:
        occ_idx = np.flatnonzero(mask.occ)
        if occ_idx.size and (occ_idx[-1] - occ_idx[0] + 1 != occ_idx.size):
            raise DomainError("1D field must occupy a contiguous block")
        u_int = u.values[mask.occ]
        facew = np.full(u_int.size + 1, h ** (1.0 - p))
        cellw = wvals * h
        e, m, ge, gd = _kernels.p_quotient_parts_1d(u_int, facew, cellw, p)
        return e, m, ge, gd, mask.occ
    if ndim == 2:
        wcell = np.zeros(mask.occ.shape)
        wcell[mask.occ] = wvals
        e, m, ge, gd = _kernels.p_quotient_parts_2d(u.values, wcell, p)
        ce = h ** (ndim - p)
        cd = h**ndim
        return ce * e, cd * m, ce * ge[mask.occ], cd * gd[mask.occ], mask.occ
    raise DomainError("quotient evaluation supports 1D and 2D fields")


def rayleigh_quotient(u: GridField, w, p, energy="full", domain=None):
    """Discrete quotient of a trial field: p-energy over weighted p-mass.

    energy="pseudo" swaps in the coordinate-wise (anisotropic) energy
    sum_j int |d_j u|^p, whose box minimizers are known in closed form.
    Any trial field gives an upper bound on the solver's eigenvalue."""
    p = _check_p(p)
    mask = u.mask
    h = mask.h
    ndim = mask.ndim
    if energy not in ("full", "pseudo"):
        raise DomainError(f"unknown energy mode {energy!r}")
    dom = domain if domain is not None else Raster(mask)
    wvals = _weight_on_cells(w, mask, dom)
    if ndim == 1:
        u_int = u.values[mask.occ]
        mass = float(np.sum(wvals * np.abs(u_int) ** p)) * h
        e_raw = _kernels.pseudo_energy_1d(u_int, p)
        energy_val = e_raw * h ** (1.0 - p)
    elif ndim == 2:
        wcell = np.zeros(mask.occ.shape)
        wcell[mask.occ] = wvals
        if energy == "pseudo":
            e_raw = _kernels.pseudo_energy_2d(u.values, p)
        else:
            e_raw, _ = _kernels.p_quotient_vals_2d(u.values, wcell, p)
        energy_val = e_raw * h ** (2.0 - p)
        mass = float(np.sum(wcell * np.abs(u.values) ** p)) * h**2
    else:
        raise DomainError("quotient evaluation supports 1D and 2D fields")
    if not mass > 0.0:
        raise DegenerateWeightError("trial field has zero weighted mass")
    return energy_val / mass


def weak_residual(u: GridField, lam, w, p, domain=None):
    """Relative weak-form mismatch over the interior indicator test basis.

    max_m |a(u, phi_m) - lam b(u, phi_m)| / max_m (|a| + lam |b|),
    zero exactly at a discrete eigenpair."""
    p = _check_p(p)
    e, m, ge, gd, occ = _field_parts(u, w, p, domain)
    num = np.abs(ge - lam * gd)
    den = np.abs(ge) + abs(lam) * np.abs(gd)
    top = float(num.max()) if num.size else 0.0
    bot = float(den.max()) if den.size else 0.0
    return top / bot if bot > 0.0 else 0.0


# ---------------------------------------------------------------------------
# Field persistence: portable grid file + JSON sidecar
# ---------------------------------------------------------------------------


def save_field(path, field: GridField):
    save_grid(path, field.mask, values=field.interior)
    sidecar = {
        "lambda": field.meta.get("lambda"),
        "iterations": field.meta.get("iterations"),
        "residual": field.meta.get("residual"),
        "seed": field.meta.get("seed"),
        "h": field.mask.h,
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def load_field(path):
    mask, values = load_grid(path)
    if values is None:
        raise DomainError(f"{path} carries no field values")
    try:
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        meta = {}
    return GridField(mask, values, meta)

"""Generalized sine functions and the closed-form first eigenvalues built
from them.

The central object is the half-arch integral

    F_p(y) = integral_0^y ((p-1)/(1-t^p))^(1/p) dt,   0 <= y <= 1,

whose value at y=1 is pi_p/2. Its inverse on [0, pi_p/2] is the
generalized sine sin_p, extended to [0, pi_p] by reflection. Everything
else here (interval and box eigenvalues, the anisotropic-to-isotropic
sandwich) is algebra on top of pi_p and sin_p.

The integrand blows up like (1-t)^(-1/p) at t=1. All quadrature goes
through the substitution t = 1 - u^q with q = p/(p-1), which turns the
integrand into the smooth function

    q (p-1)^(1/p) * h(1 - u^q)^(-1/p),   h(t) = (1 - t^p)/(1 - t),

so plain adaptive Simpson converges fast and to full accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, QuadratureError

__all__ = [
    "QuadratureSpec",
    "DEFAULT_QUAD",
    "pi_p",
    "sin_p",
    "sin_p_vec",
    "lambda1_interval",
    "lambda1_mixed",
    "pseudo_lambda1_box",
    "BoxEigenfunction",
    "sandwich_from_pseudo",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerance and recursion budget for the singular quadratures."""

    rel_tol: float = 1e-11
    max_depth: int = 60

    def __post_init__(self):
        if not 0.0 < self.rel_tol <= 1e-2:
            raise ValueError(f"rel_tol must lie in (0, 1e-2], got {self.rel_tol}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")


DEFAULT_QUAD = QuadratureSpec()


def _adaptive_simpson(f, a, b, rel_tol, max_depth):
    if b <= a:
        return 0.0
    fa = f(a)
    m = 0.5 * (a + b)
    fm = f(m)
    fb = f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = rel_tol * (abs(whole) + 1e-300)
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    if depth <= 0:
        raise QuadratureError(
            f"adaptive Simpson did not converge on [{a}, {b}] within depth budget"
        )
    return _simpson_rec(
        f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1
    ) + _simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)


def _arch_ratio(x, p):
    """(1 - t^p)/(1 - t) evaluated at t = 1 - x, stable for all x in [0, 1].

    The expm1/log1p form is used on the whole range: a two-branch version
    has a small jump at the switch point, which an adaptive rule then
    tries to resolve forever.
    """
    if x <= 0.0:
        return float(p)
    if x >= 1.0:
        return 1.0
    return -math.expm1(p * math.log1p(-x)) / x


def _check_p(p):
    if not p > 1.0:
        raise DomainError(f"exponent p must exceed 1, got {p}")
    return float(p)


def _halfarch_integral(y, p, quad):
    """F_p(y) via the desingularizing substitution (see module docstring)."""
    if y <= 0.0:
        return 0.0
    y = min(float(y), 1.0)
    q = p / (p - 1.0)
    c = q * (p - 1.0) ** (1.0 / p)
    u_lo = (1.0 - y) ** (1.0 / q)

    def g(u):
        return c * _arch_ratio(u**q, p) ** (-1.0 / p)

    return _adaptive_simpson(g, u_lo, 1.0, quad.rel_tol, quad.max_depth)


@lru_cache(maxsize=256)
def _pi_p_cached(p, quad):
    return 2.0 * _halfarch_integral(1.0, p, quad)


def pi_p(p, quad=DEFAULT_QUAD):
    """First zero of sin_p: twice the full half-arch integral.

    pi_2 recovers the circular pi; pi_p decreases toward 2 as p grows and
    exceeds pi for p < 2.
    """
    p = _check_p(p)
    return _pi_p_cached(p, quad)


# Fixed high-order Gauss-Legendre rule for vectorized evaluation of the
# (smooth, substituted) half-arch integrand. Used by sin_p_vec only; the
# scalar path stays on the adaptive rule controlled by QuadratureSpec.
@lru_cache(maxsize=1)
def _gl_rule(n=96):
    xs, ws = np.polynomial.legendre.leggauss(n)
    return xs, ws


def _arch_ratio_vec(x, p):
    x = np.asarray(x, float)
    out = np.full(x.shape, float(p))
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    out[mid] = -np.expm1(p * np.log1p(-xm)) / xm
    out[x >= 1.0] = 1.0
    return out


def _halfarch_integral_fast(y, p):
    if y <= 0.0:
        return 0.0
    q = p / (p - 1.0)
    c = q * (p - 1.0) ** (1.0 / p)
    u_lo = (1.0 - min(float(y), 1.0)) ** (1.0 / q)
    xs, ws = _gl_rule()
    mid = 0.5 * (u_lo + 1.0)
    rad = 0.5 * (1.0 - u_lo)
    u = mid + rad * xs
    vals = c * _arch_ratio_vec(u**q, p) ** (-1.0 / p)
    return rad * float(ws @ vals)


def _sin_p_half(x, p, quad, integral):
    """Inverse of F_p on [0, pi_p/2] by bracketed root finding."""
    half = 0.5 * _pi_p_cached(p, quad)
    if x <= 0.0:
        return 0.0
    if x >= half:
        return 1.0
    xtol = max(quad.rel_tol, 1e-14)
    return float(brentq(lambda y: integral(y) - x, 0.0, 1.0, xtol=xtol, rtol=8.9e-16))


def sin_p(x, p, quad=DEFAULT_QUAD):
    """Generalized sine on [0, pi_p]: the unique y with F_p(y) = x on the
    rising half, extended by the reflection sin_p(pi_p - x) = sin_p(x)."""
    p = _check_p(p)
    pi = _pi_p_cached(p, quad)
    tol = 1e-12 * pi
    if x < -tol or x > pi + tol:
        raise DomainError(f"sin_p argument {x} outside [0, pi_p] = [0, {pi}]")
    x = min(max(float(x), 0.0), pi)
    if x > 0.5 * pi:
        x = pi - x
    return _sin_p_half(x, p, quad, lambda y: _halfarch_integral(y, p, quad))


def sin_p_vec(xs, p, quad=DEFAULT_QUAD):
    """Vectorized sin_p over an array of arguments in [0, pi_p].

    Uses a fixed-order Gauss-Legendre rule on the substituted integrand,
    accurate to ~1e-13; meant for sampling eigenfunctions on grids.
    """
    p = _check_p(p)
    pi = _pi_p_cached(p, quad)
    xs = np.asarray(xs, float)
    tol = 1e-12 * pi
    if np.any(xs < -tol) or np.any(xs > pi + tol):
        raise DomainError("sin_p argument outside [0, pi_p]")
    folded = np.where(xs > 0.5 * pi, pi - xs, xs)
    out = np.empty(folded.shape, float)
    flat = folded.ravel()
    res = out.ravel()
    cache: dict[float, float] = {}
    for i, x in enumerate(flat):
        key = float(x)
        got = cache.get(key)
        if got is None:
            got = _sin_p_half(key, p, quad, lambda y: _halfarch_integral_fast(y, p))
            cache[key] = got
        res[i] = got
    return out


def lambda1_interval(L, p, quad=DEFAULT_QUAD):
    """First Dirichlet eigenvalue of the 1D p-Laplacian on (0, L):
    (pi_p / L)^p."""
    p = _check_p(p)
    if not L > 0.0:
        raise DomainError(f"interval length must be positive, got {L}")
    return pi_p(p, quad) ** p / float(L) ** p


def lambda1_mixed(L, p, quad=DEFAULT_QUAD):
    """Companion closed form with the extra 2^p factor: 2^p pi_p^p / L^p."""
    p = _check_p(p)
    if not L > 0.0:
        raise DomainError(f"interval length must be positive, got {L}")
    return 2.0**p * pi_p(p, quad) ** p / float(L) ** p


@dataclass(frozen=True)
class BoxEigenfunction:
    """Separable first eigenfunction of the anisotropic (coordinate-wise)
    p-Laplacian on a box: the product of one sin_p arch per axis."""

    lengths: tuple
    p: float
    origin: tuple = None

    def __call__(self, points, quad=DEFAULT_QUAD):
        pts = np.asarray(points, float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        ndim = len(self.lengths)
        if pts.shape[1] != ndim:
            raise DomainError(
                f"points have dimension {pts.shape[1]}, box has {ndim}"
            )
        origin = np.zeros(ndim) if self.origin is None else np.asarray(self.origin)
        pi = pi_p(self.p, quad)
        out = np.ones(pts.shape[0])
        for j, lj in enumerate(self.lengths):
            rel = (pts[:, j] - origin[j]) / lj
            inside = (rel >= 0.0) & (rel <= 1.0)
            args = np.clip(rel, 0.0, 1.0) * pi
            vals = sin_p_vec(args, self.p, quad)
            out *= np.where(inside, vals, 0.0)
        return out[0] if single else out


def pseudo_lambda1_box(lengths, p, quad=DEFAULT_QUAD):
    """First eigenvalue of the anisotropic p-Laplacian on a box, with the
    separable eigenfunction descriptor.

    Returns (sum_j (pi_p / L_j)^p, BoxEigenfunction).
    """
    p = _check_p(p)
    lengths = tuple(float(L) for L in lengths)
    if any(L <= 0.0 for L in lengths):
        raise DomainError("all box side lengths must be positive")
    pip = pi_p(p, quad)
    value = sum(pip**p / L**p for L in lengths)
    return value, BoxEigenfunction(lengths=lengths, p=p)


def sandwich_from_pseudo(lambda_hat, p, N):
    """Two-sided bracket for the isotropic first eigenvalue in terms of the
    anisotropic one, from the l^p/l^2 norm equivalence in R^N.

    Returns (lower, upper); the factor is N^((p-2)/2), applied on the upper
    side for p > 2 and on the lower side for p < 2.
    """
    p = _check_p(p)
    if not lambda_hat > 0.0:
        raise DomainError(f"lambda_hat must be positive, got {lambda_hat}")
    if N < 1:
        raise DomainError(f"dimension must be >= 1, got {N}")
    factor = float(N) ** (0.5 * (p - 2.0))
    if p > 2.0:
        return lambda_hat, factor * lambda_hat
    if p < 2.0:
        return factor * lambda_hat, lambda_hat
    return lambda_hat, lambda_hat

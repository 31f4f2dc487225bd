"""Smooth-norm machinery for L_p on dyadic grids.

The greedy step needs two things from the geometry of L_p: the norming
functional of a residual (the gradient of the norm) and the minimizer of the
strictly convex map ``lam -> ||y - lam * phi||_p``.  The minimizer is the root of

    d(lam) = integral |y - lam phi|^(p-2) (y - lam phi) phi,

which is continuous and strictly decreasing, so a bracketed Newton iteration
with bisection fallback always converges.  :func:`minimize_lines` does this for
a whole batch of (y, phi) pairs at once; everything else here is built on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .haar import DyadicFunction, _check_exponent, batch_lp_norm, common_refinement, lp_norm

_EPS = np.finfo(float).eps


class LineSearchError(RuntimeError):
    """The bracketed root search for the optimal step failed."""


@dataclass(frozen=True)
class NormingFunctional:
    density: DyadicFunction
    subject_norm: float

    def __call__(self, u: DyadicFunction) -> float:
        return pairing(self.density, u)


@dataclass(frozen=True)
class LineSearchResult:
    lambda_star: float
    residual_norm: float
    derivative_residual: float
    iterations: int


@dataclass(frozen=True)
class SmoothnessEstimate:
    t: float
    rho_hat: float
    sample_count: int


def conjugate_exponent(p: float) -> float:
    return p / (p - 1.0)


def pairing(g: DyadicFunction, u: DyadicFunction) -> float:
    """The duality bracket ``integral g * u`` over [0, 1)."""
    g, u = common_refinement(g, u)
    return math.fsum(g.values * u.values) * g.cell_width


def norming_density_array(values: np.ndarray, p: float, weight: float) -> np.ndarray:
    """Row-wise ``sign(y)|y|^(p-1) / ||y||^(p-1)``; zero rows must be excluded by the caller."""
    norms = batch_lp_norm(values, p, weight)[..., None]
    return np.sign(values) * (np.abs(values) / norms) ** (p - 1.0)


def norming_functional(y: DyadicFunction, p: float) -> NormingFunctional:
    _check_exponent(p)
    norm = lp_norm(y, p)
    scale = float(np.abs(y.values).max(initial=0.0))
    if norm == 0.0 or norm <= 1e-14 * scale:
        raise ValueError("the zero function has no norming functional")
    g = np.sign(y.values) * (np.abs(y.values) / norm) ** (p - 1.0)
    return NormingFunctional(DyadicFunction(y.level, g), norm)


def _derivative(Y, Phi, lam, p, weight):
    """d(lam) and d'(lam) for each row; cells where the residual vanishes contribute 0."""
    r = Y - lam[:, None] * Phi
    a = np.abs(r)
    t = np.zeros_like(a)
    np.power(a, p - 2.0, out=t, where=a > 0)
    d = weight * np.sum(t * r * Phi, axis=1)
    dd = -(p - 1.0) * weight * np.sum(t * Phi * Phi, axis=1)
    return d, dd


def _derivative_only(Y, Phi, lam, p, weight):
    r = Y - lam[..., None] * Phi
    a = np.abs(r)
    t = np.zeros_like(a)
    np.power(a, p - 1.0, out=t, where=a > 0)
    return weight * np.sum(np.sign(r) * t * Phi, axis=-1)


def minimize_lines(
    Y: np.ndarray,
    Phi: np.ndarray,
    p: float,
    weight: float,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimize ``||Y[b] - lam Phi[b]||_p`` over ``lam`` for every row ``b``.

    Returns ``(lam, derivative_residual, iterations)``.  Rows of ``Phi`` must be
    nonzero.  Raises :class:`LineSearchError` if bracketing or the iteration
    cap fails.
    """
    _check_exponent(p)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(Phi))):
        raise ValueError("non-finite input to line search")
    B = Y.shape[0]
    phi2 = np.sum(Phi * Phi, axis=1)
    if np.any(phi2 == 0):
        raise ValueError("search direction must be nonzero")
    lam = np.sum(Y * Phi, axis=1) / phi2
    if p == 2.0:
        d = _derivative_only(Y, Phi, lam, p, weight)
        return lam, np.abs(d), np.zeros(B, dtype=int)

    ny = batch_lp_norm(Y, p, weight)
    nphi = batch_lp_norm(Phi, p, weight)
    # |lam| > 2||y||/||phi|| gives a residual longer than y itself
    bound = 2.0 * ny / nphi
    scale = np.maximum(bound, np.finfo(float).tiny)
    lo, hi = -bound.copy(), bound.copy()
    zero_y = ny == 0
    for _ in range(64):
        dlo = _derivative_only(Y, Phi, lo, p, weight)
        dhi = _derivative_only(Y, Phi, hi, p, weight)
        bad_lo = (dlo < 0) & ~zero_y
        bad_hi = (dhi > 0) & ~zero_y
        if not (bad_lo.any() or bad_hi.any()):
            break
        width = hi - lo
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
    else:
        raise LineSearchError("could not bracket the optimal step")

    x = np.clip(lam, lo, hi)
    x[zero_y] = 0.0
    iters = np.zeros(B, dtype=int)
    done = zero_y.copy()
    dx = hi - lo
    dx_old = dx.copy()
    for it in range(1, max_iter + 1):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        xa = x[act]
        d, dd = _derivative(Y[act], Phi[act], xa, p, weight)
        la = np.where(d > 0, xa, lo[act])
        ha = np.where(d < 0, xa, hi[act])
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = xa - d / dd
        ok = (
            np.isfinite(newton)
            & (newton > la)
            & (newton < ha)
            & (np.abs(2.0 * d) <= np.abs(dx_old[act] * dd))
        )
        xn = np.where(ok, newton, 0.5 * (la + ha))
        step = xn - xa
        dx_old[act] = dx[act]
        dx[act] = step
        lo[act], hi[act], x[act] = la, ha, xn
        iters[act] = it
        tol = 2.0 * _EPS * (np.abs(xn) + _EPS * scale[act])
        converged = (d == 0) | (np.abs(step) <= tol) | (ha - la <= tol)
        x[act[d == 0]] = xa[d == 0]
        done[act[converged]] = True
    else:
        if not done.all():
            raise LineSearchError(f"line search did not converge in {max_iter} iterations")

    dres = np.abs(_derivative_only(Y, Phi, x, p, weight))
    if p < 2.0:
        x, dres = _polish_at_kinks(Y, Phi, p, weight, x, lo, hi, dres, ny, nphi)
    return x, dres, iters


def _polish_at_kinks(Y, Phi, p, weight, x, lo, hi, dres, ny, nphi):
    # for p < 2, d has infinite slope where a cell of the residual vanishes;
    # a root sitting exactly there is only reachable by evaluating the kink
    target = 1e-12 * np.maximum(1.0, ny ** (p - 1.0) * nphi)
    rows = np.flatnonzero(dres > target)
    if rows.size == 0:
        return x, dres
    x, dres = x.copy(), dres.copy()
    for b in rows:
        nz = Phi[b] != 0
        kinks = Y[b, nz] / Phi[b, nz]
        width = hi[b] - lo[b]
        near = kinks[(kinks >= lo[b] - width) & (kinks <= hi[b] + width)]
        if near.size == 0:
            continue
        vals = np.abs(_derivative_only(Y[b], Phi[b], near, p, weight))
        j = int(np.argmin(vals))
        if vals[j] < dres[b]:
            x[b], dres[b] = near[j], vals[j]
    return x, dres


def line_minimize(y: DyadicFunction, phi: DyadicFunction, p: float) -> LineSearchResult:
    """Optimal step ``lam`` minimizing ``||y - lam * phi||_p``."""
    _check_exponent(p)
    y, phi = common_refinement(y, phi)
    if phi.is_zero():
        raise ValueError("search direction must be nonzero")
    lam, dres, iters = minimize_lines(y.values[None], phi.values[None], p, y.cell_width)
    res = lp_norm(y - phi * float(lam[0]), p)
    return LineSearchResult(float(lam[0]), res, float(dres[0]), int(iters[0]))


def line_derivative(y: DyadicFunction, phi: DyadicFunction, p: float, lam: float) -> float:
    """``d(lam)``: derivative of ``||y - lam phi||_p^p / p`` up to sign."""
    y, phi = common_refinement(y, phi)
    return float(_derivative_only(y.values, phi.values, np.float64(lam), p, y.cell_width))


def _random_unit_functions(rng, count, level, p, weight):
    v = rng.standard_normal((count, 1 << level))
    return v / batch_lp_norm(v, p, weight)[:, None]


def estimate_modulus(p: float, t: float, sample_count: int, seed: int, level: int = 4) -> SmoothnessEstimate:
    """Sampled lower bound on the modulus of smoothness of L_p at ``t``.

    Pairs ``(x, y)`` live on a ``2**level`` cell grid; the same seed gives the
    same directions for every ``t``.
    """
    _check_exponent(p)
    if not 0.0 < t <= 1.0:
        raise ValueError("t must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    weight = 2.0 ** -level
    x = _random_unit_functions(rng, sample_count, level, p, weight)
    y = t * _random_unit_functions(rng, sample_count, level, p, weight)
    vals = 0.5 * (batch_lp_norm(x + y, p, weight) + batch_lp_norm(x - y, p, weight)) - 1.0
    return SmoothnessEstimate(t, max(0.0, float(vals.max())), sample_count)


def gamma_bound_exponent(p: float, m: int) -> float:
    """Shape ``m**(p/(2-2p))`` (p <= 2) or ``m**((2-2p)/p)`` (p > 2) of ``1 - gamma``."""
    _check_exponent(p)
    if m < 1:
        raise ValueError("m must be at least 1")
    e = p / (2.0 - 2.0 * p) if p <= 2.0 else (2.0 - 2.0 * p) / p
    return float(m) ** e

"""Independent reference computations shared by the test modules.

These deliberately avoid the package's numerics: the line search oracle is
a golden-section search carried out in multiprecision arithmetic.
"""

import mpmath
import numpy as np

# the cost is flat like |delta|^p at a minimizer where the residual vanishes
# on the support of phi, so resolving delta ~ 1e-20 at p = 5 needs ~100 digits
GOLDEN_DPS = 110


def lp_norm_mp(values, p):
    """L_p norm of cell values on a uniform grid of [0, 1), in mpmath."""
    n = len(values)
    s = mpmath.fsum(abs(mpmath.mpf(float(v))) ** p for v in values)
    return (s / n) ** (mpmath.mpf(1) / p)


def golden_section_lambda(y, phi, p, rel_tol=mpmath.mpf("1e-22")):
    """argmin over lam of ||y - lam phi||_p by golden-section search.

    The minimizer satisfies |lam| ||phi|| <= 2 ||y||, which gives the bracket.
    Returns a float.
    """
    with mpmath.workdps(GOLDEN_DPS):
        p = mpmath.mpf(p)
        Y = [mpmath.mpf(float(v)) for v in y]
        F = [mpmath.mpf(float(v)) for v in phi]

        def cost(lam):
            # ||.||_p^p has the same minimizer as the norm
            return mpmath.fsum(abs(a - lam * b) ** p for a, b in zip(Y, F))

        ny = mpmath.fsum(abs(a) ** p for a in Y) ** (1 / p)
        nf = mpmath.fsum(abs(b) ** p for b in F) ** (1 / p)
        R = 2 * ny / nf
        lo, hi = -R, R
        g = (mpmath.sqrt(5) - 1) / 2
        c, d = hi - g * (hi - lo), lo + g * (hi - lo)
        fc, fd = cost(c), cost(d)
        while hi - lo > rel_tol * R:
            if fc < fd:
                hi, d, fd = d, c, fc
                c = hi - g * (hi - lo)
                fc = cost(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + g * (hi - lo)
                fd = cost(d)
        return float((lo + hi) / 2)


def random_line_case(rng):
    """A seeded (y, phi, p) triple on a random dyadic grid."""
    level = int(rng.integers(1, 6))
    n = 2**level
    p = float(rng.uniform(1.2, 5.0))
    y = rng.standard_normal(n) * 10.0 ** rng.uniform(-3, 3)
    phi = rng.standard_normal(n)
    if rng.random() < 0.3:
        # Haar-like sparse direction, the case the greedy steps actually hit
        phi = np.where(rng.random(n) < 0.5, 0.0, np.sign(phi))
        if not phi.any():
            phi[0] = 1.0
    return level, y, phi, p

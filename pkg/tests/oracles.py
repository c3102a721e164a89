"""Independent reference computations used by the tests.

Nothing here calls into the package's solvers; each oracle is a closed form,
a series, or an adaptive quadrature written from scratch.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy import integrate, optimize
from scipy.special import spherical_jn, spherical_yn


def bump(r, V0, R=1.0):
    r = np.asarray(r, dtype=float)
    u = (r / R) ** 2
    inside = u < 1
    return np.where(inside, V0 * np.exp(1.0 - 1.0 / np.where(inside, 1.0 - u, 1.0)), 0.0)


def bessel_series(nu: float, x: float, terms: int = 200) -> float:
    """J_nu(x) = sum_m (-1)^m (x/2)^{2m+nu} / (m! Gamma(m+nu+1)), summed in mpmath."""
    mpmath.mp.dps = 40
    x2 = mpmath.mpf(x) / 2
    s = mpmath.mpf(0)
    for m in range(terms):
        t = (-1) ** m * x2 ** (2 * m + nu) / (mpmath.factorial(m) * mpmath.gamma(m + nu + 1))
        s += t
        if m > 5 and abs(t) < mpmath.mpf(10) ** -35 * abs(s):
            break
    return float(s)


def square_well_phase(l: int, V0: float, R: float, h: float) -> float:
    """Exact 3-D phase shift delta_l of V0 * 1[r < R] at unit energy.

    Interior Riccati-Bessel x j_l(x) at kappa = sqrt(1-V0)/h matched to
    cos(delta) x j_l(x) - sin(delta) x y_l(x) at k = 1/h.
    """
    k = 1.0 / h
    kap = math.sqrt(1.0 - V0) / h

    def rj(x):
        return x * spherical_jn(l, x), spherical_jn(l, x) + x * spherical_jn(l, x, derivative=True)

    def ry(x):
        return x * spherical_yn(l, x), spherical_yn(l, x) + x * spherical_yn(l, x, derivative=True)

    fi, dfi = rj(kap * R)
    L = kap * dfi / fi
    j, dj = rj(k * R)
    y, dy = ry(k * R)
    return math.atan2(L * j - k * dj, L * y - k * dy)


def born_phase(l: int, V0: float, h: float, R: float = 1.0) -> float:
    """First Born phase shift -k^3 int V r^2 j_l(kr)^2 dr (d = 3)."""
    k = 1.0 / h
    val, _ = integrate.quad(lambda r: bump(r, V0, R) * r * r * spherical_jn(l, k * r) ** 2, 0, R, limit=400, epsabs=1e-16)
    return -(k**3) * val


def r_min(b: float, V0: float, R: float = 1.0) -> float:
    """Turning point: largest root of r^2 (1 - V(r)) = b^2."""
    if b == 0:
        return 0.0
    return optimize.brentq(lambda r: r * r * (1.0 - bump(r, V0, R)) - b * b, 1e-12, R, xtol=1e-15, rtol=1e-15)


def deflection_quadrature(b: float, V0: float, R: float = 1.0) -> float:
    """Theta(b) = pi - 2 int_{r_min}^inf b / (r^2 sqrt(1 - V - b^2/r^2)) dr.

    The piece inside the support uses r = r_min + u^2, which removes the inverse
    square-root endpoint singularity; outside the support the integral is arcsin(b/R)
    plus the free remainder evaluated in closed form.
    """
    if b >= R:
        return 0.0
    rm = r_min(b, V0, R)

    def g(u):
        r = rm + u * u
        q = 1.0 - bump(r, V0, R) - b * b / (r * r)
        return 2.0 * u * b / (r * r * math.sqrt(max(q, 1e-300)))

    inner, _ = integrate.quad(g, 0.0, math.sqrt(R - rm), limit=400, epsabs=1e-14, epsrel=1e-13)
    # int_R^inf b dr / (r^2 sqrt(1 - b^2/r^2)) = arcsin(b/R)
    outer = math.asin(b / R)
    return math.pi - 2.0 * (inner + outer)


def wkb_eigenphase(b: float, V0: float, h: float, R: float = 1.0) -> float:
    """Semiclassical 2 delta at impact parameter b: (2/h) int (p_r - p_r^free) dr."""
    rm = r_min(b, V0, R)

    def g(u):
        r = rm + u * u
        return 2.0 * u * math.sqrt(max(1.0 - bump(r, V0, R) - b * b / (r * r), 0.0))

    inner, _ = integrate.quad(g, 0.0, math.sqrt(R - rm), limit=400, epsabs=1e-14)
    free = math.sqrt(R * R - b * b) - b * math.acos(b / R)
    return 2.0 * (inner - free) / h


def count_roots(fn, lo: float, hi: float, n: int = 2000) -> int:
    """Sign changes of fn on a fine grid, each refined by bisection."""
    x = np.linspace(lo, hi, n)
    y = np.array([fn(v) for v in x])
    roots = 0
    for a, b, ya, yb in zip(x[:-1], x[1:], y[:-1], y[1:]):
        if ya == 0 or ya * yb < 0:
            optimize.bisect(fn, a, b) if ya * yb < 0 else None
            roots += 1
    return roots


def semiclassical_pairing(W, h: float, n: int = 4001) -> complex:
    """(1/Vol) int_I (e^{i W/h} - 1) for a central 3-D problem with R = 1: int_0^1 (e^{iW(b)/h}-1) 2b db."""
    b = np.linspace(0.0, 1.0, n)
    vals = (np.exp(1j * np.asarray([W(x) for x in b]) / h) - 1.0) * 2 * b
    return complex(integrate.simpson(vals.real, x=b), integrate.simpson(vals.imag, x=b))

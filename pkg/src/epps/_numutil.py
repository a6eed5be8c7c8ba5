"""Small numerical primitives shared by the analytic modules.

Everything here is elementary calculus written to stay accurate near
removable singularities (vanishing exponents, coincident decay rates).
"""

import numpy as np


def expm1_over_x(x):
    """(e^x - 1)/x, stable at x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    out = np.expm1(safe) / safe
    return np.where(small, 1.0 + x / 2.0 + x * x / 6.0, out)


def xexpx_minus_expm1_over_x2(x):
    """(x e^x - (e^x - 1))/x^2, stable at x = 0.  Equals d/dx[expm1(x)] / ... used
    for derivatives of expm1_over_x: d/dx[(e^x-1)/x] = this function."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    out = (safe * np.exp(safe) - np.expm1(safe)) / (safe * safe)
    return np.where(small, 0.5 + x / 3.0 + x * x / 8.0, out)


def int_lin_exp(a, b, k, lo, hi, shift=0.0):
    """Integral of (a + b*s) * exp(k*(s - shift)) over s in [lo, hi].

    The shift keeps exponent arguments small when the segment sits far from
    the kernel center.  Exact closed form; k may be zero.
    """
    if hi <= lo:
        return 0.0
    if k == 0.0:
        return a * (hi - lo) + 0.5 * b * (hi * hi - lo * lo)

    def antider(s):
        # integral of (a + b s) e^{k(s-shift)} = e^{k(s-shift)} [(a + b s)/k - b/k^2]
        return np.exp(k * (s - shift)) * ((a + b * s) / k - b / (k * k))

    return antider(hi) - antider(lo)


def segments(lo, hi, *breaks):
    """Split [lo, hi] at the given interior breakpoints; yields (l, r) pairs."""
    pts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    return list(zip(pts[:-1], pts[1:]))


def triangle_exp_integral(dt, center, xi):
    """Integral of (dt - |s|) * exp(-|s - center|/xi) / (2 xi) over s in [-dt, dt].

    This is the double integral of a unit-mass two-sided exponential kernel
    (decay xi, centered at `center`) over the square [0, dt]^2, reduced to one
    dimension.  Exact piecewise closed form; xi must be > 0.
    """
    if dt <= 0.0:
        return 0.0
    total = 0.0
    for lo, hi in segments(-dt, dt, 0.0, center):
        mid = 0.5 * (lo + hi)
        b_tri = -1.0 if mid > 0 else 1.0  # dt - |s| = dt + b_tri * s
        k = (-1.0 if mid > center else 1.0) / xi  # exp(-|s-center|/xi)
        total += int_lin_exp(dt, b_tri, k, lo, hi, shift=center) / (2.0 * xi)
    return total


def triangle_onesided_exp_integral(dt, center, lam_left, lam_right, amp):
    """Integral of (dt - |s|) * g(s - center) over s in [-dt, dt] where
    g(u) = amp * exp(-lam_right * u) for u >= 0 and amp * exp(lam_left * u)
    for u < 0.  Rates may be numpy.inf, in which case that branch vanishes.
    """
    if dt <= 0.0:
        return 0.0
    total = 0.0
    for lo, hi in segments(-dt, dt, 0.0, center):
        mid = 0.5 * (lo + hi)
        b_tri = -1.0 if mid > 0 else 1.0
        if mid > center:
            if np.isinf(lam_right):
                continue
            k = -lam_right
        else:
            if np.isinf(lam_left):
                continue
            k = lam_left
        total += amp * int_lin_exp(dt, b_tri, k, lo, hi, shift=center)
    return total

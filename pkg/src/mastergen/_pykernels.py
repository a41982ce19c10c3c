"""Pure-Python implementation of the numerical kernels.

Mirrors ``_ckernels.pyx`` operation for operation so that both backends
return bit-identical results for the summation and root-finding kernels.
"""

import math

import numpy as np

NO_POLE = -1
WINDOW = 16


def neumaier_sum(x):
    """Compensated (Neumaier) sum of ``x`` taken in the given order."""
    s = 0.0
    c = 0.0
    for v in x:
        v = float(v)
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def secular_sums(weights, poles, anchor, offset):
    """Return ``(f, f', pole)`` for ``f(nu) = sum_m w_m / (nu + b_m)``.

    With ``anchor >= 0`` the evaluation point is ``nu = -b[anchor] + offset``
    and every denominator is formed as ``(b_m - b_anchor) + offset``, which
    keeps the pole-adjacent term exact.  With ``anchor < 0``, ``offset`` is
    ``nu`` itself.  ``pole`` is the index of a pole hit within one ulp, or
    ``NO_POLE``.  Terms are accumulated from the last index down.
    """
    n = len(poles)
    s = c = 0.0
    ds = dc = 0.0
    for m in range(n - 1, -1, -1):
        bm = float(poles[m])
        if anchor >= 0:
            den = (bm - float(poles[anchor])) + offset
            if den == 0.0:
                return 0.0, 0.0, m
        else:
            den = bm + offset
            if abs(den) <= math.ulp(bm):
                return 0.0, 0.0, m
        term = float(weights[m]) / den
        t = s + term
        if abs(s) >= abs(term):
            c += (s - t) + term
        else:
            c += (term - t) + s
        s = t
        term = -term / den
        t = ds + term
        if abs(ds) >= abs(term):
            dc += (ds - t) + term
        else:
            dc += (term - t) + ds
        ds = t
    return s + c, ds + dc, NO_POLE


def _split_sums(cw, poles, anchor, t):
    # psi and psi' of the anchored function with the anchor term removed
    n = len(poles)
    ba = float(poles[anchor])
    s = c = 0.0
    ds = dc = 0.0
    for m in range(n - 1, -1, -1):
        if m == anchor:
            continue
        den = (float(poles[m]) - ba) + t
        term = float(cw[m]) / den
        u = s + term
        if abs(s) >= abs(term):
            c += (s - u) + term
        else:
            c += (term - u) + s
        s = u
        term = -term / den
        u = ds + term
        if abs(ds) >= abs(term):
            dc += (ds - u) + term
        else:
            dc += (term - u) + ds
        ds = u
    return s + c, ds + dc


def _anchored_value(cw, poles, anchor, t):
    psi, _ = _split_sums(cw, poles, anchor, t)
    return float(cw[anchor]) / t + psi


def deflated_solve(cw, poles, k, bisect_frac, max_newton):
    """Root of ``h(nu) = sum_m cw_m / (nu + b_m)`` in ``(-b[k-1], -b[k])``.

    ``k`` is 1-based (``2 <= k <= N``) so the bracket poles are
    ``b[k-2] > b[k-1]`` in 0-based storage.  Returns
    ``(anchor, offset, newton_iterations, status)`` with status 0 for a
    Newton finish, 1 for the bisection fallback and 2 for a degenerate
    bracket.
    """
    left = k - 2
    right = k - 1
    bl = float(poles[left])
    br = float(poles[right])
    gap = bl - br
    if not gap > 64.0 * math.ulp(bl):
        return NO_POLE, 0.0, 0, 2

    half = 0.5 * gap
    hm = _anchored_value(cw, poles, right, -half)
    if hm > 0.0:
        anchor, lo, hi = right, -half, 0.0
    elif hm < 0.0:
        anchor, lo, hi = left, 0.0, half
    else:
        return right, -half, 0, 0

    width = bisect_frac * gap
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _anchored_value(cw, poles, anchor, mid) > 0.0:
            lo = mid
        else:
            hi = mid

    ca = float(cw[anchor])
    t = 0.5 * (lo + hi)
    iterations = 0
    converged = False
    while iterations < max_newton:
        iterations += 1
        psi, dpsi = _split_sums(cw, poles, anchor, t)
        h = ca / t + psi
        if h > 0.0:
            lo = t
        elif h < 0.0:
            hi = t
        else:
            converged = True
            break
        # Newton on t*h(t) = ca + t*psi(t), smooth across the anchor pole;
        # t - (ca + t*psi)/dphi rearranged so nothing cancels when t >> root
        dphi = psi + t * dpsi
        t_new = (t * t * dpsi - ca) / dphi if dphi != 0.0 else 0.5 * (lo + hi)
        if abs(t_new - t) <= 4.0 * math.ulp(t):
            if lo <= t_new <= hi:
                t = t_new
            converged = True
            break
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        t = t_new
        if hi - lo <= 2.0 * math.ulp(t):
            converged = True
            break
    if converged:
        return anchor, t, iterations, 0

    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 2.0 * math.ulp(mid):
            break
        if _anchored_value(cw, poles, anchor, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return anchor, 0.5 * (lo + hi), iterations, 1


def rk4_step(a, y, h):
    """One classical Runge-Kutta step of ``dy/dt = a @ y``."""
    k1 = a @ y
    k2 = a @ (y + (0.5 * h) * k1)
    k3 = a @ (y + (0.5 * h) * k2)
    k4 = a @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def power_iterate(b, x0, tol, max_iter):
    """Normalized power iteration; returns ``(rayleigh, vector, iterations)``.

    Stops once successive Rayleigh quotients differ by less than ``tol`` and
    the geometric tail estimate ``delta * q / (1 - q)`` is below ``tol`` as
    well; ``q`` is the per-step contraction of the differences measured over
    the last ``WINDOW`` steps, which averages out rounding noise.
    ``iterations == max_iter + 1`` signals non-convergence.
    """
    x = np.array(x0, dtype=float)
    x /= np.linalg.norm(x)
    prev = math.inf
    hist = [math.inf] * WINDOW
    for it in range(1, max_iter + 1):
        y = b @ x
        rq = float(x @ y)
        x = y / np.linalg.norm(y)
        delta = abs(rq - prev)
        if delta == 0.0:
            return rq, x, it
        if delta < tol:
            q = (delta / hist[it % WINDOW]) ** (1.0 / WINDOW)
            if q < 1.0 and delta * q / (1.0 - q) < tol:
                return rq, x, it
        hist[it % WINDOW] = delta
        prev = rq
    return prev, x, max_iter + 1

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Same contracts as ``_pykernels``; the summation and secular kernels perform
the identical sequence of floating-point operations so both backends agree
bit for bit.
"""

import numpy as np

from libc.math cimport fabs, nextafter, pow, INFINITY, sqrt

cdef enum:
    WINDOW = 16
    NO_POLE = -1


cdef inline double _ulp(double x) nogil:
    x = fabs(x)
    return nextafter(x, INFINITY) - x


cdef inline void _acc(double term, double* s, double* c) nogil:
    cdef double t = s[0] + term
    if fabs(s[0]) >= fabs(term):
        c[0] += (s[0] - t) + term
    else:
        c[0] += (term - t) + s[0]
    s[0] = t


def neumaier_sum(x):
    """Compensated (Neumaier) sum of ``x`` taken in the given order."""
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double s = 0.0, c = 0.0
    with nogil:
        for i in range(xv.shape[0]):
            _acc(xv[i], &s, &c)
    return s + c


cdef int _secular(const double[::1] w, const double[::1] b, Py_ssize_t anchor,
                  double offset, double* f, double* fp) nogil:
    cdef Py_ssize_t m
    cdef double s = 0.0, c = 0.0, ds = 0.0, dc = 0.0
    cdef double den, term, ba = 0.0
    if anchor >= 0:
        ba = b[anchor]
    for m in range(b.shape[0] - 1, -1, -1):
        if anchor >= 0:
            den = (b[m] - ba) + offset
            if den == 0.0:
                return <int>m
        else:
            den = b[m] + offset
            if fabs(den) <= _ulp(b[m]):
                return <int>m
        term = w[m] / den
        _acc(term, &s, &c)
        term = -term / den
        _acc(term, &ds, &dc)
    f[0] = s + c
    fp[0] = ds + dc
    return NO_POLE


def secular_sums(weights, poles, Py_ssize_t anchor, double offset):
    """Return ``(f, f', pole)``; see ``_pykernels.secular_sums``."""
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(poles, dtype=np.float64)
    cdef double f = 0.0, fp = 0.0
    cdef int pole
    with nogil:
        pole = _secular(w, b, anchor, offset, &f, &fp)
    if pole != NO_POLE:
        return 0.0, 0.0, pole
    return f, fp, NO_POLE


cdef void _split(const double[::1] cw, const double[::1] b, Py_ssize_t anchor,
                 double t, double* psi, double* dpsi) nogil:
    cdef Py_ssize_t m
    cdef double s = 0.0, c = 0.0, ds = 0.0, dc = 0.0
    cdef double den, term
    cdef double ba = b[anchor]
    for m in range(b.shape[0] - 1, -1, -1):
        if m == anchor:
            continue
        den = (b[m] - ba) + t
        term = cw[m] / den
        _acc(term, &s, &c)
        term = -term / den
        _acc(term, &ds, &dc)
    psi[0] = s + c
    dpsi[0] = ds + dc


cdef inline double _anchored(const double[::1] cw, const double[::1] b,
                             Py_ssize_t anchor, double t) nogil:
    cdef double psi, dpsi
    _split(cw, b, anchor, t, &psi, &dpsi)
    return cw[anchor] / t + psi


cdef int _solve(const double[::1] cw, const double[::1] b, Py_ssize_t k,
                double bisect_frac, int max_newton, Py_ssize_t* anchor_out,
                double* t_out, int* iters_out) nogil:
    cdef Py_ssize_t left = k - 2, right = k - 1, anchor
    cdef double bl = b[left], br = b[right]
    cdef double gap = bl - br, half, hm, lo, hi, width, mid, ca, t
    cdef double psi, dpsi, h, dphi, t_new
    cdef int iterations = 0
    cdef bint converged = False
    anchor_out[0] = NO_POLE
    t_out[0] = 0.0
    iters_out[0] = 0
    if not gap > 64.0 * _ulp(bl):
        return 2

    half = 0.5 * gap
    hm = _anchored(cw, b, right, -half)
    if hm > 0.0:
        anchor = right
        lo = -half
        hi = 0.0
    elif hm < 0.0:
        anchor = left
        lo = 0.0
        hi = half
    else:
        anchor_out[0] = right
        t_out[0] = -half
        return 0

    width = bisect_frac * gap
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _anchored(cw, b, anchor, mid) > 0.0:
            lo = mid
        else:
            hi = mid

    ca = cw[anchor]
    t = 0.5 * (lo + hi)
    while iterations < max_newton:
        iterations += 1
        _split(cw, b, anchor, t, &psi, &dpsi)
        h = ca / t + psi
        if h > 0.0:
            lo = t
        elif h < 0.0:
            hi = t
        else:
            converged = True
            break
        dphi = psi + t * dpsi
        if dphi != 0.0:
            t_new = (t * t * dpsi - ca) / dphi
        else:
            t_new = 0.5 * (lo + hi)
        if fabs(t_new - t) <= 4.0 * _ulp(t):
            if lo <= t_new and t_new <= hi:
                t = t_new
            converged = True
            break
        if not (lo < t_new and t_new < hi):
            t_new = 0.5 * (lo + hi)
        t = t_new
        if hi - lo <= 2.0 * _ulp(t):
            converged = True
            break
    anchor_out[0] = anchor
    iters_out[0] = iterations
    if converged:
        t_out[0] = t
        return 0

    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 2.0 * _ulp(mid):
            break
        if _anchored(cw, b, anchor, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    t_out[0] = 0.5 * (lo + hi)
    return 1


def deflated_solve(cw, poles, Py_ssize_t k, double bisect_frac, int max_newton):
    """Bracketed secular root; see ``_pykernels.deflated_solve``."""
    cdef const double[::1] c = np.ascontiguousarray(cw, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(poles, dtype=np.float64)
    cdef Py_ssize_t anchor
    cdef double t
    cdef int iterations, status
    with nogil:
        status = _solve(c, b, k, bisect_frac, max_newton, &anchor, &t, &iterations)
    return <Py_ssize_t>anchor, t, iterations, status


cdef void _matvec(const double[:, ::1] a, const double[::1] x, double[::1] out) nogil:
    cdef Py_ssize_t i, j, n = a.shape[0]
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += a[i, j] * x[j]
        out[i] = acc


def rk4_step(a, y, double h):
    """One classical Runge-Kutta step of ``dy/dt = a @ y``."""
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t i, n = yv.shape[0]
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double[::1] k1 = np.empty(n), k2 = np.empty(n), k3 = np.empty(n)
    cdef double[::1] k4 = np.empty(n), tmp = np.empty(n)
    cdef double hh = 0.5 * h
    with nogil:
        _matvec(av, yv, k1)
        for i in range(n):
            tmp[i] = yv[i] + hh * k1[i]
        _matvec(av, tmp, k2)
        for i in range(n):
            tmp[i] = yv[i] + hh * k2[i]
        _matvec(av, tmp, k3)
        for i in range(n):
            tmp[i] = yv[i] + h * k3[i]
        _matvec(av, tmp, k4)
        for i in range(n):
            ov[i] = yv[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out


def power_iterate(b, x0, double tol, int max_iter):
    """Normalized power iteration; see ``_pykernels.power_iterate``."""
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t i, n = bv.shape[0]
    x = np.array(x0, dtype=np.float64)
    cdef double[::1] xv = x
    cdef double[::1] yv = np.empty(n)
    cdef double nrm = 0.0, rq, prev = INFINITY, delta, q
    cdef double hist[WINDOW]
    cdef int it
    for i in range(WINDOW):
        hist[i] = INFINITY
    with nogil:
        for i in range(n):
            nrm += xv[i] * xv[i]
        nrm = sqrt(nrm)
        for i in range(n):
            xv[i] /= nrm
        for it in range(1, max_iter + 1):
            _matvec(bv, xv, yv)
            rq = 0.0
            nrm = 0.0
            for i in range(n):
                rq += xv[i] * yv[i]
                nrm += yv[i] * yv[i]
            nrm = sqrt(nrm)
            for i in range(n):
                xv[i] = yv[i] / nrm
            delta = fabs(rq - prev)
            if delta == 0.0:
                break
            if delta < tol:
                q = pow(delta / hist[it % WINDOW], 1.0 / WINDOW)
                if q < 1.0 and delta * q / (1.0 - q) < tol:
                    break
            hist[it % WINDOW] = delta
            prev = rq
        else:
            it = max_iter + 1
            rq = prev
    return rq, x, it

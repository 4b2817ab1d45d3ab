# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the mirrored Weibull EM fitter.

Both routines mirror ``_kernels_py`` exactly; see that module for the
reference semantics.
"""
import numpy as np

from libc.math cimport exp, log, fabs, INFINITY, isfinite

ctypedef double f64


cdef inline void _shape_score(const f64[::1] logy, const f64[::1] w, f64 mean_logy,
                              f64 ref, f64 k, f64* g, f64* dg) noexcept nogil:
    cdef Py_ssize_t j, n = logy.shape[0]
    cdef f64 a, d, A = 0.0, B = 0.0, C = 0.0, h, v
    for j in range(n):
        if w[j] == 0.0:
            continue
        d = logy[j] - ref
        a = w[j] * exp(k * d)
        A += a
        B += a * d
        C += a * d * d
    B /= A
    C /= A
    h = B + ref - mean_logy
    v = C - B * B
    if v < 0.0:
        v = 0.0
    g[0] = h - 1.0 / k
    # derivative with respect to log(k)
    dg[0] = k * v + 1.0 / k


cdef f64 _log_scale(const f64[::1] logy, const f64[::1] w, f64 sw, f64 ref, f64 k) noexcept nogil:
    cdef Py_ssize_t j, n = logy.shape[0]
    cdef f64 A = 0.0
    for j in range(n):
        if w[j] != 0.0:
            A += w[j] * exp(k * (logy[j] - ref))
    return (k * ref + log(A) - log(sw)) / k


def weibull_mstep(const f64[::1] logy, const f64[::1] w, double k0, double lo,
                  double hi, double tol=1e-10, int max_iter=200):
    cdef Py_ssize_t j, n = logy.shape[0]
    cdef f64 sw = 0.0, swl = 0.0, ref = -INFINITY, mean_logy
    cdef f64 g, dg, tlo, thi, t, step, old_step, t_new
    cdef int n_eval = 0, it
    with nogil:
        for j in range(n):
            if w[j] != 0.0:
                sw += w[j]
                swl += w[j] * logy[j]
                if logy[j] > ref:
                    ref = logy[j]
        mean_logy = swl / sw
        tlo = log(lo)
        thi = log(hi)
        _shape_score(logy, w, mean_logy, ref, lo, &g, &dg)
        n_eval += 1
    if g >= 0.0:
        return lo, exp(_log_scale(logy, w, sw, ref, lo)), True, n_eval
    with nogil:
        _shape_score(logy, w, mean_logy, ref, hi, &g, &dg)
        n_eval += 1
    if g <= 0.0:
        return hi, exp(_log_scale(logy, w, sw, ref, hi)), True, n_eval
    with nogil:
        t = log(k0) if k0 > lo and k0 < hi else 0.5 * (tlo + thi)
        old_step = thi - tlo
        step = old_step
        for it in range(max_iter):
            _shape_score(logy, w, mean_logy, ref, exp(t), &g, &dg)
            n_eval += 1
            if g < 0.0:
                tlo = t
            elif g > 0.0:
                thi = t
            else:
                break
            t_new = t - g / dg
            if t_new <= tlo or t_new >= thi or fabs(2.0 * g) > fabs(old_step * dg):
                old_step = step
                step = 0.5 * (thi - tlo)
                t_new = tlo + step
            else:
                old_step = step
                step = t_new - t
            t = t_new
            if fabs(step) < tol or thi - tlo < tol:
                break
        t = exp(t)
        step = _log_scale(logy, w, sw, ref, t)
    return t, exp(step), False, n_eval


def estep(const f64[::1] logy, const f64[::1] log_weights, const f64[::1] scales,
          const f64[::1] shapes):
    cdef Py_ssize_t n = logy.shape[0], g = scales.shape[0], i, j
    z_arr = np.empty((n, g), dtype=np.float64)
    row_arr = np.empty(n, dtype=np.float64)
    cdef f64[:, ::1] z = z_arr
    cdef f64[::1] row = row_arr
    cdef f64[::1] log_scale = np.log(np.asarray(scales))
    cdef f64[::1] log_shape = np.log(np.asarray(shapes))
    cdef f64 d, m, s, v
    with nogil:
        for j in range(n):
            m = -INFINITY
            for i in range(g):
                d = logy[j] - log_scale[i]
                v = (log_weights[i] + log_shape[i] - log_scale[i]
                     + (shapes[i] - 1.0) * d - exp(shapes[i] * d))
                z[j, i] = v
                if v > m:
                    m = v
            if not isfinite(m):
                row[j] = -INFINITY
                for i in range(g):
                    z[j, i] = 0.0
                continue
            s = 0.0
            for i in range(g):
                z[j, i] = exp(z[j, i] - m)
                s += z[j, i]
            for i in range(g):
                z[j, i] /= s
            row[j] = m + log(s)
    return z_arr, row_arr

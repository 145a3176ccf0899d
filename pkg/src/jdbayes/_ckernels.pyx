# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: Euler recursion, contrast targets, Metropolis chain.

Same signatures and semantics as ``_pykernels``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, lgamma, fabs, INFINITY, M_PI

cnp.import_array()

DEF EXPLODE = 1e12

cdef int CONTRAST0_MU = 0
cdef int CONTRAST1_SIGMA = 1
cdef int CONTRAST1_MU = 2
cdef int CONTRAST2_ALPHA = 3
cdef int MPCN = 0


def euler_path(codes, mu, sigma, alpha, double x0, double eps, Py_ssize_t n,
               Py_ssize_t substeps, const double[::1] z, const double[::1] jumps):
    cdef int dcode = codes[0]
    cdef double m = mu[0]
    cdef double s = sigma[0]
    cdef double h = 1.0 / (n * substeps)
    cdef double sh = sqrt(h)
    cdef double x = x0, a
    cdef Py_ssize_t k, i, j = 0
    obs_arr = np.empty(n + 1)
    cdef double[::1] obs = obs_arr
    obs[0] = x0
    for k in range(n):
        for i in range(substeps):
            if dcode == 0:
                a = -m * x
            else:
                a = m
            x = x + a * h + eps * s * sh * z[j] + eps * jumps[j]
            j += 1
        if not (fabs(x) <= EXPLODE):
            obs_arr[k + 1:] = np.nan
            return obs_arr, k + 1
        obs[k + 1] = x
    return obs_arr, -1


cdef inline double _drift(int code, double x, double mu) nogil:
    if code == 0:
        return -mu * x
    return mu


cdef double _log_target(int kind, int dcode, int family, const double* theta,
                        double fixed, const double[::1] x, const double[::1] v, double h,
                        double eps, bint neg_inf, const double[::1] lo,
                        const double[::1] hi) nogil:
    cdef Py_ssize_t i, n = x.shape[0], d = lo.shape[0]
    cdef double acc = 0.0, r, s, m, b2, a1, a2, y, c0
    for i in range(d):
        if theta[i] < lo[i] or theta[i] > hi[i]:
            return -INFINITY
    if n == 0:
        return 0.0
    if kind == CONTRAST0_MU:
        m = theta[0]
        for i in range(n):
            r = v[i] - h * _drift(dcode, x[i], m)
            acc += r * r
        return -0.5 * acc / (h * eps * eps)
    if kind == CONTRAST1_SIGMA or kind == CONTRAST1_MU:
        if kind == CONTRAST1_SIGMA:
            s = theta[0]
            m = fixed
        else:
            s = fixed
            m = theta[0]
        if s <= 0:
            return -INFINITY
        for i in range(n):
            r = v[i] - h * _drift(dcode, x[i], m)
            acc += r * r
        b2 = s * s
        return -0.5 * (acc / (h * eps * eps * b2) + n * log(b2))
    a1 = theta[0]
    a2 = theta[1]
    if family == 0:
        c0 = -0.5 * log(2.0 * M_PI * a2)
        for i in range(n):
            y = v[i]
            acc += c0 - (y - a1) * (y - a1) / (2.0 * a2)
        return acc
    if family == 1:
        c0 = -lgamma(a2) - a2 * log(a1)
        for i in range(n):
            y = v[i]
            if y > 0:
                acc += c0 + (a2 - 1.0) * log(y) - y / a1
            elif neg_inf:
                return -INFINITY
        return acc
    c0 = 0.5 * log(a2) - 0.5 * log(2.0 * M_PI)
    for i in range(n):
        y = v[i]
        if y > 0:
            acc += c0 - 1.5 * log(y) - a2 * (y - a1) * (y - a1) / (2.0 * a1 * a1 * y)
        elif neg_inf:
            return -INFINITY
    return acc


def log_target(int kind, codes, theta, fixed, const double[::1] x, const double[::1] v,
               double h, double eps, bint neg_inf, lo, hi):
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=float)
    cdef const double[::1] lo_ = np.ascontiguousarray(lo, dtype=float)
    cdef const double[::1] hi_ = np.ascontiguousarray(hi, dtype=float)
    cdef double fx = fixed[0] if len(fixed) else 0.0
    return _log_target(kind, codes[0], codes[3], &th[0], fx, x, v, h, eps,
                       neg_inf, lo_, hi_)


def chain(int kind, codes, fixed, const double[::1] x, const double[::1] v, double h,
          double eps, bint neg_inf, lo, hi, init, const double[:, ::1] w1,
          const double[:, ::1] w2, const double[::1] logu, double rho, double exponent,
          int method, double rw_scale):
    cdef Py_ssize_t nsteps = w2.shape[0], d = w2.shape[1], i, j
    cdef int dcode = codes[0], family = codes[3]
    cdef double fx = fixed[0] if len(fixed) else 0.0
    cdef const double[::1] lo_ = np.ascontiguousarray(lo, dtype=float)
    cdef const double[::1] hi_ = np.ascontiguousarray(hi, dtype=float)
    trace_arr = np.empty((nsteps, d))
    logt_arr = np.empty(nsteps)
    acc_arr = np.zeros(nsteps, dtype=np.uint8)
    cdef double[:, ::1] trace = trace_arr
    cdef double[::1] logt = logt_arr
    cdef unsigned char[::1] acc = acc_arr
    cdef double z[8]
    cdef double prop[8]
    cdef double lz, lp, ratio, nz, nw, nprop, scale
    cdef double sr = sqrt(rho), sq = sqrt(1.0 - rho)
    if d > 8:
        raise ValueError("dimension above 8 not supported by the kernel")
    for j in range(d):
        z[j] = init[j]
    lz = _log_target(kind, dcode, family, z, fx, x, v, h, eps, neg_inf, lo_, hi_)
    with nogil:
        for i in range(nsteps):
            if method == MPCN:
                nz = 0.0
                nw = 0.0
                for j in range(d):
                    nz += z[j] * z[j]
                    nw += w1[i, j] * w1[i, j]
                nz = sqrt(nz)
                nw = sqrt(nw)
                scale = sq * (nz / nw)
                nprop = 0.0
                for j in range(d):
                    prop[j] = sr * z[j] + scale * w2[i, j]
                    nprop += prop[j] * prop[j]
                nprop = sqrt(nprop)
            else:
                for j in range(d):
                    prop[j] = z[j] + rw_scale * w2[i, j]
            lp = _log_target(kind, dcode, family, prop, fx, x, v, h, eps,
                             neg_inf, lo_, hi_)
            if method == MPCN and (nz == 0.0 or nprop == 0.0):
                lp = -INFINITY
            if lp > -INFINITY:
                ratio = lp - lz
                if method == MPCN:
                    ratio = ratio + exponent * (log(nprop) - log(nz))
                if logu[i] < ratio:
                    for j in range(d):
                        z[j] = prop[j]
                    lz = lp
                    acc[i] = 1
            for j in range(d):
                trace[i, j] = z[j]
            logt[i] = lz
    return trace_arr, logt_arr, acc_arr

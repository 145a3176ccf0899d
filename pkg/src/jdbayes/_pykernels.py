"""Pure-Python versions of the hot kernels.

Mirrors ``_ckernels.pyx`` function for function; used when the compiled
extension is not built or when ``JDBAYES_PURE_PYTHON=1``.
"""
import math

import numpy as np
from scipy.special import gammaln

# target kinds
CONTRAST0_MU = 0
CONTRAST1_SIGMA = 1
CONTRAST1_MU = 2
CONTRAST2_ALPHA = 3

MPCN = 0
RWM = 1

EXPLODE = 1e12
_LOG2PI = math.log(2.0 * math.pi)


def _drift(code, x, mu):
    if code == 0:
        return -mu * x
    return mu + 0.0 * x


def euler_path(codes, mu, sigma, alpha, x0, eps, n, substeps, z, jumps):
    """Euler recursion on the substep grid; returns (obs, bad_index).

    ``z`` are standard normals and ``jumps`` the summed jump marks, one per
    substep. ``bad_index`` is -1 unless the path left |x| <= 1e12.
    """
    dcode = codes[0]
    m = float(mu[0])
    s = float(sigma[0])
    h = 1.0 / (n * substeps)
    sh = math.sqrt(h)
    obs = np.empty(n + 1)
    obs[0] = x0
    x = float(x0)
    j = 0
    zl = z.tolist()
    jl = jumps.tolist()
    for k in range(n):
        for _ in range(substeps):
            if dcode == 0:
                a = -m * x
            else:
                a = m
            # c == 1 for the only jump-coefficient code
            x = x + a * h + eps * s * sh * zl[j] + eps * jl[j]
            j += 1
        if not (abs(x) <= EXPLODE):
            obs[k + 1:] = np.nan
            return obs, k + 1
        obs[k + 1] = x
    return obs, -1


def _logf(family, y, a1, a2):
    if family == 0:
        return -0.5 * np.log(2.0 * math.pi * a2) - (y - a1) ** 2 / (2.0 * a2)
    if family == 1:
        return (-gammaln(a2) - a2 * math.log(a1) + (a2 - 1.0) * np.log(y)
                - y / a1)
    return (0.5 * math.log(a2) - 0.5 * _LOG2PI - 1.5 * np.log(y)
            - a2 * (y - a1) ** 2 / (2.0 * a1 * a1 * y))


def log_target(kind, codes, theta, fixed, x, v, h, eps, neg_inf, lo, hi):
    """Unnormalised log posterior under a uniform prior on [lo, hi].

    ``x`` and ``v`` hold only the masked intervals: left endpoints and
    increments (kinds 0-2) or scaled increments y = dx/eps (kind 3).
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < lo) or np.any(theta > hi):
        return -math.inf
    if x.size == 0:
        return 0.0
    dcode, _, _, family = codes
    if kind == CONTRAST0_MU:
        r = v - h * _drift(dcode, x, theta[0])
        return -0.5 * float(np.sum(r * r)) / (h * eps * eps)
    if kind == CONTRAST1_SIGMA or kind == CONTRAST1_MU:
        if kind == CONTRAST1_SIGMA:
            s, m = theta[0], fixed[0]
        else:
            s, m = fixed[0], theta[0]
        if s <= 0:
            return -math.inf
        r = v - h * _drift(dcode, x, m)
        b2 = s * s
        return -0.5 * (float(np.sum(r * r)) / (h * eps * eps * b2)
                       + x.size * math.log(b2))
    a1, a2 = theta[0], theta[1]
    if family == 0:
        ok = np.ones(v.shape, dtype=bool)
    else:
        ok = v > 0
    if neg_inf and not ok.all():
        return -math.inf
    vals = _logf(family, v[ok], a1, a2)
    return float(np.sum(vals))


def _sumsq(u):
    acc = 0.0
    for t in u.tolist():
        acc += t * t
    return acc


def chain(kind, codes, fixed, x, v, h, eps, neg_inf, lo, hi, init,
          w1, w2, logu, rho, exponent, method, rw_scale):
    """Run a Metropolis chain; returns (trace, log_target, accepted)."""
    nsteps, d = w2.shape
    trace = np.empty((nsteps, d))
    logt = np.empty(nsteps)
    acc = np.zeros(nsteps, dtype=np.uint8)
    z = np.array(init, dtype=float)
    lz = log_target(kind, codes, z, fixed, x, v, h, eps, neg_inf, lo, hi)
    sr = math.sqrt(rho)
    sq = math.sqrt(1.0 - rho)
    for i in range(nsteps):
        if method == MPCN:
            nz = math.sqrt(_sumsq(z))
            nw = math.sqrt(_sumsq(w1[i]))
            prop = sr * z + sq * (nz / nw) * w2[i]
            nprop = math.sqrt(_sumsq(prop))
        else:
            prop = z + rw_scale * w2[i]
        lp = log_target(kind, codes, prop, fixed, x, v, h, eps, neg_inf,
                        lo, hi)
        if method == MPCN and (nz == 0.0 or nprop == 0.0):
            lp = -math.inf
        if lp > -math.inf:
            ratio = lp - lz
            if method == MPCN:
                ratio += exponent * (math.log(nprop) - math.log(nz))
            if logu[i] < ratio:
                z = prop
                lz = lp
                acc[i] = 1
        trace[i] = z
        logt[i] = lz
    return trace, logt, acc

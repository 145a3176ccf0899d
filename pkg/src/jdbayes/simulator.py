"""Path simulation, the deterministic limit ODE and Fisher information."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from . import kernels
from .model import ModelSpec, ParamVector, POSITIVE_HALF_LINE


class PathExplosionError(OverflowError):
    """The simulated path left |x| <= 1e12."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""


EXPLODE = 1e12


@dataclass(frozen=True)
class SimConfig:
    n: int
    epsilon: float
    lam: float
    x0: float = 1.0
    substeps: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


@dataclass(frozen=True)
class JumpRecord:
    """Hidden randomness of one path.

    ``times`` and ``marks`` list every jump on [0, 1] in time order;
    ``interval`` and ``substep`` give the observation interval (0-based)
    and Euler substep containing each jump. ``brownian`` holds the
    standard normals, shape (n, substeps).
    """

    times: np.ndarray
    marks: np.ndarray
    interval: np.ndarray
    substep: np.ndarray
    counts: np.ndarray
    brownian: np.ndarray
    theta0: ParamVector

    def classes(self):
        """Boolean masks for intervals with 0, 1 and >= 2 jumps."""
        c = self.counts
        return c == 0, c == 1, c >= 2

    def single_marks(self) -> np.ndarray:
        """Mark of the sole jump in each single-jump interval (NaN elsewhere)."""
        out = np.full(self.counts.size, np.nan)
        one = self.counts == 1
        sel = one[self.interval]
        out[self.interval[sel]] = self.marks[sel]
        return out


@dataclass(frozen=True)
class SamplePath:
    observations: np.ndarray
    config: SimConfig
    truth: Optional[JumpRecord] = None

    @property
    def n(self) -> int:
        return self.observations.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.observations)

    @property
    def left(self) -> np.ndarray:
        return self.observations[:-1]

    @classmethod
    def from_observations(cls, obs, epsilon=1.0, lam=0.0):
        obs = np.asarray(obs, dtype=float).copy()
        obs.setflags(write=False)
        cfg = SimConfig(n=obs.size - 1, epsilon=epsilon, lam=lam, x0=obs[0])
        return cls(obs, cfg, None)


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _streams(seed):
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    jump_ss, bm_ss = ss.spawn(2)
    return np.random.default_rng(jump_ss), np.random.default_rng(bm_ss)


def simulate_path(model: ModelSpec, theta0: ParamVector, cfg: SimConfig,
                  backend: Optional[str] = None) -> SamplePath:
    """Euler scheme with ``cfg.substeps`` substeps per observation interval.

    Jump epochs and marks are drawn on [0, 1] from their own stream, so
    paths with the same seed share the jump configuration across ``n``.
    """
    model.check_theta(theta0)
    jump_rng, bm_rng = _streams(cfg.seed)
    njumps = int(jump_rng.poisson(cfg.lam)) if cfg.lam > 0 else 0
    times = np.sort(jump_rng.random(njumps))
    marks = np.asarray(model.family.sample(theta0.alpha, jump_rng, size=njumps),
                       dtype=float)
    m = cfg.n * cfg.substeps
    sub = np.minimum((times * m).astype(np.int64), m - 1)
    interval = sub // cfg.substeps
    counts = np.bincount(interval, minlength=cfg.n).astype(np.int64)
    z = bm_rng.standard_normal(m)
    truth = JumpRecord(
        times=_frozen(times), marks=_frozen(marks), interval=_frozen(interval),
        substep=_frozen(sub), counts=_frozen(counts),
        brownian=_frozen(z.reshape(cfg.n, cfg.substeps)), theta0=theta0)
    obs = replay(model, cfg, truth, backend=backend)
    return SamplePath(_frozen(obs), cfg, truth)


def replay(model: ModelSpec, cfg: SimConfig, truth: JumpRecord,
           backend: Optional[str] = None) -> np.ndarray:
    """Run the Euler recursion on recorded randomness."""
    m = cfg.n * cfg.substeps
    theta0 = truth.theta0
    jumps = np.zeros(m)
    np.add.at(jumps, truth.substep, truth.marks)
    z = np.ascontiguousarray(truth.brownian, dtype=float).ravel()
    if model.kernel_codes is not None:
        k = kernels.get(backend)
        obs, bad = k.euler_path(model.kernel_codes, theta0.mu, theta0.sigma,
                                theta0.alpha, float(cfg.x0), float(cfg.epsilon),
                                cfg.n, cfg.substeps, z, jumps)
    else:
        obs, bad = _euler_generic(model, theta0, cfg, z, jumps)
    if bad >= 0:
        raise PathExplosionError(
            f"path exceeded |x| = {EXPLODE:g} at observation {bad}")
    return obs


def _euler_generic(model, theta0, cfg, z, jumps):
    h = 1.0 / (cfg.n * cfg.substeps)
    sh = math.sqrt(h)
    eps = cfg.epsilon
    mu, sigma, alpha = theta0.mu, theta0.sigma, theta0.alpha
    obs = np.empty(cfg.n + 1)
    obs[0] = x = float(cfg.x0)
    j = 0
    for k in range(cfg.n):
        for _ in range(cfg.substeps):
            a = float(model.drift(x, mu))
            b = float(model.diffusion(x, sigma))
            c = float(model.jump_coeff(x, alpha))
            x = x + a * h + eps * b * sh * z[j] + eps * c * jumps[j]
            j += 1
        if not abs(x) <= EXPLODE:
            obs[k + 1:] = np.nan
            return obs, k + 1
        obs[k + 1] = x
    return obs, -1


def write_path_csv(path: SamplePath, fname) -> None:
    """Dump (t, X, cum_jump_count) rows, one per observation time."""
    counts = path.truth.counts if path.truth is not None \
        else np.zeros(path.n, dtype=int)
    cum = np.concatenate([[0], np.cumsum(counts)])
    with open(fname, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "X", "cum_jump_count"])
        for t, x, c in zip(path.times, path.observations, cum):
            w.writerow([repr(float(t)), repr(float(x)), int(c)])


# ---------------------------------------------------------------------------
# limit ODE and information matrices
# ---------------------------------------------------------------------------

def ode_limit_path(model: ModelSpec, mu0, x0: float, grid_n: int,
                   refine: int = 10) -> np.ndarray:
    """Classical RK4 for dx/dt = a(x, mu0), sampled at t_k = k / grid_n."""
    mu0 = np.atleast_1d(np.asarray(mu0, dtype=float))

    def f(x):
        return float(model.drift(x, mu0))

    h = 1.0 / (refine * grid_n)
    out = np.empty(grid_n + 1)
    out[0] = x = float(x0)
    for k in range(grid_n):
        for _ in range(refine):
            k1 = f(x)
            k2 = f(x + 0.5 * h * k1)
            k3 = f(x + 0.5 * h * k2)
            k4 = f(x + h * k3)
            x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if not abs(x) <= EXPLODE:
            raise PathExplosionError("limit ODE diverged")
        out[k + 1] = x
    return out


@dataclass(frozen=True)
class FisherInfo:
    I0: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    I3: np.ndarray

    def blocks(self) -> dict:
        return {"I0": self.I0, "I1": self.I1, "I2": self.I2, "I3": self.I3}

    def full(self) -> np.ndarray:
        """diag(I1, I2, I3) in (drift, diffusion, jump) block order."""
        from scipy.linalg import block_diag
        return block_diag(self.I1, self.I2, self.I3)

    def eigenvalues(self) -> dict:
        return {k: np.linalg.eigvalsh(v) for k, v in self.blocks().items()}


def _jump_score_outer(model, xt, alpha0, epsrel):
    """int dpsi dpsi^T (x, c(x, alpha0) z, alpha0) f_alpha0(z) dz."""
    from .model import dpsi_dalpha

    fam = model.family
    c = float(model.jump_coeff(xt, alpha0))
    d = alpha0.size

    def integrand(z):
        if z <= 0 and fam.support == POSITIVE_HALF_LINE:
            return np.zeros(d * d)
        dens = float(fam.pdf(z, alpha0))
        if dens == 0.0:
            return np.zeros(d * d)
        g = dpsi_dalpha(model, xt, c * z, alpha0)
        return np.outer(g, g).ravel() * dens

    lo = 0.0 if fam.support == POSITIVE_HALF_LINE else -np.inf
    val, err, info = integrate.quad_vec(integrand, lo, np.inf, epsabs=1e-13,
                                        epsrel=epsrel, full_output=True)
    if not info.success:
        raise QuadratureError(
            f"jump information quadrature failed (status {info.status}, "
            f"error estimate {err:.3g})")
    return val.reshape(d, d)


def fisher_info(model: ModelSpec, theta0: ParamVector, x0: float = 1.0,
                time_quad_n: int = 200, z_epsrel: float = 1e-6) -> FisherInfo:
    """Information blocks by composite Simpson in t along the limit ODE.

    I0 = int da da^T, I1 = int da da^T / b^2, I2 = 2 int db db^T / b^2 and
    I3 = int int dpsi dpsi^T f dz dt, all evaluated at theta0.
    """
    if time_quad_n % 2:
        time_quad_n += 1
    sigma0, mu0, alpha0 = theta0.sigma, theta0.mu, theta0.alpha
    xs = ode_limit_path(model, mu0, x0, time_quad_n)
    t = np.linspace(0.0, 1.0, time_quad_n + 1)

    da = np.asarray(model.drift_dmu(xs, mu0), dtype=float)
    db = np.asarray(model.diffusion_dsigma(xs, sigma0), dtype=float)
    b2 = np.asarray(model.diffusion(xs, sigma0), dtype=float) ** 2

    def simpson(vals):
        return integrate.simpson(vals, x=t, axis=0)

    I0 = simpson(da[:, :, None] * da[:, None, :])
    I1 = simpson(da[:, :, None] * da[:, None, :] / b2[:, None, None])
    I2 = 2.0 * simpson(db[:, :, None] * db[:, None, :] / b2[:, None, None])

    cache = {}
    inner = []
    cs = np.asarray(model.jump_coeff(xs, alpha0), dtype=float)
    for xt, ct in zip(xs, cs):
        # the inner integral depends on x only through c(x, alpha0) for the
        # built-in coefficient forms
        key = float(ct) if model.kernel_codes is not None else float(xt)
        if key not in cache:
            cache[key] = _jump_score_outer(model, xt, alpha0, z_epsrel)
        inner.append(cache[key])
    I3 = simpson(np.asarray(inner))
    sym = lambda m: 0.5 * (m + m.T)
    return FisherInfo(sym(I0), sym(I1), sym(I2), sym(I3))


def filter_validity_diagnostic(model: ModelSpec, theta0: ParamVector, v2: float,
                               rho: float, n: int, lam: float, x0: float = 1.0,
                               grid_n: int = 200) -> float:
    """lam * P(|V| <= 4 v2 / (cbar n^rho)) with cbar = sup_t |c(x_t, alpha0)|.

    Large values mean many small jumps fall under the threshold.
    """
    if lam == 0:
        return 0.0
    xs = ode_limit_path(model, theta0.mu, x0, grid_n)
    cbar = float(np.max(np.abs(model.jump_coeff(xs, theta0.alpha))))
    bound = 4.0 * v2 / (cbar * n ** rho)
    fam = model.family
    lo = 0.0 if fam.support == POSITIVE_HALF_LINE else -bound
    val, err = integrate.quad(lambda z: float(fam.pdf(z, theta0.alpha)),
                              lo, bound, epsabs=1e-14, epsrel=1e-10, limit=200)
    if not np.isfinite(val) or err > max(1e-6 * abs(val), 1e-12):
        raise QuadratureError(f"filter diagnostic quadrature error {err:.3g}")
    return lam * val

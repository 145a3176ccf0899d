"""Log-space MpCN sampler, posterior means and a grid-quadrature oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .model import ParamBox


class InitializationError(RuntimeError):
    """No starting point with finite log-target was found."""


class DegenerateTargetError(RuntimeError):
    """The log-target is -inf on every grid point."""


@dataclass(frozen=True)
class KernelTarget:
    """Description of a contrast target the kernel backends can evaluate.

    ``x``/``v`` are already restricted to the masked intervals.
    """

    kind: int
    codes: tuple
    fixed: np.ndarray
    x: np.ndarray
    v: np.ndarray
    h: float
    eps: float
    neg_inf: bool = False

    def evaluate(self, u, box: ParamBox, backend=None) -> float:
        k = kernels.get(backend)
        return k.log_target(self.kind, self.codes, np.asarray(u, dtype=float),
                            self.fixed, self.x, self.v, self.h, self.eps,
                            self.neg_inf, box.lo, box.hi)


@dataclass
class LogTarget:
    """log of exp{Psi(u)} * pi(u) with pi uniform on ``box``.

    ``fn`` maps a d-vector to the contrast value. ``fn_many`` optionally
    evaluates a stack of points (shape (m, d)) at once. ``kernel`` lets the
    compiled chain evaluate the same target without calling back into
    Python.
    """

    dim: int
    fn: Callable[[np.ndarray], float]
    box: ParamBox
    fn_many: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kernel: Optional[KernelTarget] = None

    def __post_init__(self):
        if self.box.dim != self.dim:
            raise ValueError("box dimension does not match target dimension")

    def __call__(self, u) -> float:
        u = np.asarray(u, dtype=float)
        if not self.box.contains(u):
            return -math.inf
        val = float(self.fn(u))
        return val if not math.isnan(val) else -math.inf

    def many(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        inside = np.all((pts >= self.box.lo) & (pts <= self.box.hi), axis=1)
        if self.fn_many is not None:
            out = np.asarray(self.fn_many(pts), dtype=float).copy()
        else:
            out = np.array([float(self.fn(p)) for p in pts])
        out[~inside | np.isnan(out)] = -np.inf
        return out

    def shifted(self, c: float) -> "LogTarget":
        """Same target plus an additive constant."""
        fm = None if self.fn_many is None else (lambda p: self.fn_many(p) + c)
        return LogTarget(self.dim, lambda u: self.fn(u) + c, self.box, fm)


@dataclass(frozen=True)
class MCMCConfig:
    """``norm_exponent=None`` uses the state dimension d in the norm
    correction of the acceptance ratio, which keeps MpCN exact for any d.
    """

    rho_mpcn: float = 0.8
    chain_len: int = 10_000
    burn_in: int = 525
    init: Union[str, Sequence[float]] = "prior_draw"
    seed: int = 0
    norm_exponent: Optional[float] = None
    method: str = "mpcn"
    rw_scale: Optional[float] = None
    batches: int = 50
    use_kernel: bool = True
    backend: Optional[str] = None

    def __post_init__(self):
        if not 0 < self.rho_mpcn <= 1:
            raise ValueError("rho_mpcn must lie in (0, 1]")
        if not 0 <= self.burn_in < self.chain_len:
            raise ValueError("need 0 <= burn_in < chain_len")
        if self.method not in ("mpcn", "rwm"):
            raise ValueError(f"unknown method {self.method!r}")

    def replace(self, **kw) -> "MCMCConfig":
        import dataclasses
        return dataclasses.replace(self, **kw)


@dataclass
class ChainResult:
    trace: np.ndarray
    log_target: np.ndarray
    accepted: np.ndarray
    burn_in: int
    posterior_mean: np.ndarray
    mc_se: np.ndarray
    acceptance_rate: float

    @property
    def samples(self) -> np.ndarray:
        return self.trace[self.burn_in:]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _exponent(cfg: MCMCConfig, d: int) -> float:
    return float(d if cfg.norm_exponent is None else cfg.norm_exponent)


def _transition(z, lz, w1, w2, logu, logtarget, rho, exponent, method,
                rw_scale):
    if method == kernels.MPCN:
        nz = math.sqrt(float(np.sum(z * z)))
        nw = math.sqrt(float(np.sum(w1 * w1)))
        prop = math.sqrt(rho) * z + math.sqrt(1.0 - rho) * (nz / nw) * w2
        nprop = math.sqrt(float(np.sum(prop * prop)))
        if nz == 0.0 or nprop == 0.0:
            return z, lz, False
    else:
        prop = z + rw_scale * w2
    lp = logtarget(prop)
    if lp == -math.inf:
        return z, lz, False
    ratio = lp - lz
    if method == kernels.MPCN:
        ratio += exponent * (math.log(nprop) - math.log(nz))
    if logu < ratio:
        return prop, lp, True
    return z, lz, False


def mpcn_step(current, logtarget: LogTarget, cfg: MCMCConfig, rng):
    """One MpCN transition from ``current``; returns (next, accepted).

    Proposal: sqrt(rho) z + sqrt(1 - rho) (|z| / |w1|) w2 with w1, w2
    standard normal; accepted with probability
    min{1, p(z') |z'|^k / (p(z) |z|^k)}, evaluated in log space. The
    proposal is reversible for |z|^(-d) dz, so k = d makes the chain exact.
    """
    rng = _rng(rng)
    z = np.atleast_1d(np.asarray(current, dtype=float))
    d = z.size
    w1 = rng.standard_normal(d)
    w2 = rng.standard_normal(d)
    logu = math.log(rng.random())
    nxt, _, acc = _transition(z, logtarget(z), w1, w2, logu, logtarget,
                              cfg.rho_mpcn, _exponent(cfg, d), kernels.MPCN,
                              None)
    return nxt, acc


def _initial_point(logtarget: LogTarget, cfg: MCMCConfig, ss) -> np.ndarray:
    box = logtarget.box
    if isinstance(cfg.init, str):
        if cfg.init == "box_midpoint":
            z = box.midpoint.copy()
            if logtarget(z) > -math.inf:
                return z
            raise InitializationError("box midpoint has -inf log-target")
        if cfg.init != "prior_draw":
            raise ValueError(f"unknown init {cfg.init!r}")
        rng = np.random.default_rng(ss)
        for _ in range(1000):
            z = box.lo + box.width * rng.random(box.dim)
            if logtarget(z) > -math.inf:
                return z
        raise InitializationError(
            "no finite log-target among 1000 prior draws")
    z = np.asarray(cfg.init, dtype=float).reshape(box.dim)
    if not logtarget(z) > -math.inf:
        raise InitializationError(f"explicit init {z} has -inf log-target")
    return z


def batch_means_se(samples: np.ndarray, batches: int = 50) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[0] // batches
    if m < 1:
        return np.full(samples.shape[1], np.nan)
    means = samples[: m * batches].reshape(batches, m, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(batches)


def run_chain(logtarget: LogTarget, cfg: MCMCConfig) -> ChainResult:
    """Run ``cfg.chain_len`` steps, drop ``cfg.burn_in`` and summarise.

    All random numbers are drawn up front from ``cfg.seed`` so that the
    compiled and Python loops consume identical streams.
    """
    d = logtarget.dim
    init_ss, step_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    z0 = _initial_point(logtarget, cfg, init_ss)
    rng = np.random.default_rng(step_ss)
    n = cfg.chain_len
    w1 = rng.standard_normal((n, d))
    w2 = rng.standard_normal((n, d))
    with np.errstate(divide="ignore"):
        logu = np.log(rng.random(n))
    method = kernels.MPCN if cfg.method == "mpcn" else kernels.RWM
    rw_scale = cfg.rw_scale
    if rw_scale is None:
        rw_scale = float(np.max(logtarget.box.width)) / 100.0
    expo = _exponent(cfg, d)

    kt = logtarget.kernel
    if cfg.use_kernel and kt is not None:
        k = kernels.get(cfg.backend)
        trace, logt, acc = k.chain(
            kt.kind, kt.codes, kt.fixed, kt.x, kt.v, kt.h, kt.eps, kt.neg_inf,
            logtarget.box.lo, logtarget.box.hi, z0, w1, w2, logu,
            cfg.rho_mpcn, expo, method, rw_scale)
    else:
        trace = np.empty((n, d))
        logt = np.empty(n)
        acc = np.zeros(n, dtype=np.uint8)
        z, lz = z0, logtarget(z0)
        for i in range(n):
            z, lz, a = _transition(z, lz, w1[i], w2[i], logu[i], logtarget,
                                   cfg.rho_mpcn, expo, method, rw_scale)
            trace[i] = z
            logt[i] = lz
            acc[i] = a
    kept = trace[cfg.burn_in:]
    return ChainResult(
        trace=trace, log_target=logt, accepted=acc.astype(bool),
        burn_in=cfg.burn_in, posterior_mean=kept.mean(axis=0),
        mc_se=batch_means_se(kept, cfg.batches),
        acceptance_rate=float(np.mean(acc)))


def _trapezoid_weights(m: int) -> np.ndarray:
    w = np.ones(m)
    if m > 1:
        w[0] = w[-1] = 0.5
    return w


def grid_posterior_mean(logtarget: LogTarget, box: Optional[ParamBox] = None,
                        points_per_dim: int = 2001) -> np.ndarray:
    """Posterior mean by the trapezoid rule on a regular grid (d <= 2).

    Ratios of integrals are formed after subtracting the maximum log value.
    """
    box = box or logtarget.box
    d = box.dim
    if d > 2:
        raise ValueError("grid oracle supports d <= 2 only")
    axes, weights = [], []
    for lo, hi in zip(box.lo, box.hi):
        m = 1 if lo == hi else points_per_dim
        axes.append(np.linspace(lo, hi, m))
        weights.append(_trapezoid_weights(m))
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = weights[0]
    for extra in weights[1:]:
        w = np.multiply.outer(w, extra)
    w = w.ravel()
    lt = logtarget.many(pts)
    top = np.max(lt)
    if not np.isfinite(top):
        raise DegenerateTargetError("log-target is -inf on the whole grid")
    p = w * np.exp(lt - top)
    return (p[:, None] * pts).sum(axis=0) / p.sum()

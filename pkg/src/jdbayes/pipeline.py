"""Initial and adaptive Bayes estimators for one observed path.

Stages run in a fixed order, each a posterior mean under a uniform prior:

0. mu0_hat from the least-squares drift contrast,
1. sigma_hat from the quasi-likelihood with mu = mu0_hat,
2. mu_hat from the quasi-likelihood with sigma = sigma_hat,
3. alpha_hat from the jump contrast.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .contrast import (FilterMask, FilterSpec, _diffusion_contrast,
                       _drift_contrast, classify_increments)
from .model import ModelSpec, psi
from .sampler import ChainResult, KernelTarget, LogTarget, MCMCConfig, run_chain
from .simulator import SamplePath

WARN_EMPTY_JUMP_MASK = "EMPTY_JUMP_MASK"
WARN_EMPTY_CONTINUOUS_MASK = "EMPTY_CONTINUOUS_MASK"
WARN_FILTER_DIAGNOSTIC = "FILTER_DIAGNOSTIC_HIGH"

STAGES = ("mu0", "sigma", "mu", "alpha")


@dataclass
class EstimationResult:
    mu0_hat: np.ndarray
    sigma_hat: np.ndarray
    mu_hat: np.ndarray
    alpha_hat: np.ndarray
    chains: dict = field(default_factory=dict)
    n_jumps_detected: int = 0
    filter_diag: float = float("nan")
    warnings: list = field(default_factory=list)
    stage_order: tuple = STAGES

    def acceptance_rates(self) -> list:
        out = []
        for s in STAGES:
            ch = self.chains.get(s)
            out.append(float("nan") if ch is None else ch.acceptance_rate)
        return out


def _stage_cfg(cfg: MCMCConfig, stage: int) -> MCMCConfig:
    seed = np.random.SeedSequence(cfg.seed, spawn_key=(stage,))
    return cfg.replace(seed=int(seed.generate_state(1, np.uint64)[0]))


def _masked(path: SamplePath, sel):
    return (np.ascontiguousarray(path.left[sel]),
            np.ascontiguousarray(path.increments[sel]))


def _many(fn):
    return lambda pts: np.array([fn(p) for p in pts])


def initial_mu_target(model: ModelSpec, path: SamplePath, eps: float,
                      mask: FilterMask) -> LogTarget:
    sel = mask.continuous

    def fn(mu):
        return _drift_contrast(model, path, mu, eps, sel)

    kt = None
    if model.kernel_codes is not None:
        x, v = _masked(path, sel)
        kt = KernelTarget(kernels.CONTRAST0_MU, model.kernel_codes,
                          np.zeros(0), x, v, 1.0 / path.n, eps)
    return LogTarget(model.mu_box.dim, fn, model.mu_box, _many(fn), kt)


def sigma_target(model: ModelSpec, path: SamplePath, eps: float,
                 mask: FilterMask, mu) -> LogTarget:
    sel = mask.continuous
    mu = np.atleast_1d(np.asarray(mu, dtype=float))

    def fn(sigma):
        return _diffusion_contrast(model, path, mu, sigma, eps, sel)

    kt = None
    if model.kernel_codes is not None:
        x, v = _masked(path, sel)
        kt = KernelTarget(kernels.CONTRAST1_SIGMA, model.kernel_codes, mu,
                          x, v, 1.0 / path.n, eps)
    return LogTarget(model.sigma_box.dim, fn, model.sigma_box, _many(fn), kt)


def drift_target(model: ModelSpec, path: SamplePath, eps: float,
                 mask: FilterMask, sigma) -> LogTarget:
    sel = mask.continuous
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))

    def fn(mu):
        return _diffusion_contrast(model, path, mu, sigma, eps, sel)

    kt = None
    if model.kernel_codes is not None:
        x, v = _masked(path, sel)
        kt = KernelTarget(kernels.CONTRAST1_MU, model.kernel_codes, sigma,
                          x, v, 1.0 / path.n, eps)
    return LogTarget(model.mu_box.dim, fn, model.mu_box, _many(fn), kt)


def jump_target(model: ModelSpec, path: SamplePath, eps: float,
                mask: FilterMask, sentinel: str = "zero") -> LogTarget:
    sel = mask.jump
    x, dx = _masked(path, sel)
    y = np.ascontiguousarray(dx / eps)

    def fn(alpha):
        if x.size == 0:
            return 0.0
        return float(np.sum(psi(model, x, y, alpha, sentinel=sentinel,
                                check=False)))

    kt = None
    if model.kernel_codes is not None:
        kt = KernelTarget(kernels.CONTRAST2_ALPHA, model.kernel_codes,
                          np.zeros(0), x, y, 1.0 / path.n, eps,
                          neg_inf=(sentinel == "neg_inf"))
    return LogTarget(model.alpha_box.dim, fn, model.alpha_box, _many(fn), kt)


def _mask(path, model, eps, filt, mask):
    if mask is not None:
        return mask
    filt = filt or FilterSpec.default_for(model)
    return classify_increments(path, eps, filt, q=model.family.q)


def estimate_initial_mu(path: SamplePath, model: ModelSpec, eps: float,
                        filt: Optional[FilterSpec] = None,
                        mcmc_cfg: MCMCConfig = MCMCConfig(),
                        mask: Optional[FilterMask] = None):
    """Posterior mean of mu under exp{drift contrast} times a flat prior.

    Returns ``(estimate, chain)``.
    """
    mask = _mask(path, model, eps, filt, mask)
    target = initial_mu_target(model, path, eps, mask)
    chain = run_chain(target, _stage_cfg(mcmc_cfg, 0))
    return chain.posterior_mean, chain


def estimate_adaptive(path: SamplePath, model: ModelSpec, eps: float,
                      filt: Optional[FilterSpec] = None,
                      mcmc_cfg: MCMCConfig = MCMCConfig(), mu0_hat=None,
                      mask: Optional[FilterMask] = None,
                      sentinel: str = "zero") -> EstimationResult:
    """sigma_hat, mu_hat and alpha_hat given the initial drift estimate."""
    if mu0_hat is None:
        raise ValueError("mu0_hat is required (see estimate_initial_mu)")
    mask = _mask(path, model, eps, filt, mask)
    warnings = []
    if not mask.continuous.any():
        warnings.append(WARN_EMPTY_CONTINUOUS_MASK)
    mu0_hat = np.atleast_1d(np.asarray(mu0_hat, dtype=float))

    ch_sigma = run_chain(sigma_target(model, path, eps, mask, mu0_hat),
                         _stage_cfg(mcmc_cfg, 1))
    sigma_hat = ch_sigma.posterior_mean
    ch_mu = run_chain(drift_target(model, path, eps, mask, sigma_hat),
                      _stage_cfg(mcmc_cfg, 2))
    mu_hat = ch_mu.posterior_mean

    chains = {"sigma": ch_sigma, "mu": ch_mu, "alpha": None}
    if mask.jump.any():
        ch_alpha = run_chain(jump_target(model, path, eps, mask, sentinel),
                             _stage_cfg(mcmc_cfg, 3))
        alpha_hat = ch_alpha.posterior_mean
        chains["alpha"] = ch_alpha
    else:
        # flat contrast: the posterior is the prior, whose mean is the midpoint
        alpha_hat = model.alpha_box.midpoint.copy()
        warnings.append(WARN_EMPTY_JUMP_MASK)
    return EstimationResult(
        mu0_hat=mu0_hat, sigma_hat=sigma_hat, mu_hat=mu_hat,
        alpha_hat=alpha_hat, chains=chains, n_jumps_detected=mask.n_jumps,
        warnings=warnings)


def estimate_full(path: SamplePath, model: ModelSpec, eps: float,
                  filt: Optional[FilterSpec] = None,
                  mcmc_cfg: MCMCConfig = MCMCConfig(),
                  sentinel: str = "zero",
                  filter_diag: Optional[float] = None,
                  diag_warn_level: float = 0.05) -> EstimationResult:
    """All four stages on one path."""
    filt = filt or FilterSpec.default_for(model)
    mask = _mask(path, model, eps, filt, None)
    mu0_hat, ch0 = estimate_initial_mu(path, model, eps, filt, mcmc_cfg, mask)
    res = estimate_adaptive(path, model, eps, filt, mcmc_cfg, mu0_hat, mask,
                            sentinel)
    res.chains = {"mu0": ch0, **res.chains}
    if filter_diag is not None:
        res.filter_diag = float(filter_diag)
        if filter_diag > diag_warn_level:
            res.warnings.append(WARN_FILTER_DIAGNOSTIC)
    return res

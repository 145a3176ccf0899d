"""Threshold-filtered contrast functions and their ground-truth twins."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .model import DomainError, FULL_LINE, ModelSpec, ParamVector, psi
from .simulator import SamplePath

TWOSIDED = "threshold_twosided"
ONESIDED = "threshold_onesided"
RANK = "rank"
KINDS = (TWOSIDED, ONESIDED, RANK)


class InvalidFilterError(ValueError):
    pass


class MissingTruthError(ValueError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    """How increments are split into continuous and jump intervals.

    Threshold kinds compare the increment with ``eps * v_k / n**rho``;
    the rank kind flags the ``ceil(n_jumps)`` largest positive increments.
    ``v`` is a constant or a length-n sequence bounded by ``v_bounds``.
    """

    kind: str = TWOSIDED
    rho: float = 0.49
    v: Union[float, tuple] = 1.0
    v_bounds: Optional[tuple] = None
    n_jumps: Optional[float] = None

    @classmethod
    def default_for(cls, model: ModelSpec) -> "FilterSpec":
        if model.support_kind == FULL_LINE:
            return cls(TWOSIDED, 0.49)
        return cls(ONESIDED, min(0.49, 0.99 / (4.0 * model.family.q)))

    def validate(self, n: int, q: float = 1.0) -> None:
        if self.kind not in KINDS:
            raise InvalidFilterError(f"unknown filter kind {self.kind!r}")
        if self.kind == RANK:
            if self.n_jumps is None or self.n_jumps < 0:
                raise InvalidFilterError("rank filter needs n_jumps >= 0")
            if math.ceil(self.n_jumps) > n:
                raise InvalidFilterError(
                    f"n_jumps={self.n_jumps} exceeds the {n} increments")
            return
        upper = 0.5 if self.kind == TWOSIDED else 1.0 / (4.0 * q)
        if not 0 < self.rho < upper:
            raise InvalidFilterError(
                f"rho={self.rho} outside (0, {upper:g}) for {self.kind}")
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if v.size not in (1, n):
            raise InvalidFilterError("v must be a scalar or have length n")
        lo, hi = self.v_bounds if self.v_bounds else (v.min(), v.max())
        if not (0 < lo <= v.min() and v.max() <= hi):
            raise InvalidFilterError("need 0 < v1 <= v_nk <= v2")

    @property
    def v2(self) -> float:
        if self.v_bounds:
            return float(self.v_bounds[1])
        return float(np.max(self.v))


@dataclass(frozen=True)
class FilterMask:
    continuous: np.ndarray
    jump: np.ndarray

    @property
    def n(self) -> int:
        return self.continuous.size

    @property
    def n_jumps(self) -> int:
        return int(self.jump.sum())


def _increments(path) -> np.ndarray:
    if isinstance(path, SamplePath):
        return path.increments
    return np.diff(np.asarray(path, dtype=float))


def classify_increments(path, eps: float, spec: FilterSpec,
                        q: float = 1.0) -> FilterMask:
    """Split the n increments of ``path`` (a SamplePath or observation
    array) into continuous and jump intervals."""
    dx = _increments(path)
    n = dx.size
    if n < 1:
        raise InvalidFilterError("need at least one increment")
    spec.validate(n, q)
    if spec.kind == RANK:
        k = int(math.ceil(spec.n_jumps))
        pos = np.flatnonzero(dx > 0)
        # stable sort on -dx: among equal increments the lower index wins
        order = pos[np.argsort(-dx[pos], kind="stable")]
        jump = np.zeros(n, dtype=bool)
        jump[order[:k]] = True
        return FilterMask(~jump, jump)
    thr = eps * np.asarray(spec.v, dtype=float) / n ** spec.rho
    stat = np.abs(dx) if spec.kind == TWOSIDED else dx
    jump = stat >= thr
    return FilterMask(~jump, jump)


def _check(model, mu=None, sigma=None, alpha=None):
    if mu is not None:
        mu = model.mu_box.check(mu, "mu")
    if sigma is not None:
        sigma = model.sigma_box.check(sigma, "sigma")
    if alpha is not None:
        alpha = model.alpha_box.check(alpha, "alpha")
    return mu, sigma, alpha


def _residuals(model, path, mu, sel):
    obs = path.observations if isinstance(path, SamplePath) \
        else np.asarray(path, dtype=float)
    n = obs.size - 1
    x = obs[:-1][sel]
    dx = np.diff(obs)[sel]
    h = 1.0 / n
    return x, dx - h * model.drift(x, mu), h


def _drift_contrast(model, path, mu, eps, sel):
    x, r, h = _residuals(model, path, mu, sel)
    if r.size == 0:
        return 0.0
    return -0.5 * float(np.sum(r * r)) / (h * eps * eps)


def _diffusion_contrast(model, path, mu, sigma, eps, sel):
    x, r, h = _residuals(model, path, mu, sel)
    if r.size == 0:
        return 0.0
    b = np.asarray(model.diffusion(x, sigma), dtype=float)
    if np.any(b <= 0):
        raise DomainError("diffusion coefficient b <= 0 on a masked interval")
    b2 = b * b
    return -0.5 * float(np.sum(r * r / (h * eps * eps * b2) + np.log(b2)))


def contrast0(model: ModelSpec, path, mu, eps: float, mask: FilterMask) -> float:
    """Least-squares drift contrast over the continuous intervals."""
    mu, _, _ = _check(model, mu=mu)
    return _drift_contrast(model, path, mu, eps, mask.continuous)


def contrast1(model: ModelSpec, path, mu, sigma, eps: float,
              mask: FilterMask) -> float:
    """Gaussian quasi-log-likelihood over the continuous intervals."""
    mu, sigma, _ = _check(model, mu=mu, sigma=sigma)
    return _diffusion_contrast(model, path, mu, sigma, eps, mask.continuous)


def contrast2(model: ModelSpec, path, alpha, eps: float, mask: FilterMask,
              sentinel: str = "zero") -> float:
    """Sum of psi(X_{k-1}, dX_k / eps, alpha) over the jump intervals."""
    _, _, alpha = _check(model, alpha=alpha)
    obs = path.observations if isinstance(path, SamplePath) \
        else np.asarray(path, dtype=float)
    sel = mask.jump
    if not sel.any():
        return 0.0
    x = obs[:-1][sel]
    y = np.diff(obs)[sel] / eps
    return float(np.sum(psi(model, x, y, alpha, sentinel=sentinel,
                            check=False)))


def ideal_contrasts(model: ModelSpec, path: SamplePath, theta: ParamVector,
                    eps: float, sentinel: str = "zero"):
    """Contrasts built from the true jump record.

    Drift and diffusion parts run over the intervals without jumps; the
    jump part sums psi(X_{k-1}, c(X_{k-1}, alpha0) V, alpha) over the
    single-jump intervals, V being that interval's true mark.
    """
    if path.truth is None:
        raise MissingTruthError("path carries no jump record")
    mu, sigma, alpha = _check(model, theta.mu, theta.sigma, theta.alpha)
    j0, j1, _ = path.truth.classes()
    p0 = _drift_contrast(model, path, mu, eps, j0)
    p1 = _diffusion_contrast(model, path, mu, sigma, eps, j0)
    if not j1.any():
        return p0, p1, 0.0
    x = path.left[j1]
    marks = path.truth.single_marks()[j1]
    y = np.asarray(model.jump_coeff(x, path.truth.theta0.alpha)) * marks
    p2 = float(np.sum(psi(model, x, y, alpha, sentinel=sentinel,
                          check=False)))
    return p0, p1, p2

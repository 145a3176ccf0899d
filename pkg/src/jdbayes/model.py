"""Model definition for small-noise jump-diffusions.

The state equation is

    dX_t = a(X_t, mu) dt + eps * b(X_t, sigma) dW_t + eps * c(X_{t-}, alpha) dJ_t,

with J a compound Poisson process whose marks have density ``f_alpha``.
This module holds parameter boxes, the jump-mark families, the transformed
log-density ``psi`` and a few numeric spot checks of the standing assumptions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

# Kernel codes understood by the compiled core (see ``_pykernels``).
DRIFT_OU = 0
DRIFT_CONST = 1
DIFFUSION_CONST = 0
JUMPCOEF_UNIT = 0
FAMILY_NORMAL = 0
FAMILY_GAMMA = 1
FAMILY_IG = 2

FULL_LINE = "full_line"
POSITIVE_HALF_LINE = "positive_half_line"


class ModelError(ValueError):
    """Base class for model related errors."""


class DomainError(ModelError):
    """A coefficient left its admissible range (b <= 0 or c == 0)."""


class InvalidParameterError(ModelError):
    """A parameter vector lies outside its box."""


@dataclass(frozen=True)
class ParamBox:
    """Closed box ``[lo_i, hi_i]`` for one parameter block."""

    lo: np.ndarray
    hi: np.ndarray

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError(f"empty box: lo={lo}, hi={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def uniform(cls, lo: float, hi: float, dim: int) -> "ParamBox":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lo) and np.all(u <= self.hi))

    def check(self, u, name: str = "parameter") -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != self.lo.shape:
            raise InvalidParameterError(
                f"{name} has shape {u.shape}, expected {self.lo.shape}")
        if not self.contains(u):
            raise InvalidParameterError(
                f"{name}={u} outside box [{self.lo}, {self.hi}]")
        return u

    def corners(self) -> np.ndarray:
        grids = np.meshgrid(*[(l, h) for l, h in zip(self.lo, self.hi)],
                            indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)


@dataclass(frozen=True)
class ParamVector:
    """theta = (sigma, mu, alpha); each block is a 1-D float array."""

    sigma: np.ndarray
    mu: np.ndarray
    alpha: np.ndarray

    def __init__(self, sigma, mu, alpha):
        for name, val in (("sigma", sigma), ("mu", mu), ("alpha", alpha)):
            arr = np.atleast_1d(np.asarray(val, dtype=float)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_flat(cls, values: Sequence[float], d1: int = 1, d2: int = 1):
        values = np.asarray(values, dtype=float)
        return cls(values[:d1], values[d1:d1 + d2], values[d1 + d2:])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.sigma, self.mu, self.alpha])

    def replace(self, **blocks) -> "ParamVector":
        cur = {"sigma": self.sigma, "mu": self.mu, "alpha": self.alpha}
        cur.update(blocks)
        return ParamVector(**cur)


# ---------------------------------------------------------------------------
# jump-mark families
# ---------------------------------------------------------------------------

class JumpFamily:
    """Parametric density ``f_alpha`` of the jump marks.

    Subclasses give the log-density together with its derivatives in the
    parameter and in the argument; ``psi`` and its gradient are then built
    from the general definition in :func:`psi`.
    """

    name = "custom"
    code: Optional[int] = None
    dim = 2
    support = FULL_LINE

    def __init__(self, q: float = 1.0):
        # tail exponent entering the one-sided threshold bound rho < 1/(4q)
        self.q = float(q)

    def __repr__(self):
        return f"{type(self).__name__}(q={self.q})"

    def in_support(self, z):
        z = np.asarray(z, dtype=float)
        if self.support == POSITIVE_HALF_LINE:
            return z > 0
        return np.isfinite(z)

    def logpdf(self, z, alpha):
        raise NotImplementedError

    def pdf(self, z, alpha):
        return np.exp(self.logpdf(z, alpha))

    def dlogpdf_dalpha(self, z, alpha):
        """Gradient in alpha; trailing axis has length ``dim``."""
        raise NotImplementedError

    def dlogpdf_dz(self, z, alpha):
        raise NotImplementedError

    def sample(self, alpha, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def moment(self, p: float, alpha) -> float:
        """E|Z|^p by adaptive quadrature over the support."""
        lo = 0.0 if self.support == POSITIVE_HALF_LINE else -np.inf
        val, _ = integrate.quad(
            lambda z: abs(z) ** p * float(self.pdf(z, alpha)), lo, np.inf,
            epsabs=0.0, epsrel=1e-10, limit=200)
        return val

    def total_mass(self, alpha) -> float:
        return self.moment(0.0, alpha)


class NormalFamily(JumpFamily):
    """N(alpha_1, alpha_2) with alpha_2 the variance."""

    name = "normal"
    code = FAMILY_NORMAL
    support = FULL_LINE

    def logpdf(self, z, alpha):
        m, v = alpha[0], alpha[1]
        z = np.asarray(z, dtype=float)
        return -0.5 * np.log(2.0 * np.pi * v) - (z - m) ** 2 / (2.0 * v)

    def dlogpdf_dalpha(self, z, alpha):
        m, v = alpha[0], alpha[1]
        z = np.asarray(z, dtype=float)
        d1 = (z - m) / v
        d2 = -0.5 / v + (z - m) ** 2 / (2.0 * v * v)
        return np.stack(np.broadcast_arrays(d1, d2), axis=-1)

    def dlogpdf_dz(self, z, alpha):
        return -(np.asarray(z, dtype=float) - alpha[0]) / alpha[1]

    def sample(self, alpha, rng, size=None):
        return rng.normal(alpha[0], math.sqrt(alpha[1]), size=size)


class GammaFamily(JumpFamily):
    """Gamma with scale alpha_1 and shape alpha_2."""

    name = "gamma"
    code = FAMILY_GAMMA
    support = POSITIVE_HALF_LINE

    def logpdf(self, z, alpha):
        s, k = alpha[0], alpha[1]
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (-special.gammaln(k) - k * np.log(s)
                   + (k - 1.0) * np.log(z) - z / s)
        return np.where(z > 0, out, -np.inf)

    def dlogpdf_dalpha(self, z, alpha):
        s, k = alpha[0], alpha[1]
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = -k / s + z / (s * s)
            d2 = -special.digamma(k) - np.log(s) + np.log(z)
        return np.stack(np.broadcast_arrays(d1, d2), axis=-1)

    def dlogpdf_dz(self, z, alpha):
        s, k = alpha[0], alpha[1]
        return (k - 1.0) / np.asarray(z, dtype=float) - 1.0 / s

    def sample(self, alpha, rng, size=None):
        return rng.gamma(shape=alpha[1], scale=alpha[0], size=size)


class InverseGaussianFamily(JumpFamily):
    """Inverse Gaussian with mean alpha_1 and shape alpha_2."""

    name = "inverse_gaussian"
    code = FAMILY_IG
    support = POSITIVE_HALF_LINE

    def logpdf(self, z, alpha):
        m, lam = alpha[0], alpha[1]
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (0.5 * np.log(lam) - 0.5 * np.log(2.0 * np.pi)
                   - 1.5 * np.log(z) - lam * (z - m) ** 2 / (2.0 * m * m * z))
        return np.where(z > 0, out, -np.inf)

    def dlogpdf_dalpha(self, z, alpha):
        m, lam = alpha[0], alpha[1]
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = lam * (z - m) / m ** 3
            d2 = 0.5 / lam - (z - m) ** 2 / (2.0 * m * m * z)
        return np.stack(np.broadcast_arrays(d1, d2), axis=-1)

    def dlogpdf_dz(self, z, alpha):
        m, lam = alpha[0], alpha[1]
        z = np.asarray(z, dtype=float)
        return -1.5 / z - lam / (2.0 * m * m) * (1.0 - m * m / (z * z))

    def sample(self, alpha, rng, size=None):
        return rng.wald(alpha[0], alpha[1], size=size)


FAMILIES = {
    "normal": NormalFamily,
    "gamma": GammaFamily,
    "inverse_gaussian": InverseGaussianFamily,
}


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------

def _ou_drift(x, mu):
    return -mu[0] * np.asarray(x, dtype=float)


def _ou_drift_dmu(x, mu):
    return (-np.asarray(x, dtype=float))[..., None]


def _const_drift(x, mu):
    return np.full(np.shape(x), mu[0], dtype=float)


def _const_drift_dmu(x, mu):
    return np.ones(np.shape(x) + (1,))


def _const_diffusion(x, sigma):
    return np.full(np.shape(x), sigma[0], dtype=float)


def _const_diffusion_dsigma(x, sigma):
    return np.ones(np.shape(x) + (1,))


def _unit_jump_coeff(x, alpha):
    return np.ones(np.shape(x), dtype=float)


def _unit_jump_coeff_dalpha(x, alpha):
    return np.zeros(np.shape(x) + (len(alpha),))


@dataclass
class ModelSpec:
    """Coefficients, parameter boxes and jump family of the SDE.

    ``drift(x, mu)``, ``diffusion(x, sigma)`` and ``jump_coeff(x, alpha)``
    must accept an array ``x`` and broadcast over it. Gradients return an
    extra trailing axis of length ``d_i``. ``kernel_codes`` is set for the
    coefficient forms the compiled core knows; custom models leave it None
    and run on the pure-Python path.
    """

    drift: Callable
    drift_dmu: Callable
    diffusion: Callable
    diffusion_dsigma: Callable
    jump_coeff: Callable
    family: JumpFamily
    sigma_box: ParamBox
    mu_box: ParamBox
    alpha_box: ParamBox
    jump_coeff_dalpha: Optional[Callable] = None
    kernel_codes: Optional[tuple] = None
    name: str = "custom"

    @property
    def support_kind(self) -> str:
        return self.family.support

    @property
    def dims(self) -> tuple:
        return self.sigma_box.dim, self.mu_box.dim, self.alpha_box.dim

    def check_theta(self, theta: ParamVector) -> ParamVector:
        self.sigma_box.check(theta.sigma, "sigma")
        self.mu_box.check(theta.mu, "mu")
        self.alpha_box.check(theta.alpha, "alpha")
        return theta

    def with_boxes(self, sigma_box=None, mu_box=None, alpha_box=None):
        import dataclasses
        return dataclasses.replace(
            self,
            sigma_box=sigma_box or self.sigma_box,
            mu_box=mu_box or self.mu_box,
            alpha_box=alpha_box or self.alpha_box)


def make_model(drift: str = "ou", family: str | JumpFamily = "inverse_gaussian",
               box=(0.01, 50.0), sigma_box=None, mu_box=None, alpha_box=None,
               q: float = 1.0) -> ModelSpec:
    """Build one of the built-in models.

    ``drift`` is ``"ou"`` for a(x, mu) = -mu x or ``"const"`` for a = mu.
    Diffusion is b = sigma and the jump coefficient is c = 1.
    """
    if isinstance(family, str):
        family = FAMILIES[family](q=q)
    if drift == "ou":
        a, da, dcode = _ou_drift, _ou_drift_dmu, DRIFT_OU
    elif drift == "const":
        a, da, dcode = _const_drift, _const_drift_dmu, DRIFT_CONST
    else:
        raise ValueError(f"unknown drift kind {drift!r}")
    lo, hi = box
    return ModelSpec(
        drift=a, drift_dmu=da,
        diffusion=_const_diffusion, diffusion_dsigma=_const_diffusion_dsigma,
        jump_coeff=_unit_jump_coeff, jump_coeff_dalpha=_unit_jump_coeff_dalpha,
        family=family,
        sigma_box=sigma_box or ParamBox.uniform(lo, hi, 1),
        mu_box=mu_box or ParamBox.uniform(lo, hi, 1),
        alpha_box=alpha_box or ParamBox.uniform(lo, hi, family.dim),
        kernel_codes=(dcode, DIFFUSION_CONST, JUMPCOEF_UNIT, family.code),
        name=f"{drift}_{family.name}",
    )


PRESETS = {
    "ou_ig": dict(drift="ou", family="inverse_gaussian"),
    "ou_normal": dict(drift="ou", family="normal"),
    "ou_gamma": dict(drift="ou", family="gamma"),
}


def preset(name: str, **kwargs) -> ModelSpec:
    try:
        opts = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown model preset {name!r}; "
                         f"choose from {sorted(PRESETS)}") from None
    opts.update(kwargs)
    model = make_model(**opts)
    model.name = name
    return model


# ---------------------------------------------------------------------------
# psi and its alpha-gradient
# ---------------------------------------------------------------------------

def _jump_coeff_grad(model: ModelSpec, x, alpha, step=1e-6):
    if model.jump_coeff_dalpha is not None:
        return np.asarray(model.jump_coeff_dalpha(x, alpha), dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    cols = []
    for i in range(alpha.size):
        e = np.zeros_like(alpha)
        e[i] = step * max(1.0, abs(alpha[i]))
        cols.append((model.jump_coeff(x, alpha + e)
                     - model.jump_coeff(x, alpha - e)) / (2 * e[i]))
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def psi(model: ModelSpec, x, y, alpha, sentinel: str = "zero", check=True):
    """log[(1/|c(x,alpha)|) f_alpha(y / c(x,alpha))], vectorised over x, y.

    Where the density vanishes the value is 0 (``sentinel="zero"``) or
    ``-inf`` (``sentinel="neg_inf"``).
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if check:
        model.alpha_box.check(alpha, "alpha")
    c = np.asarray(model.jump_coeff(x, alpha), dtype=float)
    if np.any(c == 0):
        raise DomainError("jump coefficient c(x, alpha) vanished")
    z = np.asarray(y, dtype=float) / c
    inside = model.family.in_support(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = model.family.logpdf(np.where(inside, z, 1.0), alpha)
        val = logf - np.log(np.abs(c))
    dead = ~inside | ~np.isfinite(val)
    if np.any(dead):
        fill = 0.0 if sentinel == "zero" else -np.inf
        val = np.where(dead, fill, val)
    return val[()] if np.ndim(val) == 0 else val


def dpsi_dalpha(model: ModelSpec, x, y, alpha):
    """Gradient of :func:`psi` in alpha (trailing axis of length d3)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    model.alpha_box.check(alpha, "alpha")
    c = np.asarray(model.jump_coeff(x, alpha), dtype=float)
    if np.any(c == 0):
        raise DomainError("jump coefficient c(x, alpha) vanished")
    y = np.asarray(y, dtype=float)
    z = y / c
    if not np.all(model.family.in_support(z)):
        raise DomainError("y must lie strictly inside the jump support")
    dc = _jump_coeff_grad(model, x, alpha)
    fam = model.family
    g = fam.dlogpdf_dalpha(z, alpha)
    dz = fam.dlogpdf_dz(z, alpha)
    # d/dalpha [-log|c| + log f(y/c)]
    out = (g - (dc / c[..., None])
           - (dz * z / c)[..., None] * dc)
    return out


def sample_jump(model: ModelSpec, alpha, rng_seed, size=None):
    """Draw from f_alpha; ``rng_seed`` is an int, SeedSequence or Generator."""
    alpha = model.alpha_box.check(alpha, "alpha")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) \
        else np.random.default_rng(rng_seed)
    return model.family.sample(alpha, rng, size=size)


# ---------------------------------------------------------------------------
# assumption report
# ---------------------------------------------------------------------------

PASS, FAIL, NOT_CHECKED = "pass", "fail", "not-checked"


@dataclass
class AssumptionCheck:
    status: str
    evidence: dict = field(default_factory=dict)


@dataclass
class AssumptionReport:
    entries: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(e.status != FAIL for e in self.entries.values())

    def __getitem__(self, key) -> AssumptionCheck:
        return self.entries[key]

    def to_text(self) -> str:
        lines = []
        for key, chk in self.entries.items():
            ev = ", ".join(f"{k}={_fmt(v)}" for k, v in chk.evidence.items())
            lines.append(f"{key:<6} {chk.status:<12} {ev}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + " ".join(_fmt(x) for x in np.ravel(v)) + "]"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def _box_probes(box: ParamBox, extra) -> np.ndarray:
    pts = [box.corners(), box.midpoint[None, :], np.atleast_2d(extra)]
    return np.concatenate(pts, axis=0)


def validate_assumptions(model: ModelSpec, theta0: ParamVector,
                         probe_grid=None, rho: Optional[float] = None,
                         x0: float = 1.0, time_quad_n: int = 200
                         ) -> AssumptionReport:
    """Numeric spot checks of positivity, moments, the rho bound and
    positive definiteness of the information matrices."""
    from .simulator import fisher_info, QuadratureError

    if probe_grid is None:
        probe_grid = np.linspace(-10.0, 10.0, 41)
    xs = np.asarray(probe_grid, dtype=float)
    rep = AssumptionReport()

    bmin = min(float(np.min(model.diffusion(xs, s)))
               for s in _box_probes(model.sigma_box, theta0.sigma))
    cmin = min(float(np.min(np.abs(model.jump_coeff(xs, a))))
               for a in _box_probes(model.alpha_box, theta0.alpha))
    rep.entries["A3"] = AssumptionCheck(
        PASS if (bmin > 0 and cmin > 0) else FAIL,
        {"min_b": bmin, "min_abs_c": cmin})

    moments = [model.family.moment(p, theta0.alpha) for p in range(5)]
    finite = all(np.isfinite(m) for m in moments)
    rep.entries["A4"] = AssumptionCheck(
        PASS if finite else FAIL, {"moments_p0_to_p4": moments})

    if rho is None:
        rep.entries["RHO"] = AssumptionCheck(NOT_CHECKED, {})
    else:
        if model.support_kind == FULL_LINE:
            bound, kind = 0.5, "A6"
        else:
            bound, kind = 1.0 / (4.0 * model.family.q), "A7"
        rep.entries["RHO"] = AssumptionCheck(
            PASS if 0 < rho < bound else FAIL,
            {"rho": rho, "upper_bound": bound, "variant": kind})

    try:
        fi = fisher_info(model, theta0, x0=x0, time_quad_n=time_quad_n)
    except (QuadratureError, ModelError, FloatingPointError) as exc:
        rep.entries["A10"] = AssumptionCheck(FAIL, {"error": str(exc)})
    else:
        eig = {k: np.linalg.eigvalsh(v) for k, v in fi.blocks().items()}
        pd = all(np.all(e > 0) for e in eig.values())
        rep.entries["A10"] = AssumptionCheck(
            PASS if pd else FAIL, {f"eig_{k}": v for k, v in eig.items()})
    return rep

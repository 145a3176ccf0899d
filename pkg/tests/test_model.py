import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from jdbayes.model import (DomainError, FAMILIES, InvalidParameterError,
                           ParamBox, ParamVector, dpsi_dalpha, make_model,
                           preset, psi, sample_jump, validate_assumptions)

from conftest import THETA0, custom_model

MODELS = {
    "normal": make_model("ou", "normal",
                         alpha_box=ParamBox([-5.0, 0.01], [5.0, 50.0])),
    "gamma": make_model("ou", "gamma"),
    "inverse_gaussian": make_model("ou", "inverse_gaussian"),
}
PROBE_ALPHAS = {
    "normal": [(0.0, 1.0), (1.2, 0.5), (-2.0, 3.0), (0.5, 0.1), (3.0, 7.0)],
    "gamma": [(1.0, 2.0), (1.2, 0.5), (0.3, 4.0), (2.0, 1.0), (5.0, 1.5)],
    "inverse_gaussian": [(1.2, 0.5), (1.0, 1.0), (0.5, 3.0), (2.0, 0.8),
                         (3.0, 10.0)],
}


def test_box_rejects_empty_and_allows_degenerate():
    with pytest.raises(ValueError):
        ParamBox([1.0], [0.5])
    box = ParamBox([2.0], [2.0])
    assert box.contains([2.0]) and not box.contains([2.0 + 1e-12])


def test_box_check_shape_and_range():
    box = ParamBox.uniform(0.01, 50, 2)
    with pytest.raises(InvalidParameterError):
        box.check([1.0])
    with pytest.raises(InvalidParameterError):
        box.check([1.0, 60.0])


def test_param_vector_roundtrip():
    flat = [2.0, 1.0, 1.2, 0.5]
    th = ParamVector.from_flat(flat)
    np.testing.assert_array_equal(th.flat(), flat)
    assert th.replace(mu=[3.0]).mu[0] == 3.0


def test_preset_boxes_contain_truth(ou_ig):
    ou_ig.check_theta(THETA0)
    assert ou_ig.dims == (1, 1, 2)
    with pytest.raises(ValueError):
        preset("nope")


def test_psi_normal_standard_at_zero():
    val = psi(MODELS["normal"], 0.0, 0.0, [0.0, 1.0])
    assert val == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-14)


def test_psi_gamma_outside_support_sentinel():
    m = MODELS["gamma"]
    assert psi(m, 0.0, -1.0, [1.0, 2.0]) == 0.0
    assert psi(m, 0.0, -1.0, [1.0, 2.0], sentinel="neg_inf") == -np.inf


def test_psi_ig_against_high_precision():
    mpmath.mp.dps = 40
    a1, a2, y = mpmath.mpf("1.2"), mpmath.mpf("0.5"), mpmath.mpf("1.2")
    dens = mpmath.sqrt(a2 / (2 * mpmath.pi * y ** 3)) * \
        mpmath.exp(-a2 * (y - a1) ** 2 / (2 * a1 ** 2 * y))
    expected = float(mpmath.log(dens))
    got = psi(MODELS["inverse_gaussian"], 0.3, 1.2, [1.2, 0.5])
    assert got == pytest.approx(expected, rel=1e-14)


def test_psi_box_violation():
    with pytest.raises(InvalidParameterError):
        psi(MODELS["gamma"], 0.0, 1.0, [100.0, 1.0])


def test_normal_dpsi_first_component():
    # d/d alpha_1 log phi((y - a1)/sqrt(a2)) = (y - a1)/a2 = +2 here
    m = MODELS["normal"]
    g = dpsi_dalpha(m, 0.0, 2.0, [0.0, 1.0])
    assert g[0] == pytest.approx(2.0, abs=1e-14)
    h = 1e-6
    fd = (psi(m, 0.0, 2.0, [h, 1.0]) - psi(m, 0.0, 2.0, [-h, 1.0])) / (2 * h)
    assert g[0] == pytest.approx(fd, rel=1e-8)


def _fd_grad(model, x, y, alpha, step=1e-6):
    alpha = np.asarray(alpha, dtype=float)
    out = np.empty(alpha.size)
    for i in range(alpha.size):
        e = np.zeros_like(alpha)
        e[i] = step * max(1.0, abs(alpha[i]))
        out[i] = (psi(model, x, y, alpha + e, check=False)
                  - psi(model, x, y, alpha - e, check=False)) / (2 * e[i])
    return out


def test_gamma_dpsi_matches_finite_differences():
    m = MODELS["gamma"]
    g = dpsi_dalpha(m, 0.0, 1.0, [1.0, 2.0])
    np.testing.assert_allclose(g, _fd_grad(m, 0.0, 1.0, [1.0, 2.0]),
                               rtol=1e-7)


def _rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-3))


# c depends on x and alpha, so the chain-rule terms are exercised too
SCALED = {
    fam: custom_model(
        fam,
        c=lambda x, a: 1.0 + 0.5 * np.tanh(x) + 0.1 * a[0],
        dc=lambda x, a: np.stack(np.broadcast_arrays(
            np.full(np.shape(x), 0.1), np.zeros(np.shape(x))), axis=-1),
        alpha_box=ParamBox([0.05, 0.05], [5.0, 20.0]))
    for fam in FAMILIES
}


@pytest.mark.parametrize("fam", sorted(FAMILIES))
@pytest.mark.parametrize("coeff", ["unit", "scaled"])
def test_dpsi_random_probes(fam, coeff):
    model = MODELS[fam] if coeff == "unit" else SCALED[fam]
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        x = rng.uniform(-2, 2)
        alpha = np.array([rng.uniform(0.3, 3.0), rng.uniform(0.3, 5.0)])
        c = float(model.jump_coeff(x, alpha))
        z = rng.uniform(0.2, 4.0) if fam != "normal" else rng.normal(alpha[0], 1)
        g = dpsi_dalpha(model, x, c * z, alpha)
        worst = max(worst, _rel_err(g, _fd_grad(model, x, c * z, alpha)))
    assert worst < 1e-5


def test_dpsi_rejects_boundary():
    with pytest.raises(DomainError):
        dpsi_dalpha(MODELS["gamma"], 0.0, 0.0, [1.0, 2.0])


@pytest.mark.parametrize("fam", sorted(FAMILIES))
def test_density_normalization(fam):
    f = FAMILIES[fam]()
    for alpha in PROBE_ALPHAS[fam]:
        assert abs(f.total_mass(np.array(alpha)) - 1.0) < 1e-6


@pytest.mark.parametrize("fam", ["gamma", "inverse_gaussian"])
def test_density_zero_off_support(fam):
    f = FAMILIES[fam]()
    assert np.all(f.pdf(np.array([-3.0, -1e-9, 0.0]), [1.0, 2.0]) == 0.0)


def _normal_closed(x, y, a, c):
    return (-math.log(abs(c)) - 0.5 * math.log(2 * math.pi * a[1])
            - (y / c - a[0]) ** 2 / (2 * a[1]))


def _gamma_closed(y, a):
    return ((a[1] - 1) * math.log(y) - y / a[0] - a[1] * math.log(a[0])
            - special.gammaln(a[1]))


def test_psi_matches_closed_forms():
    rng = np.random.default_rng(5)
    sc = SCALED["normal"]
    for _ in range(50):
        x = rng.uniform(-3, 3)
        a = np.array([rng.uniform(0.1, 4.0), rng.uniform(0.1, 4.0)])
        y = rng.uniform(0.05, 6.0)
        c = float(sc.jump_coeff(x, a))
        assert psi(sc, x, y, a) == pytest.approx(_normal_closed(x, y, a, c),
                                                 rel=1e-10)
        assert psi(MODELS["gamma"], x, y, a) == pytest.approx(
            _gamma_closed(y, a), rel=1e-10)


def test_sampling_normal_mean():
    v = sample_jump(MODELS["normal"], [0.0, 1.0], 1, size=100_000)
    assert abs(v.mean()) < 4 / math.sqrt(1e5)


def test_sampling_gamma_positive():
    v = sample_jump(MODELS["gamma"], [1.0, 2.0], 2, size=100_000)
    assert np.all(v > 0)


def test_sampling_ig_mean():
    a1, a2 = 1.2, 0.5
    v = sample_jump(MODELS["inverse_gaussian"], [a1, a2], 3, size=100_000)
    se = math.sqrt(a1 ** 3 / a2) / math.sqrt(1e5)
    assert abs(v.mean() - a1) < 4 * se


@settings(max_examples=40, deadline=None)
@given(fam=st.sampled_from(sorted(FAMILIES)),
       a1=st.floats(0.1, 10.0), a2=st.floats(0.1, 10.0),
       seed=st.integers(0, 2 ** 32 - 1))
def test_samples_have_positive_density(fam, a1, a2, seed):
    f = FAMILIES[fam]()
    v = f.sample(np.array([a1, a2]), np.random.default_rng(seed), size=200)
    assert np.all(f.pdf(v, [a1, a2]) > 0)


def test_gamma_fourth_moment():
    a1, a2 = 1.3, 2.5
    f = FAMILIES["gamma"]()
    exact = a1 ** 4 * a2 * (a2 + 1) * (a2 + 2) * (a2 + 3)
    assert f.moment(4, [a1, a2]) == pytest.approx(exact, rel=1e-4)


def test_assumptions_pass_on_reference_model(ou_ig):
    rep = validate_assumptions(ou_ig, THETA0, rho=0.24)
    assert rep.ok
    assert {k: rep[k].status for k in rep.entries} == {
        "A3": "pass", "A4": "pass", "RHO": "pass", "A10": "pass"}


def test_assumptions_flag_zero_diffusion():
    m = make_model("ou", "inverse_gaussian",
                   sigma_box=ParamBox([0.0], [5.0]))
    rep = validate_assumptions(m, THETA0)
    assert rep["A3"].status == "fail"
    assert not rep.ok


def test_assumptions_flag_rho_bound(ou_ig):
    rep = validate_assumptions(ou_ig, THETA0, rho=0.3)
    assert rep["RHO"].status == "fail"


def test_coefficient_gradients_match_finite_differences(ou_ig):
    xs = np.linspace(-3, 3, 13)
    h = 1e-6
    for mu in (0.5, 1.0, 7.0):
        fd = (ou_ig.drift(xs, [mu + h]) - ou_ig.drift(xs, [mu - h])) / (2 * h)
        np.testing.assert_allclose(ou_ig.drift_dmu(xs, [mu])[:, 0], fd,
                                   rtol=1e-6, atol=1e-12)
        fd = (ou_ig.diffusion(xs, [mu + h])
              - ou_ig.diffusion(xs, [mu - h])) / (2 * h)
        np.testing.assert_allclose(ou_ig.diffusion_dsigma(xs, [mu])[:, 0], fd,
                                   rtol=1e-6)

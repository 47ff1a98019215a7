import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cosserat_msmfe.model import (
    LengthScale,
    ManufacturedCase,
    MaterialParams,
    apply_A_omega,
    apply_A_sigma,
    apply_C_omega,
    apply_C_sigma,
    asym,
    asym_star,
    operator_matrix,
    quadratic_form_split,
    varpi,
    varpi_grad,
)

P = MaterialParams()
finite = st.floats(-10, 10, allow_nan=False)


def test_asym_examples():
    assert asym(np.array([[1.0, 2.0], [3.0, 4.0]]))[0] == 1.0
    assert np.array_equal(asym_star(np.array([1.0, 0.0, 0.0])), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])


@given(arrays(float, 3, elements=finite))
def test_asym_asym_star_is_twice_identity_3d(r):
    assert np.allclose(asym(asym_star(r)), 2 * r)


@given(arrays(float, 1, elements=finite))
def test_asym_asym_star_is_twice_identity_2d(r):
    assert np.allclose(asym(asym_star(r)), 2 * r)


@given(arrays(float, (3, 3), elements=finite), arrays(float, 3, elements=finite))
def test_asym_star_is_adjoint(t, r):
    assert np.sum(asym_star(r) * t) == pytest.approx(asym(t) @ r, abs=1e-9)


def test_compliance_examples():
    assert np.allclose(apply_A_sigma(P, np.eye(2)), np.eye(2) / 4)
    assert np.allclose(apply_A_sigma(P, np.array([[0.0, -1.0], [1.0, 0.0]])), [[0, -5], [5, 0]])
    assert np.allclose(apply_A_sigma(P, np.zeros((2, 2))), 0)


@settings(max_examples=200)
@given(st.sampled_from([2, 3]), st.integers(0, 2**31 - 1))
def test_inverse_pairs(dim, seed):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal((5, dim, dim))
    assert np.allclose(apply_C_sigma(P, apply_A_sigma(P, t)), t, atol=1e-13 * (1 + np.abs(t).max()))
    k = 1 if dim == 2 else 3
    w = rng.standard_normal((5, k, dim))
    assert np.allclose(apply_C_omega(P, apply_A_omega(P, w)), w, atol=1e-13 * (1 + np.abs(w).max()))


@settings(max_examples=100)
@given(st.sampled_from([2, 3]), st.floats(0.1, 5), st.floats(0.01, 2), st.floats(0, 5), st.integers(0, 2**31 - 1))
def test_split_form_matches_direct(dim, mu, muc, lam, seed):
    p = MaterialParams(mu_sigma=mu, muc_sigma=muc, lam_sigma=lam)
    t = np.random.default_rng(seed).standard_normal((dim, dim))
    direct = np.sum(apply_A_sigma(p, t) * t)
    assert quadratic_form_split(p, t) == pytest.approx(direct, rel=1e-12)
    assert np.allclose(operator_matrix(p, dim, form="split"), operator_matrix(p, dim), rtol=1e-12, atol=1e-14)


@settings(max_examples=50)
@given(st.sampled_from([2, 3]), st.integers(0, 2**31 - 1))
def test_compliance_positive_definite(dim, seed):
    t = np.random.default_rng(seed).standard_normal((dim, dim))
    assert np.sum(apply_A_sigma(P, t) * t) > 0
    assert np.all(np.linalg.eigvalsh(operator_matrix(P, dim, "omega")) > 0)


def test_doubling_muc_halves_skew_form():
    s = np.array([[0.0, -0.7], [0.7, 0.0]])
    a = np.sum(apply_A_sigma(MaterialParams(muc_sigma=0.2), s) * s)
    b = np.sum(apply_A_sigma(MaterialParams(muc_sigma=0.1), s) * s)
    assert a == pytest.approx(b / 2)


def test_param_validation():
    with pytest.raises(ValueError):
        MaterialParams(mu_sigma=0.0)
    with pytest.raises(ValueError):
        MaterialParams(lam_omega=-1.0)


def test_varpi_values_and_bounds():
    assert varpi(0.2) == 0 and varpi(0.9) == 1
    assert varpi(0.5) == pytest.approx(0.5)
    x = np.linspace(0, 1, 100001)
    assert varpi(x).max() == pytest.approx(1.0)
    assert np.abs(varpi_grad(x)).max() == pytest.approx(1.5 * np.pi, rel=1e-3)
    # continuous value and slope at the breakpoints
    for b in (1 / 3, 2 / 3):
        assert abs(varpi(b + 1e-9) - varpi(b - 1e-9)) < 1e-8
        assert abs(varpi_grad(b + 1e-9) - varpi_grad(b - 1e-9)) < 1e-6


@settings(max_examples=100)
@given(st.floats(0.01, 0.99))
def test_varpi_grad_central_difference(x):
    h = 1e-6
    if min(abs(x - 1 / 3), abs(x - 2 / 3)) < 2 * h:
        return
    fd = (varpi(x + h) - varpi(x - h)) / (2 * h)
    assert float(varpi_grad(x)) == pytest.approx(float(fd), abs=1e-8)


def test_lengthscale_names():
    for name in ("one", "zero", "varpi"):
        assert LengthScale.from_name(name).name == name
    assert LengthScale.from_name("zero").is_zero
    with pytest.raises(ValueError):
        LengthScale.from_name("two")


@pytest.mark.parametrize("dim", [2, 3])
def test_boundary_values_vanish(dim):
    rng = np.random.default_rng(0)
    x = rng.random((50, dim))
    x[np.arange(50), rng.integers(0, dim, 50)] = rng.integers(0, 2, 50)
    case = ManufacturedCase(dim)
    assert np.allclose(case.displacement(x), 0, atol=1e-15)
    assert np.allclose(case.rotation(x), 0, atol=1e-15)


def test_center_values():
    u, r, _, _ = ManufacturedCase(2).exact_fields(np.array([[0.5, 0.5]]))
    assert np.allclose(u, [[0.25, 0.25]]) and np.allclose(r, [[1.0]])
    f_sigma, _ = ManufacturedCase(2).forcing(np.array([[0.5, 0.5]]))
    assert f_sigma[0, 0] == pytest.approx(f_sigma[0, 1], rel=1e-13)


@pytest.mark.parametrize("dim", [2, 3])
def test_constitutive_consistency(dim):
    x = np.random.default_rng(1).random((100, dim))
    case = ManufacturedCase(dim)
    u, r, sigma, omega = case.exact_fields(x)
    h = 1e-5
    grad_u = np.stack([(case.displacement(x + h * e) - case.displacement(x - h * e)) / (2 * h)
                       for e in np.eye(dim)], axis=-1)
    resid = apply_A_sigma(case.params, sigma) - grad_u - asym_star(r)
    assert np.abs(resid).max() <= 1e-9
    # the jet gradient itself satisfies the law to machine precision
    assert np.allclose(apply_C_sigma(case.params, apply_A_sigma(case.params, sigma)), sigma, atol=1e-13)


def test_zero_lengthscale_gives_zero_couple_stress():
    case = ManufacturedCase(2, LengthScale.from_name("zero"))
    x = np.random.default_rng(2).random((20, 2))
    _, _, sigma, omega = case.exact_fields(x)
    assert np.all(omega == 0)
    _, f_omega = case.forcing(x)
    assert np.allclose(f_omega, asym(sigma), atol=1e-14)


def richardson_divergence(fun, x, h=1e-4):
    """Two-level Richardson-extrapolated central difference of a row-wise divergence."""
    def cd(step):
        d = x.shape[1]
        return sum((fun(x + step * e)[..., i] - fun(x - step * e)[..., i]) / (2 * step)
                   for i, e in enumerate(np.eye(d)))
    return (4 * cd(h / 2) - cd(h)) / 3


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("ell", ["one", "varpi", "zero"])
def test_forcing_matches_fd_oracle(dim, ell):
    rng = np.random.default_rng(4)
    x = 0.05 + 0.9 * rng.random((100, dim))
    if ell == "varpi":
        # keep the stencil away from the kinks of the second derivative
        x = x[np.min(np.abs(x[:, :1] - [1 / 3, 2 / 3]), axis=1) > 1e-3]
    lscale = LengthScale.from_name(ell)
    case = ManufacturedCase(dim, lscale)
    f_sigma, f_omega = case.forcing(x)
    sig = lambda y: case.exact_fields(y)[2]
    # the momentum balance differentiates ell * omega
    om = lambda y: lscale(y)[:, None, None] * case.exact_fields(y)[3]
    assert np.allclose(f_sigma, -richardson_divergence(sig, x), atol=1e-7)
    _, _, sigma, _ = case.exact_fields(x)
    assert np.allclose(f_omega, asym(sigma) - richardson_divergence(om, x), atol=1e-7)


def test_zero_solution_has_zero_forcing():
    case = ManufacturedCase(3, solution="zero")
    f_sigma, f_omega = case.forcing(np.random.default_rng(0).random((10, 3)))
    assert np.all(f_sigma == 0) and np.all(f_omega == 0)

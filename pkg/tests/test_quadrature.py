import math

import numpy as np
import pytest
from scipy.linalg import eigh
from hypothesis import given, settings, strategies as st

from cosserat_msmfe.acceptance import quadrature_check
from cosserat_msmfe.fespace import make_space
from cosserat_msmfe.mesh import build_structured_square, compute_topology
from cosserat_msmfe.quadrature import gauss_rule, integrate, integrate_mesh, q1_rule, q2_rule, reference_measure

UNIT_TRI = compute_topology(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
UNIT_TET = compute_topology(np.vstack([np.zeros(3), np.eye(3)]), np.array([[0, 1, 2, 3]]))


def simplex_monomial(alpha):
    """Oracle: integral of prod x_i^a_i over the unit simplex."""
    d = len(alpha)
    return math.prod(math.factorial(a) for a in alpha) / math.factorial(d + sum(alpha))


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("degree", range(0, 7))
def test_gauss_exact_on_monomials(dim, degree):
    rule = gauss_rule(dim, degree)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(reference_measure(dim), abs=1e-15)
    x = rule.cartesian()
    for alpha in np.ndindex(*(degree + 1,) * dim):
        if sum(alpha) > degree:
            continue
        val = rule.weights @ np.prod(x ** np.array(alpha), axis=1)
        assert val == pytest.approx(simplex_monomial(alpha), rel=1e-13)


def test_gauss_rejects_degree():
    with pytest.raises(ValueError):
        gauss_rule(2, 7)


def test_centroid_rule():
    r = gauss_rule(2, 1)
    assert r.size == 1 and r.weights[0] == pytest.approx(0.5)


def test_documented_integrals():
    assert integrate(gauss_rule(2, 2), UNIT_TRI, 0, lambda x: x[:, 0] ** 2) == pytest.approx(1 / 12)
    lam1 = lambda x: x[:, 0] ** 2  # barycentric coordinate of vertex 1 on the unit tet
    assert integrate(gauss_rule(3, 2), UNIT_TET, 0, lam1) == pytest.approx(1 / 60)
    assert integrate(q2_rule(3), UNIT_TET, 0, lam1) == pytest.approx(1 / 60)


def test_q1_weights_and_values():
    r = q1_rule(2)
    assert r.size == 3 and np.allclose(r.weights, 1 / 6)
    assert integrate(r, UNIT_TRI, 0, lambda x: x[:, 0]) == pytest.approx(1 / 6)
    # inexact on quadratics
    assert integrate(r, UNIT_TRI, 0, lambda x: x[:, 0] ** 2) == pytest.approx(1 / 6)


def test_q2_weights_and_values():
    r = q2_rule(2)
    assert np.allclose(r.weights[:3], 1 / 24) and r.weights[3] == pytest.approx(3 / 8)
    assert integrate(r, UNIT_TRI, 0, lambda x: x[:, 0] ** 2) == pytest.approx(1 / 12)


def test_integrate_constant_and_affine():
    m = build_structured_square(3)
    for c in (0, 7):
        assert integrate(q1_rule(2), m, c, lambda x: np.ones(len(x))) == pytest.approx(m.volumes[c])
    f = lambda x: 2 * x[..., 0] - x[..., 1] + 0.3
    assert integrate_mesh(q1_rule(2), m, f) == pytest.approx(integrate_mesh(gauss_rule(2, 2), m, f))


@pytest.mark.parametrize("dim", [2, 3])
def test_lumped_exact_against_p0(dim):
    """(phi_k, psi_0) with Q_k equals the exact product for random data."""
    rng = np.random.default_rng(3)
    g = gauss_rule(dim, 4)
    for rule, deg in ((q1_rule(dim), 1), (q2_rule(dim), 2)):
        for _ in range(20):
            c = rng.standard_normal((dim + 1, dim + 1))
            b = rng.standard_normal(dim + 1)
            psi = rng.standard_normal()

            def phi(bary):
                return bary @ b if deg == 1 else np.einsum("qi,ij,qj->q", bary, c, bary)

            exact = g.weights @ (phi(g.points) * psi)
            approx = rule.weights @ (phi(rule.points) * psi)
            assert approx == pytest.approx(exact, rel=1e-12, abs=1e-14)


def test_q2_is_only_a_seminorm_on_full_p2():
    """lambda0*lambda1 - lambda1*lambda2 vanishes at every Q2 point."""
    rule = q2_rule(2)
    phi = lambda b: b[:, 0] * b[:, 1] - b[:, 1] * b[:, 2]
    assert np.allclose(phi(rule.points), 0.0)
    g = gauss_rule(2, 4)
    assert g.weights @ phi(g.points) ** 2 > 1e-3


@pytest.mark.parametrize("family, rule, dim", [("BDM1", q1_rule, 2), ("RT1", q2_rule, 2), ("BDM1", q1_rule, 3),
                                               ("RT1", q2_rule, 3)])
def test_lumped_norm_equivalent_on_stress_element(family, rule, dim):
    """Generalized eigenvalues of the lumped vs exact mass on one cell are positive."""
    from cosserat_msmfe.mesh import build_structured_cube

    m = build_structured_square(3) if dim == 2 else build_structured_cube(3)
    sp = make_space(m, family)
    vals = {}
    for name, r in (("exact", gauss_rule(dim, 4)), ("lumped", rule(dim))):
        w = r.physical_weights(m)
        phi, _ = sp.tabulate(r.points)
        vals[name] = np.einsum("cq,cqai,cqbi->cab", w, phi, phi)[0]
    ev = eigh(vals["lumped"], vals["exact"], eigvals_only=True)
    assert ev.min() > 0.1 and ev.max() < 10


def test_norm_equivalence_bracket_and_drift():
    worst, stats = quadrature_check(samples=200, levels=(3, 6, 12))
    assert worst <= 1e-12
    for means, lows, highs in stats.values():
        assert np.all(lows > 0) and np.all(np.isfinite(highs))
        assert np.max(np.abs(means - means[0]) / means[0]) <= 0.05


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_q1_exact_for_any_affine(coef):
    a, b, c = coef
    f = lambda x: a + b * x[:, 0] + c * x[:, 1]
    exact = integrate(gauss_rule(2, 2), UNIT_TRI, 0, f)
    assert integrate(q1_rule(2), UNIT_TRI, 0, f) == pytest.approx(exact, rel=1e-12, abs=1e-12)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phiblab.catalog import make_model
from phiblab.checks import symbol_suite
from phiblab.errors import GeometryMismatch
from phiblab.geometry import b_cylinder, b_interval, corner
from phiblab.operators import X1, XW, BPhiOperator, compose_ops
from phiblab.randomized import random_operator
from phiblab.symbols import (
    IndicialFamily,
    Verdict,
    block_diag_families,
    check_compat,
    classify,
    full_ellipticity,
    joint_symbol,
    normal0,
    normal1,
    principal_symbol,
    real_line_min_singular,
    weight_shift_check,
)


def test_dirac_indicial_family_is_diagonal():
    a, N = 0.3, 3
    F = normal1(make_model("D", a=a).operator(), N)
    n = np.arange(-N, N + 1)
    for lam in (0.0, 0.7 - 0.2j, -1.5j):
        np.testing.assert_allclose(F(lam), np.diag(1j * lam - n - a), atol=1e-15)


def test_laplace_indicial_family():
    F = normal1(make_model("laplace", c=1.0).operator(), 2)
    n = np.arange(-2, 3)
    np.testing.assert_allclose(F(0.5j), np.diag((0.5j) ** 2 + n ** 2 + 1.0), atol=1e-14)


def test_dirac_principal_symbol():
    s = principal_symbol(make_model("D", a=0.3).operator())
    xi = np.array([[0, 1.0, 0, 0], [0, 0, 0, 1.0]])
    np.testing.assert_allclose(s.evaluate((0, 0.5, 0, 0.1), xi)[:, 0, 0], [1j, -1])


def test_principal_symbol_rejects_low_nominal_order():
    P = make_model("laplace").operator()
    with pytest.raises(ValueError):
        principal_symbol(P, order=1)
    assert principal_symbol(P, order=3).is_zero()


def test_normal0_needs_corner():
    with pytest.raises(GeometryMismatch):
        normal0(make_model("D").operator())


@pytest.mark.parametrize("g", [b_interval(2), b_cylinder(3, 2), corner(2, 2)], ids=lambda g: g.kind.value)
@given(seed=st.integers(0, 2**32 - 1))
def test_principal_symbol_is_multiplicative(g, seed):
    rng = np.random.default_rng(seed)
    P, Q = random_operator(rng, g, 2), random_operator(rng, g, 1)
    PQ = compose_ops(P, Q)
    assert principal_symbol(PQ).distance(principal_symbol(P) * principal_symbol(Q)) <= 1e-12 * max(1, PQ.max_abs())


@given(seed=st.integers(0, 2**32 - 1))
def test_indicial_family_is_multiplicative(seed):
    rng = np.random.default_rng(seed)
    g = b_cylinder(2)
    P, Q = random_operator(rng, g, 2), random_operator(rng, g, 2)
    lam = complex(*rng.uniform(-1, 1, 2))
    # the product of truncations agrees with the truncation of the product away from the mode cut
    N, keep = 6, slice(4, 9)
    lhs = normal1(P @ Q, N)(lam)[keep, keep]
    rhs = (normal1(P, N)(lam) @ normal1(Q, N)(lam))[keep, keep]
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(lhs)))


@pytest.mark.parametrize("g", [b_cylinder(3), corner(2)], ids=lambda g: g.kind.value)
@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(-2, 2))
def test_weight_shift(g, seed, beta):
    rng = np.random.default_rng(seed)
    P = random_operator(rng, g, 2)
    assert weight_shift_check(P, beta, [0.3, -1.0 + 0.5j]) <= 1e-13


@pytest.mark.parametrize("g", [b_interval(), b_cylinder(3), corner(2)], ids=lambda g: g.kind.value)
@given(seed=st.integers(0, 2**32 - 1))
def test_joint_symbol_is_compatible(g, seed):
    P = random_operator(np.random.default_rng(seed), g, 2)
    rep = check_compat(joint_symbol(P))
    assert rep.passed, rep.to_dict()
    assert set(rep.checks) == ({"a", "b", "c"} if g.kind.value == "CORNER" else {"a"})


def test_compat_detects_tampered_indicial_part():
    P = make_model("D", a=0.3).operator()
    j = joint_symbol(P)
    Q = P + BPhiOperator.generator(P.geometry, X1)
    bad = type(j)(j.s, j.n0, joint_symbol(Q).n1, j.kind)
    assert check_compat(bad).failed() == ["a"]


def test_symbol_suite_small():
    res = symbol_suite(b_cylinder(3), count=10, seed=1)
    assert res.passed, res.to_dict()


def test_classify_bands():
    assert classify(1.0, 0.1) == Verdict.PASS
    assert classify(0.001, 0.1) == Verdict.FAIL
    assert classify(0.05, 0.1) == Verdict.INCONCLUSIVE


def test_massive_laplacian_is_fully_elliptic():
    v = full_ellipticity(make_model("laplace", c=1.0).operator())
    assert v.fully_elliptic and v.n0_invertible is None


def test_massless_sign_flip_is_not_fully_elliptic():
    # (x1 d_x1)^2 + d_z^2 + 1 has indicial roots lambda = +-1 on the real line
    g = b_cylinder(4)
    P = BPhiOperator.term(g, (0, 2, 0, 0)) + BPhiOperator.term(g, (0, 0, 0, 2)) + BPhiOperator.identity(g)
    v = full_ellipticity(P)
    assert v.sigma_invertible == Verdict.PASS
    assert v.n1_real_line_invertible == Verdict.FAIL
    assert not v.fully_elliptic


def test_dirac_with_integer_shift_fails_on_real_line():
    v = full_ellipticity(make_model("D", a=0.0).operator())
    assert v.n1_real_line_invertible == Verdict.FAIL
    assert full_ellipticity(make_model("D", a=0.3).operator()).fully_elliptic


def test_corner_dirac_mass():
    assert full_ellipticity(make_model("corner_dirac", m=1.0).operator()).sigma_invertible == Verdict.PASS


def test_real_line_min_singular_oracle():
    # F(lambda) = lambda^2 + 1: s_min on the real line is 1 at lambda = 0
    F = IndicialFamily([np.array([[1.0]]), np.zeros((1, 1)), np.array([[1.0]])])
    assert real_line_min_singular(F)["smin"] == pytest.approx(1.0, abs=1e-12)


def test_indicial_family_shift_and_derivative():
    F = IndicialFamily([np.diag([1.0, 2.0]), np.eye(2), np.diag([0.0, 3.0])])
    mu = 0.4 - 0.3j
    for lam in (0.2, 1 + 1j):
        np.testing.assert_allclose(F.shifted(mu)(lam), F(lam + mu), atol=1e-14)
        h = 1e-6
        np.testing.assert_allclose(F.derivative()(lam), (F(lam + h) - F(lam - h)) / (2 * h), atol=1e-8)


def test_companion_eigenvalues_and_block_sum():
    F = IndicialFamily([np.diag([-1.0, -4.0]), np.zeros((2, 2)), np.eye(2)])
    np.testing.assert_allclose(F.finite_eigenvalues(), np.sort_complex(np.array([-2, -1, 1, 2], complex)), atol=1e-12)
    G = IndicialFamily([np.array([[3.0]]), np.array([[1.0]])])
    H = block_diag_families(F, G)
    assert H.size == 3 and H.degree == 2
    np.testing.assert_allclose(H.finite_eigenvalues(), np.sort_complex(np.array([-3, -2, -1, 1, 2], complex)),
                               atol=1e-12)


def test_singular_leading_coefficient_drops_infinite_roots():
    F = IndicialFamily([np.diag([1.0, 2.0]), np.diag([1.0, 0.0])])
    np.testing.assert_allclose(F.finite_eigenvalues(), [-1.0], atol=1e-12)
    assert F.cauchy_bound() > 1.0


def test_indicial_family_of_shifted_square():
    # (x1 d_x1)^2 - 4 at lambda = 0 gives -4
    g = b_interval()
    P = BPhiOperator.term(g, (0, 2, 0, 0)) - BPhiOperator.identity(g).scale(4.0)
    np.testing.assert_allclose(normal1(P)(0.0), [[-4.0]])


def test_symbol_of_square_sum():
    # (x1 d_x1)^2 + d_z^2 maps to -sigma1^2 - zeta^2
    g = b_cylinder(2)
    P = BPhiOperator.term(g, (0, 2, 0, 0)) + BPhiOperator.term(g, (0, 0, 0, 2))
    xi = np.array([[0, 0.6, 0, 0.8], [0, 2.0, 0, 1.0]])
    np.testing.assert_allclose(principal_symbol(P).evaluate((0, 0.3, 0, 0), xi)[:, 0, 0], [-1.0, -5.0])


def test_derivative_matches_finite_differences(rng):
    F = IndicialFamily([rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) for _ in range(4)])
    Fp = F.derivative()
    h = 1e-5
    for lam in rng.standard_normal(20) + 1j * rng.standard_normal(20):
        fd = (F(lam + h) - F(lam - h)) / (2 * h)
        assert np.max(np.abs(Fp(lam) - fd)) <= 1e-9 * max(1.0, np.max(np.abs(Fp(lam))))

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phiblab.coeffs import MatPoly
from phiblab.errors import DimMismatch, GridTooCoarse
from phiblab.geometry import b_cylinder, b_interval, corner
from phiblab.operators import (
    X0,
    X1,
    XV,
    XW,
    BPhiOperator,
    SampleGrid,
    apply,
    commutator,
    compose_ops,
    conjugate_weight,
    direct_sum,
    fourier_decompose,
)
from phiblab.randomized import random_operator

GEOMS = [b_interval(), b_cylinder(3), corner(2)]


def gen(g, j):
    return BPhiOperator.generator(g, j)


def mult(g, key, c=1.0):
    return BPhiOperator.multiplication(g, MatPoly.monomial(key, c * np.eye(g.matrix_dim), g.matrix_dim))


def test_leibniz_on_x1():
    g = b_cylinder(3)
    lhs = gen(g, X1) @ mult(g, (0, 1, 0, 0))
    rhs = mult(g, (0, 1, 0, 0)) @ gen(g, X1) + mult(g, (0, 1, 0, 0))
    assert lhs.distance(rhs) == 0.0


def test_leibniz_on_fibre_harmonic():
    g = b_cylinder(3)
    lhs = commutator(gen(g, XW), mult(g, (0, 0, 0, 2)))
    assert lhs.distance(mult(g, (0, 0, 0, 2), 2j)) == 0.0


def test_corner_frame_commutators():
    # [x0^2 d_x0, x0 x1 d_x1] = x0 (x0 x1 d_x1), [x0^2 d_x0, x0 d_y] = x0 (x0 d_y)
    g = corner(2)
    c = commutator(gen(g, X0), gen(g, X1))
    assert c.distance(mult(g, (1, 0, 0, 0)) @ gen(g, X1)) == 0.0
    c = commutator(gen(g, X0), gen(g, XV))
    assert c.distance(mult(g, (1, 0, 0, 0)) @ gen(g, XV)) == 0.0


@pytest.mark.parametrize("g", GEOMS, ids=lambda g: g.kind.value)
@given(seed=st.integers(0, 2**32 - 1))
def test_composition_is_associative(g, seed):
    rng = np.random.default_rng(seed)
    P, Q, R = (random_operator(rng, g, order=1, n_terms=2) for _ in range(3))
    assert compose_ops(compose_ops(P, Q), R).distance(compose_ops(P, compose_ops(Q, R))) <= 1e-12 * max(
        1.0, (P @ Q @ R).max_abs())


@pytest.mark.parametrize("g", GEOMS, ids=lambda g: g.kind.value)
@given(seed=st.integers(0, 2**32 - 1))
def test_order_is_subadditive(g, seed):
    rng = np.random.default_rng(seed)
    P, Q = random_operator(rng, g, order=2), random_operator(rng, g, order=1)
    assert (P @ Q).order <= P.order + Q.order


def test_conjugate_weight_on_generator():
    g = b_cylinder(3)
    Pb = conjugate_weight(gen(g, X1), 0.7)
    assert Pb.distance(gen(g, X1) + BPhiOperator.identity(g).scale(0.7)) == 0.0
    g = corner(2)
    Pb = conjugate_weight(gen(g, X1), 0.7)
    assert Pb.distance(gen(g, X1) + mult(g, (1, 0, 0, 0), 0.7)) <= 1e-15


@pytest.mark.parametrize("g", GEOMS, ids=lambda g: g.kind.value)
@given(seed=st.integers(0, 2**32 - 1), b1=st.floats(-2, 2), b2=st.floats(-2, 2))
def test_conjugate_weight_is_a_group_action(g, seed, b1, b2):
    rng = np.random.default_rng(seed)
    P = random_operator(rng, g, order=2)
    lhs = conjugate_weight(conjugate_weight(P, b1), b2)
    rhs = conjugate_weight(P, b1 + b2)
    assert lhs.distance(rhs) <= 1e-12 * max(1.0, rhs.max_abs())


@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(-2, 2))
def test_conjugate_weight_is_multiplicative(seed, beta):
    rng = np.random.default_rng(seed)
    g = b_cylinder(3)
    P, Q = random_operator(rng, g, order=1), random_operator(rng, g, order=1)
    lhs = conjugate_weight(P @ Q, beta)
    rhs = conjugate_weight(P, beta) @ conjugate_weight(Q, beta)
    assert lhs.distance(rhs) <= 1e-12 * max(1.0, rhs.max_abs())


def test_fourier_decompose_of_fibre_derivative():
    fam = fourier_decompose(gen(b_cylinder(2), XW), 2)
    (m, f), = fam.terms.items()
    assert m == (0, 0, 0, 0)
    np.testing.assert_array_equal(np.diag(f.coefficient((0, 0, 0, 0))), 1j * np.arange(-2, 3))


def test_fourier_decompose_shifts_modes():
    fam = fourier_decompose(mult(b_cylinder(2), (0, 0, 0, 1)), 2)
    A = fam.terms[(0, 0, 0, 0)].coefficient((0, 0, 0, 0))
    np.testing.assert_array_equal(A, np.eye(5, k=-1))


def test_direct_sum_is_block_diagonal():
    g = b_cylinder(2)
    S = direct_sum(gen(g, X1), gen(g, XW).scale(2.0))
    assert S.dim == 2
    f = S.coefficient((0, 0, 0, 1)).coefficient((0, 0, 0, 0))
    np.testing.assert_array_equal(f, np.diag([0.0, 2.0]))


def test_apply_matches_exact_derivatives():
    g = b_cylinder(3)
    sg = SampleGrid(20.0, 512, 16)
    t, z = sg.t, sg.z
    bump = np.exp(-((t + 10) / 2) ** 2)
    u = (bump[:, None] * np.cos(z)[None, :])[:, :, None]
    dx1 = (-(t + 10) / 2 * bump)[:, None] * np.cos(z)[None, :]
    assert np.max(np.abs(apply(gen(g, X1), u, sg)[..., 0] - dx1)) < 1e-6
    assert np.max(np.abs(apply(gen(g, XW), u, sg)[..., 0] + bump[:, None] * np.sin(z)[None, :])) < 1e-12


def test_apply_validates_shape_and_grid():
    g = b_cylinder(3)
    with pytest.raises(DimMismatch):
        apply(gen(g, X1), np.zeros((10, 16, 2)), SampleGrid(1.0, 10, 16))
    with pytest.raises(GridTooCoarse):
        apply(gen(g, X1) @ gen(g, X1), np.zeros((6, 16, 1)), SampleGrid(1.0, 6, 16))

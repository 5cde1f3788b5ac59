import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phiblab.catalog import make_model
from phiblab.checks import contour_suite, mellin_bump, mellin_convergence
from phiblab.errors import NearSingularPath, NonInteger, SupportViolation
from phiblab.geometry import GeometryKind
from phiblab.randomized import random_banded_family
from phiblab.spectral import (
    Contour,
    MellinGrid,
    locate_spectrum,
    log_residue,
    mellin_check,
    strip_contour,
    winding_number,
)
from phiblab.symbols import IndicialFamily, block_diag_families, normal1


def poly_family(roots):
    """Scalar family prod (lambda - r)."""
    c = np.poly(np.asarray(roots, complex))[::-1]
    return IndicialFamily([np.array([[x]]) for x in c])


def test_log_residue_counts_polynomial_roots():
    F = poly_family([0.1 - 0.5j, -1 - 0.5j, 2 - 2.5j, 0.3j])
    c = strip_contour(0.0, 1.0, 3.0)
    assert log_residue(F, c).value == 2
    assert winding_number(F, c)[0] == 2
    assert log_residue(F, strip_contour(-1.0, 3.0, 3.0)).value == 4


def test_double_root_counts_twice():
    F = poly_family([0.2 - 0.5j, 0.2 - 0.5j])
    rep = locate_spectrum(F, (0.0, 1.0), re_window=2.0)
    assert rep.total_multiplicity == 2
    (root, m), = rep.roots
    assert m == 2 and abs(root - (0.2 - 0.5j)) < 1e-7


def test_root_on_contour_is_rejected():
    F = poly_family([0.0 - 1.0j])
    with pytest.raises((NearSingularPath, NonInteger)):
        winding_number(F, strip_contour(1.0, 2.0, 2.0))


def test_locate_shifts_edge_off_spectrum():
    F = poly_family([0.0 - 1.0j, 0.5 - 1.5j])
    rep = locate_spectrum(F, (1.0, 2.0), re_window=2.0)
    assert rep.shifted
    assert rep.neg_imag == [(pytest.approx(1.5, abs=1e-7), 1)]


def test_locate_dirac_spectrum():
    F = normal1(make_model("D", a=0.3).operator(), 4)
    rep = locate_spectrum(F, (-1.0, 2.5))
    got = [(round(b, 8), m) for b, m in rep.neg_imag]
    assert got == [(-0.7, 1), (0.3, 1), (1.3, 1), (2.3, 1)]


def test_contour_rejects_unordered_corners():
    with pytest.raises(ValueError):
        Contour(1.0, 0.0, 0.0, 1.0)


def test_contour_split_preserves_area():
    c = Contour(-2.0, 2.0, -1.0, 0.0)
    left, right = c.split(0.25)
    assert left.re_max == right.re_min == -1.0


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1))
def test_log_residue_matches_eigenvalues_and_is_additive(seed):
    rng = np.random.default_rng(seed)
    F, G = random_banded_family(rng, 1, 1, 2), random_banded_family(rng, 1, 1, 1)
    W = 2 * max(F.cauchy_bound(), G.cauchy_bound()) + 1
    ev = np.concatenate([F.finite_eigenvalues(), G.finite_eigenvalues()])
    a, b = -0.5, 0.8
    if np.any(np.abs(-ev.imag - a) < 0.05) or np.any(np.abs(-ev.imag - b) < 0.05):
        return
    c = strip_contour(a, b, W)
    lf, lg = log_residue(F, c).value, log_residue(G, c).value
    nf = int(np.sum((-F.finite_eigenvalues().imag > a) & (-F.finite_eigenvalues().imag < b)))
    assert lf == nf
    assert log_residue(block_diag_families(F, G), c).value == lf + lg


def test_contour_suite_small():
    res = contour_suite(count=5, seed=3)
    assert res.passed, res.to_dict()


def test_mellin_identity_converges():
    res = mellin_convergence(make_model("D", a=0.3).operator())
    assert res["final_deviation"] < 1e-6
    assert res["observed_order"] > 3.5


def test_mellin_on_interval():
    g = MellinGrid(M=512)
    B = make_model("scalar", a=0.5).operator()
    assert mellin_check(B, mellin_bump(g, GeometryKind.B_INTERVAL), g).deviation < 1e-5


def test_mellin_rejects_mass_at_grid_ends():
    g = MellinGrid(M=256)
    u = np.ones((256, 16, 1))
    with pytest.raises(SupportViolation):
        mellin_check(make_model("D").operator(), u, g)


def test_log_residue_of_first_order_family():
    F = IndicialFamily([np.array([[-0.5]]), np.array([[1j]])])
    c = Contour(-1.0, 1.0, -1.0, 0.0)
    lr = log_residue(F, c)
    assert lr.value == 1 and abs(lr.raw - 1) < 1e-9
    F3 = IndicialFamily([-0.5 * np.eye(3), 1j * np.eye(3)])
    assert log_residue(F3, c).value == 3
    assert log_residue(IndicialFamily([np.eye(2)]), c).value == 0


def test_contour_independence():
    F = poly_family([0.3 - 0.4j, -0.2 - 0.6j])
    a = log_residue(F, Contour(-1.0, 1.0, -1.0, 0.0)).value
    b = log_residue(F, Contour(-3.0, 0.7, -0.9, -0.1)).value
    assert a == b == 2


def test_locate_pair_of_imaginary_roots():
    F = IndicialFamily([np.array([[-1.0]]), np.zeros((1, 1)), np.array([[-1.0]])])
    rep = locate_spectrum(F, (-2.0, 2.0), re_window=2.0)
    assert [(round(b, 8), m) for b, m in rep.neg_imag] == [(-1.0, 1), (1.0, 1)]
    assert locate_spectrum(IndicialFamily([np.eye(2)]), (0.0, 1.0), re_window=1.0).roots == []

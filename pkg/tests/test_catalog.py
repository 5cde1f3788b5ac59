import numpy as np
import pytest

from phiblab.catalog import (
    MODELS,
    gamma_matrices,
    index_jump_oracle,
    list_models,
    make_model,
    model_from_dict,
)
from phiblab.errors import ConfigError, UnknownModel, WeightOnSpectrum
from phiblab.index_engine import indicial_family

CASES = [
    ("scalar", {"a": -0.7}),
    ("D", {"a": 0.3}),
    ("laplace", {"c": 1.0}),
    ("sum", {"components": [{"name": "D", "a": 0.3}, {"name": "D", "a": 0.45}]}),
    ("kfold", {"base": {"name": "D", "a": 0.3}, "k": 2, "coupling": 0.25}),
]


@pytest.mark.parametrize("name,params", CASES, ids=[c[0] for c in CASES])
def test_closed_form_roots_match_companion_eigenvalues(name, params):
    model = make_model(name, **params)
    N = 4
    F = indicial_family(model.operator(), N)
    ev = F.finite_eigenvalues()
    lo, hi = -2.5, 2.5
    got = sorted(round(-v.imag, 6) for v in ev if lo < -v.imag < hi)
    want = sorted(round(v, 6) for v, m in model.roots(lo, hi) for _ in range(m))
    assert got == want


def test_laplace_roots_closed_form():
    m = make_model("laplace", c=1.0)
    assert m.roots(0.0, 2.5) == [(1.0, 1), (pytest.approx(np.sqrt(2)), 2), (pytest.approx(np.sqrt(5)), 2)]


def test_oracle_orientation_and_margin():
    m = make_model("D", a=0.3)
    assert index_jump_oracle(m, 0.0, 2.5) == 3
    assert index_jump_oracle(m, 2.5, 0.0) == -3
    with pytest.raises(WeightOnSpectrum):
        index_jump_oracle(m, 0.0, 1.3)
    kf = make_model("kfold", base={"name": "D", "a": 0.3}, k=3)
    assert index_jump_oracle(kf, 0.0, 1.0) == 3


def test_unknown_model_and_bad_params():
    with pytest.raises(UnknownModel):
        make_model("nope")
    with pytest.raises(ConfigError) as e:
        make_model("D", b=1.0)
    assert e.value.details["field"] == "D.b"
    with pytest.raises(ConfigError):
        make_model("kfold", base={"name": "D"}, k=1)
    with pytest.raises(ConfigError):
        model_from_dict({"a": 1.0})
    with pytest.raises(UnknownModel):
        model_from_dict({"name": "D", "base": None} | {"name": "x"})


def test_gamma_matrices_anticommute():
    g = gamma_matrices()
    for i, a in enumerate(g):
        np.testing.assert_allclose(a, a.conj().T)
        for j, b in enumerate(g):
            want = 2 * np.eye(4) if i == j else np.zeros((4, 4))
            np.testing.assert_allclose(a @ b + b @ a, want, atol=1e-15)


def test_listing_is_sorted_and_complete():
    names = [m["name"] for m in list_models()]
    assert names == sorted(MODELS)
    assert {"scalar", "D", "laplace", "sum", "kfold", "corner_dirac"} <= set(names)

import numpy as np
import pytest

from phiblab.catalog import make_model
from phiblab.errors import ConfigError, UnknownModel
from phiblab.scenario import Pipeline, find_line, parse_complex, parse_scenario

BASE = """\
name = "t"
pipeline = "RELINDEX"

[operator]
model = "D"
params = { a = 0.3 }

[weights]
beta1 = 0.0
beta2 = 1.0
"""


def test_parse_minimal():
    sc = parse_scenario(BASE)
    assert sc.pipeline == Pipeline.RELINDEX
    assert sc.get("weights.beta2") == 1.0
    assert sc.model().params["a"] == 0.3
    assert sc.discretization().M == 128
    assert sc.echo()["operator"] == {"model": "D", "params": {"a": 0.3}}


def test_unknown_key_names_field_and_line():
    with pytest.raises(ConfigError) as e:
        parse_scenario(BASE + "gamma = 2.0\n")
    assert e.value.details == {"field": "weights.gamma", "line": 11}


def test_unknown_top_level_block():
    with pytest.raises(ConfigError) as e:
        parse_scenario(BASE + "[extras]\nx = 1\n")
    assert e.value.details["field"] == "extras"


def test_unknown_model_names_field_and_line():
    with pytest.raises(UnknownModel) as e:
        parse_scenario(BASE.replace('"D"', '"Q"'))
    assert e.value.code == "UNKNOWN_MODEL"
    assert e.value.details == {"field": "operator.model", "line": 5}


def test_unknown_model_parameter():
    sc = parse_scenario(BASE.replace("a = 0.3", "b = 0.3"))
    with pytest.raises(ConfigError) as e:
        sc.operator()
    assert e.value.details["field"] == "operator.params.b"
    assert e.value.details["line"] == 6


def test_type_errors():
    with pytest.raises(ConfigError) as e:
        parse_scenario(BASE.replace("beta1 = 0.0", 'beta1 = "zero"'))
    assert e.value.details["field"] == "weights.beta1"
    with pytest.raises(ConfigError):
        parse_scenario(BASE.replace("beta1 = 0.0", "beta1 = true"))


def test_missing_required_field():
    with pytest.raises(ConfigError) as e:
        parse_scenario(BASE.replace("beta2 = 1.0\n", ""))
    assert e.value.details["field"] == "weights.beta2"


def test_malformed_toml_reports_line():
    with pytest.raises(ConfigError) as e:
        parse_scenario(BASE + "[weights\n")
    assert e.value.details["line"] == 11


def test_unknown_pipeline():
    with pytest.raises(ConfigError):
        parse_scenario(BASE.replace("RELINDEX", "NOPE"))


def test_bad_discretization():
    sc = parse_scenario(BASE + "\n[discretization]\nM = 4\n")
    with pytest.raises(ConfigError) as e:
        sc.discretization()
    assert e.value.details["field"] == "discretization"


@pytest.mark.parametrize("v,want", [(1.5, 1.5), ([1, -2], 1 - 2j), ("0.5+2i", 0.5 + 2j), ("3j", 3j)])
def test_parse_complex(v, want):
    assert parse_complex(v, "x", "") == want


def test_parse_complex_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_complex("abc", "x", "")
    with pytest.raises(ConfigError):
        parse_complex(True, "x", "")


def test_find_line():
    assert find_line(BASE, "pipeline") == 2
    assert find_line(BASE, "weights.beta2") == 10
    assert find_line(BASE, "operator") == 4


TERMS = """\
name = "terms"
pipeline = "RELINDEX"

[geometry]
kind = "B_CYLINDER"
fiber_modes = 6

[[operator.terms]]
powers = [0, 1, 0, 0]
coeff = { matrix = [[1]] }

[[operator.terms]]
powers = [0, 0, 0, 1]
coeff = { matrix = [["1i"]] }

[[operator.terms]]
powers = [0, 0, 0, 0]
coeff = { matrix = [[-0.3]] }

[weights]
beta1 = 0.0
beta2 = 1.0
"""


def test_terms_operator_equals_catalog_dirac():
    P = parse_scenario(TERMS).operator()
    assert P.distance(make_model("D", a=0.3).operator()) == 0.0


def test_terms_with_harmonics():
    text = TERMS.replace('coeff = { matrix = [[-0.3]] }',
                         'coeff = { monomials = [[0, 0, 0], [0, 1, 0]], harmonics = [0, 2], '
                         'matrices = [[[-0.3]], [[0.5]]] }')
    P = parse_scenario(text).operator()
    f = P.coefficient((0, 0, 0, 0))
    assert np.isclose(f(0.0, 0.2, 0.0, 0.4)[0, 0], -0.3 + 0.5 * 0.2 * np.exp(2j * 0.4))


def test_terms_errors_name_the_term():
    with pytest.raises(ConfigError) as e:
        parse_scenario(TERMS.replace("powers = [0, 1, 0, 0]", "powers = [0, 1, 0]")).operator()
    assert e.value.details["field"] == "operator.terms[0].powers"
    with pytest.raises(ConfigError) as e:
        parse_scenario(TERMS.replace("[[-0.3]]", "[[-0.3, 1]]")).operator()
    assert e.value.details["field"] == "operator.terms[2].coeff.matrix"


def test_model_and_terms_are_exclusive():
    text = TERMS.replace("[[operator.terms]]\npowers = [0, 1, 0, 0]",
                         '[operator]\nmodel = "D"\n\n[[operator.terms]]\npowers = [0, 1, 0, 0]', 1)
    with pytest.raises(ConfigError):
        parse_scenario(text).operator()

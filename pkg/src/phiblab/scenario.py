"""Scenario files: TOML with a fixed schema, validated strictly.

Unknown keys, missing blocks and ill-typed values raise :class:`ConfigError`
naming the dotted field and, when it can be found, the source line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .catalog import MODELS, CatalogModel, model_from_dict
from .coeffs import MatPoly
from .errors import ConfigError, LabError, UnknownModel
from .geometry import GeometryKind, GeometrySignature
from .index_engine import Discretization
from .operators import BPhiOperator


class Pipeline(str, Enum):
    GROUPOID_CHECK = "GROUPOID_CHECK"
    SYMBOL_CHECK = "SYMBOL_CHECK"
    SPECTRUM = "SPECTRUM"
    RELINDEX = "RELINDEX"
    STAIRCASE = "STAIRCASE"
    ZK = "ZK"
    HOMOTOPY = "HOMOTOPY"


# key -> expected type tag; nested dicts are sub-blocks
SCHEMA: dict[str, Any] = {
    "name": "str",
    "pipeline": "str",
    "seed": "int",
    "geometry": {"kind": "str", "fiber_modes": "int", "matrix_dim": "int"},
    "operator": {"model": "str", "params": "table", "terms": "terms"},
    "weights": {"beta1": "real", "beta2": "real", "strip": "pair", "range": "pair", "steps": "int",
                "beta": "real", "sweep": "reals", "window": "pair", "pad": "real"},
    "contour": {"half_width": "real", "nodes_per_edge": "int"},
    "discretization": {"T": "real", "M": "int", "N": "int", "svd_threshold": "real"},
    "sampling": {"count": "int", "order": "int"},
    "zk": {"k": "int", "coupling": "real", "base": "table"},
    "path": {"parameter": "str", "start": "real", "end": "real", "steps": "int"},
}

TERM_KEYS = {"powers", "coeff"}
COEFF_KEYS = {"monomials", "harmonics", "matrix", "matrices"}

REQUIRED: dict[Pipeline, list[str]] = {
    Pipeline.GROUPOID_CHECK: ["geometry.kind"],
    Pipeline.SYMBOL_CHECK: ["geometry.kind"],
    Pipeline.SPECTRUM: ["operator", "weights.strip"],
    Pipeline.RELINDEX: ["operator", "weights.beta1", "weights.beta2"],
    Pipeline.STAIRCASE: ["operator", "weights.range", "weights.steps"],
    Pipeline.ZK: ["operator", "zk.k", "weights.beta"],
    Pipeline.HOMOTOPY: ["operator.model", "zk.k", "path.parameter", "path.start", "path.end"],
}


def find_line(text: str, dotted: str) -> int | None:
    """Best-effort 1-based source line of a dotted field."""
    parts = dotted.split(".")
    lines = text.splitlines()
    section = None
    header = None
    top = parts[0]
    rest = [re.sub(r"\[\d+\]$", "", p) for p in parts[1:]]
    for i, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        m = re.match(r"^\[\[?\s*([A-Za-z0-9_.\"-]+)\s*\]\]?$", line)
        if m:
            section = m.group(1).strip('"')
            if section == top or section.startswith(top + "."):
                header = header or i
            continue
        if section is None and not rest and re.match(rf"^\"?{re.escape(top)}\"?\s*=", line):
            return i
        if section is not None and (section == top or section.startswith(top + ".")) and rest:
            if re.search(rf"(^|[{{,\s])\"?{re.escape(rest[-1])}\"?\s*=", line):
                return i
    return header


def _err(msg: str, dotted: str, text: str) -> ConfigError:
    return ConfigError(msg, field=dotted, line=find_line(text, dotted))


def parse_complex(v, where: str, text: str) -> complex:
    if isinstance(v, bool):
        raise _err("expected a number", where, text)
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                   for x in v):
        return complex(v[0], v[1])
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", "").replace("i", "j"))
        except ValueError:
            pass
    raise _err("expected a number, an [re, im] pair or a complex string", where, text)


def _check_type(tag: str, v, where: str, text: str):
    if tag == "str":
        if not isinstance(v, str):
            raise _err("expected a string", where, text)
    elif tag == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise _err("expected an integer", where, text)
    elif tag == "real":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise _err("expected a real number", where, text)
        v = float(v)
    elif tag == "pair":
        if (not isinstance(v, list) or len(v) != 2
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v)):
            raise _err("expected a pair of real numbers", where, text)
        v = (float(v[0]), float(v[1]))
    elif tag == "reals":
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            raise _err("expected a list of real numbers", where, text)
        v = [float(x) for x in v]
    elif tag == "table":
        if not isinstance(v, dict):
            raise _err("expected a table", where, text)
    elif tag == "terms":
        if not isinstance(v, list) or not all(isinstance(x, dict) for x in v):
            raise _err("expected a list of term tables", where, text)
    return v


@dataclass
class Scenario:
    name: str
    pipeline: Pipeline
    seed: int
    blocks: dict[str, dict]
    source: str = field(default="", repr=False)
    path: str | None = None

    def get(self, dotted: str, default=None):
        block, key = dotted.split(".", 1)
        return self.blocks.get(block, {}).get(key, default)

    def has(self, dotted: str) -> bool:
        if "." not in dotted:
            return dotted in self.blocks
        block, key = dotted.split(".", 1)
        return key in self.blocks.get(block, {})

    def error(self, msg: str, dotted: str) -> ConfigError:
        return _err(msg, dotted, self.source)

    def echo(self) -> dict:
        return {"name": self.name, "pipeline": self.pipeline.value, "seed": self.seed,
                **{k: _echo(v) for k, v in sorted(self.blocks.items())}}

    # builders ---------------------------------------------------------------
    def discretization(self) -> Discretization:
        kw = {k: self.get(f"discretization.{k}") for k in ("T", "M", "N", "svd_threshold")
              if self.has(f"discretization.{k}")}
        try:
            return Discretization(**kw)
        except ValueError as exc:
            raise self.error(str(exc), "discretization") from None

    def model(self) -> CatalogModel | None:
        if not self.has("operator.model"):
            return None
        spec = {"name": self.get("operator.model"), **self.get("operator.params", {})}
        try:
            return model_from_dict(spec, "operator.params")
        except ConfigError as exc:
            raise self.error(exc.message, exc.field or "operator.params") from None
        except UnknownModel as exc:
            raise UnknownModel(exc.message, field="operator.params",
                               line=find_line(self.source, "operator.params")) from None

    def geometry(self) -> GeometrySignature:
        g = self.blocks.get("geometry", {})
        try:
            kind = GeometryKind(g.get("kind"))
        except ValueError:
            raise self.error(f"unknown geometry kind {g.get('kind')!r}", "geometry.kind") from None
        default_modes = {GeometryKind.B_INTERVAL: 0, GeometryKind.B_CYLINDER: 6, GeometryKind.CORNER: 4}[kind]
        try:
            return GeometrySignature(kind, g.get("fiber_modes", default_modes), g.get("matrix_dim", 1))
        except ValueError as exc:
            raise self.error(str(exc), "geometry") from None

    def operator(self) -> BPhiOperator:
        if not self.has("operator"):
            raise self.error("pipeline needs an [operator] block", "operator")
        op_block = self.blocks["operator"]
        has_model = "model" in op_block
        has_terms = "terms" in op_block
        if has_model == has_terms:
            raise self.error("operator needs exactly one of 'model' or 'terms'", "operator")
        if has_model:
            if "params" in op_block and not isinstance(op_block["params"], dict):
                raise self.error("expected a table", "operator.params")
            P = self.model().operator()
            if self.has("geometry.kind") and self.get("geometry.kind") != P.kind.value:
                raise self.error("geometry kind disagrees with the model", "geometry.kind")
            return P
        if "params" in op_block:
            raise self.error("'params' needs 'model'", "operator.params")
        return self._terms_operator(op_block["terms"])

    def _terms_operator(self, terms: list) -> BPhiOperator:
        geom = self.geometry()
        d = geom.matrix_dim
        out: dict = {}
        for i, term in enumerate(terms):
            where = f"operator.terms[{i}]"
            for key in term:
                if key not in TERM_KEYS:
                    raise self.error(f"unknown key '{key}'", f"{where}.{key}")
            powers = term.get("powers")
            if (not isinstance(powers, list) or len(powers) != 4
                    or any(isinstance(p, bool) or not isinstance(p, int) or p < 0 for p in powers)):
                raise self.error("powers must be four nonnegative integers", f"{where}.powers")
            coeff = term.get("coeff")
            if not isinstance(coeff, dict):
                raise self.error("coeff must be a table", f"{where}.coeff")
            f = self._coefficient(coeff, d, f"{where}.coeff")
            m = tuple(powers)
            out[m] = out[m] + f if m in out else f
        try:
            return BPhiOperator(geom, out)
        except (LabError, ValueError) as exc:
            raise self.error(getattr(exc, "message", str(exc)), "operator.terms") from None

    def _coefficient(self, coeff: dict, d: int, where: str) -> MatPoly:
        for key in coeff:
            if key not in COEFF_KEYS:
                raise self.error(f"unknown key '{key}'", f"{where}.{key}")
        monos = coeff.get("monomials", [[0, 0, 0]])
        if (not isinstance(monos, list) or not monos or any(
                not isinstance(m, list) or len(m) != 3
                or any(isinstance(p, bool) or not isinstance(p, int) or p < 0 for p in m) for m in monos)):
            raise self.error("monomials must be a list of [p0, p1, py] exponent triples", f"{where}.monomials")
        harms = coeff.get("harmonics", [0] * len(monos))
        if (not isinstance(harms, list) or len(harms) != len(monos)
                or any(isinstance(h, bool) or not isinstance(h, int) for h in harms)):
            raise self.error("harmonics must list one integer per monomial", f"{where}.harmonics")
        if ("matrix" in coeff) == ("matrices" in coeff):
            raise self.error("coeff needs exactly one of 'matrix' or 'matrices'", where)
        mats = [coeff["matrix"]] * len(monos) if "matrix" in coeff else coeff["matrices"]
        if not isinstance(mats, list) or len(mats) != len(monos):
            raise self.error("matrices must list one matrix per monomial", f"{where}.matrices")
        table: dict = {}
        for j, (mono, h, mat) in enumerate(zip(monos, harms, mats)):
            key = "matrix" if "matrix" in coeff else f"matrices[{j}]"
            arr = self._matrix(mat, d, f"{where}.{key}")
            k = (mono[0], mono[1], mono[2], h)
            table[k] = table[k] + arr if k in table else arr
        return MatPoly(d, table)

    def _matrix(self, mat, d: int, where: str) -> np.ndarray:
        if not isinstance(mat, list) or len(mat) != d or any(not isinstance(r, list) or len(r) != d for r in mat):
            raise self.error(f"expected a {d}x{d} matrix", where)
        return np.array([[parse_complex(x, where, self.source) for x in r] for r in mat], dtype=complex)


def _echo(v):
    if isinstance(v, dict):
        return {k: _echo(x) for k, x in sorted(v.items())}
    if isinstance(v, (list, tuple)):
        return [_echo(x) for x in v]
    return v


def parse_scenario(text: str, path: str | None = None) -> Scenario:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed scenario: {exc}", field=None,
                          line=int(m.group(1)) if m else None) from None
    for key in raw:
        if key not in SCHEMA:
            raise _err(f"unknown key '{key}'", key, text)
    blocks: dict[str, dict] = {}
    for key, spec in SCHEMA.items():
        if key not in raw:
            continue
        v = raw[key]
        if isinstance(spec, dict):
            if not isinstance(v, dict):
                raise _err("expected a block", key, text)
            out = {}
            for sub, val in v.items():
                if sub not in spec:
                    raise _err(f"unknown key '{sub}' in [{key}]", f"{key}.{sub}", text)
                out[sub] = _check_type(spec[sub], val, f"{key}.{sub}", text)
            blocks[key] = out
        else:
            raw[key] = _check_type(spec, v, key, text)
    for key in ("name", "pipeline"):
        if key not in raw:
            raise ConfigError(f"missing top-level '{key}'", field=key, line=None)
    try:
        pipeline = Pipeline(raw["pipeline"])
    except ValueError:
        raise _err(f"unknown pipeline {raw['pipeline']!r}", "pipeline", text) from None
    seed = raw.get("seed", 0)
    sc = Scenario(raw["name"], pipeline, seed, blocks, text, path)
    for need in REQUIRED[pipeline]:
        if not sc.has(need):
            raise ConfigError(f"pipeline {pipeline.value} needs '{need}'", field=need,
                              line=find_line(text, need.split(".")[0]))
    if sc.has("operator.model") and sc.get("operator.model") not in MODELS:
        raise UnknownModel(f"unknown model {sc.get('operator.model')!r}", field="operator.model",
                           line=find_line(text, "operator.model"))
    return sc


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", field=None, line=None) from None
    return parse_scenario(text, str(p))

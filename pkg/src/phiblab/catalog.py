"""Model operators with closed-form indicial roots.

Every catalog entry builds a :class:`BPhiOperator` and lists the roots of
its indicial family as values of ``-Im lambda`` with multiplicities, so the
index jump across a weight interval can be counted without numerics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .coeffs import MatPoly
from .errors import ConfigError, UnknownModel, WeightOnSpectrum
from .geometry import b_cylinder, b_interval, corner
from .operators import X0, X1, XV, XW, BPhiOperator, direct_sum

ROOT_MERGE_TOL = 1e-12
DEFAULT_MODES = 6


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "real", "int", "model", "models"
    default: Any = None
    doc: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "type": self.kind, "default": self.default, "doc": self.doc}


@dataclass(frozen=True)
class ModelEntry:
    name: str
    geometry: str
    params: tuple[Param, ...]
    formula: str
    spectrum: str
    build: Callable = field(repr=False, compare=False)
    roots: Callable | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"name": self.name, "geometry": self.geometry, "formula": self.formula,
                "spectrum": self.spectrum, "params": [p.to_dict() for p in self.params]}


@dataclass(frozen=True, eq=False)
class CatalogModel:
    """A catalog entry with bound parameters."""

    name: str
    params: dict

    @property
    def entry(self) -> ModelEntry:
        return MODELS[self.name]

    def operator(self) -> BPhiOperator:
        return self.entry.build(self.params)

    def has_closed_form(self) -> bool:
        return self.entry.roots is not None

    def roots(self, lo: float, hi: float) -> list[tuple[float, int]]:
        """Values ``-Im lambda`` in ``(lo, hi)`` with multiplicities, ascending."""
        if self.entry.roots is None:
            raise UnknownModel(f"model '{self.name}' has no closed-form spectrum")
        return _merge(self.entry.roots(self.params, lo, hi))

    def oracle(self, beta1: float, beta2: float, margin: float = 1e-3) -> int:
        return index_jump_oracle(self, beta1, beta2, margin)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": _plain(self.params)}


def _plain(v):
    if isinstance(v, CatalogModel):
        return v.to_dict()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in sorted(v.items())}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _merge(vals: list[tuple[float, int]]) -> list[tuple[float, int]]:
    out: list[list] = []
    for v, m in sorted(vals):
        if out and abs(out[-1][0] - v) <= ROOT_MERGE_TOL:
            out[-1][1] += m
        else:
            out.append([v, m])
    return [(float(v), int(m)) for v, m in out]


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _scalar_op(p: dict) -> BPhiOperator:
    g = b_interval()
    return BPhiOperator.generator(g, X1) - BPhiOperator.identity(g).scale(p["a"])


def _scalar_roots(p: dict, lo: float, hi: float):
    a = p["a"]
    return [(a, 1)] if lo < a < hi else []


def _dirac_op(p: dict) -> BPhiOperator:
    g = b_cylinder(DEFAULT_MODES)
    return (BPhiOperator.generator(g, X1) + BPhiOperator.generator(g, XW).scale(1j)
            - BPhiOperator.identity(g).scale(p["a"]))


def _dirac_roots(p: dict, lo: float, hi: float):
    a = p["a"]
    n_lo = math.floor(lo - a) - 1
    n_hi = math.ceil(hi - a) + 1
    return [(n + a, 1) for n in range(n_lo, n_hi + 1) if lo < n + a < hi]


def _laplace_op(p: dict) -> BPhiOperator:
    g = b_cylinder(DEFAULT_MODES)
    c = p["c"]
    return (BPhiOperator.term(g, (0, 2, 0, 0)).scale(-1) - BPhiOperator.term(g, (0, 0, 0, 2))
            + BPhiOperator.identity(g).scale(c * c))


def _laplace_roots(p: dict, lo: float, hi: float):
    c = p["c"]
    bound = max(abs(lo), abs(hi))
    out = []
    n = 0
    while n * n + c * c <= bound * bound + 1:
        r = math.sqrt(n * n + c * c)
        mult = 1 if n == 0 else 2
        for v in (r, -r):
            if lo < v < hi:
                out.append((v, mult))
        n += 1
    return out


def _sum_op(p: dict) -> BPhiOperator:
    return direct_sum(*(m.operator() for m in p["components"]))


def _sum_roots(p: dict, lo: float, hi: float):
    out = []
    for m in p["components"]:
        out.extend(m.roots(lo, hi))
    return out


def _kfold_op(p: dict) -> BPhiOperator:
    base = p["base"].operator()
    k = p["k"]
    P = direct_sum(*([base] * k))
    r = p["coupling"]
    if r:
        d = base.dim
        shift = np.roll(np.eye(k), 1, axis=0)
        R = np.kron(shift, np.eye(d)) * r
        P = P + BPhiOperator.multiplication(P.geometry, MatPoly.monomial((0, 1, 0, 0), R))
    return P


def _kfold_roots(p: dict, lo: float, hi: float):
    return [(v, m * p["k"]) for v, m in p["base"].roots(lo, hi)]


def gamma_matrices() -> tuple[np.ndarray, ...]:
    """Five mutually anticommuting Hermitian 4x4 matrices squaring to the identity."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    i2 = np.eye(2)
    return (np.kron(sx, i2), np.kron(sy, i2), np.kron(sz, sx), np.kron(sz, sy), np.kron(sz, sz))


def _corner_op(p: dict) -> BPhiOperator:
    g = corner(4, 4)
    gam = gamma_matrices()
    P = BPhiOperator(g)
    for j, gj in zip((X0, X1, XV, XW), gam[:4]):
        unit = [0, 0, 0, 0]
        unit[j] = 1
        P = P + BPhiOperator.term(g, tuple(unit), gj)
    return P + BPhiOperator.multiplication(g, MatPoly.const(1j * p["m"] * gam[4]))


MODELS: dict[str, ModelEntry] = {
    "scalar": ModelEntry(
        "scalar", "B_INTERVAL", (Param("a", "real", 0.5, "indicial root location"),),
        "x1 d_x1 - a", "-Im lambda = a (multiplicity 1)", _scalar_op, _scalar_roots),
    "D": ModelEntry(
        "D", "B_CYLINDER", (Param("a", "real", 0.3, "mode shift"),),
        "x1 d_x1 + i d_z - a", "-Im lambda = n + a for every mode n (multiplicity 1)",
        _dirac_op, _dirac_roots),
    "laplace": ModelEntry(
        "laplace", "B_CYLINDER", (Param("c", "real", 1.0, "mass, nonzero for full ellipticity"),),
        "-(x1 d_x1)^2 - d_z^2 + c^2",
        "-Im lambda = +-sqrt(n^2 + c^2) (multiplicity 1 for n = 0, 2 for the pair +-n)",
        _laplace_op, _laplace_roots),
    "sum": ModelEntry(
        "sum", "inherited", (Param("components", "models", None, "summands on one geometry"),),
        "P_1 (+) ... (+) P_r", "union of the summands' roots, multiplicities added",
        _sum_op, _sum_roots),
    "kfold": ModelEntry(
        "kfold", "inherited",
        (Param("base", "model", None, "base model Q"), Param("k", "int", 2, "number of copies"),
         Param("coupling", "real", 0.0, "strength r of the x1-vanishing cyclic coupling")),
        "Q (+) ... (+) Q + r x1 S (S cyclic shift of the copies)",
        "roots of Q with multiplicities times k", _kfold_op, _kfold_roots),
    "corner_dirac": ModelEntry(
        "corner_dirac", "CORNER", (Param("m", "real", 1.0, "mass; m = 0 makes the face family singular"),),
        "g0 X0 + g1 X1 + g2 Xv + g3 Xw + i m g5 (4x4, anticommuting Hermitian g)",
        "no closed form; full-ellipticity exercises only", _corner_op, None),
}


def _coerce(entry: ModelEntry, raw: dict, where: str) -> dict:
    out = {}
    known = {p.name for p in entry.params}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown parameter '{key}' for model '{entry.name}'", field=f"{where}.{key}")
    for p in entry.params:
        v = raw.get(p.name, p.default)
        if v is None:
            raise ConfigError(f"model '{entry.name}' needs parameter '{p.name}'", field=f"{where}.{p.name}")
        if p.kind == "real":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"parameter '{p.name}' must be a real number", field=f"{where}.{p.name}")
            v = float(v)
        elif p.kind == "int":
            if isinstance(v, bool) or not isinstance(v, int) or v < 2:
                raise ConfigError(f"parameter '{p.name}' must be an integer >= 2", field=f"{where}.{p.name}")
        elif p.kind == "model":
            v = v if isinstance(v, CatalogModel) else model_from_dict(v, f"{where}.{p.name}")
        elif p.kind == "models":
            if not isinstance(v, (list, tuple)) or not v:
                raise ConfigError(f"parameter '{p.name}' must be a nonempty list", field=f"{where}.{p.name}")
            v = tuple(x if isinstance(x, CatalogModel) else model_from_dict(x, f"{where}.{p.name}[{i}]")
                      for i, x in enumerate(v))
        out[p.name] = v
    return out


def make_model(name: str, **params) -> CatalogModel:
    """Bind parameters to a catalog entry; raises UNKNOWN_MODEL for unknown names."""
    if name not in MODELS:
        raise UnknownModel(f"no catalog model named '{name}'", model=name)
    return CatalogModel(name, _coerce(MODELS[name], params, name))


def model_from_dict(spec: dict, where: str = "model") -> CatalogModel:
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError("model needs a 'name'", field=where)
    params = {k: v for k, v in spec.items() if k != "name"}
    name = spec["name"]
    if name not in MODELS:
        raise UnknownModel(f"no catalog model named '{name}'", model=name)
    return CatalogModel(name, _coerce(MODELS[name], params, where))


def index_jump_oracle(model: CatalogModel, beta1: float, beta2: float, margin: float = 1e-3) -> int:
    """Indicial roots with ``beta1 < -Im lambda < beta2``, counted with multiplicity."""
    if not isinstance(model, CatalogModel) or model.name not in MODELS:
        raise UnknownModel("oracle needs a catalog model")
    lo, hi = sorted((beta1, beta2))
    near = model.roots(lo - margin, hi + margin)
    for v, _ in near:
        if abs(v - beta1) <= margin or abs(v - beta2) <= margin:
            raise WeightOnSpectrum("weight on the indicial spectrum", beta=v)
    count = sum(m for v, m in near if lo < v < hi)
    return count if beta1 <= beta2 else -count


def list_models() -> list[dict]:
    return [MODELS[k].to_dict() for k in sorted(MODELS)]


def format_models() -> str:
    lines = []
    for e in (MODELS[k] for k in sorted(MODELS)):
        params = ", ".join(f"{p.name}: {p.kind}" + (f" = {p.default}" if p.default is not None else "")
                           for p in e.params)
        lines.append(f"{e.name}  [{e.geometry}]  ({params})")
        lines.append(f"    operator: {e.formula}")
        lines.append(f"    spectrum: {e.spectrum}")
    return "\n".join(lines)

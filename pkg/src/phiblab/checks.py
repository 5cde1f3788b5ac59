"""Randomized law suites shared by the scenario runner, scripts and tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .coeffs import MatPoly
from .errors import PatchExit
from .geometry import (
    GeometryKind,
    GeometrySignature,
    GroupoidElement,
    algebroid_frame_check,
    arrow_distance,
    compose,
    inverse,
    target,
    unit,
)
from .operators import BPhiOperator, commutator, compose_ops, multiply_left
from .randomized import random_banded_family, random_operator
from .spectral import MellinGrid, locate_spectrum, log_residue, mellin_check, strip_contour
from .symbols import (
    _normal1_corner,
    _normal1_fiber,
    block_diag_families,
    check_compat,
    joint_symbol,
    normal0,
    principal_symbol,
    weight_shift_check,
)

GROUPOID_TOL = 1e-12
ALGEBROID_TOL = 1e-8
SYMBOL_TOL = 1e-13
SNAP_TOL = 1e-6
CONTOUR_CLEARANCE = 0.05
MELLIN_TOL = 1e-6
MELLIN_ORDER = 3.0


@dataclass
class SuiteResult:
    name: str
    count: int
    worst: dict[str, float]
    tolerances: dict[str, float]
    seconds: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.worst[k] <= self.tolerances[k] for k in self.worst)

    def to_dict(self) -> dict:
        return {"name": self.name, "count": self.count, "worst": dict(sorted(self.worst.items())),
                "tolerances": dict(sorted(self.tolerances.items())), "passed": self.passed,
                "notes": self.notes}


# ---------------------------------------------------------------------------
# groupoid
# ---------------------------------------------------------------------------

def _random_arrow(rng: np.random.Generator, kind: GeometryKind) -> tuple[float, float, float, float]:
    if kind == GeometryKind.CORNER:
        u0, u1, v = rng.uniform(-1.0, 1.0, 3)
        return (float(u0), float(u1), float(v), float(rng.uniform(-np.pi, np.pi)))
    u1 = float(rng.uniform(-1.0, 0.6))
    w = float(rng.uniform(-np.pi, np.pi)) if kind == GeometryKind.B_CYLINDER else 0.0
    return (0.0, u1, 0.0, w)


def _random_base(rng: np.random.Generator, kind: GeometryKind, boundary: bool):
    x1 = float(rng.uniform(0.05, 1.0))
    z = float(rng.uniform(0, 2 * np.pi)) if kind != GeometryKind.B_INTERVAL else 0.0
    if kind == GeometryKind.CORNER:
        x0 = 0.0 if boundary else float(rng.uniform(0.0, 0.45))
        return (x0, x1, float(rng.uniform(-1, 1)), z)
    return (0.0, x1, 0.0, z)


def random_triple(rng: np.random.Generator, kind: GeometryKind, boundary: bool = False):
    """Composable ``(g, h, k)`` with every partial product inside the patch."""
    while True:
        try:
            g = GroupoidElement(_random_base(rng, kind, boundary), _random_arrow(rng, kind), kind)
            h = GroupoidElement(target(g), _random_arrow(rng, kind), kind)
            k = GroupoidElement(target(h), _random_arrow(rng, kind), kind)
            compose(compose(g, h), k)
            compose(g, compose(h, k))
            return g, h, k
        except PatchExit:
            continue


def groupoid_suite(kind: GeometryKind, count: int = 1000, seed: int = 0,
                   boundary_fraction: float = 0.2) -> SuiteResult:
    """Associativity, unit and inverse laws on random triples plus the algebroid residual."""
    kind = GeometryKind(kind)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = dict.fromkeys(("associativity", "unit", "inverse", "target", "algebroid"), 0.0)
    n_boundary = 0
    for i in range(count):
        boundary = kind == GeometryKind.CORNER and i < int(boundary_fraction * count)
        n_boundary += boundary
        g, h, k = random_triple(rng, kind, boundary)
        worst["associativity"] = max(worst["associativity"],
                                     arrow_distance(compose(compose(g, h), k), compose(g, compose(h, k))))
        e_src, e_tgt = unit(g.base, kind), unit(target(g), kind)
        worst["unit"] = max(worst["unit"], arrow_distance(compose(e_src, g), g),
                            arrow_distance(compose(g, e_tgt), g))
        gi = inverse(g)
        worst["inverse"] = max(worst["inverse"], arrow_distance(compose(g, gi), e_src),
                               arrow_distance(compose(gi, g), e_tgt), arrow_distance(inverse(gi), g))
        tg = np.array(target(compose(g, h))) - np.array(target(h))
        tg[3] = (tg[3] + np.pi) % (2 * np.pi) - np.pi
        worst["target"] = max(worst["target"], float(np.max(np.abs(tg))))
    # 10 x 10 x 10 interior grid in (x0, x1, y)
    for x0 in np.linspace(0.02, 0.45, 10):
        for x1 in np.linspace(0.05, 1.0, 10):
            for y in np.linspace(-0.9, 0.9, 10):
                worst["algebroid"] = max(worst["algebroid"], algebroid_frame_check((x0, x1, y, 0.7), kind))
    tol = {k: GROUPOID_TOL for k in worst}
    tol["algebroid"] = ALGEBROID_TOL
    return SuiteResult(f"groupoid/{kind.value}", count, worst, tol, time.perf_counter() - t0,
                       {"boundary_triples": n_boundary})


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

def _n1_distance(PQ: BPhiOperator, P: BPhiOperator, Q: BPhiOperator) -> float:
    if P.kind == GeometryKind.CORNER:
        return _normal1_corner(PQ).distance(_normal1_corner(P).compose(_normal1_corner(Q)))
    return _normal1_fiber(PQ).distance(_normal1_fiber(P).compose(_normal1_fiber(Q)))


def _n1_is_zero(P: BPhiOperator) -> bool:
    if P.kind == GeometryKind.CORNER:
        return all(B.is_zero() for B in _normal1_corner(P).coeffs)
    return _normal1_fiber(P).is_zero()


def _rel(dev: float, *ops: BPhiOperator) -> float:
    return dev / max([1.0] + [op.max_abs() for op in ops])


def symbol_suite(geometry: GeometrySignature, count: int = 200, seed: int = 0, order: int = 2) -> SuiteResult:
    """Homomorphism, compatibility, exactness-surrogate and weight-shift checks on random operators."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    kind = geometry.kind
    worst = dict.fromkeys(("sigma_hom", "n0_hom", "n1_hom", "compat", "weight_shift",
                           "n1_exactness", "sigma_exactness"), 0.0)
    x1 = MatPoly.monomial((0, 1, 0, 0), np.eye(geometry.matrix_dim))
    scalar = geometry.with_dim(1)
    premise = 0
    for _ in range(count):
        P = random_operator(rng, geometry, order)
        Q = random_operator(rng, geometry, order)
        PQ = compose_ops(P, Q)
        sp, sq = principal_symbol(P), principal_symbol(Q)
        worst["sigma_hom"] = max(worst["sigma_hom"], _rel(principal_symbol(PQ).distance(sp * sq), PQ))
        if kind == GeometryKind.CORNER:
            d0 = normal0(PQ).distance(normal0(P).compose(normal0(Q)))
            worst["n0_hom"] = max(worst["n0_hom"], _rel(d0, PQ))
        worst["n1_hom"] = max(worst["n1_hom"], _rel(_n1_distance(PQ, P, Q), PQ))
        rep = check_compat(joint_symbol(P))
        worst["compat"] = max([worst["compat"]] + [_rel(c["max_deviation"], P) for c in rep.checks.values()])
        beta = float(rng.uniform(-2, 2))
        lams = rng.uniform(-2, 2, 6) + 1j * rng.uniform(-1, 1, 6)
        worst["weight_shift"] = max(worst["weight_shift"], weight_shift_check(P, beta, lams))
        # x1 Q has vanishing indicial family, and must then be x1-divisible
        R = multiply_left(x1, Q)
        if _n1_is_zero(R):
            ok = all(f.divisible_by(1) for f in R.terms.values())
        else:
            ok = False
        worst["n1_exactness"] = max(worst["n1_exactness"], 0.0 if ok else 1.0)
        # scalar first-order commutators have vanishing second-order symbol
        A = random_operator(rng, scalar, 1)
        B = random_operator(rng, scalar, 1)
        C = commutator(A, B)
        top = principal_symbol(C, order=2)
        premise += top.is_zero()
        ok = (not top.is_zero()) or C.order < 2
        worst["sigma_exactness"] = max(worst["sigma_exactness"], 0.0 if ok else 1.0)
    tol = {k: SYMBOL_TOL for k in worst}
    for k in ("n1_exactness", "sigma_exactness"):
        tol[k] = 0.0
    return SuiteResult(f"symbols/{kind.value}", count, worst, tol, time.perf_counter() - t0,
                       {"sigma_zero_cases": int(premise)})


# ---------------------------------------------------------------------------
# contour integers
# ---------------------------------------------------------------------------

def _inside(ev: np.ndarray, W: float, beta1: float, beta2: float) -> int:
    return int(np.sum((np.abs(ev.real) < W) & (-ev.imag > beta1) & (-ev.imag < beta2)))


def _clear(ev: np.ndarray, W: float, beta1: float, beta2: float, pad: float) -> bool:
    near_h = (np.abs(ev.real) < W + pad) & ((np.abs(-ev.imag - beta1) < pad) | (np.abs(-ev.imag - beta2) < pad))
    near_v = ((np.abs(np.abs(ev.real) - W) < pad) & (-ev.imag > beta1 - pad) & (-ev.imag < beta2 + pad))
    return not np.any(near_h | near_v)


def _random_strip(rng: np.random.Generator, ev: np.ndarray, W: float):
    while True:
        a, b = np.sort(rng.uniform(-3.0, 3.0, 2))
        if b - a > 0.5 and _clear(ev, W, a, b, CONTOUR_CLEARANCE):
            return float(a), float(b)


def contour_suite(count: int = 100, seed: int = 0) -> SuiteResult:
    """Log residues of random mode-banded families against eigenvalue counts.

    Each family gets a random strip whose boundary stays ``CONTOUR_CLEARANCE``
    away from every root. The log residue must snap to an integer, equal the
    companion-eigenvalue count, equal the :func:`locate_spectrum` total and
    add over a block-diagonal sum with a second random family.
    """
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = {"snap": 0.0, "oracle_mismatch": 0.0, "locate_mismatch": 0.0, "additivity_mismatch": 0.0}
    totals = []
    for _ in range(count):
        F = random_banded_family(rng, int(rng.integers(1, 3)), 1, int(rng.integers(1, 3)))
        G = random_banded_family(rng, 1, 1, 1)
        H = block_diag_families(F, G)
        evF, evG = F.finite_eigenvalues(), G.finite_eigenvalues()
        W = 2.0 * max(F.cauchy_bound(), G.cauchy_bound()) + 1.0
        beta1, beta2 = _random_strip(rng, np.concatenate([evF, evG]), W)
        c = strip_contour(beta1, beta2, W)
        lf, lg, lh = (log_residue(X, c) for X in (F, G, H))
        rep = locate_spectrum(F, (beta1, beta2), re_window=W)
        worst["snap"] = max(worst["snap"], max(abs(x.raw - x.value) for x in (lf, lg, lh)))
        worst["oracle_mismatch"] = max(worst["oracle_mismatch"],
                                       abs(lf.value - _inside(evF, W, beta1, beta2)),
                                       abs(lg.value - _inside(evG, W, beta1, beta2)))
        worst["locate_mismatch"] = max(worst["locate_mismatch"], abs(lf.value - rep.total_multiplicity))
        worst["additivity_mismatch"] = max(worst["additivity_mismatch"], abs(lh.value - lf.value - lg.value))
        totals.append(lf.value)
    tol = {"snap": SNAP_TOL, "oracle_mismatch": 0.0, "locate_mismatch": 0.0, "additivity_mismatch": 0.0}
    return SuiteResult("contour", count, {k: float(v) for k, v in worst.items()}, tol,
                       time.perf_counter() - t0, {"nonzero_counts": int(np.count_nonzero(totals)),
                                                  "max_count": int(max(totals))})


# ---------------------------------------------------------------------------
# Mellin convergence
# ---------------------------------------------------------------------------

def mellin_bump(grid: MellinGrid, kind: GeometryKind, dim: int = 1) -> np.ndarray:
    """Gaussian bump centred at ``t = -T/2`` (width ``0.075 T``) with two fibre harmonics."""
    t = np.linspace(-grid.T, 0.0, grid.M)
    bump = np.exp(-((t + grid.T / 2) / (0.075 * grid.T)) ** 2)
    if kind == GeometryKind.B_INTERVAL:
        prof = bump[:, None]
    else:
        z = 2 * np.pi * np.arange(grid.nz) / grid.nz
        prof = bump[:, None, None] * (1 + 0.5 * np.cos(z) + 0.3 * np.sin(2 * z))[None, :, None]
    mix = 1.0 + 0.25 * np.arange(dim)
    return prof * mix if kind != GeometryKind.B_INTERVAL else prof * mix[None, :]


def mellin_convergence(B: BPhiOperator, Ms=(256, 512, 1024), T: float = 20.0, nz: int = 16) -> dict:
    """Deviation of the Mellin identity under mesh doubling and the observed order.

    The order is ``log2`` of the ratio of consecutive deviations, taken on the
    last doubling.
    """
    devs = []
    for M in Ms:
        g = MellinGrid(T=T, M=M, nz=nz)
        devs.append(mellin_check(B, mellin_bump(g, B.kind, B.dim), g).deviation)
    orders = [float(np.log2(a / b)) for a, b in zip(devs[:-1], devs[1:])]
    return {"M": list(Ms), "deviation": devs, "orders": orders,
            "final_deviation": devs[-1], "observed_order": orders[-1] if orders else float("nan")}

"""Principal symbol, suspended normal operator and indicial family.

Frame generators map to ``i`` times their fibre variable: ``X0 -> i sigma0``,
``X1 -> i sigma1``, ``Xv -> i eta``, ``Xw -> i zeta``. The indicial family
replaces ``x1 d_x1`` by ``i lambda`` (``x0 x1 d_x1`` by ``i lambda x0`` on the
corner) and restricts to ``x1 = 0``. The suspended family restricts to
``x0 = 0`` after the substitution ``X0 -> -i tau``, ``X1 -> i sigma``,
``Xv -> i xi`` and keeps ``d_z`` as a fibre operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from math import comb
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .coeffs import MatPoly
from .errors import GeometryMismatch
from .geometry import GeometryKind
from .operators import BPhiOperator, Mono, compose_ops, conjugate_weight, mode_index


# ---------------------------------------------------------------------------
# principal symbol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrincipalSymbol:
    """Homogeneous polynomial ``sum c_e(x) sigma0^e0 sigma1^e1 eta^ev zeta^ew`` of degree ``order``."""

    kind: GeometryKind
    dim: int
    order: int
    terms: Mapping[Mono, MatPoly]

    def __mul__(self, other: "PrincipalSymbol") -> "PrincipalSymbol":
        out: dict[Mono, MatPoly] = {}
        for ea, fa in self.terms.items():
            for eb, fb in other.terms.items():
                e = tuple(a + b for a, b in zip(ea, eb))
                g = fa.matmul(fb)
                out[e] = out[e] + g if e in out else g
        return PrincipalSymbol(self.kind, self.dim, self.order + other.order, _clean(out))

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(f.is_zero(tol) for f in self.terms.values())

    def restrict(self, fn) -> "PrincipalSymbol":
        return PrincipalSymbol(self.kind, self.dim, self.order, _clean({e: fn(f) for e, f in self.terms.items()}))

    def distance(self, other: "PrincipalSymbol") -> float:
        return _table_distance(self.terms, other.terms, self.dim)

    def evaluate(self, point, xi) -> np.ndarray:
        """Value at base ``point = (x0, x1, y, z)`` and covectors ``xi`` of shape ``(..., 4)``."""
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1] + (self.dim, self.dim), dtype=complex)
        for e, f in self.terms.items():
            mono = np.prod(xi ** np.array(e), axis=-1)
            out += mono[..., None, None] * f(*point)
        return out


def _clean(t: Mapping) -> dict:
    return {k: v for k, v in sorted(t.items()) if len(v)}


def _table_distance(a: Mapping, b: Mapping, dim: int) -> float:
    zero = MatPoly.zero(dim)
    return max(((a.get(k, zero) - b.get(k, zero)).max_abs() for k in set(a) | set(b)), default=0.0)


def principal_symbol(P: BPhiOperator, order: int | None = None) -> PrincipalSymbol:
    """Top-order part at nominal ``order`` (default ``P.order``); zero when ``P`` is of lower order."""
    m = P.order if order is None else order
    terms = {e: f.scale(1j ** m) for e, f in P.terms.items() if sum(e) == m}
    if any(sum(e) > m for e in P.terms):
        raise ValueError(f"operator has order {P.order} > nominal order {m}")
    return PrincipalSymbol(P.kind, P.dim, m, _clean(terms))


# ---------------------------------------------------------------------------
# fibre-operator families polynomial in parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiberFamily:
    """``sum_(e, a) params^e c_(e,a)(base; z) d_z^a``.

    Keys are parameter exponent tuples followed by the ``d_z`` power. The
    parameters commute with everything; fibre operators compose by Leibniz.
    """

    params: tuple[str, ...]
    dim: int
    terms: Mapping[tuple[int, ...], MatPoly]

    def __add__(self, other: "FiberFamily") -> "FiberFamily":
        out = dict(self.terms)
        for k, f in other.terms.items():
            out[k] = out[k] + f if k in out else f
        return FiberFamily(self.params, self.dim, _clean(out))

    def __sub__(self, other: "FiberFamily") -> "FiberFamily":
        return self + FiberFamily(other.params, other.dim, {k: -f for k, f in other.terms.items()})

    def compose(self, other: "FiberFamily") -> "FiberFamily":
        if self.params != other.params:
            raise ValueError("families use different parameters")
        out: dict[tuple[int, ...], MatPoly] = {}
        for ka, fa in self.terms.items():
            a = ka[-1]
            for kb, fb in other.terms.items():
                g = fb
                for k in range(a + 1):
                    key = tuple(x + y for x, y in zip(ka[:-1], kb[:-1])) + (a - k + kb[-1],)
                    h = fa.matmul(g).scale(comb(a, k))
                    out[key] = out[key] + h if key in out else h
                    g = g.d_z()
        return FiberFamily(self.params, self.dim, _clean(out))

    def map(self, fn) -> "FiberFamily":
        return FiberFamily(self.params, self.dim, _clean({k: fn(f) for k, f in self.terms.items()}))

    def distance(self, other: "FiberFamily") -> float:
        return _table_distance(self.terms, other.terms, self.dim)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(f.is_zero(tol) for f in self.terms.values())

    def shift_param(self, slot: int, mu: complex) -> "FiberFamily":
        """Substitute ``param[slot] -> param[slot] + mu``."""
        out: dict[tuple[int, ...], MatPoly] = {}
        for k, f in self.terms.items():
            deg = k[slot]
            for j in range(deg + 1):
                key = list(k)
                key[slot] = j
                key = tuple(key)
                g = f.scale(comb(deg, j) * mu ** (deg - j))
                out[key] = out[key] + g if key in out else g
        return FiberFamily(self.params, self.dim, _clean(out))

    def band_terms(self, N: int, x0=0.0, x1=0.0, y=0.0) -> dict[tuple[int, ...], np.ndarray]:
        """Parameter monomial -> ``(2N+1) d`` square mode matrix at a base point."""
        d = self.dim
        size = (2 * N + 1) * d
        out: dict[tuple[int, ...], np.ndarray] = {}
        for key, f in self.terms.items():
            a = key[-1]
            mat = out.setdefault(key[:-1], np.zeros((size, size), dtype=complex))
            for harm, g in f.fourier_blocks().items():
                block = g(x0, x1, y, 0.0)
                for n in range(-N, N + 1):
                    r = n + harm
                    if -N <= r <= N:
                        i, j = mode_index(r, 0, N, d), mode_index(n, 0, N, d)
                        mat[i:i + d, j:j + d] += (1j * n) ** a * block
        return out

    def evaluate(self, values, N: int, x0=0.0, x1=0.0, y=0.0) -> np.ndarray:
        """Mode matrices at parameter values of shape ``(..., len(params))``."""
        values = np.asarray(values, dtype=complex)
        bands = self.band_terms(N, x0, x1, y)
        size = (2 * N + 1) * self.dim
        out = np.zeros(values.shape[:-1] + (size, size), dtype=complex)
        for e, mat in bands.items():
            mono = np.prod(values ** np.array(e), axis=-1)
            out += mono[..., None, None] * mat
        return out


SuspendedFamily = FiberFamily


# ---------------------------------------------------------------------------
# indicial families (numeric)
# ---------------------------------------------------------------------------

class IndicialFamily:
    """Polynomial matrix family ``A(lambda) = sum_k A_k lambda^k``.

    ``coeffs`` are square arrays in ascending powers. ``symbolic`` optionally
    keeps the exact :class:`FiberFamily` it was built from so the mode
    truncation can be changed.
    """

    def __init__(self, coeffs: Sequence[np.ndarray], N: int = 0, matrix_dim: int | None = None,
                 symbolic: FiberFamily | None = None):
        cs = [np.atleast_2d(np.asarray(c, dtype=complex)) for c in coeffs]
        if not cs:
            raise ValueError("an indicial family needs at least one coefficient")
        while len(cs) > 1 and not np.any(cs[-1]):
            cs.pop()
        self.coeffs = tuple(cs)
        for c in self.coeffs:
            c.setflags(write=False)
        self.N = N
        self.matrix_dim = matrix_dim if matrix_dim is not None else cs[0].shape[0]
        self.symbolic = symbolic

    @property
    def size(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        out = np.zeros(lam.shape + (self.size, self.size), dtype=complex)
        for c in reversed(self.coeffs):
            out = out * lam[..., None, None] + c
        return out

    def derivative(self) -> "IndicialFamily":
        if self.degree == 0:
            return IndicialFamily([np.zeros_like(self.coeffs[0])], self.N, self.matrix_dim)
        return IndicialFamily([k * c for k, c in enumerate(self.coeffs) if k > 0], self.N, self.matrix_dim)

    def shifted(self, mu: complex) -> "IndicialFamily":
        """``lambda -> A(lambda + mu)``."""
        m = self.degree
        out = []
        for j in range(m + 1):
            out.append(sum(comb(k, j) * mu ** (k - j) * self.coeffs[k] for k in range(j, m + 1)))
        return IndicialFamily(out, self.N, self.matrix_dim)

    def with_modes(self, N: int) -> "IndicialFamily":
        if self.symbolic is None:
            raise ValueError("family has no symbolic form to re-truncate")
        return family_from_fiber(self.symbolic, N)

    def cauchy_bound(self) -> float:
        """Radius containing every finite root.

        ``1 + max_k ||A_m^-1 A_k||`` for invertible leading coefficient;
        otherwise twice the largest finite generalized eigenvalue of the
        companion pencil plus one.
        """
        if self.degree == 0:
            return 1.0
        lead = self.coeffs[-1]
        s = np.linalg.svd(lead, compute_uv=False)
        if s[-1] > 1e-12 * max(s[0], 1.0):
            inv = np.linalg.inv(lead)
            return 1.0 + max(np.linalg.norm(inv @ c, 2) for c in self.coeffs[:-1])
        ev = self.finite_eigenvalues()
        return 1.0 + 2.0 * (max(np.abs(ev)) if ev.size else 0.0)

    def companion_pencil(self) -> tuple[np.ndarray, np.ndarray]:
        """First companion pencil ``(A, B)`` with ``det(A - lambda B) ~ det F(lambda)``."""
        K, m = self.size, self.degree
        A = np.zeros((m * K, m * K), dtype=complex)
        B = np.eye(m * K, dtype=complex)
        for i in range(m - 1):
            A[i * K:(i + 1) * K, (i + 1) * K:(i + 2) * K] = np.eye(K)
        for k in range(m):
            A[(m - 1) * K:, k * K:(k + 1) * K] = -self.coeffs[k]
        B[(m - 1) * K:, (m - 1) * K:] = self.coeffs[-1]
        return A, B

    def finite_eigenvalues(self) -> np.ndarray:
        from scipy.linalg import eig
        if self.degree == 0:
            return np.zeros(0, dtype=complex)
        A, B = self.companion_pencil()
        w = eig(A, B, right=False, homogeneous_eigvals=True)
        alpha, beta = w[0], w[1]
        scale = np.maximum(np.abs(alpha), np.abs(beta))
        ok = np.abs(beta) > 1e-10 * scale
        return np.sort_complex(alpha[ok] / beta[ok])


def block_diag_families(*fams: IndicialFamily) -> IndicialFamily:
    deg = max(f.degree for f in fams)
    sizes = [f.size for f in fams]
    total = sum(sizes)
    coeffs = []
    for k in range(deg + 1):
        c = np.zeros((total, total), dtype=complex)
        off = 0
        for f, s in zip(fams, sizes):
            if k <= f.degree:
                c[off:off + s, off:off + s] = f.coeffs[k]
            off += s
        coeffs.append(c)
    return IndicialFamily(coeffs, fams[0].N, total)


def family_from_fiber(fam: FiberFamily, N: int) -> IndicialFamily:
    bands = fam.band_terms(N)
    size = (2 * N + 1) * fam.dim
    deg = max((e[0] for e in bands), default=0)
    coeffs = [np.zeros((size, size), dtype=complex) for _ in range(deg + 1)]
    for e, mat in bands.items():
        coeffs[e[0]] = coeffs[e[0]] + mat
    return IndicialFamily(coeffs, N, fam.dim, fam)


# ---------------------------------------------------------------------------
# boundary reductions
# ---------------------------------------------------------------------------

def normal0(P: BPhiOperator) -> FiberFamily:
    """Suspended family in ``(tau, sigma, xi)`` at ``x0 = 0``."""
    if P.kind != GeometryKind.CORNER:
        raise GeometryMismatch("the suspended family needs the fibred-cusp face")
    out: dict[tuple[int, ...], MatPoly] = {}
    for m, f in P.terms.items():
        g = f.at_x0_zero()
        if not len(g):
            continue
        c = (-1j) ** m[0] * (1j) ** m[1] * (1j) ** m[2]
        key = (m[0], m[1], m[2], m[3])
        h = g.scale(c)
        out[key] = out[key] + h if key in out else h
    return FiberFamily(("tau", "sigma", "xi"), P.dim, _clean(out))


@dataclass(frozen=True)
class CornerIndicialFamily:
    """``lambda -> sum_k lambda^k B_k`` with corner operators ``B_k`` free of ``x1`` and ``X1``."""

    coeffs: tuple[BPhiOperator, ...]

    @property
    def geometry(self):
        return self.coeffs[0].geometry

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def compose(self, other: "CornerIndicialFamily") -> "CornerIndicialFamily":
        out = [BPhiOperator(self.geometry) for _ in range(self.degree + other.degree + 1)]
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + compose_ops(a, b)
        return CornerIndicialFamily(tuple(out))

    def shifted(self, mu: complex) -> "CornerIndicialFamily":
        m = self.degree
        out = []
        for j in range(m + 1):
            acc = BPhiOperator(self.geometry)
            for k in range(j, m + 1):
                acc = acc + self.coeffs[k].scale(comb(k, j) * mu ** (k - j))
            out.append(acc)
        return CornerIndicialFamily(tuple(out))

    def distance(self, other: "CornerIndicialFamily") -> float:
        n = max(len(self.coeffs), len(other.coeffs))
        zero = BPhiOperator(self.geometry)
        pad = lambda c: list(c) + [zero] * (n - len(c))
        return max(a.distance(b) for a, b in zip(pad(self.coeffs), pad(other.coeffs)))

    def frozen(self, x0: float, y: float, sigma0: float, eta: float, N: int) -> IndicialFamily:
        """Coefficients frozen at ``(x0, y)``, ``X0 -> i sigma0``, ``Xv -> i eta``."""
        geom = self.geometry
        fams = []
        for B in self.coeffs:
            terms: dict[tuple[int, ...], MatPoly] = {}
            for m, f in B.terms.items():
                c = (1j * sigma0) ** m[0] * (1j * eta) ** m[2]
                key = (0, m[3])
                g = f.scale(c)
                terms[key] = terms[key] + g if key in terms else g
            fams.append(FiberFamily(("lam",), geom.matrix_dim, _clean(terms)))
        size = (2 * N + 1) * geom.matrix_dim
        coeffs = []
        for fam in fams:
            bands = fam.band_terms(N, x0, 0.0, y)
            coeffs.append(bands.get((0,), np.zeros((size, size), dtype=complex)))
        return IndicialFamily(coeffs, N, geom.matrix_dim)


def _normal1_fiber(P: BPhiOperator) -> FiberFamily:
    out: dict[tuple[int, ...], MatPoly] = {}
    for m, f in P.terms.items():
        g = f.at_x1_zero().scale(1j ** m[1])
        if not len(g):
            continue
        key = (m[1], m[3])
        out[key] = out[key] + g if key in out else g
    return FiberFamily(("lam",), P.dim, _clean(out))


def _normal1_corner(P: BPhiOperator) -> CornerIndicialFamily:
    geom = P.geometry
    d = P.dim
    deg = P.t_order
    out = [BPhiOperator(geom) for _ in range(deg + 1)]
    for m, f in P.terms.items():
        g = f.at_x1_zero()
        if not len(g):
            continue
        left = BPhiOperator(geom, {(m[0], 0, 0, 0): g})
        mid = BPhiOperator.multiplication(geom, MatPoly.monomial((m[1], 0, 0, 0), (1j ** m[1]) * np.eye(d)))
        right = BPhiOperator.term(geom, (0, 0, m[2], m[3]))
        out[m[1]] = out[m[1]] + compose_ops(compose_ops(left, mid), right)
    return CornerIndicialFamily(tuple(out))


def normal1(P: BPhiOperator, N: int | None = None):
    """Indicial family of ``P``.

    On the b geometries returns an :class:`IndicialFamily` truncated at ``N``
    fibre modes (default: the geometry's); on the corner returns the exact
    :class:`CornerIndicialFamily`, whose :meth:`~CornerIndicialFamily.frozen`
    gives numeric families at sampled ``x0``.
    """
    if P.kind == GeometryKind.CORNER:
        return _normal1_corner(P)
    if N is None:
        N = P.geometry.fiber_modes
    return family_from_fiber(_normal1_fiber(P), N)


def weight_shift_check(P: BPhiOperator, beta: float, lambdas: Sequence[complex]) -> float:
    """Max relative deviation between the two sides of the weight-shift identity.

    Left: indicial family of ``x1^beta P x1^-beta``. Right: indicial family of
    ``P`` at ``lambda + i beta``. Both coefficient tables and evaluations at
    ``lambdas`` are compared.
    """
    lhs_op = conjugate_weight(P, -beta)
    lambdas = np.asarray(lambdas, dtype=complex)
    if P.kind == GeometryKind.CORNER:
        L = _normal1_corner(lhs_op)
        R = _normal1_corner(P).shifted(1j * beta)
        scale = max(1.0, max(c.max_abs() for c in L.coeffs))
        dev = L.distance(R) / scale
        N = P.geometry.fiber_modes
        for lam in lambdas:
            for x0 in (0.1, 0.4):
                a = L.frozen(x0, 0.3, 0.7, -0.2, N)(lam)
                b = R.frozen(x0, 0.3, 0.7, -0.2, N)(lam)
                dev = max(dev, float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(a)))))
        return dev
    L = _normal1_fiber(lhs_op)
    R = _normal1_fiber(P).shift_param(0, 1j * beta)
    scale = max([1.0] + [f.max_abs() for f in L.terms.values()])
    dev = L.distance(R) / scale
    N = P.geometry.fiber_modes
    a = L.evaluate(lambdas[:, None], N)
    b = _normal1_fiber(P).evaluate((lambdas + 1j * beta)[:, None], N)
    if a.size:
        dev = max(dev, float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(a)))))
    return dev


# ---------------------------------------------------------------------------
# joint symbol
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JointSymbol:
    s: PrincipalSymbol
    n0: FiberFamily | None
    n1: object  # FiberFamily (b geometries) or CornerIndicialFamily
    kind: GeometryKind


def joint_symbol(P: BPhiOperator) -> JointSymbol:
    n0 = normal0(P) if P.kind == GeometryKind.CORNER else None
    n1 = _normal1_corner(P) if P.kind == GeometryKind.CORNER else _normal1_fiber(P)
    return JointSymbol(principal_symbol(P), n0, n1, P.kind)


@dataclass
class CompatReport:
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c["passed"]]

    def to_dict(self) -> dict:
        return {k: dict(v) for k, v in sorted(self.checks.items())}


def _record(rep: CompatReport, name: str, dev: float, tol: float) -> None:
    rep.checks[name] = {"passed": bool(dev <= tol), "max_deviation": float(dev)}


def _n1_principal(j: JointSymbol) -> tuple[dict, float]:
    """Top part of ``n1`` as a symbol table, plus the size of any over-order part."""
    order = j.s.order
    out: dict[Mono, MatPoly] = {}
    excess = 0.0
    if j.kind != GeometryKind.CORNER:
        for (k, a), f in j.n1.terms.items():
            if k + a > order:
                excess = max(excess, f.max_abs())
            elif k + a == order:
                out[(0, k, 0, a)] = f.scale(1j ** a)
        return out, excess
    for k, B in enumerate(j.n1.coeffs):
        for m, f in B.terms.items():
            tot = sum(m)
            if tot + k > order:
                excess = max(excess, f.max_abs())
                continue
            if tot + k < order:
                continue
            if not f.divisible_by(0, k):
                excess = max(excess, f.max_abs())
                continue
            key = (m[0], k, m[2], m[3])
            g = f.divide_monomial(0, k).scale(1j ** tot)
            out[key] = out[key] + g if key in out else g
    return _clean(out), excess


def check_compat(j: JointSymbol, tol: float = 0.0) -> CompatReport:
    """Check the three compatibility relations of a joint symbol.

    (a) top part of ``n1`` (``lambda <-> sigma1``, with ``lambda x0 <-> sigma1``
    on the corner) equals ``s`` at ``x1 = 0``; (b) top part of ``n0`` with
    ``tau = -sigma0`` equals ``s`` at ``x0 = 0``; (c) ``n0`` at ``x1 = 0``
    equals the suspended family of ``n1`` after ``lambda = sigma / x0``.
    """
    rep = CompatReport()
    s1 = j.s.restrict(lambda f: f.at_x1_zero()).terms
    top, excess = _n1_principal(j)
    _record(rep, "a", max(_table_distance(top, s1, j.s.dim), excess), tol)
    if j.n0 is None:
        return rep
    order = j.s.order
    s0 = j.s.restrict(lambda f: f.at_x0_zero()).terms
    top0: dict[Mono, MatPoly] = {}
    excess0 = 0.0
    for key, f in j.n0.terms.items():
        tot = sum(key)
        if tot > order:
            excess0 = max(excess0, f.max_abs())
        elif tot == order:
            top0[key] = f.scale((-1) ** key[0] * 1j ** key[3])
    _record(rep, "b", max(_table_distance(top0, s0, j.s.dim), excess0), tol)
    n01 = j.n0.map(lambda f: f.at_x1_zero())
    acc = FiberFamily(("tau", "sigma", "xi"), j.s.dim, {})
    bad = 0.0
    for k, B in enumerate(j.n1.coeffs):
        try:
            Bk = B.map_coefficients(lambda f: f.divide_monomial(0, k))
        except ValueError:
            bad = max(bad, B.max_abs())
            continue
        fam = normal0(Bk)
        shifted = {(e[0], e[1] + k, e[2], e[3]): f for e, f in fam.terms.items()}
        acc = acc + FiberFamily(fam.params, fam.dim, shifted)
    _record(rep, "c", max(acc.distance(n01), bad), tol)
    return rep


# ---------------------------------------------------------------------------
# full ellipticity
# ---------------------------------------------------------------------------

class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"


def classify(smin: float, tol: float) -> Verdict:
    if smin > tol:
        return Verdict.PASS
    if smin < tol / 10:
        return Verdict.FAIL
    return Verdict.INCONCLUSIVE


@dataclass(frozen=True)
class EllipticityGrid:
    """Sampling used by :func:`full_ellipticity`."""

    base_points: int = 5
    sphere_points: int = 16
    n0_points: int = 7
    n0_radius: float = 4.0
    limit_radius: float = 1e4
    n1_points: int = 512
    relative_tol: float = 1e-8
    N: int | None = None


@dataclass
class EllipticityVerdict:
    sigma_invertible: Verdict
    n0_invertible: Verdict | None
    n1_real_line_invertible: Verdict
    details: dict

    @property
    def fully_elliptic(self) -> bool:
        checks = [self.sigma_invertible, self.n1_real_line_invertible]
        if self.n0_invertible is not None:
            checks.append(self.n0_invertible)
        return all(c == Verdict.PASS for c in checks)

    @property
    def inconclusive(self) -> bool:
        return Verdict.INCONCLUSIVE in (self.sigma_invertible, self.n0_invertible, self.n1_real_line_invertible)

    def to_dict(self) -> dict:
        return {
            "sigma_invertible": self.sigma_invertible.value,
            "n0_invertible": None if self.n0_invertible is None else self.n0_invertible.value,
            "n1_real_line_invertible": self.n1_real_line_invertible.value,
            "fully_elliptic": self.fully_elliptic,
            "details": self.details,
        }


def _sphere(kind: GeometryKind, n: int) -> np.ndarray:
    """Covectors ``(sigma0, sigma1, eta, zeta)`` on the unit sphere of the active variables."""
    if kind == GeometryKind.B_INTERVAL:
        return np.array([[0, 1.0, 0, 0], [0, -1.0, 0, 0]])
    if kind == GeometryKind.B_CYLINDER:
        a = 2 * np.pi * np.arange(4 * n) / (4 * n)
        return np.stack([0 * a, np.cos(a), 0 * a, np.sin(a)], axis=-1)
    # Hopf coordinates on S^3
    e = np.linspace(0, np.pi / 2, n)
    p = 2 * np.pi * np.arange(n) / n
    E, P1, P2 = np.meshgrid(e, p, p, indexing="ij")
    pts = np.stack([np.sin(E) * np.cos(P1), np.sin(E) * np.sin(P1),
                    np.cos(E) * np.cos(P2), np.cos(E) * np.sin(P2)], axis=-1)
    return pts.reshape(-1, 4)


def _base_points(kind: GeometryKind, n: int) -> list[tuple[float, float, float, float]]:
    zs = 2 * np.pi * np.arange(n) / n
    x1s = np.linspace(0.0, 1.0, n)
    if kind == GeometryKind.B_INTERVAL:
        return [(0.0, x1, 0.0, 0.0) for x1 in x1s]
    if kind == GeometryKind.B_CYLINDER:
        return [(0.0, x1, 0.0, z) for x1 in x1s for z in zs]
    x0s = np.linspace(0.0, 0.5, n)
    ys = np.linspace(-1.0, 1.0, 3)
    return [(x0, x1, y, z) for x0 in x0s for x1 in x1s for y in ys for z in zs[::2]]


def _smin_smax(mats: np.ndarray) -> tuple[float, float]:
    s = np.linalg.svd(mats, compute_uv=False)
    return float(np.min(s[..., -1])), float(np.max(s[..., 0]))


def real_line_min_singular(F: IndicialFamily, n_points: int = 512) -> dict:
    """Minimum of ``s_min(F(lambda))`` over the real line.

    Roots lie in ``|lambda| <= R`` (Cauchy bound); the window is
    ``[-2R, 2R]``. The grid minimum is refined by bounded scalar minimization
    around every local grid minimum; outside the window ``s_min`` grows with
    the leading term. The grid is doubled until the verdict repeats twice.
    """
    R = F.cauchy_bound()
    lam_max = 2.0 * R
    history = []
    n = n_points
    while True:
        grid = np.linspace(-lam_max, lam_max, n)
        s = np.linalg.svd(F(grid), compute_uv=False)
        smin_grid = s[:, -1]
        smax = float(np.max(s[:, 0]))
        best = float(np.min(smin_grid))
        for i in range(n):
            lo, hi = max(i - 1, 0), min(i + 1, n - 1)
            if smin_grid[i] <= smin_grid[lo] and smin_grid[i] <= smin_grid[hi]:
                f = lambda x: float(np.linalg.svd(F(x), compute_uv=False)[-1])
                res = minimize_scalar(f, bounds=(grid[lo], grid[hi]), method="bounded",
                                      options={"xatol": 1e-13 * max(1.0, lam_max)})
                best = min(best, float(res.fun))
        history.append((n, best, smax))
        if len(history) >= 3:
            break
        n *= 2
    return {"window": lam_max, "cauchy_bound": R, "smin": min(h[1] for h in history),
            "smax": max(h[2] for h in history), "grids": [h[0] for h in history]}


def full_ellipticity(P: BPhiOperator, grid: EllipticityGrid | None = None) -> EllipticityVerdict:
    """Invertibility of ``sigma(P)``, ``N0(P)`` and ``N1^(P)(lambda)`` on the real line."""
    grid = grid or EllipticityGrid()
    kind = P.kind
    N = grid.N if grid.N is not None else P.geometry.fiber_modes
    details: dict = {}

    s = principal_symbol(P)
    xi = _sphere(kind, grid.sphere_points)
    smin, smax = np.inf, 0.0
    for pt in _base_points(kind, grid.base_points):
        a, b = _smin_smax(s.evaluate(pt, xi))
        smin, smax = min(smin, a), max(smax, b)
    tol = grid.relative_tol * smax
    v_sigma = classify(smin, tol)
    details["sigma"] = {"smin": smin, "smax": smax, "tol": tol}

    v_n0 = None
    if kind == GeometryKind.CORNER:
        n0 = normal0(P)
        r = np.linspace(-grid.n0_radius, grid.n0_radius, grid.n0_points)
        params = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
        smin0, smax0 = np.inf, 0.0
        for x1 in np.linspace(0.0, 1.0, grid.base_points):
            for y in (-1.0, 0.0, 1.0):
                a, b = _smin_smax(n0.evaluate(params, N, 0.0, x1, y))
                smin0, smax0 = min(smin0, a), max(smax0, b)
        tol0 = grid.relative_tol * smax0
        v_n0 = classify(smin0, tol0)
        # asymptotic consistency with the symbol at the face, zeta = 0
        dirs = _sphere(GeometryKind.CORNER, 4)[:, :3]
        dirs = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True).clip(1e-300)
        m = P.order
        devs = []
        for R in (grid.limit_radius, 10 * grid.limit_radius):
            worst = 0.0
            for x1 in (0.0, 0.5):
                vals = n0.evaluate(R * dirs, N, 0.0, x1, 0.0) / R ** m
                cov = np.stack([-dirs[:, 0], dirs[:, 1], dirs[:, 2], 0 * dirs[:, 0]], axis=-1)
                ref = s.evaluate((0.0, x1, 0.0, 0.0), cov)
                refbig = np.zeros_like(vals)
                d = P.dim
                for n in range(-N, N + 1):
                    i = mode_index(n, 0, N, d)
                    refbig[:, i:i + d, i:i + d] = ref
                scale = max(float(np.max(np.abs(ref))), 1e-300)
                worst = max(worst, float(np.max(np.abs(vals - refbig))) / scale)
            devs.append(worst)
        limit_ok = devs[1] <= max(devs[0] / 5, 1e-12)
        details["n0"] = {"smin": smin0, "smax": smax0, "tol": tol0,
                         "limit_radius": grid.limit_radius, "limit_deviation": devs,
                         "limit_consistent": bool(limit_ok)}
        if not limit_ok and v_n0 == Verdict.PASS:
            v_n0 = Verdict.INCONCLUSIVE

    if kind == GeometryKind.CORNER:
        fam = _normal1_corner(P)
        worst = None
        for x0 in np.linspace(0.05, 0.5, grid.base_points):
            for sig0 in (-1.0, 0.0, 1.0):
                for eta in (-1.0, 0.0, 1.0):
                    info = real_line_min_singular(fam.frozen(x0, 0.0, sig0, eta, N), grid.n1_points)
                    if worst is None or info["smin"] / max(info["smax"], 1e-300) < worst["smin"] / max(worst["smax"], 1e-300):
                        worst = info
        info = worst
    else:
        info = real_line_min_singular(normal1(P, N), grid.n1_points)
    tol1 = grid.relative_tol * info["smax"]
    v_n1 = classify(info["smin"], tol1)
    details["n1"] = dict(info, tol=tol1, N=N)
    return EllipticityVerdict(v_sigma, v_n0, v_n1, details)

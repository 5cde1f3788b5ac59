"""Differential operators in the fibred-cusp b frame.

An operator is stored in normal order,

    P = sum_m  f_m(x0, x1, y, z) X0^m0 X1^m1 Xv^mv Xw^mw,

with the corner frame ``X0 = x0^2 d_x0``, ``X1 = x0 x1 d_x1``, ``Xv = x0 d_y``,
``Xw = d_z``. On the two b geometries only ``X1 = x1 d_x1`` and ``Xw = d_z``
occur. The only nonzero frame brackets are ``[X0, X1] = x0 X1`` and
``[X0, Xv] = x0 Xv``; products are reduced to normal order with those
brackets and the Leibniz rule, so composition is exact on the coefficient
tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Mapping

import numpy as np

from .coeffs import MatPoly, block_diag as _block_diag_coeffs
from .errors import DimMismatch, GeometryMismatch, GridTooCoarse
from .geometry import GeometryKind, GeometrySignature

Mono = tuple[int, int, int, int]
X0, X1, XV, XW = 0, 1, 2, 3
_UNIT = ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))
_X0_KEY = (1, 0, 0, 0)


def _add(a: Mono, b: Mono) -> Mono:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3])


# ---------------------------------------------------------------------------
# normal-ordering engine (works on raw term tables)
# ---------------------------------------------------------------------------

def _act(kind: GeometryKind, j: int, f: MatPoly) -> MatPoly:
    """Frame generator ``j`` applied to a coefficient function."""
    if j == XW:
        return f.d_z()
    if kind == GeometryKind.CORNER:
        if j == X0:
            return f.d_x0().shift((2, 0, 0, 0))
        if j == X1:
            return f.euler_x1().shift(_X0_KEY)
        return f.d_y().shift(_X0_KEY)
    if j == X1:
        return f.euler_x1()
    raise GeometryMismatch(f"generator {j} does not exist on {kind.value}")


def _accumulate(out: dict, m: Mono, f: MatPoly) -> None:
    if m in out:
        out[m] = out[m] + f
    else:
        out[m] = f


@lru_cache(maxsize=None)
def _gen_times_mono(kind: GeometryKind, j: int, c: Mono) -> tuple[tuple[Mono, MatPoly], ...]:
    """Normal-ordered form of ``X_j X^c`` with scalar coefficients."""
    one = MatPoly.identity(1)
    if kind != GeometryKind.CORNER or j in (X0, XW) or c[0] == 0:
        return ((_add(c, _UNIT[j]), one),)
    # X1 X0 = X0 X1 - x0 X1 and Xv X0 = X0 Xv - x0 Xv
    lower = dict(_gen_times_mono(kind, j, (c[0] - 1, c[1], c[2], c[3])))
    out = _left_generator(kind, X0, lower)
    x0 = MatPoly.monomial(_X0_KEY)
    for m, f in lower.items():
        _accumulate(out, m, -(x0.matmul(f)))
    return tuple(sorted(out.items()))


def _left_generator(kind: GeometryKind, j: int, terms: Mapping[Mono, MatPoly]) -> dict[Mono, MatPoly]:
    """``X_j o (sum f_m X^m)`` in normal order."""
    out: dict[Mono, MatPoly] = {}
    for m, f in terms.items():
        df = _act(kind, j, f)
        if len(df):
            _accumulate(out, m, df)
        for mm, s in _gen_times_mono(kind, j, m):
            _accumulate(out, mm, f.matmul(s))
    return out


def _compose_terms(kind: GeometryKind, a: Mapping[Mono, MatPoly], b: Mapping[Mono, MatPoly]) -> dict[Mono, MatPoly]:
    out: dict[Mono, MatPoly] = {}
    cache: dict[Mono, dict[Mono, MatPoly]] = {(0, 0, 0, 0): dict(b)}

    def power_times_b(m: Mono) -> dict[Mono, MatPoly]:
        if m in cache:
            return cache[m]
        # strip the leftmost generator: X^m = X_j X^(m - e_j) with j the first nonzero slot
        j = next(i for i in range(4) if m[i])
        rest = list(m)
        rest[j] -= 1
        res = _left_generator(kind, j, power_times_b(tuple(rest)))
        cache[m] = res
        return res

    for m, f in a.items():
        for mm, g in power_times_b(m).items():
            _accumulate(out, mm, f.matmul(g))
    return out


def _clean(terms: Mapping[Mono, MatPoly]) -> dict[Mono, MatPoly]:
    return {m: f for m, f in sorted(terms.items()) if len(f)}


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

class BPhiOperator:
    """Immutable normal-ordered differential operator over a model geometry."""

    __slots__ = ("geometry", "_terms")

    def __init__(self, geometry: GeometrySignature, terms: Mapping[Mono, MatPoly] | None = None):
        self.geometry = geometry
        d = geometry.matrix_dim
        clean: dict[Mono, MatPoly] = {}
        for m, f in (terms or {}).items():
            m = tuple(int(v) for v in m)
            if len(m) != 4 or min(m) < 0:
                raise ValueError(f"bad multi-index {m}")
            if f.dim == 1 and d != 1:
                f = f._lift(d)
            if f.dim != d:
                raise DimMismatch(f"coefficient of {m} has dim {f.dim}, geometry has {d}")
            if len(f):
                clean[m] = f
        self._terms = dict(sorted(clean.items()))
        self._validate()

    def _validate(self) -> None:
        kind = self.geometry.kind
        if kind == GeometryKind.CORNER:
            return
        for m, f in self._terms.items():
            if m[0] or m[2]:
                raise GeometryMismatch(f"b geometry operator uses corner generator in {m}")
            if not all(k[0] == 0 and k[2] == 0 for k in f.keys()):
                raise GeometryMismatch("b geometry coefficients must not depend on x0 or y")
            if kind == GeometryKind.B_INTERVAL and (m[3] or f.harmonics() - {0}):
                raise GeometryMismatch("B_INTERVAL has no fibre")

    # construction helpers
    @classmethod
    def identity(cls, geometry: GeometrySignature) -> "BPhiOperator":
        return cls(geometry, {(0, 0, 0, 0): MatPoly.identity(geometry.matrix_dim)})

    @classmethod
    def multiplication(cls, geometry: GeometrySignature, f: MatPoly) -> "BPhiOperator":
        return cls(geometry, {(0, 0, 0, 0): f})

    @classmethod
    def generator(cls, geometry: GeometrySignature, j: int) -> "BPhiOperator":
        return cls(geometry, {_UNIT[j]: MatPoly.identity(geometry.matrix_dim)})

    @classmethod
    def term(cls, geometry: GeometrySignature, m: Mono, coeff=None) -> "BPhiOperator":
        d = geometry.matrix_dim
        if coeff is None:
            f = MatPoly.identity(d)
        elif isinstance(coeff, MatPoly):
            f = coeff
        else:
            f = MatPoly.const(coeff, d)
        return cls(geometry, {tuple(m): f})

    # access
    @property
    def terms(self) -> dict[Mono, MatPoly]:
        return dict(self._terms)

    @property
    def kind(self) -> GeometryKind:
        return self.geometry.kind

    @property
    def dim(self) -> int:
        return self.geometry.matrix_dim

    @property
    def order(self) -> int:
        return max((sum(m) for m in self._terms), default=0)

    @property
    def t_order(self) -> int:
        return max((m[1] for m in self._terms), default=0)

    def coefficient(self, m: Mono) -> MatPoly:
        return self._terms.get(tuple(m), MatPoly.zero(self.dim))

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(f.is_zero(tol) for f in self._terms.values())

    def distance(self, other: "BPhiOperator") -> float:
        return (self - other).max_abs()

    def max_abs(self) -> float:
        return max((f.max_abs() for f in self._terms.values()), default=0.0)

    def equals(self, other: "BPhiOperator", tol: float = 0.0) -> bool:
        return self.geometry == other.geometry and (self - other).is_zero(tol)

    def bandwidth(self) -> int:
        return max((f.bandwidth() for f in self._terms.values()), default=0)

    def is_t_invariant(self) -> bool:
        """True when no coefficient depends on ``x1`` (translation invariance in ``t``)."""
        return all(f.max_exponent(1) == 0 for f in self._terms.values())

    def map_coefficients(self, fn) -> "BPhiOperator":
        return BPhiOperator(self.geometry, {m: fn(f) for m, f in self._terms.items()})

    # algebra
    def _same(self, other: "BPhiOperator") -> None:
        if self.geometry.kind != other.geometry.kind:
            raise GeometryMismatch("operators live on different geometries")
        if self.dim != other.dim:
            raise DimMismatch(f"matrix dims {self.dim} and {other.dim}")

    def __add__(self, other: "BPhiOperator") -> "BPhiOperator":
        self._same(other)
        out = dict(self._terms)
        for m, f in other._terms.items():
            _accumulate(out, m, f)
        return BPhiOperator(self.geometry, out)

    def __neg__(self) -> "BPhiOperator":
        return self.map_coefficients(lambda f: -f)

    def __sub__(self, other: "BPhiOperator") -> "BPhiOperator":
        return self + (-other)

    def scale(self, c: complex) -> "BPhiOperator":
        return self.map_coefficients(lambda f: f.scale(c))

    def __rmul__(self, c) -> "BPhiOperator":
        return self.scale(c)

    def __matmul__(self, other: "BPhiOperator") -> "BPhiOperator":
        return compose_ops(self, other)

    def __repr__(self) -> str:
        return f"BPhiOperator({self.kind.value}, dim={self.dim}, order={self.order}, terms={list(self._terms)})"


def compose_ops(P: BPhiOperator, Q: BPhiOperator) -> BPhiOperator:
    """Exact composition ``P o Q``."""
    P._same(Q)
    return BPhiOperator(P.geometry, _clean(_compose_terms(P.kind, P._terms, Q._terms)))


def commutator(P: BPhiOperator, Q: BPhiOperator) -> BPhiOperator:
    return compose_ops(P, Q) - compose_ops(Q, P)


def multiply_left(f: MatPoly, P: BPhiOperator) -> BPhiOperator:
    return P.map_coefficients(lambda g: f.matmul(g))


def direct_sum(*ops: BPhiOperator) -> BPhiOperator:
    """Block-diagonal operator acting on the direct sum of bundles."""
    kinds = {op.kind for op in ops}
    if len(kinds) != 1:
        raise GeometryMismatch("direct sum needs a common geometry")
    geom = ops[0].geometry.with_dim(sum(op.dim for op in ops))
    keys = sorted(set().union(*(op._terms for op in ops)))
    terms = {m: _block_diag_coeffs(*(op.coefficient(m) for op in ops)) for m in keys}
    return BPhiOperator(geom, terms)


def _power(op: BPhiOperator, n: int) -> BPhiOperator:
    out = BPhiOperator.identity(op.geometry)
    for _ in range(n):
        out = compose_ops(out, op)
    return out


def conjugate_weight(P: BPhiOperator, beta: float) -> BPhiOperator:
    """``x1^(-beta) P x1^beta``.

    On the b geometries ``x1 d_x1`` becomes ``x1 d_x1 + beta``; on the corner
    ``x0 x1 d_x1`` becomes ``x0 x1 d_x1 + beta x0``.
    """
    if beta == 0:
        return P
    geom = P.geometry
    d = P.dim
    if P.kind != GeometryKind.CORNER:
        out: dict[Mono, MatPoly] = {}
        for m, f in P._terms.items():
            for k in range(m[1] + 1):
                c = comb(m[1], k) * beta ** (m[1] - k)
                _accumulate(out, (0, k, 0, m[3]), f.scale(c))
        return BPhiOperator(geom, out)
    shifted = BPhiOperator.generator(geom, X1) + BPhiOperator.multiplication(
        geom, MatPoly.monomial(_X0_KEY, beta * np.eye(d)))
    powers = [BPhiOperator.identity(geom)]
    for _ in range(P.t_order):
        powers.append(compose_ops(powers[-1], shifted))
    total = BPhiOperator(geom)
    for m, f in P._terms.items():
        left = BPhiOperator(geom, {(m[0], 0, 0, 0): f})
        right = BPhiOperator.term(geom, (0, 0, m[2], m[3]))
        total = total + compose_ops(compose_ops(left, powers[m[1]]), right)
    return total


# ---------------------------------------------------------------------------
# Fourier decomposition along the fibre
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeFamily:
    """Operator in the remaining frame with ``(2N+1) d`` square mode-band coefficients.

    Row/column index ``(n + N) d + i`` carries mode ``n`` and component ``i``.
    ``exact`` is True when no coupling was discarded by the truncation.
    """

    kind: GeometryKind
    N: int
    dim: int
    terms: Mapping[Mono, MatPoly]
    exact: bool
    bandwidth: int

    @property
    def size(self) -> int:
        return (2 * self.N + 1) * self.dim

    @property
    def t_order(self) -> int:
        return max((m[1] for m in self.terms), default=0)

    def compose(self, other: "ModeFamily") -> "ModeFamily":
        if (self.kind, self.N, self.dim) != (other.kind, other.N, other.dim):
            raise DimMismatch("mode families differ in geometry, truncation or rank")
        terms = _clean(_compose_terms(self.kind, self.terms, other.terms))
        return ModeFamily(self.kind, self.N, self.dim, terms, self.exact and other.exact,
                          max(self.bandwidth, other.bandwidth))

    def distance(self, other: "ModeFamily", inner: int | None = None) -> float:
        """Max coefficient difference, optionally restricted to modes ``|n| <= inner``."""
        keys = set(self.terms) | set(other.terms)
        worst = 0.0
        zero = MatPoly.zero(self.size)
        for m in keys:
            diff = self.terms.get(m, zero) - other.terms.get(m, zero)
            for _, mat in diff.items():
                if inner is not None:
                    lo = (self.N - inner) * self.dim
                    hi = (self.N + inner + 1) * self.dim
                    mat = mat[lo:hi, lo:hi]
                worst = max(worst, float(np.max(np.abs(mat))) if mat.size else 0.0)
        return worst


def mode_index(n: int, i: int, N: int, d: int) -> int:
    return (n + N) * d + i


def fourier_decompose(P: BPhiOperator, N: int | None = None) -> ModeFamily:
    """Replace ``d_z`` by ``i n`` and ``exp(i k z)`` by the shift ``n -> n + k``."""
    if N is None:
        N = P.geometry.fiber_modes
    d = P.dim
    if not P.geometry.has_fiber:
        terms = {m: f for m, f in P._terms.items()}
        return ModeFamily(P.kind, 0, d, terms, True, 0)
    size = (2 * N + 1) * d
    out: dict[Mono, dict] = {}
    for m, f in P._terms.items():
        mm = (m[0], m[1], m[2], 0)
        table = out.setdefault(mm, {})
        for harm, g in f.fourier_blocks().items():
            for key, mat in g.items():
                big = table.get(key)
                if big is None:
                    big = table[key] = np.zeros((size, size), dtype=complex)
                for n in range(-N, N + 1):
                    r = n + harm
                    if -N <= r <= N:
                        c = (1j * n) ** m[3]
                        big[mode_index(r, 0, N, d):mode_index(r, 0, N, d) + d,
                            mode_index(n, 0, N, d):mode_index(n, 0, N, d) + d] += c * mat
    terms = {m: MatPoly(size, t) for m, t in out.items()}
    bw = P.bandwidth()
    return ModeFamily(P.kind, N, d, _clean(terms), bw == 0, bw)


# ---------------------------------------------------------------------------
# grid application
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleGrid:
    """Tensor grid: ``t = log x1`` uniform on ``[-T, 0]`` with ``M`` nodes, ``nz`` fibre nodes.

    ``x0`` and ``y`` node arrays are used on the corner only.
    """

    T: float
    M: int
    nz: int = 1
    x0: tuple[float, ...] = (0.0,)
    y: tuple[float, ...] = (0.0,)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(-self.T, 0.0, self.M)

    @property
    def h(self) -> float:
        return self.T / (self.M - 1)

    @property
    def z(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.nz) / self.nz

    def shape(self, kind: GeometryKind, d: int) -> tuple[int, ...]:
        if kind == GeometryKind.B_INTERVAL:
            return (self.M, d)
        if kind == GeometryKind.B_CYLINDER:
            return (self.M, self.nz, d)
        return (len(self.x0), len(self.y), self.M, self.nz, d)


def fd_matrix(n: int, h: float) -> np.ndarray:
    """Fourth-order first-derivative matrix; one-sided five-point stencils near the ends."""
    if n < 5:
        raise GridTooCoarse(f"{n} nodes cannot carry a five-point stencil")
    D = np.zeros((n, n))
    for j in range(2, n - 2):
        D[j, j - 2:j + 3] = [1, -8, 0, 8, -1]
    D[0, :5] = [-25, 48, -36, 16, -3]
    D[1, :5] = [-3, -10, 18, -6, 1]
    D[n - 1, n - 5:] = [3, -16, 36, -48, 25]
    D[n - 2, n - 5:] = [-1, 6, -18, 10, 3]
    return D / (12 * h)


def _spectral_dz(u: np.ndarray, axis: int) -> np.ndarray:
    nz = u.shape[axis]
    k = np.fft.fftfreq(nz, d=1.0 / nz)
    if nz % 2 == 0:
        k[nz // 2] = 0.0
    shape = [1] * u.ndim
    shape[axis] = nz
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(u, axis=axis), axis=axis)


def apply(P: BPhiOperator, u: np.ndarray, grid: SampleGrid) -> np.ndarray:
    """Apply ``P`` to samples ``u`` (shape from :meth:`SampleGrid.shape`)."""
    kind = P.kind
    d = P.dim
    u = np.asarray(u)
    if u.shape != grid.shape(kind, d):
        raise DimMismatch(f"section shape {u.shape} does not match grid {grid.shape(kind, d)}")
    if grid.M < 5 + 2 * P.t_order:
        raise GridTooCoarse(f"t-order {P.t_order} needs more than {grid.M} nodes")
    full = u.reshape((len(grid.x0) if kind == GeometryKind.CORNER else 1,
                      len(grid.y) if kind == GeometryKind.CORNER else 1,
                      grid.M,
                      grid.nz if kind != GeometryKind.B_INTERVAL else 1, d)).astype(complex)
    x0 = np.asarray(grid.x0, dtype=float)[:, None, None, None]
    y = np.asarray(grid.y, dtype=float)[None, :, None, None]
    t = grid.t[None, None, :, None]
    z = grid.z[None, None, None, :] if kind != GeometryKind.B_INTERVAL else np.zeros((1, 1, 1, 1))
    Dt = fd_matrix(grid.M, grid.h)
    if kind == GeometryKind.CORNER:
        x0n, yn = np.asarray(grid.x0, float), np.asarray(grid.y, float)
        Dx0 = fd_matrix(len(x0n), x0n[1] - x0n[0]) if P.order and any(m[0] for m in P._terms) else None
        Dy = fd_matrix(len(yn), yn[1] - yn[0]) if any(m[2] for m in P._terms) else None

    def gen(j: int, v: np.ndarray) -> np.ndarray:
        if j == XW:
            return _spectral_dz(v, 3)
        if j == X1:
            w = np.einsum("ij,abjcd->abicd", Dt, v)
            return x0[..., None] * w if kind == GeometryKind.CORNER else w
        if j == X0:
            return (x0 ** 2)[..., None] * np.einsum("ij,jbtcd->ibtcd", Dx0, v)
        return x0[..., None] * np.einsum("ij,ajtcd->aitcd", Dy, v)

    out = np.zeros_like(full)
    for m, f in P._terms.items():
        v = full
        for j in (XW, XV, X1, X0):
            for _ in range(m[j]):
                v = gen(j, v)
        vals = f(x0, np.exp(t), y, z)
        out += np.einsum("abtcij,abtcj->abtci", vals, v)
    return out.reshape(u.shape)

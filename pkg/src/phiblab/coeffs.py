"""Matrix-valued polynomial-trigonometric coefficient functions.

A :class:`MatPoly` is a finite sum

    sum  x0**p0 * x1**p1 * y**py * exp(i n z) * C[p0, p1, py, n]

with ``C`` complex ``dim x dim`` matrices. The monomial-times-harmonic basis
is canonical, so two functions are equal exactly when their coefficient
tables agree. Gaussian-integer inputs stay exact through every operation
used by the operator algebra (products, frame derivatives, restrictions).
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

Key = tuple[int, int, int, int]

ORIGIN: Key = (0, 0, 0, 0)


def _add_keys(a: Key, b: Key) -> Key:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3])


class MatPoly:
    """Immutable sparse table ``{(p0, p1, py, n): dim x dim complex matrix}``."""

    __slots__ = ("dim", "_terms")

    def __init__(self, dim: int, terms: Mapping[Key, np.ndarray] | None = None):
        self.dim = int(dim)
        clean: dict[Key, np.ndarray] = {}
        for key, mat in (terms or {}).items():
            m = np.array(mat, dtype=complex).reshape(self.dim, self.dim)
            if np.any(m != 0):
                k = tuple(int(v) for v in key)
                if min(k[:3]) < 0:
                    raise ValueError(f"negative monomial exponent in {k}")
                clean[k] = m
        self._terms = dict(sorted(clean.items()))
        for m in self._terms.values():
            m.setflags(write=False)

    # construction
    @classmethod
    def zero(cls, dim: int) -> "MatPoly":
        return cls(dim)

    @classmethod
    def const(cls, mat, dim: int | None = None) -> "MatPoly":
        m = np.atleast_2d(np.asarray(mat, dtype=complex))
        if dim is not None and m.shape == (1, 1) and dim != 1:
            m = m[0, 0] * np.eye(dim)
        return cls(m.shape[0], {ORIGIN: m})

    @classmethod
    def identity(cls, dim: int) -> "MatPoly":
        return cls(dim, {ORIGIN: np.eye(dim)})

    @classmethod
    def monomial(cls, key: Key, mat=None, dim: int = 1) -> "MatPoly":
        if mat is None:
            mat = np.eye(dim)
        m = np.atleast_2d(np.asarray(mat, dtype=complex))
        return cls(m.shape[0], {tuple(key): m})

    @classmethod
    def scalar(cls, terms: Mapping[Key, complex]) -> "MatPoly":
        return cls(1, {k: np.array([[v]]) for k, v in terms.items()})

    # access
    @property
    def terms(self) -> dict[Key, np.ndarray]:
        return dict(self._terms)

    def items(self) -> Iterable[tuple[Key, np.ndarray]]:
        return self._terms.items()

    def keys(self):
        return self._terms.keys()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(np.max(np.abs(m)) <= tol for m in self._terms.values())

    def max_abs(self) -> float:
        return max((float(np.max(np.abs(m))) for m in self._terms.values()), default=0.0)

    def coefficient(self, key: Key) -> np.ndarray:
        m = self._terms.get(tuple(key))
        return np.zeros((self.dim, self.dim), dtype=complex) if m is None else m

    def max_exponent(self, slot: int) -> int:
        return max((k[slot] for k in self._terms), default=0)

    def harmonics(self) -> set[int]:
        return {k[3] for k in self._terms}

    def bandwidth(self) -> int:
        return max((abs(k[3]) for k in self._terms), default=0)

    def is_constant(self) -> bool:
        return all(k == ORIGIN for k in self._terms)

    # algebra
    def _check(self, other: "MatPoly") -> None:
        if self.dim != other.dim and 1 not in (self.dim, other.dim):
            raise ValueError(f"matrix dimensions {self.dim} and {other.dim} differ")

    def _lift(self, dim: int) -> "MatPoly":
        if self.dim == dim:
            return self
        if self.dim != 1:
            raise ValueError("only scalar tables broadcast")
        return MatPoly(dim, {k: m[0, 0] * np.eye(dim) for k, m in self._terms.items()})

    def __add__(self, other: "MatPoly") -> "MatPoly":
        self._check(other)
        d = max(self.dim, other.dim)
        a, b = self._lift(d), other._lift(d)
        out = dict(a._terms)
        for k, m in b._terms.items():
            out[k] = out[k] + m if k in out else m
        return MatPoly(d, out)

    def __neg__(self) -> "MatPoly":
        return MatPoly(self.dim, {k: -m for k, m in self._terms.items()})

    def __sub__(self, other: "MatPoly") -> "MatPoly":
        return self + (-other)

    def scale(self, c: complex) -> "MatPoly":
        return MatPoly(self.dim, {k: c * m for k, m in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, MatPoly):
            return self.matmul(other)
        return self.scale(other)

    __rmul__ = scale

    def matmul(self, other: "MatPoly") -> "MatPoly":
        """Pointwise product ``self(p) @ other(p)``; scalar tables broadcast."""
        self._check(other)
        d = max(self.dim, other.dim)
        out: dict[Key, np.ndarray] = {}
        for ka, ma in self._terms.items():
            for kb, mb in other._terms.items():
                k = _add_keys(ka, kb)
                if ma.shape[0] == 1 or mb.shape[0] == 1:
                    prod = ma * mb
                else:
                    prod = ma @ mb
                out[k] = out[k] + prod if k in out else prod
        return MatPoly(d, out)

    def transpose_block(self, fn) -> "MatPoly":
        return MatPoly(self.dim, {k: fn(m) for k, m in self._terms.items()})

    def shift(self, key: Key) -> "MatPoly":
        """Multiply by the basis function ``key``."""
        return MatPoly(self.dim, {_add_keys(k, key): m for k, m in self._terms.items()})

    # derivatives in the coordinate directions
    def d_x0(self) -> "MatPoly":
        return MatPoly(self.dim, {(k[0] - 1, k[1], k[2], k[3]): k[0] * m for k, m in self._terms.items() if k[0]})

    def d_x1(self) -> "MatPoly":
        return MatPoly(self.dim, {(k[0], k[1] - 1, k[2], k[3]): k[1] * m for k, m in self._terms.items() if k[1]})

    def d_y(self) -> "MatPoly":
        return MatPoly(self.dim, {(k[0], k[1], k[2] - 1, k[3]): k[2] * m for k, m in self._terms.items() if k[2]})

    def d_z(self) -> "MatPoly":
        return MatPoly(self.dim, {k: 1j * k[3] * m for k, m in self._terms.items() if k[3]})

    def euler_x1(self) -> "MatPoly":
        """``x1 d/dx1`` applied to the coefficient."""
        return MatPoly(self.dim, {k: k[1] * m for k, m in self._terms.items() if k[1]})

    # restrictions
    def at_x0_zero(self) -> "MatPoly":
        return MatPoly(self.dim, {k: m for k, m in self._terms.items() if k[0] == 0})

    def at_x1_zero(self) -> "MatPoly":
        return MatPoly(self.dim, {k: m for k, m in self._terms.items() if k[1] == 0})

    def divisible_by(self, slot: int, power: int = 1) -> bool:
        return all(k[slot] >= power for k in self._terms)

    def divide_monomial(self, slot: int, power: int) -> "MatPoly":
        if not self.divisible_by(slot, power):
            raise ValueError(f"not divisible by coordinate {slot} to power {power}")
        out = {}
        for k, m in self._terms.items():
            kk = list(k)
            kk[slot] -= power
            out[tuple(kk)] = m
        return MatPoly(self.dim, out)

    def select(self, pred) -> "MatPoly":
        return MatPoly(self.dim, {k: m for k, m in self._terms.items() if pred(k)})

    # comparison
    def equals(self, other: "MatPoly", tol: float = 0.0) -> bool:
        return (self - other).is_zero(tol)

    def distance(self, other: "MatPoly") -> float:
        return (self - other).max_abs()

    def __eq__(self, other) -> bool:
        return isinstance(other, MatPoly) and self.dim == other.dim and self.equals(other)

    def __hash__(self):
        return hash((self.dim, tuple(self._terms)))

    # evaluation
    def __call__(self, x0=0.0, x1=0.0, y=0.0, z=0.0) -> np.ndarray:
        """Evaluate on broadcast coordinate arrays; result shape ``(..., dim, dim)``."""
        x0, x1, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x0, x1, y, z)))
        out = np.zeros(x0.shape + (self.dim, self.dim), dtype=complex)
        for k, m in self._terms.items():
            f = (x0 ** k[0]) * (x1 ** k[1]) * (y ** k[2]) * np.exp(1j * k[3] * z)
            out += f[..., None, None] * m
        return out

    def fourier_blocks(self) -> dict[int, "MatPoly"]:
        """Split by harmonic: ``{n: z-free part multiplying exp(i n z)}``."""
        out: dict[int, dict[Key, np.ndarray]] = {}
        for k, m in self._terms.items():
            out.setdefault(k[3], {})[(k[0], k[1], k[2], 0)] = m
        return {n: MatPoly(self.dim, t) for n, t in sorted(out.items())}

    def __repr__(self) -> str:
        parts = []
        for k, m in self._terms.items():
            c = m[0, 0] if self.dim == 1 else f"M{m.shape}"
            parts.append(f"{c}*x0^{k[0]}x1^{k[1]}y^{k[2]}e^{k[3]}iz")
        return f"MatPoly(dim={self.dim}: " + " + ".join(parts or ["0"]) + ")"


def cos_z(k: int = 1, dim: int = 1) -> MatPoly:
    e = np.eye(dim) * 0.5
    return MatPoly(dim, {(0, 0, 0, k): e, (0, 0, 0, -k): e})


def sin_z(k: int = 1, dim: int = 1) -> MatPoly:
    e = np.eye(dim) * 0.5j
    return MatPoly(dim, {(0, 0, 0, k): -e, (0, 0, 0, -k): e})


def block_diag(*parts: MatPoly) -> MatPoly:
    dims = [p.dim for p in parts]
    d = sum(dims)
    out: dict[Key, np.ndarray] = {}
    off = 0
    for p in parts:
        for k, m in p.items():
            if k not in out:
                out[k] = np.zeros((d, d), dtype=complex)
            out[k][off:off + p.dim, off:off + p.dim] = m
        off += p.dim
    return MatPoly(d, out)

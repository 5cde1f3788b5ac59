"""Seeded random operators and families with exactly representable coefficients.

Matrix entries are Gaussian integers, so products and frame derivatives stay
exact in floating point and algebraic identities can be compared with zero
tolerance.
"""

from __future__ import annotations

import numpy as np

from .coeffs import MatPoly
from .geometry import GeometryKind, GeometrySignature
from .operators import BPhiOperator
from .symbols import IndicialFamily


def gaussian_integer_matrix(rng: np.random.Generator, d: int, bound: int = 3) -> np.ndarray:
    re = rng.integers(-bound, bound + 1, size=(d, d))
    im = rng.integers(-bound, bound + 1, size=(d, d))
    return re + 1j * im


def random_coefficient(rng: np.random.Generator, geometry: GeometrySignature, n_terms: int = 2,
                       max_deg: int = 2) -> MatPoly:
    kind = geometry.kind
    d = geometry.matrix_dim
    out: dict = {}
    for _ in range(n_terms):
        p0 = int(rng.integers(0, max_deg + 1)) if kind == GeometryKind.CORNER else 0
        p1 = int(rng.integers(0, max_deg + 1))
        py = int(rng.integers(0, 2)) if kind == GeometryKind.CORNER else 0
        n = int(rng.integers(-1, 2)) if kind != GeometryKind.B_INTERVAL else 0
        key = (p0, p1, py, n)
        m = gaussian_integer_matrix(rng, d)
        out[key] = out[key] + m if key in out else m
    return MatPoly(d, out)


def _allowed_indices(kind: GeometryKind, order: int) -> list[tuple[int, int, int, int]]:
    out = []
    for m0 in range(order + 1):
        for m1 in range(order + 1):
            for mv in range(order + 1):
                for mw in range(order + 1):
                    if m0 + m1 + mv + mw > order:
                        continue
                    if kind != GeometryKind.CORNER and (m0 or mv):
                        continue
                    if kind == GeometryKind.B_INTERVAL and mw:
                        continue
                    out.append((m0, m1, mv, mw))
    return out


def random_operator(rng: np.random.Generator, geometry: GeometrySignature, order: int = 2,
                    n_terms: int = 3) -> BPhiOperator:
    """Random operator of order at most ``order``; always has a top-order term."""
    idx = _allowed_indices(geometry.kind, order)
    top = [m for m in idx if sum(m) == order]
    chosen = [top[int(rng.integers(len(top)))]]
    for _ in range(n_terms - 1):
        chosen.append(idx[int(rng.integers(len(idx)))])
    terms: dict = {}
    for m in chosen:
        f = random_coefficient(rng, geometry)
        terms[m] = terms[m] + f if m in terms else f
    return BPhiOperator(geometry, terms)


def random_banded_family(rng: np.random.Generator, n_modes: int, d: int = 1, degree: int = 2,
                         bandwidth: int = 1, scale: float = 1.0) -> IndicialFamily:
    """Random polynomial family ``sum A_k lambda^k`` with mode-banded coefficients.

    The leading coefficient is the identity plus a small banded perturbation so
    the family has exactly ``degree * size`` finite roots.
    """
    size = (2 * n_modes + 1) * d
    mask = np.zeros((size, size), dtype=bool)
    modes = np.repeat(np.arange(size) // d, 1)
    for i in range(size):
        for j in range(size):
            mask[i, j] = abs(modes[i] - modes[j]) <= bandwidth
    coeffs = []
    for k in range(degree + 1):
        a = (rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))) * scale
        a = np.where(mask, a, 0)
        if k == degree:
            a = np.eye(size) + 0.2 * a
        elif k == 0:
            a = a + np.diag(1j * (modes - n_modes).astype(float))
        coeffs.append(a)
    return IndicialFamily(coeffs, n_modes, d)

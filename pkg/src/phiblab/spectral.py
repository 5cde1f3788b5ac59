"""Contour integrals and root location for polynomial matrix families.

Two independent routes count the roots of ``det F`` inside a rectangle:
the logarithmic residue ``(1/2 pi i) tr  oint F^-1 F' d lambda`` by adaptive
composite Gauss-Legendre quadrature, and the winding of the phase of
``det F`` along the boundary. Roots are located by recursive subdivision
using the winding, then pinned down by contour moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NearSingularPath,
    NonInteger,
    SplitFailure,
    SupportViolation,
    WindingInconsistent,
)
from .operators import BPhiOperator, SampleGrid, apply
from .symbols import IndicialFamily, normal1, real_line_min_singular

PATH_SMIN = 1e-8
SNAP_TOL = 1e-6
AGREE_TOL = 1e-9
LEAF_DIAMETER = 1e-8
PATH_MARGIN = 1e-6


@dataclass(frozen=True)
class Contour:
    """Counterclockwise rectangle ``[re_min, re_max] x [im_min, im_max]``."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    nodes_per_edge: int = 64
    rule: int = 16

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("contour corners must be ordered")

    @property
    def corners(self) -> list[complex]:
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def edges(self) -> list[tuple[complex, complex]]:
        c = self.corners
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]

    @property
    def perimeter(self) -> float:
        return 2 * (self.re_max - self.re_min) + 2 * (self.im_max - self.im_min)

    @property
    def diameter(self) -> float:
        return math.hypot(self.re_max - self.re_min, self.im_max - self.im_min)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def contains(self, lam: complex) -> bool:
        return self.re_min < lam.real < self.re_max and self.im_min < lam.imag < self.im_max

    def with_nodes(self, n: int) -> "Contour":
        return Contour(self.re_min, self.re_max, self.im_min, self.im_max, n, self.rule)

    def split(self, frac: float) -> tuple["Contour", "Contour"]:
        w = self.re_max - self.re_min
        h = self.im_max - self.im_min
        n = self.nodes_per_edge
        if w >= h:
            x = self.re_min + frac * w
            return (Contour(self.re_min, x, self.im_min, self.im_max, n, self.rule),
                    Contour(x, self.re_max, self.im_min, self.im_max, n, self.rule))
        y = self.im_min + frac * h
        return (Contour(self.re_min, self.re_max, self.im_min, y, n, self.rule),
                Contour(self.re_min, self.re_max, y, self.im_max, n, self.rule))


def strip_contour(beta1: float, beta2: float, half_width: float, nodes_per_edge: int = 64) -> Contour:
    """Rectangle enclosing ``beta1 < -Im lambda < beta2`` for ``|Re lambda| < half_width``."""
    return Contour(-half_width, half_width, -beta2, -beta1, nodes_per_edge)


def default_half_width(F: IndicialFamily) -> float:
    return 2.0 * F.cauchy_bound() + 1.0


def family_derivative(F: IndicialFamily) -> IndicialFamily:
    """Exact term-by-term derivative in ``lambda``."""
    return F.derivative()


# ---------------------------------------------------------------------------
# logarithmic residue
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogResidue:
    value: int
    raw: complex
    nodes: int
    min_singular: float
    refinements: int

    def to_dict(self) -> dict:
        return {"value": self.value, "raw": [self.raw.real, self.raw.imag], "nodes": self.nodes,
                "min_singular": self.min_singular, "refinements": self.refinements}


def _log_derivative(F: IndicialFamily, Fp: IndicialFamily, lam: np.ndarray, power: int = 0):
    A = F(lam)
    s = np.linalg.svd(A, compute_uv=False)[:, -1]
    X = np.linalg.solve(A, Fp(lam))
    tr = np.trace(X, axis1=-2, axis2=-1)
    if power:
        tr = tr * lam ** power
    return tr, s


def _adaptive_integral(F: IndicialFamily, c: Contour, powers=(0,), tol: float = 1e-11):
    """Adaptive composite Gauss-Legendre for ``oint lambda^p tr(F^-1 F')``, all ``p`` in ``powers``."""
    Fp = F.derivative()
    x, w = np.polynomial.legendre.leggauss(c.rule)
    per_edge = max(1, c.nodes_per_edge // c.rule)
    panels = []
    for a, b in c.edges():
        for i in range(per_edge):
            panels.append((a + (b - a) * i / per_edge, a + (b - a) * (i + 1) / per_edge))
    total = np.zeros(len(powers), dtype=complex)
    smin = np.inf
    nodes = 0
    perim = c.perimeter

    def rule_on(segs):
        a = np.array([s[0] for s in segs])
        b = np.array([s[1] for s in segs])
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        lam = mid[:, None] + half[:, None] * x[None, :]
        vals = []
        tr, s = _log_derivative(F, Fp, lam.ravel())
        tr = tr.reshape(lam.shape)
        for p in powers:
            vals.append(np.sum(w[None, :] * tr * lam ** p, axis=1) * half)
        return np.stack(vals, axis=1), float(np.min(s)), lam.size

    pending = panels
    depth = 0
    while pending:
        depth += 1
        whole, s0, n0 = rule_on(pending)
        halves = []
        for a, b in pending:
            m = 0.5 * (a + b)
            halves += [(a, m), (m, b)]
        parts, s1, n1 = rule_on(halves)
        smin = min(smin, s0, s1)
        nodes += n0 + n1
        if smin <= PATH_SMIN:
            raise NearSingularPath("family nearly singular on the contour", min_singular=smin)
        split = parts[0::2] + parts[1::2]
        nxt = []
        for i, (a, b) in enumerate(pending):
            err = np.max(np.abs(whole[i] - split[i]))
            noise = 1e-13 * max(1.0, float(np.max(np.abs(split[i]))))
            if err <= max(tol * abs(b - a) / perim, noise) or depth > 40:
                total += split[i]
            else:
                nxt += [halves[2 * i], halves[2 * i + 1]]
        pending = nxt
    return total / (2j * np.pi), smin, nodes


def log_residue(F: IndicialFamily, c: Contour) -> LogResidue:
    """Integer root count inside ``c`` from the logarithmic residue.

    The integral is recomputed with doubled ``nodes_per_edge`` until two
    consecutive values agree to 1e-9, then snapped to the nearest integer.
    """
    raw_prev, smin, nodes = _adaptive_integral(F, c)
    raw_prev = raw_prev[0]
    n = c.nodes_per_edge
    refinements = 0
    while True:
        n *= 2
        refinements += 1
        raw, s, k = _adaptive_integral(F, c.with_nodes(n))
        raw = raw[0]
        smin, nodes = min(smin, s), nodes + k
        if abs(raw - raw_prev) <= AGREE_TOL or refinements >= 6:
            break
        raw_prev = raw
    value = int(round(raw.real))
    if abs(raw - value) >= SNAP_TOL or abs(raw - raw_prev) > AGREE_TOL:
        raise NonInteger("log residue does not snap to an integer", raw=raw)
    return LogResidue(value, complex(raw), nodes, smin, refinements)


# ---------------------------------------------------------------------------
# winding number of det F
# ---------------------------------------------------------------------------

def _phase(F: IndicialFamily, Fp: IndicialFamily, lam: np.ndarray):
    A = F(lam)
    sign, logabs = np.linalg.slogdet(A)
    if np.any(~np.isfinite(logabs)) or np.any(sign == 0):
        raise NearSingularPath("det F vanishes on the path")
    g = np.trace(np.linalg.solve(A, Fp(lam)), axis1=-2, axis2=-1)
    return np.angle(sign), logabs, g


def winding_number(F: IndicialFamily, c: Contour, samples: int = 32, max_nodes: int = 1 << 16,
                   record: bool = False):
    """Winding of ``det F`` around ``c`` by phase unwrapping with adaptive insertion.

    Nodes are inserted wherever a consecutive phase jump exceeds pi/2, and
    wherever the secant prediction from the exact log-derivative
    ``tr(F^-1 F')`` disagrees with the observed increment, so roots close to
    the path cannot alias a full turn between two samples.
    Returns ``(winding, phase_samples)``; samples are recorded only on request.
    """
    Fp = F.derivative()
    total = 0.0
    trace = []
    for a, b in c.edges():
        s = np.linspace(0.0, 1.0, samples + 1)
        ph, la, g = _phase(F, Fp, a + (b - a) * s)
        while True:
            dl = np.diff(s) * (b - a)
            jumps = np.angle(np.exp(1j * np.diff(ph)))
            pred = 0.5 * (g[1:] + g[:-1]) * dl
            bad = np.nonzero((np.abs(jumps) > np.pi / 2)
                             | (np.abs(pred) > 1.0)
                             | (np.abs(np.diff(la)) > 1.0)
                             | (np.abs(pred.imag - jumps) > 0.25))[0]
            if bad.size == 0:
                break
            if s.size > max_nodes:
                raise NearSingularPath("phase unwrapping did not resolve", nodes=int(s.size))
            if np.min(np.diff(s)[bad]) < 1e-15:
                raise NearSingularPath("phase unwrapping hit the resolution floor")
            mids = 0.5 * (s[bad] + s[bad + 1])
            pm, lm, gm = _phase(F, Fp, a + (b - a) * mids)
            s = np.insert(s, bad + 1, mids)
            ph = np.insert(ph, bad + 1, pm)
            la = np.insert(la, bad + 1, lm)
            g = np.insert(g, bad + 1, gm)
        total += float(np.sum(np.angle(np.exp(1j * np.diff(ph)))))
        if record:
            trace.extend(zip((a + (b - a) * s[:-1]).tolist(), ph[:-1].tolist()))
    w = total / (2 * np.pi)
    if abs(w - round(w)) > 1e-6:
        raise WindingInconsistent("phase total is not a multiple of 2 pi", winding=w)
    return int(round(w)), trace


# ---------------------------------------------------------------------------
# root location
# ---------------------------------------------------------------------------

@dataclass
class SpectrumReport:
    """Roots of ``det F`` in ``a < -Im lambda < b``, ``|Re lambda| < re_window``."""

    strip: tuple[float, float]
    re_window: float
    roots: list[tuple[complex, int]]
    total_winding: int
    depth: int
    shifted: bool = False
    effective_strip: tuple[float, float] | None = None
    phase_samples: list = field(default_factory=list)

    @property
    def neg_imag(self) -> list[tuple[float, int]]:
        return [(-r.imag, m) for r, m in self.roots]

    @property
    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.roots)

    def to_dict(self) -> dict:
        return {
            "strip": list(self.strip),
            "effective_strip": list(self.effective_strip or self.strip),
            "re_window": self.re_window,
            "roots": [{"re": r.real, "im": r.imag, "multiplicity": m} for r, m in self.roots],
            "total_winding": self.total_winding,
            "depth": self.depth,
            "shifted": self.shifted,
        }

    def csv_rows(self) -> list[tuple[float, float, int]]:
        return [(r.real, r.imag, m) for r, m in self.roots]


def _line_min_singular(F: IndicialFamily, im: float) -> tuple[float, float]:
    info = real_line_min_singular(F.shifted(1j * im), 256)
    return info["smin"], info["smax"]


def locate_spectrum(F: IndicialFamily, strip: tuple[float, float], re_window: float | None = None,
                    leaf: float = LEAF_DIAMETER, max_depth: int = 400, record_phase: bool = False) -> SpectrumReport:
    """Argument-principle subdivision of the strip ``a < -Im lambda < b``."""
    a, b = float(strip[0]), float(strip[1])
    if not a < b:
        raise ValueError("strip needs a < b")
    W = re_window if re_window is not None else default_half_width(F)
    lo, hi = a, b
    shifted = False
    for _ in range(10):
        moved = False
        for edge in ("top", "bottom"):
            im = -lo if edge == "top" else -hi
            smin, smax = _line_min_singular(F, im)
            if smin <= 1e-8 * max(smax, 1.0):
                moved = shifted = True
                if edge == "top":
                    lo += PATH_MARGIN
                else:
                    hi -= PATH_MARGIN
        if not moved:
            break
    root_rect = Contour(-W, W, -hi, -lo, 32)
    total, phase = winding_number(F, root_rect, record=record_phase)
    roots: list[tuple[complex, int]] = []
    stack = [(root_rect, total, 0)]
    depth_seen = 0
    splits = 0
    while stack:
        rect, w, depth = stack.pop()
        depth_seen = max(depth_seen, depth)
        if w == 0:
            continue
        if rect.diameter < leaf:
            roots.append((rect.center, w))
            continue
        if rect.diameter < 0.5:
            hit = _isolate_by_moments(F, rect, w, leaf)
            if hit is not None:
                roots.append(hit)
                continue
        if depth > max_depth or splits > 50 * max_depth:
            raise SplitFailure("subdivision did not isolate the roots", depth=depth)
        children = None
        for frac in (0.5 + 0.0123 * (-1) ** depth, 0.4371, 0.5629, 0.3, 0.7):
            try:
                left, right = rect.split(frac)
                wl, _ = winding_number(F, left)
                wr, _ = winding_number(F, right)
                children = ((left, wl), (right, wr))
                break
            except NearSingularPath:
                continue
        if children is None:
            raise SplitFailure("no admissible split line", depth=depth)
        splits += 1
        if children[0][1] + children[1][1] != w:
            raise WindingInconsistent("child windings do not sum to the parent",
                                      parent=w, children=[children[0][1], children[1][1]])
        for r, cw in children:
            stack.append((r, cw, depth + 1))
    roots.sort(key=lambda rm: (-rm[0].imag, rm[0].real))
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if abs(roots[i][0] - roots[j][0]) <= leaf:
                raise SplitFailure("roots closer than the resolution floor")
    return SpectrumReport((a, b), W, roots, total, depth_seen, shifted, (lo, hi), phase)


def _isolate_by_moments(F: IndicialFamily, rect: Contour, w: int, leaf: float):
    """Mean of the enclosed roots from contour moments, confirmed by a leaf-sized winding."""
    try:
        mom, _, _ = _adaptive_integral(F, rect.with_nodes(32), powers=(0, 1))
    except NearSingularPath:
        return None
    if abs(mom[0] - w) > 1e-3:
        return None
    mu = mom[1] / w
    if not rect.contains(mu):
        return None
    # a w-fold root is only resolved to about eps^(1/w), so the confirming
    # box grows by decades until its winding is defined
    half = 0.35 * leaf
    while half < 0.05 * rect.diameter:
        tiny = Contour(mu.real - half, mu.real + half, mu.imag - half, mu.imag + half, 8)
        try:
            wt, _ = winding_number(F, tiny, samples=8)
        except NearSingularPath:
            half *= 10
            continue
        return (complex(mu), w) if wt == w else None
    return None


# ---------------------------------------------------------------------------
# Mellin transform check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MellinGrid:
    """Log grid ``t in [-T, 0]`` with ``M`` nodes, ``nz`` fibre nodes, real ``lambdas``."""

    T: float = 20.0
    M: int = 1024
    lambdas: tuple[float, ...] = tuple(np.linspace(-4.0, 4.0, 33))
    nz: int = 16

    def sample_grid(self, kind) -> SampleGrid:
        from .geometry import GeometryKind
        return SampleGrid(self.T, self.M, self.nz if GeometryKind(kind) != GeometryKind.B_INTERVAL else 1)

    def weights(self) -> np.ndarray:
        h = self.T / (self.M - 1)
        w = np.full(self.M, h)
        w[0] = w[-1] = 0.5 * h
        return w


@dataclass(frozen=True)
class MellinResult:
    deviation: float
    T: float
    M: int
    n_lambdas: int

    def to_dict(self) -> dict:
        return {"deviation": self.deviation, "T": self.T, "M": self.M, "n_lambdas": self.n_lambdas}


def mellin_transform(u: np.ndarray, grid: MellinGrid) -> np.ndarray:
    """``u^(lambda) = int exp(-i lambda t) u(t) dt`` by the trapezoid rule along axis 0."""
    t = np.linspace(-grid.T, 0.0, grid.M)
    lam = np.asarray(grid.lambdas, dtype=float)
    kern = np.exp(-1j * lam[:, None] * t[None, :]) * grid.weights()[None, :]
    return np.tensordot(kern, u, axes=(1, 0))


def mellin_check(B: BPhiOperator, u: np.ndarray, grid: MellinGrid) -> MellinResult:
    """Compare the transform of ``B u`` with the indicial family of ``B`` applied to ``u^``."""
    from .geometry import GeometryKind
    if not B.is_t_invariant():
        raise ValueError("the Mellin identity needs t-independent coefficients")
    if B.kind == GeometryKind.CORNER:
        raise ValueError("mellin_check runs on the b geometries")
    u = np.asarray(u, dtype=complex)
    edge = np.concatenate([u[:3].ravel(), u[-3:].ravel()])
    if np.max(np.abs(edge)) > 1e-12:
        raise SupportViolation("test section has mass near the grid ends", edge=float(np.max(np.abs(edge))))
    sg = grid.sample_grid(B.kind)
    Bu = apply(B, u, sg)
    lhs = mellin_transform(Bu, grid)
    uh = mellin_transform(u, grid)
    d = B.dim
    if B.kind == GeometryKind.B_INTERVAL:
        F = normal1(B)
        A = F(np.asarray(grid.lambdas))
        rhs = np.einsum("lij,lj->li", A, uh)
        dev = float(np.max(np.abs(lhs - rhs)))
    else:
        nz = grid.nz
        N = (nz - 1) // 2
        F = normal1(B, N)
        A = F(np.asarray(grid.lambdas))
        modes = np.fft.fft(uh, axis=1) / nz
        lhs_modes = np.fft.fft(lhs, axis=1) / nz
        idx = np.arange(-N, N + 1) % nz
        vec = modes[:, idx, :].reshape(len(grid.lambdas), -1)
        rhs = np.einsum("lij,lj->li", A, vec).reshape(len(grid.lambdas), 2 * N + 1, d)
        dev = float(np.max(np.abs(lhs_modes[:, idx, :] - rhs)))
    return MellinResult(dev, grid.T, grid.M, len(grid.lambdas))

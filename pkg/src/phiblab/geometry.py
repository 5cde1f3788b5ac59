"""Model geometries, the blown-up groupoid chart and frame changes.

Coordinates on the corner model are ``(x0, x1, y, z)``: ``x0`` defines the
fibred-cusp face, ``x1`` the b face, ``y`` is a one-dimensional base
coordinate and ``z`` is the circle fibre. An arrow of the groupoid is
written ``(u0, u1, v, w)`` in the chart

    x0' = x0 - x0**2 u0,  x1' = x1 - x0 x1 u1,  y' = y - x0 v,  z' = z - w.

The two b geometries use the same data type with the x0 scaling frozen to
one and ``u0 = v = 0``, which gives the multiplicative b-groupoid in ``x1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

import numpy as np

from .coeffs import MatPoly
from .errors import ClassOverflow, ComposabilityViolation, PatchExit

COMPOSABLE_TOL = 1e-12
PATCH_MARGIN = 1e-14


class GeometryKind(str, Enum):
    B_INTERVAL = "B_INTERVAL"
    B_CYLINDER = "B_CYLINDER"
    CORNER = "CORNER"


@dataclass(frozen=True)
class GeometrySignature:
    """Which model space, fibre truncation ``N`` and bundle rank."""

    kind: GeometryKind
    fiber_modes: int = 0
    matrix_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", GeometryKind(self.kind))
        if self.matrix_dim < 1:
            raise ValueError("matrix_dim must be >= 1")
        if self.fiber_modes < 0:
            raise ValueError("fiber_modes must be >= 0")
        if (self.fiber_modes == 0) != (self.kind == GeometryKind.B_INTERVAL):
            raise ValueError("fiber_modes = 0 exactly for B_INTERVAL")

    @property
    def has_fiber(self) -> bool:
        return self.kind != GeometryKind.B_INTERVAL

    @property
    def has_phi_face(self) -> bool:
        return self.kind == GeometryKind.CORNER

    def with_dim(self, matrix_dim: int) -> "GeometrySignature":
        return GeometrySignature(self.kind, self.fiber_modes, matrix_dim)

    def with_modes(self, fiber_modes: int) -> "GeometrySignature":
        return GeometrySignature(self.kind, fiber_modes, self.matrix_dim)


def b_interval(matrix_dim: int = 1) -> GeometrySignature:
    return GeometrySignature(GeometryKind.B_INTERVAL, 0, matrix_dim)


def b_cylinder(fiber_modes: int = 6, matrix_dim: int = 1) -> GeometrySignature:
    return GeometrySignature(GeometryKind.B_CYLINDER, fiber_modes, matrix_dim)


def corner(fiber_modes: int = 4, matrix_dim: int = 1) -> GeometrySignature:
    return GeometrySignature(GeometryKind.CORNER, fiber_modes, matrix_dim)


# ---------------------------------------------------------------------------
# groupoid
# ---------------------------------------------------------------------------

def _wrap(a: float) -> float:
    """Angle difference folded into (-pi, pi]."""
    return a - 2 * math.pi * math.ceil((a - math.pi) / (2 * math.pi))


@dataclass(frozen=True)
class GroupoidElement:
    """A point of the blown-up double space: base point and arrow."""

    base: tuple[float, float, float, float]
    arrow: tuple[float, float, float, float]
    kind: GeometryKind = GeometryKind.CORNER

    def __post_init__(self):
        base = tuple(float(v) for v in self.base)
        if len(base) == 3:
            base = (base[0], base[1], 0.0, base[2])
        arrow = tuple(float(v) for v in self.arrow)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "arrow", arrow)
        object.__setattr__(self, "kind", GeometryKind(self.kind))
        if len(base) != 4 or len(arrow) != 4:
            raise ValueError("base needs (x0, x1, [y,] z) and arrow (u0, u1, v, w)")
        if base[0] < 0 or base[1] < 0:
            raise ValueError("x0 and x1 must be nonnegative")
        if self.kind != GeometryKind.CORNER:
            if arrow[0] != 0.0 or arrow[2] != 0.0:
                raise ValueError("b geometries carry no u0 or v component")
            if self.kind == GeometryKind.B_INTERVAL and arrow[3] != 0.0:
                raise ValueError("B_INTERVAL carries no w component")

    @property
    def ratios(self) -> tuple[float, float]:
        """Closed forms of ``x0'/x0`` and ``x1'/x1``; never computed by division."""
        x0 = self.base[0]
        u0, u1 = self.arrow[0], self.arrow[1]
        if self.kind == GeometryKind.CORNER:
            return 1.0 - x0 * u0, 1.0 - x0 * u1
        return 1.0, 1.0 - u1

    def in_patch(self) -> bool:
        x0 = self.base[0]
        u0, u1, v, _ = self.arrow
        if self.kind == GeometryKind.CORNER:
            return x0 * math.sqrt(1.0 + u0 * u0 + u1 * u1 + v * v) < 1.0 - PATCH_MARGIN
        return self.ratios[1] > PATCH_MARGIN

    def is_unit(self, tol: float = 0.0) -> bool:
        return max(abs(a) for a in self.arrow) <= tol


def unit(base, kind: GeometryKind = GeometryKind.CORNER) -> GroupoidElement:
    return GroupoidElement(tuple(base), (0.0, 0.0, 0.0, 0.0), kind)


def _require_patch(g: GroupoidElement) -> None:
    if not g.in_patch():
        raise PatchExit("element outside the coordinate patch", base=g.base, arrow=g.arrow)


def target(g: GroupoidElement) -> tuple[float, float, float, float]:
    """Target base point ``(x0', x1', y', z')`` of an arrow."""
    _require_patch(g)
    x0, x1, y, z = g.base
    _, _, v, w = g.arrow
    r0, r1 = g.ratios
    if g.kind == GeometryKind.CORNER:
        return (x0 * r0, x1 * r1, y - x0 * v, z - w)
    return (x0, x1 * r1, y, z - w)


def _check_composable(g: GroupoidElement, h: GroupoidElement) -> None:
    if g.kind != h.kind:
        raise ComposabilityViolation("elements live in different geometries")
    tg = target(g)
    gaps = [abs(tg[i] - h.base[i]) for i in range(3)]
    gaps.append(abs(_wrap(tg[3] - h.base[3])))
    if max(gaps) > COMPOSABLE_TOL:
        raise ComposabilityViolation("target(g) differs from base(h)", gap=max(gaps))


def compose(g: GroupoidElement, h: GroupoidElement) -> GroupoidElement:
    """Product ``g h`` (first ``g``, then ``h`` from the target of ``g``)."""
    _require_patch(g)
    _require_patch(h)
    _check_composable(g, h)
    u0, u1, v, w = g.arrow
    a0, a1, av, aw = h.arrow
    r0, r1 = g.ratios
    arrow = (u0 + r0 * r0 * a0, u1 + r0 * r1 * a1, v + r0 * av, w + aw)
    out = GroupoidElement(g.base, arrow, g.kind)
    _require_patch(out)
    return out


def inverse(g: GroupoidElement) -> GroupoidElement:
    """The arrow from ``target(g)`` back to ``base(g)``."""
    tg = target(g)
    u0, u1, v, w = g.arrow
    r0, r1 = g.ratios
    arrow = (-u0 / (r0 * r0), -u1 / (r0 * r1), -v / r0, -w)
    out = GroupoidElement(tg, arrow, g.kind)
    _require_patch(out)
    return out


def arrow_distance(g: GroupoidElement, h: GroupoidElement) -> float:
    """Componentwise max distance of bases and arrows (z compared mod 2 pi)."""
    d = [abs(g.base[i] - h.base[i]) for i in range(3)]
    d.append(abs(_wrap(g.base[3] - h.base[3])))
    d += [abs(a - b) for a, b in zip(g.arrow, h.arrow)]
    return max(d)


def algebroid_frame_check(sample, kind: GeometryKind = GeometryKind.CORNER, step: float = 1e-5) -> float:
    """Max deviation of the target pushforward of the arrow directions from the frame.

    Central divided differences of :func:`target` along each arrow direction at
    the unit are compared with ``-x0^2 e_x0, -x0 x1 e_x1, -x0 e_y, -e_z`` on the
    corner and with ``-x1 e_x1, -e_z`` on the b geometries.
    """
    kind = GeometryKind(kind)
    base = tuple(float(v) for v in sample)
    if len(base) == 3:
        base = (base[0], base[1], 0.0, base[2])
    x0, x1 = base[0], base[1]
    if kind == GeometryKind.CORNER:
        dirs = {0: (0, -x0 * x0), 1: (1, -x0 * x1), 2: (2, -x0), 3: (3, -1.0)}
    elif kind == GeometryKind.B_CYLINDER:
        dirs = {1: (1, -x1), 3: (3, -1.0)}
    else:
        dirs = {1: (1, -x1)}
    worst = 0.0
    for slot, (coord, coeff) in dirs.items():
        hi = [0.0] * 4
        lo = [0.0] * 4
        hi[slot], lo[slot] = step, -step
        th = np.array(target(GroupoidElement(base, tuple(hi), kind)))
        tl = np.array(target(GroupoidElement(base, tuple(lo), kind)))
        dd = (th - tl) / (2 * step)
        expected = np.zeros(4)
        expected[coord] = coeff
        worst = max(worst, float(np.max(np.abs(dd - expected))))
    return worst


# ---------------------------------------------------------------------------
# frames and boundary-defining-function changes
# ---------------------------------------------------------------------------

Coefficient = Union[MatPoly, Callable[..., np.ndarray]]


def _as_callable(c: Coefficient) -> Callable[..., np.ndarray]:
    if isinstance(c, MatPoly):
        return lambda x0, x1, y, z: c(x0, x1, y, z)[..., 0, 0]
    return c


@dataclass(frozen=True)
class FrameVector:
    """``a0 x0^2 d_x0 + a1 x0 x1 d_x1 + av x0 d_y + aw d_z``.

    Coefficients are scalar :class:`MatPoly` tables when ``exact``; after a
    change that leaves the polynomial class they are callables
    ``f(x0, x1, y, z)`` sampled on demand, and ``exact`` is False.
    """

    a0: Coefficient
    a1: Coefficient
    av: Coefficient
    aw: Coefficient
    exact: bool = True

    @property
    def coefficients(self) -> tuple[Coefficient, ...]:
        return (self.a0, self.a1, self.av, self.aw)

    def evaluate(self, x0, x1, y, z) -> np.ndarray:
        """Coefficient values stacked on a leading axis of length 4."""
        return np.stack([np.broadcast_to(_as_callable(c)(x0, x1, y, z), np.broadcast(x0, x1, y, z).shape)
                         for c in self.coefficients])


def frame_vector(a0=0, a1=0, av=0, aw=0) -> FrameVector:
    """Frame vector with coefficients given as scalar tables or constants."""
    def lift(c):
        return c if isinstance(c, MatPoly) else MatPoly.const(c)
    return FrameVector(lift(a0), lift(a1), lift(av), lift(aw))


@dataclass(frozen=True)
class TrigPoly:
    """Real trigonometric polynomial ``sum c_k exp(i k y)`` with ``c_-k = conj(c_k)``."""

    coeffs: tuple[tuple[int, complex], ...]

    @classmethod
    def from_real(cls, c0: float, cos=(), sin=()) -> "TrigPoly":
        table: dict[int, complex] = {0: complex(c0)}
        for k, a in enumerate(cos, start=1):
            table[k] = table.get(k, 0) + a / 2
            table[-k] = table.get(-k, 0) + a / 2
        for k, b in enumerate(sin, start=1):
            table[k] = table.get(k, 0) - 1j * b / 2
            table[-k] = table.get(-k, 0) + 1j * b / 2
        return cls(tuple(sorted((k, v) for k, v in table.items() if v != 0)))

    @classmethod
    def constant(cls, c: float) -> "TrigPoly":
        return cls(((0, complex(c)),))

    def is_constant(self) -> bool:
        return all(k == 0 for k, _ in self.coeffs)

    def value(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=complex)
        for k, c in self.coeffs:
            out += c * np.exp(1j * k * y)
        return out.real

    def deriv(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=complex)
        for k, c in self.coeffs:
            out += 1j * k * c * np.exp(1j * k * y)
        return out.real

    def __mul__(self, other: "TrigPoly") -> "TrigPoly":
        table: dict[int, complex] = {}
        for ka, ca in self.coeffs:
            for kb, cb in other.coeffs:
                table[ka + kb] = table.get(ka + kb, 0) + ca * cb
        return TrigPoly(tuple(sorted((k, v) for k, v in table.items() if v != 0)))


@dataclass(frozen=True)
class BdfChange:
    """New defining function ``x0~ = alpha x0`` with ``alpha = 1/gamma`` on the face.

    ``gamma`` is a positive trigonometric polynomial in ``y``; the optional
    ``alpha_interior`` is a scalar table in ``(x0, x1, y)`` divisible by ``x0``.
    ``inverted`` swaps to the inverse change ``x0 = (1/alpha) x0~``.
    """

    gamma: TrigPoly = field(default_factory=lambda: TrigPoly.constant(1.0))
    alpha_interior: MatPoly | None = None
    inverted: bool = False

    def __post_init__(self):
        if isinstance(self.gamma, (int, float)):
            object.__setattr__(self, "gamma", TrigPoly.constant(float(self.gamma)))
        grid = np.linspace(0, 2 * np.pi, 257)
        if np.min(self.gamma.value(grid)) <= 0:
            raise ValueError("gamma must be positive on its sample grid")
        a = self.alpha_interior
        if a is not None:
            if a.dim != 1 or a.harmonics() - {0}:
                raise ValueError("alpha_interior must be a scalar z-independent table")
            if not a.divisible_by(0, 1):
                raise ValueError("alpha_interior must vanish at x0 = 0")
            if self.inverted:
                raise ValueError("inverse change is defined without an interior perturbation")

    @property
    def is_constant(self) -> bool:
        return self.gamma.is_constant() and self.alpha_interior is None

    def inverse(self) -> "BdfChange":
        if self.alpha_interior is not None:
            raise ClassOverflow("inverse of a change with interior perturbation is not tabulated")
        return BdfChange(self.gamma, None, not self.inverted)

    def alpha(self, x0, x1, y):
        """``alpha`` and its partials ``(d_x0, d_x1, d_y)`` at the given points."""
        g, dg = self.gamma.value(y), self.gamma.deriv(y)
        if self.inverted:
            a, ay = g, dg
        else:
            a, ay = 1.0 / g, -dg / (g * g)
        a0 = np.zeros_like(a)
        a1 = np.zeros_like(a)
        if self.alpha_interior is not None:
            p = self.alpha_interior
            ev = lambda q: q(x0, x1, y, 0.0)[..., 0, 0].real
            a = a + ev(p)
            a0 = a0 + ev(p.d_x0())
            a1 = a1 + ev(p.d_x1())
            ay = ay + ev(p.d_y())
        return a, a0, a1, ay


def bdf_transform_frame(v: FrameVector, c: BdfChange) -> FrameVector:
    """Re-express ``v`` in the frame of ``x0~ = alpha x0``.

    The exchange rules are applied term by term:

        x0^2 d_x0    = (1/alpha + x0 alpha_x0/alpha^2) X0~
        x0 x1 d_x1   = (x1 alpha_x1/alpha^2) X0~ + (1/alpha) X1~
        x0 d_y       = (alpha_y/alpha^2) X0~ + (1/alpha) Xv~

    and ``d_z`` is unchanged. For constant ``alpha`` the result stays exact;
    otherwise ``1/alpha`` is not a polynomial and the coefficients fall back
    to sampled callables (``exact`` False).
    """
    if c.is_constant and v.exact:
        a = complex(c.alpha(0.0, 0.0, 0.0)[0])
        inv = 1.0 / a
        return FrameVector(v.a0.scale(inv), v.a1.scale(inv), v.av.scale(inv), v.aw, True)
    f0, f1, fv, fw = (_as_callable(q) for q in v.coefficients)

    def new_a0(x0, x1, y, z):
        a, a_0, a_1, a_y = c.alpha(x0, x1, y)
        return (f0(x0, x1, y, z) * (1 / a + x0 * a_0 / a**2)
                + f1(x0, x1, y, z) * x1 * a_1 / a**2
                + fv(x0, x1, y, z) * a_y / a**2)

    def new_a1(x0, x1, y, z):
        return f1(x0, x1, y, z) / c.alpha(x0, x1, y)[0]

    def new_av(x0, x1, y, z):
        return fv(x0, x1, y, z) / c.alpha(x0, x1, y)[0]

    return FrameVector(new_a0, new_a1, new_av, fw, False)


def g_action_NY(tau, eta, c: BdfChange, y: float = 0.0):
    """Action ``(tau, eta) -> (tau/gamma + dgamma.eta/gamma^2, eta/gamma)`` at ``y``.

    ``eta`` is the ``d_y`` component of the b-covector on the base.
    """
    g = c.gamma.value(y)
    dg = c.gamma.deriv(y)
    return (tau / g + dg * eta / (g * g), eta / g)

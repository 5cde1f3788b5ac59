"""Fredholm index of weighted model operators and its relative-index checks.

The operator ``x1^-beta P x1^beta`` is Fourier-reduced along the fibre and
written, in ``t = log x1`` on ``[-T, 0]``, as a first-order companion system
``U' = C(t) U`` per coupled block. The system is discretized by the box
(midpoint) scheme with the homogeneous condition ``u(0) = 0`` on the
solution components. Kernel and cokernel are the singular vectors below
``svd_threshold * sigma_max`` whose mass sits in the half ``t > -T/2``;
vectors concentrated at the artificial end ``t = -T`` are truncation
artefacts and are not counted.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .catalog import CatalogModel, index_jump_oracle
from .errors import (
    DegenerateLeadingTerm,
    DivisibilityViolation,
    GeometryMismatch,
    NearSingularPath,
    NoAdmissibleWeight,
    UnstableTruncation,
    WeightOnSpectrum,
)
from .geometry import GeometryKind
from .operators import BPhiOperator, conjugate_weight, fourier_decompose
from .spectral import (
    Contour,
    default_half_width,
    locate_spectrum,
    log_residue,
    strip_contour,
    winding_number,
)
from .symbols import IndicialFamily, normal1

WEIGHT_MARGIN = 1e-3
MARGIN_RATIO = 10.0
RESOLVED_DEPTH = 40.0  # distance-to-root times T below which every sample is refined
BOUNDARY_CONDITION = "u(0) = 0 on every solution component"


@dataclass(frozen=True)
class Discretization:
    """Log depth ``T``, ``M`` nodes on ``[-T, 0]``, ``N`` fibre modes, cut factor ``svd_threshold``."""

    T: float = 400.0
    M: int = 128
    N: int = 6
    svd_threshold: float = 1e-8

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.M < 16:
            raise ValueError("M must be at least 16")
        if self.N < 0:
            raise ValueError("N must be nonnegative")
        if not 0 < self.svd_threshold <= 1e-4:
            raise ValueError("svd_threshold must lie in (0, 1e-4]")

    def doubled(self) -> "Discretization":
        return replace(self, T=2 * self.T, M=2 * self.M)

    def doubled_modes(self) -> "Discretization":
        return replace(self, N=2 * self.N)

    def to_dict(self) -> dict:
        return {"T": self.T, "M": self.M, "N": self.N, "svd_threshold": self.svd_threshold}


@dataclass(frozen=True)
class SectionCounts:
    dim_ker: int
    dim_coker: int
    smallest_retained: float
    largest_discarded: float
    sigma_max: float
    sigma_min: float
    blocks: int
    largest_block: int
    largest_matrix: int = 0

    @property
    def margin(self) -> float:
        floor = np.finfo(float).eps * self.sigma_max
        return self.smallest_retained / max(self.largest_discarded, floor)


@dataclass(frozen=True)
class IndexReport:
    beta: float
    dim_ker: int
    dim_coker: int
    margin: float
    stable: bool
    sigma_min: float
    discretization: Discretization
    blocks: int
    largest_block: int
    doubled: SectionCounts | None = None
    largest_matrix: int = 0

    @property
    def index(self) -> int:
        return self.dim_ker - self.dim_coker

    def to_dict(self) -> dict:
        out = {"beta": self.beta, "dim_ker": self.dim_ker, "dim_coker": self.dim_coker,
               "index": self.index, "margin": _finite(self.margin), "stable": self.stable,
               "sigma_min": self.sigma_min, "discretization": self.discretization.to_dict(),
               "blocks": self.blocks, "largest_block": self.largest_block,
               "largest_matrix": self.largest_matrix,
               "boundary_condition": BOUNDARY_CONDITION}
        if self.doubled is not None:
            out["doubled"] = {"dim_ker": self.doubled.dim_ker, "dim_coker": self.doubled.dim_coker,
                              "margin": _finite(self.doubled.margin), "sigma_min": self.doubled.sigma_min}
        return out


def _finite(x: float) -> float:
    return float(min(x, 1e300))


# ---------------------------------------------------------------------------
# finite-section discretization
# ---------------------------------------------------------------------------

def _mode_coefficients(P: BPhiOperator, N: int) -> tuple[int, dict[int, list[tuple[int, np.ndarray]]]]:
    """``{t-order k: [(x1 power, matrix)]}`` of the Fourier-reduced operator."""
    fam = fourier_decompose(P, N) if P.geometry.has_fiber else fourier_decompose(P)
    out: dict[int, list[tuple[int, np.ndarray]]] = {}
    for m, f in fam.terms.items():
        for key, mat in f.items():
            out.setdefault(m[1], []).append((key[1], np.asarray(mat)))
    return fam.size, out


def _coupled_blocks(size: int, coeffs: dict) -> list[np.ndarray]:
    parent = list(range(size))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for lst in coeffs.values():
        for _, mat in lst:
            for i, j in zip(*np.nonzero(mat)):
                ri, rj = find(int(i)), find(int(j))
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(size):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for _, g in sorted(groups.items())]


def _restrict(coeffs: dict, idx: np.ndarray) -> dict[int, list[tuple[int, np.ndarray]]]:
    out = {}
    for k, lst in coeffs.items():
        sub = [(p, mat[np.ix_(idx, idx)]) for p, mat in lst]
        sub = [(p, m) for p, m in sub if np.any(m)]
        if sub:
            out[k] = sub
    return out


def _block_key(block: dict) -> str:
    h = hashlib.sha1()
    for k in sorted(block):
        for p, m in sorted(block[k], key=lambda pm: pm[0]):
            h.update(f"{k}:{p}:{m.shape}".encode())
            h.update(np.ascontiguousarray(m).tobytes())
    return h.hexdigest()


def _evaluate(lst: list[tuple[int, np.ndarray]], t: np.ndarray, s: int) -> np.ndarray:
    out = np.zeros((t.size, s, s), dtype=complex)
    for p, m in lst:
        out += np.exp(p * t)[:, None, None] * m
    return out


def _box_matrix(block: dict, s: int, T: float, M: int):
    """Box-scheme matrix of the companion system plus row/column node times."""
    r = max(block)
    K = r * s
    t = np.linspace(-T, 0.0, M)
    h = t[1] - t[0]
    tm = 0.5 * (t[:-1] + t[1:])
    lead = _evaluate(block[r], tm, s)
    sv = np.linalg.svd(lead, compute_uv=False)
    if np.any(sv[:, -1] <= 1e-12 * np.maximum(sv[:, 0], 1.0)):
        raise DegenerateLeadingTerm("leading t-coefficient is singular on the grid", order=r)
    inv = np.linalg.inv(lead)
    C = np.zeros((M - 1, K, K), dtype=complex)
    for i in range(r - 1):
        C[:, i * s:(i + 1) * s, (i + 1) * s:(i + 2) * s] = np.eye(s)
    for k in range(r):
        if k in block:
            C[:, (r - 1) * s:, k * s:(k + 1) * s] = -inv @ _evaluate(block[k], tm, s)
    # fast rates need a finer mesh: over M steps the box factor of a rate
    # rho decays like exp(-4 M^2 / (T rho)) once h rho >> 1
    rho = float(np.max(np.abs(np.linalg.eigvals(C))))
    need = math.ceil(math.sqrt(RESOLVED_DEPTH / 4 * T * rho))
    if need > M:
        return _box_matrix(block, s, T, need)
    eye = np.eye(K)
    left = -eye / h - 0.5 * C
    right = eye / h - 0.5 * C
    j, a, b = np.meshgrid(np.arange(M - 1), np.arange(K), np.arange(K), indexing="ij")
    rows = np.concatenate([(j * K + a).ravel(), (j * K + a).ravel(), (M - 1) * K + np.arange(s)])
    cols = np.concatenate([(j * K + b).ravel(), ((j + 1) * K + b).ravel(), (M - 1) * K + np.arange(s)])
    vals = np.concatenate([left.ravel(), right.ravel(), np.ones(s)])
    A = np.zeros(((M - 1) * K + s, M * K), dtype=complex if np.any(vals.imag) else float)
    A[rows, cols] += vals if A.dtype == complex else vals.real
    rowt = np.concatenate([np.repeat(tm, K), np.zeros(s)])
    colt = np.repeat(t, K)
    return A, rowt, colt


def _localized(B: np.ndarray, times: np.ndarray, T: float) -> int:
    """Number of directions in span(B) with less than half their mass in ``t < -T/2``."""
    if B.shape[1] == 0:
        return 0
    w = (times < -T / 2).astype(float)
    g = B.conj().T @ (w[:, None] * B)
    return int(np.sum(np.linalg.eigvalsh(g) < 0.5))


@dataclass
class _Block:
    """One decoupled block: its box matrix and, after the cut is known, the small singular data."""

    A: np.ndarray | None = None
    rowt: np.ndarray | None = None
    colt: np.ndarray | None = None
    smax: float = 0.0
    U: np.ndarray | None = None
    sv: np.ndarray | None = None
    V: np.ndarray | None = None
    values: np.ndarray | None = None  # singular values (structural zeros excluded)
    ker: int = 0
    coker: int = 0
    size: int = 0  # larger side of the box matrix


def _phase_one(block: dict, s: int, T: float, M: int) -> _Block:
    if max(block) == 0:
        mats = _evaluate(block[0], np.linspace(-T, 0.0, M), s)
        sv = np.linalg.svd(mats, compute_uv=False)
        if np.any(sv[:, -1] <= 1e-12 * np.maximum(sv[:, 0], 1.0)):
            raise DegenerateLeadingTerm("multiplication block is singular on the grid", order=0)
        return _Block(smax=float(np.max(sv)), values=np.sort(sv.ravel()))
    A, rowt, colt = _box_matrix(block, s, T, M)
    U, sv, Vh = np.linalg.svd(A)
    return _Block(A, rowt, colt, float(sv[0]), U, sv, Vh.conj().T, np.sort(sv), size=max(A.shape))


def _phase_two(b: _Block, cut: float, T: float) -> None:
    """Count the localized singular directions below ``cut``."""
    if b.A is None:
        return
    n_struct = b.A.shape[1] - b.A.shape[0]
    vsel = np.concatenate([b.sv, np.zeros(n_struct)]) < cut
    b.ker = _localized(b.V[:, vsel], b.colt, T)
    b.coker = _localized(b.U[:, b.sv < cut], b.rowt, T)
    b.A = b.U = b.V = None


def _finite_section(P: BPhiOperator, d: Discretization, threads: int = 1) -> SectionCounts:
    size, coeffs = _mode_coefficients(P, d.N)
    groups = _coupled_blocks(size, coeffs)
    restricted = [_restrict(coeffs, idx) for idx in groups]
    keys = [_block_key(b) for b in restricted]
    unique: dict[str, tuple[dict, int]] = {}
    for key, b, idx in zip(keys, restricted, groups):
        if not b:
            raise DegenerateLeadingTerm("a mode block of the operator vanishes identically")
        unique.setdefault(key, (b, idx.size))
    items = list(unique.items())
    run = _mapper(threads)
    blocks = dict(zip(unique, run(lambda kv: _phase_one(kv[1][0], kv[1][1], d.T, d.M), items)))
    smax = max(b.smax for b in blocks.values())
    cut = d.svd_threshold * smax
    list(run(lambda b: _phase_two(b, cut, d.T), list(blocks.values())))
    ker = coker = 0
    retained = math.inf
    discarded = 0.0
    smin = math.inf
    for key in keys:
        b = blocks[key]
        v = b.values
        if v.size:
            smin = min(smin, float(v[0]))
        big, small = v[v >= cut], v[v < cut]
        if big.size:
            retained = min(retained, float(big[0]))
        if small.size:
            discarded = max(discarded, float(small[-1]))
        ker += b.ker
        coker += b.coker
    return SectionCounts(ker, coker, retained, discarded, smax, smin, len(keys),
                         max(idx.size for idx in groups), max(b.size for b in blocks.values()))


def _mapper(threads: int):
    def run(fn, xs):
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                return list(ex.map(fn, xs))
        return [fn(x) for x in xs]
    return run


# ---------------------------------------------------------------------------
# numeric index
# ---------------------------------------------------------------------------

def _require_b_geometry(P: BPhiOperator) -> None:
    if P.kind == GeometryKind.CORNER:
        raise GeometryMismatch("the finite-section index is implemented on the b geometries only")


def indicial_family(P: BPhiOperator, N: int) -> IndicialFamily:
    """Indicial family with ``N`` fibre modes; the interval has none."""
    return normal1(P, N if P.geometry.has_fiber else 0)


def weight_on_spectrum(F: IndicialFamily, beta: float, margin: float = WEIGHT_MARGIN) -> bool:
    """True when some root has ``|-Im lambda - beta| <= margin``."""
    W = default_half_width(F)
    try:
        w, _ = winding_number(F, strip_contour(beta - margin, beta + margin, W))
    except NearSingularPath:
        return True
    return w != 0


def numeric_index(P: BPhiOperator, beta: float, d: Discretization | None = None,
                  check_stability: bool = True, strict: bool = False, check_weight: bool = True,
                  threads: int = 1) -> IndexReport:
    """Finite-section index of ``x1^-beta P x1^beta`` on ``L^2(dt)``.

    Only differences across ``beta`` at a fixed discretization are
    meaningful: the boundary condition at ``t = 0`` adds a constant.
    ``stable`` requires equal counts at ``(2T, 2M)`` and margins above 10;
    with ``strict`` an unstable result raises UNSTABLE_TRUNCATION.
    """
    _require_b_geometry(P)
    d = d or Discretization()
    beta = float(beta)
    if check_weight and weight_on_spectrum(indicial_family(P, d.N), beta):
        raise WeightOnSpectrum(f"beta = {beta} is within {WEIGHT_MARGIN} of the indicial spectrum", beta=beta)
    Pb = conjugate_weight(P, beta)
    base = _finite_section(Pb, d, threads)
    doubled = None
    stable = base.margin > MARGIN_RATIO
    if check_stability:
        doubled = _finite_section(Pb, d.doubled(), threads)
        stable = (stable and doubled.margin > MARGIN_RATIO
                  and (doubled.dim_ker, doubled.dim_coker) == (base.dim_ker, base.dim_coker))
    if strict and not stable:
        raise UnstableTruncation("index counts are not stable under refinement", beta=beta)
    return IndexReport(beta, base.dim_ker, base.dim_coker, base.margin, stable, base.sigma_min, d,
                       base.blocks, base.largest_block, doubled, base.largest_matrix)


@dataclass
class SignatureRow:
    T: float
    M: int
    sigma_min: float
    sigma_gap: float
    margin: float

    def to_dict(self) -> dict:
        return {"T": self.T, "M": self.M, "sigma_min": self.sigma_min, "sigma_gap": _finite(self.sigma_gap),
                "margin": _finite(self.margin)}


def fredholm_signature(P: BPhiOperator, beta: float, d: Discretization | None = None,
                       doublings: int = 2, threads: int = 1) -> list[SignatureRow]:
    """Singular data of the finite section at ``beta`` under repeated ``(T, M)`` doubling.

    ``sigma_gap`` is the smallest singular value above the cut, i.e. the
    bottom of the spectrum once the exponentially small kernel and cokernel
    directions are set aside. Away from the indicial roots it stays put;
    at a root it tends to zero with the truncation. No weight check is made,
    so ``beta`` may sit arbitrarily close to a root.
    """
    _require_b_geometry(P)
    d = d or Discretization()
    Pb = conjugate_weight(P, float(beta))
    rows = []
    for _ in range(doublings + 1):
        sc = _finite_section(Pb, d, threads)
        rows.append(SignatureRow(d.T, d.M, sc.sigma_min, sc.smallest_retained, sc.margin))
        d = d.doubled()
    return rows


# ---------------------------------------------------------------------------
# relative index certificate
# ---------------------------------------------------------------------------

class Status(str, Enum):
    MATCH = "MATCH"
    MISMATCH = "MISMATCH"
    UNSTABLE = "UNSTABLE"


@dataclass
class IndexCertificate:
    beta1: float
    beta2: float
    lhs_numeric: int
    rhs_contour: int
    oracle: int | None
    status: Status
    reports: tuple[IndexReport, IndexReport]
    modes_check: dict = field(default_factory=dict)
    contour: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"beta1": self.beta1, "beta2": self.beta2, "lhs_numeric": self.lhs_numeric,
                "rhs_contour": self.rhs_contour,
                "oracle": "ABSENT" if self.oracle is None else self.oracle,
                "status": self.status.value, "reports": [r.to_dict() for r in self.reports],
                "modes_check": self.modes_check, "contour": self.contour}


def _contour_count(P: BPhiOperator, beta1: float, beta2: float, N: int, c: Contour | None):
    F = indicial_family(P, N)
    rect = c if c is not None else strip_contour(beta1, beta2, default_half_width(F))
    lr = log_residue(F, rect)
    return lr, rect


def relative_index_verify(P: BPhiOperator, beta1: float, beta2: float, d: Discretization | None = None,
                          c: Contour | None = None, model: CatalogModel | None = None,
                          threads: int = 1) -> IndexCertificate:
    """Compare ``ind(beta1) - ind(beta2)`` with the log residue over the strip between the weights.

    Stability covers ``(T, M) -> (2T, 2M)`` on each index and ``N -> 2N``
    on both integers.
    """
    _require_b_geometry(P)
    if not beta1 < beta2:
        raise ValueError("relative index needs beta1 < beta2")
    d = d or Discretization()
    r1 = numeric_index(P, beta1, d, threads=threads)
    r2 = numeric_index(P, beta2, d, threads=threads)
    lhs = r1.index - r2.index
    lr, rect = _contour_count(P, beta1, beta2, d.N, c)
    rhs = lr.value
    dn = d.doubled_modes()
    s1 = numeric_index(P, beta1, dn, check_stability=False, check_weight=False, threads=threads)
    s2 = numeric_index(P, beta2, dn, check_stability=False, check_weight=False, threads=threads)
    lr_n, _ = _contour_count(P, beta1, beta2, dn.N, None if c is None else c)
    modes = {"N": dn.N, "lhs_numeric": s1.index - s2.index, "rhs_contour": lr_n.value,
             "margins": [_finite(s1.margin), _finite(s2.margin)],
             "largest_matrix": max(s1.largest_matrix, s2.largest_matrix)}
    oracle = index_jump_oracle(model, beta1, beta2) if model is not None else None
    stable = (r1.stable and r2.stable and s1.margin > MARGIN_RATIO and s2.margin > MARGIN_RATIO
              and modes["lhs_numeric"] == lhs and modes["rhs_contour"] == rhs)
    values = {lhs, rhs} | ({oracle} if oracle is not None else set())
    if not stable:
        status = Status.UNSTABLE
    elif len(values) == 1:
        status = Status.MATCH
    else:
        status = Status.MISMATCH
    contour = {"re_min": rect.re_min, "re_max": rect.re_max, "im_min": rect.im_min,
               "im_max": rect.im_max, "raw": [lr.raw.real, lr.raw.imag], "nodes": lr.nodes}
    return IndexCertificate(beta1, beta2, lhs, rhs, oracle, status, (r1, r2), modes, contour)


# ---------------------------------------------------------------------------
# staircase
# ---------------------------------------------------------------------------

@dataclass
class StaircaseRow:
    beta: float
    index: int | None
    rel_index: int | None
    state: str  # FREDHOLM, ON_SPECTRUM, UNSTABLE
    margin: float | None = None
    refined: bool = False

    def to_dict(self) -> dict:
        return {"beta": self.beta, "index": self.index, "rel_index": self.rel_index,
                "state": self.state, "margin": None if self.margin is None else _finite(self.margin),
                "refined": self.refined}


@dataclass
class StaircaseJump:
    beta_left: float
    beta_right: float
    height: int
    expected: int
    roots: list[float]

    @property
    def ok(self) -> bool:
        return self.height == self.expected

    def to_dict(self) -> dict:
        return {"beta_left": self.beta_left, "beta_right": self.beta_right, "height": self.height,
                "expected": self.expected, "roots": self.roots, "ok": self.ok}


@dataclass
class Staircase:
    rows: list[StaircaseRow]
    jumps: list[StaircaseJump]
    roots: list[tuple[float, int]]

    @property
    def consistent(self) -> bool:
        return all(j.ok for j in self.jumps)

    @property
    def unstable(self) -> list[float]:
        return [r.beta for r in self.rows if r.state == "UNSTABLE"]

    def csv_rows(self) -> list[tuple[float, int | None]]:
        return [(r.beta, r.rel_index) for r in self.rows]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "jumps": [j.to_dict() for j in self.jumps],
                "roots": [{"neg_imag": v, "multiplicity": m} for v, m in self.roots],
                "consistent": self.consistent, "unstable": self.unstable}


def spectrum_neg_imag(P: BPhiOperator, lo: float, hi: float, N: int) -> list[tuple[float, int]]:
    """Roots of the indicial family with ``lo < -Im lambda < hi`` located by winding subdivision."""
    F = indicial_family(P, N)
    rep = locate_spectrum(F, (lo, hi))
    vals: list[list] = []
    for v, m in sorted(rep.neg_imag):
        if vals and abs(vals[-1][0] - v) < 1e-6:
            vals[-1][1] += m
        else:
            vals.append([v, m])
    return [(float(v), int(m)) for v, m in vals]


def index_staircase(P: BPhiOperator, beta_range: tuple[float, float], steps: int,
                    d: Discretization | None = None, threads: int = 1) -> Staircase:
    """Index relative to the first Fredholm sample over ``steps`` equispaced weights.

    Samples within the admissibility margin of a root are ON_SPECTRUM and
    skipped. Every sample needs a margin above 10. A sample whose distance
    to the nearest root times ``T`` is below ``RESOLVED_DEPTH`` gets its own
    ``(2T, 2M)`` refinement; elsewhere the refinement runs once per plateau
    between consecutive roots, at the sample farthest from them, and a
    failed plateau is UNSTABLE. UNSTABLE
    samples are not used for the jump comparison. Each jump between consecutive
    certified samples must equal the total root multiplicity between them.
    """
    _require_b_geometry(P)
    d = d or Discretization()
    lo, hi = float(beta_range[0]), float(beta_range[1])
    betas = np.linspace(lo, hi, steps)
    roots = spectrum_neg_imag(P, lo - 0.5, hi + 0.5, d.N)

    def sample(beta):
        if any(abs(beta - v) <= WEIGHT_MARGIN for v, _ in roots):
            return None
        return numeric_index(P, float(beta), d, check_stability=False, check_weight=False)

    run = _mapper(threads)
    reports = run(sample, list(betas))
    # refinement at every sample with decay depth below RESOLVED_DEPTH, and
    # once per plateau (at the sample farthest from the roots) elsewhere
    values = sorted(v for v, _ in roots)
    gaps = [min((abs(b - v) for v in values), default=math.inf) for b in betas]
    plateau = [int(np.searchsorted(values, b)) for b in betas]
    reps: dict[int, int] = {}
    near: list[int] = []
    for i, rep in enumerate(reports):
        if rep is None:
            continue
        if gaps[i] * d.T < RESOLVED_DEPTH:
            near.append(i)
        elif plateau[i] not in reps or gaps[i] > gaps[reps[plateau[i]]]:
            reps[plateau[i]] = i
    todo = sorted(set(reps.values()) | set(near))
    refined = dict(zip(todo, run(lambda i: numeric_index(P, float(betas[i]), d, check_weight=False), todo)))
    for i in near:
        reports[i] = refined[i]
    plateau_ok = {p: refined[i].stable for p, i in reps.items()}
    plateau_ok.update({plateau[i]: True for i in near if plateau[i] not in plateau_ok})
    rows: list[StaircaseRow] = []
    base = None
    for i, (beta, rep) in enumerate(zip(betas, reports)):
        if rep is None:
            rows.append(StaircaseRow(float(beta), None, None, "ON_SPECTRUM"))
            continue
        if not (rep.stable and plateau_ok[plateau[i]]):
            rows.append(StaircaseRow(float(beta), rep.index, None, "UNSTABLE", rep.margin, i in refined))
            continue
        if base is None:
            base = rep.index
        rows.append(StaircaseRow(float(beta), rep.index, rep.index - base, "FREDHOLM", rep.margin, i in refined))
    jumps = []
    good = [r for r in rows if r.state == "FREDHOLM"]
    for a, b in zip(good, good[1:]):
        between = [(v, m) for v, m in roots if a.beta < v < b.beta]
        height = a.index - b.index
        expected = sum(m for _, m in between)
        if height or expected:
            jumps.append(StaircaseJump(a.beta, b.beta, height, expected, [v for v, _ in between]))
    return Staircase(rows, jumps, roots)


# ---------------------------------------------------------------------------
# Z/k operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ZkOperator:
    """``P`` whose indicial family should be ``k`` identical copies of that of ``Q``."""

    base: BPhiOperator
    k: int
    total: BPhiOperator

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")

    def is_kfold(self, N: int | None = None) -> bool:
        """Exact comparison of the indicial coefficients with the k-fold block diagonal."""
        if self.total.dim != self.k * self.base.dim:
            return False
        N = self.base.geometry.fiber_modes if N is None else N
        q = indicial_family(self.base, N)
        p = indicial_family(self.total, N)
        if p.degree != q.degree:
            return False
        d = self.base.dim
        nm = 2 * N + 1 if self.base.geometry.has_fiber else 1
        for cp, cq in zip(p.coeffs, q.coeffs):
            want = _kfold_matrix(cq, self.k, d, nm)
            if not np.array_equal(cp, want):
                return False
        return True


def _kfold_matrix(cq: np.ndarray, k: int, d: int, nm: int) -> np.ndarray:
    """Mode-major layout of ``k`` copies of a ``d``-component family."""
    D = k * d
    out = np.zeros((nm * D, nm * D), dtype=complex)
    for a in range(nm):
        for b in range(nm):
            blk = cq[a * d:(a + 1) * d, b * d:(b + 1) * d]
            if np.any(blk):
                out[a * D:(a + 1) * D, b * D:(b + 1) * D] = np.kron(np.eye(k), blk)
    return out


def zk_operator(base: BPhiOperator, k: int, coupling: float = 0.0) -> ZkOperator:
    """``k`` copies of ``base`` plus an ``x1``-vanishing cyclic coupling."""
    from .coeffs import MatPoly
    from .operators import direct_sum
    P = direct_sum(*([base] * k))
    if coupling:
        R = np.kron(np.roll(np.eye(k), 1, axis=0), np.eye(base.dim)) * coupling
        P = P + BPhiOperator.multiplication(P.geometry, MatPoly.monomial((0, 1, 0, 0), R))
    return ZkOperator(base, k, P)


@dataclass
class ModkReport:
    k: int
    beta: float
    residue: int
    sweep: list[float]
    indices: list[int]
    differences: list[int]
    contour_integers: list[int]
    kfold: bool
    stable: bool
    constant: bool

    def to_dict(self) -> dict:
        return {"k": self.k, "beta": self.beta, "residue": self.residue, "sweep": self.sweep,
                "indices": self.indices, "differences": self.differences,
                "contour_integers": self.contour_integers, "kfold": self.kfold,
                "stable": self.stable, "constant": self.constant}


def modk_index(Z: ZkOperator, beta: float, d: Discretization | None = None,
               sweep: Sequence[float] | None = None, threads: int = 1) -> ModkReport:
    """Numeric index mod k at ``beta`` with a sweep certificate.

    Every consecutive sweep difference must equal the log residue over the
    strip between the weights, and that integer must be divisible by ``k``;
    otherwise DIVISIBILITY_VIOLATION is raised.
    """
    _require_b_geometry(Z.total)
    d = d or Discretization()
    pts = sorted({float(beta)} | {float(b) for b in (sweep or [])})
    reps = [numeric_index(Z.total, b, d, threads=threads) for b in pts]
    F = indicial_family(Z.total, d.N)
    W = default_half_width(F)
    diffs, ints = [], []
    for (b1, r1), (b2, r2) in zip(zip(pts, reps), zip(pts[1:], reps[1:])):
        diffs.append(r1.index - r2.index)
        ints.append(log_residue(F, strip_contour(b1, b2, W)).value)
    bad = [(pts[i], pts[i + 1], n) for i, n in enumerate(ints) if n % Z.k]
    if bad:
        raise DivisibilityViolation(f"contour integer not divisible by k = {Z.k}", k=Z.k,
                                    strips=[[a, b] for a, b, _ in bad], integers=[n for _, _, n in bad])
    indices = [r.index for r in reps]
    residue = reps[pts.index(float(beta))].index % Z.k
    stable = all(r.stable for r in reps) and diffs == ints
    constant = len({i % Z.k for i in indices}) == 1
    return ModkReport(Z.k, float(beta), residue, pts, indices, diffs, ints, Z.is_kfold(d.N), stable, constant)


# ---------------------------------------------------------------------------
# homotopy
# ---------------------------------------------------------------------------

@dataclass
class Segment:
    t0: float
    t1: float
    beta: float
    indices: list[int]
    constant: bool
    subdivisions: int

    def to_dict(self) -> dict:
        return {"t0": self.t0, "t1": self.t1, "beta": self.beta, "indices": self.indices,
                "constant": self.constant, "subdivisions": self.subdivisions}


@dataclass
class HomotopyReport:
    k: int
    segments: list[Segment]
    crossings: list[dict]
    start_residue: int
    end_residue: int
    stable: bool

    @property
    def reselections(self) -> int:
        return sum(1 for c in self.crossings if c["beta_before"] != c["beta_after"])

    @property
    def endpoint_equal(self) -> bool:
        return self.start_residue == self.end_residue

    @property
    def passed(self) -> bool:
        return (self.endpoint_equal and all(s.constant for s in self.segments)
                and all(c["divisible"] for c in self.crossings))

    def to_dict(self) -> dict:
        return {"k": self.k, "segments": [s.to_dict() for s in self.segments],
                "crossings": self.crossings, "start_residue": self.start_residue,
                "end_residue": self.end_residue, "endpoint_equal": self.endpoint_equal,
                "reselections": self.reselections, "stable": self.stable, "passed": self.passed}


def _tracks(path: Callable[[float], BPhiOperator], ts: np.ndarray, N: int) -> list[tuple[float, float]]:
    """Intervals in ``-Im`` swept by roots over the sampled parameters, matched by assignment."""
    prev = None
    out = []
    for t in ts:
        ev = indicial_family(path(float(t)), N).finite_eigenvalues()
        v = -ev.imag
        if prev is not None and prev.size and v.size:
            cost = np.abs(prev[:, None] - v[None, :])
            ri, ci = linear_sum_assignment(cost)
            for i, j in zip(ri, ci):
                out.append((min(prev[i], v[j]), max(prev[i], v[j])))
            v = v[ci]
        elif v.size:
            out.extend((x, x) for x in v)
        prev = v
    return out


def _pick_weight(spans: list[tuple[float, float]], lo: float, hi: float, pad: float) -> float | None:
    """Midpoint of the widest gap in ``(lo, hi)`` at distance ``>= pad`` from every span."""
    cov = sorted((a - pad, b + pad) for a, b in spans)
    merged: list[list[float]] = []
    for a, b in cov:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    best, width = None, 0.0
    x = lo
    for a, b in merged + [[hi, hi]]:
        g0, g1 = max(x, lo), min(a, hi)
        if g1 - g0 > width:
            best, width = 0.5 * (g0 + g1), g1 - g0
        x = max(x, b)
    return best


def homotopy_experiment(path: Callable[[float], BPhiOperator], steps: int, d: Discretization | None = None,
                        k: int = 2, window: tuple[float, float] = (-0.5, 2.5), pad: float = 0.05,
                        samples: int = 9, threads: int = 1) -> HomotopyReport:
    """Transport the mod-k index along ``t -> path(t)`` on ``[0, 1]``.

    Each segment gets a weight at distance ``pad`` from every root track it
    sweeps; a segment without one is halved, up to 10 times, before
    NO_ADMISSIBLE_WEIGHT. The index is evaluated at both ends and the
    midpoint of every segment; consecutive segments with different weights
    give a crossing whose index change must be divisible by ``k``.
    """
    d = d or Discretization()
    lo, hi = window
    pending = [(i / steps, (i + 1) / steps, 0) for i in range(steps)]
    chosen: list[tuple[float, float, float, int, bool]] = []
    while pending:
        t0, t1, depth = pending.pop(0)
        spans = _tracks(path, np.linspace(t0, t1, samples), d.N)
        beta = _pick_weight(spans, lo, hi, pad)
        if beta is None:
            if depth >= 10:
                raise NoAdmissibleWeight("spectrum sweeps the whole weight window", t0=t0, t1=t1)
            tm = 0.5 * (t0 + t1)
            pending[:0] = [(t0, tm, depth + 1), (tm, t1, depth + 1)]
            continue
        beta = round(beta, 12)
        gap = min((max(lo_ - beta, beta - hi_, 0.0) for lo_, hi_ in spans), default=math.inf)
        chosen.append((t0, t1, beta, depth, gap * d.T >= RESOLVED_DEPTH))

    # every (t, beta) pair once; the refinement runs at the segment midpoint
    # when the weight is well clear of the root tracks, at every job otherwise
    jobs: dict[tuple[float, float], bool] = {}
    for t0, t1, beta, _, clear in chosen:
        for t, refine in ((t0, not clear), (0.5 * (t0 + t1), True), (t1, not clear)):
            jobs[(t, beta)] = jobs.get((t, beta), False) or refine
    keys = list(jobs)
    run = _mapper(threads)
    reps = dict(zip(keys, run(lambda kb: numeric_index(path(kb[0]), kb[1], d, check_stability=jobs[kb],
                                                       check_weight=False), keys)))
    stable = all(r.stable for r in reps.values())
    segs = []
    for t0, t1, beta, depth, _ in chosen:
        ind = [reps[(t, beta)].index for t in (t0, 0.5 * (t0 + t1), t1)]
        segs.append(Segment(t0, t1, beta, ind, len(set(ind)) == 1, depth))
    crossings = []
    for before, after in zip(segs, segs[1:]):
        change = before.indices[-1] - after.indices[0]
        crossings.append({"t": before.t1, "beta_before": before.beta, "beta_after": after.beta,
                          "index_change": change, "divisible": change % k == 0})
    return HomotopyReport(k, segs, crossings, segs[0].indices[0] % k, segs[-1].indices[-1] % k, stable)

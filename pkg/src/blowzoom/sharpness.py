"""
Certified non-tangency on the line: a support point x at which Lebesgue measure
or the Heaviside measure L^+ = L restricted to [0, inf) is not a tangent measure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .blowup import blowup
from .measures import AtomicMeasure, Box, DomainError, discretize_lebesgue
from .measures import mass_ball
from .metric import MAX_ATOMS, best_constant, f_a, support_size
from .workers import ordered_map

log = logging.getLogger(__name__)

__all__ = [
    "SharpnessConfig",
    "GapResult",
    "HeavisideDistance",
    "SearchStep",
    "CertificateRow",
    "SharpnessResult",
    "support_gap_scan",
    "f3_heaviside",
    "heaviside_avoider",
    "find_sharpness_point",
]

# mu(B(y_i, 4 r_i)) <= 52 mu(B(y_i, r_i)) in the lower estimate; 52 >= 4 (12 + eps).
MASS_COMPARISON_CONSTANT = 52
DECISION_TOL = 1e-9
SEARCH_HALF_SIDE = 13.5  # I_3
CERT_HALF_SIDE = 4.5  # I_2


class SharpnessConfig(BaseModel):
    model_config = ConfigDict(extra="ignore")

    eps: float = Field(default=0.04, description="0 < eps < 1/20")
    r0_candidates: List[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25])
    i_max: int = 12
    y_grid_points: int = 5
    s_grid_points: int = 3
    h: float = Field(default=1.0 / 162.0, description="Heaviside grid spacing")
    cert_scales: int = 50
    y0: Optional[float] = None
    gap_resolution: Optional[float] = None

    @field_validator("eps")
    @classmethod
    def _check_eps(cls, v: float) -> float:
        if not 0 < v < 1.0 / 20.0:
            raise ValueError("eps must lie in (0, 1/20)")
        if v / 16.0 - 5.0 * v * v / 4.0 <= 0:
            raise ValueError("eps' = eps/16 - 5 eps^2/4 must be > 0")
        return v

    @field_validator("r0_candidates")
    @classmethod
    def _check_r0(cls, v: List[float]) -> List[float]:
        if not v or any(r <= 0 for r in v):
            raise ValueError("r0_candidates must be a non-empty list of positive scales")
        return v

    @field_validator("i_max", "y_grid_points", "s_grid_points", "cert_scales")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("grid sizes and i_max must be >= 1")
        return v

    @field_validator("h")
    @classmethod
    def _check_h(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("h must be > 0")
        return v

    @property
    def eps_prime(self) -> float:
        return self.eps / 16.0 - 5.0 * self.eps**2 / 4.0

    @property
    def threshold(self) -> float:
        return min(self.eps_prime / MASS_COMPARISON_CONSTANT, self.eps**2)


# ---------- records ----------


@dataclass(frozen=True)
class GapResult:
    x: float
    eps_gap: float
    side: str  # "left" or "right"


@dataclass(frozen=True)
class HeavisideDistance:
    value: float
    slack: float  # reference discretization plus snapping
    coarsened: bool = False
    snapping: float = 0.0

    @property
    def upper(self) -> float:
        """Bound on the distance of the unsnapped blow-up to the same reference."""
        return self.value + self.snapping


@dataclass(frozen=True)
class SearchStep:
    i: int
    x_prev: float
    x: float
    y: Optional[float]
    s: Optional[float]
    value: Optional[float]

    @property
    def moved(self) -> bool:
        return self.y is not None


@dataclass(frozen=True)
class CertificateRow:
    r: float
    distance: float
    slack: float
    threshold: float
    normalization: str

    @property
    def passed(self) -> bool:
        return self.distance - self.slack >= self.threshold - DECISION_TOL


@dataclass
class SharpnessResult:
    case: str  # "gap", "heaviside" or "no-r0"
    x: Optional[float]
    reference: str
    threshold: float
    y0: Optional[float] = None
    r0: Optional[float] = None
    gap: Optional[GapResult] = None
    steps: List[SearchStep] = field(default_factory=list)
    certificate: List[CertificateRow] = field(default_factory=list)
    r0_trials: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.certificate) and all(row.passed for row in self.certificate)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "x": self.x,
            "reference": self.reference,
            "threshold": self.threshold,
            "y0": self.y0,
            "r0": self.r0,
            "gap": None if self.gap is None else self.gap.__dict__,
            "r0_trials": [{"r0": r, "f3": v} for r, v in self.r0_trials],
            "steps": [s.__dict__ for s in self.steps],
            "passed": self.passed,
            "rows": len(self.certificate),
        }


# ---------- helpers ----------


@dataclass(frozen=True)
class _Reference:
    """A discretized reference on the closed window [-half_side, half_side]."""

    measure: AtomicMeasure
    anchor: float  # left end of the h-lattice the atoms sit on
    half_side: float
    a: int


def _line(mu: AtomicMeasure) -> None:
    if mu.dim != 1:
        raise DomainError("sharpness experiments live on the line (d = 1)")


def _heaviside(half_side: float, a: int, h: float) -> _Reference:
    measure = discretize_lebesgue(Box((0.0,), (half_side,)), h)
    return _Reference(measure, 0.0, half_side, a)


def _lebesgue(half_side: float, a: int, h: float) -> _Reference:
    measure = discretize_lebesgue(Box((-half_side,), (half_side,)), h)
    return _Reference(measure, -half_side, half_side, a)


def _mass_median(mu: AtomicMeasure) -> float:
    cum = np.cumsum(mu.weights)
    return float(mu.points[int(np.searchsorted(cum, cum[-1] / 2.0)), 0])


def _snap(
    mu: AtomicMeasure, anchor: float, h: float, stride: int
) -> Tuple[AtomicMeasure, float]:
    """
    Move each atom to the middle h-cell of its stride-wide cell. stride is odd,
    so the new positions are centres of the h-lattice started at anchor. Also
    returns the transport cost of the move, which bounds the change of F_a.
    """
    if mu.is_zero():
        return mu, 0.0
    cell = np.floor((mu.points[:, 0] - anchor) / (stride * h))
    fine = cell * stride + (stride - 1) // 2
    # same arithmetic as discretize_lebesgue, so shared positions merge exactly
    moved = anchor + (fine + 0.5) * h
    cost = float(np.dot(mu.weights, np.abs(moved - mu.points[:, 0])))
    return AtomicMeasure(moved[:, None], mu.weights), cost


def _fit(
    blow: AtomicMeasure, ref: _Reference, h: float, max_atoms: int
) -> Tuple[AtomicMeasure, float, bool]:
    """
    Restrict to the closed window. When the merged LP would exceed max_atoms,
    snap onto the reference lattice with the smallest odd stride that fits; the
    second value is the mass-transport slack of that move.
    """
    window = Box((-ref.half_side,), (ref.half_side,))
    local = blow.select(window.contains_closed(blow.points)) if blow.size else blow
    if support_size(local, ref.measure, ref.a) <= max_atoms:
        return local, 0.0, False
    if support_size(AtomicMeasure.zero(1), ref.measure, ref.a) > max_atoms:
        raise DomainError("reference grid alone fills the LP size cap; increase h")
    stride = 1
    while stride * h <= 2.0 * ref.half_side:
        coarse, cost = _snap(local, ref.anchor, h, stride)
        if support_size(coarse, ref.measure, ref.a) <= max_atoms:
            log.debug(
                "snapped blow-up of %d atoms to stride %d (%d atoms)",
                local.size,
                stride,
                coarse.size,
            )
            return coarse, cost, True
        stride += 2
    raise DomainError("blow-up does not fit the LP size cap at any stride")


def _distance(
    blow: AtomicMeasure, ref: _Reference, h: float, max_atoms: int
) -> HeavisideDistance:
    local, extra, coarse = _fit(blow, ref, h, max_atoms)
    slack = 0.5 * h * ref.measure.total + extra
    value = f_a(local, ref.measure, ref.a, max_atoms)
    return HeavisideDistance(value, slack, coarse, extra)


# ---------- case 1: support gaps ----------


def _widest(
    candidates: List[Tuple[float, float, str]], resolution: float
) -> Optional[GapResult]:
    best: Optional[GapResult] = None
    for x, width, side in candidates:
        if width > resolution and (best is None or width > best.eps_gap):
            best = GapResult(float(x), float(width), side)
    return best


def support_gap_scan(
    mu: AtomicMeasure, window: Box, resolution: Optional[float] = None
) -> Optional[GapResult]:
    """
    Largest one-sided empty interval next to a support atom inside the window.
    Only gaps wider than the resolution count; the first maximum wins.

    Gaps between two support atoms take precedence. A gap that runs to the
    window boundary is reported only when no interior gap qualifies.
    """
    _line(mu)
    if mu.is_zero():
        raise DomainError("support_gap_scan needs a nonzero measure")
    pts = np.sort(mu.points[window.contains(mu.points), 0])
    if len(pts) == 0:
        return None
    if resolution is None:
        steps = np.diff(pts)
        resolution = 1.5 * float(steps.min()) if len(steps) else 0.0
    lo, hi = window.lo[0], window.hi[0]
    interior = [(p, q - p, "right") for p, q in zip(pts[:-1], pts[1:])]
    edges = [(pts[0], pts[0] - lo, "left"), (pts[-1], hi - pts[-1], "right")]
    best = _widest(interior, resolution) or _widest(edges, resolution)
    if best:
        log.info("gap %s of x=%.6g, width %.6g", best.side, best.x, best.eps_gap)
    return best


# ---------- case 2: the Heaviside avoider ----------


def f3_heaviside(
    mu: AtomicMeasure, y: float, s: float, h: float, max_atoms: int = MAX_ATOMS
) -> HeavisideDistance:
    """F_3(mu(B(y,s))^{-1} T_{y,s#} mu, L^+) with L^+ atomized at spacing h."""
    _line(mu)
    m = mass_ball(mu, [y], s)
    if m <= 0:
        raise DomainError(f"mu(B({y!r}, {s!r})) = 0; the blow-up cannot be normalized")
    blow = blowup(mu, [y], s, 1.0 / m)
    return _distance(blow, _heaviside(SEARCH_HALF_SIDE, 3, h), h, max_atoms)


def _search_pair(
    mu: AtomicMeasure, y: float, s: float, h: float, max_atoms: int
) -> Optional[float]:
    if mass_ball(mu, [y], s) <= 0:
        return None
    return f3_heaviside(mu, y, s, h, max_atoms).upper


def _certificate_row(
    mu: AtomicMeasure,
    x: float,
    r: float,
    ref: _Reference,
    threshold: float,
    h: float,
    max_atoms: int,
) -> CertificateRow:
    m = mass_ball(mu, [x], r)
    if m > 0:
        dist = _distance(blowup(mu, [x], r, 1.0 / m), ref, h, max_atoms)
        return CertificateRow(r, dist.value, dist.slack, threshold, "ball")
    # empty ball: the row must hold for every normalization c
    blow, extra, _ = _fit(blowup(mu, [x], r), ref, h, max_atoms)
    slack = 0.5 * h * ref.measure.total + extra
    zero = f_a(AtomicMeasure.zero(1), ref.measure, ref.a)
    try:
        _, value = best_constant(blow, ref.measure, ref.a, max_atoms=max_atoms)
        return CertificateRow(r, min(value, zero), slack, threshold, "best")
    except DomainError:
        return CertificateRow(r, zero, slack, threshold, "zero")


def _certify(
    mu: AtomicMeasure,
    x: float,
    scales: np.ndarray,
    ref: _Reference,
    threshold: float,
    h: float,
    workers: Optional[int],
    max_atoms: int,
) -> List[CertificateRow]:
    # rows are recomputed from scratch; nothing is cached between scales
    return ordered_map(
        lambda r: _certificate_row(mu, x, float(r), ref, threshold, h, max_atoms),
        list(scales),
        workers,
    )


def heaviside_avoider(
    mu: AtomicMeasure,
    cfg: SharpnessConfig,
    window: Optional[Box] = None,
    workers: Optional[int] = None,
    max_atoms: int = MAX_ATOMS,
) -> SharpnessResult:
    """
    Walk x_i to the right so that no blow-up at scales in (r_{i_max+1}, r_0] looks
    like L^+, then certify F_2 >= min{eps'/52, eps^2} on a log-spaced scale grid.
    """
    _line(mu)
    if mu.is_zero():
        raise DomainError("heaviside_avoider needs a nonzero measure")
    threshold = cfg.threshold
    local = mu if window is None else mu.select(window.contains(mu.points))
    y0 = cfg.y0 if cfg.y0 is not None else _mass_median(local)
    result = SharpnessResult("no-r0", None, "heaviside", threshold, y0=y0)

    target = cfg.eps**2
    for r0 in cfg.r0_candidates:
        try:
            dist = f3_heaviside(mu, y0, r0, cfg.h, max_atoms)
        except DomainError:
            continue
        # a snapped blow-up only counts as close once its transport slack is added
        result.r0_trials.append((r0, dist.upper))
        if dist.upper < target:
            result.r0 = r0
            break
    if result.r0 is None:
        log.info("no r0 brings the blow-up at y0=%.6g within eps^2 of L^+", y0)
        return result

    r0 = result.r0
    x = y0 + r0
    for i in range(1, cfg.i_max + 1):
        r_i, r_next = r0 * 4.0**-i, r0 * 4.0 ** -(i + 1)
        ys = np.linspace(x, x + r_i, cfg.y_grid_points)
        steps = np.arange(1, cfg.s_grid_points + 1) / cfg.s_grid_points
        ss = r_next + (r_i - r_next) * steps
        pairs = [(float(y), float(s)) for y in ys for s in ss]
        values = ordered_map(
            lambda p: _search_pair(mu, p[0], p[1], cfg.h, max_atoms), pairs, workers
        )
        hit = next(
            ((p, v) for p, v in zip(pairs, values) if v is not None and v < target), None
        )
        if hit is None:
            result.steps.append(SearchStep(i, x, x, None, None, None))
            continue
        (y, s), v = hit
        result.steps.append(SearchStep(i, x, y + r_i, y, s, v))
        x = y + r_i
    result.case = "heaviside"
    result.x = x
    moved = sum(1 for s in result.steps if s.moved)
    log.info("heaviside search: x=%.9g after %d move(s)", x, moved)

    r_low = r0 * 4.0 ** -(cfg.i_max + 1)
    scales = np.geomspace(r0, r_low, cfg.cert_scales, endpoint=False)
    reference = _heaviside(CERT_HALF_SIDE, 2, cfg.h)
    result.certificate = _certify(
        mu, x, scales, reference, threshold, cfg.h, workers, max_atoms
    )
    log.info(
        "certificate: %d/%d scale(s) pass at threshold %.3g",
        sum(1 for row in result.certificate if row.passed),
        len(result.certificate),
        threshold,
    )
    return result


def find_sharpness_point(
    mu: AtomicMeasure,
    cfg: SharpnessConfig,
    window: Box,
    workers: Optional[int] = None,
    max_atoms: int = MAX_ATOMS,
) -> SharpnessResult:
    """
    A one-sided support gap of width g at x keeps every blow-up at r < g empty on
    (0, 1) or (-1, 0): the tent of height 1/2 there separates it from L by 1/4
    for every c. Without a gap, fall back to the Heaviside avoider.
    """
    gap = support_gap_scan(mu, window, cfg.gap_resolution)
    if gap is None:
        return heaviside_avoider(mu, cfg, window, workers, max_atoms)
    threshold = cfg.threshold
    result = SharpnessResult("gap", gap.x, "lebesgue", threshold, gap=gap)
    r_low = gap.eps_gap * 4.0 ** -(cfg.i_max + 1)
    # strictly below the gap width
    scales = np.geomspace(gap.eps_gap, r_low, cfg.cert_scales + 1)[1:]
    reference = _lebesgue(CERT_HALF_SIDE, 2, cfg.h)
    result.certificate = _certify(
        mu, gap.x, scales, reference, threshold, cfg.h, workers, max_atoms
    )
    return result

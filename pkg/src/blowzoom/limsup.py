from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from .approx import certify_cube, cube_masses
from .geometry import cubes_in_box, locate_many, standard_box
from .measures import AtomicMeasure, Box, DomainError, discretize_lebesgue, mass_ball
from .measures import remove_ball, restrict

log = logging.getLogger(__name__)

__all__ = [
    "FiniteProbSpace",
    "EventSeq",
    "EventReport",
    "DoublingRow",
    "event_prob",
    "bc_lower_bound",
    "periodic_limsup_prob",
    "proof_bound",
    "random_event_system",
    "cube_event_system",
    "doubling_scan",
    "non_doubling_witness",
]

Number = Union[float, Fraction]


# ---------- finite probability spaces ----------


@dataclass(frozen=True)
class FiniteProbSpace:
    labels: Tuple[Any, ...]
    probs: Tuple[Number, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.probs):
            raise DomainError("one probability per outcome is required")
        if any(p < 0 for p in self.probs):
            raise DomainError("probabilities must be >= 0")
        total = _sum(self.probs)
        if all(isinstance(p, (int, Fraction)) for p in self.probs):
            off = total != 1
        else:
            off = abs(float(total) - 1.0) > 1e-12
        if off:
            raise DomainError(f"probabilities must sum to 1, got {total}")

    @property
    def size(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class EventSeq:
    events: Tuple[FrozenSet[int], ...]

    @classmethod
    def of(cls, events: Sequence[Sequence[int]]) -> "EventSeq":
        return cls(tuple(frozenset(int(i) for i in ev) for ev in events))

    def check(self, space: FiniteProbSpace) -> None:
        for n, ev in enumerate(self.events):
            if any(i < 0 or i >= space.size for i in ev):
                raise DomainError(f"event {n} references an unknown outcome")

    def __len__(self) -> int:
        return len(self.events)


def _sum(values: Sequence[Number]) -> Number:
    # order independent: permuted event lists must give identical bounds
    vals = list(values)
    if vals and all(isinstance(v, (int, Fraction)) for v in vals):
        return sum(vals, Fraction(0))
    return math.fsum(float(v) for v in vals)


def event_prob(space: FiniteProbSpace, event: FrozenSet[int]) -> Number:
    return _sum([space.probs[i] for i in event])


def bc_lower_bound(
    space: FiniteProbSpace, seq: EventSeq, N: Optional[int] = None
) -> Number:
    """(sum_n P(A_n))^2 / sum_{n,l} P(A_n & A_l) over the first N events."""
    seq.check(space)
    N = len(seq) if N is None else N
    if N < 1 or N > len(seq):
        raise DomainError(f"N must lie in 1..{len(seq)}")
    evs = seq.events[:N]
    num = _sum([event_prob(space, ev) for ev in evs])
    den = _sum([event_prob(space, e & f) for e in evs for f in evs])
    if den == 0:
        raise DomainError("all events are null; the bound is undefined")
    return num * num / den


def periodic_limsup_prob(space: FiniteProbSpace, seq: EventSeq) -> Number:
    """P(union of A_n): the limsup of the periodically repeated sequence."""
    seq.check(space)
    union: FrozenSet[int] = frozenset().union(*seq.events) if len(seq) else frozenset()
    return event_prob(space, union)


def proof_bound(rho: float, p: float, N: int) -> float:
    """
    Lower bound for the second-moment ratio given rho^{-1} p <= P(A_n) <= rho p
    and P(A_n & A_l) <= rho^2 p^2 off the diagonal; tends to rho^{-4}.
    """
    if N < 1 or rho < 1 or p <= 0:
        raise DomainError("proof_bound needs N >= 1, rho >= 1 and p > 0")
    return rho**-4 * N / (N - 1 + 1.0 / (rho * p))


def random_event_system(
    seed: int, outcomes: int = 64, N: int = 12
) -> Tuple[FiniteProbSpace, EventSeq]:
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.ones(outcomes))
    probs = probs / probs.sum()
    events = []
    for _ in range(N):
        density = rng.uniform(0.05, 0.9)
        events.append(np.flatnonzero(rng.random(outcomes) < density))
    space = FiniteProbSpace(tuple(range(outcomes)), tuple(float(p) for p in probs))
    return space, EventSeq.of(events)


# ---------- the central-cube event system ----------


@dataclass
class EventReport:
    a: int
    b: int
    k_list: List[int]
    p_a: float
    rho_a: float
    event_probs: List[Number] = field(default_factory=list)
    intersections: Dict[Tuple[int, int], Number] = field(default_factory=dict)
    bc_bound: Optional[Number] = None
    finite_target: Optional[float] = None
    asymptotic_target: Optional[float] = None

    def per_event_ok(self) -> List[bool]:
        lo, hi = self.p_a / self.rho_a, self.rho_a * self.p_a
        return [lo <= float(p) <= hi for p in self.event_probs]

    def pairwise_ok(self) -> bool:
        cap = self.rho_a**2 * self.p_a**2
        return all(float(v) <= cap for v in self.intersections.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "k_list": self.k_list,
            "p_a": self.p_a,
            "rho_a": self.rho_a,
            "event_probs": [float(p) for p in self.event_probs],
            "per_event_ok": self.per_event_ok(),
            "intersections": {
                f"{n},{m}": float(v) for (n, m), v in self.intersections.items()
            },
            "pairwise_ok": self.pairwise_ok(),
            "bc_bound": None if self.bc_bound is None else float(self.bc_bound),
            "finite_target": self.finite_target,
            "asymptotic_target": self.asymptotic_target,
        }


def cube_event_system(
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    a: int,
    b: int,
    k_list: Sequence[int],
    window: Optional[Box] = None,
    exact: bool = False,
) -> Tuple[FiniteProbSpace, EventSeq, EventReport]:
    """
    Outcomes are the atoms of mu on I_b, normalized. Event n is the union of the
    central cubes Q_c over the cubes Q of Q_a^{k_n} inside I_b; every such Q must
    carry a passing certificate. With exact=True, probabilities are Fractions of
    the binary weights.
    """
    if b > a:
        raise DomainError(f"b={b} must not exceed a={a}")
    d = mu.dim
    box_b = standard_box(b, d)
    win = window or standard_box(b + 1, d)
    local = restrict(mu, box_b)
    if local.is_zero():
        raise DomainError(f"mu has zero mass on I_{b}")

    rho: Optional[float] = None
    for k in k_list:
        masses = cube_masses(mu, a, k)
        for q in cubes_in_box(box_b, a, k):
            cert = certify_cube(mu, nu, a, k, q, win, masses)
            if not cert.passed:
                raise DomainError(
                    f"generation k={k} is not certified on I_{b} (cube {q.label()}: "
                    f"{cert.note or 'distance above threshold'})"
                )
            rho = cert.choice.rho if cert.choice else rho

    if exact:
        total = sum((Fraction(float(w)) for w in local.weights), Fraction(0))
        probs: Tuple[Number, ...] = tuple(
            Fraction(float(w)) / total for w in local.weights
        )
    else:
        probs = tuple(float(w) for w in local.weights / local.weights.sum())
    space = FiniteProbSpace(tuple(tuple(p) for p in local.points.tolist()), probs)

    events = []
    scale = 3 ** (2 * a)
    for k in k_list:
        idx = locate_many(local.points, a, k + 2)
        events.append(np.flatnonzero(np.all(idx % scale == 0, axis=1)))
    seq = EventSeq.of(events)

    p_a = nu.mass_in(standard_box(-a, d)) / nu.mass_in(standard_box(a, d))
    report = EventReport(a, b, list(k_list), p_a, float(rho or 1.0))
    report.event_probs = [event_prob(space, ev) for ev in seq.events]
    for n in range(len(seq)):
        for m in range(n + 1, len(seq)):
            report.intersections[(n, m)] = event_prob(
                space, seq.events[n] & seq.events[m]
            )
    report.bc_bound = bc_lower_bound(space, seq)
    report.finite_target = proof_bound(report.rho_a, p_a, len(seq))
    report.asymptotic_target = report.rho_a**-4
    log.info(
        "cube events a=%d b=%d: P(A_n)=%s, bound=%.6g (target %.6g)",
        a,
        b,
        [round(float(p), 6) for p in report.event_probs],
        float(report.bc_bound),
        report.finite_target,
    )
    return space, seq, report


# ---------- doubling ----------


@dataclass(frozen=True)
class DoublingRow:
    r: float
    inner: float
    outer: float

    @property
    def ratio(self) -> Optional[float]:
        return self.outer / self.inner if self.inner > 0 else None

    @property
    def infinite_candidate(self) -> bool:
        return self.inner <= 0 < self.outer


def doubling_scan(
    mu: AtomicMeasure, x: Sequence[float], r0: float, factor: float, count: int
) -> List[DoublingRow]:
    """mu(B(x, 2r)) / mu(B(x, r)) along r = r0 factor^{-i}, i < count."""
    if r0 <= 0 or factor <= 1 or count < 1:
        raise DomainError("doubling_scan needs r0 > 0, factor > 1 and count >= 1")
    rows = []
    for i in range(count):
        r = r0 * factor ** (-i)
        rows.append(DoublingRow(r, mass_ball(mu, x, r), mass_ball(mu, x, 2.0 * r)))
    flagged = sum(1 for row in rows if row.infinite_candidate)
    if flagged:
        log.warning("doubling_scan: %d row(s) with empty inner ball", flagged)
    return rows


def non_doubling_witness(n: float, window: Box, h: float) -> AtomicMeasure:
    """Discretized Lebesgue on the window with the closed ball B(0, n) removed."""
    return remove_ball(discretize_lebesgue(window, h), np.zeros(window.dim), n)

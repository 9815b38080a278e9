"""
Dense approximants mu_k built from a target nu, their exactness certificates, and
per-cube membership certification for the sets R_{nu,a,n}.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .blowup import (
    EpsilonChoice,
    WeightVector,
    blowup,
    epsilon_choice,
    weighted_duplication,
)
from .geometry import (
    CubeId,
    blowup_radius,
    central_cube,
    cubes_in_box,
    cubes_meeting,
    locate,
    locate_many,
    neighbours,
    half_side_radius,
    standard_box,
)
from .measures import AtomicMeasure, Box, DomainError, restrict
from .metric import best_constant, f_a
from .workers import ordered_map

log = logging.getLogger(__name__)

__all__ = [
    "CubeCertificate",
    "MembershipResult",
    "ProbeRow",
    "TangentRow",
    "MassComparison",
    "RatioCheck",
    "cube_masses",
    "construct_mu_k",
    "candidate_cw",
    "certify_cube",
    "exactness_check",
    "certify_R_membership",
    "convergence_probe",
    "tangent_probe",
    "mass_comparison",
    "central_mass_ratio",
    "perturb",
]

CubeMasses = Dict[Tuple[int, ...], float]


# ---------- records ----------


@dataclass(frozen=True)
class CubeCertificate:
    cube: CubeId
    applicable: bool
    c: Optional[float] = None
    w: Optional[WeightVector] = None
    distance: Optional[float] = None
    choice: Optional[EpsilonChoice] = None
    note: str = ""

    @property
    def threshold(self) -> Optional[float]:
        return self.choice.threshold if self.choice else None

    @property
    def passed(self) -> bool:
        return (
            self.applicable
            and self.distance is not None
            and self.threshold is not None
            and self.distance < self.threshold
        )

    def to_dict(self) -> Dict[str, Any]:
        ch = self.choice
        return {
            "cube": self.cube.label(),
            "applicable": self.applicable,
            "c": self.c,
            "w": list(self.w.w) if self.w else None,
            "distance": self.distance,
            "threshold": self.threshold,
            "beta_a": ch.beta_a if ch else None,
            "eps_a": ch.eps_a if ch else None,
            "eps_a_w": ch.eps_a_w if ch else None,
            "radius": blowup_radius(self.cube.a, self.cube.k),
            "half_side_radius": half_side_radius(self.cube.a, self.cube.k),
            "pass": self.passed,
            "note": self.note,
        }


@dataclass
class MembershipResult:
    k: Optional[int]
    certificates: List[CubeCertificate] = field(default_factory=list)
    summary: List[Dict[str, int]] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.k is not None


@dataclass(frozen=True)
class ProbeRow:
    k: int
    distance: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.distance <= self.bound


@dataclass(frozen=True)
class TangentRow:
    a: int
    k: int
    cube: str
    r: float
    c: float
    normalization: str
    z: float
    distance: float
    bound: Optional[float]
    generic_bound: Optional[float]


@dataclass(frozen=True)
class MassComparison:
    outer: float
    central: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.outer < self.bound and self.central < self.bound


@dataclass(frozen=True)
class RatioCheck:
    ratio: float
    lower: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.ratio <= self.upper


# ---------- helpers ----------


def cube_masses(mu: AtomicMeasure, a: int, k: int) -> CubeMasses:
    """Mass of every generation-k cube of Q_a^k that mu charges."""
    if mu.is_zero():
        return {}
    idx = locate_many(mu.points, a, k)
    keys, inverse = np.unique(idx, axis=0, return_inverse=True)
    sums = np.zeros(len(keys))
    np.add.at(sums, inverse.reshape(-1), mu.weights)
    return {tuple(int(v) for v in key): float(s) for key, s in zip(keys, sums)}


def _nu_a(nu: AtomicMeasure, a: int) -> AtomicMeasure:
    nu_a = restrict(nu, standard_box(a, nu.dim))
    if nu_a.is_zero():
        raise DomainError(f"nu has zero mass on I_{a}")
    return nu_a


def _require_window(window: Box, level: int) -> None:
    if not window.includes(standard_box(level, window.dim)):
        raise DomainError(f"window must contain I_{level}")


# ---------- construction ----------


def construct_mu_k(
    mu: AtomicMeasure, nu: AtomicMeasure, a: int, k: int, window: Box
) -> AtomicMeasure:
    """
    Sum over cubes Q of Q_a^k meeting the window of mu(Q) nu^Q, where nu^Q is
    nu restricted to I_a pulled back into Q and normalized to mass 1.
    """
    nu_a = _nu_a(nu, a)
    nu_mass = nu_a.total
    r = blowup_radius(a, k)
    masses = cube_masses(mu, a, k)
    cubes = cubes_meeting(window, a, k)
    weights = np.empty(len(cubes))
    for i, q in enumerate(cubes):
        m_q = masses.get(q.m, 0.0)
        if m_q <= 0:
            raise DomainError(
                f"empty cube {q.label()}: mu must charge every cube meeting the window "
                "(add a background first)"
            )
        weights[i] = m_q
    centers = np.array([q.center for q in cubes])
    pts = centers[:, None, :] + r * nu_a.points[None, :, :]
    wts = weights[:, None] * nu_a.weights[None, :] / nu_mass
    out = AtomicMeasure(pts.reshape(-1, mu.dim), wts.reshape(-1))
    log.info(
        "Constructed mu_k (a=%d, k=%d): %d cubes x %d atoms", a, k, len(cubes), nu_a.size
    )
    return out


def candidate_cw(
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    a: int,
    q: CubeId,
    masses: Optional[CubeMasses] = None,
) -> Tuple[float, WeightVector]:
    """c(Q) = nu(I_a)/mu(Q) and w_j = mu(Q^j)/mu(Q)."""
    table = masses if masses is not None else cube_masses(mu, q.a, q.k)
    nb = neighbours(q)
    m = [table.get(n.m, 0.0) for n in nb]
    empty = [n.label() for n, v in zip(nb, m) if v <= 0]
    if empty:
        raise DomainError(f"zero neighbour mass at {', '.join(empty)}")
    nu_mass = _nu_a(nu, a).total
    return nu_mass / m[0], WeightVector(q.dim, tuple(v / m[0] for v in m))


# ---------- certificates ----------


def certify_cube(
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    a: int,
    k: int,
    q: CubeId,
    window: Box,
    masses: Optional[CubeMasses] = None,
    beta: Optional[float] = None,
) -> CubeCertificate:
    """Candidate evidence that T_{x(Q),r,c}(mu) is in U_{a+1}(nu_a^w, eps_a eps_a^w)."""
    if any(not window.includes(n.box()) for n in neighbours(q)):
        return CubeCertificate(q, False, note="neighbour outside window")
    try:
        c, w = candidate_cw(mu, nu, a, q, masses)
    except DomainError as e:
        return CubeCertificate(q, True, note=str(e))
    choice = epsilon_choice(nu, a, w, beta)
    r = blowup_radius(a, k)
    reach = Box.cube(q.center, r * 3.0 ** (a + 1))
    local = mu.select(reach.contains_closed(mu.points))
    sigma = blowup(local, q.center, r, c)
    distance = f_a(sigma, weighted_duplication(nu, a, w), a + 1)
    cert = CubeCertificate(q, True, c, w, distance, choice)
    log.debug(
        "cube %s: distance=%.3g threshold=%.3g pass=%s",
        q.label(),
        distance,
        choice.threshold,
        cert.passed,
    )
    return cert


def exactness_check(
    mu_k: AtomicMeasure,
    nu: AtomicMeasure,
    a: int,
    k: int,
    q: CubeId,
    window: Box,
) -> CubeCertificate:
    """F_{a+1}(T_{x(Q),r,c(Q)}(mu_k), nu_a^w), vanishing for a genuine mu_k."""
    return certify_cube(mu_k, nu, a, k, q, window)


def certify_R_membership(
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    a: int,
    n: int,
    k_max: int,
    window: Box,
    workers: Optional[int] = None,
    beta: Optional[float] = None,
) -> MembershipResult:
    """
    First k in n..k_max at which every cube of Q_a^k inside I_a passes. Success is
    a sound membership certificate; failure proves nothing.
    """
    _require_window(window, a + 1)
    result = MembershipResult(k=None)
    for k in range(n, k_max + 1):
        masses = cube_masses(mu, a, k)
        cubes = cubes_in_box(standard_box(a, mu.dim), a, k)
        certs = ordered_map(
            lambda q: certify_cube(mu, nu, a, k, q, window, masses, beta),
            cubes,
            workers,
        )
        passed = sum(1 for c in certs if c.passed)
        na = sum(1 for c in certs if not c.applicable)
        result.summary.append({"k": k, "cubes": len(certs), "passed": passed, "na": na})
        result.certificates = certs
        log.info("certify a=%d k=%d: %d/%d cubes pass", a, k, passed, len(certs))
        if certs and passed == len(certs):
            result.k = k
            return result
    return result


# ---------- convergence and tangents ----------


def convergence_probe(
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    a: int,
    k_list: Sequence[int],
    b: int,
    window: Box,
) -> List[ProbeRow]:
    """F_b(mu_k, mu) against 2 sqrt(d) 3^{-ak} mu(I_{b+1})."""
    _require_window(window, b + 1)
    outer = mu.mass_in(standard_box(b + 1, mu.dim))
    rows: List[ProbeRow] = []
    for k in k_list:
        mu_k = construct_mu_k(mu, nu, a, k, window)
        dist = f_a(mu_k, mu, b)
        bound = 2.0 * math.sqrt(mu.dim) * 3.0 ** (-a * k) * outer
        row = ProbeRow(k, dist, bound)
        if not row.within_bound:
            log.warning("convergence bound fails at k=%d: %.6g > %.6g", k, dist, bound)
        rows.append(row)
    return rows


def tangent_probe(
    mu: AtomicMeasure,
    x: Sequence[float],
    nu: AtomicMeasure,
    a_list: Sequence[int],
    b: int = 1,
    k: int = 1,
) -> List[TangentRow]:
    """
    F_b distances between blow-ups of mu at x and nu, one row per level a, using
    the cube of Q_a^k containing x. The candidate constant c(Q) is used when the
    neighbours are charged, otherwise the best constant.
    """
    point = np.atleast_1d(np.asarray(x, dtype=float))
    outer = nu.mass_in(standard_box(b + 1, nu.dim))
    rows: List[TangentRow] = []
    for a in a_list:
        if b > a:
            raise DomainError(f"probe level b={b} must not exceed a={a}")
        q = locate(point, a, k)
        masses = cube_masses(mu, a, k)
        if masses.get(q.m, 0.0) <= 0:
            raise DomainError(f"x lies in the uncharged cube {q.label()}")
        r = blowup_radius(a, k)
        z = float(np.linalg.norm(point - q.center) / r)
        bound: Optional[float] = None
        try:
            c, w = candidate_cw(mu, nu, a, q, masses)
            norm = "candidate"
            threshold = epsilon_choice(nu, a, w).threshold
            bound = threshold + z * outer
            generic = threshold + 2.0 * 3.0 ** (-a) * outer
        except DomainError:
            c, _ = best_constant(blowup(mu, point, r), nu, b)
            norm = "best"
            generic = None
        dist = f_a(blowup(mu, point, r, c), nu, b)
        rows.append(TangentRow(a, k, q.label(), r, c, norm, z, dist, bound, generic))
    return rows


# ---------- inequalities consumed by the tangent argument ----------


def mass_comparison(
    mu: AtomicMeasure, nu: AtomicMeasure, cert: CubeCertificate
) -> MassComparison:
    """
    |mu_Q(I_a) - nu(I_a)| and |mu_Q(I_{-a}) - nu(I_{-a})|, each to be compared with
    2 beta_a nu(I_{-a}).
    """
    if cert.c is None or cert.choice is None:
        raise DomainError(f"certificate for {cert.cube.label()} carries no constant")
    q = cert.cube
    a, d = q.a, q.dim
    mu_q = blowup(mu, q.center, blowup_radius(a, q.k), cert.c)
    outer = abs(mu_q.mass_in(standard_box(a, d)) - nu.mass_in(standard_box(a, d)))
    central = abs(mu_q.mass_in(standard_box(-a, d)) - nu.mass_in(standard_box(-a, d)))
    bound = 2.0 * cert.choice.beta_a * cert.choice.central_mass
    return MassComparison(outer, central, bound)


def central_mass_ratio(
    mu: AtomicMeasure, nu: AtomicMeasure, cert: CubeCertificate
) -> RatioCheck:
    """mu(Q_c)/mu(Q) within [p_a/rho_a, rho_a p_a], p_a = nu(I_{-a})/nu(I_a)."""
    if cert.choice is None:
        raise DomainError(f"certificate for {cert.cube.label()} carries no choice")
    q = cert.cube
    m_q = mu.mass_in(q.box())
    if m_q <= 0:
        raise DomainError(f"empty cube {q.label()}")
    ratio = mu.mass_in(central_cube(q).box()) / m_q
    p = nu.mass_in(standard_box(-q.a, q.dim)) / nu.mass_in(standard_box(q.a, q.dim))
    rho = cert.choice.rho
    return RatioCheck(ratio, p / rho, rho * p)


def perturb(mu: AtomicMeasure, delta: float, seed: int) -> AtomicMeasure:
    """Move every atom by a seeded displacement of Euclidean length <= delta."""
    if delta < 0:
        raise DomainError("delta must be >= 0")
    rng = np.random.default_rng(seed)
    step = rng.uniform(-1.0, 1.0, size=mu.points.shape) * delta / math.sqrt(mu.dim)
    return AtomicMeasure(mu.points + step, mu.weights)

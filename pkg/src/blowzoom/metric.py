from __future__ import annotations

import logging
import sys
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize_scalar

from .geometry import standard_box
from .measures import AtomicMeasure, DomainError, _check_dim

log = logging.getLogger(__name__)

__all__ = [
    "LP_TOLERANCE",
    "MAX_ATOMS",
    "MetricResult",
    "FaWitness",
    "cap",
    "f_a",
    "f_a_witness",
    "support_size",
    "extend_witness",
    "d_metric",
    "in_ball",
    "mass_ratio_bracket",
    "best_constant",
]

LP_TOLERANCE = 1e-9
MAX_ATOMS = 4000
# Positions closer than this are treated as one support point.
_MERGE_DECIMALS = 11


@dataclass(frozen=True)
class MetricResult:
    value: float
    certified_error: float
    saturation_level: Optional[int] = None


@dataclass(frozen=True)
class FaWitness:
    """Optimal values phi_i at the merged support points, and the sign used."""

    value: float
    positions: np.ndarray
    phi: np.ndarray
    sign: int


# ---------- the LP ----------


def cap(points: np.ndarray, a: int) -> np.ndarray:
    """Distance from each point to the complement of I_a, clipped at 0."""
    half = 3.0**a / 2.0
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.clip(np.min(half - np.abs(pts), axis=1), 0.0, None)


class _FaProblem:
    """
    F_a(t mu, nu) as an LP over the merged support of mu and nu inside the
    closed cube. Points with zero cap or zero net mass never bind and are dropped.
    """

    def __init__(
        self,
        mu: AtomicMeasure,
        nu: AtomicMeasure,
        a: int,
        max_atoms: int = MAX_ATOMS,
        tolerance: float = LP_TOLERANCE,
    ) -> None:
        _check_dim(mu.dim, nu.dim)
        self.a = a
        self.dim = mu.dim
        self.tolerance = tolerance
        closed = standard_box(a, mu.dim)
        m_sel = mu.select(closed.contains_closed(mu.points)) if mu.size else mu
        n_sel = nu.select(closed.contains_closed(nu.points)) if nu.size else nu

        pts = np.vstack([m_sel.points, n_sel.points])
        if len(pts) == 0:
            self.positions = np.zeros((0, self.dim))
            self.mu_w = self.nu_w = self.caps = np.zeros(0)
            return
        keys, inverse = np.unique(
            np.round(pts, _MERGE_DECIMALS), axis=0, return_inverse=True
        )
        inverse = inverse.reshape(-1)
        mu_w = np.zeros(len(keys))
        nu_w = np.zeros(len(keys))
        np.add.at(mu_w, inverse[: m_sel.size], m_sel.weights)
        np.add.at(nu_w, inverse[m_sel.size :], n_sel.weights)
        caps = cap(keys, a)
        keep = caps > 0
        self.positions = keys[keep]
        self.mu_w = mu_w[keep]
        self.nu_w = nu_w[keep]
        self.caps = caps[keep]
        if len(self.positions) > max_atoms:
            raise DomainError(
                f"F_{a} LP needs {len(self.positions)} support points, above the cap "
                f"of {max_atoms}; coarsen the measures first"
            )

    @property
    def size(self) -> int:
        return len(self.positions)

    def _lipschitz_rows(self, idx: np.ndarray) -> Tuple[sparse.csr_matrix, np.ndarray]:
        pts = self.positions[idx]
        n = len(idx)
        if self.dim == 1:
            order = np.argsort(pts[:, 0], kind="stable")
            i, j = order[:-1], order[1:]
        else:
            i, j = np.triu_indices(n, k=1)
        dist = np.linalg.norm(pts[i] - pts[j], axis=1)
        p = len(i)
        rows = np.repeat(np.arange(2 * p), 2)
        cols = np.empty(4 * p, dtype=np.int64)
        cols[0::4], cols[1::4], cols[2::4], cols[3::4] = i, j, i, j
        data = np.tile([1.0, -1.0, -1.0, 1.0], p)
        mat = sparse.csr_matrix((data, (rows, cols)), shape=(2 * p, n))
        return mat, np.repeat(dist, 2)

    def solve(self, scale: float = 1.0) -> FaWitness:
        net = scale * self.mu_w - self.nu_w
        active = np.abs(net) > 0
        positions = self.positions[active]
        if not np.any(active):
            return FaWitness(0.0, positions, np.zeros(0), 1)
        idx = np.flatnonzero(active)
        net = net[active]
        bounds = list(zip(np.zeros(len(idx)), self.caps[idx]))
        if len(idx) == 1:
            phi = self.caps[idx].copy()
            sign = 1 if net[0] > 0 else -1
            return FaWitness(float(abs(net[0]) * phi[0]), positions, phi, sign)

        A_ub, b_ub = self._lipschitz_rows(idx)
        options = {
            "primal_feasibility_tolerance": self.tolerance,
            "dual_feasibility_tolerance": self.tolerance,
        }
        best: Optional[FaWitness] = None
        for sign in (1, -1):
            res = linprog(
                -sign * net,
                A_ub=A_ub,
                b_ub=b_ub,
                bounds=bounds,
                method="highs",
                options=options,
            )
            if not res.success:
                raise RuntimeError(f"F_{self.a} LP failed: {res.message}")
            value = float(-res.fun)
            if best is None or value > best.value:
                best = FaWitness(max(value, 0.0), positions, np.asarray(res.x), sign)
        log.debug("F_%d LP over %d support points -> %.6g", self.a, len(idx), best.value)
        return best  # type: ignore[return-value]


# ---------- public API ----------


def support_size(mu: AtomicMeasure, nu: AtomicMeasure, a: int) -> int:
    """Merged support points with positive cap, i.e. the variables of the F_a LP."""
    return _FaProblem(mu, nu, a, max_atoms=sys.maxsize).size


def f_a_witness(
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    a: int,
    max_atoms: int = MAX_ATOMS,
    tolerance: float = LP_TOLERANCE,
) -> FaWitness:
    return _FaProblem(mu, nu, a, max_atoms, tolerance).solve()


def f_a(
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    a: int,
    max_atoms: int = MAX_ATOMS,
    tolerance: float = LP_TOLERANCE,
) -> float:
    """
    F_a(mu, nu): supremum of |int phi dmu - int phi dnu| over nonnegative
    1-Lipschitz phi vanishing off I_a.
    """
    return f_a_witness(mu, nu, a, max_atoms, tolerance).value


def extend_witness(
    positions: np.ndarray, phi: np.ndarray, a: int, y: Sequence[float]
) -> np.ndarray:
    """
    Admissible extension min(cap(y), min_i(phi_i + |y - x_i|)), clipped at 0.

    Evaluated at each row of y; 1-Lipschitz, interpolates phi and vanishes off I_a.
    """
    ys = np.atleast_2d(np.asarray(y, dtype=float))
    out = cap(ys, a)
    if len(phi):
        dist = np.linalg.norm(ys[:, None, :] - positions[None, :, :], axis=2)
        out = np.minimum(out, np.min(phi[None, :] + dist, axis=1))
    return np.clip(out, 0.0, None)


def d_metric(
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    a_max: int = 20,
    max_atoms: int = MAX_ATOMS,
    tolerance: float = LP_TOLERANCE,
) -> MetricResult:
    """
    Partial sum of 2^{-a} min{1, F_a} up to a_max. F_a is nondecreasing in a, so
    the first saturated level fixes the whole tail exactly.
    """
    _check_dim(mu.dim, nu.dim)
    if a_max < 1:
        raise DomainError("a_max must be >= 1")
    if mu.same_as(nu):
        return MetricResult(0.0, 0.0, None)
    total = 0.0
    for a in range(1, a_max + 1):
        fa = f_a(mu, nu, a, max_atoms, tolerance)
        if fa >= 1.0:
            total += 2.0 ** (-a) + 2.0 ** (-a)
            log.debug("d_metric saturated at a=%d", a)
            return MetricResult(total, 0.0, a)
        total += 2.0 ** (-a) * fa
    return MetricResult(total, 2.0 ** (-a_max), None)


def in_ball(mu: AtomicMeasure, nu: AtomicMeasure, a: int, eps: float) -> bool:
    """Membership of mu in the open F_a-ball of radius eps around nu."""
    if eps <= 0:
        raise DomainError("ball radius eps must be > 0")
    return f_a(mu, nu, a) < eps


def mass_ratio_bracket(
    mu: AtomicMeasure, nu: AtomicMeasure, a: int
) -> Tuple[float, float]:
    """
    [0, 2B/A] with A, B the integrals of cap against mu, nu. cap is admissible,
    so F_a(c mu, nu) >= |cA - B| and every c beyond 2B/A does no better than c = 0.
    """
    box = standard_box(a, mu.dim)
    m_in = mu.select(box.contains_closed(mu.points)) if mu.size else mu
    n_in = nu.select(box.contains_closed(nu.points)) if nu.size else nu
    A = float(np.dot(cap(m_in.points, a), m_in.weights)) if m_in.size else 0.0
    B = float(np.dot(cap(n_in.points, a), n_in.weights)) if n_in.size else 0.0
    if A <= 0:
        raise DomainError(f"mu has zero mass on the open cube I_{a}")
    if B <= 0:
        raise DomainError(
            f"nu has zero mass on the open cube I_{a}; F_{a}(c mu, nu) decreases to 0 "
            "only as c -> 0"
        )
    return 0.0, 2.0 * B / A


def best_constant(
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    a: int,
    rtol: float = 1e-6,
    max_atoms: int = MAX_ATOMS,
) -> Tuple[float, float]:
    """
    Minimize the convex map c -> F_a(c mu, nu); returns (c*, value).

    A first pass over the whole bracket locates c* to rtol * hi; a second pass
    around that estimate brings the tolerance down to rtol * c*.
    """
    lo, hi = mass_ratio_bracket(mu, nu, a)
    problem = _FaProblem(mu, nu, a, max_atoms)

    def objective(c: float) -> float:
        return problem.solve(c).value

    res = minimize_scalar(
        objective, bounds=(lo, hi), method="bounded", options={"xatol": rtol * hi}
    )
    c_star = float(res.x)
    if 0.0 < c_star < hi:
        width = 4.0 * rtol * hi
        refined = minimize_scalar(
            objective,
            bounds=(max(lo, c_star - width), min(hi, c_star + width)),
            method="bounded",
            options={"xatol": rtol * c_star},
        )
        if refined.fun <= res.fun:
            c_star = float(refined.x)
    value = problem.solve(c_star).value
    log.debug("best_constant a=%d: c*=%.9g value=%.9g", a, c_star, value)
    return c_star, value

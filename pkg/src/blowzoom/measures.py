from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "DomainError",
    "Box",
    "AtomicMeasure",
    "restrict",
    "mass_ball",
    "remove_ball",
    "discretize_lebesgue",
    "coarsen",
    "add_background",
    "rational_pool",
    "sample_S",
    "on_triadic_boundary",
]

# Closed-ball membership slack; absorbs rounding of |x - y| at exactly r.
BALL_TOL = 1e-12
# Relative error allowed when checking that h tiles a box.
TILING_TOL = 1e-12


class DomainError(ValueError):
    """A domain precondition was violated; the message names it."""


# ---------- boxes ----------


@dataclass(frozen=True)
class Box:
    """Product of half-open intervals [lo_i, hi_i)."""

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise DomainError("box bounds must be non-empty and of equal dimension")
        if any(a >= b for a, b in zip(lo, hi)):
            raise DomainError(f"box needs lo_i < hi_i, got lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, center: Sequence[float], side: float) -> "Box":
        half = side / 2.0
        return cls(tuple(c - half for c in center), tuple(c + half for c in center))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Half-open membership mask for an (M, d) array."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts >= lo) & (pts < hi), axis=1)

    def contains_closed(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def includes(self, other: "Box", tol: float = 1e-12) -> bool:
        """Containment up to a relative slack on the faces."""
        lo_ok = all(a <= c + tol * max(1.0, abs(c)) for a, c in zip(self.lo, other.lo))
        hi_ok = all(b >= e - tol * max(1.0, abs(e)) for b, e in zip(self.hi, other.hi))
        return lo_ok and hi_ok


# ---------- atomic measures ----------


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """
    Finitely many weighted points in R^d.

    Positions are coalesced at construction (weights summed) and stored sorted
    lexicographically, so equal measures have equal arrays. Arrays are read-only.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.ndim == 1:
            pts = pts.reshape(len(wts), -1) if len(wts) else pts.reshape(0, 1)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise DomainError("points must be an (M, d) array with d >= 1")
        if pts.shape[0] != wts.shape[0]:
            raise DomainError(
                f"got {pts.shape[0]} positions but {wts.shape[0]} weights"
            )
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(wts)):
            raise DomainError("positions and weights must be finite")
        if np.any(wts <= 0):
            raise DomainError("every atom weight must be > 0")
        if len(wts):
            uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
            summed = np.zeros(len(uniq))
            np.add.at(summed, inverse.reshape(-1), wts)
            pts, wts = uniq, summed
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    # ----- constructors -----

    @classmethod
    def zero(cls, dim: int) -> "AtomicMeasure":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @classmethod
    def from_atoms(
        cls, atoms: Iterable[Tuple[Sequence[float], float]], dim: Optional[int] = None
    ) -> "AtomicMeasure":
        pairs = [(list(np.atleast_1d(x)), float(w)) for x, w in atoms]
        if not pairs:
            if dim is None:
                raise DomainError("dimension required for an empty atom list")
            return cls.zero(dim)
        return cls(np.array([p for p, _ in pairs], dtype=float), [w for _, w in pairs])

    @classmethod
    def point_mass(cls, x: Sequence[float], w: float = 1.0) -> "AtomicMeasure":
        return cls(np.atleast_2d(np.asarray(x, dtype=float)), [w])

    # ----- basic quantities -----

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def is_zero(self) -> bool:
        return self.size == 0

    def mass_in(self, box: Box) -> float:
        _check_dim(self.dim, box.dim)
        return float(self.weights[box.contains(self.points)].sum())

    def mass_in_closed(self, box: Box) -> float:
        _check_dim(self.dim, box.dim)
        return float(self.weights[box.contains_closed(self.points)].sum())

    # ----- algebra -----

    def scaled(self, t: float) -> "AtomicMeasure":
        if t <= 0:
            raise DomainError("scaling factor must be > 0")
        return AtomicMeasure(self.points, self.weights * t)

    def translated(self, v: Sequence[float]) -> "AtomicMeasure":
        return AtomicMeasure(self.points + np.asarray(v, dtype=float), self.weights)

    def select(self, mask: np.ndarray) -> "AtomicMeasure":
        return AtomicMeasure(self.points[mask], self.weights[mask])

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        _check_dim(self.dim, other.dim)
        return AtomicMeasure(
            np.vstack([self.points, other.points]),
            np.concatenate([self.weights, other.weights]),
        )

    def same_as(self, other: "AtomicMeasure", atol: float = 0.0) -> bool:
        if self.dim != other.dim or self.size != other.size:
            return False
        return bool(
            np.allclose(self.points, other.points, rtol=0, atol=atol)
            and np.allclose(self.weights, other.weights, rtol=0, atol=atol)
        )

    def atoms(self) -> List[Tuple[List[float], float]]:
        return [
            (list(map(float, p)), float(w)) for p, w in zip(self.points, self.weights)
        ]

    def __repr__(self) -> str:
        return f"AtomicMeasure(dim={self.dim}, atoms={self.size}, mass={self.total:.6g})"


def _check_dim(d1: int, d2: int) -> None:
    if d1 != d2:
        raise DomainError(f"dimension mismatch: {d1} vs {d2}")


# ---------- elementary operations ----------


def restrict(mu: AtomicMeasure, box: Box) -> AtomicMeasure:
    """Atoms of mu in the half-open box; weights unchanged."""
    _check_dim(mu.dim, box.dim)
    return mu.select(box.contains(mu.points))


def mass_ball(mu: AtomicMeasure, x: Sequence[float], r: float) -> float:
    """Mass of the closed Euclidean ball B(x, r)."""
    if r <= 0:
        raise DomainError("ball radius must be > 0")
    center = np.asarray(x, dtype=float).reshape(1, -1)
    _check_dim(mu.dim, center.shape[1])
    if mu.is_zero():
        return 0.0
    dist = np.linalg.norm(mu.points - center, axis=1)
    return float(mu.weights[dist <= r + BALL_TOL * max(1.0, r)].sum())


def remove_ball(mu: AtomicMeasure, x: Sequence[float], r: float) -> AtomicMeasure:
    """mu restricted to the complement of the closed ball B(x, r)."""
    center = np.asarray(x, dtype=float).reshape(1, -1)
    _check_dim(mu.dim, center.shape[1])
    if mu.is_zero():
        return mu
    dist = np.linalg.norm(mu.points - center, axis=1)
    return mu.select(dist > r + BALL_TOL * max(1.0, r))


def _cell_counts(box: Box, h: float) -> List[int]:
    if h <= 0:
        raise DomainError("grid spacing h must be > 0")
    counts: List[int] = []
    for lo, hi in zip(box.lo, box.hi):
        n = (hi - lo) / h
        k = int(round(n))
        if k < 1 or abs(n - k) > TILING_TOL * max(1.0, n):
            raise DomainError(f"h={h!r} does not divide the side length {hi - lo!r}")
        counts.append(k)
    return counts


def _grid_centers(box: Box, h: float) -> np.ndarray:
    counts = _cell_counts(box, h)
    axes = [lo + (np.arange(n) + 0.5) * h for lo, n in zip(box.lo, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def discretize_lebesgue(box: Box, h: float) -> AtomicMeasure:
    """Atoms of weight h^d at the centres of the h-cells tiling the box."""
    centers = _grid_centers(box, h)
    return AtomicMeasure(centers, np.full(len(centers), h**box.dim))


def coarsen(mu: AtomicMeasure, box: Box, h: float) -> AtomicMeasure:
    """
    Snap the atoms lying in the closed box to the centres of the h-grid tiling it.

    Mass preserving; the BL error is at most (sqrt(d) * h / 2) * mass moved.
    Atoms outside the closed box are dropped.
    """
    _check_dim(mu.dim, box.dim)
    counts = np.asarray(_cell_counts(box, h))
    inside = mu.select(box.contains_closed(mu.points))
    if inside.is_zero():
        return inside
    lo = np.asarray(box.lo)
    idx = np.floor((inside.points - lo) / h).astype(np.int64)
    idx = np.clip(idx, 0, counts - 1)
    return AtomicMeasure(lo + (idx + 0.5) * h, inside.weights)


def add_background(
    mu: AtomicMeasure, a: int, k: int, window: Box, mass: float = 1e-9
) -> AtomicMeasure:
    """Add `mass` at the centre of every cube of Q_a^k meeting the window."""
    from .geometry import cubes_meeting

    if mass <= 0:
        raise DomainError("background mass must be > 0")
    _check_dim(mu.dim, window.dim)
    centers = np.array([q.center for q in cubes_meeting(window, a, k)])
    log.warning("Adding background mass %.3g at %d cube centre(s)", mass, len(centers))
    return mu + AtomicMeasure(centers, np.full(len(centers), mass))


# ---------- the countable family S ----------


def rational_pool(limit: int = 16) -> List[Fraction]:
    """Sorted distinct p/q with 1 <= p, q <= limit."""
    span = range(1, limit + 1)
    return sorted({Fraction(p, q) for p in span for q in span})


def on_triadic_boundary(points: np.ndarray, depth: int, tol: float = 1e-9) -> np.ndarray:
    """
    Mask of points lying on a boundary hyperplane x_i = (m + 1/2) 3^{-k} for some
    |k| <= depth. These contain the faces of every cube I_a (|a| <= depth) and of
    every cube in the generations Q_1^k, 0 <= k <= depth.
    """
    pts = np.asarray(points, dtype=float)
    hit = np.zeros(pts.shape[0], dtype=bool)
    for k in range(-depth, depth + 1):
        t = pts * (3.0**k) - 0.5
        hit |= np.any(np.abs(t - np.round(t)) < tol * np.maximum(1.0, np.abs(t)), axis=1)
    return hit


def sample_S(
    n: int,
    window: Box,
    h: float,
    seed: int,
    generation: Optional[int] = None,
    boundary_depth: int = 6,
    pool_limit: int = 16,
) -> AtomicMeasure:
    """
    A discretized member of the dense family: Lebesgue outside I_n plus
    sum_Q q_Q L_Q over the cubes Q of side 3^{-generation} inside I_n.

    Each q_Q is drawn (seeded) from the rational pool; L_Q is normalized Lebesgue
    on Q, so every cube carries mass exactly q_Q.
    """
    from .geometry import locate_many, standard_box

    gen = n if generation is None else generation
    inner = standard_box(n, window.dim)
    if not window.includes(inner):
        raise DomainError(f"window must contain I_{n}")
    side = 3.0 ** (-gen)

    grid = discretize_lebesgue(window, h)
    pts = grid.points
    weights = grid.weights.copy()
    in_inner = inner.contains(pts)

    idx = locate_many(pts[in_inner], 1, gen)
    cubes, inverse, per_cube = np.unique(
        idx, axis=0, return_inverse=True, return_counts=True
    )
    expected = int(round((side / h) ** window.dim))
    if np.any(per_cube != expected):
        raise DomainError(
            "window grid is not aligned with the triadic cubes of side "
            f"{side!r} (h={h!r})"
        )

    pool = rational_pool(pool_limit)
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(pool), size=len(cubes))
    q = np.array([float(pool[i]) for i in picks])
    weights[in_inner] = q[inverse.reshape(-1)] / expected

    if np.any(on_triadic_boundary(pts, boundary_depth)):
        raise DomainError(
            "an atom lies on a triadic boundary hyperplane; perturb the spacing h"
        )
    log.debug(
        "sample_S n=%d gen=%d: %d cubes weighted, %d atoms", n, gen, len(cubes), len(pts)
    )
    return AtomicMeasure(pts, weights)

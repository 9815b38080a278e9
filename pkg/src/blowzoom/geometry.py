from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from .measures import Box, DomainError

__all__ = [
    "CubeId",
    "locate",
    "locate_many",
    "central_cube",
    "children",
    "neighbour_offsets",
    "neighbours",
    "blowup_radius",
    "half_side_radius",
    "standard_box",
    "expanded_box",
    "contracted_box",
    "cubes_in_box",
    "cubes_meeting",
]

# Slack for deciding whether a cube face sits on a box face.
_FACE_TOL = 1e-9


@dataclass(frozen=True, order=True)
class CubeId:
    """A cube of the 3^a-adic filtration: side 3^{-ak}, centre m * side."""

    a: int
    k: int
    m: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.a < 1:
            raise DomainError("cube parameter a must be >= 1")
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))

    @property
    def dim(self) -> int:
        return len(self.m)

    @property
    def side(self) -> float:
        return 3.0 ** (-self.a * self.k)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.m, dtype=float) * self.side

    def box(self) -> Box:
        return Box.cube(self.center, self.side)

    def label(self) -> str:
        return f"a{self.a}:k{self.k}:[{','.join(str(v) for v in self.m)}]"

    def shifted(self, offset: Sequence[int]) -> "CubeId":
        return CubeId(self.a, self.k, tuple(v + e for v, e in zip(self.m, offset)))


# ---------- membership ----------


def locate_many(points: np.ndarray, a: int, k: int) -> np.ndarray:
    """Integer indices m (one row per point) of the containing cubes in Q_a^k."""
    s = 3.0 ** (-a * k)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    return np.floor(pts / s + 0.5).astype(np.int64)


def locate(x: Sequence[float], a: int, k: int) -> CubeId:
    pt = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    return CubeId(a, k, tuple(locate_many(pt, a, k)[0]))


# ---------- family relations ----------


def central_cube(q: CubeId) -> CubeId:
    scale = 3 ** (2 * q.a)
    return CubeId(q.a, q.k + 2, tuple(v * scale for v in q.m))


def children(q: CubeId) -> List[CubeId]:
    """The 3^{ad} cubes of generation k+1 partitioning q."""
    n = 3**q.a
    half = (n - 1) // 2
    offsets = itertools.product(range(-half, half + 1), repeat=q.dim)
    return [
        CubeId(q.a, q.k + 1, tuple(v * n + e for v, e in zip(q.m, off)))
        for off in offsets
    ]


def neighbour_offsets(dim: int) -> List[Tuple[int, ...]]:
    """Offsets in {-1,0,1}^d: zero first, then the rest in lexicographic order."""
    zero = (0,) * dim
    rest = [e for e in itertools.product((-1, 0, 1), repeat=dim) if e != zero]
    return [zero] + rest


def neighbours(q: CubeId) -> List[CubeId]:
    return [q.shifted(e) for e in neighbour_offsets(q.dim)]


# ---------- radii ----------


def blowup_radius(a: int, k: int) -> float:
    """
    r_a^k = 3^{-(k+1)a}: T_{x(Q), r} maps Q in Q_a^k onto I_a and its central
    cube onto I_{-a}.
    """
    if a < 1:
        raise DomainError("blowup_radius needs a >= 1")
    return 3.0 ** (-(k + 1) * a)


def half_side_radius(a: int, k: int) -> float:
    """Half-side variant of r_a^k, recorded in reports next to blowup_radius."""
    return blowup_radius(a, k) / 2.0


# ---------- standard boxes ----------


def standard_box(a: int, dim: int = 1) -> Box:
    """I_a = [-3^a/2, 3^a/2)^d; a may be negative."""
    half = 3.0**a / 2.0
    return Box((-half,) * dim, (half,) * dim)


def expanded_box(a: int, eps: float, dim: int = 1) -> Box:
    if eps < 0:
        raise DomainError("expansion eps must be >= 0")
    half = 3.0**a / 2.0 + eps
    return Box((-half,) * dim, (half,) * dim)


def contracted_box(a: int, eps: float, dim: int = 1) -> Box:
    if eps < 0:
        raise DomainError("contraction eps must be >= 0")
    half = 3.0**a / 2.0
    if eps >= half:
        raise DomainError(f"contraction eps={eps!r} must be < 3^a/2 = {half!r}")
    return Box((-(half - eps),) * dim, (half - eps,) * dim)


# ---------- enumeration ----------


def _index_ranges(box: Box, s: float, inside: bool) -> List[range]:
    ranges: List[range] = []
    for lo, hi in zip(box.lo, box.hi):
        if inside:
            m_lo = math.ceil(lo / s + 0.5 - _FACE_TOL)
            m_hi = math.floor(hi / s - 0.5 + _FACE_TOL)
        else:
            m_lo = math.floor(lo / s - 0.5 + _FACE_TOL) + 1
            m_hi = math.ceil(hi / s + 0.5 - _FACE_TOL) - 1
        ranges.append(range(m_lo, m_hi + 1))
    return ranges


def _cubes(box: Box, a: int, k: int, inside: bool) -> Iterator[CubeId]:
    s = 3.0 ** (-a * k)
    for m in itertools.product(*_index_ranges(box, s, inside)):
        yield CubeId(a, k, m)


def cubes_in_box(box: Box, a: int, k: int) -> List[CubeId]:
    """Cubes of Q_a^k contained in the box, sorted by index."""
    return list(_cubes(box, a, k, inside=True))


def cubes_meeting(box: Box, a: int, k: int) -> List[CubeId]:
    """Cubes of Q_a^k with non-empty intersection with the box, sorted by index."""
    return list(_cubes(box, a, k, inside=False))

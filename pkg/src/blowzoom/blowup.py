from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .geometry import contracted_box, expanded_box, neighbour_offsets, standard_box
from .measures import AtomicMeasure, DomainError, restrict

log = logging.getLogger(__name__)

__all__ = [
    "WeightVector",
    "EpsilonChoice",
    "blowup",
    "inverse_blowup",
    "weighted_duplication",
    "default_beta",
    "buffer_masses",
    "choose_epsilon_w",
    "epsilon_choice",
]

# Number of halvings tried below eps_a before giving up.
LADDER_STEPS = 60


@dataclass(frozen=True)
class WeightVector:
    """3^d positive weights over the neighbour offsets, first entry 1."""

    dim: int
    w: Tuple[float, ...]

    def __post_init__(self) -> None:
        w = tuple(float(v) for v in self.w)
        if len(w) != 3**self.dim:
            raise DomainError(f"weight vector needs 3^{self.dim} entries, got {len(w)}")
        if abs(w[0] - 1.0) > 1e-12:
            raise DomainError("the first weight (the cube itself) must be 1")
        if any(v <= 0 for v in w):
            raise DomainError("all weights must be > 0")
        object.__setattr__(self, "w", (1.0,) + w[1:])

    @classmethod
    def ones(cls, dim: int) -> "WeightVector":
        return cls(dim, (1.0,) * 3**dim)

    @classmethod
    def parse(cls, dim: int, text: str) -> "WeightVector":
        return cls(dim, tuple(float(v) for v in text.split(",") if v.strip()))


@dataclass(frozen=True)
class EpsilonChoice:
    a: int
    beta_a: float
    eps_a: float
    eps_a_w: float
    central_mass: float
    buffer_central: float
    buffer_duplicate: float

    @property
    def threshold(self) -> float:
        return self.eps_a * self.eps_a_w

    @property
    def rho(self) -> float:
        return (1.0 + 2.0 * self.beta_a) / (1.0 - 2.0 * self.beta_a)


# ---------- maps ----------


def blowup(
    mu: AtomicMeasure, x: Sequence[float], r: float, c: float = 1.0
) -> AtomicMeasure:
    """c T_{x,r#} mu with T_{x,r}(y) = (y - x) / r."""
    if r <= 0 or c <= 0:
        raise DomainError("blow-up needs r > 0 and c > 0")
    if mu.is_zero():
        return mu
    return AtomicMeasure((mu.points - np.asarray(x, dtype=float)) / r, mu.weights * c)


def inverse_blowup(
    sigma: AtomicMeasure, x: Sequence[float], r: float, c: float = 1.0
) -> AtomicMeasure:
    if r <= 0 or c <= 0:
        raise DomainError("inverse blow-up needs r > 0 and c > 0")
    if sigma.is_zero():
        return sigma
    origin = np.asarray(x, dtype=float)
    return AtomicMeasure(origin + r * sigma.points, sigma.weights / c)


def weighted_duplication(nu: AtomicMeasure, a: int, w: WeightVector) -> AtomicMeasure:
    """Sum over neighbours j of I_a of w_j (nu restricted to I_a, moved by x(I_a^j))."""
    if w.dim != nu.dim:
        raise DomainError(f"dimension mismatch: {nu.dim} vs {w.dim}")
    nu_a = restrict(nu, standard_box(a, nu.dim))
    if nu_a.is_zero():
        return nu_a
    side = 3.0**a
    out = AtomicMeasure.zero(nu.dim)
    for wj, e in zip(w.w, neighbour_offsets(nu.dim)):
        out = out + nu_a.translated(np.asarray(e, dtype=float) * side).scaled(wj)
    return out


# ---------- parameter choices ----------


def _central_mass(nu: AtomicMeasure, a: int) -> float:
    central = nu.mass_in(standard_box(-a, nu.dim))
    if central <= 0:
        raise DomainError(f"nu has zero mass on the central cube I_{-a}")
    return central


def default_beta(nu: AtomicMeasure, a: int) -> float:
    """Half the admissible bound 3^{-a} / (4 nu(I_{-a}))."""
    return 3.0 ** (-a) / (8.0 * _central_mass(nu, a))


def buffer_masses(
    nu: AtomicMeasure, a: int, w: WeightVector, eps: float
) -> Tuple[float, float]:
    """Masses of the eps-shells around I_{-a} (under nu) and I_a (under nu_a^w)."""
    d = nu.dim
    dup = weighted_duplication(nu, a, w)

    def shell(m: AtomicMeasure, level: int) -> float:
        return m.mass_in(expanded_box(level, eps, d)) - m.mass_in(
            contracted_box(level, eps, d)
        )

    return shell(nu, -a), shell(dup, a)


def _ladder(
    nu: AtomicMeasure, a: int, w: WeightVector, eps_a: float
) -> Tuple[float, float, float]:
    for j in range(1, LADDER_STEPS + 1):
        eps = eps_a * 2.0 ** (-j)
        central, dup = buffer_masses(nu, a, w, eps)
        if central < eps_a and dup < eps_a:
            log.debug("eps_a^w accepted at 2^-%d: %.6g", j, eps)
            return eps, central, dup
    raise DomainError(
        f"no eps below eps_a={eps_a!r} keeps the boundary buffers of I_{-a} and I_{a} "
        "light; atoms sit too close to the cube faces"
    )


def choose_epsilon_w(
    nu: AtomicMeasure, a: int, w: WeightVector, eps_a: float
) -> float:
    """Largest eps_a 2^{-j} (j <= 60) whose buffer masses both stay below eps_a."""
    if eps_a <= 0:
        raise DomainError("eps_a must be > 0")
    return _ladder(nu, a, w, eps_a)[0]


def epsilon_choice(
    nu: AtomicMeasure, a: int, w: WeightVector, beta: Optional[float] = None
) -> EpsilonChoice:
    central = _central_mass(nu, a)
    bound = 3.0 ** (-a) / (4.0 * central)
    if beta is None:
        beta = bound / 2.0
    elif not 0 < beta < bound:
        raise DomainError(f"beta_{a} must lie in (0, {bound!r})")
    eps_a = beta * central
    eps_w, buf_c, buf_d = _ladder(nu, a, w, eps_a)
    return EpsilonChoice(a, beta, eps_a, eps_w, central, buf_c, buf_d)

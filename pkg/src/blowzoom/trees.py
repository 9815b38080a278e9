"""
Measures on the symbolic tree I^N at finite depth: cylinders, conditioning, the
transport metric pi, ZOOM orbits and micromeasure distributions.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .measures import DomainError

log = logging.getLogger(__name__)

__all__ = [
    "Word",
    "TreeMeasure",
    "TreeState",
    "uniform",
    "product_measure",
    "refine",
    "cylinder_mass",
    "cylinder_masses",
    "condition",
    "pi_metric",
    "pi_metric_lp",
    "pi_witness_lp",
    "zoom",
    "micromeasure_orbit",
    "construct_tree_approximant",
    "empirical_distribution",
    "state_distance",
    "distribution_distance",
    "micromeasure_distribution_matrix",
]

Word = Tuple[int, ...]
Number = Union[float, Fraction]

LP_WORD_CAP = 400
TRANSPORT_CAP = 40000


def _is_exact(values: Sequence[Number]) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


# ---------- types ----------


@dataclass(frozen=True)
class TreeMeasure:
    """Probability weights on the words of length n over {1..b}; zeros omitted."""

    b: int
    n: int
    weights: Dict[Word, Number]

    def __post_init__(self) -> None:
        if self.b < 2 or self.n < 1:
            raise DomainError("tree measures need alphabet b >= 2 and depth n >= 1")
        clean: Dict[Word, Number] = {}
        for word, w in self.weights.items():
            word = tuple(int(s) for s in word)
            if len(word) != self.n or any(s < 1 or s > self.b for s in word):
                raise DomainError(f"word {word} is not in I^{self.n} over 1..{self.b}")
            if w < 0:
                raise DomainError(f"negative weight at {word}")
            if w > 0:
                clean[word] = clean.get(word, 0) + w
        total = sum(clean.values())
        if _is_exact(list(clean.values())):
            off = total != 1
        else:
            off = abs(float(total) - 1.0) > 1e-12
        if off:
            raise DomainError(f"tree weights must sum to 1, got {total}")
        object.__setattr__(self, "weights", dict(sorted(clean.items())))

    def __getitem__(self, y: Word) -> Number:
        return cylinder_mass(self, y)

    @property
    def exact(self) -> bool:
        return _is_exact(list(self.weights.values()))


@dataclass(frozen=True)
class TreeState:
    measure: TreeMeasure
    word: Word

    def __post_init__(self) -> None:
        word = tuple(int(s) for s in self.word)
        if any(s < 1 or s > self.measure.b for s in word):
            raise DomainError(f"word symbols must lie in 1..{self.measure.b}")
        object.__setattr__(self, "word", word)


# ---------- constructors ----------


def uniform(b: int, n: int) -> TreeMeasure:
    w = Fraction(1, b**n)
    words = itertools.product(range(1, b + 1), repeat=n)
    return TreeMeasure(b, n, {u: w for u in words})


def product_measure(p: Sequence[Number], n: int) -> TreeMeasure:
    """Bernoulli-type measure: symbol s carries p[s-1] independently at every level."""
    b = len(p)
    weights: Dict[Word, Number] = {}
    for u in itertools.product(range(1, b + 1), repeat=n):
        w: Number = 1 if _is_exact(p) else 1.0
        for s in u:
            w = w * p[s - 1]
        weights[u] = w
    return TreeMeasure(b, n, weights)


def refine(mu: TreeMeasure, depth: int) -> TreeMeasure:
    """Split every cylinder uniformly down to the given depth."""
    if depth < mu.n:
        raise DomainError(f"cannot refine depth {mu.n} to {depth}")
    if depth == mu.n:
        return mu
    extra = depth - mu.n
    share: Number = Fraction(1, mu.b**extra) if mu.exact else 1.0 / mu.b**extra
    tails = list(itertools.product(range(1, mu.b + 1), repeat=extra))
    return TreeMeasure(
        mu.b, depth, {u + t: w * share for u, w in mu.weights.items() for t in tails}
    )


# ---------- cylinders and conditioning ----------


def cylinder_mass(mu: TreeMeasure, y: Sequence[int]) -> Number:
    y = tuple(y)
    if len(y) > mu.n:
        raise DomainError(f"|y|={len(y)} exceeds the depth {mu.n}")
    k = len(y)
    return sum((w for u, w in mu.weights.items() if u[:k] == y), 0)


def cylinder_masses(mu: TreeMeasure, k: int) -> Dict[Word, Number]:
    """mu[u] for every u in I^k charged by mu."""
    if k > mu.n:
        raise DomainError(f"level {k} exceeds the depth {mu.n}")
    out: Dict[Word, Number] = {}
    for u, w in mu.weights.items():
        out[u[:k]] = out.get(u[:k], 0) + w
    return out


def condition(mu: TreeMeasure, y: Sequence[int]) -> TreeMeasure:
    """mu_y[z] = mu[yz] / mu[y]."""
    y = tuple(y)
    if len(y) >= mu.n:
        raise DomainError(f"conditioning on |y|={len(y)} exhausts the depth {mu.n}")
    mass = cylinder_mass(mu, y)
    if mass == 0:
        raise DomainError(f"zero cylinder mass at {y}")
    k = len(y)
    return TreeMeasure(
        mu.b, mu.n - k, {u[k:]: w / mass for u, w in mu.weights.items() if u[:k] == y}
    )


# ---------- the metric pi ----------


def _common(mu: TreeMeasure, nu: TreeMeasure) -> Tuple[TreeMeasure, TreeMeasure]:
    if mu.b != nu.b:
        raise DomainError(f"alphabet mismatch: {mu.b} vs {nu.b}")
    n = max(mu.n, nu.n)
    return refine(mu, n), refine(nu, n)


def pi_metric(mu: TreeMeasure, nu: TreeMeasure) -> Number:
    """
    Transport distance for d(x, y) = 2^{-(first differing index)}: edge lengths
    2^{-(k+2)} above level k < n and 2^{-(n+1)} above the leaves.
    """
    mu, nu = _common(mu, nu)
    n = mu.n
    total: Number = 0
    for k in range(1, n + 1):
        a, b = cylinder_masses(mu, k), cylinder_masses(nu, k)
        level = sum((abs(a.get(u, 0) - b.get(u, 0)) for u in set(a) | set(b)), 0)
        edge = Fraction(1, 2 ** (k + 2)) if k < n else Fraction(1, 2 ** (n + 1))
        total = total + edge * level
    return total


def _split(u: Word, v: Word) -> int:
    for i, (s, t) in enumerate(zip(u, v), start=1):
        if s != t:
            return i
    return min(len(u), len(v)) + 1


def pi_witness_lp(
    mu: TreeMeasure, nu: TreeMeasure
) -> Tuple[float, List[Word], np.ndarray]:
    """
    Direct encoding of the supremum over 1-Lipschitz phi with |phi| <= 1, one
    variable per charged depth-n cylinder. Returns (value, words, phi) with phi
    centred on its range.
    """
    mu, nu = _common(mu, nu)
    words = sorted(set(mu.weights) | set(nu.weights))
    if len(words) > LP_WORD_CAP:
        raise DomainError(f"{len(words)} words exceed the LP cap of {LP_WORD_CAP}")
    diff = np.array(
        [float(mu.weights.get(u, 0)) - float(nu.weights.get(u, 0)) for u in words]
    )
    if len(words) < 2:
        return 0.0, words, np.zeros(len(words))
    i, j = np.triu_indices(len(words), k=1)
    dist = np.array([2.0 ** -_split(words[p], words[q]) for p, q in zip(i, j)])
    p = len(i)
    rows = np.repeat(np.arange(2 * p), 2)
    cols = np.empty(4 * p, dtype=np.int64)
    cols[0::4], cols[1::4], cols[2::4], cols[3::4] = i, j, i, j
    data = np.tile([1.0, -1.0, -1.0, 1.0], p)
    A_ub = sparse.csr_matrix((data, (rows, cols)), shape=(2 * p, len(words)))
    res = linprog(
        -diff,
        A_ub=A_ub,
        b_ub=np.repeat(dist, 2),
        bounds=[(-1.0, 1.0)] * len(words),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"pi LP failed: {res.message}")
    phi = np.asarray(res.x)
    # equal totals: a constant shift keeps the objective, so centre the range
    phi = phi - (phi.max() + phi.min()) / 2.0
    return float(-res.fun), words, phi


def pi_metric_lp(mu: TreeMeasure, nu: TreeMeasure) -> float:
    return pi_witness_lp(mu, nu)[0]


# ---------- ZOOM ----------


def zoom(state: TreeState) -> TreeState:
    """(mu, x) -> (mu_{x_1}, shifted x)."""
    mu, word = state.measure, state.word
    if not word:
        raise DomainError("word exhausted")
    if mu.n < 2:
        raise DomainError("measure depth exhausted")
    if cylinder_mass(mu, word[:1]) == 0:
        raise DomainError(f"zero cylinder at {word[:1]}: the state leaves Xi")
    return TreeState(condition(mu, word[:1]), word[1:])


def micromeasure_orbit(
    mu: TreeMeasure, x: Sequence[int], depths: Sequence[int]
) -> List[TreeMeasure]:
    """mu_{x|n} for each requested n."""
    x = tuple(x)
    out: List[TreeMeasure] = []
    for n in depths:
        if n > len(x):
            raise DomainError(f"depth {n} exceeds the word length {len(x)}")
        out.append(mu if n == 0 else condition(mu, x[:n]))
    return out


def construct_tree_approximant(mu: TreeMeasure, nu: TreeMeasure, k: int) -> TreeMeasure:
    """mu^k = sum over y in I^k of mu[y] nu^y, i.e. weight mu[y] nu[z] on yz."""
    if k < 1 or k > mu.n:
        raise DomainError(f"k must lie in 1..{mu.n}")
    if mu.b != nu.b:
        raise DomainError(f"alphabet mismatch: {mu.b} vs {nu.b}")
    level = cylinder_masses(mu, k)
    missing = mu.b**k - len(level)
    if missing:
        log.warning("%d cylinder(s) of level %d carry no mass; left empty", missing, k)
    return TreeMeasure(
        mu.b,
        k + nu.n,
        {y + z: wy * wz for y, wy in level.items() for z, wz in nu.weights.items()},
    )


# ---------- micromeasure distributions ----------


def empirical_distribution(
    mu: TreeMeasure, x: Sequence[int], N: int
) -> List[Tuple[TreeState, Fraction]]:
    """The states ZOOM^1 .. ZOOM^N along x, each with weight 1/N."""
    if N < 1:
        raise DomainError("N must be >= 1")
    state = TreeState(mu, tuple(x))
    out: List[Tuple[TreeState, Fraction]] = []
    for _ in range(N):
        state = zoom(state)
        out.append((state, Fraction(1, N)))
    return out


def state_distance(s: TreeState, t: TreeState) -> float:
    """pi on the measures plus 2^{-(first differing index)} on the words."""
    dist = float(pi_metric(s.measure, t.measure))
    if s.word != t.word:
        dist += 2.0 ** -_split(s.word, t.word)
    return dist


def micromeasure_distribution_matrix(states: Sequence[TreeState]) -> np.ndarray:
    n = len(states)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = state_distance(states[i], states[j])
    return out


def distribution_distance(
    p1: Sequence[Tuple[TreeState, Number]],
    p2: Sequence[Tuple[TreeState, Number]],
    cost: Optional[np.ndarray] = None,
) -> float:
    """Transport distance between two weighted state lists under state_distance."""
    n, m = len(p1), len(p2)
    if n == 0 or m == 0:
        raise DomainError("distributions must be non-empty")
    if n * m > TRANSPORT_CAP:
        raise DomainError(f"{n} x {m} transport plan exceeds the cap of {TRANSPORT_CAP}")
    if cost is None:
        cost = np.array([[state_distance(s, t) for t, _ in p2] for s, _ in p1])
    a = np.array([float(w) for _, w in p1])
    b = np.array([float(w) for _, w in p2])
    rows_a = sparse.kron(sparse.eye(n), np.ones((1, m)))
    rows_b = sparse.kron(np.ones((1, n)), sparse.eye(m))
    res = linprog(
        cost.reshape(-1),
        A_eq=sparse.vstack([rows_a, rows_b]).tocsr(),
        b_eq=np.concatenate([a / a.sum(), b / b.sum()]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return max(float(res.fun), 0.0)

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowzoom.approx import cube_masses
from blowzoom.geometry import standard_box
from blowzoom.measures import (
    AtomicMeasure,
    Box,
    DomainError,
    add_background,
    coarsen,
    discretize_lebesgue,
    mass_ball,
    on_triadic_boundary,
    rational_pool,
    remove_ball,
    restrict,
    sample_S,
)

# --------------------------- construction ---------------------------


def test_duplicates_are_coalesced():
    mu = AtomicMeasure(np.array([[1.0], [0.0], [1.0]]), [1.0, 2.0, 3.0])
    assert mu.size == 2
    assert mu.points[:, 0].tolist() == [0.0, 1.0]
    assert mu.weights.tolist() == [2.0, 4.0]
    assert mu.total == pytest.approx(6.0)


def test_arrays_are_read_only():
    mu = AtomicMeasure.point_mass([0.5], 2.0)
    with pytest.raises(ValueError):
        mu.weights[0] = 1.0


@pytest.mark.parametrize(
    "points, weights",
    [
        ([[0.0]], [0.0]),
        ([[0.0]], [-1.0]),
        ([[np.nan]], [1.0]),
        ([[0.0], [1.0]], [1.0]),
    ],
)
def test_invalid_atoms_raise(points, weights):
    with pytest.raises(DomainError):
        AtomicMeasure(np.array(points), weights)


def test_zero_measure_and_sum():
    z = AtomicMeasure.zero(2)
    assert z.is_zero() and z.dim == 2 and z.total == 0.0
    mu = AtomicMeasure.point_mass([1.0, 1.0])
    assert (z + mu).same_as(mu)


def test_dimension_mismatch_raises():
    with pytest.raises(DomainError):
        AtomicMeasure.point_mass([0.0]) + AtomicMeasure.point_mass([0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(-5, 5), st.floats(0.01, 10.0)), min_size=1, max_size=30
    ),
    st.randoms(use_true_random=False),
)
def test_coalescing_is_order_free(atoms, rnd):
    shuffled = list(atoms)
    rnd.shuffle(shuffled)
    mu = AtomicMeasure.from_atoms([([float(x)], w) for x, w in atoms])
    nu = AtomicMeasure.from_atoms([([float(x)], w) for x, w in shuffled])
    assert mu.size == len({x for x, _ in atoms})
    assert mu.same_as(nu, atol=1e-9)
    assert mu.total == pytest.approx(sum(w for _, w in atoms))


# --------------------------- boxes and balls ---------------------------


def test_box_is_half_open():
    mu = AtomicMeasure(np.array([[0.0], [0.5], [1.0]]), [1.0, 1.0, 1.0])
    box = Box([0.0], [1.0])
    assert mu.mass_in(box) == 2.0
    assert mu.mass_in_closed(box) == 3.0
    assert restrict(mu, box).size == 2


def test_box_rejects_degenerate_bounds():
    with pytest.raises(DomainError):
        Box([0.0], [0.0])


def test_closed_ball_includes_its_sphere():
    mu = AtomicMeasure(np.array([[0.0, 1.0], [3.0, 4.0]]), [1.0, 2.0])
    assert mass_ball(mu, [0.0, 0.0], 1.0) == 1.0
    assert mass_ball(mu, [0.0, 0.0], 5.0) == 3.0
    assert remove_ball(mu, [0.0, 0.0], 1.0).total == 2.0
    with pytest.raises(DomainError):
        mass_ball(mu, [0.0, 0.0], 0.0)


# --------------------------- discretization ---------------------------


def test_discretized_lebesgue_mass_and_centres():
    box = Box([0.0, 0.0], [1.0, 2.0])
    mu = discretize_lebesgue(box, 0.25)
    assert mu.size == 4 * 8
    assert mu.total == pytest.approx(box.volume)
    assert mu.points.min() == pytest.approx(0.125)


def test_discretization_needs_a_tiling_step():
    with pytest.raises(DomainError):
        discretize_lebesgue(Box([0.0], [1.0]), 0.3)


def test_coarsen_preserves_mass_inside_the_box():
    mu = AtomicMeasure(np.array([[0.01], [0.2], [0.99], [1.0], [5.0]]), [1, 2, 3, 4, 5])
    out = coarsen(mu, Box([0.0], [1.0]), 0.5)
    assert out.points[:, 0].tolist() == [0.25, 0.75]
    assert out.weights.tolist() == [3.0, 7.0]


def test_add_background_charges_every_meeting_cube():
    window = standard_box(1, 1)
    mu = add_background(AtomicMeasure.point_mass([0.0]), 1, 1, window, mass=1e-6)
    # nine cubes of side 1/3 meet [-1.5, 1.5)
    assert mu.size == 9
    assert mu.total == pytest.approx(1.0 + 9e-6)
    masses = cube_masses(mu, 1, 1)
    assert all(v > 0 for v in masses.values())


# --------------------------- the family S ---------------------------


def test_rational_pool_is_sorted_and_distinct():
    pool = rational_pool(16)
    assert pool == sorted(set(pool))
    assert pool[0] == Fraction(1, 16) and pool[-1] == 16
    assert Fraction(2, 3) in pool


def test_triadic_boundary_hits():
    pts = np.array([[0.5], [1.0 / 6.0], [0.25]])
    assert on_triadic_boundary(pts, 3).tolist() == [True, True, False]


def test_sample_s_is_seeded_and_pool_valued():
    window = standard_box(2, 1)
    mu = sample_S(1, window, 1.0 / 9.0, seed=7)
    again = sample_S(1, window, 1.0 / 9.0, seed=7)
    assert mu.same_as(again)
    pool = {float(q) for q in rational_pool()}
    masses = cube_masses(mu, 1, 1)
    inner = [m for m, v in masses.items() if abs(m[0]) <= 4]
    assert len(inner) == 9
    for m in inner:
        assert min(abs(masses[m] - q) for q in pool) < 1e-12
    # Lebesgue outside I_1
    outside = mu.total - mu.mass_in(standard_box(1, 1))
    assert outside == pytest.approx(6.0)


def test_sample_s_generation_zero_gives_unit_cubes():
    mu = sample_S(1, standard_box(2, 1), 1.0 / 9.0, seed=3, generation=0)
    pool = {float(q) for q in rational_pool()}
    for centre in (-1.0, 0.0, 1.0):
        mass = mu.mass_in(Box([centre - 0.5], [centre + 0.5]))
        assert min(abs(mass - q) for q in pool) < 1e-12


def test_sample_s_rejects_misaligned_grid():
    with pytest.raises(DomainError):
        sample_S(1, standard_box(2, 1), 0.1, seed=0)

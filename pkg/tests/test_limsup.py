import math
from fractions import Fraction

import numpy as np
import pytest

from blowzoom.approx import construct_mu_k
from blowzoom.geometry import standard_box
from blowzoom.limsup import (
    EventSeq,
    FiniteProbSpace,
    bc_lower_bound,
    cube_event_system,
    doubling_scan,
    event_prob,
    non_doubling_witness,
    periodic_limsup_prob,
    proof_bound,
    random_event_system,
)
from blowzoom.measures import (
    AtomicMeasure,
    Box,
    DomainError,
    add_background,
    discretize_lebesgue,
    sample_S,
)

ETA = 1e-6


@pytest.fixture
def quarter_space():
    return FiniteProbSpace((0, 1, 2, 3), tuple(Fraction(1, 4) for _ in range(4)))


@pytest.fixture
def middle_heavy():
    """Mass 1 on the middle child of every 1/3-cube of I_2, ETA on the others."""
    pts, wts = [], []
    for j in range(-13, 14):
        for t in (-1, 0, 1):
            pts.append([j / 3.0 + t / 9.0])
            wts.append(1.0 if t == 0 else ETA)
    return AtomicMeasure(np.array(pts), np.array(wts))


# --------------------------- probability spaces ---------------------------


def test_space_validation():
    with pytest.raises(DomainError):
        FiniteProbSpace((0, 1), (0.5,))
    with pytest.raises(DomainError):
        FiniteProbSpace((0, 1), (Fraction(1, 2), Fraction(1, 3)))
    with pytest.raises(DomainError):
        FiniteProbSpace((0, 1), (1.5, -0.5))


def test_unknown_outcome_is_rejected(quarter_space):
    with pytest.raises(DomainError):
        bc_lower_bound(quarter_space, EventSeq.of([[0, 4]]))


def test_all_null_events(quarter_space):
    with pytest.raises(DomainError):
        bc_lower_bound(quarter_space, EventSeq.of([[], []]))


def test_n_out_of_range(quarter_space):
    with pytest.raises(DomainError):
        bc_lower_bound(quarter_space, EventSeq.of([[0]]), N=2)


# --------------------------- second-moment bound ---------------------------


def test_overlapping_pair_is_exact(quarter_space):
    seq = EventSeq.of([[0, 1], [1, 2]])
    assert bc_lower_bound(quarter_space, seq) == Fraction(2, 3)
    assert periodic_limsup_prob(quarter_space, seq) == Fraction(3, 4)


def test_identical_events_attain_the_bound(quarter_space):
    seq = EventSeq.of([[0, 3]] * 5)
    assert bc_lower_bound(quarter_space, seq) == Fraction(1, 2)
    assert periodic_limsup_prob(quarter_space, seq) == Fraction(1, 2)


def test_leading_events_only(quarter_space):
    seq = EventSeq.of([[0], [1, 2, 3]])
    assert bc_lower_bound(quarter_space, seq, N=1) == Fraction(1, 4)


@pytest.mark.parametrize("seed", range(1000))
def test_bound_never_exceeds_the_limsup(seed):
    space, seq = random_event_system(seed)
    try:
        bound = bc_lower_bound(space, seq)
    except DomainError:
        pytest.skip("all events null")
    assert float(bound) <= float(periodic_limsup_prob(space, seq)) + 1e-12


def test_bound_ignores_event_order():
    space, seq = random_event_system(7)
    shuffled = EventSeq(tuple(reversed(seq.events)))
    assert bc_lower_bound(space, seq) == bc_lower_bound(space, shuffled)


def test_random_systems_are_seeded():
    assert random_event_system(3) == random_event_system(3)
    assert random_event_system(3) != random_event_system(4)


def test_proof_bound_limits():
    rho = 13.0 / 11.0
    assert proof_bound(rho, 1.0, 1) == pytest.approx(rho**-3)
    assert proof_bound(rho, 0.5, 10**7) == pytest.approx(rho**-4, rel=1e-6)
    with pytest.raises(DomainError):
        proof_bound(0.9, 0.5, 3)


# --------------------------- central-cube events ---------------------------


def test_middle_children_form_the_first_event(middle_heavy, delta0):
    space, seq, report = cube_event_system(middle_heavy, delta0, 1, 1, [1, 2])
    # outcomes: the 27 atoms of the nine 1/3-cubes of I_1
    assert space.size == 27
    assert len(seq.events[0]) == 9 and len(seq.events[1]) == 27
    assert report.event_probs[0] == pytest.approx(1.0 / (1.0 + 2.0 * ETA))
    assert report.event_probs[1] == pytest.approx(1.0)
    assert report.p_a == 1.0
    assert report.rho_a == pytest.approx(13.0 / 11.0)
    assert all(report.per_event_ok())
    assert report.pairwise_ok()
    q = report.event_probs[0]
    assert report.bc_bound == pytest.approx((q + 1.0) ** 2 / (1.0 + 3.0 * q))
    assert report.asymptotic_target == pytest.approx((11.0 / 13.0) ** 4)


def test_exact_probabilities(middle_heavy, delta0):
    space, seq, report = cube_event_system(
        middle_heavy, delta0, 1, 1, [1, 2], exact=True
    )
    assert all(isinstance(p, Fraction) for p in space.probs)
    assert event_prob(space, seq.events[1]) == 1
    assert report.intersections[(0, 1)] == report.event_probs[0]


def test_uncertified_generation_is_a_domain_error(delta0):
    lebesgue = discretize_lebesgue(standard_box(2, 1), 1.0 / 27.0)
    with pytest.raises(DomainError, match="not certified"):
        cube_event_system(lebesgue, delta0, 1, 1, [1])


def test_b_above_a_is_rejected(middle_heavy, delta0):
    with pytest.raises(DomainError):
        cube_event_system(middle_heavy, delta0, 1, 2, [1])


def test_report_serializes(middle_heavy, delta0):
    _, _, report = cube_event_system(middle_heavy, delta0, 1, 1, [1, 2])
    data = report.to_dict()
    assert data["k_list"] == [1, 2]
    assert set(data["intersections"]) == {"0,1"}
    assert math.isfinite(data["bc_bound"])


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("seed", [None, 4, 7])
def test_event_bounds_on_constructed_measures(k, seed, delta0):
    window = standard_box(3, 1)
    nu = delta0
    if seed is not None:
        nu = sample_S(1, standard_box(2, 1), 1.0, seed=seed, generation=0)
    mu_k = construct_mu_k(discretize_lebesgue(window, 1.0 / 27.0), nu, 1, k, window)
    _, _, report = cube_event_system(mu_k, nu, 1, 1, [k], exact=True)
    assert all(isinstance(p, Fraction) for p in report.event_probs)
    assert all(report.per_event_ok())
    # every cube gives its central cube the share nu(I_{-1}) / nu(I_1)
    assert float(report.event_probs[0]) == pytest.approx(report.p_a)


def test_nested_construction_certifies_both_generations(delta0):
    window = standard_box(3, 1)
    mu_1 = construct_mu_k(discretize_lebesgue(window, 1.0 / 27.0), delta0, 1, 1, window)
    base = add_background(mu_1, 1, 2, window, mass=1e-7)
    mu = construct_mu_k(base, delta0, 1, 2, window)
    space, seq, report = cube_event_system(mu, delta0, 1, 1, [1, 2], exact=True)
    assert space.size == 27
    assert all(report.per_event_ok())
    assert report.pairwise_ok()
    assert report.intersections[(0, 1)] == report.event_probs[0]
    assert report.event_probs[1] == 1


# --------------------------- doubling ---------------------------


def test_lebesgue_ratios_are_near_four_in_the_plane():
    mu = discretize_lebesgue(Box((-2.0, -2.0), (2.0, 2.0)), 1.0 / 54.0)
    rows = doubling_scan(mu, [0.0, 0.0], 0.5, 2.0, 2)
    assert [r.r for r in rows] == [0.5, 0.25]
    for row in rows:
        assert row.ratio == pytest.approx(4.0, rel=0.05)
        assert not row.infinite_candidate


def test_removed_ball_gives_an_infinite_candidate():
    mu = non_doubling_witness(1.0, Box((-2.0, -2.0), (2.0, 2.0)), 1.0 / 54.0)
    wide, narrow = doubling_scan(mu, [0.0, 0.0], 1.0, 2.0, 2)
    assert wide.inner == 0.0 and wide.outer > 0.0
    assert wide.ratio is None and wide.infinite_candidate
    assert narrow.outer == 0.0 and not narrow.infinite_candidate


def test_doubling_parameters_are_checked(delta0):
    with pytest.raises(DomainError):
        doubling_scan(delta0, [0.0], 1.0, 1.0, 3)
    with pytest.raises(DomainError):
        doubling_scan(delta0, [0.0], -1.0, 2.0, 3)

import numpy as np
import pytest

from blowzoom.approx import (
    candidate_cw,
    central_mass_ratio,
    certify_cube,
    certify_R_membership,
    construct_mu_k,
    convergence_probe,
    cube_masses,
    exactness_check,
    mass_comparison,
    perturb,
    tangent_probe,
)
from blowzoom.geometry import CubeId, cubes_in_box, standard_box
from blowzoom.measures import AtomicMeasure, DomainError, discretize_lebesgue, sample_S


@pytest.fixture
def window():
    return standard_box(3, 1)


@pytest.fixture
def lebesgue_fine(window):
    return discretize_lebesgue(window, 1.0 / 81.0)


@pytest.fixture
def two_atoms():
    return AtomicMeasure(np.array([[0.0], [0.9]]), [0.5, 0.5])


@pytest.fixture
def mu_k(lebesgue_i3, delta0, window):
    return construct_mu_k(lebesgue_i3, delta0, 1, 1, window)


# --------------------------- construction ---------------------------


def test_cube_masses_of_lebesgue(lebesgue_i3):
    masses = cube_masses(lebesgue_i3, 1, 1)
    assert len(masses) == 81
    assert all(v == pytest.approx(1.0 / 3.0) for v in masses.values())


def test_mu_k_keeps_cube_masses(mu_k, lebesgue_i3):
    assert mu_k.size == 81
    assert mu_k.total == pytest.approx(lebesgue_i3.total)
    assert cube_masses(mu_k, 1, 1) == pytest.approx(cube_masses(lebesgue_i3, 1, 1))


def test_empty_cube_is_a_domain_error(delta0, window):
    with pytest.raises(DomainError):
        construct_mu_k(delta0, delta0, 1, 1, window)


def test_nu_needs_mass_on_i_a(lebesgue_i3, window):
    with pytest.raises(DomainError):
        construct_mu_k(lebesgue_i3, AtomicMeasure.point_mass([5.0]), 1, 1, window)


# --------------------------- exactness ---------------------------

TARGETS = ["point", "sample4", "sample7"]


def _target(name: str) -> AtomicMeasure:
    if name == "point":
        return AtomicMeasure.point_mass([0.0])
    # Lebesgue on I_2 with seeded rational weights on the unit cubes of I_1
    return sample_S(1, standard_box(2, 1), 1.0, seed=int(name[-1]), generation=0)


@pytest.mark.parametrize("a, k", [(1, 1), (1, 2), (2, 1), (2, 2)])
@pytest.mark.parametrize("target", TARGETS)
def test_every_interior_cube_is_exact(a, k, target, lebesgue_fine, window):
    nu = _target(target)
    mu_k = construct_mu_k(lebesgue_fine, nu, a, k, window)
    res = certify_R_membership(mu_k, nu, a, k, k, window, workers=2)
    assert res.certified and res.k == k
    assert len(res.certificates) == 3 ** (a * (k + 1))
    for cert in res.certificates:
        assert cert.applicable
        assert cert.distance <= 1e-9


def test_exactness_check_on_a_two_atom_target(lebesgue_fine, two_atoms, window):
    mu_k = construct_mu_k(lebesgue_fine, two_atoms, 1, 2, window)
    for m in (-13, 0, 5):
        cert = exactness_check(mu_k, two_atoms, 1, 2, CubeId(1, 2, (m,)), window)
        assert cert.distance <= 1e-9
        assert cert.passed


def test_candidate_constant_and_weights(mu_k, delta0):
    c, w = candidate_cw(mu_k, delta0, 1, CubeId(1, 1, (0,)))
    assert c == pytest.approx(3.0)
    assert w.w == pytest.approx((1.0, 1.0, 1.0))


# --------------------------- certificates ---------------------------


def test_edge_cube_is_not_applicable(mu_k, delta0):
    cert = certify_cube(mu_k, delta0, 1, 1, CubeId(1, 1, (4,)), standard_box(1, 1))
    assert not cert.applicable and not cert.passed
    assert "window" in cert.note


def test_empty_neighbour_fails_with_a_note(delta0, window):
    cert = certify_cube(delta0, delta0, 1, 1, CubeId(1, 1, (0,)), window)
    assert cert.applicable and not cert.passed
    assert "zero neighbour mass" in cert.note


def test_membership_of_the_approximant(mu_k, delta0, window):
    res = certify_R_membership(mu_k, delta0, 1, 1, 2, window, workers=2)
    assert res.certified and res.k == 1
    # 3^{a(k+1)} cubes of Q_1^1 inside I_1
    assert len(res.certificates) == 9
    assert res.summary == [{"k": 1, "cubes": 9, "passed": 9, "na": 0}]
    cubes = [c.cube for c in res.certificates]
    assert cubes == sorted(cubes)


def test_lebesgue_is_not_certified_near_a_point_mass(lebesgue_i3, delta0, window):
    res = certify_R_membership(lebesgue_i3, delta0, 1, 1, 1, window, workers=1)
    assert not res.certified
    assert res.summary[0]["passed"] == 0


def test_certificate_serializes(mu_k, delta0, window):
    cert = certify_cube(mu_k, delta0, 1, 1, CubeId(1, 1, (-2,)), window)
    data = cert.to_dict()
    assert data["cube"] == "a1:k1:[-2]"
    assert data["pass"] is True
    assert data["radius"] == pytest.approx(1.0 / 9.0)
    assert data["eps_a"] == pytest.approx(1.0 / 24.0)


# --------------------------- inequalities ---------------------------


def test_mass_comparison_and_ratio_on_passing_certificates(mu_k, delta0, window):
    for q in cubes_in_box(standard_box(1, 1), 1, 1):
        cert = certify_cube(mu_k, delta0, 1, 1, q, window)
        assert cert.passed
        assert mass_comparison(mu_k, delta0, cert).holds
        ratio = central_mass_ratio(mu_k, delta0, cert)
        assert ratio.holds
        assert ratio.lower == pytest.approx(11.0 / 13.0)


def test_small_perturbations_keep_certificates(mu_k, delta0, window):
    q = CubeId(1, 1, (1,))
    base = certify_cube(mu_k, delta0, 1, 1, q, window)
    r = 1.0 / 9.0
    delta = r * base.threshold / (10.0 * base.c * mu_k.total)
    moved = perturb(mu_k, delta, seed=9)
    assert np.max(np.abs(moved.points - mu_k.points)) <= delta
    cert = certify_cube(moved, delta0, 1, 1, q, window)
    assert cert.passed
    assert mass_comparison(moved, delta0, cert).holds


@pytest.mark.parametrize("a, k", [(1, 1), (1, 2), (2, 1), (2, 2)])
@pytest.mark.parametrize("target", TARGETS)
def test_mass_inequalities_survive_small_moves(a, k, target, lebesgue_fine, window):
    nu = _target(target)
    mu_k = construct_mu_k(lebesgue_fine, nu, a, k, window)
    res = certify_R_membership(mu_k, nu, a, k, k, window, workers=2)
    passing = [c for c in res.certificates if c.passed]
    assert len(passing) == len(res.certificates)
    for i, cert in enumerate(passing):
        assert mass_comparison(mu_k, nu, cert).holds
        delta = cert.threshold / (10.0 * cert.c * mu_k.total)
        moved = perturb(mu_k, delta, seed=i)
        check = mass_comparison(moved, nu, cert)
        assert check.outer < check.bound and check.central < check.bound


def test_perturb_is_seeded(mu_k):
    assert perturb(mu_k, 1e-3, 5).same_as(perturb(mu_k, 1e-3, 5))
    with pytest.raises(DomainError):
        perturb(mu_k, -1.0, 5)


# --------------------------- convergence and tangents ---------------------------


def test_convergence_bound_and_rate(lebesgue_i3, delta0, window):
    rows = convergence_probe(lebesgue_i3, delta0, 1, [1, 2, 3], 1, window)
    assert all(r.within_bound for r in rows)
    assert rows[0].distance >= 2.0 * rows[1].distance
    # at k = 3 every cube holds a single centred atom
    assert rows[2].distance == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("target", TARGETS)
def test_f2_convergence_bound(target, lebesgue_fine, window):
    rows = convergence_probe(lebesgue_fine, _target(target), 1, [1, 2, 3, 4], 2, window)
    assert [r.k for r in rows] == [1, 2, 3, 4]
    for row in rows:
        # 2 sqrt(d) 3^{-ak} mu(I_3) with mu(I_3) = 27
        assert row.bound == pytest.approx(2.0 * 3.0**-row.k * 27.0)
        assert row.within_bound


def test_f2_distance_at_least_halves_per_generation(lebesgue_fine, delta0, window):
    rows = convergence_probe(lebesgue_fine, delta0, 1, [1, 2, 3, 4], 2, window)
    for prev, nxt in zip(rows, rows[1:]):
        assert prev.distance >= 2.0 * nxt.distance
    assert rows[0].distance > 0.0


def test_tangent_rows_at_a_cube_centre(mu_k, delta0):
    rows = tangent_probe(mu_k, [0.0], delta0, [1], b=1, k=1)
    (row,) = rows
    assert row.normalization == "candidate"
    assert row.c == pytest.approx(3.0)
    assert row.z == 0.0
    assert row.distance <= row.bound


def test_tangent_rows_fall_back_to_best_constant(delta0):
    (row,) = tangent_probe(delta0, [0.0], delta0, [1])
    assert row.normalization == "best"
    assert row.distance == pytest.approx(0.0, abs=1e-6)


def test_tangent_rows_reject_uncharged_points(mu_k, delta0):
    with pytest.raises(DomainError):
        tangent_probe(delta0, [1.0], delta0, [1])

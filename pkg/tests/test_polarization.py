import math

import numpy as np
import pytest

from polarscat.polarization import (
    Orientation,
    agreement_map,
    backscatter_projection,
    degree_grid,
    direct_projection,
    exhaustive_best_orientation,
    optimal_tag_orientation,
    orientation_of,
    unit_vector,
)

SQRT2_2 = math.sqrt(2.0) / 2.0


def test_unit_vector_axes():
    np.testing.assert_allclose(unit_vector(Orientation.from_degrees(0, 0)), [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(unit_vector(Orientation.from_degrees(90, 90)), [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(
        unit_vector(Orientation.from_degrees(90, 45)), [SQRT2_2, SQRT2_2, 0], atol=1e-15
    )


def test_unit_vector_norm_and_antipode():
    rng = np.random.default_rng(0)
    for _ in range(50):
        theta = rng.uniform(0, math.pi)
        phi = rng.uniform(0, 2 * math.pi)
        o = Orientation(theta, phi)
        v = unit_vector(o)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12
        # antipode: same dipole axis, opposite vector
        anti = Orientation(math.pi - theta, (phi + math.pi) % (2 * math.pi))
        np.testing.assert_allclose(unit_vector(anti), -v, atol=1e-12)


def test_orientation_validation():
    with pytest.raises(ValueError):
        Orientation(-0.1, 0.0)
    with pytest.raises(ValueError):
        Orientation(0.0, 2 * math.pi)
    with pytest.raises(ValueError):
        Orientation(math.nan, 0.0)
    # from_degrees normalizes the azimuth
    assert Orientation.from_degrees(10, 370).phi == pytest.approx(math.radians(10))


def test_orientation_of_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        o = Orientation(rng.uniform(0.01, math.pi - 0.01), rng.uniform(0, 2 * math.pi))
        back = orientation_of(unit_vector(o) * 2.5)
        assert back.theta == pytest.approx(o.theta, abs=1e-12)
        assert back.phi == pytest.approx(o.phi, abs=1e-12)
    with pytest.raises(ValueError):
        orientation_of(np.zeros(3))


def test_direct_projection_examples():
    z = np.array([0.0, 0.0, 1.0])
    y = np.array([0.0, 1.0, 0.0])
    assert direct_projection(z, z) == pytest.approx(1.0)
    assert direct_projection(z, y) == pytest.approx(0.0)
    tilted = unit_vector(Orientation.from_degrees(45, 90))
    assert direct_projection(z, tilted) == pytest.approx(math.cos(math.radians(45)))


def test_backscatter_projection_examples():
    z = np.array([0.0, 0.0, 1.0])
    y = np.array([0.0, 1.0, 0.0])
    assert backscatter_projection(z, z, z) == pytest.approx(1.0)
    # tag orthogonal to the source captures nothing, any reader
    assert backscatter_projection(z, y, y) == pytest.approx(0.0)
    # tag halfway between orthogonal source and reader relays half the field
    bisector = unit_vector(Orientation.from_degrees(45, 90))
    assert backscatter_projection(z, bisector, y) == pytest.approx(0.5)


def test_backscatter_max_for_orthogonal_pair_is_half():
    # oracle: 1-degree scan over the tag axis
    z = np.array([0.0, 0.0, 1.0])
    y = np.array([0.0, 1.0, 0.0])
    best = 0.0
    for t_deg in range(0, 180):
        for p_deg in range(0, 180):
            t = unit_vector(Orientation.from_degrees(t_deg, p_deg))
            best = max(best, abs(backscatter_projection(z, t, y)))
    assert best == pytest.approx(0.5, abs=1e-4)


def test_backscatter_projection_invariants():
    rng = np.random.default_rng(7)
    for _ in range(200):
        s = unit_vector(Orientation(rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)))
        t = unit_vector(Orientation(rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)))
        r = unit_vector(Orientation(rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)))
        bp = backscatter_projection(s, t, r)
        assert abs(bp) <= min(abs(np.dot(s, t)), abs(np.dot(t, r))) + 1e-12
        assert backscatter_projection(s, -t, r) == pytest.approx(bp, abs=1e-12)


def test_optimal_tag_orientation_copolar_chain():
    o = optimal_tag_orientation(Orientation.from_degrees(0, 0))
    np.testing.assert_allclose(unit_vector(o), [0, 0, 1], atol=1e-12)


def test_optimal_tag_orientation_cross_polarized_reader():
    # orthogonal source/reader: the optimum bisects the two axes
    o = optimal_tag_orientation(Orientation.from_degrees(90, 90))
    assert o.to_degrees() == pytest.approx((45.0, 90.0))
    s = np.array([0.0, 0.0, 1.0])
    r = unit_vector(Orientation.from_degrees(90, 90))
    assert abs(backscatter_projection(s, unit_vector(o), r)) == pytest.approx(0.5)


def test_optimal_tag_orientation_matches_search():
    # derived check: the closed form must agree with its own search oracle;
    # the reduced tag grid covers every reader in the first octant
    s = np.array([0.0, 0.0, 1.0])
    for reader_deg in [(90.0, 60.0), (40.0, 20.0), (70.0, 90.0), (50.0, 45.0)]:
        reader = Orientation.from_degrees(*reader_deg)
        r = unit_vector(reader)
        best, _ = exhaustive_best_orientation(
            lambda o: abs(backscatter_projection(s, unit_vector(o), r)),
            degree_grid(0, 90, 1.0),
            degree_grid(0, 180, 1.0),
        )
        opt = optimal_tag_orientation(reader)
        assert abs(np.dot(unit_vector(opt), unit_vector(best))) > 0.999


def test_optimal_tag_orientation_obtuse_reader_full_grid():
    # a reader tilted past horizontal needs the full tag domain
    s = np.array([0.0, 0.0, 1.0])
    reader = Orientation.from_degrees(120.0, 10.0)
    r = unit_vector(reader)
    best, _ = exhaustive_best_orientation(
        lambda o: abs(backscatter_projection(s, unit_vector(o), r)),
        degree_grid(0, 90, 1.0),
        degree_grid(0, 359, 1.0),
    )
    opt = optimal_tag_orientation(reader)
    assert abs(np.dot(unit_vector(opt), unit_vector(best))) > 0.999


def test_optimal_tag_orientation_achieves_grid_max():
    # the closed-form value may trail the best grid value only by one grid step
    s = np.array([0.0, 0.0, 1.0])
    rng = np.random.default_rng(21)
    step = math.radians(1.0)
    for _ in range(4):
        reader = Orientation(rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi))
        r = unit_vector(reader)

        def objective(o, r=r):
            return abs(backscatter_projection(s, unit_vector(o), r))

        _, grid_best = exhaustive_best_orientation(
            objective, degree_grid(0, 180, 1.0), degree_grid(0, 359, 1.0)
        )
        assert objective(optimal_tag_orientation(reader)) >= grid_best - 2.0 * step


def test_exhaustive_tie_breaking_and_degenerate_grids():
    constant = lambda o: 1.0
    best, value = exhaustive_best_orientation(constant, [0.1, 0.2], [0.3, 0.4])
    assert (best.theta, best.phi) == (0.1, 0.3)
    assert value == 1.0

    single, value = exhaustive_best_orientation(lambda o: o.theta, [0.5], [1.0])
    assert (single.theta, single.phi) == (0.5, 1.0)

    with pytest.raises(ValueError):
        exhaustive_best_orientation(constant, [], [0.1])


def test_agreement_map_known_points():
    grid = degree_grid(0, 90, 45.0)  # coarse reader grid: 0, 45, 90 degrees
    dots = agreement_map(Orientation(0.0, 0.0), grid, grid, tag_step_deg=1.0)
    assert dots.shape == (3, 3)
    assert np.all(dots >= 0.999)


def test_agreement_map_requires_vertical_source():
    with pytest.raises(ValueError):
        agreement_map(Orientation.from_degrees(30, 0))

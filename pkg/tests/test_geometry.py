"""
Tests for cones, domains and grids.
"""

import math

import numpy as np
import pytest

from nonlocal_compactness.errors import CapabilityError, DomainError
from nonlocal_compactness.geometry import (
    Cone,
    ball_domain,
    ball_sector,
    box_domain,
    build_grid,
    cap_area,
    cone_membership,
    distance_to_boundary,
    graph_patch_domain,
    interior_subset,
    sector_min_constant,
    sphere_quadrature,
    verify_graph_inclusion,
    verify_sector_lift,
)


def flat_patch(r0=0.5):
    return graph_patch_domain(lambda xp: np.zeros(len(xp)), r0=r0)


class TestCones:
    """Test cone geometry and sphere quadrature."""

    def test_cap_area(self):
        assert cap_area(Cone.full(2)) == pytest.approx(2 * math.pi)
        assert cap_area(Cone((0, 1), math.pi / 4)) == pytest.approx(
            math.pi / 2
        )
        assert cap_area(Cone((0, 0, 1), math.pi / 2)) == pytest.approx(
            2 * math.pi
        )

    def test_aperture_range(self):
        with pytest.raises(ValueError, match="aperture"):
            Cone((0, 1), 2.0)

    def test_axis_is_normalized(self):
        cone = Cone((0, 2), math.pi / 4)
        assert cone.axis == (0.0, 1.0)

    def test_membership(self):
        cone = Cone((0, 1), math.pi / 4)
        assert cone_membership(cone, (0.5, 0.6))
        assert not cone_membership(cone, (0.6, 0.5))
        np.testing.assert_array_equal(
            cone_membership(cone, np.array([[0.0, 1.0], [0.0, -1.0]])),
            [True, False],
        )

    def test_membership_at_origin(self):
        with pytest.raises(DomainError):
            cone_membership(Cone.full(2), (0.0, 0.0))

    @pytest.mark.parametrize(
        "cone",
        [
            Cone.full(2),
            Cone((1, 1), math.pi / 6),
            Cone.full(3),
            Cone((0, 0, 1), math.pi / 4),
        ],
    )
    def test_quadrature_weights_sum_to_cap_area(self, cone):
        directions, weights = sphere_quadrature(cone, 64)
        assert weights.sum() == pytest.approx(cap_area(cone))
        np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0)
        assert np.all(cone_membership(cone, directions))

    def test_quadrature_needs_points(self):
        with pytest.raises(ValueError, match="at least 8"):
            sphere_quadrature(Cone.full(2), 4)

    def test_sector_min_constant_full_circle(self):
        # int_{S^1} |w.s|^2 = pi for every unit w
        assert sector_min_constant(Cone.full(2), 2.0) == pytest.approx(
            math.pi, rel=1e-6
        )

    def test_ball_sector(self):
        offsets = ball_sector(Cone.full(2), 1.0, 1.0)
        assert len(offsets) == 4
        upward = ball_sector(Cone((0, 1), math.pi / 4), 1.0, 0.5)
        assert np.all(upward[:, 1] > 0)


class TestDomains:
    """Test domain constructors and distances."""

    def test_box(self):
        box = box_domain([0, 0], [2, 1])
        assert box.volume == pytest.approx(2.0)
        assert box.inradius == pytest.approx(0.5)
        assert box.contains(np.array([[1.0, 0.5]]))[0]

    def test_box_bounds(self):
        with pytest.raises(ValueError, match="lo < hi"):
            box_domain([0, 0], [1, 0])

    def test_ball(self):
        ball = ball_domain([0, 0], 2.0)
        assert ball.volume == pytest.approx(4 * math.pi)
        assert distance_to_boundary(ball, [0.5, 0.0]) == pytest.approx(1.5)

    def test_distance_in_box(self):
        box = box_domain([0, 0], [1, 1])
        assert distance_to_boundary(box, [0.5, 0.5]) == 0.5
        np.testing.assert_allclose(
            distance_to_boundary(box, np.array([[0.1, 0.5], [0.5, 0.8]])),
            [0.1, 0.2],
        )

    def test_distance_outside_raises(self):
        with pytest.raises(DomainError):
            distance_to_boundary(box_domain([0, 0], [1, 1]), [1.5, 0.5])

    def test_graph_patch_membership(self):
        patch = graph_patch_domain(
            lambda xp: np.linalg.norm(xp, axis=1) / 2, r0=0.5
        )
        assert patch.contains(np.array([[0.0, 0.1]]))[0]
        assert not patch.contains(np.array([[0.0, -0.1]]))[0]
        assert not patch.contains(np.array([[1.0, 0.4]]))[0]
        assert patch.lipschitz == pytest.approx(0.5)

    def test_graph_patch_too_steep(self):
        with pytest.raises(ValueError, match="exceeds"):
            graph_patch_domain(lambda xp: xp[:, 0], r0=0.5)

    def test_graph_patch_through_origin(self):
        with pytest.raises(ValueError, match="origin"):
            graph_patch_domain(lambda xp: xp[:, 0] / 4 + 0.1, r0=0.5)

    def test_graph_patch_distance(self):
        patch = flat_patch()
        assert distance_to_boundary(patch, [0.0, 0.5]) == pytest.approx(0.5)
        assert distance_to_boundary(patch, [1.9, 1.0]) == pytest.approx(0.1)

    def test_graph_patch_3d(self):
        patch = graph_patch_domain(
            lambda xp: np.zeros(len(xp)), r0=0.25, d=3, n_table=17
        )
        assert patch.d == 3
        assert patch.volume == pytest.approx(4.0)
        assert distance_to_boundary(patch, [0.0, 0.0, 0.2]) == (
            pytest.approx(0.2)
        )


class TestGrid:
    """Test grid construction."""

    def test_box_grid(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=4)
        assert grid.n_nodes == 16
        assert grid.volume == pytest.approx(1.0)
        np.testing.assert_allclose(grid.h, [0.25, 0.25])
        assert grid.cell_volume == pytest.approx(1 / 16)

    def test_grid_from_h(self):
        grid = build_grid(box_domain([0, 0], [1, 2]), h=0.1)
        assert grid.shape == (10, 20)

    def test_needs_exactly_one_resolution(self):
        with pytest.raises(ValueError, match="exactly one"):
            build_grid(box_domain([0], [1]), h=0.1, n_per_axis=10)
        with pytest.raises(ValueError, match="exactly one"):
            build_grid(box_domain([0], [1]))

    def test_ball_grid_volume(self):
        grid = build_grid(ball_domain([0, 0], 1.0), n_per_axis=64)
        # cells whose centre lies outside are dropped
        assert grid.volume == pytest.approx(math.pi, rel=2e-2)
        assert grid.volume < math.pi
        assert np.all(grid.weights <= grid.cell_volume + 1e-15)

    def test_nodes_are_lexicographic(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=3)
        keys = [tuple(i) for i in grid.index]
        assert keys == sorted(keys)

    def test_lattice_scatter(self):
        grid = build_grid(ball_domain([0, 0], 1.0), n_per_axis=8)
        lattice = grid.to_lattice(np.ones(grid.n_nodes), pad=2)
        assert lattice.shape == (12, 12)
        assert lattice.sum() == grid.n_nodes
        assert grid.lattice_weights().sum() == pytest.approx(grid.volume)

    def test_coarsen(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=8)
        coarse = grid.coarsen()
        assert coarse.shape == (4, 4)
        np.testing.assert_allclose(coarse.h, 2 * grid.h)

    def test_interior_subset(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=4)
        assert interior_subset(grid, 0).all()
        assert interior_subset(grid, 0.3).sum() == 4
        with pytest.raises(ValueError, match="nonnegative"):
            interior_subset(grid, -1.0)


class TestGraphModel:
    """Test the sampled inclusion checks of the graph model."""

    def test_flat_graph_inclusion(self):
        report = verify_graph_inclusion(flat_patch(), 0.25, n_samples=2000)
        assert report.holds
        assert report.first_counterexamples == []

    def test_cone_graph_inclusion(self):
        patch = graph_patch_domain(
            lambda xp: np.abs(xp[:, 0]) / 2, r0=0.5
        )
        report = verify_graph_inclusion(patch, 0.5, n_samples=2000)
        assert report.holds

    def test_flat_sector_lift(self):
        report = verify_sector_lift(flat_patch(), 0.5, n_samples=2000)
        assert report.holds
        assert report.n_samples == 2000

    def test_scale_range(self):
        with pytest.raises(ValueError, match="r must lie"):
            verify_graph_inclusion(flat_patch(), 0.6)

    def test_needs_graph_patch(self):
        with pytest.raises(CapabilityError):
            verify_graph_inclusion(box_domain([0, 0], [1, 1]), 0.1)

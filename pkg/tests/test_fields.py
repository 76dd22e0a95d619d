"""
Tests for vector fields, rigid motions and field sequences.
"""

import numpy as np
import pytest

from nonlocal_compactness.errors import RankError
from nonlocal_compactness.fields import (
    RigidMotion,
    SubspaceSpec,
    VectorField,
    apply_cutoff,
    check_transversal,
    constraint_matrix,
    field_hash,
    make_field,
    make_sequence,
    project_out_rigid,
    read_field_csv,
    rigid_basis,
    rigid_motion_field,
    sample_field,
    sequence_label,
    write_field_csv,
)
from nonlocal_compactness.geometry import ball_domain, box_domain, build_grid


@pytest.fixture
def square():
    return build_grid(box_domain([0, 0], [1, 1]), n_per_axis=8)


class TestAnalyticFields:
    """Test analytic field construction and sampling."""

    def test_unknown_field(self):
        with pytest.raises(ValueError, match="Unknown field"):
            make_field({"name": "vortex"}, 2)

    def test_identity(self, square):
        u = sample_field(make_field({"name": "identity"}, 2), square)
        np.testing.assert_array_equal(u.values, square.nodes)
        assert u.expr.name == "identity"

    def test_constant_norm(self, square):
        u = sample_field(make_field({"name": "constant"}, 2), square)
        assert u.lp_norm_p(2.0) == pytest.approx(1.0)
        assert u.lp_norm_p(3.0) == pytest.approx(1.0)

    def test_rotation_needs_two_dimensions(self):
        with pytest.raises(ValueError, match="d >= 2"):
            make_field({"name": "rotation"}, 1)

    def test_bump_support(self, square):
        spec = {"name": "bump", "center": [0.5, 0.5], "radius": 0.2}
        u = sample_field(make_field(spec, 2), square)
        far = np.linalg.norm(square.nodes - 0.5, axis=1) >= 0.2
        assert np.all(u.values[far] == 0)
        assert u.values[:, 1].max() == 0

    def test_to_dict(self):
        expr = make_field({"name": "fourier", "k": [2, 0]}, 2)
        assert expr.to_dict() == {
            "name": "fourier",
            "k": [2.0, 0.0],
            "component": 0,
            "amplitude": 1.0,
        }


class TestVectorField:
    """Test the sampled field container."""

    def test_component_count(self, square):
        with pytest.raises(ValueError, match="components"):
            VectorField(square, np.zeros((square.n_nodes, 3)))

    def test_finite_values(self, square):
        values = np.zeros((square.n_nodes, 2))
        values[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            VectorField(square, values)

    def test_values_read_only(self, square):
        u = VectorField(square, np.ones((square.n_nodes, 2)))
        with pytest.raises(ValueError):
            u.values[0, 0] = 2.0

    def test_scaled(self, square):
        u = sample_field(make_field({"name": "identity"}, 2), square)
        v = u.scaled(3.0)
        np.testing.assert_allclose(v.values, 3.0 * u.values)
        np.testing.assert_allclose(v.expr(square.nodes), v.values)

    def test_masked_norm(self, square):
        u = VectorField(square, np.ones((square.n_nodes, 2)))
        mask = square.nodes[:, 0] < 0.5
        assert u.lp_norm_p(2.0, mask) == pytest.approx(2.0 * 0.5)

    def test_hash_is_content_based(self, square):
        a = VectorField(square, np.ones((square.n_nodes, 2)))
        b = VectorField(square, np.ones((square.n_nodes, 2)), label="other")
        c = a.scaled(2.0)
        assert field_hash(a) == field_hash(b)
        assert field_hash(a) != field_hash(c)

    def test_csv_round_trip(self, square, tmp_path):
        u = sample_field(make_field({"name": "fourier"}, 2), square)
        path = tmp_path / "u.csv"
        write_field_csv(u, path)
        header = path.read_text().splitlines()[0]
        assert header == "x_1,x_2,u_1,u_2"
        v = read_field_csv(path, square)
        np.testing.assert_array_equal(v.values, u.values)
        assert field_hash(v) == field_hash(u)

    def test_csv_grid_mismatch(self, square, tmp_path):
        u = VectorField(square, np.ones((square.n_nodes, 2)))
        path = tmp_path / "u.csv"
        write_field_csv(u, path)
        other = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=4)
        with pytest.raises(ValueError, match="rows"):
            read_field_csv(path, other)

    def test_cutoff(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=16)
        u = VectorField(grid, np.ones((grid.n_nodes, 2)))
        w = apply_cutoff(u, 0.1)
        collar = grid.boundary_distance <= 0.1
        inner = grid.boundary_distance >= 0.2
        assert np.all(w.values[collar] == 0)
        np.testing.assert_array_equal(w.values[inner], 1.0)


class TestRigidMotions:
    """Test rigid motions and the subspace V."""

    def test_skew_required(self):
        with pytest.raises(ValueError, match="skew"):
            RigidMotion(A=[[0, 1], [1, 0]], b=[0, 0])

    def test_rigid_motion_field(self, square):
        motion = RigidMotion(A=[[0, -1], [1, 0]], b=[1, 0])
        u = rigid_motion_field(motion, square)
        x = square.nodes
        np.testing.assert_allclose(u.values[:, 0], 1 - x[:, 1])
        np.testing.assert_allclose(u.values[:, 1], x[:, 0])

    def test_basis_dimension(self, square):
        assert rigid_basis(square).shape == (square.n_nodes * 2, 3)
        grid3 = build_grid(box_domain([0] * 3, [1] * 3), n_per_axis=3)
        assert rigid_basis(grid3).shape == (27 * 3, 6)

    def test_project_out_rigid_motion(self, square):
        rng = np.random.default_rng(3)
        u = rigid_motion_field(RigidMotion.random(2, rng), square)
        w = project_out_rigid(u)
        np.testing.assert_allclose(w.values, 0.0, atol=1e-12)

    def test_projection_lands_in_subspace(self):
        grid = build_grid(ball_domain([0, 0], 1.0), n_per_axis=10)
        rng = np.random.default_rng(0)
        u = VectorField(grid, rng.standard_normal((grid.n_nodes, 2)))
        w = project_out_rigid(u)
        C = constraint_matrix(SubspaceSpec(), grid)
        np.testing.assert_allclose(C @ w.values.ravel(), 0.0, atol=1e-12)

    def test_mean_only_is_not_transversal(self, square):
        with pytest.raises(RankError):
            check_transversal(SubspaceSpec(("mean",)), square)

    def test_unknown_constraint(self):
        with pytest.raises(ValueError, match="Unknown constraints"):
            SubspaceSpec(("boundary",))


class TestSequences:
    """Test deterministic field sequences."""

    def test_unknown_kind(self, square):
        with pytest.raises(ValueError, match="Unknown sequence kind"):
            make_sequence("spiral", square, 1)

    def test_oscillatory_unit_norm(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=16)
        for n in (1, 2, 3):
            u = make_sequence("oscillatory", grid, n, p=2.0)
            assert u.lp_norm_p(2.0) == pytest.approx(1.0)

    def test_translating_moves(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=32)
        params = {"center": [0.3, 0.5], "radius": 0.1, "shift": 0.2}
        first = make_sequence("translating", grid, 1, **params)
        second = make_sequence("translating", grid, 2, **params)
        peak1 = grid.nodes[np.argmax(first.values[:, 0])]
        peak2 = grid.nodes[np.argmax(second.values[:, 0])]
        assert peak2[0] - peak1[0] == pytest.approx(0.2, abs=1 / 32)

    def test_concentrating_mass_near_boundary(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=32)
        u = make_sequence("concentrating", grid, 2, p=2.0)
        collar = grid.boundary_distance < 0.125
        assert u.lp_norm_p(2.0, collar) == pytest.approx(1.0)

    def test_concentrating_below_resolution(self, square):
        with pytest.raises(ValueError, match="resolution"):
            make_sequence("concentrating", square, 100)

    def test_random_is_seeded(self, square):
        a = make_sequence("random", square, 2, seed=5)
        b = make_sequence("random", square, 2, seed=5)
        c = make_sequence("random", square, 3, seed=5)
        np.testing.assert_array_equal(a.values, b.values)
        assert field_hash(a) != field_hash(c)

    def test_fixed(self, square):
        u = make_sequence(
            "fixed", square, 4, field={"name": "constant", "value": [0, 2]}
        )
        np.testing.assert_array_equal(u.values[:, 1], 2.0)
        with pytest.raises(ValueError, match="'field'"):
            make_sequence("fixed", square, 1)

    def test_sequence_label(self):
        label = sequence_label("translating", shift=0.1, radius=0.3)
        assert label == "translating(radius=0.3,shift=0.1)"
        assert sequence_label("random") == "random"

"""
Tests for seminorms, shifts and cone mollifiers.

Reference values:
- identity field in 1D: every projected quotient is 1, so with the
  indicator of B_1 on [0, 1] the seminorm is (N^2 - N) h^2 = 1 - h
- rigid motions: D(u) = 0 for every pair
- full-sphere cone in 2D: Q = pi I, in 3D: Q = 4 pi / 3 I
"""

import math

import numpy as np
import pytest

from nonlocal_compactness.errors import (
    CapabilityError,
    DomainError,
    RankError,
    ResolutionError,
)
from nonlocal_compactness.fields import (
    RigidMotion,
    VectorField,
    make_field,
    rigid_motion_field,
    sample_field,
)
from nonlocal_compactness.geometry import (
    Cone,
    ball_domain,
    box_domain,
    build_grid,
)
from nonlocal_compactness.kernels import (
    fractional_kernel,
    indicator_kernel,
)
from nonlocal_compactness.operators import (
    cone_matrix,
    direction_functional_F,
    est_for_f_ratio,
    f_curve,
    full_difference_seminorm,
    gap_chain_bound,
    mollifier_stencil,
    mollify,
    projected_quotient,
    seminorm,
    smoothing_gap,
    symgrad_norm_p,
    symgrad_upper_bound_check,
    translation_modulus,
)

BUMP = {"name": "bump", "center": [0.5, 0.5], "radius": 0.3}


@pytest.fixture
def square():
    return build_grid(box_domain([0, 0], [1, 1]), n_per_axis=16)


@pytest.fixture
def bump(square):
    return sample_field(make_field(BUMP, 2), square)


@pytest.fixture
def full_cone():
    return cone_matrix(Cone.full(2))


class TestProjectedQuotient:
    """Test the pointwise difference quotient."""

    def test_identity_quotient_is_one(self, square):
        u = sample_field(make_field({"name": "identity"}, 2), square)
        assert projected_quotient(u, 0, 17) == pytest.approx(1.0)

    def test_diagonal_undefined(self, square):
        u = sample_field(make_field({"name": "identity"}, 2), square)
        with pytest.raises(DomainError):
            projected_quotient(u, 3, 3)


class TestSeminorm:
    """Test the discretized seminorm."""

    def test_identity_closed_form(self):
        grid = build_grid(box_domain([0], [1]), n_per_axis=64)
        u = sample_field(make_field({"name": "identity"}, 1), grid)
        result = seminorm(u, indicator_kernel(1, 2.0, radius=1.0))
        assert result.value_p == pytest.approx(1 - 1 / 64)
        assert result.pair_count == 64 * 63

    @pytest.mark.parametrize(
        "kernel",
        [fractional_kernel(2, 2.0, 0.5), indicator_kernel(2, 2.0)],
        ids=["fractional", "indicator"],
    )
    def test_rigid_motions_vanish(self, square, kernel):
        rng = np.random.default_rng(1)
        for _ in range(100):
            u = rigid_motion_field(RigidMotion.random(2, rng), square)
            assert seminorm(u, kernel).value_p <= 1e-12

    def test_rotation_has_full_difference(self, square):
        u = sample_field(make_field({"name": "rotation"}, 2), square)
        kernel = indicator_kernel(2, 2.0, radius=0.5)
        assert seminorm(u, kernel).value_p <= 1e-12
        assert full_difference_seminorm(u, kernel) > 0.1

    def test_full_difference_dominates(self, bump):
        kernel = fractional_kernel(2, 2.0, 0.5)
        assert seminorm(bump, kernel).value_p <= full_difference_seminorm(
            bump, kernel
        )

    def test_homogeneous_of_degree_p(self, bump):
        kernel = fractional_kernel(2, 3.0, 0.5)
        base = seminorm(bump, kernel).value_p
        assert seminorm(bump.scaled(2.0), kernel).value_p == pytest.approx(
            8.0 * base, rel=1e-12
        )

    def test_worker_count_does_not_change_result(self, bump):
        kernel = fractional_kernel(2, 2.0, 0.5)
        serial = seminorm(bump, kernel, n_jobs=1).value_p
        threaded = seminorm(bump, kernel, n_jobs=3).value_p
        assert serial == threaded

    def test_dimension_mismatch(self, bump):
        with pytest.raises(ValueError, match="dimensions differ"):
            seminorm(bump, fractional_kernel(3, 2.0, 0.5))

    def test_error_estimate(self, bump):
        result = seminorm(
            bump, fractional_kernel(2, 2.0, 0.5), error_estimate=True
        )
        assert math.isfinite(result.estimated_quadrature_error)
        assert not result.quadrature_diverged

    def test_error_estimate_needs_expression(self, square):
        u = VectorField(square, np.ones((square.n_nodes, 2)))
        with pytest.raises(CapabilityError):
            seminorm(u, fractional_kernel(2, 2.0, 0.5), error_estimate=True)

    def test_report_fields(self, bump):
        payload = seminorm(bump, fractional_kernel(2, 2.0, 0.5)).to_dict()
        for key in ("value", "pair_count", "h", "kernel_hash", "field_hash"):
            assert key in payload
        assert payload["h"] == pytest.approx(1 / 16)


class TestSymGrad:
    """Test the Sym(grad u) upper bound."""

    def test_identity_symgrad(self, square):
        u = sample_field(make_field({"name": "identity"}, 2), square)
        # |I|_F^2 = 2 on the unit square
        assert symgrad_norm_p(u, 2.0) == pytest.approx(2.0, rel=1e-6)

    def test_bound_holds_for_identity(self, square):
        u = sample_field(make_field({"name": "identity"}, 2), square)
        report = symgrad_upper_bound_check(u, indicator_kernel(2, 2.0, 0.5))
        assert report.kernel_l1 == pytest.approx(math.pi / 4)
        assert report.ratio <= 1.0

    def test_rigid_motion_gives_zero_ratio(self, square):
        u = sample_field(make_field({"name": "rotation"}, 2), square)
        report = symgrad_upper_bound_check(u, indicator_kernel(2, 2.0, 0.5))
        assert report.ratio == 0.0

    def test_needs_integrable_kernel(self, bump):
        with pytest.raises(CapabilityError):
            symgrad_upper_bound_check(bump, fractional_kernel(2, 2.0, 0.5))


class TestShifts:
    """Test the direction functional and translation modulus."""

    def test_constant_field_strip(self):
        # u = e1 on the unit square: the shifted difference lives on two
        # strips of width h
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=8)
        u = sample_field(make_field({"name": "constant"}, 2), grid)
        value = direction_functional_F(u, 0.25, [1.0, 0.0], 2.0)
        assert value == pytest.approx(0.5, rel=1e-9)

    def test_orthogonal_shift_projection(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=8)
        u = sample_field(make_field({"name": "constant"}, 2), grid)
        # the difference is parallel to e1, the direction is e2
        assert direction_functional_F(u, 0.25, [0.0, 1.0], 2.0) == (
            pytest.approx(0.0, abs=1e-12)
        )

    def test_shift_must_be_positive(self, bump):
        with pytest.raises(ValueError, match="h_mag"):
            direction_functional_F(bump, 0.0, [1.0, 0.0], 2.0)

    def test_translation_modulus(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=8)
        u = sample_field(make_field({"name": "constant"}, 2), grid)
        assert translation_modulus(u, [0.0, 0.0], 2.0) == 0.0
        assert translation_modulus(u, [0.25, 0.0], 2.0) == pytest.approx(
            0.5, rel=1e-9
        )

    def test_f_curve(self, bump):
        curve = f_curve(bump, [1.0, 0.0], 2.0, [0.1, 0.2])
        assert [t for t, _ in curve] == [0.1, 0.2]
        assert curve[0][1] < curve[1][1]


class TestConeMatrix:
    """Test the cone matrix and mollifier stencil."""

    def test_full_circle(self, full_cone):
        np.testing.assert_allclose(full_cone.Q, math.pi * np.eye(2))
        assert full_cone.area == pytest.approx(2 * math.pi)
        assert full_cone.proof_constant(2.0) == pytest.approx(4.0)

    def test_narrow_cone_within_sector_bound(self):
        mm = cone_matrix(Cone((0, 1), math.pi / 4))
        assert mm.lambda_min >= mm.sector_bound * 0.98
        np.testing.assert_allclose(mm.Q @ mm.Q_inverse, np.eye(2), atol=1e-12)

    def test_full_sphere_3d(self):
        mm = cone_matrix(Cone.full(3))
        np.testing.assert_allclose(
            mm.Q, 4 * math.pi / 3 * np.eye(3), rtol=1e-3, atol=1e-3
        )
        assert mm.area == pytest.approx(4 * math.pi)

    def test_degenerate_cone(self):
        with pytest.raises(RankError):
            cone_matrix(Cone((0, 1), 1e-9))

    def test_stencil_is_normalized(self, full_cone):
        stencil = mollifier_stencil(full_cone, 0.25, np.array([1 / 32] * 2))
        np.testing.assert_allclose(
            stencil.weights.sum(axis=0), np.eye(2), atol=1e-12
        )
        assert stencil.normalization_defect < 0.25

    def test_stencil_resolution(self, full_cone):
        with pytest.raises(ResolutionError):
            mollifier_stencil(full_cone, 0.1, np.array([0.1, 0.1]))


class TestMollifier:
    """Test mollification and smoothing gaps."""

    def test_interior_of_constant_is_fixed(self, square, full_cone):
        u = sample_field(make_field({"name": "constant"}, 2), square)
        w = mollify(u, 0.25, full_cone)
        interior = square.boundary_distance > 0.26
        np.testing.assert_allclose(w.values[interior], u.values[interior])

    def test_periodic_constant_is_fixed(self, square, full_cone):
        u = sample_field(make_field({"name": "constant"}, 2), square)
        w = mollify(u, 0.25, full_cone, extension="periodic")
        np.testing.assert_allclose(w.values, u.values, atol=1e-12)

    @pytest.mark.parametrize(
        "d", [2, pytest.param(3, marks=pytest.mark.slow)]
    )
    @pytest.mark.parametrize("narrow", [False, True], ids=["full", "cap"])
    @pytest.mark.parametrize("cells", [4, 8])
    def test_stencil_reproduces_constants(self, d, narrow, cells):
        axis = np.zeros(d)
        axis[-1] = 1.0
        cone = Cone(tuple(axis), math.pi / 4) if narrow else Cone.full(d)
        mm = cone_matrix(cone)
        grid = build_grid(box_domain([0] * d, [1] * d), n_per_axis=16)
        stencil = mollifier_stencil(mm, cells / 16, grid.h)
        np.testing.assert_allclose(
            stencil.weights.sum(axis=0), np.eye(d), atol=1e-12
        )
        u = sample_field(make_field({"name": "constant"}, d), grid)
        w = mollify(u, cells / 16, mm, extension="periodic")
        np.testing.assert_allclose(w.values, u.values, rtol=1e-3, atol=1e-3)

    def test_expression_extension(self, square, full_cone):
        u = sample_field(make_field({"name": "constant"}, 2), square)
        w = mollify(u, 0.25, full_cone, extension="expression")
        np.testing.assert_allclose(w.values, u.values, atol=1e-12)

    def test_extension_capabilities(self, full_cone):
        grid = build_grid(ball_domain([0, 0], 1.0), n_per_axis=16)
        u = VectorField(grid, np.ones((grid.n_nodes, 2)))
        with pytest.raises(CapabilityError):
            mollify(u, 0.25, full_cone, extension="periodic")
        with pytest.raises(CapabilityError):
            mollify(u, 0.25, full_cone, extension="expression")
        with pytest.raises(ValueError, match="Unknown extension"):
            mollify(u, 0.25, full_cone, extension="reflect")

    def test_gap_shrinks_with_delta(self, bump, full_cone):
        wide = smoothing_gap(bump, 0.25, full_cone, 2.0)
        narrow = smoothing_gap(bump, 0.125, full_cone, 2.0)
        assert 0 < narrow < wide

    def test_gap_below_chain_bound(self, bump, full_cone):
        report = gap_chain_bound(
            bump, 0.125, full_cone, 2.0, n_radial=4, n_directions=16
        )
        assert report.gap <= report.bound
        assert report.proof_constant == pytest.approx(4.0)


@pytest.mark.slow
class TestDirectionRatio:
    """Test the direction-functional ratio."""

    def test_ratio_is_finite(self):
        grid = build_grid(box_domain([0, 0], [1, 1]), n_per_axis=8)
        u = sample_field(make_field(BUMP, 2), grid)
        kernel = indicator_kernel(2, 2.0, radius=0.5)
        ratio = est_for_f_ratio(u, kernel, [1.0, 0.0], 0.1, 0.25, 0.5)
        assert ratio.numerator == pytest.approx(
            direction_functional_F(u, 0.1, [1.0, 0.0], 2.0)
        )
        assert 0 < ratio.denominator < math.inf
        assert math.isfinite(ratio.ratio)

    def test_t_range(self, bump):
        with pytest.raises(ValueError, match="t must lie"):
            est_for_f_ratio(
                bump, indicator_kernel(2, 2.0), [1, 0], 0.3, 0.25, 0.5
            )

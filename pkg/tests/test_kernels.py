"""
Tests for interaction kernels and their admissibility checks.

Closed forms used below (d = 2):
- fractional(s): rho = |xi|^-(d + p(s-1)), so delta^p / int_{B_delta} rho
  decays like delta^(ps)
- indicator on B_1: int_{B_delta} rho = pi delta^2
- borderline: int_{B_delta} rho = 2 pi delta^p / p, a constant mass ratio
"""

import math

import numpy as np
import pytest

from nonlocal_compactness.errors import (
    CapabilityError,
    KernelSingularityError,
)
from nonlocal_compactness.geometry import Cone
from nonlocal_compactness.kernels import (
    Kernel,
    ball_integral,
    borderline_kernel,
    check_cone_condition,
    check_dirac_sequence,
    check_mass_ratio_limit,
    check_radial_monotone,
    cone_restricted_kernel,
    custom_radial_kernel,
    eval_kernel,
    fractional_kernel,
    indicator_kernel,
    integrable_quotient,
    kernel_family,
    kernel_hash,
    make_kernel,
    mass_ratio,
    mollified_kernel,
    power_kernel,
    rescaled_kernel,
    rho_theta0,
    truncated_kernel,
)


class TestKernelConstruction:
    """Test kernel constructors and validation."""

    def test_make_kernel_fractional(self):
        kernel = make_kernel({"kind": "fractional", "d": 2, "p": 2, "s": 0.5})
        assert kernel.kind == "fractional"
        assert kernel.radial_exponent == pytest.approx(-1.0)
        assert kernel.is_singular
        assert kernel.is_radial

    def test_make_kernel_unknown_kind(self):
        with pytest.raises(ValueError, match="Unknown kernel kind"):
            make_kernel({"kind": "gaussian", "d": 2, "p": 2})

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError, match="p >= 1"):
            Kernel(d=2, p=0.5, kind="indicator")

    def test_fractional_order_range(self):
        with pytest.raises(ValueError, match="s must lie in"):
            fractional_kernel(2, 2.0, 1.0)

    def test_power_kernel_must_be_integrable(self):
        with pytest.raises(ValueError, match="not locally integrable"):
            power_kernel(2, 2.0, -2.0)

    def test_cone_restricted_needs_cone(self):
        with pytest.raises(ValueError, match="need a cone"):
            make_kernel(
                {"kind": "cone_restricted", "d": 2, "p": 2, "s": 0.5}
            )

    def test_cone_restricted_is_not_radial(self):
        cone = Cone((0.0, 1.0), math.pi / 4)
        kernel = cone_restricted_kernel(fractional_kernel(2, 2.0, 0.5), cone)
        assert not kernel.is_radial
        assert kernel.support_radius == 1.0

    def test_hash_is_stable_and_distinguishes(self):
        a = fractional_kernel(2, 2.0, 0.5)
        b = fractional_kernel(2, 2.0, 0.5)
        c = fractional_kernel(2, 2.0, 0.25)
        assert kernel_hash(a) == kernel_hash(b)
        assert kernel_hash(a) != kernel_hash(c)


class TestEvalKernel:
    """Test pointwise evaluation."""

    def test_fractional_value(self):
        kernel = fractional_kernel(2, 2.0, 0.5)
        assert eval_kernel(kernel, [0.5, 0.0]) == pytest.approx(2.0)

    def test_singular_at_origin_raises(self):
        kernel = fractional_kernel(2, 2.0, 0.5)
        with pytest.raises(KernelSingularityError):
            eval_kernel(kernel, [0.0, 0.0])

    def test_indicator_at_origin(self):
        assert eval_kernel(indicator_kernel(2, 2.0), [0.0, 0.0]) == 1.0

    def test_zero_outside_support(self):
        kernel = indicator_kernel(2, 2.0, radius=0.5)
        assert eval_kernel(kernel, [0.3, 0.3]) == 0.0
        assert eval_kernel(kernel, [0.3, 0.0]) == 1.0

    def test_vectorized(self):
        kernel = fractional_kernel(2, 2.0, 0.5)
        values = eval_kernel(kernel, np.array([[0.5, 0.0], [0.0, -0.25]]))
        np.testing.assert_allclose(values, [2.0, 4.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="components"):
            eval_kernel(fractional_kernel(2, 2.0, 0.5), [0.5, 0.0, 0.0])

    def test_cone_restricted_outside_cone(self):
        cone = Cone((0.0, 1.0), math.pi / 4)
        kernel = cone_restricted_kernel(fractional_kernel(2, 2.0, 0.5), cone)
        assert eval_kernel(kernel, [0.0, 0.5]) == pytest.approx(2.0)
        assert eval_kernel(kernel, [0.5, 0.0]) == 0.0
        assert eval_kernel(kernel, [0.0, 1.5]) == 0.0

    def test_custom_radial_interpolates_log_log(self):
        kernel = custom_radial_kernel(2, 2.0, [0.1, 1.0], [10.0, 1.0])
        assert eval_kernel(kernel, [0.5, 0.0]) == pytest.approx(2.0)
        # extrapolated with the first segment's power law
        assert eval_kernel(kernel, [0.01, 0.0]) == pytest.approx(100.0)
        assert eval_kernel(kernel, [1.0, 0.0]) == 0.0


class TestRhoTheta0:
    """Test the cone-infimum kernel."""

    def test_equals_rho_for_fractional(self):
        # theta -> (theta r)^-1 theta^-2 is decreasing, so theta = 1 wins
        kernel = fractional_kernel(2, 2.0, 0.5)
        value = rho_theta0(kernel, 0.5, 0.4, [1.0, 0.0])
        assert value == pytest.approx(eval_kernel(kernel, [0.4, 0.0]))

    def test_minimum_at_theta0(self):
        # (theta r)^3 theta^-2 = r^3 theta is smallest at theta0
        kernel = power_kernel(2, 2.0, 3.0)
        value = rho_theta0(kernel, 0.5, 0.4, [0.0, 1.0])
        assert value == pytest.approx(0.4**3 * 0.5)

    def test_never_exceeds_rho(self):
        rng = np.random.default_rng(0)
        kernel = power_kernel(2, 2.0, 1.0, radius=0.8)
        radii = rng.uniform(0.05, 1.2, 50)
        values = rho_theta0(kernel, 0.3, radii, [0.6, 0.8])
        direct = eval_kernel(kernel, radii[:, None] * np.array([0.6, 0.8]))
        assert np.all(values <= direct + 1e-15)

    def test_theta0_range(self):
        with pytest.raises(ValueError, match="theta0"):
            rho_theta0(fractional_kernel(2, 2.0, 0.5), 1.0, 0.5, [1, 0])


class TestIntegrals:
    """Test ball integrals and mass ratios."""

    def test_indicator_ball_integral(self):
        kernel = indicator_kernel(2, 2.0)
        assert ball_integral(kernel, 0.5) == pytest.approx(math.pi / 4)

    def test_fractional_mass_ratio(self):
        kernel = fractional_kernel(2, 2.0, 0.5)
        assert mass_ratio(kernel, 0.1) == pytest.approx(
            0.1 / (2 * math.pi), rel=1e-8
        )

    def test_borderline_mass_ratio_is_constant(self):
        kernel = borderline_kernel(2, 2.0)
        for delta in (0.5, 0.01, 1e-6):
            assert mass_ratio(kernel, delta) == pytest.approx(
                1 / math.pi, rel=1e-8
            )

    def test_cone_restricted_ball_integral(self):
        cone = Cone((0.0, 1.0), math.pi / 4)
        kernel = cone_restricted_kernel(indicator_kernel(2, 2.0), cone)
        # cap of angle pi/2 times int_0^delta r dr
        assert ball_integral(kernel, 0.5) == pytest.approx(
            (math.pi / 2) * 0.125
        )

    def test_integrable_quotient_finite(self):
        # |xi|^-p |xi|^p = 1 on B_1
        kernel = power_kernel(2, 2.0, 2.0)
        assert integrable_quotient(kernel) == pytest.approx(math.pi)

    def test_integrable_quotient_diverges(self):
        kernel = fractional_kernel(2, 2.0, 0.5)
        assert integrable_quotient(kernel) == math.inf


class TestConditionChecks:
    """Test the admissibility condition checks."""

    def test_fractional_mass_ratio_slope(self):
        report = check_mass_ratio_limit(fractional_kernel(2, 2.0, 0.5))
        assert report.condition_id == "mass_ratio_limit"
        assert report.fitted_log_slope == pytest.approx(1.0, abs=1e-3)
        assert report.verdict == "satisfied"
        deltas = [s[0] for s in report.samples]
        assert all(a > b for a, b in zip(deltas, deltas[1:]))

    @pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_fractional_satisfied_for_every_order(self, s, d, p):
        report = check_mass_ratio_limit(fractional_kernel(d, p, s))
        assert report.verdict == "satisfied"
        assert report.fitted_log_slope == pytest.approx(p * s, rel=0.1)

    def test_borderline_not_satisfied(self):
        report = check_mass_ratio_limit(borderline_kernel(2, 2.0))
        assert report.fitted_log_slope == pytest.approx(0.0, abs=1e-3)
        assert report.verdict == "inconclusive"
        # int_{B_delta} 1 = pi delta^2
        assert report.samples[-1][1] == pytest.approx(1 / math.pi, rel=0.01)

    def test_integrable_quotient_violated(self):
        # delta^2 / (pi delta^4 / 2) blows up as delta -> 0
        report = check_mass_ratio_limit(power_kernel(2, 2.0, 2.0))
        assert report.fitted_log_slope == pytest.approx(-2.0, abs=1e-3)
        assert report.verdict == "violated"

    def test_delta_sequence_must_be_geometric(self):
        with pytest.raises(ValueError, match="geometric"):
            check_mass_ratio_limit(
                fractional_kernel(2, 2.0, 0.5), [0.5, 0.4, 0.1, 0.05]
            )

    def test_radial_monotone_satisfied(self):
        radii = np.geomspace(0.01, 0.9, 10)
        report = check_radial_monotone(power_kernel(2, 2.0, 1.0), radii)
        assert report.verdict == "satisfied"

    def test_radial_monotone_violated(self):
        # |xi|^-2 |xi|^3 grows with |xi|
        radii = np.geomspace(0.01, 0.9, 10)
        report = check_radial_monotone(power_kernel(2, 2.0, 3.0), radii)
        assert report.verdict == "violated"

    def test_cone_condition_for_restricted_fractional(self):
        cone = Cone((0.0, 1.0), math.pi / 4)
        kernel = cone_restricted_kernel(fractional_kernel(2, 2.0, 0.5), cone)
        deltas = 2.0 ** -np.arange(1, 21)
        report = check_cone_condition(kernel, 0.5, cone, deltas)
        assert report.verdict == "satisfied"
        assert report.details["direction_defect"] == pytest.approx(0.0)
        # denominator int_0^delta r^-1 r dr = delta
        assert report.fitted_log_slope == pytest.approx(1.0, abs=1e-6)

    def test_report_frame(self):
        report = check_mass_ratio_limit(indicator_kernel(2, 2.0))
        frame = report.to_frame()
        assert list(frame.columns) == ["delta", "ratio"]
        assert len(frame) == 40


class TestKernelFamilies:
    """Test kernel sequences rho_n."""

    def test_unknown_family(self):
        with pytest.raises(ValueError, match="Unknown kernel family"):
            kernel_family("smoothed", indicator_kernel(2, 2.0), 2)

    def test_truncated_kernel(self):
        base = fractional_kernel(2, 2.0, 0.5)
        kernel = truncated_kernel(base, 4)
        assert eval_kernel(kernel, [0.2, 0.0]) == 0.0
        assert eval_kernel(kernel, [0.5, 0.0]) == pytest.approx(2.0)
        assert not kernel.is_singular

    def test_rescaled_has_unit_mass(self):
        base = indicator_kernel(2, 2.0)
        for n in (1, 3):
            kernel = kernel_family("rescaled", base, n)
            assert ball_integral(kernel, kernel.support_radius) == (
                pytest.approx(1.0)
            )

    def test_rescaled_needs_compact_base(self):
        with pytest.raises(CapabilityError):
            rescaled_kernel(fractional_kernel(2, 2.0, 0.5), 2)

    def test_dirac_sequence(self):
        base = indicator_kernel(2, 2.0)
        kernels = [rescaled_kernel(base, n) for n in (1, 2, 3, 4)]
        report = check_dirac_sequence(kernels)
        assert report.unit_mass
        assert report.tails_vanish
        assert report.tail_masses[0][0] == pytest.approx(0.75)

    @pytest.mark.slow
    def test_mollified_indicator_is_one_inside(self):
        kernel = mollified_kernel(indicator_kernel(2, 2.0), 4)
        assert kernel.kind == "custom_radial"
        assert eval_kernel(kernel, [0.5, 0.0]) == pytest.approx(1.0, rel=2e-2)

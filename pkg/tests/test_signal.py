"""
Unit tests for spectral signals and the uniformly-local norms.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from config.constants import ForceName, ModulusKind, NormKind, Reconstruction
from lab.gallery import ForceSpec, default_setup, generate
from lab.signal import (
    BasisDescriptor,
    ModulusCurve,
    SpectralSignal,
    TimeGrid,
    exp_kernel_tail,
    line_sine_inverse,
    line_sine_transform,
    lpb_norm,
    modulus_of_continuity,
    norm_weights,
    normality_modulus,
    physical_l2_norms,
    pointwise_norms,
    shift,
    window_integrals,
)
from utils.error_handler import (
    InvalidParameter,
    InvalidSignal,
    MisalignedOffset,
    SpanTooShort,
)


def _signal(coeffs, dt=1.0 / 16.0, modes=None, reconstruction=Reconstruction.PIECEWISE_CONSTANT):
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim == 1:
        coeffs = coeffs[:, None]
    grid = TimeGrid(0.0, dt, coeffs.shape[0])
    return SpectralSignal(grid, BasisDescriptor.sine(modes or coeffs.shape[1]), coeffs, reconstruction)


@pytest.fixture
def random_signal(unit_grid, sine_basis):
    rng = np.random.default_rng(7)
    return SpectralSignal(unit_grid, sine_basis, rng.normal(size=(unit_grid.count, sine_basis.mode_count)))


@pytest.fixture
def heat_pulse():
    spec = ForceSpec(ForceName.HEAT_PULSE, n_max=8)
    grid, basis = default_setup(spec)
    return generate(spec, grid, basis)


class TestTimeGrid:
    """Test cases for TimeGrid."""

    def test_span_and_times(self, unit_grid):
        assert unit_grid.span == pytest.approx(8.0)
        assert unit_grid.t_end == pytest.approx(8.0)
        assert unit_grid.times()[16] == pytest.approx(1.0)

    def test_step_must_leave_eight_samples_per_window(self):
        with pytest.raises(InvalidParameter, match="fewer than 8 samples"):
            TimeGrid(0.0, 0.25, 10)

    @pytest.mark.parametrize("count", [1, 0, 2.5])
    def test_count_must_be_integer_at_least_two(self, count):
        with pytest.raises(InvalidParameter, match="count"):
            TimeGrid(0.0, 0.125, count)

    def test_steps_for_rejects_misaligned_offsets(self, unit_grid):
        assert unit_grid.steps_for(0.5) == 8
        with pytest.raises(MisalignedOffset):
            unit_grid.steps_for(0.03)

    def test_index_of_outside_raises(self, unit_grid):
        assert unit_grid.index_of(2.0) == 32
        with pytest.raises(SpanTooShort):
            unit_grid.index_of(9.0)


class TestBasisDescriptor:
    """Test cases for BasisDescriptor."""

    def test_line_grid_nodes(self):
        basis = BasisDescriptor.line(8.0, 17)
        assert basis.dx == pytest.approx(1.0)
        assert basis.nodes()[0] == -8.0 and basis.nodes()[-1] == 8.0

    def test_line_grid_needs_half_length(self):
        with pytest.raises(InvalidParameter, match="half_length"):
            BasisDescriptor(BasisDescriptor.line(8.0, 17).kind, 17)

    def test_sine_basis_has_no_nodes(self, sine_basis):
        with pytest.raises(InvalidParameter):
            sine_basis.nodes()

    def test_norm_weights_carry_pi(self, sine_basis):
        np.testing.assert_allclose(norm_weights(sine_basis, NormKind.H1), math.pi * np.array([1, 4, 9, 16]))
        np.testing.assert_allclose(norm_weights(sine_basis, NormKind.HM1),
                                   math.pi / np.array([1, 4, 9, 16]))

    def test_energy_norm_needs_two_components(self, sine_basis):
        with pytest.raises(InvalidParameter, match="position, velocity"):
            norm_weights(sine_basis, NormKind.ENERGY)

    def test_line_grid_rejects_sobolev_norms(self):
        with pytest.raises(InvalidParameter, match="not available on a line grid"):
            norm_weights(BasisDescriptor.line(8.0, 17), NormKind.H1)


class TestSpectralSignal:
    """Test cases for SpectralSignal."""

    def test_shape_mismatch_is_rejected(self, unit_grid, sine_basis):
        with pytest.raises(InvalidSignal, match="shape"):
            SpectralSignal(unit_grid, sine_basis, np.zeros((unit_grid.count, 3)))

    def test_non_finite_values_are_rejected(self, unit_grid, sine_basis):
        coeffs = np.zeros((unit_grid.count, sine_basis.mode_count))
        coeffs[5, 2] = np.nan
        with pytest.raises(InvalidSignal, match="non-finite"):
            SpectralSignal(unit_grid, sine_basis, coeffs)

    def test_coefficients_are_read_only(self, constant_signal):
        with pytest.raises(ValueError):
            constant_signal.coeffs[0, 0] = 2.0

    def test_piecewise_linear_values_interpolate(self):
        signal = _signal(np.arange(17.0), reconstruction=Reconstruction.PIECEWISE_LINEAR)
        assert signal.values_at(np.array([0.5 / 16.0]))[0, 0] == pytest.approx(0.5)

    def test_piecewise_constant_values_hold(self):
        signal = _signal(np.arange(17.0))
        assert signal.values_at(np.array([1.5 / 16.0]))[0, 0] == 1.0

    def test_values_outside_span_raise(self, constant_signal):
        with pytest.raises(SpanTooShort):
            constant_signal.values_at(np.array([8.5]))

    def test_velocity_block_needs_two_components(self, constant_signal):
        with pytest.raises(InvalidSignal):
            constant_signal.velocities()


class TestModulusCurve:
    """Test cases for ModulusCurve."""

    def test_offsets_must_ascend(self):
        with pytest.raises(InvalidParameter, match="ascending"):
            ModulusCurve([0.5, 0.25], [0.0, 0.0], ModulusKind.CONTINUITY)

    def test_values_must_be_non_negative(self):
        with pytest.raises(InvalidParameter, match="non-negative"):
            ModulusCurve([0.5], [-1.0], ModulusKind.NORMALITY)

    def test_tail_curves_accept_zero_offset(self):
        curve = ModulusCurve([0.0, 1.0], [2.0, 1.0], ModulusKind.TAIL)
        assert curve.as_pairs() == [(0.0, 2.0), (1.0, 1.0)]
        assert curve.last == 1.0


class TestLpbNorm:
    """Test cases for lpb_norm."""

    def test_constant_mode_one_gives_sqrt_pi(self, constant_signal):
        assert lpb_norm(constant_signal, 2.0) == pytest.approx(math.sqrt(math.pi), rel=1e-12)

    def test_zero_signal_is_zero(self, unit_grid, sine_basis):
        zero = SpectralSignal(unit_grid, sine_basis, np.zeros((unit_grid.count, 4)))
        assert lpb_norm(zero, 3.0) == 0.0

    def test_heat_pulse_window_mass_is_about_pi(self, heat_pulse):
        # each pulse carries n^2 pi over 1/n^2, rounded up to whole samples
        assert math.pi <= lpb_norm(heat_pulse, 2.0) ** 2 <= 1.2 * math.pi

    def test_short_span_raises(self):
        with pytest.raises(SpanTooShort):
            lpb_norm(_signal(np.ones(10)), 2.0)

    @pytest.mark.parametrize("p", [1.0, 0.5, math.inf])
    def test_exponent_out_of_range(self, constant_signal, p):
        with pytest.raises(InvalidParameter, match="exponent p"):
            lpb_norm(constant_signal, p)

    def test_piecewise_linear_p2_is_exact_for_linear_ramp(self):
        # g(t) = t on [0, 1], ||g||^2 = pi t^2, int = pi/3
        signal = _signal(np.linspace(0.0, 1.0, 17), reconstruction=Reconstruction.PIECEWISE_LINEAR)
        assert lpb_norm(signal, 2.0) == pytest.approx(math.sqrt(math.pi / 3.0), rel=1e-12)

    @given(scale=st.floats(min_value=-50.0, max_value=50.0, allow_nan=False))
    @settings(max_examples=25, deadline=None)
    def test_homogeneity(self, scale):
        rng = np.random.default_rng(3)
        signal = _signal(rng.normal(size=(33, 3)))
        scaled = signal.with_coeffs(scale * signal.coeffs)
        assert lpb_norm(scaled, 2.5) == pytest.approx(abs(scale) * lpb_norm(signal, 2.5), rel=1e-10, abs=1e-12)

    def test_parseval_matches_physical_quadrature(self, random_signal):
        np.testing.assert_allclose(physical_l2_norms(random_signal, 512), pointwise_norms(random_signal),
                                   rtol=1e-6)


class TestModuli:
    """Test cases for the continuity and normality moduli."""

    def test_constant_signal_has_zero_continuity_modulus(self, constant_signal):
        curve = modulus_of_continuity(constant_signal, 2.0, [0.0625, 0.5, 1.0])
        assert curve.kind is ModulusKind.CONTINUITY
        np.testing.assert_array_equal(curve.values, 0.0)

    def test_sine_in_time_modulus_bounded_by_tau_squared(self):
        t = np.arange(129) / 16.0
        signal = _signal(np.sin(t))
        taus = [0.0625, 0.125, 0.25, 0.5]
        curve = modulus_of_continuity(signal, 2.0, taus)
        assert np.all(curve.values <= math.pi * np.asarray(taus) ** 2 * (1.0 + 1e-12))
        assert np.all(np.diff(curve.values) > 0.0)

    def test_misaligned_offset_raises(self, constant_signal):
        with pytest.raises(MisalignedOffset):
            modulus_of_continuity(constant_signal, 2.0, [0.1])

    def test_offset_leaving_no_window_raises(self, constant_signal):
        with pytest.raises(SpanTooShort):
            modulus_of_continuity(constant_signal, 2.0, [7.5])

    def test_normality_of_bounded_signal(self, constant_signal):
        taus = [0.0625, 0.25, 1.0, 2.0]
        curve = normality_modulus(constant_signal, 2.0, taus)
        np.testing.assert_allclose(curve.values, math.pi * np.asarray(taus), rtol=1e-12)

    def test_normality_is_nondecreasing(self, random_signal):
        curve = normality_modulus(random_signal, 3.0, [k / 16.0 for k in range(1, 40)])
        assert np.all(np.diff(curve.values) >= 0.0)

    def test_heat_pulse_fills_short_window(self, heat_pulse):
        curve = normality_modulus(heat_pulse, 2.0, [1.0 / 64.0, 0.5])
        assert curve.values[0] == pytest.approx(math.pi, rel=1e-12)
        assert curve.values[1] >= math.pi

    @given(scale=st.floats(min_value=0.1, max_value=20.0))
    @settings(max_examples=20, deadline=None)
    def test_moduli_scale_with_power_p(self, scale):
        rng = np.random.default_rng(11)
        signal = _signal(rng.normal(size=(49, 2)))
        scaled = signal.with_coeffs(scale * signal.coeffs)
        taus = [0.125, 0.5]
        for modulus in (modulus_of_continuity, normality_modulus):
            np.testing.assert_allclose(modulus(scaled, 2.0, taus).values,
                                       scale ** 2 * modulus(signal, 2.0, taus).values, rtol=1e-10)


class TestExpKernelTail:
    """Test cases for exp_kernel_tail."""

    @pytest.mark.parametrize("N", [0.5, 1.0, 10.0, 100.0])
    def test_constant_signal_closed_form(self, constant_signal, N):
        expected = math.pi * (1.0 - math.exp(-N)) / N
        assert exp_kernel_tail(constant_signal, 2.0, N) == pytest.approx(expected, rel=1e-12)

    def test_piecewise_linear_constant_signal(self, unit_grid, sine_basis, constant_signal):
        linear = SpectralSignal(unit_grid, sine_basis, constant_signal.coeffs, Reconstruction.PIECEWISE_LINEAR)
        N = 5.0
        assert exp_kernel_tail(linear, 2.0, N) == pytest.approx(math.pi * (1.0 - math.exp(-N)) / N, rel=1e-10)

    def test_nonincreasing_in_rate(self, random_signal):
        values = [exp_kernel_tail(random_signal, 2.0, N) for N in (0.5, 1.0, 4.0, 16.0, 64.0)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_zero_signal(self, unit_grid, sine_basis):
        zero = SpectralSignal(unit_grid, sine_basis, np.zeros((unit_grid.count, 4)))
        assert exp_kernel_tail(zero, 2.0, 3.0) == 0.0

    @pytest.mark.parametrize("N", [0.0, -1.0])
    def test_rate_must_be_positive(self, constant_signal, N):
        with pytest.raises(InvalidParameter, match="kernel rate N"):
            exp_kernel_tail(constant_signal, 2.0, N)

    def test_split_integral_bound(self, heat_pulse):
        N = 256.0
        root = 1.0 / math.sqrt(N)
        tau = math.ceil(root / heat_pulse.grid.dt) * heat_pulse.grid.dt
        nu = normality_modulus(heat_pulse, 2.0, [tau]).last
        bound = nu + math.exp(-math.sqrt(N)) * lpb_norm(heat_pulse, 2.0) ** 2
        assert exp_kernel_tail(heat_pulse, 2.0, N) <= bound


class TestShift:
    """Test cases for shift."""

    def test_shift_restricts_span(self, random_signal):
        shifted = shift(random_signal, 0.5)
        assert shifted.grid.count == random_signal.grid.count - 8
        assert shifted.grid.t0 == 0.0
        np.testing.assert_array_equal(shifted.coeffs[0], random_signal.coeffs[8])

    def test_group_identity_on_common_span(self, random_signal):
        back = shift(shift(random_signal, 0.5), -0.5)
        assert back.grid.t0 == pytest.approx(0.5)
        np.testing.assert_array_equal(back.coeffs, random_signal.coeffs[8:8 + back.grid.count])

    def test_shift_never_increases_norm(self, random_signal):
        assert lpb_norm(shift(random_signal, 1.5), 2.0) <= lpb_norm(random_signal, 2.0)

    def test_period_shift_reproduces_samples(self):
        t = np.arange(129) / 16.0
        signal = _signal(np.sin(2.0 * math.pi * t))
        shifted = shift(signal, 1.0)
        np.testing.assert_allclose(shifted.coeffs, signal.coeffs[:shifted.grid.count], atol=1e-12)

    def test_misaligned_shift_raises(self, random_signal):
        with pytest.raises(MisalignedOffset):
            shift(random_signal, 0.01)

    def test_shift_past_span_raises(self, random_signal):
        with pytest.raises(SpanTooShort):
            shift(random_signal, 8.0)

    def test_window_integrals_are_shift_compatible(self, random_signal):
        weights = norm_weights(random_signal.basis, NormKind.L2)
        original = window_integrals(random_signal, 2.0, 1.0, weights)
        shifted = window_integrals(shift(random_signal, 0.75), 2.0, 1.0, weights)
        np.testing.assert_allclose(shifted, original[12:12 + shifted.size], rtol=1e-12, atol=1e-12)

    def test_shift_carries_exact_evaluator(self, smooth_force):
        shifted = shift(smooth_force, 0.5)
        np.testing.assert_allclose(shifted.exact(np.array([0.0]))[0, 0], math.sin(0.5))


class TestLineSineTransform:
    """Test cases for the DST helpers."""

    def test_inverse_restores_interior_and_zero_boundary(self):
        rng = np.random.default_rng(5)
        values = np.pad(rng.normal(size=15), 1)
        restored = line_sine_inverse(line_sine_transform(values))
        np.testing.assert_allclose(restored, values, atol=1e-12)

    def test_transform_is_orthonormal(self):
        rng = np.random.default_rng(6)
        values = np.pad(rng.normal(size=31), 1)
        assert np.sum(line_sine_transform(values) ** 2) == pytest.approx(np.sum(values ** 2))

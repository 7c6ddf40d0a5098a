"""
Unit tests for the heat, damped-wave and reaction-diffusion integrators.
"""

import math

import numpy as np
import pytest

from config.constants import ForceName, ForceQuadrature, IdentityKind, Nonlinearity
from lab.gallery import (
    ForceSpec, bump_profile, default_setup, generate, heat_mode_oracle, wave_mode_oracle,
)
from lab.signal import BasisDescriptor, SpectralSignal, TimeGrid
from lab.solvers import (
    HeatProblem,
    RDProblem,
    ReactionTerm,
    WaveProblem,
    dissipation_ratio,
    heat_solve,
    rd_solve,
    wave_solve,
    wave_state_at,
    weighted_energy_balance,
    weighted_energy_terms,
)
from utils.error_handler import (
    GridMismatch,
    InvalidParameter,
    InvalidState,
    SpanTooShort,
    UnstableStep,
)

MU = math.sqrt(3.0) / 2.0


def _zero_force(modes=2, dt=1.0 / 16.0, count=65):
    grid = TimeGrid(0.0, dt, count)
    return SpectralSignal(grid, BasisDescriptor.sine(modes), np.zeros((count, modes)))


def _free_mode_one(t):
    """Mode-1 wave with gamma = 1 released from u = 1 at rest."""
    envelope = math.exp(-t / 2.0)
    return (envelope * (math.cos(MU * t) + math.sin(MU * t) / (2.0 * MU)),
            -envelope * math.sin(MU * t) / MU)


def _line_force(dt, count, basis):
    return SpectralSignal(TimeGrid(0.0, dt, count), basis, np.zeros((count, basis.mode_count)))


@pytest.fixture
def line_basis():
    return BasisDescriptor.line(8.0, 129)


@pytest.fixture
def bump_state(line_basis):
    return bump_profile(line_basis.nodes(), 2.0)[0]


class TestReactionTerm:
    """Test cases for ReactionTerm."""

    def test_linear_term_is_zero(self):
        assert not ReactionTerm()(np.array([1.0, -2.0])).any()

    def test_cubic_term(self):
        term = ReactionTerm(Nonlinearity.CUBIC)
        np.testing.assert_array_equal(term(np.array([2.0, -1.0])), [8.0, -1.0])
        assert term.derivative_bound(2.0) == 12.0

    @pytest.mark.parametrize("kwargs, parameter", [
        ({'p': 3.0}, "p"),
        ({'beta': 1.5}, "beta"),
        ({'beta': 0.0}, "beta"),
        ({'K': -1.0}, "K"),
    ])
    def test_growth_conditions_are_checked(self, kwargs, parameter):
        with pytest.raises(InvalidParameter) as excinfo:
            ReactionTerm(Nonlinearity.CUBIC, **kwargs)
        assert excinfo.value.parameter == parameter


class TestHeatSolve:
    """Test cases for heat_solve."""

    @pytest.mark.parametrize("alpha", [0.0, 0.5])
    def test_free_decay_is_exact(self, alpha):
        problem = HeatProblem(_zero_force(modes=4, count=33), alpha=alpha)
        result = heat_solve(problem, u0=np.ones(4))
        expected = np.exp(-(np.arange(1, 5) ** 2 + alpha) * 2.0)
        np.testing.assert_allclose(result.trajectory.coeffs[-1], expected, rtol=1e-12)

    def test_pulse_response_matches_oracle(self):
        spec = ForceSpec(ForceName.HEAT_PULSE, n_max=4)
        grid, basis = default_setup(spec)
        result = heat_solve(HeatProblem(generate(spec, grid, basis)))
        times = result.trajectory.times()
        # pulses for n = 1, 2, 4 end on grid points
        for n in (1, 2, 4):
            np.testing.assert_allclose(result.trajectory.coeffs[:, n - 1], heat_mode_oracle(n, times),
                                       atol=1e-12)
        index = result.trajectory.grid.index_of(2.25)
        assert result.trajectory.coeffs[index, 1] == pytest.approx((1.0 - math.exp(-1.0)) / 2.0, rel=1e-10)

    def test_pulse_ledger_closes(self):
        spec = ForceSpec(ForceName.HEAT_PULSE, n_max=4)
        grid, basis = default_setup(spec)
        result = heat_solve(HeatProblem(generate(spec, grid, basis)))
        assert result.ledger.kind is IdentityKind.HEAT_L2
        assert result.ledger.max_abs_residual < 1e-8

    def test_smooth_force_ledger_closes(self, smooth_force):
        result = heat_solve(HeatProblem(smooth_force, alpha=1.0), u0=np.array([0.5, 0.0, 0.2, 0.0]))
        assert result.ledger.max_abs_residual < 1e-8
        rows = list(result.ledger.rows())
        assert len(rows) == smooth_force.grid.count
        assert rows[0][2] == 0.0

    def test_exact_quadrature_agrees_with_reconstruction(self, smooth_force):
        coarse = heat_solve(HeatProblem(smooth_force, quadrature=ForceQuadrature.EXACT))
        linear = heat_solve(HeatProblem(smooth_force))
        # piecewise-linear interpolation of sin(t) is second order
        np.testing.assert_allclose(coarse.trajectory.coeffs, linear.trajectory.coeffs, atol=1e-4)

    def test_t_end_truncates_trajectory(self, smooth_force):
        result = heat_solve(HeatProblem(smooth_force), t_end=1.0)
        assert result.trajectory.grid.count == 65
        assert result.trajectory.grid.t_end == pytest.approx(1.0)

    def test_t_end_beyond_force_span(self, smooth_force):
        with pytest.raises(SpanTooShort, match="beyond the force span"):
            heat_solve(HeatProblem(smooth_force), t_end=5.0)

    def test_initial_state_length(self, smooth_force):
        with pytest.raises(InvalidState, match="expected 4"):
            heat_solve(HeatProblem(smooth_force), u0=np.ones(3))

    def test_exact_quadrature_needs_closed_form(self, smooth_force):
        sampled = smooth_force.with_coeffs(smooth_force.coeffs)
        with pytest.raises(InvalidParameter, match="closed-form"):
            HeatProblem(sampled, quadrature=ForceQuadrature.EXACT)

    def test_line_force_is_refused(self, line_basis):
        with pytest.raises(InvalidParameter, match="sine basis"):
            HeatProblem(_line_force(0.125, 9, line_basis))


class TestWaveSolve:
    """Test cases for wave_solve."""

    def test_free_damped_mode(self):
        problem = WaveProblem(_zero_force())
        result = wave_solve(problem, xi0=np.array([1.0, 0.0, 0.0, 0.0]))
        u, v = _free_mode_one(4.0)
        np.testing.assert_allclose(result.trajectory.coeffs[-1], [u, 0.0, v, 0.0], atol=1e-12)
        assert result.trajectory.components == 2

    def test_free_energy_decays(self):
        result = wave_solve(WaveProblem(_zero_force()), xi0=np.array([1.0, 0.5, 0.0, 1.0]))
        assert np.all(np.diff(result.ledger.energy) <= 1e-12)
        assert result.ledger.max_abs_residual < 1e-10

    def test_resonant_response_matches_oracle(self):
        spec = ForceSpec(ForceName.WAVE_RESONANT, n_max=2)
        grid, basis = default_setup(spec)
        force = generate(spec, grid, basis)
        result = wave_solve(WaveProblem(force, quadrature=ForceQuadrature.EXACT))
        k = np.arange(96, 144)
        times = result.trajectory.times()[k]
        u, du = wave_mode_oracle(2, times)
        np.testing.assert_allclose(result.trajectory.coeffs[k, 1], u, atol=1e-9)
        np.testing.assert_allclose(result.trajectory.coeffs[k, 3], du, atol=1e-9)
        assert result.ledger.max_abs_residual < 1e-8

    def test_multiplier_ledger_closes(self, smooth_force):
        problem = WaveProblem(smooth_force, gamma=0.5)
        result = wave_solve(problem, identity=IdentityKind.WAVE_MULTIPLIER)
        assert result.ledger.kind is IdentityKind.WAVE_MULTIPLIER
        assert result.ledger.max_abs_residual < 1e-8

    def test_dense_output_between_samples(self):
        problem = WaveProblem(_zero_force())
        result = wave_solve(problem, xi0=np.array([1.0, 0.0, 0.0, 0.0]))
        u, v = wave_state_at(problem, result, 0.3)
        expected_u, expected_v = _free_mode_one(0.3)
        assert u[0] == pytest.approx(expected_u, abs=1e-12)
        assert v[0] == pytest.approx(expected_v, abs=1e-12)

    def test_dense_output_outside_span(self):
        problem = WaveProblem(_zero_force())
        result = wave_solve(problem)
        with pytest.raises(SpanTooShort):
            wave_state_at(problem, result, 5.0)

    def test_cubic_energy_ledger(self):
        force = _zero_force(modes=4, dt=1.0 / 64.0, count=129)
        problem = WaveProblem(force, nonlinearity=Nonlinearity.CUBIC)
        result = wave_solve(problem, xi0=np.array([0.5, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]))
        energy = result.ledger.energy
        assert energy[-1] < energy[0]
        assert result.ledger.max_abs_residual < 1e-3 * energy[0]

    def test_cubic_step_bound(self):
        problem = WaveProblem(_zero_force(), nonlinearity=Nonlinearity.CUBIC, dt_max=0.05)
        with pytest.raises(UnstableStep, match="exceeds the bound"):
            wave_solve(problem)

    def test_cubic_has_no_dense_output(self):
        force = _zero_force(modes=2, dt=1.0 / 64.0, count=65)
        problem = WaveProblem(force, nonlinearity=Nonlinearity.CUBIC)
        result = wave_solve(problem)
        with pytest.raises(InvalidParameter, match="linear wave"):
            wave_state_at(problem, result, 0.5)

    @pytest.mark.parametrize("gamma", [0.0, -1.0])
    def test_damping_must_be_positive(self, gamma):
        with pytest.raises(InvalidParameter, match="gamma"):
            WaveProblem(_zero_force(), gamma=gamma)

    def test_identity_must_be_a_wave_identity(self):
        with pytest.raises(InvalidParameter, match="WaveE or WaveMultiplier"):
            wave_solve(WaveProblem(_zero_force()), identity=IdentityKind.HEAT_L2)


class TestRDSolve:
    """Test cases for rd_solve."""

    def test_zero_force_contracts(self, line_basis, bump_state):
        problem = RDProblem(_line_force(1.0 / 16.0, 33, line_basis))
        result = rd_solve(problem, bump_state)
        assert np.all(np.diff(result.ledger.energy) < 0.0)
        assert result.trajectory.grid.count == 33

    def test_discrete_identity_residual_is_dissipative(self, line_basis, bump_state):
        result = rd_solve(RDProblem(_line_force(1.0 / 16.0, 33, line_basis)), bump_state)
        assert np.all(result.ledger.residuals <= 1e-12)

    def test_residual_is_first_order(self, line_basis, bump_state):
        coarse = rd_solve(RDProblem(_line_force(1.0 / 16.0, 17, line_basis)), bump_state)
        fine = rd_solve(RDProblem(_line_force(1.0 / 32.0, 33, line_basis)), bump_state)
        ratio = coarse.ledger.total_abs_residual / fine.ledger.total_abs_residual
        assert 1.6 < ratio < 2.4

    def test_cubic_reaction_runs(self, line_basis, bump_state):
        problem = RDProblem(_line_force(1.0 / 16.0, 33, line_basis), reaction=ReactionTerm(Nonlinearity.CUBIC))
        result = rd_solve(problem, bump_state)
        assert result.ledger.energy[-1] < result.ledger.energy[0]

    def test_explicit_reaction_step_bound(self, line_basis, bump_state):
        problem = RDProblem(_line_force(1.0 / 16.0, 33, line_basis), reaction=ReactionTerm(Nonlinearity.CUBIC))
        with pytest.raises(UnstableStep, match="explicit reaction step"):
            rd_solve(problem, 10.0 * bump_state)

    def test_boundary_values_must_vanish(self, line_basis, bump_state):
        state = bump_state.copy()
        state[0] = 1.0
        with pytest.raises(InvalidState, match="boundary"):
            rd_solve(RDProblem(_line_force(1.0 / 16.0, 33, line_basis)), state)

    def test_save_every_must_divide(self, line_basis, bump_state):
        with pytest.raises(InvalidParameter, match="save_every"):
            rd_solve(RDProblem(_line_force(1.0 / 16.0, 33, line_basis)), bump_state, save_every=5)

    def test_save_every_thins_trajectory(self, line_basis, bump_state):
        result = rd_solve(RDProblem(_line_force(1.0 / 32.0, 65, line_basis)), bump_state, save_every=4)
        assert result.trajectory.grid.count == 17
        assert result.trajectory.grid.dt == pytest.approx(0.125)
        assert result.ledger.times.size == 65

    def test_dissipative_profile_per_window(self, line_basis, bump_state):
        result = rd_solve(RDProblem(_line_force(1.0 / 16.0, 33, line_basis)), bump_state)
        profile = result.profile
        np.testing.assert_allclose(profile.window_ends, [1.0, 2.0])
        assert profile.state_norm_sq[1] < profile.state_norm_sq[0]
        assert np.all(profile.h1_integral > 0.0)

    def test_sine_force_is_refused(self):
        with pytest.raises(InvalidParameter, match="line grid"):
            RDProblem(_zero_force())


class TestWeightedIdentities:
    """Test cases for the e^{Ns}-weighted energy identities."""

    def test_zero_solution_balances(self):
        force = _zero_force(modes=4)
        problem = HeatProblem(force)
        result = heat_solve(problem)
        assert weighted_energy_balance(result.trajectory, force, 5.0, IdentityKind.HEAT_L2, problem) == 0.0

    def test_problem_is_required(self, smooth_force):
        problem = HeatProblem(smooth_force, alpha=0.5)
        result = heat_solve(problem)
        with pytest.raises(InvalidParameter, match="needs the problem") as exc_info:
            weighted_energy_terms(result.trajectory, smooth_force, 1.0, IdentityKind.HEAT_L2)
        assert exc_info.value.parameter == "problem"

    def test_force_term_fades_as_rate_grows(self):
        # u and sin t stay positive on the final window [1, 2]
        spec = ForceSpec(ForceName.SMOOTH_REFERENCE)
        grid, basis = default_setup(spec, span=2.0, dt=2.0 ** -8)
        force = generate(spec, grid, basis)
        problem = HeatProblem(force)
        result = heat_solve(problem)
        rates = [1.0, 10.0, 100.0, 1000.0]
        terms = [weighted_energy_terms(result.trajectory, force, N, IdentityKind.HEAT_L2, problem).force_term
                 for N in rates]

        assert all(term > 0.0 for term in terms)
        assert all(b < a for a, b in zip(terms, terms[1:]))
        assert all(N * term <= 2.0 * math.pi for N, term in zip(rates, terms))

    @pytest.mark.parametrize("N", [1.0, 10.0, 100.0])
    def test_heat_identity_closes(self, smooth_force, N):
        problem = HeatProblem(smooth_force, alpha=0.5)
        result = heat_solve(problem, u0=np.array([1.0, 0.0, 0.5, 0.0]))
        terms = weighted_energy_terms(result.trajectory, smooth_force, N, IdentityKind.HEAT_L2, problem)
        assert abs(terms.residual) < 1e-8
        assert terms.lhs > 0.0

    @pytest.mark.parametrize("kind", [IdentityKind.WAVE_E, IdentityKind.WAVE_MULTIPLIER])
    def test_linear_wave_identities_close(self, smooth_force, kind):
        problem = WaveProblem(smooth_force)
        result = wave_solve(problem, xi0=np.array([0.5, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0]))
        assert abs(weighted_energy_balance(result.trajectory, smooth_force, 10.0, kind, problem)) < 1e-8

    def test_rd_identity_residual_is_small(self, line_basis, bump_state):
        force = _line_force(1.0 / 128.0, 257, line_basis)
        problem = RDProblem(force)
        result = rd_solve(problem, bump_state)
        terms = weighted_energy_terms(result.trajectory, force, 2.0, IdentityKind.RD_L2, problem)
        assert abs(terms.residual) < 0.05 * terms.lhs

    def test_step_mismatch(self, smooth_force):
        result = heat_solve(HeatProblem(smooth_force))
        other = _zero_force(modes=4, dt=1.0 / 32.0, count=129)
        with pytest.raises(GridMismatch, match="differs from force step"):
            weighted_energy_terms(result.trajectory, other, 1.0, IdentityKind.HEAT_L2)

    def test_force_must_cover_trajectory(self, smooth_force):
        result = heat_solve(HeatProblem(smooth_force))
        short = smooth_force.with_coeffs(smooth_force.coeffs[:100], grid=smooth_force.grid.sub_grid(0, 100))
        with pytest.raises(GridMismatch, match="does not cover"):
            weighted_energy_terms(result.trajectory, short, 1.0, IdentityKind.HEAT_L2)

    def test_rate_must_be_positive(self, smooth_force):
        result = heat_solve(HeatProblem(smooth_force))
        with pytest.raises(InvalidParameter, match="weight rate N"):
            weighted_energy_terms(result.trajectory, smooth_force, 0.0, IdentityKind.HEAT_L2)


class TestDissipationRatio:
    """Test cases for dissipation_ratio."""

    def test_zero_trajectory(self):
        assert dissipation_ratio(_zero_force()) == 1.0

    def test_late_growth_is_infinite_after_silent_start(self):
        force = _zero_force(modes=1, count=17)
        coeffs = np.zeros((17, 1))
        coeffs[-1, 0] = 1.0
        assert dissipation_ratio(force.with_coeffs(coeffs)) == math.inf

    def test_decaying_solution_is_one(self):
        result = heat_solve(HeatProblem(_zero_force(modes=2)), u0=np.array([1.0, 1.0]))
        assert dissipation_ratio(result.trajectory) == pytest.approx(1.0)

    def test_linear_growth(self):
        force = _zero_force(modes=1, count=17)
        coeffs = np.arange(1.0, 18.0)[:, None]
        assert dissipation_ratio(force.with_coeffs(coeffs)) == pytest.approx(17.0 / 9.0)

"""
Spectral Galerkin integrators with discrete energy-identity accounting.

Linear problems are advanced per mode by exact propagators, so the only
discretization left is the force quadrature. Each solver also returns an
``EnergyLedger`` whose per-step residual measures how well the discrete
trajectory satisfies the continuous energy identity.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import solve_banded
from scipy.signal import lfilter

from config.constants import ForceQuadrature, IdentityKind, Nonlinearity, Reconstruction, Tolerances
from lab.signal import BasisDescriptor, SpectralSignal, TimeGrid, pointwise_norms
from utils.error_handler import (
    GridMismatch, InvalidParameter, InvalidState, LabError, SpanTooShort, UnstableStep,
)
from utils.logger import debug, info

# Steps evaluated per vectorized block
_CHUNK = 2048


@lru_cache(maxsize=4)
def _gauss01(nodes: int = Tolerances.QUADRATURE_NODES) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    return (x + 1.0) / 2.0, w / 2.0


def _phi1(z: np.ndarray) -> np.ndarray:
    """``(1 - e^{-z}) / z``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < Tolerances.PHI_SERIES_CUTOFF
    safe = np.where(small, 1.0, z)
    series = 1.0 - z / 2.0 + z ** 2 / 6.0 - z ** 3 / 24.0
    return np.where(small, series, -np.expm1(-safe) / safe)


def _phi2(z: np.ndarray) -> np.ndarray:
    """``(z - 1 + e^{-z}) / z^2``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < Tolerances.PHI_SERIES_CUTOFF
    safe = np.where(small, 1.0, z)
    series = 0.5 - z / 6.0 + z ** 2 / 24.0 - z ** 3 / 120.0
    return np.where(small, series, (safe + np.expm1(-safe)) / safe ** 2)


# Problems

@dataclass(frozen=True)
class ReactionTerm:
    """Nonlinearity ``f`` with growth ``f(u)u >= beta |u|^p`` and ``f' >= -K``."""

    kind: Nonlinearity = Nonlinearity.NONE
    beta: float = 1.0
    K: float = 0.0
    p: float = 4.0

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        if self.kind is Nonlinearity.NONE:
            return
        if self.p != 4.0:
            raise InvalidParameter(f"u^3 satisfies the growth bound with p = 4, not {self.p}", parameter="p")
        if self.beta > 1.0 or self.beta <= 0.0:
            raise InvalidParameter(f"u^3 * u >= beta |u|^4 needs 0 < beta <= 1, got {self.beta}",
                                   parameter="beta")
        if self.K < 0.0:
            raise InvalidParameter(f"3u^2 >= -K needs K >= 0, got {self.K}", parameter="K")

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.kind is Nonlinearity.NONE:
            return np.zeros_like(u)
        return u ** 3

    def derivative_bound(self, amplitude: float) -> float:
        return 0.0 if self.kind is Nonlinearity.NONE else 3.0 * amplitude ** 2


def _require_force_quadrature(force: SpectralSignal, quadrature: ForceQuadrature) -> None:
    if quadrature is ForceQuadrature.EXACT and force.exact is None:
        raise InvalidParameter("exact force quadrature needs a closed-form force", parameter="quadrature")


@dataclass(frozen=True, eq=False)
class HeatProblem:
    """``u_t - u_xx + alpha u = g`` on (-pi, pi) with Dirichlet sine modes."""

    force: SpectralSignal
    alpha: float = 0.0
    quadrature: ForceQuadrature = ForceQuadrature.RECONSTRUCTION

    def __post_init__(self):
        if self.force.basis.is_line or self.force.components != 1:
            raise InvalidParameter("heat problems take a scalar force on a sine basis", parameter="force")
        if self.alpha < 0.0:
            raise InvalidParameter(f"alpha must be non-negative, got {self.alpha}", parameter="alpha")
        _require_force_quadrature(self.force, self.quadrature)

    @property
    def basis(self) -> BasisDescriptor:
        return self.force.basis

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.basis.wavenumbers() ** 2

    @property
    def rates(self) -> np.ndarray:
        return self.eigenvalues + self.alpha


@dataclass(frozen=True, eq=False)
class WaveProblem:
    """``u_tt + gamma u_t - u_xx + f(u) = g`` with Dirichlet sine modes."""

    force: SpectralSignal
    gamma: float = 1.0
    nonlinearity: Nonlinearity = Nonlinearity.NONE
    quadrature: ForceQuadrature = ForceQuadrature.RECONSTRUCTION
    dt_max: Optional[float] = None

    def __post_init__(self):
        if self.force.basis.is_line or self.force.components != 1:
            raise InvalidParameter("wave problems take a scalar force on a sine basis", parameter="force")
        if not self.gamma > 0.0:
            raise InvalidParameter(f"damping gamma must be positive, got {self.gamma}", parameter="gamma")
        _require_force_quadrature(self.force, self.quadrature)

    @property
    def basis(self) -> BasisDescriptor:
        return self.force.basis

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.basis.wavenumbers() ** 2

    @property
    def step_limit(self) -> float:
        return self.dt_max if self.dt_max is not None else 1.0 / (2 * self.basis.mode_count)


@dataclass(frozen=True, eq=False)
class RDProblem:
    """``u_t - a u_xx + alpha u + f(u) = g`` on a truncated line grid."""

    force: SpectralSignal
    a: float = 1.0
    alpha: float = 1.0
    reaction: ReactionTerm = field(default_factory=ReactionTerm)

    def __post_init__(self):
        if not self.force.basis.is_line:
            raise InvalidParameter("reaction-diffusion runs on a line grid", parameter="force")
        if not self.a > 0.0:
            raise InvalidParameter(f"diffusion a must be positive, got {self.a}", parameter="a")
        if not self.alpha > 0.0:
            raise InvalidParameter(f"damping alpha must be positive, got {self.alpha}", parameter="alpha")

    @property
    def basis(self) -> BasisDescriptor:
        return self.force.basis


@dataclass(frozen=True, eq=False)
class EnergyLedger:
    """Energy at every step and the identity residual of every step."""

    times: np.ndarray
    energy: np.ndarray
    residuals: np.ndarray
    kind: IdentityKind

    @property
    def max_abs_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0

    @property
    def total_abs_residual(self) -> float:
        return float(np.sum(np.abs(self.residuals)))

    def rows(self):
        """``(t, energy, residual of the step ending at t)``; the first row carries 0."""
        residuals = np.concatenate([[0.0], self.residuals])
        return zip(self.times.tolist(), self.energy.tolist(), residuals.tolist())


@dataclass(frozen=True, eq=False)
class DissipativeProfile:
    """Per unit window: end-state ``||u||^2``, ``int ||u||_{H1}^2`` and ``int ||u||_{L^p}^p``."""

    window_ends: np.ndarray
    state_norm_sq: np.ndarray
    h1_integral: np.ndarray
    lp_integral: np.ndarray


@dataclass(frozen=True, eq=False)
class SolveResult:
    trajectory: SpectralSignal
    ledger: EnergyLedger
    problem: object
    profile: Optional[DissipativeProfile] = None


def _steps_to(grid: TimeGrid, t_end: float) -> int:
    steps = grid.steps_for(t_end - grid.t0)
    if steps > grid.count - 1:
        raise SpanTooShort(f"t_end={t_end:g} lies beyond the force span ending at {grid.t_end:g}",
                           span=grid.span, required=t_end - grid.t0)
    if steps < 1:
        raise SpanTooShort(f"t_end={t_end:g} leaves no step to take", span=grid.span, required=grid.dt)
    return steps


def _force_at(force: SpectralSignal, quadrature: ForceQuadrature, times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    flat = times.ravel()
    rows = force.exact(flat) if quadrature is ForceQuadrature.EXACT else force.values_at(flat)
    return np.asarray(rows, dtype=float).reshape(times.shape + (force.dimension,))


def _initial(u0: Optional[np.ndarray], size: int, name: str) -> np.ndarray:
    if u0 is None:
        return np.zeros(size)
    u0 = np.asarray(u0, dtype=float).ravel()
    if u0.size != size:
        raise InvalidState(f"{name} has {u0.size} entries, expected {size}", reason="length")
    if not np.all(np.isfinite(u0)):
        raise InvalidState(f"{name} is not finite", reason="non-finite")
    return u0


# Heat

def _heat_states(problem: HeatProblem, coeffs: np.ndarray, k: np.ndarray, sigma: np.ndarray,
                 force_offset: int = 0) -> np.ndarray:
    """Exact states at ``t_k + sigma`` from the sampled states ``coeffs[k]``."""
    force = problem.force
    dt = force.grid.dt
    lam = problem.rates
    z = lam * sigma[..., None]
    start = coeffs[k] * np.exp(-z)
    fk = force_offset + k
    if problem.quadrature is ForceQuadrature.RECONSTRUCTION:
        level = force.coeffs[fk]
        value = start + level * sigma[..., None] * _phi1(z)
        if force.reconstruction is Reconstruction.PIECEWISE_LINEAR:
            slope = (force.coeffs[fk + 1] - level) / dt
            value = value + slope * sigma[..., None] ** 2 * _phi2(z)
        return value
    x, w = _gauss01()
    r = sigma[..., None] * x
    t_k = force.grid.t0 + fk * dt
    f = _force_at(force, problem.quadrature, t_k[..., None] + r)
    kernel = np.exp(-lam * (sigma[..., None, None] - r[..., None]))
    return start + np.einsum('...j,...jm->...m', sigma[..., None] * w, kernel * f)


def heat_solve(problem: HeatProblem, u0: Optional[np.ndarray] = None,
               t_end: Optional[float] = None) -> SolveResult:
    """Advance every mode by the exact variation-of-constants step."""
    force = problem.force
    grid = force.grid
    steps = _steps_to(grid, grid.t_end if t_end is None else t_end)
    modes = problem.basis.mode_count
    a0 = _initial(u0, modes, "u0")
    h = grid.dt
    lam = problem.rates
    decay = np.exp(-lam * h)

    if problem.quadrature is ForceQuadrature.RECONSTRUCTION:
        levels = force.coeffs[:steps]
        increments = levels * (h * _phi1(lam * h))
        if force.reconstruction is Reconstruction.PIECEWISE_LINEAR:
            increments = increments + (force.coeffs[1:steps + 1] - levels) * (h * _phi2(lam * h))
    else:
        x, w = _gauss01()
        kernel = np.exp(-lam * h * (1.0 - x)[:, None]) * (h * w)[:, None]
        increments = np.empty((steps, modes))
        for start in range(0, steps, _CHUNK):
            stop = min(start + _CHUNK, steps)
            t_k = grid.t0 + h * np.arange(start, stop)
            f = _force_at(force, problem.quadrature, t_k[:, None] + h * x)
            increments[start:stop] = np.einsum('jm,kjm->km', kernel, f)

    coeffs = np.empty((steps + 1, modes))
    coeffs[0] = a0
    for n in range(modes):
        coeffs[1:, n], _ = lfilter([1.0], [1.0, -decay[n]], increments[:, n], zi=[decay[n] * a0[n]])

    out_grid = grid.sub_grid(0, steps + 1)
    trajectory = SpectralSignal(out_grid, problem.basis, coeffs, Reconstruction.PIECEWISE_LINEAR)
    ledger = _heat_ledger(problem, coeffs, out_grid, steps)
    debug(f"heat solve: {steps} steps, {modes} modes, max ledger residual {ledger.max_abs_residual:.2e}")
    return SolveResult(trajectory, ledger, problem)


def _heat_ledger(problem: HeatProblem, coeffs: np.ndarray, grid: TimeGrid, steps: int) -> EnergyLedger:
    x, w = _gauss01()
    h = grid.dt
    lam = problem.rates
    residuals = np.empty(steps)
    for start in range(0, steps, _CHUNK):
        k = np.arange(start, min(start + _CHUNK, steps))
        kk = np.repeat(k[:, None], x.size, axis=1)
        sigma = np.broadcast_to(h * x, kk.shape)
        states = _heat_states(problem, coeffs, kk, sigma)
        f = _force_at(problem.force, problem.quadrature, grid.times()[k][:, None] + sigma)
        square = h * np.einsum('j,kjm->km', w, states ** 2)
        work = h * np.einsum('j,kjm->km', w, f * states)
        change = 0.5 * (coeffs[k + 1] ** 2 - coeffs[k] ** 2)
        residuals[k] = math.pi * np.sum(change + lam * square - work, axis=1)
    energy = 0.5 * math.pi * np.sum(coeffs ** 2, axis=1)
    return EnergyLedger(grid.times(), energy, residuals, IdentityKind.HEAT_L2)


# Damped wave

def _wave_propagator(n2: np.ndarray, gamma: float, tau: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Entries of ``exp(tau A)``, ``A = [[0, 1], [-n^2, -gamma]]``, shaped ``tau.shape + (modes,)``."""
    tau = np.asarray(tau, dtype=float)[..., None]
    mu = np.sqrt((n2 - gamma ** 2 / 4.0).astype(complex))
    tiny = np.abs(mu) < 1e-12
    safe_mu = np.where(tiny, 1.0, mu)
    cosine = np.cos(mu * tau)
    sine = np.where(tiny, tau + 0j, np.sin(mu * tau) / safe_mu)
    envelope = np.exp(-gamma * tau / 2.0)
    p00 = (envelope * (cosine + gamma / 2.0 * sine)).real
    p01 = (envelope * sine).real
    p10 = (-envelope * sine * n2).real
    p11 = (envelope * (cosine - gamma / 2.0 * sine)).real
    return p00, p01, p10, p11


def _collocation(modes: int) -> Tuple[np.ndarray, float]:
    """Sine synthesis matrix on ``4*modes + 2`` equispaced points and the point spacing."""
    points = 4 * modes + 2
    x = -math.pi + 2.0 * math.pi * np.arange(points) / points
    return np.sin(np.outer(x, np.arange(1, modes + 1))), 2.0 * math.pi / points


def _cubic_projection(u: np.ndarray, synthesis: np.ndarray) -> np.ndarray:
    """Sine coefficients of ``P_M[u^3]``, exact for a degree-M sine polynomial ``u``."""
    physical = u @ synthesis.T
    return (2.0 / synthesis.shape[0]) * (physical ** 3) @ synthesis


def _quartic_integral(u: np.ndarray, synthesis: np.ndarray, spacing: float) -> np.ndarray:
    return spacing * np.sum((u @ synthesis.T) ** 4, axis=-1)


def _wave_states(problem: WaveProblem, coeffs: np.ndarray, k: np.ndarray, sigma: np.ndarray,
                 force_offset: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Exact linear states ``(u, v)`` at ``t_k + sigma``."""
    force = problem.force
    modes = problem.basis.mode_count
    n2 = problem.eigenvalues
    u_k, v_k = coeffs[k, :modes], coeffs[k, modes:]
    p00, p01, p10, p11 = _wave_propagator(n2, problem.gamma, sigma)
    u = p00 * u_k + p01 * v_k
    v = p10 * u_k + p11 * v_k
    x, w = _gauss01()
    r = sigma[..., None] * x
    t_k = force.grid.t0 + (force_offset + k) * force.grid.dt
    f = _force_at(force, problem.quadrature, t_k[..., None] + r)
    _, q01, _, q11 = _wave_propagator(n2, problem.gamma, sigma[..., None] - r)
    weights = sigma[..., None] * w
    u = u + np.einsum('...j,...jm->...m', weights, q01 * f)
    v = v + np.einsum('...j,...jm->...m', weights, q11 * f)
    return u, v


def wave_solve(problem: WaveProblem, xi0: Optional[np.ndarray] = None, t_end: Optional[float] = None,
               identity: IdentityKind = IdentityKind.WAVE_E) -> SolveResult:
    """Exact per-mode propagator with Duhamel quadrature; Strang splitting for the cubic term."""
    if identity not in (IdentityKind.WAVE_E, IdentityKind.WAVE_MULTIPLIER):
        raise InvalidParameter(f"wave ledgers track WaveE or WaveMultiplier, not {identity.value}",
                               parameter="identity")
    force = problem.force
    grid = force.grid
    steps = _steps_to(grid, grid.t_end if t_end is None else t_end)
    modes = problem.basis.mode_count
    h = grid.dt
    cubic = problem.nonlinearity is Nonlinearity.CUBIC
    if cubic and h > problem.step_limit * (1.0 + Tolerances.GRID_ALIGNMENT):
        raise UnstableStep(f"cubic wave step dt={h:g} exceeds the bound {problem.step_limit:g}",
                           dt=h, limit=problem.step_limit)
    state = _initial(xi0, 2 * modes, "xi0")

    n2 = problem.eigenvalues
    p00, p01, p10, p11 = _wave_propagator(n2, problem.gamma, np.asarray(h))
    x, w = _gauss01()
    _, q01, _, q11 = _wave_propagator(n2, problem.gamma, h * (1.0 - x))
    drive_u = (h * w)[:, None] * q01
    drive_v = (h * w)[:, None] * q11
    synthesis = _collocation(modes)[0] if cubic else None

    coeffs = np.empty((steps + 1, 2 * modes))
    coeffs[0] = state
    u, v = state[:modes].copy(), state[modes:].copy()
    for start in range(0, steps, _CHUNK):
        stop = min(start + _CHUNK, steps)
        t_k = grid.t0 + h * np.arange(start, stop)
        f = _force_at(force, problem.quadrature, t_k[:, None] + h * x)
        forced_u = np.einsum('jm,kjm->km', drive_u, f)
        forced_v = np.einsum('jm,kjm->km', drive_v, f)
        for i in range(stop - start):
            if cubic:
                v = v - 0.5 * h * _cubic_projection(u, synthesis)
            u, v = p00 * u + p01 * v + forced_u[i], p10 * u + p11 * v + forced_v[i]
            if cubic:
                v = v - 0.5 * h * _cubic_projection(u, synthesis)
            coeffs[start + i + 1, :modes] = u
            coeffs[start + i + 1, modes:] = v
        if not np.all(np.isfinite(coeffs[stop])):
            raise UnstableStep(f"wave state blew up before t={grid.t0 + h * stop:g}", dt=h,
                               limit=problem.step_limit)

    out_grid = grid.sub_grid(0, steps + 1)
    trajectory = SpectralSignal(out_grid, problem.basis, coeffs, Reconstruction.PIECEWISE_LINEAR, components=2)
    ledger = _wave_ledger(problem, coeffs, out_grid, steps, identity)
    debug(f"wave solve: {steps} steps, {modes} modes, max ledger residual {ledger.max_abs_residual:.2e}")
    return SolveResult(trajectory, ledger, problem)


def _wave_energy(problem: WaveProblem, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    energy = math.pi * np.sum(problem.eigenvalues * u ** 2 + v ** 2, axis=-1)
    if problem.nonlinearity is Nonlinearity.CUBIC:
        synthesis, spacing = _collocation(problem.basis.mode_count)
        energy = energy + 0.5 * _quartic_integral(u, synthesis, spacing)
    return energy


def _wave_multiplier(problem: WaveProblem, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return math.pi * np.sum(u * v + 0.5 * problem.gamma * u ** 2, axis=-1)


def _wave_rates(problem: WaveProblem, u: np.ndarray, v: np.ndarray, f: np.ndarray,
                identity: IdentityKind) -> np.ndarray:
    """Right-hand side ``dQ/dt`` of the tracked identity, evaluated pointwise in time."""
    if identity is IdentityKind.WAVE_E:
        return math.pi * np.sum(-2.0 * problem.gamma * v ** 2 + 2.0 * f * v, axis=-1)
    rate = math.pi * np.sum(v ** 2 - problem.eigenvalues * u ** 2 + f * u, axis=-1)
    if problem.nonlinearity is Nonlinearity.CUBIC:
        synthesis, spacing = _collocation(problem.basis.mode_count)
        rate = rate - _quartic_integral(u, synthesis, spacing)
    return rate


def _wave_ledger(problem: WaveProblem, coeffs: np.ndarray, grid: TimeGrid, steps: int,
                 identity: IdentityKind) -> EnergyLedger:
    modes = problem.basis.mode_count
    u, v = coeffs[:, :modes], coeffs[:, modes:]
    quantity = _wave_energy if identity is IdentityKind.WAVE_E else _wave_multiplier
    values = quantity(problem, u, v)
    h = grid.dt
    residuals = np.empty(steps)
    if problem.nonlinearity is Nonlinearity.CUBIC:
        f = _force_at(problem.force, problem.quadrature, grid.times())
        rates = _wave_rates(problem, u, v, f, identity)
        residuals[:] = np.diff(values) - 0.5 * h * (rates[:-1] + rates[1:])
    else:
        x, w = _gauss01()
        for start in range(0, steps, _CHUNK):
            k = np.arange(start, min(start + _CHUNK, steps))
            kk = np.repeat(k[:, None], x.size, axis=1)
            sigma = np.broadcast_to(h * x, kk.shape)
            us, vs = _wave_states(problem, coeffs, kk, sigma)
            f = _force_at(problem.force, problem.quadrature, grid.times()[k][:, None] + sigma)
            rates = _wave_rates(problem, us, vs, f, identity)
            residuals[k] = values[k + 1] - values[k] - h * (rates @ w)
    return EnergyLedger(grid.times(), values, residuals, identity)


def wave_state_at(problem: WaveProblem, result: SolveResult, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Dense output ``(u(t), u_t(t))`` of a linear wave trajectory."""
    if problem.nonlinearity is not Nonlinearity.NONE:
        raise InvalidParameter("dense output is exact only for the linear wave", parameter="nonlinearity")
    grid = result.trajectory.grid
    position = (t - grid.t0) / grid.dt
    slack = Tolerances.GRID_ALIGNMENT * max(1.0, abs(position))
    if position < -slack or position > grid.count - 1 + slack:
        raise SpanTooShort(f"t={t:g} lies outside the computed span", span=grid.span, required=t - grid.t0)
    k = min(int(math.floor(position + slack)), grid.count - 1)
    sigma = max(t - (grid.t0 + k * grid.dt), 0.0)
    if k == grid.count - 1 or sigma == 0.0:
        row = result.trajectory.coeffs[k]
        modes = problem.basis.mode_count
        return row[:modes].copy(), row[modes:].copy()
    u, v = _wave_states(problem, result.trajectory.coeffs, np.array([k]), np.array([sigma]))
    return u[0], v[0]


# Reaction-diffusion

def _line_products(basis: BasisDescriptor, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """``||u||^2`` and ``||grad_h u||^2`` on the line grid, row-wise."""
    dx = basis.dx
    norm_sq = dx * np.sum(u[..., 1:-1] ** 2, axis=-1)
    grad_sq = np.sum(np.diff(u, axis=-1) ** 2, axis=-1) / dx
    return norm_sq, grad_sq


def rd_solve(problem: RDProblem, u0: np.ndarray, t_end: Optional[float] = None,
             save_every: int = 1) -> SolveResult:
    """IMEX Euler: implicit diffusion and damping, explicit reaction, force at the new time."""
    force = problem.force
    grid = force.grid
    basis = problem.basis
    steps = _steps_to(grid, grid.t_end if t_end is None else t_end)
    if save_every < 1 or steps % save_every:
        raise InvalidParameter(f"save_every={save_every} must divide the {steps} steps", parameter="save_every")
    u = _initial(u0, basis.mode_count, "u0")
    if u[0] != 0.0 or u[-1] != 0.0:
        raise InvalidState("initial state must vanish at the boundary nodes", reason="boundary")

    h = grid.dt
    bound_denominator = 2.0 * problem.reaction.K + 2.0 * problem.reaction.derivative_bound(float(np.max(np.abs(u))))
    limit = 1.0 / bound_denominator if bound_denominator > 0.0 else math.inf
    if h > limit:
        raise UnstableStep(f"explicit reaction step dt={h:g} exceeds {limit:g}", dt=h, limit=limit)

    interior = basis.mode_count - 2
    coupling = h * problem.a / basis.dx ** 2
    banded = np.zeros((3, interior))
    banded[0, 1:] = -coupling
    banded[1, :] = 1.0 + 2.0 * coupling + h * problem.alpha
    banded[2, :-1] = -coupling

    saved = [u.copy()]
    residuals = np.empty(steps)
    energy = np.empty(steps + 1)
    norm_sq, grad_sq = _line_products(basis, u)
    energy[0] = 0.5 * norm_sq
    h1 = np.empty(steps + 1)
    lp = np.empty(steps + 1)
    h1[0] = norm_sq + grad_sq
    lp[0] = basis.dx * np.sum(np.abs(u[1:-1]) ** problem.reaction.p)
    previous_norm = math.sqrt(norm_sq)

    for k in range(steps):
        g_next = force.coeffs[k + 1]
        rhs = u[1:-1] + h * (-problem.reaction(u[1:-1]) + g_next[1:-1])
        new = np.zeros_like(u)
        new[1:-1] = solve_banded((1, 1), banded, rhs)
        new_norm_sq, new_grad_sq = _line_products(basis, new)
        new_norm = math.sqrt(new_norm_sq)
        if not math.isfinite(new_norm) or (previous_norm > 0.0 and new_norm > Tolerances.RD_GROWTH_LIMIT * previous_norm):
            raise UnstableStep(f"state norm jumped from {previous_norm:.3e} to {new_norm:.3e} at step {k + 1}",
                               dt=h, limit=limit)
        reaction_work = basis.dx * np.sum(problem.reaction(new[1:-1]) * new[1:-1])
        force_work = basis.dx * np.sum(g_next[1:-1] * new[1:-1])
        residuals[k] = (0.5 * (new_norm_sq - norm_sq)
                        + h * (problem.alpha * new_norm_sq + problem.a * new_grad_sq + reaction_work - force_work))
        u, norm_sq, previous_norm = new, new_norm_sq, new_norm
        energy[k + 1] = 0.5 * norm_sq
        h1[k + 1] = norm_sq + new_grad_sq
        lp[k + 1] = basis.dx * np.sum(np.abs(u[1:-1]) ** problem.reaction.p)
        if (k + 1) % save_every == 0:
            saved.append(u.copy())

    times = grid.times()[:steps + 1]
    out_grid = TimeGrid(grid.t0, h * save_every, len(saved))
    trajectory = SpectralSignal(out_grid, basis, np.asarray(saved), Reconstruction.PIECEWISE_LINEAR)
    ledger = EnergyLedger(times, energy, residuals, IdentityKind.RD_L2)
    profile = _dissipative_profile(times, energy, h1, lp, h)
    debug(f"rd solve: {steps} steps on {basis.mode_count} nodes, summed residual {ledger.total_abs_residual:.2e}")
    return SolveResult(trajectory, ledger, problem, profile)


def _dissipative_profile(times: np.ndarray, energy: np.ndarray, h1: np.ndarray, lp: np.ndarray,
                         dt: float) -> DissipativeProfile:
    per_window = max(1, int(math.floor(Tolerances.UNIT_WINDOW / dt * (1.0 + Tolerances.GRID_ALIGNMENT))))
    windows = (times.size - 1) // per_window
    ends = np.arange(1, windows + 1) * per_window
    h1_cumulative = np.concatenate([[0.0], np.cumsum(h1[1:]) * dt])
    lp_cumulative = np.concatenate([[0.0], np.cumsum(lp[1:]) * dt])
    return DissipativeProfile(
        window_ends=times[ends],
        state_norm_sq=2.0 * energy[ends],
        h1_integral=h1_cumulative[ends] - h1_cumulative[ends - per_window],
        lp_integral=lp_cumulative[ends] - lp_cumulative[ends - per_window],
    )


# Weighted identities and dissipativity

@dataclass(frozen=True)
class WeightedEnergyTerms:
    """Both sides of the e^{Ns}-weighted identity over the final unit window."""

    lhs: float
    rhs: float
    force_term: float

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs


def _force_offset(trajectory: SpectralSignal, force: SpectralSignal) -> int:
    if abs(trajectory.grid.dt - force.grid.dt) > Tolerances.GRID_ALIGNMENT * force.grid.dt:
        raise GridMismatch(f"trajectory step {trajectory.grid.dt:g} differs from force step {force.grid.dt:g}",
                           reason="dt")
    if trajectory.basis != force.basis:
        raise GridMismatch("trajectory and force live on different bases", reason="basis")
    try:
        offset = force.grid.index_of(trajectory.grid.t0)
    except LabError as e:
        raise GridMismatch("trajectory start is not a force grid point", reason="t0", original_error=e)
    if offset + trajectory.grid.count > force.grid.count:
        raise GridMismatch("force does not cover the trajectory span", reason="span")
    return offset


def _final_window_nodes(grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Step indices, in-step offsets and weights of Gauss nodes covering ``[t_end - 1, t_end]``."""
    if grid.span < Tolerances.UNIT_WINDOW * (1.0 - Tolerances.GRID_ALIGNMENT):
        raise SpanTooShort("the weighted identity needs a final unit window", span=grid.span,
                           required=Tolerances.UNIT_WINDOW)
    x, w = _gauss01()
    start = grid.t_end - Tolerances.UNIT_WINDOW
    position = (start - grid.t0) / grid.dt
    first = int(math.floor(position + Tolerances.GRID_ALIGNMENT * max(1.0, position)))
    first = min(max(first, 0), grid.count - 2)
    ks = np.arange(first, grid.count - 1)
    lower = np.zeros(ks.size)
    lower[0] = max(start - (grid.t0 + first * grid.dt), 0.0)
    length = grid.dt - lower
    k = np.repeat(ks, x.size)
    sigma = (lower[:, None] + length[:, None] * x).ravel()
    weights = (length[:, None] * w).ravel()
    return k, sigma, weights


def weighted_energy_terms(trajectory: SpectralSignal, force: SpectralSignal, N: float,
                          kind: IdentityKind, problem=None) -> WeightedEnergyTerms:
    """Evaluate both sides of the energy identity weighted by ``e^{Ns}(s+1)`` on ``s in [-1, 0]``.

    ``problem`` must be the one ``trajectory`` was solved with; its damping and
    quadrature enter both sides.
    """
    if not N > 0.0:
        raise InvalidParameter(f"weight rate N must be positive, got {N}", parameter="N")
    offset = _force_offset(trajectory, force)
    if problem is None:
        raise InvalidParameter(f"the {kind.value} balance needs the problem the trajectory was solved with",
                               parameter="problem")
    grid = trajectory.grid
    end = grid.t_end

    if kind is IdentityKind.RD_L2:
        return _weighted_rd(trajectory, force, offset, N, problem)

    k, sigma, weights = _final_window_nodes(grid)
    s = grid.t0 + k * grid.dt + sigma - end
    ramp = np.exp(N * s) * (s + 1.0)
    growth = np.exp(N * s) * (1.0 + N * (s + 1.0))

    if kind is IdentityKind.HEAT_L2:
        states = _heat_states(problem, trajectory.coeffs, k, sigma, offset)
        f = _force_at(force, problem.quadrature, end + s)
        norm_sq = math.pi * np.sum(states ** 2, axis=1)
        dissipation = math.pi * np.sum(problem.rates * states ** 2, axis=1)
        work = math.pi * np.sum(f * states, axis=1)
        final = math.pi * float(np.sum(trajectory.coeffs[-1] ** 2))
        force_term = 2.0 * float(np.sum(weights * ramp * work))
        lhs = final + 2.0 * float(np.sum(weights * ramp * dissipation))
        rhs = float(np.sum(weights * growth * norm_sq)) + force_term
        return WeightedEnergyTerms(lhs, rhs, force_term)

    if kind not in (IdentityKind.WAVE_E, IdentityKind.WAVE_MULTIPLIER):
        raise InvalidParameter(f"unknown identity {kind}", parameter="kind")
    if trajectory.components != 2:
        raise GridMismatch("wave identities need (position, velocity) trajectories", reason="components")
    modes = problem.basis.mode_count
    if problem.nonlinearity is Nonlinearity.NONE:
        u, v = _wave_states(problem, trajectory.coeffs, k, sigma, offset)
        f = _force_at(force, problem.quadrature, end + s)
    else:
        times = grid.times()
        inside = times >= end - Tolerances.UNIT_WINDOW - Tolerances.GRID_ALIGNMENT
        u, v = trajectory.coeffs[inside, :modes], trajectory.coeffs[inside, modes:]
        f = _force_at(force, problem.quadrature, times[inside])
        s = times[inside] - end
        ramp = np.exp(N * s) * (s + 1.0)
        growth = np.exp(N * s) * (1.0 + N * (s + 1.0))
        weights = _trapezoid_weights(times[inside])

    last_u, last_v = trajectory.coeffs[-1, :modes], trajectory.coeffs[-1, modes:]
    if kind is IdentityKind.WAVE_E:
        quantity = _wave_energy(problem, u, v)
        final = float(_wave_energy(problem, last_u, last_v))
        damping = 2.0 * problem.gamma * math.pi * np.sum(v ** 2, axis=1)
        work = 2.0 * math.pi * np.sum(f * v, axis=1)
        force_term = float(np.sum(weights * ramp * work))
        lhs = final + float(np.sum(weights * ramp * damping))
        rhs = float(np.sum(weights * growth * quantity)) + force_term
        return WeightedEnergyTerms(lhs, rhs, force_term)

    quantity = _wave_multiplier(problem, u, v)
    final = float(_wave_multiplier(problem, last_u, last_v))
    stiffness = math.pi * np.sum(problem.eigenvalues * u ** 2, axis=1)
    if problem.nonlinearity is Nonlinearity.CUBIC:
        synthesis, spacing = _collocation(modes)
        stiffness = stiffness + _quartic_integral(u, synthesis, spacing)
    kinetic = math.pi * np.sum(v ** 2, axis=1)
    work = math.pi * np.sum(f * u, axis=1)
    force_term = float(np.sum(weights * ramp * work))
    lhs = final + float(np.sum(weights * ramp * stiffness))
    rhs = float(np.sum(weights * growth * quantity)) + float(np.sum(weights * ramp * kinetic)) + force_term
    return WeightedEnergyTerms(lhs, rhs, force_term)


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    weights = np.zeros(times.size)
    steps = np.diff(times)
    weights[:-1] += steps / 2.0
    weights[1:] += steps / 2.0
    return weights


def _weighted_rd(trajectory: SpectralSignal, force: SpectralSignal, offset: int, N: float,
                 problem: RDProblem) -> WeightedEnergyTerms:
    grid = trajectory.grid
    times = grid.times()
    end = grid.t_end
    inside = times >= end - Tolerances.UNIT_WINDOW - Tolerances.GRID_ALIGNMENT
    u = trajectory.coeffs[inside]
    g = force.coeffs[offset:offset + grid.count][inside]
    s = times[inside] - end
    ramp = np.exp(N * s) * (s + 1.0)
    growth = np.exp(N * s) * (1.0 + N * (s + 1.0))
    norm_sq, grad_sq = _line_products(problem.basis, u)
    dx = problem.basis.dx
    reaction = dx * np.sum(problem.reaction(u[:, 1:-1]) * u[:, 1:-1], axis=1)
    work = dx * np.sum(g[:, 1:-1] * u[:, 1:-1], axis=1)
    dissipation = problem.alpha * norm_sq + problem.a * grad_sq + reaction
    force_term = 2.0 * float(trapezoid(ramp * work, s))
    lhs = float(norm_sq[-1]) + 2.0 * float(trapezoid(ramp * dissipation, s))
    rhs = float(trapezoid(growth * norm_sq, s)) + force_term
    return WeightedEnergyTerms(lhs, rhs, force_term)


def weighted_energy_balance(trajectory: SpectralSignal, force: SpectralSignal, N: float,
                            kind: IdentityKind, problem=None) -> float:
    """Signed residual of the weighted identity."""
    return weighted_energy_terms(trajectory, force, N, kind, problem).residual


def dissipation_ratio(trajectory: SpectralSignal, space=None) -> float:
    """Peak state norm over the span relative to the peak over its first half."""
    norms = pointwise_norms(trajectory, space)
    half = max(1, (trajectory.grid.count + 1) // 2)
    early, overall = float(norms[:half].max()), float(norms.max())
    if overall == 0.0:
        return 1.0
    if early == 0.0:
        return math.inf
    ratio = overall / early
    info(f"📊 Dissipation ratio {ratio:.3f}")
    return ratio

"""
Built-in analytic forcing generators and closed-form per-mode oracles.

Each generator samples its force exactly at the grid times and attaches the
closed form as the signal's ``exact`` evaluator, so solvers can integrate the
force itself instead of its reconstruction.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad

from config.constants import ForceName, GalleryLimits, Reconstruction, Tolerances
from lab.signal import BasisDescriptor, SpectralSignal, TimeGrid
from utils.error_handler import InvalidParameter, OutOfWindow, ResolutionTooCoarse
from utils.logger import debug, warning

ArrayLike = Union[float, np.ndarray]

# Rows generated per block for line-grid forces
_ROW_CHUNK = 2048
# Below this value of 1 - s**2 the bump and its derivatives are zero in double precision
_BUMP_CUTOFF = 5e-3


@dataclass(frozen=True)
class ForceSpec:
    """Generator name plus its shape parameters."""

    name: ForceName
    n_max: int = 8
    L: float = 16.0
    width: float = 2.0
    alpha: float = 1.0

    def __post_init__(self):
        if not isinstance(self.name, ForceName):
            object.__setattr__(self, 'name', ForceName(self.name))
        if int(self.n_max) != self.n_max or not 1 <= self.n_max <= GalleryLimits.MAX_NMAX:
            raise InvalidParameter(f"n_max must be an integer in [1, {GalleryLimits.MAX_NMAX}], got {self.n_max}",
                                   parameter="n_max")
        if self.L < GalleryLimits.MIN_LINE_HALF_LENGTH:
            raise InvalidParameter(f"L must be at least {GalleryLimits.MIN_LINE_HALF_LENGTH:g}, got {self.L}",
                                   parameter="L")
        if self.width <= 0.0:
            raise InvalidParameter(f"bump width must be positive, got {self.width}", parameter="width")
        if self.alpha < 0.0:
            raise InvalidParameter(f"alpha must be non-negative, got {self.alpha}", parameter="alpha")


def _first_index_at_or_after(grid: TimeGrid, t: float) -> int:
    ratio = (t - grid.t0) / grid.dt
    return int(min(max(math.ceil(ratio - Tolerances.GRID_ALIGNMENT * max(1.0, abs(ratio))), 0), grid.count))


def _in_window(t: np.ndarray, start: float, stop: float) -> np.ndarray:
    slack = Tolerances.GRID_ALIGNMENT * np.maximum(1.0, np.abs(t))
    return (t >= start - slack) & (t < stop - slack)


def _require_sine(basis: BasisDescriptor, minimum_modes: int, force: str) -> None:
    if basis.is_line:
        raise InvalidParameter(f"{force} lives on a sine basis", parameter="basis")
    if basis.mode_count < minimum_modes:
        raise ResolutionTooCoarse(f"{force} needs at least {minimum_modes} modes, basis has {basis.mode_count}",
                                  parameter="modes", limit=minimum_modes)


# Heat pulse: n sin(nx) on [n, n + 1/n^2)

def _heat_pulse_exact(spec: ForceSpec, modes: int) -> Callable[[np.ndarray], np.ndarray]:
    def evaluate(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rows = np.zeros((t.size, modes))
        for n in range(1, spec.n_max + 1):
            rows[_in_window(t, n, n + 1.0 / n ** 2), n - 1] = n
        return rows
    return evaluate


def _generate_heat_pulse(spec: ForceSpec, grid: TimeGrid, basis: BasisDescriptor) -> np.ndarray:
    _require_sine(basis, spec.n_max, "heat pulse")
    limit = 1.0 / (2 * spec.n_max ** 2)
    if grid.dt > limit * (1.0 + Tolerances.GRID_ALIGNMENT):
        raise ResolutionTooCoarse(f"heat pulse with n_max={spec.n_max} needs dt <= {limit:g}",
                                  parameter="dt", limit=limit)
    coeffs = np.zeros((grid.count, basis.mode_count))
    for n in range(1, spec.n_max + 1):
        start = _first_index_at_or_after(grid, n)
        stop = _first_index_at_or_after(grid, n + 1.0 / n ** 2)
        coeffs[start:stop, n - 1] = n
    return coeffs


# Wave resonance: cos(n(t - 3n pi)) sin(nx) on [3n pi, 3(n+1) pi)

def _wave_resonant_exact(spec: ForceSpec, modes: int) -> Callable[[np.ndarray], np.ndarray]:
    def evaluate(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rows = np.zeros((t.size, modes))
        for n in range(1, spec.n_max + 1):
            start = 3.0 * n * math.pi
            inside = _in_window(t, start, start + 3.0 * math.pi)
            rows[inside, n - 1] = np.cos(n * (t[inside] - start))
        return rows
    return evaluate


def _generate_wave_resonant(spec: ForceSpec, grid: TimeGrid, basis: BasisDescriptor) -> np.ndarray:
    _require_sine(basis, spec.n_max, "wave resonance")
    limit = math.pi / (8 * spec.n_max)
    if grid.dt > limit * (1.0 + Tolerances.GRID_ALIGNMENT):
        raise ResolutionTooCoarse(f"wave resonance with n_max={spec.n_max} needs dt <= {limit:g}",
                                  parameter="dt", limit=limit)
    return _wave_resonant_exact(spec, basis.mode_count)(grid.times())


# Travelling bump: g0(x - t) with g0 = -V' + alpha V - V''

def bump_profile(x: ArrayLike, width: float = 2.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``V(x) = exp(-1/(1 - (x/width)**2))`` on ``|x| < width`` and its first two derivatives."""
    y = np.asarray(x, dtype=float)
    s = y / width
    q = 1.0 - s ** 2
    inside = q > _BUMP_CUTOFF
    v = np.zeros_like(y)
    dv = np.zeros_like(y)
    d2v = np.zeros_like(y)
    qi, si = q[inside], s[inside]
    vi = np.exp(-1.0 / qi)
    h = -2.0 * si / (width * qi ** 2)
    dh = -(2.0 / width ** 2) * (1.0 / qi ** 2 + 4.0 * si ** 2 / qi ** 3)
    v[inside] = vi
    dv[inside] = vi * h
    d2v[inside] = vi * (h ** 2 + dh)
    return v, dv, d2v


def bump_force_profile(x: ArrayLike, width: float, alpha: float) -> np.ndarray:
    v, dv, d2v = bump_profile(x, width)
    return -dv + alpha * v - d2v


def _travelling_bump_exact(spec: ForceSpec, basis: BasisDescriptor) -> Callable[[np.ndarray], np.ndarray]:
    nodes = basis.nodes()

    def evaluate(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rows = bump_force_profile(nodes[None, :] - t[:, None], spec.width, spec.alpha)
        rows[:, 0] = rows[:, -1] = 0.0
        return rows
    return evaluate


def _generate_travelling_bump(spec: ForceSpec, grid: TimeGrid, basis: BasisDescriptor) -> np.ndarray:
    if not basis.is_line:
        raise InvalidParameter("the travelling bump lives on a line grid", parameter="basis")
    limit = spec.width / 8.0
    if basis.dx > limit * (1.0 + Tolerances.GRID_ALIGNMENT):
        raise ResolutionTooCoarse(f"bump of width {spec.width:g} needs dx <= {limit:g}",
                                  parameter="dx", limit=limit)
    if max(abs(grid.t0), abs(grid.t_end)) + spec.width > basis.half_length:
        warning("travelling bump reaches the truncation boundary inside the requested span")
    evaluate = _travelling_bump_exact(spec, basis)
    times = grid.times()
    coeffs = np.empty((grid.count, basis.mode_count))
    for start in range(0, grid.count, _ROW_CHUNK):
        coeffs[start:start + _ROW_CHUNK] = evaluate(times[start:start + _ROW_CHUNK])
    return coeffs


# Rapid oscillation: t sin(e^t) sin(x) for t >= 0

def _rapid_oscillation_exact(modes: int) -> Callable[[np.ndarray], np.ndarray]:
    def evaluate(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t > GalleryLimits.MAX_OSCILLATION_TIME):
            raise InvalidParameter(f"rapid oscillation overflows beyond t={GalleryLimits.MAX_OSCILLATION_TIME:g}",
                                   parameter="t_end")
        rows = np.zeros((t.size, modes))
        positive = t >= 0.0
        rows[positive, 0] = t[positive] * np.sin(np.exp(t[positive]))
        return rows
    return evaluate


def _generate_rapid_oscillation(spec: ForceSpec, grid: TimeGrid, basis: BasisDescriptor) -> np.ndarray:
    _require_sine(basis, 1, "rapid oscillation")
    return _rapid_oscillation_exact(basis.mode_count)(grid.times())


def _smooth_reference_exact(modes: int) -> Callable[[np.ndarray], np.ndarray]:
    def evaluate(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rows = np.zeros((t.size, modes))
        rows[:, 0] = np.sin(t)
        return rows
    return evaluate


def _generate_smooth_reference(spec: ForceSpec, grid: TimeGrid, basis: BasisDescriptor) -> np.ndarray:
    _require_sine(basis, 1, "smooth reference")
    return _smooth_reference_exact(basis.mode_count)(grid.times())


def _exact_for(spec: ForceSpec, basis: BasisDescriptor) -> Callable[[np.ndarray], np.ndarray]:
    if spec.name is ForceName.HEAT_PULSE:
        return _heat_pulse_exact(spec, basis.mode_count)
    if spec.name is ForceName.WAVE_RESONANT:
        return _wave_resonant_exact(spec, basis.mode_count)
    if spec.name is ForceName.TRAVELLING_BUMP:
        return _travelling_bump_exact(spec, basis)
    if spec.name is ForceName.RAPID_OSCILLATION:
        return _rapid_oscillation_exact(basis.mode_count)
    return _smooth_reference_exact(basis.mode_count)


_GENERATORS: Dict[ForceName, Tuple[Callable, Reconstruction, str]] = {
    ForceName.HEAT_PULSE: (
        _generate_heat_pulse, Reconstruction.PIECEWISE_CONSTANT,
        "n sin(nx) on [n, n+1/n^2) for n = 1..n_max; bounded in L2_b, neither normal nor space regular"),
    ForceName.WAVE_RESONANT: (
        _generate_wave_resonant, Reconstruction.PIECEWISE_CONSTANT,
        "cos(n(t-3n pi)) sin(nx) on [3n pi, 3(n+1) pi); strongly normal, not time regular"),
    ForceName.TRAVELLING_BUMP: (
        _generate_travelling_bump, Reconstruction.PIECEWISE_LINEAR,
        "-V'+alpha V-V'' translated at unit speed on the line; smooth in time, no uniform spatial tail"),
    ForceName.RAPID_OSCILLATION: (
        _generate_rapid_oscillation, Reconstruction.PIECEWISE_LINEAR,
        "t sin(e^t) sin(x) for t >= 0; not translation bounded, bounded heat response"),
    ForceName.SMOOTH_REFERENCE: (
        _generate_smooth_reference, Reconstruction.PIECEWISE_LINEAR,
        "sin(t) sin(x); positive control in every class"),
}


def list_forces() -> List[Tuple[str, str]]:
    """``(name, description)`` of every built-in generator."""
    return [(name.value, description) for name, (_, _, description) in _GENERATORS.items()]


def generate(spec: ForceSpec, grid: TimeGrid, basis: BasisDescriptor,
             reconstruction: Optional[Reconstruction] = None) -> SpectralSignal:
    """Sample the force of ``spec`` at the grid times."""
    generator, default_reconstruction, _ = _GENERATORS[spec.name]
    coeffs = generator(spec, grid, basis)
    debug(f"generated {spec.name.value} on {grid.count} samples, basis {basis.describe()}")
    return SpectralSignal(grid, basis, coeffs, reconstruction or default_reconstruction,
                          exact=_exact_for(spec, basis))


def default_setup(spec: ForceSpec, span: Optional[float] = None, dt: Optional[float] = None,
                  modes: Optional[int] = None, t0: float = 0.0) -> Tuple[TimeGrid, BasisDescriptor]:
    """A grid and basis that meet the generator's resolution preconditions."""
    if spec.name is ForceName.HEAT_PULSE:
        dt = dt or 2.0 ** -math.ceil(math.log2(2 * spec.n_max ** 2))
        span = span or spec.n_max + 2.0
        basis = BasisDescriptor.sine(modes or spec.n_max)
    elif spec.name is ForceName.WAVE_RESONANT:
        dt = dt or math.pi / (8 * spec.n_max)
        span = span or 3.0 * (spec.n_max + 1) * math.pi
        basis = BasisDescriptor.sine(modes or spec.n_max)
    elif spec.name is ForceName.TRAVELLING_BUMP:
        dt = dt or 2.0 ** -11
        span = span or 4.0
        basis = BasisDescriptor.line(spec.L, modes or int(32 * spec.L) + 1)
    elif spec.name is ForceName.RAPID_OSCILLATION:
        dt = dt or 2.0 ** -4
        span = span or 64.0
        basis = BasisDescriptor.sine(modes or 1)
    else:
        dt = dt or 2.0 ** -9
        span = span or 16.0
        basis = BasisDescriptor.sine(modes or 4)
    count = int(round(span / dt)) + 1
    return TimeGrid(t0, dt, count), basis


# Oracles

def heat_mode_oracle(n: int, t: ArrayLike) -> ArrayLike:
    """Mode-n coefficient of the heat response to the heat pulse, zero data, no damping."""
    if n < 1:
        raise InvalidParameter(f"mode index must be positive, got {n}", parameter="n")
    t_arr = np.asarray(t, dtype=float)
    pulse_end = n + 1.0 / n ** 2
    during = -np.expm1(-n ** 2 * np.clip(t_arr - n, 0.0, None)) / n
    after = (1.0 - math.exp(-1.0)) / n * np.exp(-n ** 2 * np.clip(t_arr - pulse_end, 0.0, None))
    value = np.where(t_arr <= n, 0.0, np.where(t_arr <= pulse_end, during, after))
    return float(value) if value.ndim == 0 else value


def wave_mode_oracle(n: int, t: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """``(u_n, u_n')`` solving ``u'' + u' + n^2 u = cos(n(t - 3n pi))`` from rest at ``3n pi``."""
    if n < 1:
        raise InvalidParameter(f"mode index must be positive, got {n}", parameter="n")
    t_arr = np.asarray(t, dtype=float)
    start, stop = 3.0 * n * math.pi, 3.0 * (n + 1) * math.pi
    slack = Tolerances.GRID_ALIGNMENT * max(1.0, stop)
    if np.any(t_arr < start - slack) or np.any(t_arr >= stop):
        bad = t_arr[(t_arr < start - slack) | (t_arr >= stop)].ravel()[0]
        raise OutOfWindow(f"wave oracle for mode {n} evaluated at t={bad:g}", time=float(bad),
                          window=(start, stop))
    r = np.maximum(t_arr - start, 0.0)
    nu = math.sqrt(4 * n ** 2 - 1)
    mu = nu / 2.0
    envelope = np.exp(-r / 2.0)
    u = -2.0 * envelope * np.sin(mu * r) / nu + np.sin(n * r) / n
    du = envelope * (np.sin(mu * r) / nu - np.cos(mu * r)) + np.cos(n * r)
    if u.ndim == 0:
        return float(u), float(du)
    return u, du


def wave_peak_time(n: int) -> float:
    """``t_n = pi(3n + 2 + 1/(2n))``, where the resonant response peaks."""
    return math.pi * (3 * n + 2 + 1.0 / (2 * n))


def wave_peak_bound(n: int) -> float:
    """Lower bound ``1/n - 2 e^{-pi} / sqrt(4n^2 - 1)`` on ``u_n(t_n)``."""
    return 1.0 / n - 2.0 * math.exp(-math.pi) / math.sqrt(4 * n ** 2 - 1)


def oscillation_mode_oracle(t: ArrayLike, alpha: float = 0.0) -> ArrayLike:
    """Mode-1 heat response ``int_0^t e^{-(1+alpha)(t-s)} s sin(e^s) ds``.

    Evaluated after ``w = e^s`` as a sine-weighted integral, which scipy's
    QAWO rule handles without resolving the oscillation by hand.
    """
    rate = 1.0 + alpha
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr > GalleryLimits.MAX_OSCILLATION_TIME):
        raise InvalidParameter("oscillation oracle overflows", parameter="t")
    values = np.zeros_like(t_arr)
    for i, ti in enumerate(t_arr):
        if ti <= 0.0:
            continue
        scale = math.exp(rate * ti)
        integral, abserr = quad(lambda w: w ** (rate - 1.0) * math.log(w), 1.0, math.exp(ti),
                                weight='sin', wvar=1.0, limit=4000,
                                epsabs=1e-13 * scale, epsrel=1e-12)
        values[i] = integral / scale
        debug(f"oscillation oracle t={ti:g}: {values[i]:.3e} (abs err {abserr / scale:.1e})")
    return float(values[0]) if np.ndim(t) == 0 else values

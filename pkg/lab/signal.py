"""
Time-sampled spectral signals and their uniformly-local norms.

A signal is a sequence of coefficient vectors on a uniform time grid. Every
spatial norm used here is a diagonal weighted l2 norm of the coefficient
vector, so all windowed quantities reduce to per-interval integrals of
``q(t) = sum_i w_i c_i(t)**2`` raised to ``p/2``.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.fft import dst, idst
from scipy.integrate import trapezoid
from scipy.signal import convolve

from config.constants import BasisKind, ModulusKind, NormKind, Reconstruction, Tolerances
from utils.error_handler import (
    InvalidParameter, InvalidSignal, MisalignedOffset, SpanTooShort,
)
from utils.logger import debug

ExactEvaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling times ``t0 + k*dt`` for ``k = 0..count-1``."""

    t0: float
    dt: float
    count: int

    def __post_init__(self):
        if not math.isfinite(self.t0):
            raise InvalidParameter(f"t0 must be finite, got {self.t0}", parameter="t0")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise InvalidParameter(f"dt must be positive, got {self.dt}", parameter="dt")
        if self.dt > Tolerances.UNIT_WINDOW / Tolerances.MIN_WINDOW_SAMPLES * (1.0 + Tolerances.GRID_ALIGNMENT):
            raise InvalidParameter(
                f"dt={self.dt:g} leaves fewer than {Tolerances.MIN_WINDOW_SAMPLES} samples per unit window",
                parameter="dt")
        if int(self.count) != self.count or self.count < 2:
            raise InvalidParameter(f"count must be an integer >= 2, got {self.count}", parameter="count")

    @property
    def span(self) -> float:
        return (self.count - 1) * self.dt

    @property
    def t_end(self) -> float:
        return self.t0 + self.span

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.count)

    def steps_for(self, offset: float) -> int:
        """Number of grid steps in ``offset``; raises if it is not a whole number."""
        ratio = offset / self.dt
        steps = int(round(ratio))
        if abs(ratio - steps) > Tolerances.GRID_ALIGNMENT * max(1.0, abs(ratio)):
            raise MisalignedOffset(
                f"offset {offset!r} is not a multiple of the grid step", offset=offset, dt=self.dt)
        return steps

    def index_of(self, t: float) -> int:
        index = self.steps_for(t - self.t0)
        if not 0 <= index < self.count:
            raise SpanTooShort(f"time {t:g} lies outside the grid", span=self.span, required=t - self.t0)
        return index

    def sub_grid(self, start: int, count: int) -> 'TimeGrid':
        return TimeGrid(self.t0 + start * self.dt, self.dt, count)


@dataclass(frozen=True)
class BasisDescriptor:
    """Spatial discretization.

    For ``DIRICHLET_SINE`` the coefficient ``c_n`` multiplies ``sin(n x)`` on
    ``(-pi, pi)``, ``n = 1..mode_count``. For ``TRUNCATED_LINE`` the vector holds
    values at ``mode_count`` uniform nodes of ``[-half_length, half_length]``
    whose boundary entries are zero.
    """

    kind: BasisKind
    mode_count: int
    half_length: Optional[float] = None

    def __post_init__(self):
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise InvalidParameter(f"mode_count must be a positive integer, got {self.mode_count}",
                                   parameter="mode_count")
        if self.kind is BasisKind.TRUNCATED_LINE:
            if self.half_length is None or self.half_length <= 0.0:
                raise InvalidParameter("a line grid needs a positive half_length", parameter="half_length")
            if self.mode_count < 3:
                raise InvalidParameter("a line grid needs at least 3 nodes", parameter="mode_count")

    @classmethod
    def sine(cls, modes: int) -> 'BasisDescriptor':
        return cls(BasisKind.DIRICHLET_SINE, modes)

    @classmethod
    def line(cls, half_length: float, points: int) -> 'BasisDescriptor':
        return cls(BasisKind.TRUNCATED_LINE, points, float(half_length))

    @property
    def is_line(self) -> bool:
        return self.kind is BasisKind.TRUNCATED_LINE

    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.mode_count + 1, dtype=float)

    def nodes(self) -> np.ndarray:
        if not self.is_line:
            raise InvalidParameter("nodes are only defined for line grids", parameter="basis")
        return np.linspace(-self.half_length, self.half_length, self.mode_count)

    @property
    def dx(self) -> float:
        if not self.is_line:
            raise InvalidParameter("dx is only defined for line grids", parameter="basis")
        return 2.0 * self.half_length / (self.mode_count - 1)

    def describe(self) -> str:
        if self.is_line:
            return f"{self.kind.value}(L={self.half_length:g}, m={self.mode_count})"
        return f"{self.kind.value}(M={self.mode_count})"


def default_norm(basis: BasisDescriptor, components: int = 1) -> NormKind:
    if basis.is_line:
        return NormKind.L2_LINE
    return NormKind.ENERGY if components == 2 else NormKind.L2


def norm_weights(basis: BasisDescriptor, kind: NormKind, components: int = 1) -> np.ndarray:
    """Diagonal weights ``w`` with ``|c|_V**2 = sum(w * c**2)``.

    On two-component (wave) vectors the non-energy norms weigh the position
    block only.
    """
    if basis.is_line:
        if kind not in (NormKind.L2, NormKind.L2_LINE) or components != 1:
            raise InvalidParameter(f"norm '{kind.value}' is not available on a line grid", parameter="norm")
        weights = np.full(basis.mode_count, basis.dx)
        weights[0] = weights[-1] = 0.0
        return weights

    n = basis.wavenumbers()
    if kind is NormKind.ENERGY:
        if components != 2:
            raise InvalidParameter("the energy norm needs (position, velocity) vectors", parameter="norm")
        return np.concatenate([math.pi * n ** 2, np.full_like(n, math.pi)])
    if kind is NormKind.L2:
        block = np.full_like(n, math.pi)
    elif kind is NormKind.H1:
        block = math.pi * n ** 2
    elif kind is NormKind.HM1:
        block = math.pi / n ** 2
    else:
        raise InvalidParameter(f"norm '{kind.value}' is not available on a sine basis", parameter="norm")
    if components == 2:
        return np.concatenate([block, np.zeros_like(block)])
    return block


@dataclass(frozen=True, eq=False)
class SpectralSignal:
    """Coefficient samples ``coeffs[k]`` at ``grid.times()[k]``.

    Wave states store positions then velocities (``components == 2``). The
    optional ``exact`` callable maps an array of times to an array of
    coefficient rows and is never serialized.
    """

    grid: TimeGrid
    basis: BasisDescriptor
    coeffs: np.ndarray
    reconstruction: Reconstruction = Reconstruction.PIECEWISE_CONSTANT
    components: int = 1
    exact: Optional[ExactEvaluator] = field(default=None, repr=False)

    def __post_init__(self):
        if self.components not in (1, 2):
            raise InvalidSignal(f"components must be 1 or 2, got {self.components}", reason="components")
        data = np.array(self.coeffs, dtype=float, copy=True)
        if data.ndim == 1:
            data = data[:, None]
        expected = (self.grid.count, self.components * self.basis.mode_count)
        if data.shape != expected:
            raise InvalidSignal(f"coefficient array has shape {data.shape}, expected {expected}",
                                reason="shape")
        if not np.all(np.isfinite(data)):
            raise InvalidSignal("signal contains non-finite values", reason="non-finite")
        data.setflags(write=False)
        object.__setattr__(self, 'coeffs', data)

    @property
    def dimension(self) -> int:
        return self.coeffs.shape[1]

    @property
    def span(self) -> float:
        return self.grid.span

    def times(self) -> np.ndarray:
        return self.grid.times()

    def positions(self) -> np.ndarray:
        return self.coeffs[:, :self.basis.mode_count]

    def velocities(self) -> np.ndarray:
        if self.components != 2:
            raise InvalidSignal("signal has no velocity block", reason="components")
        return self.coeffs[:, self.basis.mode_count:]

    def with_coeffs(self, coeffs: np.ndarray, grid: Optional[TimeGrid] = None,
                    exact: Optional[ExactEvaluator] = None) -> 'SpectralSignal':
        """Copy with new samples; the closed form is dropped unless passed."""
        return replace(self, coeffs=coeffs, grid=grid or self.grid, exact=exact)

    def values_at(self, times: np.ndarray) -> np.ndarray:
        """Evaluate the reconstruction at arbitrary times inside the span."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        position = (t - self.grid.t0) / self.grid.dt
        slack = Tolerances.GRID_ALIGNMENT * np.maximum(1.0, np.abs(position))
        if np.any(position < -slack) or np.any(position > self.grid.count - 1 + slack):
            raise SpanTooShort("evaluation time outside the signal span",
                               span=self.span, required=float(np.max(t) - self.grid.t0))
        position = np.clip(position, 0.0, self.grid.count - 1)
        index = np.minimum(np.floor(position + slack).astype(int), self.grid.count - 1)
        if self.reconstruction is Reconstruction.PIECEWISE_CONSTANT:
            return self.coeffs[index]
        left = np.minimum(np.floor(position).astype(int), self.grid.count - 2)
        frac = (position - left)[:, None]
        return (1.0 - frac) * self.coeffs[left] + frac * self.coeffs[left + 1]


@dataclass(frozen=True, eq=False)
class ModulusCurve:
    """Sampled monotone-by-construction function ``tau -> value``."""

    taus: np.ndarray
    values: np.ndarray
    kind: ModulusKind

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if taus.shape != values.shape or taus.ndim != 1 or taus.size == 0:
            raise InvalidParameter("curve needs matching non-empty 1-D taus and values", parameter="taus")
        if np.any(np.diff(taus) <= 0.0):
            raise InvalidParameter("curve offsets must be strictly ascending", parameter="taus")
        if np.any(taus < 0.0) or (self.kind is not ModulusKind.TAIL and np.any(taus <= 0.0)):
            raise InvalidParameter("curve offsets must be positive", parameter="taus")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise InvalidParameter("curve values must be finite and non-negative", parameter="values")
        object.__setattr__(self, 'taus', taus)
        object.__setattr__(self, 'values', values)

    @property
    def last(self) -> float:
        return float(self.values[-1])

    def as_pairs(self) -> Sequence[Tuple[float, float]]:
        return list(zip(self.taus.tolist(), self.values.tolist()))


# Window integrals

def _check_exponent(p: float) -> None:
    if not (p > 1.0 and math.isfinite(p)):
        raise InvalidParameter(f"exponent p must satisfy 1 < p < inf, got {p}", parameter="p")


def resolve_weights(signal: SpectralSignal, space: Optional[NormKind]) -> np.ndarray:
    kind = space or default_norm(signal.basis, signal.components)
    return norm_weights(signal.basis, kind, signal.components)


def _split_length(grid: TimeGrid, length: float) -> Tuple[int, float]:
    """Whole steps and trailing fraction of a step in ``length``."""
    ratio = length / grid.dt
    whole = int(math.floor(ratio + Tolerances.GRID_ALIGNMENT * max(1.0, ratio)))
    theta = ratio - whole
    if theta < Tolerances.GRID_ALIGNMENT * max(1.0, ratio):
        theta = 0.0
    return whole, theta


def _interval_integrals(coeffs: np.ndarray, dt: float, reconstruction: Reconstruction,
                        weights: np.ndarray, p: float, theta: float = 1.0) -> np.ndarray:
    """``int ||g||^p`` over ``[t_k, t_k + theta*dt]`` for every interval ``k``."""
    if reconstruction is Reconstruction.PIECEWISE_CONSTANT:
        q = coeffs[:-1] ** 2 @ weights
        f = q if p == 2.0 else q ** (p / 2.0)
        return f * (theta * dt)

    left, right = coeffs[:-1], coeffs[1:]
    if p == 2.0:
        a = left ** 2 @ weights
        b = (left * right) @ weights
        c = right ** 2 @ weights
        if theta == 1.0:
            return dt * (a + b + c) / 3.0
        return dt * (a * (1.0 - (1.0 - theta) ** 3) / 3.0
                     + 2.0 * b * (theta ** 2 / 2.0 - theta ** 3 / 3.0)
                     + c * theta ** 3 / 3.0)

    nodes, gauss_weights = np.polynomial.legendre.leggauss(Tolerances.NORM_QUADRATURE_NODES)
    x = theta * (nodes + 1.0) / 2.0
    total = np.zeros(left.shape[0])
    for xj, wj in zip(x, gauss_weights):
        q = ((1.0 - xj) * left + xj * right) ** 2 @ weights
        total += wj * q ** (p / 2.0)
    return total * (theta * dt / 2.0)


def window_integrals(signal: SpectralSignal, p: float, length: float,
                      weights: np.ndarray) -> np.ndarray:
    """``int_{t_k}^{t_k + length} ||g||^p`` for every grid start that fits."""
    grid = signal.grid
    if signal.span < length * (1.0 - Tolerances.GRID_ALIGNMENT):
        raise SpanTooShort(f"signal span {signal.span:g} is shorter than the window {length:g}",
                           span=signal.span, required=length)
    whole, theta = _split_length(grid, length)
    full = _interval_integrals(signal.coeffs, grid.dt, signal.reconstruction, weights, p)
    cumulative = np.concatenate([[0.0], np.cumsum(full)])
    starts = grid.count - whole - (1 if theta > 0.0 else 0)
    values = cumulative[whole:whole + starts] - cumulative[:starts]
    if theta > 0.0:
        partial = _interval_integrals(signal.coeffs, grid.dt, signal.reconstruction, weights, p, theta)
        values = values + partial[whole:whole + starts]
    return np.maximum(values, 0.0)


def pointwise_norms(g: SpectralSignal, space: Optional[NormKind] = None) -> np.ndarray:
    """Per-sample ``||g(t_k)||_V``."""
    return np.sqrt(g.coeffs ** 2 @ resolve_weights(g, space))


def physical_l2_norms(g: SpectralSignal, points: int = 512) -> np.ndarray:
    """L2 norms of the reconstructed sine profiles by trapezoidal quadrature in x."""
    if g.basis.is_line:
        raise InvalidParameter("physical reconstruction needs a sine basis", parameter="basis")
    if points <= 2 * g.basis.mode_count + 1:
        raise InvalidParameter(f"{points} points cannot resolve {g.basis.mode_count} modes", parameter="points")
    x = np.linspace(-math.pi, math.pi, points)
    profiles = g.positions() @ np.sin(np.outer(g.basis.wavenumbers(), x))
    return np.sqrt(trapezoid(profiles ** 2, x, axis=1))


def window_norms(g: SpectralSignal, p: float, length: float = Tolerances.UNIT_WINDOW,
                 space: Optional[NormKind] = None) -> np.ndarray:
    """``(int_{t_k}^{t_k+length} ||g||_V^p)^(1/p)`` for every admissible start ``t_k``."""
    _check_exponent(p)
    return window_integrals(g, p, length, resolve_weights(g, space)) ** (1.0 / p)


def lpb_norm(g: SpectralSignal, p: float, space: Optional[NormKind] = None) -> float:
    """Uniformly-local ``L^p_b`` norm over unit windows starting on the grid."""
    _check_exponent(p)
    values = window_integrals(g, p, Tolerances.UNIT_WINDOW, resolve_weights(g, space))
    return float(np.max(values)) ** (1.0 / p)


def _aligned_steps(grid: TimeGrid, taus: Sequence[float]) -> np.ndarray:
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size == 0 or np.any(taus <= 0.0):
        raise InvalidParameter("offsets must be a non-empty list of positive times", parameter="taus")
    return np.array([grid.steps_for(tau) for tau in taus], dtype=int)


def modulus_of_continuity(g: SpectralSignal, p: float, taus: Sequence[float],
                          space: Optional[NormKind] = None) -> ModulusCurve:
    """``max_t int_t^{t+1} ||g(s+tau) - g(s)||^p ds`` for each offset."""
    _check_exponent(p)
    steps = _aligned_steps(g.grid, taus)
    weights = resolve_weights(g, space)
    values = []
    for tau, m in zip(taus, steps):
        if tau >= g.span - Tolerances.UNIT_WINDOW:
            raise SpanTooShort(f"offset {tau:g} leaves no unit window inside the span",
                               span=g.span, required=tau + Tolerances.UNIT_WINDOW)
        difference = g.with_coeffs(g.coeffs[m:] - g.coeffs[:-m], grid=g.grid.sub_grid(0, g.grid.count - m))
        values.append(float(np.max(window_integrals(difference, p, Tolerances.UNIT_WINDOW, weights))))
    debug(f"continuity modulus over {len(values)} offsets")
    return ModulusCurve(np.asarray(taus, dtype=float), np.asarray(values), ModulusKind.CONTINUITY)


def normality_modulus(g: SpectralSignal, p: float, taus: Sequence[float],
                      space: Optional[NormKind] = None) -> ModulusCurve:
    """``max_t int_t^{t+tau} ||g||^p``; windows running past the span end are truncated."""
    _check_exponent(p)
    steps = _aligned_steps(g.grid, taus)
    full = _interval_integrals(g.coeffs, g.grid.dt, g.reconstruction, resolve_weights(g, space), p)
    cumulative = np.concatenate([[0.0], np.cumsum(full)])
    starts = np.arange(g.grid.count - 1)
    values = [float(np.max(cumulative[np.minimum(starts + m, g.grid.count - 1)] - cumulative[starts]))
              for m in steps]
    return ModulusCurve(np.asarray(taus, dtype=float), np.maximum(values, 0.0), ModulusKind.NORMALITY)


def exp_kernel_tail(g: SpectralSignal, p: float, N: float,
                    space: Optional[NormKind] = None) -> float:
    """``max_t int_{t-1}^t e^{-N(t-s)} ||g(s)||^p ds`` over windows ending on the grid."""
    _check_exponent(p)
    if not (N > 0.0 and math.isfinite(N)):
        raise InvalidParameter(f"kernel rate N must be positive, got {N}", parameter="N")
    grid = g.grid
    if g.span < Tolerances.UNIT_WINDOW * (1.0 - Tolerances.GRID_ALIGNMENT):
        raise SpanTooShort("exp-kernel tail needs a unit window", span=g.span, required=Tolerances.UNIT_WINDOW)
    weights = resolve_weights(g, space)
    whole, theta = _split_length(grid, Tolerances.UNIT_WINDOW)
    decay = -math.expm1(-N * grid.dt) / N

    # local[j] = int over interval j with weight e^{-N(t_{j+1} - s)}
    if g.reconstruction is Reconstruction.PIECEWISE_CONSTANT:
        q = g.coeffs[:-1] ** 2 @ weights
        f = q if p == 2.0 else q ** (p / 2.0)
        local = f * decay
        tail_piece = f * (-math.expm1(-N * theta * grid.dt) / N)
    else:
        local = _exp_weighted_pl(g.coeffs, grid.dt, weights, p, N, 1.0)
        tail_piece = _exp_weighted_pl(g.coeffs, grid.dt, weights, p, N, theta) if theta > 0.0 else None

    kernel = np.exp(-N * grid.dt * np.arange(whole))
    sums = convolve(local, kernel)[whole - 1:grid.count - 1]
    # sums[i] covers the window ending at t_{whole + i}
    if theta > 0.0:
        sums = sums[1:] + math.exp(-N * whole * grid.dt) * tail_piece[:sums.size - 1]
    return float(np.max(np.maximum(sums, 0.0))) if sums.size else 0.0


def _exp_weighted_pl(coeffs: np.ndarray, dt: float, weights: np.ndarray, p: float,
                     N: float, theta: float) -> np.ndarray:
    """Gauss rule for ``int_{t_{k+1}-theta dt}^{t_{k+1}} e^{-N(t_{k+1}-s)} ||g(s)||^p ds``."""
    nodes, gauss_weights = np.polynomial.legendre.leggauss(Tolerances.QUADRATURE_NODES)
    # x is the position inside the interval measured from its left end
    x = 1.0 - theta * (nodes + 1.0) / 2.0
    left, right = coeffs[:-1], coeffs[1:]
    total = np.zeros(left.shape[0])
    for xj, wj in zip(x, gauss_weights):
        q = ((1.0 - xj) * left + xj * right) ** 2 @ weights
        total += wj * math.exp(-N * (1.0 - xj) * dt) * q ** (p / 2.0)
    return total * (theta * dt / 2.0)


def shift(g: SpectralSignal, s: float) -> SpectralSignal:
    """Translate in time: ``(T(s) g)(t) = g(t + s)`` on the overlapping span."""
    m = g.grid.steps_for(s)
    remaining = g.grid.count - abs(m)
    if remaining < 2:
        raise SpanTooShort(f"shift by {s:g} leaves fewer than two samples",
                           span=g.span, required=abs(s) + g.grid.dt)
    if m >= 0:
        grid = g.grid.sub_grid(0, remaining)
        coeffs = g.coeffs[m:]
    else:
        grid = TimeGrid(g.grid.t0 - m * g.grid.dt, g.grid.dt, remaining)
        coeffs = g.coeffs[:remaining]
    exact = None
    if g.exact is not None:
        base, offset = g.exact, m * g.grid.dt
        exact = lambda t: base(np.asarray(t, dtype=float) + offset)  # noqa: E731
    return g.with_coeffs(coeffs, grid=grid, exact=exact)


# Discrete sine modes of line-grid vectors

def line_sine_transform(values: np.ndarray) -> np.ndarray:
    """Orthonormal DST-I of the interior nodes along the last axis."""
    return dst(np.asarray(values, dtype=float)[..., 1:-1], type=1, norm='ortho', axis=-1)


def line_sine_inverse(spectrum: np.ndarray) -> np.ndarray:
    """Interior values from DST-I modes, padded with zero boundary nodes."""
    interior = idst(spectrum, type=1, norm='ortho', axis=-1)
    pad = [(0, 0)] * (interior.ndim - 1) + [(1, 1)]
    return np.pad(interior, pad)

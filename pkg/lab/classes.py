"""
Approximation operators on forcing signals and the empirical class classifier.

Every class is decided from a curve ordered toward its limit (offset to 0,
rank or amplitude to infinity). The last value at the resolution limit
decides: small enough means yes, clearly retained mass means no, anything in
between is inconclusive.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.integrate import quad
from scipy.signal import fftconvolve

from config.config_manager import ClassThresholds
from config.constants import ClassName, ModulusKind, NormKind, Reconstruction, Tolerances, Verdict
from lab.compactness import TrajectoryCloud, epsilon_entropy
from lab.signal import (
    ModulusCurve, SpectralSignal, resolve_weights, window_integrals, line_sine_inverse,
    line_sine_transform, lpb_norm, modulus_of_continuity, normality_modulus, pointwise_norms,
    window_norms,
)
from utils.error_handler import InvalidParameter, MisalignedOffset, SpanTooShort
from utils.logger import LoggerMixin, debug

MIN_CLASSIFY_SPAN = 4.0
WEAKLY_NORMAL_NOTE = "sufficient-evidence only: searched over mode truncations on a dyadic ladder; a no covers that ladder only"


# Mollifier

def _bump(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = (z > 0.0) & (z < 1.0)
    out[inside] = np.exp(-1.0 / (z[inside] * (1.0 - z[inside])))
    return out


@lru_cache(maxsize=1)
def mollifier_constant() -> float:
    """``c`` with ``int_0^1 c exp(-1/(z(1-z))) dz = 1``."""
    mass, _ = quad(lambda z: math.exp(-1.0 / (z * (1.0 - z))), 0.0, 1.0, epsabs=1e-14, epsrel=1e-12)
    return 1.0 / mass


def mollifier_peak() -> float:
    """Maximum of the normalized mollifier, attained at ``z = 1/2``."""
    return mollifier_constant() * math.exp(-4.0)


def _steps_as_parameter(g: SpectralSignal, length: float, name: str) -> int:
    try:
        steps = g.grid.steps_for(length)
    except MisalignedOffset as e:
        raise InvalidParameter(f"{name}={length!r} is not a multiple of dt={g.grid.dt:g}",
                               parameter=name, original_error=e)
    if steps >= g.grid.count - 1:
        raise SpanTooShort(f"{name}={length:g} does not fit in the span", span=g.span, required=length)
    return steps


def _interval_values(g: SpectralSignal) -> np.ndarray:
    """Midpoint value of the reconstruction on every sampling interval."""
    if g.reconstruction is Reconstruction.PIECEWISE_CONSTANT:
        return g.coeffs[:-1]
    return 0.5 * (g.coeffs[:-1] + g.coeffs[1:])


def mollify(g: SpectralSignal, eps: float) -> SpectralSignal:
    """``g_eps(t) = int phi_eps(s) g(t - s) ds`` by midpoint quadrature of the kernel.

    The output starts at ``t0 + eps``: the kernel only looks into the past.
    """
    m = _steps_as_parameter(g, eps, "eps")
    if m < 2:
        raise InvalidParameter(f"eps={eps:g} must span at least two steps", parameter="eps")
    kernel = _bump((np.arange(m) + 0.5) / m)
    kernel /= kernel.sum()
    smoothed = fftconvolve(_interval_values(g), kernel[:, None], mode='valid', axes=0)
    debug(f"mollify: {m}-step kernel, {smoothed.shape[0]} output samples")
    return g.with_coeffs(smoothed, grid=g.grid.sub_grid(m, g.grid.count - m))


def time_average(g: SpectralSignal, h: float) -> SpectralSignal:
    """``g_h(t) = (1/h) int_t^{t+h} g(s) ds``, exact for the signal's reconstruction."""
    m = _steps_as_parameter(g, h, "h")
    if m < 1:
        raise InvalidParameter(f"h={h!r} must be positive", parameter="h")
    count = g.grid.count - m
    if g.reconstruction is Reconstruction.PIECEWISE_CONSTANT:
        windows = sliding_window_view(g.coeffs, m, axis=0)[:count]
        weights = np.full(m, 1.0 / m)
    else:
        windows = sliding_window_view(g.coeffs, m + 1, axis=0)
        weights = np.full(m + 1, 1.0 / m)
        weights[0] = weights[-1] = 0.5 / m
    averaged = windows @ weights
    return g.with_coeffs(averaged, grid=g.grid.sub_grid(0, count))


def truncate_amplitude(g: SpectralSignal, N: float, space: Optional[NormKind] = None) -> SpectralSignal:
    """Keep samples with ``||g(t)|| <= N``, zero the rest."""
    if not N > 0.0:
        raise InvalidParameter(f"amplitude cut N must be positive, got {N}", parameter="N")
    keep = pointwise_norms(g, space) <= N
    return g.with_coeffs(g.coeffs * keep[:, None])


def _finite_rank_limit(g: SpectralSignal) -> int:
    return g.basis.mode_count - 2 if g.basis.is_line else g.basis.mode_count


def project_finite_rank(g: SpectralSignal, M: int) -> SpectralSignal:
    """Zero every mode above ``M``; line grids use their discrete sine modes."""
    limit = _finite_rank_limit(g)
    if int(M) != M or not 1 <= M <= limit:
        raise InvalidParameter(f"rank M must be an integer in [1, {limit}], got {M}", parameter="M")
    if g.basis.is_line:
        spectrum = line_sine_transform(g.coeffs)
        spectrum[:, M:] = 0.0
        return g.with_coeffs(line_sine_inverse(spectrum))
    coeffs = np.array(g.coeffs).reshape(g.grid.count, g.components, g.basis.mode_count)
    coeffs[:, :, M:] = 0.0
    return g.with_coeffs(coeffs.reshape(g.grid.count, -1))


def truncation_error_bound(g: SpectralSignal, p: float, eps: float, N: float,
                           space: Optional[NormKind] = None) -> float:
    """``sup_t int ||g||^{p+eps} * N^{-eps}``, a bound on the amplitude-truncation residual."""
    if not eps > 0.0:
        raise InvalidParameter(f"extra integrability eps must be positive, got {eps}", parameter="eps")
    if not N > 0.0:
        raise InvalidParameter(f"amplitude cut N must be positive, got {N}", parameter="N")
    return lpb_norm(g, p + eps, space) ** (p + eps) * N ** (-eps)


def averaged_range_entropy(g: SpectralSignal, h: float, eps: float,
                           space: Optional[NormKind] = None) -> int:
    """eps-entropy of the range ``{g_h(t)}`` of the time average."""
    averaged = time_average(g, h)
    return epsilon_entropy(TrajectoryCloud.from_signal(averaged, norm_kind=space), eps)


# Classifier

@dataclass
class ClassVerdict:
    holds: Verdict
    curve: Optional[ModulusCurve] = None
    value: Optional[float] = None
    threshold: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            'holds': self.holds.value,
            'value': self.value,
            'threshold': self.threshold,
            'notes': list(self.notes),
        }


@dataclass
class ClassReport:
    verdicts: Dict[ClassName, ClassVerdict]
    p: float
    lpb: float
    decay: float
    floor: float
    thresholds: ClassThresholds
    warnings: List[str] = field(default_factory=list)

    def holds(self, name: ClassName) -> Verdict:
        return self.verdicts[name].holds

    def lattice_violations(self) -> List[str]:
        """Broken class implications; empty on every report the classifier produces."""
        yes = {name for name, v in self.verdicts.items() if v.holds is Verdict.YES}
        violations = []
        implications = [
            (ClassName.STRONGLY_NORMAL, ClassName.NORMAL),
            (ClassName.TIME_REGULAR, ClassName.STRONGLY_NORMAL),
            (ClassName.TIME_REGULAR, ClassName.WEAKLY_NORMAL),
            (ClassName.SPACE_REGULAR, ClassName.WEAKLY_NORMAL),
            (ClassName.NORMAL, ClassName.WEAKLY_NORMAL),
        ]
        for premise, conclusion in implications:
            if premise in yes and conclusion not in yes:
                violations.append(f"{premise.value} without {conclusion.value}")
        expected = _conjunction(self.holds(ClassName.TIME_REGULAR), self.holds(ClassName.SPACE_REGULAR))
        if self.holds(ClassName.TRANSLATION_COMPACT) is not expected:
            violations.append("translation-compact differs from time-regular AND space-regular")
        return violations

    def to_dict(self) -> dict:
        return {
            'p': self.p,
            'lpb_norm': self.lpb,
            'decay_threshold': self.decay,
            'floor_threshold': self.floor,
            'classes': {name.value: self.verdicts[name].to_dict() for name in ClassName},
            'warnings': list(self.warnings),
        }


def _conjunction(a: Verdict, b: Verdict) -> Verdict:
    if a is Verdict.YES and b is Verdict.YES:
        return Verdict.YES
    if Verdict.NO in (a, b):
        return Verdict.NO
    return Verdict.INCONCLUSIVE


def limit_verdict(ordered: Sequence[float], decay: float, floor: float, retention: float) -> Verdict:
    """Verdict from values ordered toward the limit; the last one sits at the resolution limit."""
    if len(ordered) == 0:
        return Verdict.INCONCLUSIVE
    last = float(ordered[-1])
    if last <= decay:
        return Verdict.YES
    if last >= floor and last >= retention * float(np.max(ordered)):
        return Verdict.NO
    return Verdict.INCONCLUSIVE


class ForcingClassifier(LoggerMixin):
    """Evaluates every class curve of one signal and assembles a consistent report."""

    def __init__(self, thresholds: Optional[ClassThresholds] = None, space: Optional[NormKind] = None):
        self.thresholds = thresholds or ClassThresholds()
        self.space = space

    # Ladders

    def offset_ladder(self, g: SpectralSignal, below_span: bool) -> List[float]:
        taus = []
        tau = self.thresholds.resolution_steps * g.grid.dt
        while tau <= self.thresholds.tau_max * (1.0 + Tolerances.GRID_ALIGNMENT):
            if below_span and tau >= g.span - Tolerances.UNIT_WINDOW:
                break
            taus.append(tau)
            tau *= 2.0
        return taus

    def rank_ladder(self, g: SpectralSignal) -> List[int]:
        top = max(1, _finite_rank_limit(g) // 2)
        ranks, M = [], 1
        while M <= top:
            ranks.append(M)
            M *= 2
        return ranks

    def amplitude_ladder(self, lpb: float) -> List[float]:
        return [lpb * 2.0 ** j for j in range(self.thresholds.amplitude_octaves + 1)]

    # Sub-curves

    def _translation_bounded(self, g: SpectralSignal, p: float) -> ClassVerdict:
        norms = window_norms(g, p, space=self.space)
        first_unit = max(1, int(math.floor(Tolerances.UNIT_WINDOW / g.grid.dt)))
        reference = float(norms[:first_unit].max())
        peak = float(norms.max())
        factor = self.thresholds.growth_factor
        if peak == 0.0:
            return ClassVerdict(Verdict.YES, value=0.0, threshold=factor, notes=["zero signal"])
        if reference == 0.0:
            return ClassVerdict(Verdict.INCONCLUSIVE, value=math.inf, threshold=factor,
                                notes=["no mass in the first time unit to compare against"])
        ratio = peak / reference
        holds = Verdict.NO if ratio > factor else Verdict.YES
        return ClassVerdict(holds, value=ratio, threshold=factor,
                            notes=["ratio of the largest unit-window norm to the first time unit"])

    def _residual_curve(self, g: SpectralSignal, p: float, parameters: Sequence[float],
                        approximate: Callable[[SpectralSignal, float], SpectralSignal]) -> ModulusCurve:
        weights = resolve_weights(g, self.space)
        values = []
        for parameter in parameters:
            residual = g.with_coeffs(g.coeffs - approximate(g, parameter).coeffs)
            values.append(float(np.max(window_integrals(residual, p, Tolerances.UNIT_WINDOW, weights))))
        return ModulusCurve(np.asarray(parameters, dtype=float), np.asarray(values), ModulusKind.TAIL)

    def _weakly_normal(self, g: SpectralSignal, p: float, taus: Sequence[float]) -> Tuple[float, Tuple[int, float]]:
        best, where = math.inf, (0, 0.0)
        for M in self.rank_ladder(g):
            residual = g.with_coeffs(g.coeffs - project_finite_rank(g, M).coeffs)
            curve = normality_modulus(residual, p, taus, self.space)
            index = int(np.argmin(curve.values))
            if curve.values[index] < best:
                best, where = float(curve.values[index]), (M, float(curve.taus[index]))
        return best, where

    def classify(self, g: SpectralSignal, p: float = 2.0) -> ClassReport:
        if g.span < MIN_CLASSIFY_SPAN * (1.0 - Tolerances.GRID_ALIGNMENT):
            raise SpanTooShort(f"classification needs a span of at least {MIN_CLASSIFY_SPAN:g}",
                               span=g.span, required=MIN_CLASSIFY_SPAN)
        t = self.thresholds
        lpb = lpb_norm(g, p, self.space)
        decay = t.decay_ratio * lpb ** p
        floor = t.floor_factor * decay
        continuity_taus = self.offset_ladder(g, below_span=True)
        normality_taus = self.offset_ladder(g, below_span=False)
        ranks = self.rank_ladder(g)
        amplitudes = self.amplitude_ladder(lpb) if lpb > 0.0 else []
        self.logger.debug(f"ladders: tau={continuity_taus}, M={ranks}, N={amplitudes}")

        jobs = {
            ClassName.TRANSLATION_BOUNDED: lambda: self._translation_bounded(g, p),
            ClassName.TIME_REGULAR: lambda: (
                modulus_of_continuity(g, p, continuity_taus, self.space) if continuity_taus else None),
            ClassName.SPACE_REGULAR: lambda: self._residual_curve(
                g, p, ranks, lambda s, M: project_finite_rank(s, int(M))),
            ClassName.NORMAL: lambda: (
                normality_modulus(g, p, normality_taus, self.space) if normality_taus else None),
            ClassName.STRONGLY_NORMAL: lambda: (
                self._residual_curve(g, p, amplitudes, lambda s, N: truncate_amplitude(s, N, self.space))
                if amplitudes else None),
            ClassName.WEAKLY_NORMAL: lambda: (
                self._weakly_normal(g, p, normality_taus) if normality_taus else None),
        }
        with ThreadPoolExecutor(max_workers=t.max_workers) as executor:
            futures = {name: executor.submit(job) for name, job in jobs.items()}
            results = {name: futures[name].result() for name in jobs}

        verdicts: Dict[ClassName, ClassVerdict] = {}
        verdicts[ClassName.TRANSLATION_BOUNDED] = results[ClassName.TRANSLATION_BOUNDED]
        for name in (ClassName.TIME_REGULAR, ClassName.NORMAL):
            curve = results[name]
            if curve is None:
                verdicts[name] = ClassVerdict(Verdict.INCONCLUSIVE, threshold=decay,
                                              notes=["offset ladder is empty at this resolution"])
                continue
            ordered = curve.values[::-1]
            verdicts[name] = ClassVerdict(limit_verdict(ordered, decay, floor, t.retention),
                                          curve=curve, value=float(ordered[-1]), threshold=decay)
        for name in (ClassName.SPACE_REGULAR, ClassName.STRONGLY_NORMAL):
            curve = results[name]
            if curve is None:
                verdicts[name] = ClassVerdict(Verdict.YES, value=0.0, threshold=decay, notes=["zero signal"])
                continue
            verdicts[name] = ClassVerdict(limit_verdict(curve.values, decay, floor, t.retention),
                                          curve=curve, value=curve.last, threshold=decay)

        weak = results[ClassName.WEAKLY_NORMAL]
        if weak is None:
            verdicts[ClassName.WEAKLY_NORMAL] = ClassVerdict(Verdict.INCONCLUSIVE, threshold=decay,
                                                             notes=[WEAKLY_NORMAL_NOTE])
        else:
            best, (M, tau) = weak
            holds = Verdict.YES if best <= decay else Verdict.NO if best >= floor else Verdict.INCONCLUSIVE
            verdicts[ClassName.WEAKLY_NORMAL] = ClassVerdict(
                holds, value=best, threshold=decay,
                notes=[WEAKLY_NORMAL_NOTE, f"best pair M={M}, tau={tau:g}"])

        report = ClassReport(verdicts, p, lpb, decay, floor, t)
        self._propagate(report)
        verdicts[ClassName.TRANSLATION_COMPACT] = ClassVerdict(
            _conjunction(report.holds(ClassName.TIME_REGULAR), report.holds(ClassName.SPACE_REGULAR)),
            notes=["time-regular AND space-regular"])
        report.verdicts = {name: verdicts[name] for name in ClassName}
        self.logger.info("📊 Classification: " + ", ".join(
            f"{name.value}={report.holds(name).value}" for name in ClassName))
        return report

    def _imply(self, report: ClassReport, premise: ClassName, conclusion: ClassName) -> None:
        if report.holds(premise) is not Verdict.YES or report.holds(conclusion) is Verdict.YES:
            return
        target = report.verdicts[conclusion]
        if target.holds is Verdict.NO:
            message = f"{conclusion.value} measured 'no' but implied by {premise.value}"
            report.warnings.append(message)
            self.logger.warning(message)
        target.holds = Verdict.YES
        target.notes.append(f"implied by {premise.value}")

    def _propagate(self, report: ClassReport) -> None:
        if report.holds(ClassName.TRANSLATION_BOUNDED) is Verdict.NO:
            for name, v in report.verdicts.items():
                if name is not ClassName.TRANSLATION_BOUNDED:
                    v.holds = Verdict.NO
                    v.notes.append("not translation bounded")
            return
        self._imply(report, ClassName.TIME_REGULAR, ClassName.STRONGLY_NORMAL)
        self._imply(report, ClassName.STRONGLY_NORMAL, ClassName.NORMAL)
        for premise in (ClassName.TIME_REGULAR, ClassName.SPACE_REGULAR, ClassName.NORMAL):
            self._imply(report, premise, ClassName.WEAKLY_NORMAL)


def classify(g: SpectralSignal, p: float = 2.0, thresholds: Optional[ClassThresholds] = None,
             space: Optional[NormKind] = None) -> ClassReport:
    """Tri-state membership of ``g`` in every forcing class."""
    return ForcingClassifier(thresholds, space).classify(g, p)

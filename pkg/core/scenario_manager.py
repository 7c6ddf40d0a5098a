"""
Scenario manager for AttractorLab - binds gallery, solvers and diagnostics into runs.
"""

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from config.config_manager import LabConfiguration, ScenarioParameters
from config.constants import (
    ClassName, CompactnessVerdict, ForceName, ForceQuadrature, NormKind, ScenarioName, Verdict,
)
from lab.classes import classify, mollify, project_finite_rank
from lab.compactness import CompactnessReport, TrajectoryCloud, spatial_tail, tail_modulus, verdict
from lab.gallery import (
    ForceSpec, bump_profile, default_setup, generate, oscillation_mode_oracle, wave_mode_oracle,
    wave_peak_bound, wave_peak_time,
)
from lab.signal import BasisDescriptor, TimeGrid, norm_weights
from lab.solvers import (
    HeatProblem, RDProblem, SolveResult, WaveProblem, dissipation_ratio, heat_solve, rd_solve,
    wave_solve, wave_state_at,
)
from utils.error_handler import LabError, MisalignedOffset, ScenarioError, SpanTooShort, handle_error
from utils.logger import LoggerMixin
from utils.signal_io import (
    write_curve,
    write_curves,
    write_entropy,
    write_json,
    write_ledger,
    write_rows,
    write_signal,
)

HEAT_PLATEAU = math.pi * (1.0 - math.exp(-1.0)) ** 2


@dataclass
class Check:
    """One acceptance check of a scenario summary."""

    label: str
    passed: bool
    value: Optional[float] = None
    expected: Optional[str] = None

    def line(self) -> str:
        detail = []
        if self.value is not None:
            detail.append(f"value={self.value:.6g}")
        if self.expected is not None:
            detail.append(f"expected {self.expected}")
        status = "PASS" if self.passed else "FAIL"
        suffix = f" [{', '.join(detail)}]" if detail else ""
        return f"{self.label}{suffix} {status}"


def at_most(label: str, value: float, limit: float) -> Check:
    return Check(label, bool(value <= limit), float(value), f"<= {limit:g}")


def at_least(label: str, value: float, limit: float) -> Check:
    return Check(label, bool(value >= limit), float(value), f">= {limit:g}")


def verdict_check(label: str, actual: Verdict, expected: Verdict) -> Check:
    return Check(f"{label}: {actual.value}", actual is expected, expected=expected.value)


@dataclass
class ScenarioResult:
    name: ScenarioName
    checks: List[Check] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    files: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(check.passed for check in self.checks)

    def summary_lines(self) -> List[str]:
        lines = [f"scenario: {self.name.value}"]
        lines.extend(check.line() for check in self.checks)
        lines.extend(f"note: {note}" for note in self.notes)
        lines.append(f"result: {'PASS' if self.passed else 'FAIL'}")
        return lines


def save_stride(steps: int, dt: float, limit: float = 1.0 / 8.0) -> int:
    """Largest divisor ``s`` of ``steps`` with ``s * dt <= limit``."""
    best = 1
    for s in range(1, steps + 1):
        if s * dt > limit * (1.0 + 1e-9):
            break
        if steps % s == 0:
            best = s
    return best


def _rng_state_equal(before, after) -> bool:
    return all(np.array_equal(a, b) for a, b in zip(before, after))


class ScenarioRunner(LoggerMixin):
    """Runs one named scenario and writes its reports into ``out_dir``."""

    def __init__(self, config: LabConfiguration, out_dir: str, save_trajectory: bool = False):
        super().__init__()
        self.config = config
        self.out_dir = out_dir
        self.save_trajectory = save_trajectory
        self.stage = "setup"
        self._scenarios: Dict[ScenarioName, Callable[[ScenarioParameters, ScenarioResult], None]] = {
            ScenarioName.HEAT_NONCOMPACT: self._heat_noncompact,
            ScenarioName.WAVE_NONCOMPACT: self._wave_noncompact,
            ScenarioName.TRAVELLING_WAVE: self._travelling_wave,
            ScenarioName.OSCILLATORY_UNBOUNDED: self._oscillatory_unbounded,
            ScenarioName.MOLLIFIED_COMPACT: self._mollified_compact,
            ScenarioName.CLASSIFY_GALLERY: self._classify_gallery,
        }

    def available(self) -> List[str]:
        return [name.value for name in self._scenarios]

    def _path(self, filename: str, result: ScenarioResult) -> str:
        path = os.path.join(self.out_dir, filename)
        result.files.append(path)
        return path

    def run(self, name: ScenarioName) -> ScenarioResult:
        params = self.config.scenario
        result = ScenarioResult(name)
        os.makedirs(self.out_dir, exist_ok=True)
        rng_before = np.random.get_state() if params.seedless else None
        self.logger.info(f"Running scenario '{name.value}' into {self.out_dir}")
        try:
            self._scenarios[name](params, result)
        except LabError:
            self.logger.error(f"Scenario '{name.value}' failed at stage '{self.stage}'")
            raise
        except Exception as e:
            message = handle_error(e, f"Scenario {name.value} ({self.stage})")
            raise ScenarioError(message, scenario=name.value, check=self.stage, original_error=e)

        if rng_before is not None:
            result.checks.append(Check("seedless: global RNG state unchanged",
                                       _rng_state_equal(rng_before, np.random.get_state())))
        self.stage = "summary"
        summary = self._path("summary.txt", result)
        with open(summary, 'w', encoding='utf-8') as f:
            f.write("\n".join(result.summary_lines()) + "\n")
        self.logger.info(f"Scenario '{name.value}' {'passed' if result.passed else 'failed'} "
                         f"({sum(c.passed for c in result.checks)}/{len(result.checks)} checks)")
        return result

    def _write_solution(self, solution: SolveResult, result: ScenarioResult) -> None:
        write_ledger(self._path("ledger.csv", result), solution.ledger)
        if self.save_trajectory:
            write_signal(solution.trajectory, self._path("trajectory.csv", result))

    def _write_compactness(self, report: CompactnessReport, result: ScenarioResult) -> None:
        write_json(self._path("compactness.json", result), report.to_dict())
        write_curve(self._path("tail.csv", result), report.tail_curve)
        write_entropy(self._path("entropy.csv", result), report.entropy_counts)
        if report.spatial_curve is not None:
            write_curve(self._path("spatial_tail.csv", result), report.spatial_curve, argument='R')

    # Scenarios

    def _heat_noncompact(self, params: ScenarioParameters, result: ScenarioResult) -> None:
        n_max = params.resolve('nmax', 16)
        alpha = params.resolve('alpha', 0.0)
        spec = ForceSpec(ForceName.HEAT_PULSE, n_max=n_max)
        self.stage = "generate"
        grid, basis = default_setup(spec, span=params.t_end, dt=params.dt, modes=params.modes)
        force = generate(spec, grid, basis)
        self.stage = "heat_solve"
        solution = heat_solve(HeatProblem(force, alpha=alpha))
        trajectory = solution.trajectory

        self.stage = "pulse-end values"
        indices, errors = [], []
        for n in range(1, n_max + 1):
            try:
                k = trajectory.grid.index_of(n + 1.0 / n ** 2)
            except (MisalignedOffset, SpanTooShort):
                self.logger.warning(f"pulse {n} does not end on a grid point; snapshot skipped")
                continue
            rate = n ** 2 + alpha
            expected = n * -math.expm1(-rate / n ** 2) / rate
            indices.append(k)
            errors.append(abs(trajectory.coeffs[k, n - 1] - expected) / expected)
        if not indices:
            raise ScenarioError("no pulse ends on the grid", scenario=result.name.value, check=self.stage)
        result.checks.append(at_most("u_n(n+1/n^2) vs (1-1/e)/n: max rel err < 1e-8", max(errors), 1e-8))
        result.checks.append(at_most("HeatL2 ledger: max step residual < 1e-8",
                                     solution.ledger.max_abs_residual, 1e-8))

        self.stage = "compactness"
        cloud = TrajectoryCloud.from_signal(trajectory, indices, NormKind.H1)
        report = verdict(cloud, self.config.compactness_thresholds)
        tail = report.tail_curve
        if alpha == 0.0 and n_max >= 2:
            inner = tail_modulus(cloud, range(1, n_max))
            spread = float(np.max(np.abs(inner.values - HEAT_PLATEAU))) / HEAT_PLATEAU
            result.checks.append(at_most("H1 tail plateau pi(1-1/e)^2 for 1 <= M < nmax: max rel dev < 1%",
                                         spread, 0.01))
        else:
            result.notes.append("plateau value pi(1-1/e)^2 applies to alpha = 0 only")
        result.checks.append(Check(f"verdict: {report.verdict.value}",
                                   report.verdict is CompactnessVerdict.NON_COMPACT_WITNESS,
                                   expected=CompactnessVerdict.NON_COMPACT_WITNESS.value))

        self.stage = "write"
        self._write_solution(solution, result)
        write_curves(self._path("curves.csv", result), {'h1-tail': tail})
        self._write_compactness(report, result)

    def _wave_noncompact(self, params: ScenarioParameters, result: ScenarioResult) -> None:
        n_max = params.resolve('nmax', 8)
        gamma = params.resolve('gamma', 1.0)
        spec = ForceSpec(ForceName.WAVE_RESONANT, n_max=n_max)
        self.stage = "generate"
        grid, basis = default_setup(spec, span=params.t_end, dt=params.dt, modes=params.modes)
        force = generate(spec, grid, basis)
        self.stage = "wave_solve"
        problem = WaveProblem(force, gamma=gamma, quadrature=ForceQuadrature.EXACT)
        solution = wave_solve(problem)
        result.checks.append(at_most("WaveE ledger: max step residual < 1e-8",
                                     solution.ledger.max_abs_residual, 1e-8))

        self.stage = "peak states"
        peaks, times = [], []
        for n in range(1, n_max + 1):
            t_n = wave_peak_time(n)
            u, v = wave_state_at(problem, solution, t_n)
            peaks.append(np.concatenate([u, v]))
            times.append(t_n)
            if gamma == 1.0:
                result.checks.append(at_least(f"u_{n}(t_{n}) >= 1/n - 2e^-pi/sqrt(4n^2-1)",
                                              u[n - 1], wave_peak_bound(n)))

        if gamma == 1.0:
            self.stage = "oracle comparison"
            worst = 0.0
            for n in range(1, n_max + 1):
                start = 3.0 * n * math.pi
                for t in np.linspace(start, start + 3.0 * math.pi, 100, endpoint=False):
                    u, v = wave_state_at(problem, solution, float(t))
                    exact_u, exact_v = wave_mode_oracle(n, float(t))
                    worst = max(worst, abs(u[n - 1] - exact_u), abs(v[n - 1] - exact_v))
            result.checks.append(at_most("wave_mode_oracle at 100 times per window: max abs err < 1e-8",
                                         worst, 1e-8))
        else:
            result.notes.append("peak bound and oracle hold for gamma = 1 only")

        self.stage = "compactness"
        cloud = TrajectoryCloud(np.asarray(peaks), np.asarray(times), NormKind.ENERGY, basis, components=2)
        if cloud.size >= 2:
            points = cloud.scaled()
            gaps = [float(np.linalg.norm(points[i] - points[j]))
                    for i in range(cloud.size) for j in range(i + 1, cloud.size)]
            result.checks.append(at_least("peak states: min pairwise energy distance >= sqrt(pi)",
                                          min(gaps), math.sqrt(math.pi)))
        report = verdict(cloud, self.config.compactness_thresholds)
        result.notes.append(f"verdict: {report.verdict.value}")

        self.stage = "write"
        self._write_solution(solution, result)
        write_curves(self._path("curves.csv", result), {'energy-tail': report.tail_curve})
        self._write_compactness(report, result)

    def _travelling_wave(self, params: ScenarioParameters, result: ScenarioResult) -> None:
        L = params.resolve('L', 16.0)
        alpha = params.resolve('alpha', 1.0)
        width = params.resolve('width', 2.0)
        dt = params.resolve('dt', 1e-3)
        points = params.resolve('grid_points', 2049)
        T = params.resolve('t_end', L / 2.0)
        spec = ForceSpec(ForceName.TRAVELLING_BUMP, L=L, width=width, alpha=alpha)
        self.stage = "generate"
        grid, basis = default_setup(spec, span=T, dt=dt, modes=points)
        force = generate(spec, grid, basis)
        u0 = bump_profile(basis.nodes(), width)[0]
        u0[0] = u0[-1] = 0.0

        self.stage = "rd_solve"
        steps = grid.count - 1
        solution = rd_solve(RDProblem(force, a=1.0, alpha=alpha), u0, save_every=save_stride(steps, dt))
        trajectory = solution.trajectory

        self.stage = "tracking error"
        exact = bump_profile(basis.nodes() - trajectory.grid.t_end, width)[0]
        weights = norm_weights(basis, NormKind.L2_LINE)
        error = math.sqrt(float(np.sum(weights * (trajectory.coeffs[-1] - exact) ** 2)))
        result.checks.append(at_most("L2 error vs V(x-T) at T = L/2 <= 1e-2", error, 1e-2))

        self.stage = "spatial tail"
        span = trajectory.grid.span
        radii = [span / 8.0, span / 4.0, 3.0 * span / 8.0, span / 2.0]
        cloud = TrajectoryCloud.from_signal(trajectory, norm_kind=NormKind.L2_LINE)
        escape = spatial_tail(cloud, radii)
        retained = escape.last / escape.values[0] if escape.values[0] > 0.0 else 0.0
        result.checks.append(at_least("spatial tail at R=T/2 relative to R=T/8 (non-decaying)", retained, 0.5))
        report = verdict(cloud, self.config.compactness_thresholds, Rs=radii)
        result.notes.append(f"verdict: {report.verdict.value}")

        self.stage = "write"
        self._write_solution(solution, result)
        profile = solution.profile
        write_rows(self._path("profile.csv", result), ('t', 'state_norm_sq', 'h1_integral', 'lp_integral'),
                   zip(profile.window_ends.tolist(), profile.state_norm_sq.tolist(),
                       profile.h1_integral.tolist(), profile.lp_integral.tolist()))
        write_curves(self._path("curves.csv", result), {'spatial-tail': escape})
        self._write_compactness(report, result)

    def _oscillatory_unbounded(self, params: ScenarioParameters, result: ScenarioResult) -> None:
        alpha = params.resolve('alpha', 1.0)
        dt = params.resolve('dt', 2.0 ** -15)
        t_end = params.resolve('t_end', 8.0)
        spec = ForceSpec(ForceName.RAPID_OSCILLATION)
        self.stage = "generate"
        grid = TimeGrid(0.0, dt, int(round(t_end / dt)) + 1)
        basis = BasisDescriptor.sine(params.resolve('modes', 1))
        force = generate(spec, grid, basis)

        self.stage = "heat_solve"
        solution = heat_solve(HeatProblem(force, alpha=alpha, quadrature=ForceQuadrature.EXACT))
        trajectory = solution.trajectory

        self.stage = "oracle comparison"
        sample_times = np.arange(1, int(math.floor(trajectory.grid.span)) + 1, dtype=float)
        indices = [trajectory.grid.index_of(t) for t in sample_times]
        oracle = oscillation_mode_oracle(sample_times, alpha)
        worst = float(np.max(np.abs(trajectory.coeffs[indices, 0] - oracle)))
        result.checks.append(at_most("a_1(t) vs adaptive quadrature oracle: max abs err < 1e-6", worst, 1e-6))
        ratio = dissipation_ratio(trajectory)
        result.checks.append(at_most("heat response peak over first-half peak (bounded)", ratio, 10.0))

        self.stage = "classify"
        class_grid, class_basis = default_setup(spec)
        report = classify(generate(spec, class_grid, class_basis), params.p, self.config.class_thresholds)
        result.checks.append(verdict_check("RapidOscillation translation-bounded",
                                           report.holds(ClassName.TRANSLATION_BOUNDED), Verdict.NO))

        self.stage = "write"
        self._write_solution(solution, result)
        write_json(self._path("class_report.json", result), report.to_dict())

    def _mollified_compact(self, params: ScenarioParameters, result: ScenarioResult) -> None:
        n_max = params.resolve('nmax', 8)
        alpha = params.resolve('alpha', 0.0)
        rank = min(4, n_max)
        spec = ForceSpec(ForceName.HEAT_PULSE, n_max=n_max)
        self.stage = "generate"
        grid, basis = default_setup(spec, span=params.resolve('t_end', n_max + 12.0), dt=params.dt,
                                    modes=params.modes)
        force = generate(spec, grid, basis)
        self.stage = "smooth"
        smooth = project_finite_rank(mollify(force, 0.25), rank)

        self.stage = "heat_solve"
        solution = heat_solve(HeatProblem(smooth, alpha=alpha))
        trajectory = solution.trajectory
        stride = max(1, int(round(1.0 / trajectory.grid.dt)))
        cloud = TrajectoryCloud.from_signal(trajectory, np.arange(0, trajectory.grid.count, stride), NormKind.H1)

        self.stage = "compactness"
        report = verdict(cloud, self.config.compactness_thresholds)
        beyond = tail_modulus(cloud, np.arange(rank, basis.mode_count + 1))
        result.checks.append(at_most(f"tail modulus beyond M={rank} < 1e-6", float(beyond.values.max()), 1e-6))
        result.checks.append(Check(f"verdict: {report.verdict.value}",
                                   report.verdict is CompactnessVerdict.COMPACT_CONSISTENT,
                                   expected=CompactnessVerdict.COMPACT_CONSISTENT.value))
        result.checks.append(at_most("HeatL2 ledger: max step residual < 1e-8",
                                     solution.ledger.max_abs_residual, 1e-8))

        self.stage = "write"
        self._write_solution(solution, result)
        write_curves(self._path("curves.csv", result), {'h1-tail': report.tail_curve})
        self._write_compactness(report, result)

    def _classify_gallery(self, params: ScenarioParameters, result: ScenarioResult) -> None:
        n_max = params.resolve('nmax', 8)
        expectations: Dict[ForceName, Sequence[tuple]] = {
            ForceName.HEAT_PULSE: ((ClassName.NORMAL, Verdict.NO), (ClassName.SPACE_REGULAR, Verdict.NO),
                                   (ClassName.TIME_REGULAR, Verdict.NO),
                                   (ClassName.TRANSLATION_BOUNDED, Verdict.YES)),
            ForceName.WAVE_RESONANT: ((ClassName.STRONGLY_NORMAL, Verdict.YES),
                                      (ClassName.TIME_REGULAR, Verdict.NO)),
            ForceName.TRAVELLING_BUMP: ((ClassName.TIME_REGULAR, Verdict.YES),),
            ForceName.RAPID_OSCILLATION: ((ClassName.TRANSLATION_BOUNDED, Verdict.NO),),
            ForceName.SMOOTH_REFERENCE: tuple((name, Verdict.YES) for name in ClassName),
        }
        reports, curves = {}, {}
        for name, expected in expectations.items():
            self.stage = f"classify {name.value}"
            spec = ForceSpec(name, n_max=n_max)
            grid, basis = default_setup(spec)
            force = generate(spec, grid, basis)
            report = classify(force, params.p, self.config.class_thresholds)
            reports[name.value] = report.to_dict()
            for class_name, verdict_item in report.verdicts.items():
                if verdict_item.curve is not None:
                    curves[f"{name.value}/{class_name.value}"] = verdict_item.curve
            violations = report.lattice_violations()
            result.checks.append(Check(f"{name.value}: implication lattice violations", not violations,
                                       float(len(violations)), "0"))
            for class_name, wanted in expected:
                result.checks.append(verdict_check(f"{name.value} {class_name.value}",
                                                   report.holds(class_name), wanted))
            if name is ForceName.TRAVELLING_BUMP:
                span = force.span
                radii = [span / 8.0, span / 4.0, 3.0 * span / 8.0, span / 2.0]
                escape = spatial_tail(TrajectoryCloud.from_signal(force, norm_kind=NormKind.L2_LINE), radii)
                curves[f"{name.value}/spatial-tail"] = escape
                retained = escape.last / escape.values[0] if escape.values[0] > 0.0 else 0.0
                result.checks.append(at_least(f"{name.value} spatial tail at R=span/2 relative to R=span/8",
                                              retained, 0.5))

        self.stage = "write"
        write_json(self._path("class_reports.json", result), reports)
        write_curves(self._path("curves.csv", result), curves)


def run_scenario(name: str, config: LabConfiguration, out_dir: str, save_trajectory: bool = False) -> ScenarioResult:
    try:
        scenario = ScenarioName(name)
    except ValueError as e:
        raise ScenarioError(f"unknown scenario '{name}'", scenario=name, check="lookup", original_error=e)
    return ScenarioRunner(config, out_dir, save_trajectory).run(scenario)

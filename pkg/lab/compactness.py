"""
Asymptotic-compactness diagnostics over finite snapshot clouds.

A cloud is only ever evidence: it can exhibit a non-compact witness (energy
that refuses to leave high modes or to stay inside a bounded region) or be
consistent with compactness, never prove it.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.config_manager import CompactnessThresholds
from config.constants import (
    CompactnessVerdict, DEFAULT_ENTROPY_LEVELS, ModulusKind, NormKind, SCOPE_NOTE, Tolerances,
)
from lab.signal import (
    BasisDescriptor, ModulusCurve, SpectralSignal, default_norm, line_sine_transform, norm_weights,
)
from utils.error_handler import InvalidParameter
from utils.logger import debug, info


@dataclass(frozen=True, eq=False)
class TrajectoryCloud:
    """Snapshots ``u(t_i)`` with the norm used to probe them."""

    snapshots: np.ndarray
    times: np.ndarray
    norm_kind: NormKind
    basis: BasisDescriptor
    components: int = 1

    def __post_init__(self):
        snapshots = np.atleast_2d(np.asarray(self.snapshots, dtype=float))
        times = np.asarray(self.times, dtype=float).ravel()
        if snapshots.shape[0] == 0:
            raise InvalidParameter("a cloud needs at least one snapshot", parameter="snapshots")
        if snapshots.shape[1] != self.components * self.basis.mode_count:
            raise InvalidParameter(f"snapshot dimension {snapshots.shape[1]} does not match the basis",
                                   parameter="snapshots")
        if times.shape[0] != snapshots.shape[0]:
            raise InvalidParameter("one time per snapshot is required", parameter="times")
        if np.any(np.diff(times) <= 0.0):
            raise InvalidParameter("snapshot times must be ascending", parameter="times")
        if not np.all(np.isfinite(snapshots)):
            raise InvalidParameter("snapshots must be finite", parameter="snapshots")
        object.__setattr__(self, 'snapshots', snapshots)
        object.__setattr__(self, 'times', times)

    @classmethod
    def from_signal(cls, signal: SpectralSignal, indices: Optional[Sequence[int]] = None,
                    norm_kind: Optional[NormKind] = None) -> 'TrajectoryCloud':
        rows = np.arange(signal.grid.count) if indices is None else np.asarray(indices, dtype=int)
        return cls(signal.coeffs[rows], signal.times()[rows],
                   norm_kind or default_norm(signal.basis, signal.components),
                   signal.basis, signal.components)

    @property
    def size(self) -> int:
        return self.snapshots.shape[0]

    def weights(self) -> np.ndarray:
        return norm_weights(self.basis, self.norm_kind, self.components)

    def norms(self) -> np.ndarray:
        return np.sqrt(self.snapshots ** 2 @ self.weights())

    def scaled(self) -> np.ndarray:
        """Snapshots in coordinates where the probe norm is Euclidean."""
        return self.snapshots * np.sqrt(self.weights())


@dataclass
class CompactnessReport:
    tail_curve: ModulusCurve
    entropy_counts: Dict[float, int]
    norm_gap: Optional[float]
    candidate_stable: bool
    verdict: CompactnessVerdict
    plateau: Optional[float] = None
    witness: Optional[Tuple[int, int]] = None
    witness_distance: Optional[float] = None
    spatial_curve: Optional[ModulusCurve] = None
    decay_threshold: float = 0.0
    floor_threshold: float = 0.0
    notes: List[str] = field(default_factory=list)
    scope_note: str = SCOPE_NOTE

    def to_dict(self) -> dict:
        return {
            'verdict': self.verdict.value,
            'plateau': self.plateau,
            'witness': list(self.witness) if self.witness else None,
            'witness_distance': self.witness_distance,
            'norm_gap': self.norm_gap,
            'candidate_stable': self.candidate_stable,
            'decay_threshold': self.decay_threshold,
            'floor_threshold': self.floor_threshold,
            'entropy_counts': {f"{eps:.17g}": count for eps, count in self.entropy_counts.items()},
            'notes': list(self.notes),
            'scope_note': self.scope_note,
        }


def _mode_energies(cloud: TrajectoryCloud) -> np.ndarray:
    """Per-snapshot energy in each mode, shape (snapshots, components, modes)."""
    if cloud.basis.is_line:
        spectrum = line_sine_transform(cloud.snapshots)
        return (cloud.basis.dx * spectrum ** 2)[:, None, :]
    energies = cloud.snapshots ** 2 * cloud.weights()
    return energies.reshape(cloud.size, cloud.components, cloud.basis.mode_count)


def _mode_limit(cloud: TrajectoryCloud) -> int:
    return cloud.basis.mode_count - 2 if cloud.basis.is_line else cloud.basis.mode_count


def tail_modulus(cloud: TrajectoryCloud, Ms: Sequence[int]) -> ModulusCurve:
    """``T(M)``: largest snapshot energy carried by modes above ``M``."""
    Ms = np.asarray(Ms, dtype=int)
    limit = _mode_limit(cloud)
    if Ms.size == 0 or np.any(Ms < 0) or np.any(Ms > limit):
        raise InvalidParameter(f"mode cut-offs must lie in [0, {limit}]", parameter="Ms")
    energies = _mode_energies(cloud).sum(axis=1)
    tails = np.cumsum(energies[:, ::-1], axis=1)[:, ::-1]
    tails = np.concatenate([tails, np.zeros((cloud.size, 1))], axis=1)
    values = tails[:, Ms].max(axis=0)
    return ModulusCurve(Ms.astype(float), values, ModulusKind.TAIL)


def _traversal_radii(points: np.ndarray) -> np.ndarray:
    """Farthest-first traversal; ``radii[k]`` is the distance of the k-th pick to earlier picks."""
    count = points.shape[0]
    radii = np.empty(count)
    radii[0] = np.inf
    distances = np.linalg.norm(points - points[0], axis=1)
    for k in range(1, count):
        pick = int(np.argmax(distances))
        radii[k] = distances[pick]
        distances = np.minimum(distances, np.linalg.norm(points - points[pick], axis=1))
    return radii


def epsilon_entropy(cloud: TrajectoryCloud, eps: float) -> int:
    """Size of the greedy eps-net built by farthest-first traversal."""
    if not eps > 0.0:
        raise InvalidParameter(f"eps must be positive, got {eps}", parameter="eps")
    return int(np.count_nonzero(_traversal_radii(cloud.scaled()) > eps))


def entropy_counts(cloud: TrajectoryCloud, levels: Sequence[float]) -> Dict[float, int]:
    radii = _traversal_radii(cloud.scaled())
    return {float(eps): int(np.count_nonzero(radii > eps)) for eps in levels}


def _limit_candidate(cloud: TrajectoryCloud) -> Tuple[np.ndarray, int]:
    quarter = max(1, cloud.size // 4)
    return cloud.snapshots[-quarter:].mean(axis=0), quarter


def norm_gap(cloud: TrajectoryCloud) -> float:
    """Largest late snapshot norm minus the norm of the tail-averaged limit candidate."""
    if cloud.size < 4:
        raise InvalidParameter(f"norm gap needs at least 4 snapshots, got {cloud.size}", parameter="snapshots")
    candidate, quarter = _limit_candidate(cloud)
    weights = cloud.weights()
    late = float(cloud.norms()[-quarter:].max())
    return late - float(np.sqrt(candidate ** 2 @ weights))


def candidate_is_stable(cloud: TrajectoryCloud) -> bool:
    """Whether the last two quarter averages agree relative to the largest snapshot."""
    if cloud.size < 4:
        return False
    candidate, quarter = _limit_candidate(cloud)
    previous = cloud.snapshots[-2 * quarter:-quarter].mean(axis=0)
    change = float(np.sqrt((candidate - previous) ** 2 @ cloud.weights()))
    return change <= Tolerances.CANDIDATE_STABILITY * float(cloud.norms().max())


def spatial_tail(cloud: TrajectoryCloud, Rs: Sequence[float]) -> ModulusCurve:
    """``R -> max ||u||_{L2(|x| > R)}`` over the snapshots of a line-grid cloud."""
    if not cloud.basis.is_line:
        raise InvalidParameter("spatial tails need a line grid", parameter="basis")
    Rs = np.asarray(Rs, dtype=float)
    if Rs.size == 0 or np.any(Rs < 0.0) or np.any(Rs >= cloud.basis.half_length):
        raise InvalidParameter(f"radii must lie in [0, {cloud.basis.half_length:g})", parameter="Rs")
    nodes = np.abs(cloud.basis.nodes())
    weights = norm_weights(cloud.basis, NormKind.L2_LINE)
    energies = cloud.snapshots ** 2 * weights
    values = [float(np.sqrt(energies[:, nodes > R].sum(axis=1).max())) for R in Rs]
    return ModulusCurve(Rs, np.asarray(values), ModulusKind.TAIL)


def default_cutoffs(cloud: TrajectoryCloud) -> np.ndarray:
    limit = _mode_limit(cloud)
    if cloud.basis.is_line:
        ladder = [0] + [2 ** j for j in range(int(np.log2(limit)) + 1)]
        return np.unique(np.asarray(ladder + [limit]))
    return np.arange(0, max(limit, 1))


def _plateau(values: np.ndarray, points: int, tolerance: float, floor: float) -> Optional[float]:
    if values.size < points:
        return None
    last = values[-points:]
    top = float(last.max())
    if top > 0.0 and top - float(last.min()) <= tolerance * top and float(last.min()) >= floor:
        return float(last.min())
    return None


def _farthest_pair(cloud: TrajectoryCloud) -> Tuple[Tuple[int, int], float]:
    """Most separated snapshot pair and its distance in the cloud norm."""
    points = cloud.scaled()
    squared = np.sum(points ** 2, axis=1)
    gram = points @ points.T
    distances = np.maximum(squared[:, None] + squared[None, :] - 2.0 * gram, 0.0)
    i, j = np.unravel_index(int(np.argmax(distances)), distances.shape)
    return (int(min(i, j)), int(max(i, j))), math.sqrt(float(distances[i, j]))


def verdict(cloud: TrajectoryCloud, thresholds: Optional[CompactnessThresholds] = None,
            Ms: Optional[Sequence[int]] = None, Rs: Optional[Sequence[float]] = None) -> CompactnessReport:
    """Classify a cloud as compact-consistent, a non-compact witness, or inconclusive."""
    thresholds = thresholds or CompactnessThresholds()
    Ms = default_cutoffs(cloud) if Ms is None else Ms
    tail = tail_modulus(cloud, Ms)
    norms = cloud.norms()
    max_norm = float(norms.max())
    energy = max_norm ** 2
    decay = thresholds.tail_decay_ratio * energy
    floor = thresholds.tail_floor_factor * decay
    levels = [max_norm * 2.0 ** -j for j in range(1, DEFAULT_ENTROPY_LEVELS + 1)] if max_norm > 0 else []
    counts = entropy_counts(cloud, levels)
    gap = norm_gap(cloud) if cloud.size >= 4 else None
    stable = candidate_is_stable(cloud)
    notes: List[str] = []

    spatial = None
    if cloud.basis.is_line and Rs is not None:
        spatial = spatial_tail(cloud, Rs)

    report = CompactnessReport(tail, counts, gap, stable, CompactnessVerdict.INCONCLUSIVE,
                               spatial_curve=spatial, decay_threshold=decay, floor_threshold=floor,
                               notes=notes)
    if energy == 0.0:
        report.verdict = CompactnessVerdict.COMPACT_CONSISTENT
        notes.append("all snapshots vanish")
        return report

    plateau = _plateau(tail.values, thresholds.plateau_points, thresholds.plateau_tolerance, floor)
    if plateau is None and spatial is not None:
        plateau = _plateau(spatial.values ** 2, thresholds.plateau_points, thresholds.plateau_tolerance, floor)
        if plateau is not None:
            notes.append("energy escapes through the spatial tail")

    if plateau is not None:
        pair, distance = _farthest_pair(cloud)
        report.plateau = plateau
        if distance >= plateau / 2.0:
            report.verdict = CompactnessVerdict.NON_COMPACT_WITNESS
            report.witness = pair
            report.witness_distance = distance
        else:
            notes.append(f"tail plateau {plateau:.6g} without a separated snapshot pair")
    elif gap is None:
        notes.append("fewer than 4 snapshots: no limit candidate")
    elif tail.last <= decay and gap <= thresholds.gap_ratio * max_norm and stable:
        report.verdict = CompactnessVerdict.COMPACT_CONSISTENT
    elif not stable:
        notes.append("quarter averages have not stabilized")

    debug(f"tail curve {tail.values.tolist()}")
    info(f"📊 Compactness verdict: {report.verdict.value}")
    return report

"""
Configuration constants and enums for the AttractorLab project.
"""

from enum import Enum


class BasisKind(Enum):
    """Spatial discretizations a signal can live on."""
    DIRICHLET_SINE = "dirichlet-sine"
    TRUNCATED_LINE = "truncated-line"


class Reconstruction(Enum):
    """Rule used to fill in a signal between its time samples."""
    PIECEWISE_CONSTANT = "piecewise-constant"
    PIECEWISE_LINEAR = "piecewise-linear"


class NormKind(Enum):
    """Spatial norms; all of them are diagonal weighted l2 norms."""
    L2 = "l2"
    H1 = "h1"
    HM1 = "hm1"
    ENERGY = "energy"
    L2_LINE = "l2-line"


class ModulusKind(Enum):
    CONTINUITY = "continuity"
    NORMALITY = "normality"
    EXP_KERNEL = "exp-kernel"
    TAIL = "tail"


class Verdict(Enum):
    """Tri-state class membership."""
    YES = "yes"
    NO = "no"
    INCONCLUSIVE = "inconclusive"


class CompactnessVerdict(Enum):
    COMPACT_CONSISTENT = "CompactConsistent"
    NON_COMPACT_WITNESS = "NonCompactWitness"
    INCONCLUSIVE = "Inconclusive"


class IdentityKind(Enum):
    """Energy identities tracked by the solver ledgers."""
    HEAT_L2 = "HeatL2"
    WAVE_E = "WaveE"
    WAVE_MULTIPLIER = "WaveMultiplier"
    RD_L2 = "RDL2"


class Nonlinearity(Enum):
    NONE = "none"
    CUBIC = "cubic"


class ForceQuadrature(Enum):
    """How solvers integrate the force over a step."""
    RECONSTRUCTION = "reconstruction"
    EXACT = "exact"


class ForceName(Enum):
    """Built-in forcing generators."""
    HEAT_PULSE = "heat-pulse"
    WAVE_RESONANT = "wave-resonant"
    TRAVELLING_BUMP = "travelling-bump"
    RAPID_OSCILLATION = "rapid-oscillation"
    SMOOTH_REFERENCE = "smooth-reference"


class ScenarioName(Enum):
    HEAT_NONCOMPACT = "heat-noncompact"
    WAVE_NONCOMPACT = "wave-noncompact"
    TRAVELLING_WAVE = "travelling-wave"
    OSCILLATORY_UNBOUNDED = "oscillatory-unbounded"
    MOLLIFIED_COMPACT = "mollified-compact"
    CLASSIFY_GALLERY = "classify-gallery"


class ClassName(Enum):
    """Forcing classes reported by the classifier, in report order."""
    TRANSLATION_BOUNDED = "translation-bounded"
    TIME_REGULAR = "time-regular"
    SPACE_REGULAR = "space-regular"
    NORMAL = "normal"
    STRONGLY_NORMAL = "strongly-normal"
    WEAKLY_NORMAL = "weakly-normal"
    TRANSLATION_COMPACT = "translation-compact"


class Tolerances:
    """Numerical tolerances shared across modules."""

    # Relative slack when deciding whether an offset sits on the time grid
    GRID_ALIGNMENT = 1e-9
    # Window length of the uniformly-local norms
    UNIT_WINDOW = 1.0
    # Minimum number of samples a unit window must hold
    MIN_WINDOW_SAMPLES = 8
    # Gauss-Legendre nodes per step for Duhamel and ledger quadrature
    QUADRATURE_NODES = 8
    # Gauss nodes for |g|^p on piecewise-linear intervals when p != 2
    NORM_QUADRATURE_NODES = 4
    # Series switch-over for the phi functions of the exponential integrator
    PHI_SERIES_CUTOFF = 1e-3
    # Norm growth between two RD steps that counts as an instability
    RD_GROWTH_LIMIT = 10.0
    # Relative change allowed between the last two quarter averages of a cloud
    CANDIDATE_STABILITY = 1e-3


class GalleryLimits:
    """Documented parameter ranges of the forcing generators."""
    MAX_NMAX = 64
    MIN_LINE_HALF_LENGTH = 8.0
    # Exponent beyond which e^t overflows double precision
    MAX_OSCILLATION_TIME = 700.0


# Default ladders for the diagnostics
DEFAULT_ENTROPY_LEVELS = 6
SCOPE_NOTE = (
    "Asymptotic compactness quantifies over all bounded sequences and all "
    "hull forces; a finite snapshot cloud is only a witness or evidence device."
)


class UIConfig:
    """User interface configuration."""
    MENU_SEPARATOR = "-" * 60

    SUCCESS_PREFIX = "✅"
    ERROR_PREFIX = "❌"
    WARNING_PREFIX = "⚠️"
    INFO_PREFIX = "ℹ️"
    LOADING_PREFIX = "⏳"

"""
Pytest configuration and shared fixtures for AttractorLab tests.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))


@pytest.fixture(autouse=True)
def reset_logger_state():
    """Automatically restore the project logger level between tests."""
    import logging
    logger = logging.getLogger('attractorlab')
    level = logger.level

    yield

    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level)


@pytest.fixture
def sine_basis():
    from lab.signal import BasisDescriptor
    return BasisDescriptor.sine(4)


@pytest.fixture
def unit_grid():
    from lab.signal import TimeGrid
    return TimeGrid(0.0, 1.0 / 16.0, 16 * 8 + 1)


@pytest.fixture
def constant_signal(unit_grid, sine_basis):
    """Mode-1 coefficient 1 everywhere, so ||g(t)||_{L2}^2 = pi."""
    from lab.signal import SpectralSignal
    coeffs = np.zeros((unit_grid.count, sine_basis.mode_count))
    coeffs[:, 0] = 1.0
    return SpectralSignal(unit_grid, sine_basis, coeffs)


@pytest.fixture
def smooth_force():
    from config.constants import ForceName
    from lab.gallery import ForceSpec, default_setup, generate
    spec = ForceSpec(ForceName.SMOOTH_REFERENCE)
    grid, basis = default_setup(spec, span=4.0, dt=1.0 / 64.0)
    return generate(spec, grid, basis)

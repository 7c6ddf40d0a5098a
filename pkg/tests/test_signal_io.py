"""
Unit tests for signal, curve, ledger and report files.
"""

import csv
import json

import numpy as np
import pytest

from config.constants import IdentityKind, ModulusKind, Reconstruction
from lab.signal import BasisDescriptor, ModulusCurve, SpectralSignal, TimeGrid
from lab.solvers import EnergyLedger
from utils.error_handler import InvalidSignal
from utils.signal_io import (
    read_signal,
    signal_header,
    write_curve,
    write_curves,
    write_entropy,
    write_json,
    write_ledger,
    write_signal,
)


@pytest.fixture
def noisy_signal():
    rng = np.random.default_rng(11)
    grid = TimeGrid(0.5, 1.0 / 3.0, 10)
    return SpectralSignal(grid, BasisDescriptor.sine(3), rng.normal(size=(10, 3)),
                          Reconstruction.PIECEWISE_LINEAR)


def _read_csv(path):
    with open(path, newline='', encoding='utf-8') as f:
        return list(csv.reader(f))


class TestSignalFiles:
    """Test cases for write_signal and read_signal."""

    def test_header_lists_grid_and_basis(self, noisy_signal):
        header = signal_header(noisy_signal)
        assert header.startswith('# basis=dirichlet-sine modes=3 t0=0.5 ')
        assert 'count=10' in header
        assert header.endswith('reconstruction=piecewise-linear')
        assert 'components' not in header and 'L=' not in header

    def test_reads_a_hand_written_file(self, tmp_path):
        path = tmp_path / "hand.txt"
        path.write_text("# basis=dirichlet-sine modes=1 t0=0 dt=0.5 count=3 reconstruction=piecewise-constant\n"
                        "0 1.0\n0.5   2.0\n1\t3.0\n", encoding='utf-8')
        loaded = read_signal(str(path))

        np.testing.assert_array_equal(loaded.coeffs[:, 0], [1.0, 2.0, 3.0])
        assert loaded.components == 1
        assert not loaded.basis.is_line
        assert loaded.reconstruction is Reconstruction.PIECEWISE_CONSTANT

        copy = tmp_path / "copy.txt"
        write_signal(loaded, str(copy))
        lines = copy.read_text(encoding='utf-8').splitlines()
        assert lines[0] == "# basis=dirichlet-sine modes=1 t0=0 dt=0.5 count=3 reconstruction=piecewise-constant"
        assert lines[1:] == ["0 1", "0.5 2", "1 3"]

    def test_sine_header_may_state_pi(self, tmp_path):
        path = tmp_path / "pi.txt"
        path.write_text("# basis=dirichlet-sine modes=2 t0=0 dt=1 count=2 reconstruction=piecewise-linear "
                        "L=3.141592653589793\n0 1 0\n1 0 1\n", encoding='utf-8')
        assert read_signal(str(path)).basis.mode_count == 2

    def test_sine_header_with_other_length(self, tmp_path):
        path = tmp_path / "wide.txt"
        path.write_text("# basis=dirichlet-sine modes=1 t0=0 dt=1 count=1 reconstruction=piecewise-linear L=8\n"
                        "0 1\n", encoding='utf-8')
        with pytest.raises(InvalidSignal) as exc_info:
            read_signal(str(path))
        assert exc_info.value.reason == "header"

    def test_line_header_needs_length(self, tmp_path):
        path = tmp_path / "line.txt"
        path.write_text("# basis=truncated-line modes=3 t0=0 dt=1 count=1 reconstruction=piecewise-linear\n"
                        "0 0 1 0\n", encoding='utf-8')
        with pytest.raises(InvalidSignal, match="needs L") as exc_info:
            read_signal(str(path))
        assert exc_info.value.reason == "header"

    def test_read_back_is_exact(self, noisy_signal, tmp_path):
        path = tmp_path / "signal.csv"
        write_signal(noisy_signal, str(path))
        loaded = read_signal(str(path))

        np.testing.assert_array_equal(loaded.coeffs, noisy_signal.coeffs)
        assert loaded.grid.dt == noisy_signal.grid.dt
        assert loaded.grid.t0 == noisy_signal.grid.t0
        assert loaded.reconstruction is Reconstruction.PIECEWISE_LINEAR
        assert loaded.exact is None

    def test_line_grid_header_carries_half_length(self, tmp_path):
        basis = BasisDescriptor.line(8.0, 5)
        signal = SpectralSignal(TimeGrid(0.0, 0.25, 3), basis, np.zeros((3, 5)))
        path = tmp_path / "nested" / "line.csv"
        write_signal(signal, str(path))

        assert path.read_text(encoding='utf-8').splitlines()[0].endswith('L=8')
        loaded = read_signal(str(path))
        assert loaded.basis.is_line
        assert loaded.basis.half_length == 8.0

    def test_wave_state_keeps_components(self, tmp_path):
        state = SpectralSignal(TimeGrid(0.0, 0.5, 4), BasisDescriptor.sine(2), np.ones((4, 4)), components=2)
        path = tmp_path / "state.csv"
        write_signal(state, str(path))
        assert path.read_text(encoding='utf-8').splitlines()[0].endswith('components=2')
        assert read_signal(str(path)).components == 2

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bare.csv"
        path.write_text("0,1,2\n", encoding='utf-8')
        with pytest.raises(InvalidSignal) as exc_info:
            read_signal(str(path))
        assert exc_info.value.reason == "header"

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidSignal) as exc_info:
            read_signal(str(tmp_path / "absent.csv"))
        assert exc_info.value.reason == "io"

    def test_row_count_must_match_header(self, noisy_signal, tmp_path):
        path = tmp_path / "short.csv"
        write_signal(noisy_signal, str(path))
        lines = path.read_text(encoding='utf-8').splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n", encoding='utf-8')
        with pytest.raises(InvalidSignal) as exc_info:
            read_signal(str(path))
        assert exc_info.value.reason == "shape"

    def test_times_must_match_header(self, noisy_signal, tmp_path):
        path = tmp_path / "shifted.csv"
        write_signal(noisy_signal, str(path))
        text = path.read_text(encoding='utf-8').replace('t0=0.5', 't0=0.75', 1)
        path.write_text(text, encoding='utf-8')
        with pytest.raises(InvalidSignal) as exc_info:
            read_signal(str(path))
        assert exc_info.value.reason == "times"

    def test_unparseable_value(self, noisy_signal, tmp_path):
        path = tmp_path / "garbled.csv"
        write_signal(noisy_signal, str(path))
        text = path.read_text(encoding='utf-8').replace('modes=3', 'modes=three', 1)
        path.write_text(text, encoding='utf-8')
        with pytest.raises(InvalidSignal) as exc_info:
            read_signal(str(path))
        assert exc_info.value.reason == "parse"


class TestReportFiles:
    """Test cases for curve, ledger and JSON reports."""

    def test_curves_are_long_format(self, tmp_path):
        curve = ModulusCurve(np.array([0.5, 1.0]), np.array([0.25, 1.0]), ModulusKind.CONTINUITY)
        path = tmp_path / "curves.csv"
        write_curves(str(path), {'g': curve})

        rows = _read_csv(path)
        assert rows[0] == ['curve', 'kind', 'tau', 'value']
        assert rows[1] == ['g', 'continuity', '0.5', '0.25']
        assert len(rows) == 3

    def test_single_curve_file(self, tmp_path):
        curve = ModulusCurve(np.array([0.0, 2.0]), np.array([1.5, 0.25]), ModulusKind.TAIL)
        path = tmp_path / "tail.csv"
        write_curve(str(path), curve)
        assert _read_csv(path) == [['tau', 'value'], ['0', '1.5'], ['2', '0.25']]

    def test_entropy_file_lists_coarse_balls_first(self, tmp_path):
        path = tmp_path / "entropy.csv"
        write_entropy(str(path), {0.25: 7, 1.0: 1, 0.5: 3})
        assert _read_csv(path) == [['eps', 'count'], ['1', '1'], ['0.5', '3'], ['0.25', '7']]

    def test_ledger_first_row_has_no_residual(self, tmp_path):
        ledger = EnergyLedger(np.array([0.0, 0.5, 1.0]), np.array([2.0, 1.5, 1.0]),
                              np.array([1e-3, -2e-3]), IdentityKind.HEAT_L2)
        path = tmp_path / "ledger.csv"
        write_ledger(str(path), ledger)

        rows = _read_csv(path)
        assert rows[0] == ['t', 'energy', 'residual']
        assert rows[1] == ['0', '2', '0']
        assert float(rows[3][2]) == -2e-3

    def test_json_is_sorted_and_survives_infinity(self, tmp_path):
        path = tmp_path / "report.json"
        write_json(str(path), {'b': float('inf'), 'a': [np.float64(0.5), (1, 2)], 'c': {3: 'x'}})

        text = path.read_text(encoding='utf-8')
        data = json.loads(text)
        assert data == {'a': [0.5, [1, 2]], 'b': 'inf', 'c': {'3': 'x'}}
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')

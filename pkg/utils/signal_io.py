"""
Plain-text readers and writers for signals, curves, ledgers and reports.

Signal files start with one comment line of ``key=value`` pairs describing the
grid and basis, followed by whitespace-separated rows ``t c_1 ... c_d``. The
keys ``components`` (default 1) and ``L`` (line grids only) are optional.
Every float is written with 17 significant digits so a read-back is exact.
"""

import csv
import json
import math
import os
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import numpy as np

from config.constants import BasisKind, Reconstruction
from lab.signal import BasisDescriptor, ModulusCurve, SpectralSignal, TimeGrid
from utils.error_handler import InvalidSignal, LabError
from utils.logger import debug

FLOAT_FORMAT = '%.17g'
_HEADER_KEYS = ('basis', 'modes', 't0', 'dt', 'count', 'reconstruction')


def format_float(value: float) -> str:
    return FLOAT_FORMAT % value


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def signal_header(signal: SpectralSignal) -> str:
    basis = signal.basis
    fields = [
        ('basis', basis.kind.value),
        ('modes', str(basis.mode_count)),
        ('t0', format_float(signal.grid.t0)),
        ('dt', format_float(signal.grid.dt)),
        ('count', str(signal.grid.count)),
        ('reconstruction', signal.reconstruction.value),
    ]
    if signal.components != 1:
        fields.append(('components', str(signal.components)))
    if basis.is_line:
        fields.append(('L', format_float(basis.half_length)))
    return '# ' + ' '.join(f"{key}={value}" for key, value in fields)


def write_signal(signal: SpectralSignal, path: str) -> None:
    """Write ``signal`` as header line plus one row per sample."""
    _ensure_parent(path)
    times = signal.times()
    with open(path, 'w', encoding='utf-8') as f:
        f.write(signal_header(signal) + '\n')
        for t, row in zip(times, signal.coeffs):
            f.write(' '.join([format_float(t)] + [format_float(c) for c in row]) + '\n')
    debug(f"wrote {signal.grid.count} samples to {path}")


def _parse_header(line: str, path: str) -> Dict[str, str]:
    if not line.startswith('#'):
        raise InvalidSignal(f"{path}: missing '# basis=...' header line", reason="header")
    fields: Dict[str, str] = {}
    for token in line[1:].split():
        key, sep, value = token.partition('=')
        if not sep:
            raise InvalidSignal(f"{path}: malformed header token '{token}'", reason="header")
        fields[key] = value
    missing = [key for key in _HEADER_KEYS if key not in fields]
    if missing:
        raise InvalidSignal(f"{path}: header lacks {', '.join(missing)}", reason="header")
    return fields


def _parse_basis(fields: Mapping[str, str], path: str) -> BasisDescriptor:
    kind = BasisKind(fields['basis'])
    modes = int(fields['modes'])
    if kind is BasisKind.DIRICHLET_SINE:
        L = fields.get('L', '')
        if L and not math.isclose(float(L), math.pi):
            raise InvalidSignal(f"{path}: the sine basis lives on (-pi, pi), got L={L}", reason="header")
        return BasisDescriptor.sine(modes)
    if not fields.get('L'):
        raise InvalidSignal(f"{path}: a {kind.value} header needs L", reason="header")
    return BasisDescriptor.line(float(fields['L']), modes)


def read_signal(path: str) -> SpectralSignal:
    """Inverse of ``write_signal``; the closed-form evaluator is not restored."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            fields = _parse_header(f.readline().strip(), path)
            rows = [line.replace(',', ' ').split() for line in f]
    except OSError as e:
        raise InvalidSignal(f"cannot read signal file {path}: {e}", reason="io", original_error=e)
    rows = [row for row in rows if row]

    try:
        basis = _parse_basis(fields, path)
        grid = TimeGrid(float(fields['t0']), float(fields['dt']), int(fields['count']))
        reconstruction = Reconstruction(fields['reconstruction'])
        components = int(fields.get('components', 1))
        data = np.array(rows, dtype=float)
    except InvalidSignal:
        raise
    except (ValueError, LabError) as e:
        raise InvalidSignal(f"{path}: {e}", reason="parse", original_error=e)

    if data.ndim != 2 or data.shape[0] != grid.count:
        raise InvalidSignal(f"{path}: expected {grid.count} rows, found {len(rows)}", reason="shape")
    slack = 1e-9 * max(1.0, abs(grid.t_end))
    if np.max(np.abs(data[:, 0] - grid.times())) > slack:
        raise InvalidSignal(f"{path}: sample times disagree with the header grid", reason="times")
    return SpectralSignal(grid, basis, data[:, 1:], reconstruction, components)


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """CSV with a header; floats in ``FLOAT_FORMAT``."""
    _ensure_parent(path)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])


def write_curves(path: str, curves: Mapping[str, ModulusCurve]) -> None:
    """Long-format curve table ``curve,kind,tau,value``."""
    rows: List[Sequence[Any]] = []
    for name, curve in curves.items():
        for tau, value in curve.as_pairs():
            rows.append((name, curve.kind.value, float(tau), float(value)))
    write_rows(path, ('curve', 'kind', 'tau', 'value'), rows)


def write_curve(path: str, curve: ModulusCurve, argument: str = 'tau') -> None:
    """Single curve as ``tau,value`` rows."""
    write_rows(path, (argument, 'value'), ((float(tau), float(value)) for tau, value in curve.as_pairs()))


def write_entropy(path: str, counts: Mapping[float, int]) -> None:
    """Covering counts as ``eps,count`` rows, coarsest ball first."""
    write_rows(path, ('eps', 'count'), ((float(eps), int(counts[eps])) for eps in sorted(counts, reverse=True)))


def write_ledger(path: str, ledger) -> None:
    write_rows(path, ('t', 'energy', 'residual'),
               ((float(t), float(e), float(r)) for t, e, r in ledger.rows()))


def _json_ready(value: Any) -> Any:
    if isinstance(value, float):
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.generic):
        return _json_ready(value.item())
    return value


def write_json(path: str, data: Mapping[str, Any]) -> None:
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_json_ready(dict(data)), f, indent=2, sort_keys=True)
        f.write('\n')

"""CSV and JSON artifacts: lattice samples, attractor points, tables, reports."""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .domain_grid import SampledFunction
from .errors import ConfigIoError, SchemaError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def _columns(n):
    return [f'x{k + 1}' for k in range(n)] + ['value']


def _write_csv(frame, path):
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    except OSError as exc:
        raise ConfigIoError(f'cannot write {path}: {exc}', path=str(path)) from exc
    logger.info(f'Wrote {len(frame)} rows to {path}')


def export_samples(samples, path):
    """Write lattice samples (row-major) or (points, values) attractor pairs.

    Columns are x1..xn,value with 17 significant digits.
    """
    if isinstance(samples, SampledFunction):
        points, values = samples.lattice_points(), samples.values.ravel()
    else:
        points, values = samples
        points = np.asarray(points, dtype=float)
        values = np.asarray(values, dtype=float).ravel()
    frame = pd.DataFrame(points, columns=_columns(points.shape[1])[:-1])
    frame['value'] = values
    _write_csv(frame, path)
    return path


def export_table(table, path):
    _write_csv(table, path)
    return path


def load_samples(path, grid, field_path='csv'):
    """Re-ingest exported lattice samples of ``grid`` as a SampledFunction"""
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ConfigIoError(f'cannot read samples from {path}: {exc}', path=str(path)) from exc

    expected = _columns(grid.n)
    if list(frame.columns) != expected:
        raise SchemaError(f'expected columns {expected}, found {list(frame.columns)}', field_path)

    steps = frame['x1'].nunique() - 1
    refinement, remainder = divmod(steps, grid.axes[0].N)
    if refinement < 1 or remainder:
        raise SchemaError(f'{steps + 1} distinct x1 values do not form a lattice of the grid', field_path)

    lattice = grid.lattice_points(refinement)
    points = frame[expected[:-1]].to_numpy(dtype=float)
    if points.shape != lattice.shape or not np.allclose(points, lattice, rtol=0.0, atol=1e-12):
        raise SchemaError(f'samples are not the row-major lattice of refinement {refinement}', field_path)
    return SampledFunction(grid, refinement, frame['value'].to_numpy(dtype=float), label=str(path))


def _json_default(value):
    if hasattr(value, 'tolist'):
        return value.tolist()
    return str(value)


def write_json(payload, path):
    try:
        Path(path).write_text(json.dumps(payload, indent=2, default=_json_default) + '\n')
    except OSError as exc:
        raise ConfigIoError(f'cannot write {path}: {exc}', path=str(path)) from exc
    logger.info(f'Wrote {path}')
    return path

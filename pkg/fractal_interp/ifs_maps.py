"""Affine cell maps u_{k,i} and their products over cell multi-indices.

u_{k,i} maps the whole axis [a_k, b_k] onto cell I_{k,i}. Odd cells keep the
orientation, even cells flip it, so neighbouring cells share the preimage of
their common knot.
"""
import logging

import numpy as np

from .errors import OutOfDomain, SharedPointViolation
from .utils import solver_setting

logger = logging.getLogger(__name__)


class AffineCellMap:
    """u(x) = slope * x + offset, sending [a, b] onto one cell of an axis"""

    def __init__(self, axis, cell, slope, offset, domain, image):
        self.axis = axis
        self.cell = cell
        self.slope = float(slope)
        self.offset = float(offset)
        self.domain = (float(domain[0]), float(domain[1]))
        self.image = (float(image[0]), float(image[1]))

    @property
    def cell_contraction(self):
        # called alpha_{k,i} in the construction; unrelated to the scaling function
        return abs(self.slope)

    @property
    def parity(self):
        return 'odd' if self.cell % 2 == 1 else 'even'

    def forward(self, x):
        return self.slope * x + self.offset

    def inverse(self, x):
        return (x - self.offset) / self.slope

    def __repr__(self):
        return (
            f'AffineCellMap(axis={self.axis}, cell={self.cell}, '
            f'slope={self.slope!r}, offset={self.offset!r})'
        )


def build_axis_maps(P, axis=0):
    """The N maps of one axis, slopes and offsets in closed form"""
    a, b = P.a, P.b
    width = b - a
    maps = []
    for i in range(1, P.N + 1):
        lo, hi = P.cell_bounds(i)
        if i % 2 == 1:
            # u(a) = x_{i-1}, u(b) = x_i
            slope = (hi - lo) / width
            offset = lo - slope * a
        else:
            # u(a) = x_i, u(b) = x_{i-1}
            slope = -(hi - lo) / width
            offset = hi - slope * a
        maps.append(AffineCellMap(axis, i, slope, offset, (a, b), (lo, hi)))
    return maps


def apply_map(M, x, direction='forward', tol=None):
    """Forward (axis -> cell) or inverse (cell -> axis) application of M"""
    tol = solver_setting('FIF_DOMAIN_TOL', tol)
    scalar = np.ndim(x) == 0
    values = np.asarray(x, dtype=float)
    if direction == 'forward':
        lo, hi = M.domain
    elif direction == 'inverse':
        lo, hi = M.image
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")

    outside = (values < lo - tol) | (values > hi + tol)
    if np.any(outside):
        witness = float(values[outside].flat[0]) if values.ndim else float(values)
        raise OutOfDomain(
            f'{direction} map of axis {M.axis} cell {M.cell} is defined on '
            f'[{lo}, {hi}], got {witness}',
            axis=M.axis,
            cell=M.cell,
            point=witness,
        )

    result = M.forward(values) if direction == 'forward' else M.inverse(values)
    return float(result) if scalar else result


def verify_shared_point(P, maps, tol=None):
    """Check that neighbouring inverses agree at every interior knot.

    Returns a report listing the common point x_k^* per knot, which always
    lands on an endpoint of the axis.
    """
    tol = solver_setting('FIF_DOMAIN_TOL', tol)
    checks = []
    for i in range(1, P.N):
        knot = float(P.knots[i])
        left = maps[i - 1].inverse(knot)
        right = maps[i].inverse(knot)
        difference = abs(left - right)
        if difference > tol:
            raise SharedPointViolation(
                f'Eq. (2.3) fails at knot {i} = {knot}: inverses give {left} and {right}',
                axis=maps[i - 1].axis,
                knot_index=i,
                difference=difference,
            )
        checks.append({
            'knot_index': i,
            'knot': knot,
            'shared_point': left,
            'difference': difference,
        })
    return {'status': 'pass', 'checks': checks}


class ProductCellMap:
    """u_{i_1...i_n}: one AffineCellMap per axis, applied component-wise"""

    def __init__(self, cell, axis_maps):
        self.cell = tuple(cell)
        self.axis_maps = tuple(axis_maps)
        self.slopes = np.array([m.slope for m in self.axis_maps])
        self.offsets = np.array([m.offset for m in self.axis_maps])

    @property
    def contraction(self):
        return float(np.max(np.abs(self.slopes)))

    def forward(self, X):
        """(P, n) domain points -> points of the cell"""
        return np.asarray(X, dtype=float) * self.slopes + self.offsets

    def inverse(self, X):
        """(P, n) cell points -> domain points"""
        return (np.asarray(X, dtype=float) - self.offsets) / self.slopes

    def __repr__(self):
        return f'ProductCellMap(cell={self.cell})'


def build_cell_maps(grid):
    """Map every cell multi-index of the grid to its ProductCellMap"""
    per_axis = [build_axis_maps(axis, k) for k, axis in enumerate(grid.axes)]
    return {
        cell: ProductCellMap(cell, [per_axis[k][i - 1] for k, i in enumerate(cell)])
        for cell in grid.cells()
    }

"""Hyperrectangular domains, axis partitions and sampled functions.

Knots and cells follow the construction's numbering: axis k has knots
x_{k,0} < x_{k,1} < ... < x_{k,N_k}, and cell i (1-based) is the interval
[x_{k,i-1}, x_{k,i}]. Node multi-indices run over prod {0..N_k}, cell
multi-indices over prod {1..N_k}.

A continuous function is represented on a refinement lattice: every cell is
split into ``m`` equal steps per axis, so every knot is a lattice point, and
values between lattice points come from multilinear interpolation. All sup
norms computed here are lattice sup norms, i.e. lower bounds of the true ones.
"""
import itertools
import logging
import math

import numpy as np

from .errors import (
    IndexOutOfRange,
    LatticeMismatch,
    NonFiniteKnot,
    NonFiniteValue,
    NonMonotonicKnots,
    PointOutsideDomain,
    TooFewKnots,
)
from .utils import solver_setting

logger = logging.getLogger(__name__)


class AxisPartition:
    """Strictly increasing knots of one axis (use build_axis_partition)"""

    def __init__(self, knots):
        self.knots = np.array(knots, dtype=float)
        self.knots.setflags(write=False)

    @property
    def N(self):
        return self.knots.size - 1

    @property
    def a(self):
        return float(self.knots[0])

    @property
    def b(self):
        return float(self.knots[-1])

    @property
    def width(self):
        return self.b - self.a

    @property
    def interior_knots(self):
        return self.knots[1:-1]

    def cell_bounds(self, i):
        """Interval I_{k,i} of cell i"""
        if not 1 <= i <= self.N:
            raise IndexOutOfRange(f'cell index {i} outside 1..{self.N}', index=i)
        return float(self.knots[i - 1]), float(self.knots[i])

    def lattice(self, refinement):
        """Lattice coordinates: every cell split into ``refinement`` equal steps"""
        pieces = [
            np.linspace(self.knots[i], self.knots[i + 1], refinement + 1)[:-1]
            for i in range(self.N)
        ]
        pieces.append(self.knots[-1:])
        return np.concatenate(pieces)

    def __eq__(self, other):
        return isinstance(other, AxisPartition) and np.array_equal(self.knots, other.knots)

    def __hash__(self):
        return hash(tuple(self.knots.tolist()))

    def __repr__(self):
        return f'AxisPartition(N={self.N}, a={self.a}, b={self.b})'


def build_axis_partition(knots):
    """Validate knots and build an AxisPartition"""
    try:
        values = [float(k) for k in knots]
    except (TypeError, ValueError) as exc:
        raise NonFiniteKnot(f'knots must be real numbers: {exc}') from exc

    for position, value in enumerate(values):
        if not math.isfinite(value):
            raise NonFiniteKnot(f'knot {position} is not finite', position=position)

    if len(values) < 3:
        # N_k = 1 makes the single cell map the identity, not a contraction
        raise TooFewKnots(
            f'an axis needs at least 3 knots (2 cells), got {len(values)}',
            count=len(values),
        )

    for position in range(1, len(values)):
        if values[position] <= values[position - 1]:
            raise NonMonotonicKnots(
                f'knots must be strictly increasing (knot {position - 1} = '
                f'{values[position - 1]}, knot {position} = {values[position]})',
                position=position,
            )
    return AxisPartition(values)


class GridPartition:
    """Product of axis partitions: the knot set Delta of the hyperrectangle"""

    def __init__(self, axes):
        if not axes:
            raise TooFewKnots('a grid needs at least one axis')
        self.axes = tuple(axes)

    @property
    def n(self):
        return len(self.axes)

    @property
    def node_shape(self):
        return tuple(axis.N + 1 for axis in self.axes)

    @property
    def cell_shape(self):
        return tuple(axis.N for axis in self.axes)

    @property
    def lower(self):
        return np.array([axis.a for axis in self.axes])

    @property
    def upper(self):
        return np.array([axis.b for axis in self.axes])

    # index sets
    def sigma(self, k):
        return range(1, self.axes[k].N + 1)

    def sigma0(self, k):
        return range(0, self.axes[k].N + 1)

    def boundary_sigma0(self, k):
        return (0, self.axes[k].N)

    def interior_sigma0(self, k):
        return range(1, self.axes[k].N)

    def cells(self):
        """Cell multi-indices in lexicographic order"""
        return itertools.product(*(self.sigma(k) for k in range(self.n)))

    def nodes(self):
        return itertools.product(*(self.sigma0(k) for k in range(self.n)))

    def corners(self):
        """The 2^n corner node multi-indices"""
        return itertools.product(*(self.boundary_sigma0(k) for k in range(self.n)))

    def node_point(self, index):
        return np.array([axis.knots[j] for axis, j in zip(self.axes, index)])

    def node_points(self):
        """All nodes as a (P, n) array, row-major"""
        return tensor_points([axis.knots for axis in self.axes])

    def corner_points(self):
        return np.array([self.node_point(index) for index in self.corners()])

    def cell_bounds(self, cell):
        bounds = [axis.cell_bounds(i) for axis, i in zip(self.axes, cell)]
        return np.array([lo for lo, _ in bounds]), np.array([hi for _, hi in bounds])

    def lattice_shape(self, refinement):
        return tuple(axis.N * refinement + 1 for axis in self.axes)

    def lattice_coordinates(self, refinement):
        return [axis.lattice(refinement) for axis in self.axes]

    def lattice_points(self, refinement):
        return tensor_points(self.lattice_coordinates(refinement))

    def check_points(self, points, tol=None):
        """Return points as a (P, n) array clipped into the domain"""
        tol = solver_setting('FIF_DOMAIN_TOL', tol)
        points = as_points(points, self.n)
        outside = (points < self.lower - tol) | (points > self.upper + tol)
        if outside.any():
            witness = points[np.argmax(outside.any(axis=1))]
            raise PointOutsideDomain(
                f'point {witness.tolist()} lies outside the domain '
                f'{list(zip(self.lower.tolist(), self.upper.tolist()))}',
                point=witness,
            )
        return np.clip(points, self.lower, self.upper)

    def describe(self):
        return {'axes': [axis.knots.tolist() for axis in self.axes]}

    def __eq__(self, other):
        return isinstance(other, GridPartition) and self.axes == other.axes

    def __hash__(self):
        return hash(self.axes)

    def __repr__(self):
        return f'GridPartition(cells={self.cell_shape})'


def build_grid(knot_lists):
    """Build a GridPartition from one knot list per axis"""
    return GridPartition([build_axis_partition(knots) for knots in knot_lists])


def tau(i, j, N):
    """Node index reached by corner j of cell i (parity rule of the cell maps)"""
    if not 1 <= i <= N:
        raise IndexOutOfRange(f'cell index {i} outside 1..{N}', index=i)
    if j not in (0, N):
        raise IndexOutOfRange(f'corner index {j} must be 0 or {N}', index=j)
    if i % 2 == 1:
        return i - 1 if j == 0 else i
    return i if j == 0 else i - 1


def as_points(points, n):
    """Coerce a point or a batch of points to a float (P, n) array"""
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if points.ndim == 1:
        points = points.reshape(1, -1) if n > 1 or points.size == 1 else points.reshape(-1, 1)
    if points.ndim != 2 or points.shape[1] != n:
        raise PointOutsideDomain(f'expected points with {n} coordinates, got shape {points.shape}')
    return points


def evaluate_points(func, points):
    """Evaluate a vectorised function on (P, n) points, returning (P,) floats"""
    values = np.asarray(func(points), dtype=float)
    values = np.broadcast_to(values, (points.shape[0],)).astype(float)
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue('function produced non-finite values on the domain')
    return values


def locate_cell(grid, X, tol=None):
    """Cell containing X (interior knots go to the lower cell) and on-knot flags"""
    point = grid.check_points(X, tol)
    if point.shape[0] != 1:
        raise PointOutsideDomain('locate_cell takes a single point')
    point = point[0]
    cell = []
    flags = []
    for axis, x in zip(grid.axes, point):
        idx = int(np.searchsorted(axis.knots, x, side='left'))
        cell.append(min(max(idx, 1), axis.N))
        flags.append(bool(np.any(axis.interior_knots == x)))
    return tuple(cell), tuple(flags)


def locate_cells(grid, points):
    """Vectorised locate_cell for (P, n) in-domain points; returns (P, n) ints"""
    cells = np.empty(points.shape, dtype=int)
    for k, axis in enumerate(grid.axes):
        idx = np.searchsorted(axis.knots, points[:, k], side='left')
        cells[:, k] = np.clip(idx, 1, axis.N)
    return cells


def tensor_points(coord_vectors):
    mesh = np.meshgrid(*coord_vectors, indexing='ij')
    return np.stack([axis.ravel() for axis in mesh], axis=1)


def _bracket(coords, x):
    # lower lattice index and fractional position of x in its lattice cell
    idx = np.searchsorted(coords, x, side='right') - 1
    idx = np.clip(idx, 0, coords.size - 2)
    t = (x - coords[idx]) / (coords[idx + 1] - coords[idx])
    return idx, np.clip(t, 0.0, 1.0)


def _multilinear_blend(values, indices, fractions):
    # sum over the 2^n surrounding lattice values
    result = np.zeros(indices[0].shape)
    for bits in itertools.product((0, 1), repeat=len(indices)):
        weight = np.ones(indices[0].shape)
        for bit, t in zip(bits, fractions):
            weight = weight * (t if bit else 1.0 - t)
        corner = tuple(idx + bit for idx, bit in zip(indices, bits))
        result = result + weight * values[corner]
    return result


class DataTensor:
    """One value y_{i_1...i_n} per grid node"""

    def __init__(self, grid, values):
        values = np.array(values, dtype=float)
        expected = int(np.prod(grid.node_shape))
        if values.size != expected:
            raise LatticeMismatch(
                f'data tensor has {values.size} values, grid has {expected} nodes',
                expected=expected,
                actual=values.size,
            )
        values = values.reshape(grid.node_shape)
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue('data tensor contains non-finite values')
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, evaluate_points(func, grid.node_points()))

    def __getitem__(self, index):
        return float(self.values[tuple(index)])


class SampledFunction:
    """A continuous function stored on the refinement lattice of a grid"""

    def __init__(self, grid, refinement, values, label=None):
        refinement = int(refinement)
        if refinement < 1:
            raise LatticeMismatch(f'refinement must be >= 1, got {refinement}')
        shape = grid.lattice_shape(refinement)
        values = np.array(values, dtype=float)
        if values.size != int(np.prod(shape)):
            raise LatticeMismatch(
                f'{values.size} values do not fit lattice {shape}',
                shape=shape,
            )
        values = values.reshape(shape)
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue('sampled function contains non-finite values')
        values.setflags(write=False)
        self.grid = grid
        self.refinement = refinement
        self.values = values
        self.label = label
        self._coordinates = None

    @classmethod
    def from_function(cls, grid, refinement, func, label=None):
        """Sample a vectorised function on the lattice"""
        values = evaluate_points(func, grid.lattice_points(refinement))
        return cls(grid, refinement, values, label=label or getattr(func, 'label', None))

    @classmethod
    def from_data(cls, data, refinement):
        """Multilinear interpolant of a data tensor, sampled on the lattice"""
        coarse = cls(data.grid, 1, data.values)
        values = coarse.evaluate_tensor(data.grid.lattice_coordinates(refinement))
        return cls(data.grid, refinement, values, label='data interpolant')

    @property
    def coordinates(self):
        if self._coordinates is None:
            self._coordinates = self.grid.lattice_coordinates(self.refinement)
        return self._coordinates

    def lattice_points(self):
        return tensor_points(self.coordinates)

    def __call__(self, points):
        return multilinear_eval(self, points)

    def evaluate_tensor(self, coord_vectors):
        """Multilinear values on the tensor product of per-axis coordinates.

        Equivalent to multilinear_eval on every product point, done one axis at
        a time. Coordinates must already lie in the domain.
        """
        result = self.values
        for axis, (coords, x) in enumerate(zip(self.coordinates, coord_vectors)):
            idx, t = _bracket(coords, np.asarray(x, dtype=float))
            shape = [1] * result.ndim
            shape[axis] = -1
            t = t.reshape(shape)
            result = np.take(result, idx, axis=axis) * (1.0 - t) + np.take(result, idx + 1, axis=axis) * t
        return result

    def node_values(self):
        step = slice(None, None, self.refinement)
        return np.array(self.values[(step,) * self.grid.n])

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def same_lattice(self, other):
        return (
            isinstance(other, SampledFunction)
            and self.refinement == other.refinement
            and self.grid == other.grid
        )

    def with_values(self, values, label=None):
        return SampledFunction(self.grid, self.refinement, values, label=label)

    def _combine(self, other, operation):
        if isinstance(other, SampledFunction):
            _check_lattice(self, other)
            return self.with_values(operation(self.values, other.values))
        return self.with_values(operation(self.values, float(other)))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return self._combine(other, lambda mine, theirs: theirs - mine)

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self):
        return f'SampledFunction(lattice={self.values.shape}, refinement={self.refinement})'


def _check_lattice(S1, S2):
    if not S1.same_lattice(S2):
        raise LatticeMismatch(
            'sampled functions live on different lattices '
            f'({S1.values.shape}, m={S1.refinement} vs {S2.values.shape}, m={S2.refinement})'
        )


def multilinear_eval(S, X):
    """Multilinear interpolation of S at a point (float) or points ((P,) array)"""
    single = np.ndim(X) <= 1 and np.size(X) == S.grid.n
    points = S.grid.check_points(X)
    indices = []
    fractions = []
    for k, coords in enumerate(S.coordinates):
        idx, t = _bracket(coords, points[:, k])
        indices.append(idx)
        fractions.append(t)
    result = _multilinear_blend(S.values, indices, fractions)
    return float(result[0]) if single else result


def sup_distance(S1, S2):
    """Lattice sup distance; a lower bound of the true uniform distance"""
    _check_lattice(S1, S2)
    return float(np.max(np.abs(S1.values - S2.values)))


def corner_interpolant(grid, corner_values):
    """Vectorised multilinear interpolant of the 2^n domain corner values.

    ``corner_values`` is indexed like grid.corners(): a (2,)*n array or a flat
    list in that order.
    """
    table = np.array(corner_values, dtype=float).reshape((2,) * grid.n)
    lower = grid.lower
    width = grid.upper - grid.lower

    def interpolant(points):
        points = as_points(points, grid.n)
        fractions = [np.clip((points[:, k] - lower[k]) / width[k], 0.0, 1.0) for k in range(grid.n)]
        indices = [np.zeros(points.shape[0], dtype=int)] * grid.n
        return _multilinear_blend(table, indices, fractions)

    return interpolant

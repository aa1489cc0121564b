"""Read-Bajraktarevic machinery for general vertical maps.

A FifSystem pairs every cell with its product cell map u and a vertical map
F(X, y). The RB operator sends g to (Tg)(Z) = F(u^{-1}(Z), g(u^{-1}(Z))) on the
cell containing Z; its unique fixed point is the fractal interpolation
function of the data, and its graph is the attractor of the maps
W(X, y) = (u(X), F(X, y)).

Everything runs on the refinement lattice: the preimage of a cell's lattice
block is the uniform pullback grid linspace(a_k, b_k, m + 1) of every axis
(reversed on even cells), so one tensor evaluation of g serves all cells.
"""
import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .domain_grid import SampledFunction, as_points, locate_cells, tau, tensor_points
from .errors import (
    ConstraintsUnverified,
    ContractionViolation,
    DataConstraintViolation,
    DepthTooLarge,
    InvalidParameter,
    LatticeMismatch,
    MatchingViolation,
    NotConverged,
    WellDefinednessViolation,
)
from .ifs_maps import build_axis_maps, build_cell_maps, verify_shared_point
from .utils import RateEstimator, solver_setting

logger = logging.getLogger(__name__)

Y_CONTRACTION_SAMPLES = 200


class VerticalMap:
    """F_{i_1...i_n}(X, y) on one cell with a declared y-contraction gamma.

    ``evaluator(points, y)`` takes (P, n) domain points and (P,) ordinates.
    """

    def __init__(self, cell, evaluator, gamma, label=None):
        gamma = float(gamma)
        if not 0.0 <= gamma < 1.0:
            raise ContractionViolation(
                f'Eq. (2.6) needs 0 <= gamma < 1, cell {tuple(cell)} declares {gamma}',
                cell=tuple(cell),
                gamma=gamma,
            )
        self.cell = tuple(cell)
        self.evaluator = evaluator
        self.gamma = gamma
        self.label = label

    def __call__(self, points, y):
        points = np.asarray(points, dtype=float)
        y = np.broadcast_to(np.asarray(y, dtype=float), (points.shape[0],))
        return np.broadcast_to(np.asarray(self.evaluator(points, y), dtype=float), y.shape)

    def prepare(self, plan):
        """Return block(y) computing F on this cell's pullback points.

        ``y`` holds g on the pullback grid, already in the cell's lattice order.
        """
        points = plan.pullback_points(self.cell)
        shape = plan.block_shape

        def block(y):
            return self(points, y.ravel()).reshape(shape)

        return block

    def __repr__(self):
        return f'VerticalMap(cell={self.cell}, gamma={self.gamma})'


class PullbackPlan:
    """Lattice block of every cell and the preimage grid u^{-1} sends it to"""

    def __init__(self, grid, refinement):
        m = int(refinement)
        self.grid = grid
        self.refinement = m
        self.domain_coords = [np.linspace(axis.a, axis.b, m + 1) for axis in grid.axes]
        self.lattice_coords = grid.lattice_coordinates(m)
        self.block_shape = (m + 1,) * grid.n
        self.slices = {}
        self.flips = {}
        for cell in grid.cells():
            self.slices[cell] = tuple(slice((i - 1) * m, i * m + 1) for i in cell)
            self.flips[cell] = tuple(k for k, i in enumerate(cell) if i % 2 == 0)
        self.evaluators = {}

    def orient(self, cell, values):
        """Reorder values on the pullback grid into the cell's lattice order"""
        flips = self.flips[cell]
        return np.flip(values, axis=flips) if flips else values

    def pullback_points(self, cell):
        flips = self.flips[cell]
        coords = [c[::-1] if k in flips else c for k, c in enumerate(self.domain_coords)]
        return tensor_points(coords)

    def lattice_points(self, cell):
        return tensor_points([c[s] for c, s in zip(self.lattice_coords, self.slices[cell])])

    def node_slices(self):
        return (slice(None, None, self.refinement),) * self.grid.n


class FifSystem:
    """The IFS W(X, y) = (u(X), F(X, y)), one map per cell"""

    def __init__(self, grid, data, vertical_maps, label=None, refinement=None):
        if data.grid != grid:
            raise LatticeMismatch('data tensor belongs to a different grid')
        maps = dict(vertical_maps) if isinstance(vertical_maps, dict) else {
            vm.cell: vm for vm in vertical_maps
        }
        missing = [cell for cell in grid.cells() if cell not in maps]
        if missing:
            raise InvalidParameter(f'no vertical map for cells {missing[:3]}', cells=missing)
        self.grid = grid
        self.data = data
        self.vertical_maps = maps
        self.cell_maps = build_cell_maps(grid)
        self.gamma_max = max(vm.gamma for vm in maps.values())
        self.label = label
        # lattice on which cell gammas were estimated, when they were
        self.refinement = refinement
        self.verified = False
        self.verification = None
        self._plans = {}
        self._lock = threading.Lock()

    def plan(self, refinement):
        with self._lock:
            if refinement not in self._plans:
                self._plans[refinement] = build_pullback_plan(self, refinement)
            return self._plans[refinement]

    def apply_w(self, cell, points, y):
        """W_{cell}(X, y) = (u(X), F(X, y))"""
        return self.cell_maps[cell].forward(points), self.vertical_maps[cell](points, y)

    def __repr__(self):
        return f'FifSystem(cells={self.grid.cell_shape}, gamma_max={self.gamma_max})'


class SolveDiagnostics:
    """Iteration record of solve_fif with its Banach a-posteriori bound"""

    def __init__(self, iterations, final_change, contraction_estimate, history,
                 refinement, pin_correction, converged=True):
        self.iterations = iterations
        self.final_change = float(final_change)
        self.contraction_estimate = float(contraction_estimate)
        self.history = [float(change) for change in history]
        self.refinement = refinement
        self.pin_correction = float(pin_correction)
        self.converged = converged
        self.a_posteriori_bound = a_posteriori_bound(contraction_estimate, final_change)
        self.fitted_rate = RateEstimator.geometric_rate(history)

    def as_dict(self):
        return {
            'iterations': self.iterations,
            'final_change': self.final_change,
            'contraction_estimate': self.contraction_estimate,
            'a_posteriori_bound': self.a_posteriori_bound,
            'fitted_rate': self.fitted_rate,
            'pin_correction': self.pin_correction,
            'refinement': self.refinement,
            'converged': self.converged,
            'history': self.history,
        }


def a_posteriori_bound(gamma, change):
    return float(gamma / (1.0 - gamma) * change)


def build_pullback_plan(system, refinement):
    """Plan for lattice refinement m with every vertical map bound to it"""
    if int(refinement) < 1:
        raise InvalidParameter(f'refinement must be >= 1, got {refinement}')
    plan = PullbackPlan(system.grid, refinement)
    for cell, vertical_map in system.vertical_maps.items():
        plan.evaluators[cell] = vertical_map.prepare(plan)
    return plan


def _rb_values(system, g, pool=None):
    # returns T(g) lattice values pinned to the data and the pin correction
    if g.grid != system.grid:
        raise LatticeMismatch('function and system live on different grids')
    plan = system.plan(g.refinement)
    G = g.evaluate_tensor(plan.domain_coords)
    cells = list(system.grid.cells())

    def block(cell):
        return plan.evaluators[cell](plan.orient(cell, G))

    blocks = list(pool.map(block, cells)) if pool is not None else [block(c) for c in cells]

    values = np.empty(system.grid.lattice_shape(g.refinement))
    # written back to front so shared faces keep the lower cell's value
    for cell, cell_values in zip(reversed(cells), reversed(blocks)):
        values[plan.slices[cell]] = cell_values

    nodes = plan.node_slices()
    correction = float(np.max(np.abs(values[nodes] - system.data.values)))
    values[nodes] = system.data.values
    return values, correction


def _worker_pool(system, workers):
    workers = solver_setting('FIF_WORKERS', workers)
    if workers > 1 and int(np.prod(system.grid.cell_shape)) > 1:
        return ThreadPoolExecutor(max_workers=workers)
    return None


def apply_rb_operator(system, g, workers=None):
    """One application of the RB operator on g's lattice"""
    pool = _worker_pool(system, workers)
    try:
        values, _ = _rb_values(system, g, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    return g.with_values(values)


def solve_fif(system, tol=None, max_iter=None, refinement=None, initial=None,
              waive_verification=False, workers=None):
    """Banach iteration of the RB operator from the data interpolant.

    Stops when the sup-change or the a-posteriori bound gamma / (1 - gamma)
    times the sup-change drops to ``tol``. For gamma < 1/2 the second test
    can fire while the last sup-change is still above ``tol``. The returned
    iterate is within ``tol`` of the fixed point when that test fires or
    gamma <= 1/2, and within gamma / (1 - gamma) * tol otherwise.
    Returns the fixed point and its SolveDiagnostics.
    """
    tol = solver_setting('FIF_DEFAULT_TOL', tol)
    max_iter = solver_setting('FIF_DEFAULT_MAX_ITER', max_iter)
    refinement = solver_setting('FIF_DEFAULT_REFINEMENT', refinement or system.refinement)

    if not system.verified and not waive_verification:
        raise ConstraintsUnverified(
            'data constraints and matching conditions have not been verified; '
            'run verify_system first or waive explicitly'
        )

    g = initial if initial is not None else SampledFunction.from_data(system.data, refinement)
    if g.refinement != refinement or g.grid != system.grid:
        raise LatticeMismatch('initial function does not match the solve lattice')

    gamma = system.gamma_max
    history = []
    pin_correction = 0.0
    logger.info(
        f'Solving {system!r} on refinement {refinement} (tol={tol}, max_iter={max_iter})'
    )

    pool = _worker_pool(system, workers)
    try:
        for iteration in range(1, max_iter + 1):
            values, correction = _rb_values(system, g, pool)
            change = float(np.max(np.abs(values - g.values)))
            g = g.with_values(values, label=system.label)
            history.append(change)
            pin_correction = max(pin_correction, correction)
            logger.debug(f'iteration {iteration}: sup-change {change:.3e}')
            if change <= tol or a_posteriori_bound(gamma, change) <= tol:
                break
        else:
            diagnostics = SolveDiagnostics(
                max_iter, history[-1], gamma, history, refinement, pin_correction, converged=False,
            )
            raise NotConverged(
                f'no convergence after {max_iter} iterations '
                f'(sup-change {history[-1]:.3e} > tol {tol:.1e})',
                iterations=max_iter,
                final_change=history[-1],
                a_posteriori_bound=diagnostics.a_posteriori_bound,
            )
    finally:
        if pool is not None:
            pool.shutdown()

    diagnostics = SolveDiagnostics(
        len(history), history[-1], gamma, history, refinement, pin_correction,
    )
    logger.info(
        f'Converged in {diagnostics.iterations} iterations, sup-change '
        f'{diagnostics.final_change:.3e}, a-posteriori bound {diagnostics.a_posteriori_bound:.3e}'
    )
    return g, diagnostics


def verify_data_constraints(F, grid, data, tol=None):
    """Check F(corner, y_corner) = y_{tau(cell, corner)} for every corner of the domain"""
    tol = solver_setting('FIF_IDENTITY_TOL', tol)
    worst = 0.0
    checks = 0
    for corner in grid.corners():
        point = grid.node_point(corner)[np.newaxis, :]
        target = tuple(tau(i, j, axis.N) for i, j, axis in zip(F.cell, corner, grid.axes))
        value = float(F(point, data[corner])[0])
        residual = abs(value - data[target])
        if residual > tol:
            raise DataConstraintViolation(
                f'Eq. (2.5) fails on cell {F.cell} at corner {corner}: '
                f'F = {value!r}, expected y{target} = {data[target]!r}',
                cell=F.cell,
                corner=corner,
                residual=residual,
            )
        worst = max(worst, residual)
        checks += 1
    return {'cell': F.cell, 'checks': checks, 'max_residual': worst}


def estimate_y_contraction(F, samples, grid, refinement=None, scale=1.0, rng=None, tol=None):
    """Largest sampled |F(X,y) - F(X,y')| / |y - y'|, checked against F.gamma.

    X is drawn from the pullback lattice, where cell gammas are certified.
    """
    if samples < 1:
        raise InvalidParameter(f'samples must be >= 1, got {samples}')
    tol = solver_setting('FIF_IDENTITY_TOL', tol)
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement)
    rng = rng if rng is not None else np.random.default_rng()

    points = np.stack(
        [rng.choice(np.linspace(axis.a, axis.b, m + 1), samples) for axis in grid.axes],
        axis=1,
    )
    y = rng.uniform(-scale, scale, samples)
    y_other = rng.uniform(-scale, scale, samples)
    keep = y != y_other
    ratios = np.abs(F(points, y) - F(points, y_other))[keep] / np.abs(y - y_other)[keep]
    estimate = float(np.max(ratios)) if ratios.size else 0.0
    if estimate > F.gamma + tol:
        raise ContractionViolation(
            f'Eq. (2.6) fails on cell {F.cell}: sampled ratio {estimate:.6g} '
            f'exceeds declared gamma {F.gamma:.6g}',
            cell=F.cell,
            estimate=estimate,
            gamma=F.gamma,
        )
    return estimate


def _data_scale(system):
    return 1.0 + float(np.max(np.abs(system.data.values)))


def verify_matching_conditions(system, samples_per_face=None, y_values=None, rng=None, tol=None):
    """Sample the matching identity on every shared face of adjacent cells"""
    tol = solver_setting('FIF_IDENTITY_TOL', tol)
    samples = solver_setting('FIF_MATCHING_SAMPLES', samples_per_face)
    y_count = solver_setting('FIF_MATCHING_Y_VALUES', y_values)
    rng = rng if rng is not None else np.random.default_rng()
    grid = system.grid
    scale = _data_scale(system)

    faces = []
    worst = 0.0
    for k, axis in enumerate(grid.axes):
        others = [(None,) if j == k else grid.sigma(j) for j in range(grid.n)]
        for i in grid.interior_sigma0(k):
            for rest in itertools.product(*others):
                left = tuple(i if j == k else rest[j] for j in range(grid.n))
                right = tuple(i + 1 if j == k else rest[j] for j in range(grid.n))
                x_star = system.cell_maps[left].axis_maps[k].inverse(axis.knots[i])

                points = rng.uniform(grid.lower, grid.upper, (samples, grid.n))
                points[:, k] = x_star
                points = np.repeat(points, y_count, axis=0)
                y = rng.uniform(-scale, scale, points.shape[0])
                gaps = np.abs(system.vertical_maps[left](points, y) - system.vertical_maps[right](points, y))
                residual = float(np.max(gaps))
                if residual > tol:
                    witness = points[int(np.argmax(gaps))]
                    raise MatchingViolation(
                        f'Eq. (2.8) fails on the face x{k + 1} = {axis.knots[i]} between '
                        f'cells {left} and {right}: residual {residual:.3e} at {witness.tolist()}',
                        axis=k,
                        knot_index=i,
                        cells=(left, right),
                        witness=witness,
                        residual=residual,
                    )
                worst = max(worst, residual)
                faces.append({
                    'axis': k,
                    'knot_index': i,
                    'cells': [list(left), list(right)],
                    'shared_point': float(x_star),
                    'max_residual': residual,
                })
    return {'status': 'pass', 'face_count': len(faces), 'max_residual': worst, 'faces': faces}


def verify_system(system, samples=None, rng=None):
    """Run the shared-point, data-constraint, contraction and matching checks.

    Marks the system verified so solve_fif accepts it.
    """
    rng = rng if rng is not None else np.random.default_rng()
    samples = Y_CONTRACTION_SAMPLES if samples is None else samples
    grid = system.grid

    shared = [
        verify_shared_point(axis, build_axis_maps(axis, k)) for k, axis in enumerate(grid.axes)
    ]

    per_cell = [
        verify_data_constraints(system.vertical_maps[cell], grid, system.data)
        for cell in grid.cells()
    ]
    data_report = {
        'checks': sum(entry['checks'] for entry in per_cell),
        'max_residual': max(entry['max_residual'] for entry in per_cell),
        'cells': per_cell,
    }

    scale = _data_scale(system)
    estimates = {
        cell: estimate_y_contraction(
            vm, samples, grid, refinement=system.refinement, scale=scale, rng=rng,
        )
        for cell, vm in system.vertical_maps.items()
    }
    contraction_report = {
        'gamma_max': system.gamma_max,
        'max_estimate': max(estimates.values()),
        'estimates': [
            {'cell': list(cell), 'estimate': value, 'declared': system.vertical_maps[cell].gamma}
            for cell, value in estimates.items()
        ],
    }

    matching = verify_matching_conditions(system, rng=rng)

    system.verified = True
    system.verification = {
        'shared_point': shared,
        'data_constraints': data_report,
        'y_contraction': contraction_report,
        'matching': matching,
    }
    logger.info(
        f'Verified {system!r}: {data_report["checks"]} data checks, '
        f'{matching["face_count"]} faces'
    )
    return system.verification


def rb_value_at(system, g, points, cells):
    """(Tg)(Z) computed through explicitly chosen cells (one per point or shared)"""
    grid = system.grid
    points = as_points(points, grid.n)
    cells = np.broadcast_to(np.asarray(cells, dtype=int).reshape(-1, grid.n), points.shape)
    result = np.empty(points.shape[0])
    for cell in {tuple(int(i) for i in row) for row in cells}:
        mask = np.all(cells == cell, axis=1)
        preimages = np.clip(system.cell_maps[cell].inverse(points[mask]), grid.lower, grid.upper)
        result[mask] = system.vertical_maps[cell](preimages, g(preimages))
    return result


def verify_well_definedness(system, g, probes=200, rng=None, tol=None):
    """Evaluate T(g) on shared faces through every containing cell and compare"""
    tol = solver_setting('FIF_IDENTITY_TOL', tol)
    rng = rng if rng is not None else np.random.default_rng()
    grid = system.grid

    points = rng.uniform(grid.lower, grid.upper, (probes, grid.n))
    axes = rng.integers(0, grid.n, probes)
    for p, k in enumerate(axes):
        # one coordinate pinned to an interior knot, others pinned half of the time
        for j, axis in enumerate(grid.axes):
            if j == k or rng.random() < 0.5:
                points[p, j] = axis.knots[rng.integers(1, axis.N)]

    lower = locate_cells(grid, points)
    on_knot = np.stack(
        [np.isin(points[:, k], axis.interior_knots) for k, axis in enumerate(grid.axes)],
        axis=1,
    )
    reference = rb_value_at(system, g, points, lower)
    worst = 0.0
    for bits in itertools.product((0, 1), repeat=grid.n):
        alternative = lower + np.array(bits) * on_knot
        values = rb_value_at(system, g, points, alternative)
        gaps = np.abs(values - reference)
        if gaps.max() > worst:
            worst = float(gaps.max())
        if worst > tol:
            p = int(np.argmax(gaps))
            raise WellDefinednessViolation(
                f'T(g) is not single-valued at {points[p].tolist()}: cells '
                f'{lower[p].tolist()} and {alternative[p].tolist()} differ by {worst:.3e}',
                point=points[p],
                cells=(lower[p], alternative[p]),
                difference=worst,
            )
    return {'status': 'pass', 'probes': probes, 'max_difference': worst}


def random_admissible(system, refinement, rng, scale=None):
    """Random lattice function pinned to the data at every node"""
    scale = _data_scale(system) if scale is None else scale
    values = rng.uniform(-scale, scale, system.grid.lattice_shape(refinement))
    values[(slice(None, None, refinement),) * system.grid.n] = system.data.values
    return SampledFunction(system.grid, refinement, values)


def check_contraction(system, pairs=100, refinement=None, rng=None, slack=1e-12, workers=None):
    """Sampled check of sup|Tg - Th| <= gamma_max * sup|g - h|"""
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement or system.refinement)
    rng = rng if rng is not None else np.random.default_rng()
    gamma = system.gamma_max
    worst_ratio = 0.0
    pool = _worker_pool(system, workers)
    try:
        for _ in range(pairs):
            g = random_admissible(system, m, rng)
            h = random_admissible(system, m, rng)
            Tg, _ = _rb_values(system, g, pool)
            Th, _ = _rb_values(system, h, pool)
            before = float(np.max(np.abs(g.values - h.values)))
            after = float(np.max(np.abs(Tg - Th)))
            if after > gamma * before + slack:
                raise ContractionViolation(
                    f'Step III fails: sup|Tg - Th| = {after:.6g} exceeds '
                    f'{gamma:.6g} * sup|g - h| = {gamma * before:.6g}',
                    before=before,
                    after=after,
                    gamma=gamma,
                )
            if before > 0:
                worst_ratio = max(worst_ratio, after / before)
    finally:
        if pool is not None:
            pool.shutdown()
    return {'status': 'pass', 'pairs': pairs, 'gamma_max': gamma, 'max_ratio': worst_ratio}


def self_referential_residual(fif, system, probes):
    """max |f(Z) - F(u^{-1}(Z), f(u^{-1}(Z)))| over probe points Z"""
    points = system.grid.check_points(probes)
    cells = locate_cells(system.grid, points)
    return float(np.max(np.abs(fif(points) - rb_value_at(system, fif, points, cells))))


def sample_attractor(system, depth, seed_points=None, max_points=None):
    """Deterministic IFS iteration from graph points.

    Starts from the data at the grid nodes (or ``seed_points`` as a
    (points, values) pair) and applies every W ``depth`` times. Returns the
    final (points, values) arrays.
    """
    if depth < 1:
        raise InvalidParameter(f'depth must be >= 1, got {depth}')
    cap = solver_setting('FIF_ATTRACTOR_MAX_POINTS', max_points)
    grid = system.grid
    if seed_points is None:
        points, values = grid.node_points(), system.data.values.ravel()
    else:
        points = as_points(seed_points[0], grid.n)
        values = np.asarray(seed_points[1], dtype=float).ravel()

    cells = list(grid.cells())
    total = points.shape[0] * len(cells) ** depth
    if total > cap:
        raise DepthTooLarge(
            f'depth {depth} would produce {total} points (cap {cap})',
            depth=depth,
            points=total,
            cap=cap,
        )

    for _ in range(depth):
        images = [system.apply_w(cell, points, values) for cell in cells]
        points = np.concatenate([image[0] for image in images])
        values = np.concatenate([image[1] for image in images])
    logger.info(f'Sampled {points.shape[0]} attractor points at depth {depth}')
    return points, values

"""Alpha-fractal perturbations of a seed function.

Given a seed f, a scaling function alpha with sup-norm below one and a base b
that agrees with f at the domain corners, the vertical maps

    F(X, y) = f(u(X)) + alpha(u(X)) * (y - b(X))

satisfy the data and matching constraints for the data f|nodes, and the
resulting fractal function f^alpha interpolates f at every grid node.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from .domain_grid import (
    DataTensor,
    SampledFunction,
    as_points,
    corner_interpolant,
    evaluate_points,
    sup_distance,
)
from .errors import (
    BaseCornerMismatch,
    BoundViolation,
    DataConstraintViolation,
    InvalidParameter,
    LatticeMismatch,
    ScalingBoundViolation,
)
from .ifs_maps import build_cell_maps
from .rb_core import FifSystem, PullbackPlan, VerticalMap, solve_fif, verify_system
from .utils import RateEstimator, solver_setting

logger = logging.getLogger(__name__)


class GridFunction:
    """A vectorised function of (P, n) points with a label"""

    def __init__(self, evaluator, label=None):
        self.evaluator = evaluator
        self.label = label or getattr(evaluator, 'label', None) or 'function'

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        return np.broadcast_to(
            np.asarray(self.evaluator(points), dtype=float), (points.shape[0],)
        )

    def sample(self, grid, refinement):
        return SampledFunction.from_function(grid, refinement, self, label=self.label)

    def __repr__(self):
        return f'{type(self).__name__}({self.label!r})'


class SeedFunction(GridFunction):
    """The germ f being perturbed"""

    @classmethod
    def constant(cls, value):
        return cls(lambda points: np.full(points.shape[0], float(value)), label=f'{value!r}')

    @classmethod
    def random_polynomial(cls, n, rng, degree=3, terms=4):
        """Random polynomial in x1..xn, for property checks"""
        powers = rng.integers(0, degree + 1, (terms, n))
        coefficients = rng.uniform(-1.0, 1.0, terms)

        def polynomial(points):
            return sum(c * np.prod(points ** p, axis=1) for c, p in zip(coefficients, powers))

        return cls(polynomial, label=f'random polynomial (degree {degree})')


class BaseFunction(GridFunction):
    """b, required to agree with the seed at the 2^n domain corners"""


class ScalingFunction(GridFunction):
    """alpha with a declared bound on its sup-norm"""

    def __init__(self, evaluator, bound, label=None):
        super().__init__(evaluator, label)
        bound = float(bound)
        if not 0.0 <= bound < 1.0:
            raise ScalingBoundViolation(
                f'the scaling function needs a declared bound in [0, 1), got {bound}',
                bound=bound,
            )
        self.bound = bound
        self.lattice_max = None

    @classmethod
    def constant(cls, value):
        value = float(value)
        return cls(lambda points: np.full(points.shape[0], value), abs(value), label=f'{value!r}')

    def certify(self, grid, refinement, slack=None):
        """Lattice max of |alpha|; refuse when it exceeds the declared bound"""
        slack = solver_setting('FIF_IDENTITY_TOL', slack)
        self.lattice_max = float(np.max(np.abs(self(grid.lattice_points(refinement)))))
        if self.lattice_max > self.bound + slack:
            raise ScalingBoundViolation(
                f'|alpha| reaches {self.lattice_max:.6g} on the lattice, above the '
                f'declared bound {self.bound:.6g}',
                lattice_max=self.lattice_max,
                bound=self.bound,
            )
        return self.lattice_max


def as_scaling(alpha):
    if isinstance(alpha, ScalingFunction):
        return alpha
    return ScalingFunction.constant(alpha)


def make_corner_base(f, grid):
    """Multilinear interpolant of f's values at the domain corners"""
    corner_values = f(grid.corner_points())
    return BaseFunction(corner_interpolant(grid, corner_values), label='corner')


def check_base_corners(f, b, grid, tol=None):
    """Worst |b - f| over the domain corners; BaseCornerMismatch above tol"""
    tol = solver_setting('FIF_IDENTITY_TOL', tol)
    corners = grid.corner_points()
    gaps = np.abs(b(corners) - f(corners))
    worst = float(np.max(gaps))
    if worst > tol:
        witness = corners[int(np.argmax(gaps))]
        raise BaseCornerMismatch(
            f'Eq. (3.2) corner condition fails: b and f differ by {worst:.3e} at '
            f'corner {witness.tolist()}',
            corner=witness,
            difference=worst,
        )
    return worst


class AlphaVerticalMap(VerticalMap):
    """F(X, y) = f(u(X)) + alpha(u(X)) * phi(y - b(X)); phi is the identity by default"""

    def __init__(self, cell, cell_map, seed, scaling, base, gamma, phi=None):
        self.cell_map = cell_map
        self.seed = seed
        self.scaling = scaling
        self.base = base
        self.phi = phi
        super().__init__(cell, self._evaluate, gamma, label='alpha')

    def _vertical(self, difference):
        return difference if self.phi is None else self.phi(difference)

    def _evaluate(self, points, y):
        image = self.cell_map.forward(points)
        return self.seed(image) + self.scaling(image) * self._vertical(y - self.base(points))

    def prepare(self, plan):
        # f and alpha at u(X) are the seed's lattice values on this cell
        image = plan.lattice_points(self.cell)
        shape = plan.block_shape
        seed_values = evaluate_points(self.seed, image).reshape(shape)
        scaling_values = evaluate_points(self.scaling, image).reshape(shape)
        base_values = evaluate_points(self.base, plan.pullback_points(self.cell)).reshape(shape)

        def block(y):
            return seed_values + scaling_values * self._vertical(y - base_values)

        return block


def _check_phi(phi, phi_lipschitz, tol):
    if phi is None:
        return 1.0
    phi_lipschitz = float(phi_lipschitz)
    if not 0.0 <= phi_lipschitz <= 1.0:
        raise InvalidParameter(
            f'the vertical nonlinearity needs a Lipschitz constant <= 1, got {phi_lipschitz}'
        )
    at_zero = float(np.asarray(phi(np.zeros(1)), dtype=float)[0])
    if abs(at_zero) > tol:
        raise InvalidParameter(f'the vertical nonlinearity must vanish at 0, got {at_zero}')
    return phi_lipschitz


def build_alpha_system(f, alpha, b, grid, refinement=None, phi=None, phi_lipschitz=1.0,
                       verify=True, rng=None, tol=None):
    """FifSystem of the alpha-fractal maps for data f sampled at the nodes.

    Cell gammas are the lattice max of |alpha| over the cell (times Lip(phi)).
    """
    tol = solver_setting('FIF_IDENTITY_TOL', tol)
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement)
    alpha = as_scaling(alpha)
    alpha.certify(grid, m)
    check_base_corners(f, b, grid, tol)
    lipschitz = _check_phi(phi, phi_lipschitz, tol)

    data = DataTensor.from_function(grid, f)
    cell_maps = build_cell_maps(grid)
    plan = PullbackPlan(grid, m)
    maps = []
    for cell in grid.cells():
        gamma = float(np.max(np.abs(alpha(plan.lattice_points(cell))))) * lipschitz
        maps.append(AlphaVerticalMap(cell, cell_maps[cell], f, alpha, b, gamma, phi=phi))

    system = FifSystem(grid, data, maps, label=f'alpha-fractal of {f.label}', refinement=m)
    if verify:
        verify_system(system, rng=rng)
    return system


class AlphaFractalResult:
    """Solved alpha-fractal function with diagnostics and provenance"""

    def __init__(self, function, diagnostics, provenance, system):
        self.function = function
        self.diagnostics = diagnostics
        self.provenance = provenance
        self.system = system
        # filled in by the fractal operator layer
        self.base = None
        self.bounds = None

    def node_residual(self, f):
        """max |f^alpha - f| over all grid nodes"""
        nodes = self.system.grid.node_points()
        return float(np.max(np.abs(self.function(nodes) - f(nodes))))

    def as_dict(self):
        return {
            'provenance': self.provenance,
            'diagnostics': self.diagnostics.as_dict(),
        }


def construct_alpha_fractal(f, grid, alpha, b=None, tol=None, refinement=None, max_iter=None,
                            phi=None, phi_lipschitz=1.0, rng=None, workers=None):
    """Build, verify and solve the alpha-fractal of f (corner base by default)"""
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement)
    alpha = as_scaling(alpha)
    b = make_corner_base(f, grid) if b is None else b
    system = build_alpha_system(
        f, alpha, b, grid, refinement=m, phi=phi, phi_lipschitz=phi_lipschitz, rng=rng,
    )
    function, diagnostics = solve_fif(system, tol=tol, max_iter=max_iter, refinement=m, workers=workers)
    provenance = {
        'grid': grid.describe(),
        'seed': f.label,
        'alpha': alpha.label,
        'alpha_bound': alpha.bound,
        'base': b.label,
        'refinement': m,
    }
    return AlphaFractalResult(function, diagnostics, provenance, system)


def check_perturbation_bounds(result, f, b, alpha, slack=None):
    """Lattice check of the two perturbation bounds.

    Prop 3.1: ||f^a - f|| <= ||a|| ||f^a - b||.
    Prop 3.2: ||f^a - f|| <= ||a|| / (1 - ||a||) ||f - b||.
    ||a|| is the largest |alpha| on the solve lattice, the only points where
    the solver evaluates alpha; the declared bound is reported next to it.
    The slack adds twice the solver's own error bound.
    """
    alpha = as_scaling(alpha)
    S = result.function
    seed = SampledFunction.from_function(S.grid, S.refinement, f)
    base = SampledFunction.from_function(S.grid, S.refinement, b)
    slack = solver_setting('FIF_BOUND_SLACK', slack) + 2.0 * (
        result.diagnostics.a_posteriori_bound + result.diagnostics.final_change
    )
    norm = float(np.max(np.abs(alpha(S.lattice_points()))))

    observed = sup_distance(S, seed)
    bounds = {
        'prop_3_1': norm * sup_distance(S, base),
        'prop_3_2': norm / (1.0 - norm) * sup_distance(seed, base),
    }
    report = {
        'alpha_norm': norm,
        'alpha_bound': alpha.bound,
        'refinement': S.refinement,
        'fractal_minus_seed': observed,
        'seed_minus_base': sup_distance(seed, base),
        'slack_allowed': slack,
    }
    for name, bound in bounds.items():
        label = name.replace('prop_', 'Prop ').replace('_', '.')
        if observed > bound + slack:
            raise BoundViolation(
                f'{label} bound exceeded: ||f^alpha - f|| = {observed:.6g} > {bound:.6g}',
                proposition=label,
                observed=observed,
                bound=bound,
            )
        report[name] = {'bound': bound, 'margin': bound - observed}
    return report


def compare_family_nodes(results, tol=None):
    """All alpha-fractals of one seed and partition agree at every grid node"""
    tol = solver_setting('FIF_IDENTITY_TOL', tol)
    if not results:
        raise InvalidParameter('need at least one result to compare')
    reference = results[0].function
    worst = 0.0
    for result in results[1:]:
        if result.function.grid != reference.grid:
            raise LatticeMismatch('family members live on different grids')
        gap = float(np.max(np.abs(result.function.node_values() - reference.node_values())))
        if gap > tol:
            raise DataConstraintViolation(
                f'family members disagree at the nodes by {gap:.3e}',
                difference=gap,
            )
        worst = max(worst, gap)
    return {'status': 'pass', 'members': len(results), 'max_node_difference': worst}


def convergence_study(f, grid, b=None, alphas=None, bases=None, alpha=None, tol=None,
                      refinement=None, max_iter=None, workers=None, rng=None):
    """Errors ||f^alpha - f|| along a sequence of scalings or of bases.

    Exactly one of ``alphas`` (fixed base ``b``) or ``bases`` (fixed
    ``alpha``) is swept. Returns the table and the slope of log(error)
    against the sequence index.
    """
    if (alphas is None) == (bases is None):
        raise InvalidParameter('give exactly one of alphas or bases')
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement)
    workers = solver_setting('FIF_WORKERS', workers)
    rng = rng if rng is not None else np.random.default_rng()
    seed_sampled = SampledFunction.from_function(grid, m, f)

    if alphas is not None:
        base = make_corner_base(f, grid) if b is None else b
        runs = [(as_scaling(a), base) for a in alphas]
        sweep = 'alpha'
    else:
        if alpha is None:
            raise InvalidParameter('a base sweep needs a fixed alpha')
        runs = [(as_scaling(alpha), base) for base in bases]
        sweep = 'base'
    seeds = rng.integers(0, 2**32, len(runs))

    def run(job):
        scaling, base = job[1]
        result = construct_alpha_fractal(
            f, grid, scaling, base, tol=tol, refinement=m, max_iter=max_iter,
            rng=np.random.default_rng(job[0]), workers=1,
        )
        distance = sup_distance(seed_sampled, SampledFunction.from_function(grid, m, base))
        error = sup_distance(result.function, seed_sampled)
        bound = scaling.bound / (1.0 - scaling.bound) * distance
        return {
            'index': job[2],
            'parameter': scaling.bound if sweep == 'alpha' else distance,
            'error': error,
            'bound': bound,
            'iterations': result.diagnostics.iterations,
            'slack': solver_setting('FIF_BOUND_SLACK') + 2.0 * result.diagnostics.a_posteriori_bound,
        }

    jobs = [(seed, job, index) for index, (seed, job) in enumerate(zip(seeds, runs), start=1)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(run, jobs))

    table = pd.DataFrame(rows)
    table['within_bound'] = table['error'] <= table['bound'] + table['slack']
    if not table['within_bound'].all():
        row = table.loc[~table['within_bound']].iloc[0]
        raise BoundViolation(
            f'Prop 3.2 bound exceeded at sequence index {int(row["index"])}: '
            f'error {row["error"]:.6g} > {row["bound"]:.6g}',
            index=int(row['index']),
        )
    slope = RateEstimator.log_slope(table['index'], table['error'])
    logger.info(f'Convergence study over {len(table)} {sweep} values, log-error slope {slope}')
    return table.drop(columns='slack'), slope


def seed_from_samples(sampled, label=None):
    """SeedFunction backed by lattice samples (multilinear in between)"""
    grid = sampled.grid
    return SeedFunction(
        lambda points: sampled(as_points(points, grid.n)), label=label or sampled.label or 'sampled',
    )

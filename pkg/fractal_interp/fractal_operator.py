"""The fractal operator f -> f^alpha_L and its empirical bound suite.

An admissible operator L reproduces the corner values of every function it
is applied to, so b = L(f) is a valid base. The fractal operator sends f to
the alpha-fractal of f with that base. Norms below are lattice sup-norms and
every report carries the lattice refinement.
"""
import logging

import numpy as np

from .alpha_fractal import (
    BaseFunction,
    SeedFunction,
    as_scaling,
    check_perturbation_bounds,
    construct_alpha_fractal,
    make_corner_base,
)
from .domain_grid import SampledFunction, evaluate_points, sup_distance, tensor_points
from .errors import (
    BoundViolation,
    ContractionConditionFailed,
    DegeneratePair,
    InvalidParameter,
    LinearityViolation,
    NotAdmissible,
    NotConverged,
    OperatorNotLinear,
)
from .rb_core import PullbackPlan
from .utils import solver_setting

logger = logging.getLogger(__name__)

NORM_SCALES = (1.0, 10.0, 100.0, 1000.0)


def _as_function(f):
    if isinstance(f, SampledFunction):
        return SeedFunction(f, label=f.label or 'sampled')
    return f


class AdmissibleOperator:
    """Base class: L maps a function to a base function on the same grid"""

    name = 'operator'
    linear = False
    lipschitz = None
    estimator_only = False

    def apply(self, f, grid):
        raise NotImplementedError

    def __call__(self, f, grid):
        return self.apply(_as_function(f), grid)

    def describe(self):
        return {
            'name': self.name,
            'linear': self.linear,
            'lipschitz': self.lipschitz,
            'estimator_only': self.estimator_only,
        }

    def __repr__(self):
        return f'{type(self).__name__}({self.name!r})'


class IdentityOperator(AdmissibleOperator):
    name = 'identity'
    linear = True
    lipschitz = 1.0

    def apply(self, f, grid):
        return BaseFunction(f, label=f'Id({f.label})')


class CornerOperator(AdmissibleOperator):
    """Multilinear interpolant of the corner values"""

    name = 'corner'
    linear = True
    lipschitz = 1.0

    def apply(self, f, grid):
        return make_corner_base(f, grid)


class ReflectionOperator(AdmissibleOperator):
    """f(a + b - x) on every axis; swaps corners, so only used by the estimators"""

    name = 'reflection'
    linear = True
    lipschitz = 1.0
    estimator_only = True

    def apply(self, f, grid):
        lower, upper = grid.lower, grid.upper
        return BaseFunction(lambda points: f(lower + upper - points), label=f'R({f.label})')


class ConjugatedOperator(AdmissibleOperator):
    """R o L o R for an inner operator L; admissible whenever L is"""

    def __init__(self, inner):
        self.inner = inner
        self.name = f'reflected-{inner.name}'
        self.linear = inner.linear
        self.lipschitz = inner.lipschitz
        self.estimator_only = inner.estimator_only
        self._reflection = ReflectionOperator()

    def apply(self, f, grid):
        reflected = self._reflection.apply(f, grid)
        inner = self.inner.apply(reflected, grid)
        conjugated = self._reflection.apply(inner, grid)
        return BaseFunction(conjugated, label=f'R L R({f.label})')


class ZeroOperator(AdmissibleOperator):
    name = 'zero'
    linear = True
    lipschitz = 0.0
    estimator_only = True

    def apply(self, f, grid):
        return BaseFunction(lambda points: np.zeros(points.shape[0]), label='0')


class ExpressionOperator(AdmissibleOperator):
    """L(f)(X) given by an expression in x1..xn, f (seed value) and corner"""

    def __init__(self, expression, linear=False, lipschitz=None, name=None):
        self.expression = expression
        self.linear = bool(linear)
        self.lipschitz = None if lipschitz is None else float(lipschitz)
        self.name = name or expression.source

    def apply(self, f, grid):
        corner = make_corner_base(f, grid)
        expression = self.expression

        def evaluator(points):
            env = {f'x{k + 1}': points[:, k] for k in range(grid.n)}
            env['f'] = f(points)
            env['corner'] = corner(points)
            return expression.evaluate(env)

        return BaseFunction(evaluator, label=self.name)


BUILTIN_OPERATORS = {
    'identity': IdentityOperator,
    'corner': CornerOperator,
    'reflection': ReflectionOperator,
    'zero': ZeroOperator,
}


def get_operator(name):
    """Built-in operator by name; 'reflected-<name>' gives the conjugated form"""
    if name.startswith('reflected-'):
        return ConjugatedOperator(get_operator(name[len('reflected-'):]))
    try:
        return BUILTIN_OPERATORS[name]()
    except KeyError:
        raise InvalidParameter(
            f'unknown operator {name!r}; choose from {sorted(BUILTIN_OPERATORS)} '
            f'or reflected-<name>'
        ) from None


def check_admissible(L, f_samples, grid, tol=None):
    """Corner agreement L(f) = f at the 2^n domain corners, per sample"""
    tol = solver_setting('FIF_IDENTITY_TOL', tol)
    corners = grid.corner_points()
    residuals = []
    for position, f in enumerate(f_samples):
        f = _as_function(f)
        gaps = np.abs(L(f, grid)(corners) - f(corners))
        residual = float(np.max(gaps))
        if residual > tol:
            witness = corners[int(np.argmax(gaps))]
            raise NotAdmissible(
                f'operator {L.name} is not admissible for sample {position} ({f.label}): '
                f'corner {witness.tolist()} moves by {residual:.3e}',
                sample=position,
                corner=witness,
                residual=residual,
            )
        residuals.append(residual)
    return {'status': 'pass', 'operator': L.name, 'samples': len(residuals), 'residuals': residuals}


def _refuse_estimator_only(L):
    if L.estimator_only:
        raise NotAdmissible(
            f'operator {L.name} does not preserve corner values and only feeds the estimators'
        )


def apply_fractal_operator(L, alpha, grid, f, tol=None, refinement=None, max_iter=None,
                           rng=None, workers=None):
    """f^alpha with base L(f); the result carries the perturbation bound report"""
    _refuse_estimator_only(L)
    f = _as_function(f)
    check_admissible(L, [f], grid)
    alpha = as_scaling(alpha)
    base = L(f, grid)
    result = construct_alpha_fractal(
        f, grid, alpha, base, tol=tol, refinement=refinement, max_iter=max_iter,
        rng=rng, workers=workers,
    )
    result.provenance['operator'] = L.name
    result.bounds = check_perturbation_bounds(result, f, base, alpha)
    result.base = base
    return result


def check_fixed_set(L, alpha, grid, f, tol=None, refinement=None, rng=None):
    """L(f) = f on the lattice implies F(f) = f; returns the observed distance"""
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement)
    f = _as_function(f)
    seed = SampledFunction.from_function(grid, m, f)
    fixed_gap = sup_distance(seed, SampledFunction.from_function(grid, m, L(f, grid)))
    result = apply_fractal_operator(L, alpha, grid, f, tol=tol, refinement=m, rng=rng)
    return {
        'operator_gap': fixed_gap,
        'fractal_gap': sup_distance(result.function, seed),
        'refinement': m,
    }


def estimate_lipschitz(L, pairs, grid, refinement=None):
    """max ||L(f) - L(g)|| / ||f - g|| over the pairs (a lower bound of |L|)"""
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement)
    if not pairs:
        raise InvalidParameter('need at least one pair')
    worst = 0.0
    for position, (f, g) in enumerate(pairs):
        f, g = _as_function(f), _as_function(g)
        distance = sup_distance(
            SampledFunction.from_function(grid, m, f), SampledFunction.from_function(grid, m, g),
        )
        if distance == 0.0:
            raise DegeneratePair(f'pair {position} has f = g on the lattice', pair=position)
        image_distance = sup_distance(
            SampledFunction.from_function(grid, m, L(f, grid)),
            SampledFunction.from_function(grid, m, L(g, grid)),
        )
        worst = max(worst, image_distance / distance)
    return worst


def estimate_operator_norms(L, f_samples, grid, refinement=None, scales=NORM_SCALES):
    """Sample lower bounds of rho(L) and of the quasibound [L]_Q.

    rho is the largest ||L(s f)|| / ||s f|| over samples and scales (and
    ||L(0)||); [L]_Q is the largest ratio at the largest scale.
    """
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement)
    zero = SeedFunction.constant(0.0)
    rho = SampledFunction.from_function(grid, m, L(zero, grid)).sup_norm()
    ratios = {scale: 0.0 for scale in scales}
    for f in f_samples:
        f = _as_function(f)
        for scale in scales:
            scaled = SeedFunction(lambda points, f=f, scale=scale: scale * f(points))
            norm = SampledFunction.from_function(grid, m, scaled).sup_norm()
            if norm == 0.0:
                continue
            image = SampledFunction.from_function(grid, m, L(scaled, grid)).sup_norm()
            ratios[scale] = max(ratios[scale], image / norm)
    rho = max(rho, max(ratios.values()))
    return {
        'rho': rho,
        'quasibound': ratios[max(scales)],
        'ratios_by_scale': {str(scale): value for scale, value in ratios.items()},
        'refinement': m,
    }


class OperatorBoundReport:
    """Constants and observations of the relative bound suite"""

    def __init__(self, operator, alpha_norm, refinement):
        self.operator = operator
        self.alpha_norm = alpha_norm
        self.refinement = refinement
        self.relative_bound = {
            'a': 1.0 / (1.0 - alpha_norm),
            'b': alpha_norm / (1.0 - alpha_norm),
            'max_ratio': 0.0,
        }
        self.relative_lipschitz = {
            'a': 1.0 / (1.0 - alpha_norm),
            'b': alpha_norm / (1.0 - alpha_norm),
            'max_ratio': 0.0,
        }
        self.lipschitz_bound = None
        self.fractal_lipschitz = 0.0
        self.identity_defect = 0.0
        self.identity_defect_bound = None
        self.operator_lipschitz = None
        self.operator_norms = None
        self.fractal_rho = 0.0
        self.fractal_rho_bound = None
        self.fractal_quasibound = 0.0
        self.fractal_quasibound_bound = None
        self.samples = 0
        self.pairs = 0

    def as_dict(self):
        return {
            'operator': self.operator,
            'alpha_norm': self.alpha_norm,
            'refinement': self.refinement,
            'samples': self.samples,
            'pairs': self.pairs,
            'relative_bound': self.relative_bound,
            'relative_lipschitz': self.relative_lipschitz,
            'fractal_lipschitz': self.fractal_lipschitz,
            'lipschitz_bound': self.lipschitz_bound,
            'identity_defect': self.identity_defect,
            'identity_defect_bound': self.identity_defect_bound,
            'operator_lipschitz': self.operator_lipschitz,
            'operator_norms': self.operator_norms,
            'fractal_rho': self.fractal_rho,
            'fractal_rho_bound': self.fractal_rho_bound,
            'fractal_quasibound': self.fractal_quasibound,
            'fractal_quasibound_bound': self.fractal_quasibound_bound,
        }


def _solver_error(result):
    return result.diagnostics.a_posteriori_bound + result.diagnostics.final_change


def _check(observed, bound, slack, label, **details):
    if observed > bound + slack:
        raise BoundViolation(
            f'{label} bound exceeded: {observed:.6g} > {bound:.6g}',
            observed=observed,
            bound=bound,
            **details,
        )


def verify_relative_bounds(L, alpha, grid, f_samples, pairs, tol=None, refinement=None,
                           rng=None, slack=None):
    """Check relative boundedness and relative Lipschitz continuity of F w.r.t. L.

    Per sample: ||F f|| <= ||f|| / (1 - a) + a / (1 - a) ||L f||.
    Per pair:   ||F f - F g|| <= ||f - g|| / (1 - a) + a / (1 - a) ||L f - L g||,
    and with |L| known also ||F f - F g|| <= (1 + a |L|) / (1 - a) ||f - g||.
    """
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement)
    base_slack = solver_setting('FIF_BOUND_SLACK', slack)
    rng = rng if rng is not None else np.random.default_rng()
    alpha = as_scaling(alpha)
    a = alpha.bound
    report = OperatorBoundReport(L.name, a, m)

    solved = {}

    def fractal(f):
        # memoised per function object, pairs usually reuse the samples
        if id(f) not in solved:
            result = apply_fractal_operator(L, alpha, grid, f, tol=tol, refinement=m, rng=rng)
            seed = SampledFunction.from_function(grid, m, f)
            image = SampledFunction.from_function(grid, m, result.base)
            solved[id(f)] = (f, result, seed, image)
        return solved[id(f)]

    report.operator_norms = estimate_operator_norms(L, f_samples, grid, refinement=m)
    report.fractal_rho_bound = (1.0 + a * report.operator_norms['rho']) / (1.0 - a)

    for f in f_samples:
        f, result, seed, image = fractal(_as_function(f))
        norm_f, norm_lf = seed.sup_norm(), image.sup_norm()
        observed = result.function.sup_norm()
        sample_slack = base_slack + _solver_error(result)
        bound = (norm_f + a * norm_lf) / (1.0 - a)
        _check(observed, bound, sample_slack, 'Prop 3.3', sample=f.label)
        # bounded sets go to bounded sets: ||F f|| <= rho(F) ||f||
        _check(observed, report.fractal_rho_bound * norm_f, sample_slack, 'Cor 3.3', sample=f.label)
        if bound > 0:
            report.relative_bound['max_ratio'] = max(report.relative_bound['max_ratio'], observed / bound)
        if norm_f > 0:
            report.fractal_rho = max(report.fractal_rho, observed / norm_f)
        report.samples += 1

    # [F]_Q: the same ratio with the samples blown up to the largest norm scale
    scale = max(NORM_SCALES)
    scaled_tol = solver_setting('FIF_DEFAULT_TOL', tol) * scale
    report.fractal_quasibound_bound = (1.0 + a * report.operator_norms['quasibound']) / (1.0 - a)
    for f in f_samples:
        f = _as_function(f)
        scaled = SeedFunction(lambda points, f=f: scale * f(points), label=f'{scale:g} * {f.label}')
        norm = SampledFunction.from_function(grid, m, scaled).sup_norm()
        if norm == 0.0:
            continue
        result = apply_fractal_operator(L, alpha, grid, scaled, tol=scaled_tol, refinement=m, rng=rng)
        observed = result.function.sup_norm()
        _check(observed, report.fractal_quasibound_bound * norm, base_slack * scale + _solver_error(result),
               'Cor 3.3 quasinorm', sample=f.label)
        report.fractal_quasibound = max(report.fractal_quasibound, observed / norm)

    lipschitz = L.lipschitz
    if lipschitz is None and pairs:
        lipschitz = estimate_lipschitz(L, pairs, grid, refinement=m)
    report.operator_lipschitz = lipschitz
    if lipschitz is not None:
        report.lipschitz_bound = (1.0 + a * lipschitz) / (1.0 - a)
        report.identity_defect_bound = a * (1.0 + lipschitz) / (1.0 - a)

    for f, g in pairs:
        f, result_f, seed_f, image_f = fractal(_as_function(f))
        g, result_g, seed_g, image_g = fractal(_as_function(g))
        distance = sup_distance(seed_f, seed_g)
        if distance == 0.0:
            raise DegeneratePair(f'pair ({f.label}, {g.label}) has f = g on the lattice')
        pair_slack = base_slack + _solver_error(result_f) + _solver_error(result_g)
        observed = sup_distance(result_f.function, result_g.function)
        bound = (distance + a * sup_distance(image_f, image_g)) / (1.0 - a)
        _check(observed, bound, pair_slack, 'Prop 3.4', pair=(f.label, g.label))
        if bound > 0:
            report.relative_lipschitz['max_ratio'] = max(
                report.relative_lipschitz['max_ratio'], observed / bound,
            )
        if report.lipschitz_bound is not None:
            _check(observed, report.lipschitz_bound * distance, pair_slack,
                   'Prop 3.4 Lipschitz', pair=(f.label, g.label))

        defect = float(np.max(np.abs(
            (seed_f.values - result_f.function.values) - (seed_g.values - result_g.function.values)
        )))
        if report.identity_defect_bound is not None:
            _check(defect, report.identity_defect_bound * distance, pair_slack,
                   'Id - F Lipschitz', pair=(f.label, g.label))
        report.fractal_lipschitz = max(report.fractal_lipschitz, observed / distance)
        report.identity_defect = max(report.identity_defect, defect / distance)
        report.pairs += 1

    logger.info(
        f'Relative bounds hold for {L.name}: {report.samples} samples, {report.pairs} pairs, '
        f'|F| >= {report.fractal_lipschitz:.4g}'
    )
    return report


def verify_linearity(L, alpha, grid, f, g, c, tol=None, refinement=None, rng=None):
    """Check F(c f + g) = c F(f) + F(g) for a linear admissible L"""
    if not L.linear:
        raise OperatorNotLinear(f'operator {L.name} is not declared linear')
    m = solver_setting('FIF_DEFAULT_REFINEMENT', refinement)
    c = float(c)
    f, g = _as_function(f), _as_function(g)
    combined = SeedFunction(lambda points: c * f(points) + g(points), label=f'{c}*f + g')
    check_admissible(L, [f, g, combined], grid)

    results = [
        apply_fractal_operator(L, alpha, grid, h, tol=tol, refinement=m, rng=rng)
        for h in (combined, f, g)
    ]
    residual = float(np.max(np.abs(
        results[0].function.values - c * results[1].function.values - results[2].function.values
    )))
    scale = max(result.function.sup_norm() for result in results)
    limit = (
        _solver_error(results[0]) + abs(c) * _solver_error(results[1]) + _solver_error(results[2])
        + 1e-12 * (1.0 + scale)
    )
    if residual > limit:
        raise LinearityViolation(
            f'Remark 3.2 linearity fails: residual {residual:.3e} exceeds {limit:.3e}',
            residual=residual,
            limit=limit,
        )
    return {'status': 'pass', 'c': c, 'residual': residual, 'limit': limit, 'refinement': m}


def invert_fractal_operator(g_target, L, alpha, grid, tol=None, max_iter=None, lipschitz=None,
                            check_residual=True, rng=None):
    """Recover f with F(f) = g_target by iterating f <- g - alpha (g - L f) o u^{-1}.

    The iteration contracts with rate ||alpha|| |L|. The bilipschitz
    certificate ||alpha|| < 1 / (2 + |L|) is reported, with the derived
    inverse Lipschitz constant when it holds. Returns the recovered
    SeedFunction (its lattice samples in ``.sampled``) and the report.
    """
    tol = solver_setting('FIF_DEFAULT_TOL', tol)
    max_iter = solver_setting('FIF_DEFAULT_MAX_ITER', max_iter)
    _refuse_estimator_only(L)
    alpha = as_scaling(alpha)
    a = alpha.bound
    lipschitz = L.lipschitz if lipschitz is None else float(lipschitz)
    if lipschitz is None:
        raise InvalidParameter(f'operator {L.name} needs a Lipschitz constant for inversion')
    if a * lipschitz >= 1.0:
        raise ContractionConditionFailed(
            f'inverse iteration needs ||alpha|| |L| < 1, got {a} * {lipschitz} = {a * lipschitz:.6g}',
            alpha_norm=a,
            lipschitz=lipschitz,
        )

    certified = a < 1.0 / (2.0 + lipschitz)
    if not certified:
        logger.warning(
            f'||alpha|| = {a} is outside the bilipschitz certificate 1/(2 + |L|) = '
            f'{1.0 / (2.0 + lipschitz):.6g}; the iteration still contracts'
        )

    m = g_target.refinement
    plan = PullbackPlan(grid, m)
    cells = list(grid.cells())
    pull_points = tensor_points(plan.domain_coords)
    target_pull = g_target.evaluate_tensor(plan.domain_coords)
    scaling_blocks = {
        cell: evaluate_points(alpha, plan.lattice_points(cell)).reshape(plan.block_shape)
        for cell in cells
    }

    f = g_target
    history = []
    for iteration in range(1, max_iter + 1):
        base_pull = evaluate_points(L(f, grid), pull_points).reshape(plan.block_shape)
        gap = target_pull - base_pull
        values = np.empty(g_target.values.shape)
        for cell in reversed(cells):
            block = plan.slices[cell]
            values[block] = g_target.values[block] - scaling_blocks[cell] * plan.orient(cell, gap)
        change = float(np.max(np.abs(values - f.values)))
        f = g_target.with_values(values, label='recovered')
        history.append(change)
        logger.debug(f'inverse iteration {iteration}: sup-change {change:.3e}')
        if change <= tol:
            break
    else:
        raise NotConverged(
            f'inverse iteration did not converge after {max_iter} iterations '
            f'(sup-change {history[-1]:.3e})',
            iterations=max_iter,
            final_change=history[-1],
        )

    recovered = SeedFunction(f, label='recovered')
    recovered.sampled = f
    report = {
        'iterations': len(history),
        'final_change': history[-1],
        'contraction_rate': a * lipschitz,
        'alpha_norm': a,
        'operator_lipschitz': lipschitz,
        'certified_bilipschitz': certified,
        'certificate_threshold': 1.0 / (2.0 + lipschitz),
        'inverse_lipschitz': (1.0 - a) / (1.0 - a * (2.0 + lipschitz)) if certified else None,
        'refinement': m,
        'history': history,
    }
    if check_residual:
        forward = apply_fractal_operator(L, alpha, grid, recovered, tol=tol, refinement=m, rng=rng)
        report['residual'] = sup_distance(forward.function, g_target)
    logger.info(
        f'Inverted F for {L.name} in {len(history)} iterations '
        f'(certified bilipschitz: {certified})'
    )
    return recovered, report

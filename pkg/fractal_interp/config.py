"""JSON run configuration for the management commands.

Example::

    {
      "axes": [[0, 0.5, 1]],
      "seed": "x1^2",
      "alpha": 0.4,
      "base": "corner",
      "solver": {"tol": 1e-8, "max_iter": 200, "refinement": 64}
    }

Unknown fields are rejected with their dotted path.
"""
import itertools
import json
import logging
from pathlib import Path

import numpy as np

from .alpha_fractal import BaseFunction, ScalingFunction, SeedFunction, make_corner_base, seed_from_samples
from .domain_grid import SampledFunction, build_grid
from .errors import (
    ConfigIoError,
    CrossFieldError,
    ExpressionSyntaxError,
    FifError,
    SchemaError,
    UsageError,
)
from .exporters import load_samples
from .expressions import parse_expression
from .fractal_operator import ExpressionOperator, get_operator
from .utils import solver_setting

logger = logging.getLogger(__name__)

TOP_LEVEL_FIELDS = {
    'axes', 'seed', 'alpha', 'base', 'operator', 'vertical', 'solver', 'study',
    'operator_bounds', 'invert', 'attractor', 'verify', 'rng_seed',
}
REQUIRED_FIELDS = ('axes', 'seed', 'alpha')
SOLVER_FIELDS = {'tol', 'max_iter', 'refinement'}
BLOCK_FIELDS = {
    'study': {'alphas', 'bases'},
    'operator_bounds': {'samples', 'random_samples', 'pairs', 'linearity_c'},
    'invert': {'target', 'lipschitz'},
    'attractor': {'depth'},
    'verify': {'samples_per_face', 'y_values', 'probes', 'pairs'},
}


def _check_keys(mapping, allowed, path):
    if not isinstance(mapping, dict):
        raise SchemaError('expected an object', path)
    for key in mapping:
        if key not in allowed:
            raise SchemaError('unknown field', f'{path}.{key}' if path else key)


def _number(value, path, lower=None, upper=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f'expected a number, got {value!r}', path)
    value = float(value)
    if not np.isfinite(value):
        raise SchemaError('must be finite', path)
    if lower is not None and value <= lower:
        raise SchemaError(f'must be > {lower}', path)
    if upper is not None and value >= upper:
        raise SchemaError(f'must be < {upper}', path)
    return value


def _integer(value, path, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f'expected an integer, got {value!r}', path)
    if value < minimum:
        raise SchemaError(f'must be >= {minimum}', path)
    return value


def _expression(source, path, variables=None):
    if not isinstance(source, str):
        raise SchemaError(f'expected an expression string, got {source!r}', path)
    try:
        return parse_expression(source, variables)
    except FifError as exc:
        raise type(exc)(f'{path}: {exc.message}', **_error_args(exc)) from exc


def _error_args(exc):
    # keyword arguments to rebuild an expression error with a prefixed message
    if isinstance(exc, ExpressionSyntaxError):
        return {'position': exc.position, 'expected': exc.expected}
    return exc.details


class RunConfig:
    """Validated run configuration with the functions it describes built"""

    def __init__(self, raw, base_dir=None):
        self.raw = raw
        self.base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        _check_keys(raw, TOP_LEVEL_FIELDS, '')
        for name in REQUIRED_FIELDS:
            if name not in raw:
                raise SchemaError('required field missing', name)

        self.grid = self._build_grid(raw['axes'])
        self.n = self.grid.n
        self.seed = self._build_seed(raw['seed'])
        self.alpha = self._build_alpha(raw['alpha'], 'alpha')
        self.base = self._build_base(raw.get('base', 'corner'))
        self.operator = self._build_operator(raw.get('operator', 'corner'))
        self.phi, self.phi_lipschitz = self._build_vertical(raw.get('vertical'))
        self.solver = self._build_solver(raw.get('solver', {}))
        self.blocks = {}
        for name, fields in BLOCK_FIELDS.items():
            block = raw.get(name, {})
            _check_keys(block, fields, name)
            self.blocks[name] = block
        self.rng_seed = _integer(raw['rng_seed'], 'rng_seed', minimum=0) if 'rng_seed' in raw else 0

    # construction
    def _build_grid(self, axes):
        if not isinstance(axes, list) or not axes:
            raise SchemaError('expected a non-empty list of knot lists', 'axes')
        knot_lists = []
        for k, knots in enumerate(axes):
            if not isinstance(knots, list):
                raise SchemaError('expected a list of knots', f'axes[{k}]')
            knot_lists.append([_number(value, f'axes[{k}][{j}]') for j, value in enumerate(knots)])
        try:
            return build_grid(knot_lists)
        except UsageError as exc:
            raise CrossFieldError(f'axes: {exc.message}', **exc.details) from exc

    def _variables(self, *extra):
        return {f'x{k + 1}' for k in range(self.n)} | set(extra)

    def _function(self, source, path, *extra):
        expression = _expression(source, path, self._variables(*extra))
        return expression.as_function(self.n)

    def _build_seed(self, spec):
        if isinstance(spec, str):
            return SeedFunction(self._function(spec, 'seed'), label=spec)
        if isinstance(spec, dict) and set(spec) == {'data'}:
            try:
                values = np.array(spec['data'], dtype=float)
            except (TypeError, ValueError):
                raise SchemaError('data must be numbers', 'seed.data') from None
            nodes = int(np.prod(self.grid.node_shape))
            if values.size != nodes:
                raise SchemaError(
                    f'data tensor has {values.size} values, the grid has {nodes} nodes', 'seed.data',
                )
            if not np.all(np.isfinite(values)):
                raise SchemaError('data must be finite', 'seed.data')
            return seed_from_samples(SampledFunction(self.grid, 1, values), label='data')
        if isinstance(spec, dict) and set(spec) == {'csv'}:
            sampled = load_samples(self.resolve(spec['csv']), self.grid, field_path='seed.csv')
            return seed_from_samples(sampled, label=f'csv:{spec["csv"]}')
        raise SchemaError('expected an expression, {"data": [...]} or {"csv": path}', 'seed')

    def _build_alpha(self, spec, path):
        if isinstance(spec, dict):
            _check_keys(spec, {'expression', 'bound'}, path)
            if 'expression' not in spec:
                raise SchemaError('required field missing', f'{path}.expression')
            if 'bound' not in spec:
                raise SchemaError('a declared bound is required for expression scalings', f'{path}.bound')
            bound = _number(spec['bound'], f'{path}.bound')
            if not 0.0 <= bound < 1.0:
                raise CrossFieldError(f'{path}.bound must lie in [0, 1), got {bound}', bound=bound)
            return ScalingFunction(
                self._function(spec['expression'], f'{path}.expression'), bound, label=spec['expression'],
            )
        value = _number(spec, path)
        if abs(value) >= 1.0:
            raise CrossFieldError(f'{path}: |alpha| must be < 1, got {value}', bound=abs(value))
        return ScalingFunction.constant(value)

    def _build_base(self, spec):
        if spec == 'corner':
            return make_corner_base(self.seed, self.grid)
        if spec == 'seed':
            return BaseFunction(self.seed, label='seed')
        if isinstance(spec, dict):
            _check_keys(spec, {'expression'}, 'base')
            source = spec.get('expression')
            return BaseFunction(self._function(source, 'base.expression'), label=source)
        raise SchemaError('expected "corner", "seed" or {"expression": ...}', 'base')

    def _build_operator(self, spec):
        if isinstance(spec, str):
            try:
                return get_operator(spec)
            except UsageError as exc:
                raise SchemaError(exc.message, 'operator') from exc
        if isinstance(spec, dict):
            _check_keys(spec, {'expression', 'linear', 'lipschitz'}, 'operator')
            expression = _expression(
                spec.get('expression'), 'operator.expression', self._variables('f', 'corner'),
            )
            linear = spec.get('linear', False)
            if not isinstance(linear, bool):
                raise SchemaError('expected true or false', 'operator.linear')
            lipschitz = spec.get('lipschitz')
            if lipschitz is not None:
                lipschitz = _number(lipschitz, 'operator.lipschitz')
            return ExpressionOperator(expression, linear=linear, lipschitz=lipschitz)
        raise SchemaError('expected an operator name or {"expression": ...}', 'operator')

    def _build_vertical(self, spec):
        if spec is None:
            return None, 1.0
        _check_keys(spec, {'expression', 'lipschitz'}, 'vertical')
        expression = _expression(spec.get('expression'), 'vertical.expression', {'y'})
        lipschitz = _number(spec.get('lipschitz', 1.0), 'vertical.lipschitz')
        if not 0.0 <= lipschitz <= 1.0:
            raise CrossFieldError(f'vertical.lipschitz must lie in [0, 1], got {lipschitz}')

        def phi(difference):
            return expression.evaluate({'y': np.asarray(difference, dtype=float)})

        return phi, lipschitz

    def _build_solver(self, spec):
        _check_keys(spec, SOLVER_FIELDS, 'solver')
        solver = {
            'tol': solver_setting('FIF_DEFAULT_TOL'),
            'max_iter': solver_setting('FIF_DEFAULT_MAX_ITER'),
            'refinement': solver_setting('FIF_DEFAULT_REFINEMENT'),
        }
        if 'tol' in spec:
            solver['tol'] = _number(spec['tol'], 'solver.tol', lower=0.0)
        if 'max_iter' in spec:
            solver['max_iter'] = _integer(spec['max_iter'], 'solver.max_iter')
        if 'refinement' in spec:
            solver['refinement'] = _integer(spec['refinement'], 'solver.refinement')
        return solver

    # helpers for commands
    def resolve(self, path):
        if not isinstance(path, str):
            raise SchemaError(f'expected a path, got {path!r}', 'csv')
        path = Path(path)
        return path if path.is_absolute() else self.base_dir / path

    def override_solver(self, tol=None, max_iter=None, refinement=None):
        """Apply --tol/--max-iter/--refine on top of the solver block"""
        if tol is not None:
            self.solver['tol'] = _number(tol, '--tol', lower=0.0)
        if max_iter is not None:
            self.solver['max_iter'] = _integer(max_iter, '--max-iter')
        if refinement is not None:
            self.solver['refinement'] = _integer(refinement, '--refine')
        return self.solver

    def rng(self):
        return np.random.default_rng(self.rng_seed)

    def block(self, name):
        return self.blocks[name]

    def study_sequences(self):
        """('alpha', [ScalingFunction]) or ('base', [BaseFunction])"""
        block = self.blocks['study']
        if ('alphas' in block) == ('bases' in block):
            raise SchemaError('give exactly one of alphas or bases', 'study')
        if 'alphas' in block:
            if not isinstance(block['alphas'], list) or not block['alphas']:
                raise SchemaError('expected a non-empty list', 'study.alphas')
            return 'alpha', [
                self._build_alpha(spec, f'study.alphas[{index}]')
                for index, spec in enumerate(block['alphas'])
            ]
        if not isinstance(block['bases'], list) or not block['bases']:
            raise SchemaError('expected a non-empty list', 'study.bases')
        return 'base', [
            BaseFunction(self._function(source, f'study.bases[{index}]'), label=source)
            for index, source in enumerate(block['bases'])
        ]

    def invert_target(self, refinement):
        """SampledFunction to invert, or None for 'forward' (F applied to the seed)"""
        spec = self.blocks['invert'].get('target', 'forward')
        if spec == 'forward':
            return None
        if isinstance(spec, str):
            function = self._function(spec, 'invert.target')
            return SampledFunction.from_function(self.grid, refinement, function)
        if isinstance(spec, dict) and set(spec) == {'csv'}:
            return load_samples(self.resolve(spec['csv']), self.grid, field_path='invert.target.csv')
        raise SchemaError('expected "forward", an expression or {"csv": path}', 'invert.target')

    def operator_samples(self):
        """Sample functions and index pairs for the operator bound suite"""
        block = self.blocks['operator_bounds']
        sources = block.get('samples', [])
        if not isinstance(sources, list):
            raise SchemaError('expected a list of expressions', 'operator_bounds.samples')
        samples = [self.seed] + [
            SeedFunction(self._function(source, f'operator_bounds.samples[{index}]'), label=source)
            for index, source in enumerate(sources)
        ]
        extra = _integer(block.get('random_samples', 0), 'operator_bounds.random_samples', minimum=0)
        rng = self.rng()
        samples += [SeedFunction.random_polynomial(self.n, rng) for _ in range(extra)]

        if 'pairs' in block:
            pairs = []
            for index, pair in enumerate(block['pairs']):
                path = f'operator_bounds.pairs[{index}]'
                if not (isinstance(pair, list) and len(pair) == 2):
                    raise SchemaError('expected [i, j]', path)
                i, j = (_integer(value, path, minimum=0) for value in pair)
                if max(i, j) >= len(samples):
                    raise SchemaError(f'sample index out of range (have {len(samples)})', path)
                pairs.append((samples[i], samples[j]))
        else:
            pairs = list(itertools.combinations(samples, 2))
        return samples, pairs

    def describe(self):
        return {
            'axes': self.grid.describe()['axes'],
            'seed': self.seed.label,
            'alpha': self.alpha.label,
            'alpha_bound': self.alpha.bound,
            'base': self.base.label,
            'operator': self.operator.name,
            'solver': dict(self.solver),
        }


def load_config(path):
    """Read and validate a JSON run configuration"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigIoError(f'cannot read config {path}: {exc}', path=str(path)) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f'invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}', '<root>') from exc
    if not isinstance(raw, dict):
        raise SchemaError('expected a JSON object', '<root>')
    config = RunConfig(raw, base_dir=path.parent)
    logger.info(f'Loaded config {path} ({config.n}D, cells {config.grid.cell_shape})')
    return config

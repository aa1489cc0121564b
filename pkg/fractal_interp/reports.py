import logging

import numpy as np

from .alpha_fractal import AlphaFractalResult, build_alpha_system, check_perturbation_bounds
from .domain_grid import SampledFunction
from .errors import DataConstraintViolation, VerificationFailure
from .ifs_maps import build_axis_maps, verify_shared_point
from .rb_core import (
    check_contraction,
    estimate_y_contraction,
    solve_fif,
    self_referential_residual,
    verify_data_constraints,
    verify_matching_conditions,
    verify_well_definedness,
)
from .utils import solver_setting

logger = logging.getLogger(__name__)


class VerificationReports:
    """Assemble and render verification reports"""

    @staticmethod
    def run_suite(config, probes=None, pairs=None, samples_per_face=None, y_values=None):
        """Run every check on the configured alpha-fractal, stopping at the first failure.

        Returns (report, error); error is the VerificationFailure that stopped
        the suite or None.
        """
        block = config.block('verify')
        probes = probes or block.get('probes', 200)
        pairs = pairs or block.get('pairs', 20)
        samples_per_face = samples_per_face or block.get('samples_per_face')
        y_values = y_values or block.get('y_values')
        solver = config.solver
        rng = config.rng()
        grid = config.grid
        steps = []
        report = {'config': config.describe(), 'steps': steps, 'status': 'pass'}
        state = {}

        def shared_point():
            return [verify_shared_point(axis, build_axis_maps(axis, k)) for k, axis in enumerate(grid.axes)]

        def system():
            state['system'] = build_alpha_system(
                config.seed, config.alpha, config.base, grid,
                refinement=solver['refinement'], phi=config.phi,
                phi_lipschitz=config.phi_lipschitz, verify=False,
            )
            return {'gamma_max': state['system'].gamma_max, 'alpha_lattice_max': config.alpha.lattice_max}

        def data_constraints():
            cells = [
                verify_data_constraints(vm, grid, state['system'].data)
                for vm in state['system'].vertical_maps.values()
            ]
            return {'checks': sum(entry['checks'] for entry in cells),
                    'max_residual': max(entry['max_residual'] for entry in cells)}

        def y_contraction():
            scale = 1.0 + float(np.max(np.abs(state['system'].data.values)))
            estimates = [
                estimate_y_contraction(vm, 200, grid, refinement=solver['refinement'], scale=scale, rng=rng)
                for vm in state['system'].vertical_maps.values()
            ]
            return {'max_estimate': max(estimates), 'gamma_max': state['system'].gamma_max}

        def matching():
            result = verify_matching_conditions(
                state['system'], samples_per_face=samples_per_face, y_values=y_values, rng=rng,
            )
            state['system'].verified = True
            return {key: result[key] for key in ('face_count', 'max_residual')}

        def well_definedness():
            start = SampledFunction.from_data(state['system'].data, solver['refinement'])
            return verify_well_definedness(state['system'], start, probes=probes, rng=rng)

        def contraction():
            return check_contraction(state['system'], pairs=pairs, refinement=solver['refinement'], rng=rng)

        def solve():
            state['function'], state['diagnostics'] = solve_fif(
                state['system'], tol=solver['tol'], max_iter=solver['max_iter'],
                refinement=solver['refinement'],
            )
            return state['diagnostics'].as_dict()

        def residual():
            nodes = grid.node_points()
            at_nodes = self_referential_residual(state['function'], state['system'], nodes)
            if at_nodes > solver_setting('FIF_IDENTITY_TOL'):
                raise DataConstraintViolation(
                    f'Theorem 2.1 self-referential residual at nodes is {at_nodes:.3e}',
                    residual=at_nodes,
                )
            lattice = state['function'].lattice_points()
            chosen = lattice[rng.choice(lattice.shape[0], min(probes, lattice.shape[0]), replace=False)]
            node_error = float(np.max(np.abs(state['function'](nodes) - config.seed(nodes))))
            return {
                'at_nodes': at_nodes,
                'at_lattice_probes': self_referential_residual(state['function'], state['system'], chosen),
                'node_interpolation_error': node_error,
            }

        def perturbation_bounds():
            result = AlphaFractalResult(
                state['function'], state['diagnostics'], config.describe(), state['system'],
            )
            return check_perturbation_bounds(result, config.seed, config.base, config.alpha)

        for name, step in [
            ('shared_point', shared_point),
            ('system', system),
            ('data_constraints', data_constraints),
            ('y_contraction', y_contraction),
            ('matching', matching),
            ('well_definedness', well_definedness),
            ('contraction', contraction),
            ('solve', solve),
            ('self_referential_residual', residual),
            ('perturbation_bounds', perturbation_bounds),
        ]:
            try:
                steps.append({'step': name, 'status': 'pass', 'result': step()})
            except VerificationFailure as error:
                steps.append({'step': name, 'status': 'fail', 'error': error.as_dict()})
                report['status'] = 'fail'
                logger.error(f'Verification step {name} failed: {error.message}')
                return report, error
        return report, None

    @staticmethod
    def render(title, report):
        """Human-readable text of a (nested) report dict"""
        lines = [title, '=' * len(title)]
        _render_into(lines, report, 0)
        return '\n'.join(lines)

    @staticmethod
    def render_steps(report):
        lines = []
        for entry in report['steps']:
            marker = 'ok  ' if entry['status'] == 'pass' else 'FAIL'
            detail = entry['error']['message'] if entry['status'] == 'fail' else _headline(entry['result'])
            lines.append(f'[{marker}] {entry["step"]}: {detail}')
        return '\n'.join(lines)


def _format(value):
    if isinstance(value, float):
        return f'{value:.6g}'
    return str(value)


def _headline(result):
    if isinstance(result, dict):
        shown = [
            f'{key}={_format(value)}' for key, value in result.items()
            if isinstance(value, (int, float, str, bool)) or value is None
        ]
        return ', '.join(shown[:4])
    if isinstance(result, list):
        return f'{len(result)} entries'
    return _format(result)


def _render_into(lines, value, depth):
    indent = '  ' * depth
    for key, item in value.items():
        if isinstance(item, dict):
            lines.append(f'{indent}{key}:')
            _render_into(lines, item, depth + 1)
        elif isinstance(item, list) and len(item) > 6:
            lines.append(f'{indent}{key}: [{len(item)} entries]')
        elif isinstance(item, list):
            lines.append(f'{indent}{key}: [{", ".join(_format(entry) for entry in item)}]')
        else:
            lines.append(f'{indent}{key}: {_format(item)}')

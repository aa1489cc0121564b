import json
from io import StringIO

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from fractal_project import cli

from .support import TempDirMixin

DESK = {
    'axes': [[0, 0.5, 1]],
    'seed': 'x1^2',
    'alpha': 0.2,
    'base': 'corner',
    'solver': {'tol': 1e-10, 'refinement': 16},
}


def desk(**changes):
    raw = json.loads(json.dumps(DESK))
    raw.update(changes)
    return raw


class CommandTestCase(TempDirMixin, SimpleTestCase):
    def run_command(self, name, config, *args):
        stdout = StringIO()
        call_command(name, str(self.write_config(config)), *args, stdout=stdout, stderr=StringIO())
        return stdout.getvalue()

    def assertExitCode(self, code, name, config, *args):
        with self.assertRaises(CommandError) as caught:
            self.run_command(name, config, *args)
        self.assertEqual(caught.exception.returncode, code)
        return caught.exception


class ConstructCommandTests(CommandTestCase):
    def test_writes_samples_and_diagnostics(self):
        out = self.tmp / 'out'
        stdout = self.run_command('construct', desk(), '-o', str(out))
        samples = pd.read_csv(out / 'fif_samples.csv')
        self.assertEqual(list(samples.columns), ['x1', 'value'])
        self.assertEqual(len(samples), 33)
        diagnostics = json.loads((out / 'diagnostics.json').read_text())
        self.assertLessEqual(diagnostics['node_interpolation_error'], 1e-9)
        self.assertIn('perturbation_bounds', diagnostics)
        self.assertIn('construct finished in', stdout)

    def test_solver_overrides(self):
        out = self.tmp / 'out'
        self.run_command('construct', desk(), '-o', str(out), '--tol', '1e-6', '--refine', '4')
        self.assertEqual(len(pd.read_csv(out / 'fif_samples.csv')), 9)

    def test_missing_output_is_a_usage_error(self):
        self.assertExitCode(1, 'construct', desk())

    def test_invalid_scaling_is_a_usage_error(self):
        error = self.assertExitCode(1, 'construct', desk(alpha=1.2), '-o', str(self.tmp / 'out'))
        self.assertIn('[cross_field_error]', str(error))

    def test_no_convergence_exits_three(self):
        error = self.assertExitCode(
            3, 'construct', desk(alpha=0.5), '-o', str(self.tmp / 'out'), '--max-iter', '1', '--tol', '1e-14',
        )
        self.assertIn('[not_converged]', str(error))


class VerifyCommandTests(CommandTestCase):
    def test_suite_passes(self):
        out = self.tmp / 'out'
        stdout = self.run_command('verify', desk(), '-o', str(out), '--probes', '50', '--pairs', '5')
        self.assertIn('All verification checks passed', stdout)
        report = json.loads((out / 'verification.json').read_text())
        self.assertEqual(report['status'], 'pass')
        self.assertEqual(report['steps'][-1]['step'], 'perturbation_bounds')

    def test_output_is_optional(self):
        stdout = self.run_command('verify', desk(), '--probes', '20', '--pairs', '3')
        self.assertIn('[ok  ] matching', stdout)

    def test_tampered_base_exits_two(self):
        error = self.assertExitCode(2, 'verify', desk(base={'expression': 'x1 + 0.1'}))
        self.assertIn('Eq. (3.2)', str(error))


class StudyCommandTests(CommandTestCase):
    def test_alpha_sweep(self):
        out = self.tmp / 'out'
        self.run_command('study', desk(study={'alphas': [0.5, 0.25, 0.125]}), '-o', str(out))
        self.assertEqual(len(pd.read_csv(out / 'study.csv')), 3)
        summary = json.loads((out / 'study.json').read_text())
        self.assertEqual(summary['sweep'], 'alpha')
        self.assertLess(summary['log_error_slope'], 0.0)


class OperatorBoundsCommandTests(CommandTestCase):
    def test_bounds_and_linearity(self):
        out = self.tmp / 'out'
        config = desk(operator_bounds={'samples': ['x1^3', 'sin(x1)']})
        self.run_command('operator_bounds', config, '-o', str(out))
        report = json.loads((out / 'operator_bounds.json').read_text())
        self.assertEqual(report['linearity']['status'], 'pass')
        self.assertEqual(report['relative_bounds']['pairs'], 3)
        self.assertEqual(report['admissibility']['samples'], 3)

    def test_dashed_name_from_the_console_script(self):
        out = self.tmp / 'out'
        cli.main(['fif', 'operator-bounds', str(self.write_config(desk())), '-o', str(out)])
        self.assertTrue((out / 'operator_bounds.json').exists())

    def test_console_script_usage_error_exits_one(self):
        with self.assertRaises(SystemExit) as caught:
            cli.main(['fif', 'construct'])
        self.assertEqual(caught.exception.code, 1)


class InvertCommandTests(CommandTestCase):
    def test_forward_round_trip(self):
        out = self.tmp / 'out'
        self.run_command('invert', desk(), '-o', str(out))
        report = json.loads((out / 'invert.json').read_text())
        self.assertEqual(report['target'], 'forward')
        self.assertLessEqual(report['round_trip_error'], 1e-8)
        self.assertEqual(len(pd.read_csv(out / 'recovered.csv')), 33)

    def test_given_target(self):
        out = self.tmp / 'out'
        self.run_command('invert', desk(invert={'target': 'x1^2 + 0.05*sin(6*x1)'}), '-o', str(out))
        report = json.loads((out / 'invert.json').read_text())
        self.assertEqual(report['target'], 'given')
        self.assertNotIn('round_trip_error', report)


class AttractorCommandTests(CommandTestCase):
    def test_depth_three(self):
        out = self.tmp / 'out'
        stdout = self.run_command('attractor', desk(), '-o', str(out), '--depth', '3')
        points = pd.read_csv(out / 'attractor.csv')
        self.assertEqual(len(points), 24)
        report = json.loads((out / 'attractor.json').read_text())
        self.assertEqual(report['depth'], 3)
        self.assertIn('24 points at depth 3', stdout)

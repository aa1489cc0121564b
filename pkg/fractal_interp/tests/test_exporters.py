import json

import numpy as np
from django.test import SimpleTestCase

from fractal_interp.domain_grid import SampledFunction, build_grid
from fractal_interp.errors import ConfigIoError, SchemaError
from fractal_interp.exporters import export_samples, load_samples, write_json

from .support import TempDirMixin, desk_grid


class ExportSamplesTests(TempDirMixin, SimpleTestCase):
    def test_one_dimensional_lattice(self):
        S = SampledFunction(desk_grid(), 1, [0.0, 0.25, 1.0])
        path = export_samples(S, self.tmp / 'fif.csv')
        lines = path.read_text().split('\n')
        self.assertEqual(lines[0], 'x1,value')
        self.assertEqual(lines[1:4], ['0,0', '0.5,0.25', '1,1'])
        self.assertEqual(lines[4:], [''])

    def test_two_dimensional_rows_are_row_major(self):
        grid = build_grid([[0, 0.5, 1], [0, 1, 2]])
        S = SampledFunction.from_function(grid, 1, lambda p: p[:, 0] + 10 * p[:, 1])
        lines = export_samples(S, self.tmp / 'fif.csv').read_text().splitlines()
        self.assertEqual(len(lines), 10)
        self.assertEqual(lines[0], 'x1,x2,value')
        self.assertEqual(lines[1:4], ['0,0,0', '0,1,10', '0,2,20'])
        self.assertEqual(lines[4], '0.5,0,0.5')

    def test_seventeen_significant_digits(self):
        S = SampledFunction(desk_grid(), 1, [1.0 / 3.0, 0.0, 0.0])
        lines = export_samples(S, self.tmp / 'fif.csv').read_text().splitlines()
        self.assertEqual(lines[1], '0,0.33333333333333331')

    def test_attractor_points(self):
        points = np.array([[0.25], [0.75], [0.5]])
        lines = export_samples((points, [1.0, 2.0, 3.0]), self.tmp / 'attractor.csv').read_text().splitlines()
        self.assertEqual(lines, ['x1,value', '0.25,1', '0.75,2', '0.5,3'])

    def test_round_trip_is_bit_exact(self):
        rng = np.random.default_rng(17)
        grid = build_grid([[0, 0.3, 1], [-1, 0, 0.5, 2]])
        S = SampledFunction(grid, 5, rng.normal(size=grid.lattice_shape(5)) * 1e3)
        export_samples(S, self.tmp / 'fif.csv')
        loaded = load_samples(self.tmp / 'fif.csv', grid)
        self.assertEqual(loaded.refinement, 5)
        np.testing.assert_array_equal(loaded.values, S.values)

    def test_unwritable_path(self):
        S = SampledFunction(desk_grid(), 1, [0.0, 0.25, 1.0])
        with self.assertRaises(ConfigIoError):
            export_samples(S, self.tmp / 'missing' / 'fif.csv')


class LoadSamplesTests(TempDirMixin, SimpleTestCase):
    def test_wrong_columns(self):
        path = self.tmp / 'bad.csv'
        path.write_text('x,value\n0,0\n0.5,1\n1,2\n')
        with self.assertRaises(SchemaError) as caught:
            load_samples(path, desk_grid(), field_path='seed.csv')
        self.assertEqual(caught.exception.field_path, 'seed.csv')

    def test_rows_off_the_lattice(self):
        path = self.tmp / 'bad.csv'
        path.write_text('x1,value\n0,0\n0.4,1\n1,2\n')
        with self.assertRaises(SchemaError):
            load_samples(path, desk_grid())

    def test_missing_file(self):
        with self.assertRaises(ConfigIoError):
            load_samples(self.tmp / 'missing.csv', desk_grid())


class WriteJsonTests(TempDirMixin, SimpleTestCase):
    def test_numpy_values(self):
        path = write_json({'values': np.arange(3.0), 'max': np.float64(2.5)}, self.tmp / 'report.json')
        self.assertEqual(json.loads(path.read_text()), {'values': [0.0, 1.0, 2.0], 'max': 2.5})

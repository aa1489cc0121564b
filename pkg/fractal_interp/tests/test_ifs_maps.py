import numpy as np
from django.test import SimpleTestCase

from fractal_interp.domain_grid import build_axis_partition, build_grid
from fractal_interp.errors import OutOfDomain, SharedPointViolation
from fractal_interp.ifs_maps import (
    AffineCellMap,
    apply_map,
    build_axis_maps,
    build_cell_maps,
    verify_shared_point,
)

from .support import random_grid


class AxisMapTests(SimpleTestCase):
    def setUp(self):
        self.P = build_axis_partition([0, 0.3, 1])
        self.maps = build_axis_maps(self.P)

    def test_odd_cell_keeps_orientation(self):
        first = self.maps[0]
        self.assertEqual(first.parity, 'odd')
        self.assertAlmostEqual(apply_map(first, 0.0), 0.0)
        self.assertAlmostEqual(apply_map(first, 1.0), 0.3)

    def test_even_cell_flips(self):
        second = self.maps[1]
        self.assertEqual(second.parity, 'even')
        self.assertAlmostEqual(apply_map(second, 0.0), 1.0)
        self.assertAlmostEqual(apply_map(second, 1.0), 0.3)

    def test_contraction_is_width_ratio(self):
        self.assertAlmostEqual(self.maps[0].cell_contraction, 0.3)
        self.assertAlmostEqual(self.maps[1].cell_contraction, 0.7)

    def test_inverse_round_trip(self):
        x = np.linspace(0, 1, 11)
        for M in self.maps:
            back = apply_map(M, apply_map(M, x), direction='inverse')
            np.testing.assert_allclose(back, x, atol=1e-15)

    def test_outside_domain(self):
        with self.assertRaises(OutOfDomain):
            apply_map(self.maps[0], 1.5)
        with self.assertRaises(OutOfDomain):
            apply_map(self.maps[0], 0.5, direction='inverse')

    def test_unknown_direction(self):
        with self.assertRaises(ValueError):
            apply_map(self.maps[0], 0.5, direction='sideways')


class SharedPointTests(SimpleTestCase):
    def test_shared_point_is_an_axis_endpoint(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            grid = random_grid(rng, 1, max_cells=6)
            P = grid.axes[0]
            report = verify_shared_point(P, build_axis_maps(P))
            self.assertEqual(report['status'], 'pass')
            self.assertEqual(len(report['checks']), P.N - 1)
            for check in report['checks']:
                endpoint = P.b if check['knot_index'] % 2 == 1 else P.a
                self.assertAlmostEqual(check['shared_point'], endpoint, places=12)

    def test_unflipped_maps_violate_shared_point(self):
        P = build_axis_partition([0, 0.5, 1])
        maps = [
            AffineCellMap(0, 1, 0.5, 0.0, (0, 1), (0, 0.5)),
            AffineCellMap(0, 2, 0.5, 0.5, (0, 1), (0.5, 1)),
        ]
        with self.assertRaises(SharedPointViolation) as caught:
            verify_shared_point(P, maps)
        self.assertEqual(caught.exception.details['knot_index'], 1)


class ProductCellMapTests(SimpleTestCase):
    def test_every_cell_is_covered(self):
        grid = build_grid([[0, 0.5, 1], [0, 1, 2, 3]])
        maps = build_cell_maps(grid)
        self.assertEqual(len(maps), 6)
        lower, upper = grid.cell_bounds((2, 3))
        images = maps[(2, 3)].forward(grid.corner_points())
        np.testing.assert_allclose(images.min(axis=0), lower)
        np.testing.assert_allclose(images.max(axis=0), upper)

    def test_forward_inverse_round_trip(self):
        rng = np.random.default_rng(11)
        grid = random_grid(rng, 3)
        points = rng.uniform(grid.lower, grid.upper, (50, 3))
        for cell_map in build_cell_maps(grid).values():
            np.testing.assert_allclose(cell_map.inverse(cell_map.forward(points)), points, atol=1e-12)
            self.assertLess(cell_map.contraction, 1.0)

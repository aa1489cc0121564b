import time

import numpy as np
from django.test import SimpleTestCase

from fractal_interp.alpha_fractal import (
    BaseFunction,
    ScalingFunction,
    SeedFunction,
    build_alpha_system,
    construct_alpha_fractal,
    make_corner_base,
)
from fractal_interp.domain_grid import DataTensor, SampledFunction, build_grid, sup_distance, tau
from fractal_interp.errors import (
    ConstraintsUnverified,
    ContractionViolation,
    DataConstraintViolation,
    DepthTooLarge,
    InvalidParameter,
    MatchingViolation,
    NotConverged,
)
from fractal_interp.rb_core import (
    FifSystem,
    VerticalMap,
    apply_rb_operator,
    build_pullback_plan,
    check_contraction,
    estimate_y_contraction,
    random_admissible,
    sample_attractor,
    self_referential_residual,
    solve_fif,
    verify_data_constraints,
    verify_matching_conditions,
    verify_system,
    verify_well_definedness,
)

from .support import desk_grid, desk_seed, random_grid, uniform_grid


def affine_system(grid, y, scalings, offset=0.0, refinement=16):
    """Classical 1D affine FIF: F_i(x, y) = d_i y + q_i(x) with q_i linear"""
    P = grid.axes[0]
    y = np.asarray(y, dtype=float)
    maps = []
    for i, d in zip(grid.sigma(0), scalings):
        start = y[tau(i, 0, P.N)] - d * y[0] + offset
        end = y[tau(i, P.N, P.N)] - d * y[-1]

        def evaluator(points, values, d=d, start=start, end=end):
            t = (points[:, 0] - P.a) / P.width
            return d * values + start + (end - start) * t

        maps.append(VerticalMap((i,), evaluator, abs(d), label=f'affine {i}'))
    return FifSystem(grid, DataTensor(grid, y), maps, label='affine', refinement=refinement)


class GenericVerticalMapTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(5)
        self.grid = build_grid([[0.0, 0.3, 0.6, 1.0]])
        self.y = self.rng.normal(size=4)

    def test_affine_fif_interpolates_data(self):
        # one shared scaling: matching on a shared face must hold for every y
        system = affine_system(self.grid, self.y, [-0.4, -0.4, -0.4], refinement=32)
        report = verify_system(system, rng=self.rng)
        self.assertEqual(report['matching']['face_count'], 2)
        fif, diagnostics = solve_fif(system, tol=1e-12)
        self.assertTrue(diagnostics.converged)
        self.assertEqual(diagnostics.refinement, 32)
        np.testing.assert_allclose(fif.node_values(), self.y, atol=1e-9)
        nodes = self.grid.node_points()
        self.assertLessEqual(self_referential_residual(fif, system, nodes), 1e-9)

    def test_different_scalings_break_matching(self):
        grid = build_grid([[0.0, 0.5, 1.0]])
        system = affine_system(grid, [0.0, 1.0, 0.5], [0.3, 0.5])
        with self.assertRaises(MatchingViolation) as caught:
            verify_matching_conditions(system, rng=self.rng)
        self.assertIn('Eq. (2.8)', caught.exception.message)

    def test_shifted_offset_breaks_data_constraint(self):
        system = affine_system(self.grid, self.y, [0.3, -0.4, 0.5], offset=0.1)
        with self.assertRaises(DataConstraintViolation):
            verify_data_constraints(system.vertical_maps[(1,)], self.grid, system.data)

    def test_gamma_must_be_below_one(self):
        with self.assertRaises(ContractionViolation):
            VerticalMap((1,), lambda points, y: y, 1.0)

    def test_understated_gamma_is_detected(self):
        F = VerticalMap((1,), lambda points, y: 0.8 * y, 0.5)
        with self.assertRaises(ContractionViolation):
            estimate_y_contraction(F, 50, self.grid, refinement=8, rng=self.rng)

    def test_solve_refuses_unverified_system(self):
        system = affine_system(self.grid, self.y, [0.3, -0.4, 0.5])
        with self.assertRaises(ConstraintsUnverified):
            solve_fif(system)
        fif, _ = solve_fif(system, tol=1e-10, waive_verification=True)
        np.testing.assert_allclose(fif.node_values(), self.y, atol=1e-9)

    def test_plan_needs_positive_refinement(self):
        system = affine_system(self.grid, self.y, [0.3, -0.4, 0.5])
        with self.assertRaises(InvalidParameter):
            build_pullback_plan(system, 0)


class AlphaSystemPropertyTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(2024)

    def random_instance(self, n):
        grid = random_grid(self.rng, n)
        seed = SeedFunction.random_polynomial(n, self.rng)
        alpha = float(self.rng.uniform(-0.7, 0.7))
        return grid, seed, alpha

    def test_node_interpolation_in_one_two_and_three_dimensions(self):
        for n, refinement in ((1, 32), (2, 8), (3, 4)):
            for _ in range(4):
                grid, seed, alpha = self.random_instance(n)
                result = construct_alpha_fractal(
                    seed, grid, alpha, tol=1e-11, refinement=refinement, rng=self.rng,
                )
                self.assertLessEqual(result.node_residual(seed), 1e-9)

    def test_contraction_on_random_pairs(self):
        for n, refinement in ((1, 16), (2, 6)):
            grid, seed, alpha = self.random_instance(n)
            system = build_alpha_system(
                seed, alpha, make_corner_base(seed, grid), grid, refinement=refinement, rng=self.rng,
            )
            report = check_contraction(system, pairs=100, rng=self.rng)
            self.assertLessEqual(report['max_ratio'], system.gamma_max + 1e-12)

    def test_well_definedness_on_shared_faces(self):
        grid, seed, alpha = self.random_instance(2)
        system = build_alpha_system(seed, alpha, make_corner_base(seed, grid), grid, refinement=8, rng=self.rng)
        start = SampledFunction.from_data(system.data, 8)
        report = verify_well_definedness(system, start, probes=200, rng=self.rng)
        self.assertLessEqual(report['max_difference'], 1e-10)

    def test_rb_operator_keeps_node_values(self):
        grid, seed, alpha = self.random_instance(2)
        system = build_alpha_system(seed, alpha, make_corner_base(seed, grid), grid, refinement=6, rng=self.rng)
        g = random_admissible(system, 6, self.rng)
        Tg = apply_rb_operator(system, g, workers=2)
        np.testing.assert_allclose(Tg.node_values(), system.data.values, atol=1e-12)

    def test_self_referential_residual_at_nodes(self):
        grid, seed, alpha = self.random_instance(2)
        result = construct_alpha_fractal(seed, grid, alpha, tol=1e-11, refinement=8, rng=self.rng)
        residual = self_referential_residual(result.function, result.system, grid.node_points())
        self.assertLessEqual(residual, 1e-9)

    def test_self_referential_residual_on_the_lattice(self):
        grid = uniform_grid(2)
        seed = SeedFunction.random_polynomial(2, self.rng)
        result = construct_alpha_fractal(seed, grid, 0.4, tol=1e-11, refinement=8, rng=self.rng)
        lattice = result.function.lattice_points()
        chosen = lattice[self.rng.choice(lattice.shape[0], 200, replace=False)]
        self.assertLessEqual(self_referential_residual(result.function, result.system, chosen), 1e-9)


class RbOperatorTests(SimpleTestCase):
    def setUp(self):
        self.grid = desk_grid()
        self.seed = desk_seed()

    def test_base_is_mapped_to_the_seed(self):
        base = make_corner_base(self.seed, self.grid)
        system = build_alpha_system(self.seed, 0.4, base, self.grid, refinement=64)
        Tg = apply_rb_operator(system, SampledFunction.from_function(self.grid, 64, base))
        self.assertAlmostEqual(float(Tg(np.array([[0.25]]))[0]), 0.0625, places=12)
        self.assertLessEqual(sup_distance(Tg, self.seed.sample(self.grid, 64)), 1e-12)

    def test_seed_as_base_is_fixed(self):
        base = BaseFunction(self.seed, label='seed')
        system = build_alpha_system(self.seed, 0.4, base, self.grid, refinement=64)
        f = self.seed.sample(self.grid, 64)
        self.assertLessEqual(sup_distance(apply_rb_operator(system, f), f), 1e-12)


class BanachIterationTests(SimpleTestCase):
    def test_geometric_rate_matches_scaling(self):
        grid = desk_grid()
        seed = desk_seed()
        system = build_alpha_system(seed, 0.5, make_corner_base(seed, grid), grid, refinement=64)
        _, diagnostics = solve_fif(system, tol=1e-10)
        self.assertTrue(diagnostics.converged)
        self.assertLessEqual(diagnostics.iterations, 40)
        self.assertAlmostEqual(diagnostics.fitted_rate, 0.5, delta=0.05)
        self.assertAlmostEqual(diagnostics.history[0], 0.1875, places=12)
        self.assertIn('a_posteriori_bound', diagnostics.as_dict())

    def test_fixed_point_does_not_depend_on_the_start(self):
        rng = np.random.default_rng(8)
        tol = 1e-11
        for grid in (desk_grid(), uniform_grid(2)):
            seed = SeedFunction.random_polynomial(grid.n, rng)
            system = build_alpha_system(seed, 0.4, make_corner_base(seed, grid), grid, refinement=16, rng=rng)
            from_data, _ = solve_fif(system, tol=tol)
            from_random, diagnostics = solve_fif(system, tol=tol, initial=random_admissible(system, 16, rng))
            self.assertTrue(diagnostics.converged)
            self.assertLessEqual(sup_distance(from_data, from_random), 2 * tol)

    def test_a_posteriori_stop_is_within_tol(self):
        system = build_alpha_system(
            desk_seed(), 0.2, make_corner_base(desk_seed(), desk_grid()), desk_grid(), refinement=64,
        )
        loose, diagnostics = solve_fif(system, tol=1e-4)
        tight, _ = solve_fif(system, tol=1e-14)
        self.assertTrue(diagnostics.final_change <= 1e-4 or diagnostics.a_posteriori_bound <= 1e-4)
        self.assertLessEqual(sup_distance(loose, tight), 1e-4)

    def test_not_converged(self):
        grid = desk_grid()
        seed = desk_seed()
        system = build_alpha_system(seed, 0.5, make_corner_base(seed, grid), grid, refinement=64)
        with self.assertRaises(NotConverged) as caught:
            solve_fif(system, tol=1e-15, max_iter=2)
        self.assertEqual(caught.exception.details['iterations'], 2)
        self.assertEqual(caught.exception.exit_code, 3)

    def test_two_dimensional_solve_is_fast(self):
        grid = uniform_grid(2, cells=3)
        seed = SeedFunction(lambda p: p[:, 0] ** 2 + p[:, 1], label='x1^2 + x2')
        system = build_alpha_system(seed, 0.5, make_corner_base(seed, grid), grid, refinement=128)
        start = time.perf_counter()
        fif, diagnostics = solve_fif(system, tol=1e-8)
        elapsed = time.perf_counter() - start
        self.assertEqual(fif.values.shape, (385, 385))
        self.assertTrue(diagnostics.converged)
        self.assertLess(elapsed, 5.0)


class AttractorTests(SimpleTestCase):
    def setUp(self):
        self.grid = desk_grid()
        self.seed = desk_seed()

    def system(self, alpha, refinement=128):
        return build_alpha_system(
            self.seed, alpha, make_corner_base(self.seed, self.grid), self.grid, refinement=refinement,
        )

    def test_depth_is_validated(self):
        system = self.system(0.2, refinement=8)
        with self.assertRaises(InvalidParameter):
            sample_attractor(system, 0)
        with self.assertRaises(DepthTooLarge):
            sample_attractor(system, 5, max_points=10)

    def test_zero_scaling_lands_on_seed_graph(self):
        grid = uniform_grid(2)
        seed = SeedFunction(lambda p: p[:, 0] + 2.0 * p[:, 1] - 1.0, label='linear')
        system = build_alpha_system(seed, ScalingFunction.constant(0.0), make_corner_base(seed, grid), grid,
                                    refinement=4)
        points, values = sample_attractor(system, 1)
        self.assertEqual(points.shape, (9 * 4, 2))
        np.testing.assert_allclose(values, seed(points), atol=1e-12)

    def test_attractor_points_lie_on_the_fif_graph(self):
        system = self.system(0.2)
        fif, _ = solve_fif(system, tol=1e-12)

        points, values = sample_attractor(system, 4)
        self.assertLessEqual(float(np.max(np.abs(values - fif(points)))), 1e-9)

        points, values = sample_attractor(system, 10)
        self.assertEqual(points.shape[0], 3 * 2 ** 10)
        self.assertLessEqual(float(np.max(np.abs(values - fif(points)))), 1e-3)

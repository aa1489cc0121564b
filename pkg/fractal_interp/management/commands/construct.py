from fractal_interp.alpha_fractal import check_perturbation_bounds, construct_alpha_fractal
from fractal_interp.exporters import export_samples, write_json
from fractal_interp.management.base import FifCommand
from fractal_interp.reports import VerificationReports


class Command(FifCommand):
    help = 'Construct the alpha-fractal of the configured seed and export its lattice samples'
    name = 'construct'

    def run(self, config, output, **options):
        solver = config.solver
        self.stdout.write(
            f'Constructing on cells {config.grid.cell_shape} at refinement {solver["refinement"]}...'
        )
        result = construct_alpha_fractal(
            config.seed, config.grid, config.alpha, config.base,
            tol=solver['tol'], refinement=solver['refinement'], max_iter=solver['max_iter'],
            phi=config.phi, phi_lipschitz=config.phi_lipschitz, rng=config.rng(),
        )
        bounds = check_perturbation_bounds(result, config.seed, config.base, config.alpha)

        export_samples(result.function, output / 'fif_samples.csv')
        payload = {
            **result.as_dict(),
            'node_interpolation_error': result.node_residual(config.seed),
            'perturbation_bounds': bounds,
            'verification': result.system.verification,
        }
        write_json(payload, output / 'diagnostics.json')

        diagnostics = result.diagnostics
        self.stdout.write(VerificationReports.render('Solve', {
            'iterations': diagnostics.iterations,
            'final_change': diagnostics.final_change,
            'a_posteriori_bound': diagnostics.a_posteriori_bound,
            'fitted_rate': diagnostics.fitted_rate,
            'gamma_max': diagnostics.contraction_estimate,
        }))
        self.stdout.write(VerificationReports.render('Perturbation bounds', bounds))
        self.stdout.write(
            self.style.SUCCESS(f'Wrote {output / "fif_samples.csv"} and {output / "diagnostics.json"}')
        )

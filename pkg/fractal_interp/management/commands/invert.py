from fractal_interp.domain_grid import SampledFunction, sup_distance
from fractal_interp.exporters import export_samples, write_json
from fractal_interp.fractal_operator import apply_fractal_operator, invert_fractal_operator
from fractal_interp.management.base import FifCommand
from fractal_interp.reports import VerificationReports


class Command(FifCommand):
    help = 'Recover f from a target g = F(f) by the inverse fixed-point iteration'
    name = 'invert'

    def run(self, config, output, **options):
        solver = config.solver
        m = solver['refinement']
        L = config.operator
        target = config.invert_target(m)
        forward = target is None
        if forward:
            # round trip: invert F applied to the seed and compare with the seed
            target = apply_fractal_operator(
                L, config.alpha, config.grid, config.seed,
                tol=solver['tol'], refinement=m, max_iter=solver['max_iter'], rng=config.rng(),
            ).function

        recovered, report = invert_fractal_operator(
            target, L, config.alpha, config.grid, tol=solver['tol'], max_iter=solver['max_iter'],
            lipschitz=config.block('invert').get('lipschitz'), rng=config.rng(),
        )
        if forward:
            seed = SampledFunction.from_function(config.grid, m, config.seed)
            report['round_trip_error'] = sup_distance(recovered.sampled, seed)

        export_samples(recovered.sampled, output / 'recovered.csv')
        write_json({'config': config.describe(), 'target': 'forward' if forward else 'given', **report},
                   output / 'invert.json')

        self.stdout.write(VerificationReports.render(
            'Inversion', {key: value for key, value in report.items() if key != 'history'},
        ))
        self.stdout.write(self.style.SUCCESS(f'Wrote {output / "recovered.csv"}'))

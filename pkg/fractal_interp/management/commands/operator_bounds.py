from fractal_interp.exporters import write_json
from fractal_interp.fractal_operator import (
    check_admissible,
    check_fixed_set,
    verify_linearity,
    verify_relative_bounds,
)
from fractal_interp.management.base import FifCommand
from fractal_interp.reports import VerificationReports


class Command(FifCommand):
    help = 'Check admissibility and the relative bounds of the fractal operator for the configured L'
    name = 'operator-bounds'

    def run(self, config, output, **options):
        solver = config.solver
        L = config.operator
        samples, pairs = config.operator_samples()
        self.stdout.write(f'Operator {L.name}: {len(samples)} samples, {len(pairs)} pairs')

        payload = {'config': config.describe()}
        payload['admissibility'] = check_admissible(L, samples, config.grid)
        payload['relative_bounds'] = verify_relative_bounds(
            L, config.alpha, config.grid, samples, pairs,
            tol=solver['tol'], refinement=solver['refinement'], rng=config.rng(),
        ).as_dict()

        if L.linear and len(samples) >= 2:
            c = config.block('operator_bounds').get('linearity_c', 2.0)
            payload['linearity'] = verify_linearity(
                L, config.alpha, config.grid, samples[0], samples[1], c,
                tol=solver['tol'], refinement=solver['refinement'], rng=config.rng(),
            )
        else:
            payload['linearity'] = {'status': 'skipped', 'linear': L.linear}

        payload['fixed_set'] = check_fixed_set(
            L, config.alpha, config.grid, config.seed,
            tol=solver['tol'], refinement=solver['refinement'], rng=config.rng(),
        )
        write_json(payload, output / 'operator_bounds.json')

        shown = {key: value for key, value in payload.items() if key != 'config'}
        shown['admissibility'] = {key: value for key, value in shown['admissibility'].items() if key != 'residuals'}
        self.stdout.write(VerificationReports.render('Operator bounds', shown))
        self.stdout.write(self.style.SUCCESS(f'Wrote {output / "operator_bounds.json"}'))

from fractal_interp.alpha_fractal import convergence_study
from fractal_interp.exporters import export_table, write_json
from fractal_interp.management.base import FifCommand


class Command(FifCommand):
    help = 'Error table of the alpha-fractal along a sequence of scalings or bases'
    name = 'study'

    def run(self, config, output, **options):
        sweep, sequence = config.study_sequences()
        solver = config.solver
        arguments = {'alphas': sequence} if sweep == 'alpha' else {'bases': sequence, 'alpha': config.alpha}
        self.stdout.write(f'Running {len(sequence)} solves over the {sweep} sequence...')

        table, slope = convergence_study(
            config.seed, config.grid, b=config.base, tol=solver['tol'],
            refinement=solver['refinement'], max_iter=solver['max_iter'], rng=config.rng(),
            **arguments,
        )
        export_table(table, output / 'study.csv')
        write_json({'sweep': sweep, 'log_error_slope': slope, 'rows': len(table)}, output / 'study.json')

        self.stdout.write(table.to_string(index=False))
        slope_text = 'n/a' if slope is None else f'{slope:.4f}'
        self.stdout.write(self.style.SUCCESS(f'log-error slope {slope_text}; wrote {output / "study.csv"}'))

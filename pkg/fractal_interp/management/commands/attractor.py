import numpy as np

from fractal_interp.alpha_fractal import build_alpha_system
from fractal_interp.exporters import export_samples, write_json
from fractal_interp.management.base import FifCommand
from fractal_interp.rb_core import sample_attractor, solve_fif


class Command(FifCommand):
    help = 'Sample the graph attractor by deterministic iteration of the IFS'
    name = 'attractor'

    def add_command_arguments(self, parser):
        parser.add_argument('--depth', type=int, help='override attractor.depth')

    def run(self, config, output, **options):
        solver = config.solver
        depth = options.get('depth') or config.block('attractor').get('depth', 6)
        system = build_alpha_system(
            config.seed, config.alpha, config.base, config.grid,
            refinement=solver['refinement'], phi=config.phi,
            phi_lipschitz=config.phi_lipschitz, rng=config.rng(),
        )
        points, values = sample_attractor(system, depth)
        fif, diagnostics = solve_fif(
            system, tol=solver['tol'], max_iter=solver['max_iter'], refinement=solver['refinement'],
        )
        consistency = float(np.max(np.abs(values - fif(points))))

        export_samples((points, values), output / 'attractor.csv')
        write_json({
            'config': config.describe(),
            'depth': depth,
            'points': int(points.shape[0]),
            'max_graph_distance': consistency,
            'diagnostics': diagnostics.as_dict(),
        }, output / 'attractor.json')

        self.stdout.write(f'{points.shape[0]} points at depth {depth}; max |y - f(X)| = {consistency:.3e}')
        self.stdout.write(self.style.SUCCESS(f'Wrote {output / "attractor.csv"}'))

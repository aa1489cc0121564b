import logging
import sys
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from fractal_interp.config import load_config
from fractal_interp.error_handlers import ErrorHandlerMixin
from fractal_interp.errors import EXIT_USAGE, ConfigIoError, FifError
from fractal_interp.monitoring import PerformanceMonitor

logger = logging.getLogger(__name__)


class FifCommand(ErrorHandlerMixin, BaseCommand):
    """Shared surface of the fif commands: config path, -o and solver overrides"""

    requires_system_checks = []
    output_required = True
    name = 'fif'

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # bad arguments must exit 1, not argparse's 2 (reserved for verification failures)
        parser.called_from_command_line = False
        return parser

    def run_from_argv(self, argv):
        try:
            return super().run_from_argv(argv)
        except CommandError as error:
            # only parser errors get here; execute() errors exit inside Django
            self.stderr.write(f'Error: {error}')
            sys.exit(EXIT_USAGE)

    def add_arguments(self, parser):
        parser.add_argument('config', help='JSON run configuration')
        parser.add_argument(
            '-o', '--output',
            help='directory for the artifacts' + ('' if self.output_required else ' (optional)'),
        )
        parser.add_argument('--tol', type=float, help='override solver.tol')
        parser.add_argument('--max-iter', type=int, dest='max_iter', help='override solver.max_iter')
        parser.add_argument('--refine', type=int, help='override solver.refinement')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'])
            config.override_solver(options['tol'], options['max_iter'], options['refine'])
            output = self.prepare_output(options['output'])
            extra = {key: value for key, value in options.items() if key not in ('config', 'output')}
            with PerformanceMonitor.timed(self.name):
                self.run(config, output, **extra)
        except FifError as error:
            raise self.handle_error(error, command=self.name) from error

        summary = PerformanceMonitor.get_summary(self.name)
        self.stdout.write(f'{self.name} finished in {summary["last_seconds"]:.2f} seconds')

    def prepare_output(self, output):
        if output is None:
            if self.output_required:
                raise CommandError(f'{self.name} needs -o/--output', returncode=EXIT_USAGE)
            return None
        path = Path(output)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigIoError(f'cannot create output directory {path}: {exc}', path=str(path)) from exc
        return path

    def run(self, config, output, **options):
        raise NotImplementedError

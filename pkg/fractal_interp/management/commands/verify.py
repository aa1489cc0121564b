from fractal_interp.exporters import write_json
from fractal_interp.management.base import FifCommand
from fractal_interp.reports import VerificationReports


class Command(FifCommand):
    help = 'Run the full verification suite on the configured alpha-fractal'
    name = 'verify'
    output_required = False

    def add_command_arguments(self, parser):
        parser.add_argument('--probes', type=int, help='shared-face probes for the well-definedness check')
        parser.add_argument('--pairs', type=int, help='random pairs for the contraction check')

    def run(self, config, output, **options):
        report, failure = VerificationReports.run_suite(
            config, probes=options.get('probes'), pairs=options.get('pairs'),
        )
        if output is not None:
            write_json(report, output / 'verification.json')

        self.stdout.write(VerificationReports.render_steps(report))
        if failure is not None:
            self.stdout.write(self.style.ERROR(f'Verification failed: {failure.message}'))
            raise failure
        self.stdout.write(self.style.SUCCESS('All verification checks passed'))

"""Entry point for the installed `fif` console script."""
import os
import sys

# Command spellings on the fif surface that are not valid module names
COMMAND_ALIASES = {
    'operator-bounds': 'operator_bounds',
}


def main(argv=None):
    """Run a fif command: `fif construct cfg.json -o out/`."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'fractal_project.settings')
    from django.core.management import execute_from_command_line

    argv = list(sys.argv if argv is None else argv)
    argv[0] = 'fif'
    if len(argv) > 1:
        argv[1] = COMMAND_ALIASES.get(argv[1], argv[1])
    execute_from_command_line(argv)


if __name__ == '__main__':
    main()

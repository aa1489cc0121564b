from django.core.management.base import CommandError
import logging

from .errors import SolverFailure, VerificationFailure

logger = logging.getLogger(__name__)


class ErrorHandlerMixin:
    """Mixin for consistent error handling in management commands"""

    def handle_error(self, error, command=None):
        """Log a library error and build the CommandError carrying its exit code"""
        error_messages = {
            'schema_error': 'The configuration file is invalid.',
            'cross_field_error': 'The configuration is inconsistent.',
            'io_error': 'A file could not be read or written.',
            'syntax_error': 'An expression could not be parsed.',
            'unknown_identifier': 'An expression uses an unknown name.',
            'expression_domain_error': 'An expression is undefined on the domain.',
            'constraints_unverified': 'The system was not verified before solving.',
            'depth_too_large': 'The attractor depth exceeds the point cap.',
            'operator_not_linear': 'The operator is not declared linear.',
            'base_corner_mismatch': 'The base function does not match the seed at the corners.',
            'scaling_bound_violation': 'The scaling function exceeds its declared bound.',
            'bound_violation': 'A proven error bound does not hold.',
            'verification_failure': 'A verification check failed.',
            'not_converged': 'The fixed-point iteration did not converge.',
            'general': 'The command could not run.',
        }

        error_type = error.error_code
        if error_type not in error_messages:
            if isinstance(error, VerificationFailure):
                error_type = 'verification_failure'
            elif isinstance(error, SolverFailure):
                error_type = 'not_converged'
            else:
                error_type = 'general'

        log_solver_error(command, error)
        return CommandError(
            f'{error_messages[error_type]} [{error.error_code}] {error.message}',
            returncode=error.exit_code,
        )


def log_solver_error(command, error, details=None):
    """Log failed constructions and verifications"""
    logger.error(
        f"Solver error - Command: {command}, Code: {error.error_code}, "
        f"Error: {error.message}, Details: {details or error.details}"
    )

"""Exception hierarchy for fractal_interp.

Every error carries a stable ``error_code`` and the process ``exit_code`` the
CLI reports for it: 1 for usage/config problems, 2 for verification failures,
3 for solver non-convergence.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION = 2
EXIT_NOT_CONVERGED = 3


class FifError(Exception):
    """Base class for all library errors"""

    error_code = 'general'
    exit_code = EXIT_USAGE

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def as_dict(self):
        return {
            'error_code': self.error_code,
            'message': self.message,
            'details': {key: _plain(value) for key, value in self.details.items()},
        }


def _plain(value):
    # numpy scalars/arrays and tuples into JSON-friendly values
    if hasattr(value, 'tolist'):
        return value.tolist()
    if isinstance(value, tuple):
        return [_plain(item) for item in value]
    return value


class UsageError(FifError):
    """Bad input, configuration or call sequence"""

    exit_code = EXIT_USAGE


class VerificationFailure(FifError):
    """A constraint or theorem-level inequality does not hold"""

    error_code = 'verification_failure'
    exit_code = EXIT_VERIFICATION


class SolverFailure(FifError):
    exit_code = EXIT_NOT_CONVERGED


# domain_grid
class NonMonotonicKnots(UsageError):
    error_code = 'non_monotonic_knots'


class TooFewKnots(UsageError):
    error_code = 'too_few_knots'


class NonFiniteKnot(UsageError):
    error_code = 'non_finite_knot'


class NonFiniteValue(UsageError):
    error_code = 'non_finite_value'


class IndexOutOfRange(UsageError):
    error_code = 'index_out_of_range'


class PointOutsideDomain(UsageError):
    error_code = 'point_outside_domain'


class LatticeMismatch(UsageError):
    error_code = 'lattice_mismatch'


class InvalidParameter(UsageError):
    error_code = 'invalid_parameter'


# ifs_maps
class OutOfDomain(UsageError):
    error_code = 'out_of_domain'


class SharedPointViolation(VerificationFailure):
    error_code = 'shared_point_violation'


# rb_core
class DataConstraintViolation(VerificationFailure):
    error_code = 'data_constraint_violation'


class ContractionViolation(VerificationFailure):
    error_code = 'contraction_violation'


class MatchingViolation(VerificationFailure):
    error_code = 'matching_violation'


class WellDefinednessViolation(VerificationFailure):
    error_code = 'well_definedness_violation'


class ConstraintsUnverified(UsageError):
    error_code = 'constraints_unverified'


class DepthTooLarge(UsageError):
    error_code = 'depth_too_large'


class NotConverged(SolverFailure):
    error_code = 'not_converged'


# alpha_fractal
class BaseCornerMismatch(VerificationFailure):
    error_code = 'base_corner_mismatch'


class ScalingBoundViolation(VerificationFailure):
    error_code = 'scaling_bound_violation'


class BoundViolation(VerificationFailure):
    error_code = 'bound_violation'


# fractal_operator
class NotAdmissible(VerificationFailure):
    error_code = 'not_admissible'


class LinearityViolation(VerificationFailure):
    error_code = 'linearity_violation'


class ContractionConditionFailed(VerificationFailure):
    error_code = 'contraction_condition_failed'


class DegeneratePair(UsageError):
    error_code = 'degenerate_pair'


class OperatorNotLinear(UsageError):
    error_code = 'operator_not_linear'


# cli_io
class ExpressionSyntaxError(UsageError):
    error_code = 'syntax_error'

    def __init__(self, message, position, expected=None):
        super().__init__(message, position=position, expected=expected)
        self.position = position
        self.expected = expected


class UnknownIdentifier(UsageError):
    error_code = 'unknown_identifier'


class ExpressionDomainError(UsageError):
    error_code = 'expression_domain_error'


class ConfigIoError(UsageError):
    error_code = 'io_error'


class SchemaError(UsageError):
    error_code = 'schema_error'

    def __init__(self, message, field_path):
        super().__init__(f'{field_path}: {message}', field_path=field_path)
        self.field_path = field_path


class CrossFieldError(UsageError):
    error_code = 'cross_field_error'

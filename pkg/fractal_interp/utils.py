import logging

import numpy as np
from django.conf import settings

logger = logging.getLogger(__name__)

# Fallbacks when the library is used without Django settings configured;
# kept equal to fractal_project/settings.py
SETTING_DEFAULTS = {
    'FIF_DEFAULT_TOL': 1e-8,
    'FIF_DEFAULT_MAX_ITER': 200,
    'FIF_DEFAULT_REFINEMENT': 64,
    'FIF_WORKERS': 4,
    'FIF_IDENTITY_TOL': 1e-10,
    'FIF_DOMAIN_TOL': 1e-12,
    'FIF_BOUND_SLACK': 1e-8,
    'FIF_MATCHING_SAMPLES': 50,
    'FIF_MATCHING_Y_VALUES': 5,
    'FIF_ATTRACTOR_MAX_POINTS': 2_000_000,
}


def solver_setting(name, value=None):
    """Return ``value`` if given, else the project setting ``name``"""
    if value is not None:
        return value
    if settings.configured:
        return getattr(settings, name, SETTING_DEFAULTS[name])
    return SETTING_DEFAULTS[name]


class RateEstimator:
    """Fits geometric decay rates and log-error slopes"""

    @staticmethod
    def geometric_rate(history, tail=None):
        """Fitted per-step ratio of a geometrically decaying sequence.

        Zeros (exact convergence on the lattice) and values at round-off level
        are dropped before fitting. Returns None with fewer than 3 usable values.
        """
        values = np.asarray(history, dtype=float)
        if tail is not None:
            values = values[-tail:]
        steps = np.arange(values.size)
        usable = values > 1e-14
        if usable.sum() < 3:
            return None
        slope = np.polyfit(steps[usable], np.log(values[usable]), 1)[0]
        return float(np.exp(slope))

    @staticmethod
    def log_slope(x, errors):
        """Slope of log(error) against x (natural log)"""
        x = np.asarray(x, dtype=float)
        errors = np.asarray(errors, dtype=float)
        usable = errors > 0
        if usable.sum() < 2:
            return None
        return float(np.polyfit(x[usable], np.log(errors[usable]), 1)[0])

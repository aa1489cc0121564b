"""
Django settings for the fractal_project project.

The project has no web surface: it exists to host the fractal_interp app,
its management commands (the `fif` CLI) and the solver defaults below.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/5.0/ref/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Optional overrides for the FIF_* values below
load_dotenv(BASE_DIR / '.env')

# Only used by Django internals (no sessions, no signing of user data)
SECRET_KEY = os.environ.get('FIF_SECRET_KEY', 'fractal-interp-local-only')

DEBUG = os.environ.get('FIF_DEBUG', '0') == '1'

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'fractal_interp',
]

# No database: runs are files in, files out
DATABASES = {}

CACHES = {
    'default': {
        'BACKEND': 'django.core.cache.backends.locmem.LocMemCache',
        'LOCATION': 'fractal-interp-metrics',
    }
}

# Internationalization
# https://docs.djangoproject.com/en/5.0/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


def _env_float(name, default):
    return float(os.environ.get(name, default))


def _env_int(name, default):
    return int(os.environ.get(name, default))


# Solver defaults
FIF_DEFAULT_TOL = _env_float('FIF_DEFAULT_TOL', 1e-8)
FIF_DEFAULT_MAX_ITER = _env_int('FIF_DEFAULT_MAX_ITER', 200)
FIF_DEFAULT_REFINEMENT = _env_int('FIF_DEFAULT_REFINEMENT', 64)
FIF_WORKERS = _env_int('FIF_WORKERS', 4)

# Verification tolerances
FIF_IDENTITY_TOL = _env_float('FIF_IDENTITY_TOL', 1e-10)
FIF_DOMAIN_TOL = _env_float('FIF_DOMAIN_TOL', 1e-12)
FIF_BOUND_SLACK = _env_float('FIF_BOUND_SLACK', 1e-8)
FIF_MATCHING_SAMPLES = _env_int('FIF_MATCHING_SAMPLES', 50)
FIF_MATCHING_Y_VALUES = _env_int('FIF_MATCHING_Y_VALUES', 5)
FIF_ATTRACTOR_MAX_POINTS = _env_int('FIF_ATTRACTOR_MAX_POINTS', 2_000_000)

FIF_LOG_LEVEL = os.environ.get('FIF_LOG_LEVEL', 'INFO')

# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'level': FIF_LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
        'file': {
            'level': 'ERROR',
            'class': 'logging.FileHandler',
            'filename': os.environ.get('FIF_ERROR_LOG', 'fif_errors.log'),
            'delay': True,
            'formatter': 'simple',
        },
    },
    'loggers': {
        'fractal_interp': {
            'handlers': ['console', 'file'],
            'level': FIF_LOG_LEVEL,
            'propagate': False,
        },
    },
}

"""
Django settings for the admissions toolkit.

The project has no web surface: Django provides the app registry, the
management commands that make up the command line, logging configuration
and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Only used by Django internals; nothing here is signed or served.
SECRET_KEY = 'django-insecure-admissions-toolkit-local-only'

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',


    #third party
    'rest_framework',


    #internal apps
    'core',
    'mechanisms',
    'exante',
    'imsim',
    'linker',
    'cli',


]


# Database
# No models are defined; the test suite runs on SimpleTestCase only.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Default primary key field type

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Serializers are only used for validation and structured output.
REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
    'UNAUTHENTICATED_USER': None,
    'COERCE_DECIMAL_TO_STRING': False,
}


# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'core': {'handlers': ['console'], 'level': 'INFO', 'propagate': False},
        'mechanisms': {'handlers': ['console'], 'level': 'INFO', 'propagate': False},
        'exante': {'handlers': ['console'], 'level': 'INFO', 'propagate': False},
        'imsim': {'handlers': ['console'], 'level': 'INFO', 'propagate': False},
        'linker': {'handlers': ['console'], 'level': 'INFO', 'propagate': False},
        'cli': {'handlers': ['console'], 'level': 'INFO', 'propagate': False},
    },
}


# Admissions toolkit configuration
ADMISSIONS = {
    'ENUMERATION_BUDGET': 10 ** 7,
    'DEFAULT_SEED': 20180620,

    'MONTE_CARLO_SIMS': 2000,
    'MONTE_CARLO_DELTAS': (0.2, 0.4, 0.6, 0.8, 1.0),
    'SIGMA_BAND': 3,

    'RANDOM_INSTANCE_COUNT': 1000,
    'REDUCTION_CONFIGS': 100,
    'LINKER_SEEDS': 20,

    'SCHEMA_VERSION': 1,
    'CUTOFF_BASIS': 'final',
}

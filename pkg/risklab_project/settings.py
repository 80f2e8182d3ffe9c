import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django's signing helpers; nothing here is served or signed.
SECRET_KEY = os.environ.get('SECRET_KEY', 'risklab-local-key')

DEBUG = os.environ.get('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    # Third party apps
    'rest_framework',

    # Local apps
    'core',
    'sim',
    'glm',
    'nn',
    'interpret',
    'evaluation',
    'cli',
]

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [BASE_DIR / 'templates'],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [],
        },
    },
]

# No database: datasets are CSV files and fitted models are YAML documents.
DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Template floats are formatted explicitly; keep locale formatting out of reports.
USE_THOUSAND_SEPARATOR = False

REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
}


def _env_int(name, default):
    value = os.environ.get(name)
    return int(value) if value not in (None, '') else default


# Experiment defaults. Every key can be overridden by an experiment file.
RISKLAB = {
    'SEED': _env_int('RISKLAB_SEED', 20240601),
    'THREADS': _env_int('RISKLAB_THREADS', os.cpu_count() or 1),
    'SIM': {
        'n': 1000,
        'intercept': 0.0,
        'noise_sd': 0.1,
        'noise_is_variance': False,
        'target_positive_rate': 0.033,
        'imbalanced_n': 4356,
    },
    'GLM': {
        'penalty': 'none',
        'lam': 0.0,
        'fit_on': 'train',
        'train_fraction': 2 / 3,
        'tol': 1e-8,
        'max_iter': 100,
    },
    'NN': {
        'hidden': [3],
        'imbalanced_hidden': [3, 2],
        'activation': 'sigmoid',
        'activation_a': None,
        'activation_b': None,
        'loss': 'cross_entropy',
        'learning_rate': 0.05,
        'epochs': 200,
        'batch_size': 32,
        'init_scale': 1.0,
        'standardize': True,
    },
    'EVAL': {
        'train_fraction': 2 / 3,
        'imbalanced_train_fraction': 0.75,
        'replicates': 100,
        'duplication': 'before_split',
        'imbalanced_duplication': 'before_split',
        'threshold': 0.5,
        'ci': 'normal',
    },
    'INTERPRET': {
        'permutations': 100,
        'metric': 'p_d',
        'lek_grid': 20,
        'lek_quantiles': [0.0, 0.25, 0.5, 0.75, 1.0],
        'shapley_samples': 50,
        'shapley_rows': 200,
        'lime_features': 3,
        'lime_samples': 500,
        'lime_kernel_width': None,
        'lime_selection': 'forward',
    },
    'OUTPUT': {
        'directory': 'reports',
        'float_digits': 4,
    },
}

# Logging Configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'verbose' if DEBUG else 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': False,
        },
        **{
            app: {
                'handlers': ['console'],
                'level': os.environ.get('RISKLAB_LOG_LEVEL', 'INFO'),
                'propagate': False,
            }
            for app in ('core', 'sim', 'glm', 'nn', 'interpret', 'evaluation', 'cli')
        },
    },
}

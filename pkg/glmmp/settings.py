"""
Runtime settings for glm-mp.

Everything here is read from the environment once, at import time. Experiment
parameters live in YAML files (see ./etc/clipped_cs.yml); this module only holds the
knobs that belong to the machine running the experiments.
"""

import os
import multiprocessing
from pathlib import Path

import sentry_sdk


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

HOSTNAME = os.environ.get('GLM_MP_HOSTNAME', 'localhost')

DEBUG = os.environ.get('GLM_MP_DEBUG') == "1"

# Caps the number of (solver, snr, seed) cells run concurrently.
THREADS = int(os.environ.get('GLM_MP_THREADS') or multiprocessing.cpu_count())

VARIANCE_FLOOR = float(os.environ.get('GLM_MP_VARIANCE_FLOOR', '1e-12'))
VARIANCE_CAP = float(os.environ.get('GLM_MP_VARIANCE_CAP', '1e6'))

OUTPUT_DIR = Path(os.environ.get('GLM_MP_OUTPUT_DIR', './results'))

PRESETS_DIR = BASE_DIR / 'etc'

SLOW_TESTS = os.environ.get('GLM_MP_SLOW_TESTS') == "1"

NO_LOG = {
    'level': 'WARNING',
    'handlers': [],
    'propagate': False,
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'console': {
            # exact format is not important, this is the minimum information
            'format': '%(asctime)s %(name)s [%(levelname)s] %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'console',
        },
    },
    'loggers': {
        '': {
            'level': 'DEBUG' if DEBUG else 'INFO',
            'handlers': [
                'console',
            ],
        },
        'clii': NO_LOG,
    },
}

SENTRY_DSN = os.environ.get('SENTRY_DSN')

if SENTRY_DSN:
    sentry_sdk.init(
        dsn=SENTRY_DSN,
        # Experiment batches are long-running and few; capture every one.
        traces_sample_rate=1.0,
        server_name=HOSTNAME,
    )

"""
Base settings shared across all environments.

The project has no web surface: Django provides the configuration layer,
the management-command CLI, logging and the test runner for the
Deformable Kernel Expansion toolkit.
"""
from pathlib import Path
import os
from dotenv import load_dotenv

# Build paths
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# Load environment variables
load_dotenv(os.path.join(BASE_DIR, '.env'))

# Only used by Django internals (signing); nothing here is served
SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-kernel-expansion-local')

# Application definition
INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "geometry",
    "matching",
    "deformation",
    "kernels",
    "synthgen",
    "evaluation",
    "cli",
]

# No models are defined; commands never touch a database
DATABASES = {}

# Internationalization
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


def _env_float(name, default):
    value = os.getenv(name)
    return float(value) if value not in (None, '') else default


def _env_int(name, default):
    value = os.getenv(name)
    return int(value) if value not in (None, '') else default


def _env_bool(name, default):
    value = os.getenv(name)
    return value.lower() in ('1', 'true', 'yes') if value not in (None, '') else default


# BLAS/OpenMP pools read these once, when numpy is first imported; settings
# load before any app module, so the timing and training figures are
# single-threaded unless DKE_BLAS_THREADS says otherwise.
BLAS_THREADS = _env_int('DKE_BLAS_THREADS', 1)
BLAS_THREAD_VARS = ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS')
for _var in BLAS_THREAD_VARS:
    os.environ.setdefault(_var, str(BLAS_THREADS))


# Pipeline defaults. Every run resolves its RunConfig from these, then the
# --config JSON file, then command-line flags.
DKE = {
    'SEED': _env_int('DKE_SEED', 0),
    'N_VERTICES': _env_int('DKE_N_VERTICES', 128),
    'SHRINK_RATIO': _env_float('DKE_SHRINK_RATIO', 0.4),
    'LOSS': os.getenv('DKE_LOSS', 'obgml'),
    'ITERATIONS': _env_int('DKE_ITERATIONS', 1),
    'IOU_THRESHOLD': _env_float('DKE_IOU_THRESHOLD', 0.5),
    'OUT_DIR': os.getenv('DKE_OUT_DIR', str(BASE_DIR / 'runs')),

    # training
    'LR': _env_float('DKE_LR', 2e-4),
    'POLY_POWER': 0.9,
    'LAMBDA_REG': _env_float('DKE_LAMBDA_REG', 0.25),
    'BATCH_SIZE': _env_int('DKE_BATCH_SIZE', 8),
    'STEPS': _env_int('DKE_STEPS', 2000),
    'LOG_EVERY': _env_int('DKE_LOG_EVERY', 100),
    'CHECKPOINT_EVERY': _env_int('DKE_CHECKPOINT_EVERY', 0),
    'TRAIN_SEGMENTER': _env_bool('DKE_TRAIN_SEGMENTER', False),

    # kernel stage
    'BINARIZE_THRESHOLD': _env_float('DKE_BINARIZE_THRESHOLD', 0.5),
    'MIN_KERNEL_AREA': _env_float('DKE_MIN_KERNEL_AREA', 4.0),
    'KERNEL_NOISE': _env_float('DKE_KERNEL_NOISE', 0.0),
    'UNCLIP_RATIO': _env_float('DKE_UNCLIP_RATIO', 1.5),

    # synthetic data
    'SCENES': _env_int('DKE_SCENES', 200),
    'INSTANCES': _env_int('DKE_INSTANCES', 3),
    'CANVAS': _env_int('DKE_CANVAS', 256),

    # benchmark
    'REPETITIONS': _env_int('DKE_REPETITIONS', 5),
    'SEEDS': _env_int('DKE_SEEDS', 1),
}

LOG_LEVEL = os.getenv('DKE_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': LOG_LEVEL,
    },
}

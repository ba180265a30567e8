"""
Production settings - Debug OFF, file + console logging, strict numerics.
"""
from .base import *

DEBUG = False

# Floating-point problems abort a training run instead of producing NaN curves
NUMPY_ERRSTATE = 'raise'

# Logging - Create logs directory if it doesn't exist
LOG_DIR = os.getenv('DKE_LOG_DIR', str(BASE_DIR / 'logs'))
os.makedirs(LOG_DIR, exist_ok=True)

LOGGING['handlers']['file'] = {
    'level': 'INFO',
    'class': 'logging.FileHandler',
    'filename': f'{LOG_DIR}/kernel_expansion.log',
    'formatter': 'verbose',
}
LOGGING['root']['handlers'] = ['console', 'file']

"""
Development settings - Debug enabled, console logging.
"""
from .base import *

DEBUG = True

# numpy warnings surface during gradient checks; keep them visible locally
NUMPY_ERRSTATE = 'warn'

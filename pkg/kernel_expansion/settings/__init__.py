"""
Settings package initialization.
Imports the appropriate settings based on DJANGO_ENV environment variable.
"""
import os
import sys

ENV = os.getenv('DJANGO_ENV', 'development')

if ENV == 'production':
    from .production import *
else:
    from .development import *

# stderr keeps command output (tables, JSON records) clean for piping
print(f"🔧 Loaded {ENV} settings", file=sys.stderr)

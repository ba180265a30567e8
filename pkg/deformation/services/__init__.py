# Required for Python to recognize this as a package

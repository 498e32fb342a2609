# This file makes 'distdiff' a Python package.

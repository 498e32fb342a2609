# This file makes 'src' a Python package.

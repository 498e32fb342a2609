# This file makes the command-line package importable.

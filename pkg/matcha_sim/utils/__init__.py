"""
matcha-sim Utilities
Error hierarchy, failure reporting and artifact I/O
"""

from .error_reporter import FailureReporter, failure_reporter, handle_failure, exit_code_for
from .io import read_json, write_json, write_csv, read_csv

__all__ = [
    'FailureReporter',
    'failure_reporter',
    'handle_failure',
    'exit_code_for',
    'read_json',
    'write_json',
    'write_csv',
    'read_csv',
]

"""
Failure Reporter - Captures failed commands and runs for later inspection
Doesn't hide anything, just records what broke and maps it to an exit code
"""

import functools
import logging
import threading
import traceback
from collections import deque
from typing import Any, Callable, Dict, Optional

from matcha_sim.constants import ExitCodes
from matcha_sim.utils.errors import InputError, MatchaError, NonFinite, NumericalError

logger = logging.getLogger(__name__)


class FailureReporter:
    """
    Keep a bounded log of failures with simple classification statistics

    @class FailureReporter
    @property {deque} failure_log - Recent failures
    @property {dict} stats - Counters per failure class
    """

    def __init__(self, max_entries: int = 1000):
        """
        Initialize failure reporter

        @param {int} max_entries - Max failure entries kept in memory
        """
        self.failure_log: deque = deque(maxlen=max_entries)
        self.stats = self._empty_stats()
        self._lock = threading.Lock()

    @staticmethod
    def _empty_stats() -> Dict[str, int]:
        return {
            'total_failures': 0,
            'diverged_runs': 0,
            'invalid_input': 0,
            'numerical_failures': 0,
        }

    def report_failure(self,
                       operation: str,
                       error: Exception,
                       context: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Record a failure

        @param {str} operation - What we were trying to do (command or run id)
        @param {Exception} error - What went wrong
        @param {dict} context - Additional context (policy, budget, seed...)
        @returns {dict} Failure record
        """
        record = {
            'operation': operation,
            'error_type': type(error).__name__,
            'error_message': str(error),
            'exit_code': exit_code_for(error),
            'traceback': traceback.format_exc(),
            'context': context or {},
        }
        with self._lock:
            self._classify(record, error)
            self.failure_log.append(record)
            self.stats['total_failures'] += 1

        logger.error(f"FAILED {operation}: {error}")
        return record

    def _classify(self, record: Dict[str, Any], error: Exception):
        if isinstance(error, NonFinite):
            record['diverged'] = True
            record['iteration'] = error.iteration
            self.stats['diverged_runs'] += 1
        if isinstance(error, InputError):
            self.stats['invalid_input'] += 1
        elif isinstance(error, NumericalError):
            self.stats['numerical_failures'] += 1

    def get_summary(self) -> Dict[str, Any]:
        """
        Get summary of recent failures

        @returns {dict} Statistics and the last 10 entries
        """
        with self._lock:
            return {
                'stats': self.stats.copy(),
                'recent_failures': list(self.failure_log)[-10:],
                'total_logged': len(self.failure_log),
            }

    def clear(self):
        with self._lock:
            self.failure_log.clear()
            self.stats = self._empty_stats()


# Global failure reporter instance
failure_reporter = FailureReporter()


def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the CLI exit code

    @param {Exception} error - Raised exception
    @returns {int} 2 for invalid input, 3 for numerical failures, 1 otherwise
    """
    if isinstance(error, MatchaError):
        return error.exit_code
    if isinstance(error, (OSError, ValueError)):
        return ExitCodes.INVALID_CONFIG
    return ExitCodes.FAILURE


def handle_failure(operation: str) -> Callable:
    """
    Decorator for CLI command handlers: report failures and return exit codes

    The wrapped handler returns an int exit code on success; any exception is
    recorded on the global reporter and converted to its exit code.

    @param {str} operation - Name of the command
    @returns {function} Decorator function
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except Exception as e:
                record = failure_reporter.report_failure(
                    operation=operation,
                    error=e,
                    context={'function': func.__name__},
                )
                logger.debug(record['traceback'])
                print(f"❌ {operation} failed: {record['error_type']}: {e}")
                return record['exit_code']
        return wrapper
    return decorator

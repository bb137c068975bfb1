"""
matcha-sim Runtime Configuration
Environment-driven settings (a .env file in the working directory is honoured)
"""

import logging
import os
from dataclasses import dataclass, field

import psutil
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

load_dotenv()

EIGEN_BACKENDS = ("lapack", "jacobi")


def _default_workers() -> int:
    cores = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return int(os.getenv('MATCHA_WORKERS', cores))


@dataclass
class MatchaSimConfig:
    """
    Runtime configuration for matcha-sim

    @class MatchaSimConfig
    @property {str} log_level - Root log level used by the CLI
    @property {int} workers - Parallel runs in a training sweep
    @property {str} eigen_backend - 'lapack' (numpy eigh) or 'jacobi' (cyclic rotations)
    @property {str} float_format - printf-style float format for every CSV artifact
    @property {str} output_dir - Default directory for command artifacts
    """

    log_level: str = field(default_factory=lambda: os.getenv('MATCHA_LOG_LEVEL', 'info').lower())
    workers: int = field(default_factory=_default_workers)
    eigen_backend: str = field(default_factory=lambda: os.getenv('MATCHA_EIGEN_BACKEND', 'lapack').lower())
    float_format: str = field(default_factory=lambda: os.getenv('MATCHA_FLOAT_FORMAT', '%.12g'))
    output_dir: str = field(default_factory=lambda: os.getenv('MATCHA_OUTPUT_DIR', 'runs'))

    def __post_init__(self):
        if self.eigen_backend not in EIGEN_BACKENDS:
            logger.warning(f"Unknown MATCHA_EIGEN_BACKEND={self.eigen_backend!r}, using 'lapack'")
            self.eigen_backend = 'lapack'
        if self.workers < 1:
            self.workers = 1


def get_config() -> MatchaSimConfig:
    """
    Get the current configuration (re-reads the environment)

    @returns {MatchaSimConfig} Current configuration instance
    """
    return MatchaSimConfig()


def print_environment_help():
    """
    Print help for environment variables
    """
    print("""
matcha-sim Environment Variables:

  MATCHA_LOG_LEVEL=info        Log level for CLI commands (debug|info|warning|error)
  MATCHA_WORKERS=<cores>       Parallel training runs (default: physical cores)
  MATCHA_EIGEN_BACKEND=lapack  Symmetric eigensolver for hot paths (lapack|jacobi)
  MATCHA_FLOAT_FORMAT=%.12g    Float format used in every CSV artifact
  MATCHA_OUTPUT_DIR=runs       Default output directory

Examples:
  # Reproduce with the dependency-light Jacobi solver everywhere
  export MATCHA_EIGEN_BACKEND=jacobi

  # Serial sweeps
  export MATCHA_WORKERS=1
""")

"""
matcha-sim - Experiment module
Config loading, the end-to-end pipeline and CLI command handlers
"""

from .config import ExperimentConfig, GraphSpec, ObjectiveSpec

__all__ = ['ExperimentConfig', 'GraphSpec', 'ObjectiveSpec']

"""Command-line experiment runner."""

from .cli import main, run_config
from .scenarios import CATALOGUE, list_scenarios

__all__ = ["CATALOGUE", "list_scenarios", "main", "run_config"]

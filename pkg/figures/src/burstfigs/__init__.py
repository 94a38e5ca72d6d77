"""Figure regeneration from superburst output files."""

from .render import RECIPES, render

__version__ = "0.1.0"

"""Figure rendering for fiber-model evaluation and simulation CSVs.

Thin plotting layer: every number comes from the CSVs produced by the
`fiberfrp` command line; nothing is recomputed here beyond grouping and
averaging raw symbol columns for the constellation view.
"""

from .render import FAMILIES, FigureSpec, render

__version__ = "0.1.0"

__all__ = ["FigureSpec", "render", "FAMILIES"]

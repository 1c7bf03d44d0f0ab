"""Rendering of bakerskew CSV outputs into figure panels.

This package only reads the documented CSV files; it never recomputes
dynamics.  See render.py for the figure-spec schema.
"""

from .render import FigureSpec, load_spec, render_figure

__version__ = "0.1.0"

__all__ = ["FigureSpec", "load_spec", "render_figure", "__version__"]

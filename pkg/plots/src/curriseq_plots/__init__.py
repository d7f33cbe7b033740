"""Render training-toolkit CSV logs as figures.

Consumes only the documented CSV schemas emitted by the curriseq CLI (no
model or checkpoint access): learning curves, unique-trigram diversity
curves, positional error-rate bars, and the schedule weight heatmap.
"""

from .render import PlotSpec, render, render_all

__version__ = "0.1.0"
__all__ = ["PlotSpec", "render", "render_all", "__version__"]

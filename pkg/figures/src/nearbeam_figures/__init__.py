"""Offline figure rendering for nearbeam simulation outputs."""

from .plots import PLOT_KINDS, PlotSpec, SchemaError, render

__all__ = ["PLOT_KINDS", "PlotSpec", "SchemaError", "render"]

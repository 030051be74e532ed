"""Figures for ghlab experiment CSVs (CSV-coupled only)."""

from .figures import KINDS, FigureSpec, RenderInfo, SchemaError, render

__all__ = ["KINDS", "FigureSpec", "RenderInfo", "SchemaError", "render"]

__version__ = "0.1.0"

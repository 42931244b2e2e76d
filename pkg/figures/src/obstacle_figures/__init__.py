from .render import KINDS, FigureError, FigureSpec, render

__all__ = ["FigureSpec", "FigureError", "render", "KINDS"]
__version__ = "0.1.0"

"""Motion-aware next-best-view planning for reconstructing a moving object."""

__version__ = "0.1.0"

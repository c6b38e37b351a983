"""Data pruning with knowledge distillation, plus the ridge self-distillation
bias analysis that motivates it."""

__version__ = "0.1.0"

from .backend import ACTIVE_BACKEND

__all__ = ["ACTIVE_BACKEND", "__version__"]

"""Robust Catoni estimation and first-order-regret RL in linear MDPs."""

from force_rl._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]

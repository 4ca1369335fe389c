"""Attention-aware EEG epoch filtering and cross-session decoding experiments."""

from . import attention, curriculum, dsp, eegio, evaluate

__version__ = "0.1.0"

__all__ = ["attention", "curriculum", "dsp", "eegio", "evaluate", "__version__"]

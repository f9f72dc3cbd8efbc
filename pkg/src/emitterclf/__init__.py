"""Radar pulse-stream emitter classification toolkit.

Synthetic pulse-train simulation, dual sequence normalization,
attribute-specific stacked LSTMs trained from scratch, baseline models,
and macro-accuracy evaluation protocols (ablation grid, baseline table,
noise-robustness sweep).
"""

__version__ = "0.1.0"

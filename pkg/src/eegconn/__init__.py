"""EEG effective-connectivity features and small CNN ensembles.

The package turns multi-channel EEG recordings into three connectivity
feature sets (lagged autoregressive coefficients, band-averaged partial
directed coherence, and weighted graph topology measures) and classifies
subjects into two groups with small convolutional networks, fused at the
feature, score, or decision level.
"""

__version__ = "0.1.0"

from . import eeg_io, netmetrics, spectral, var_model  # noqa: F401

"""movetone: instrument audio from body-movement sequences.

A discrete spectrogram codec (vector-quantized autoencoder with multi-band
residual blocks) plus an autoregressive prior over its codes conditioned on
an encoded movement sequence, with optional note-track content conditioning,
phase-retrieval synthesis, and distribution/embedding evaluation metrics.
"""

__version__ = "0.1.0"

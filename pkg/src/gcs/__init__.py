"""Generative compressed sensing with subsampled isometries.

Measurement operators subsampled from unitary matrices, ReLU generative
networks, coherence computation and regularization, latent-code recovery, and
a Monte-Carlo harness for the restricted-isometry and recovery claims.
"""

__version__ = "0.1.0"

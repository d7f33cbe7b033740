"""curriseq: desk-scale seq2seq training with token-wise curriculum schedules.

The package trains a tiny recurrent encoder-decoder (or decoder-only LM) on
top of a minimal reverse-mode autodiff engine, and exposes the curriculum
machinery as pure, independently testable schedule functions:

* hard curriculum: binary per-token loss masks over a growing target prefix
* soft curriculum: geometrically decaying per-token loss weights
* sentence-level baselines (rarity + sqrt competence, n-gram uncertainty
  baby steps) and their composition with the token-wise schedules
* diagnostics: unique-trigram diversity and positional error accumulation
"""

__version__ = "0.1.0"

from .curriculum import (
    CurriculumConfig,
    WeightVector,
    hard_subseq_length,
    hard_weight_vector,
    soft_decay_factor,
    soft_power_factor,
    soft_weight_vector,
)

__all__ = [
    "CurriculumConfig",
    "WeightVector",
    "hard_subseq_length",
    "hard_weight_vector",
    "soft_decay_factor",
    "soft_power_factor",
    "soft_weight_vector",
    "__version__",
]

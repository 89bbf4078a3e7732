"""Training and evaluation toolkit for binary ethical-content classification.

Everything is built from first principles on numpy: text normalization,
a trainable WordPiece-style tokenizer, dynamic batching, a small transformer
encoder with exact hand-written gradients, AdamW with gradient accumulation
and an inverse-square-root schedule, classification metrics, and adversarial
hard-split construction.
"""

__version__ = "0.1.0"

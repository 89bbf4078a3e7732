"""Tokenizer kernel dispatch: compiled extension when built, pure Python otherwise.

BACKEND names the active implementation ("cython" or "pure"); both expose
segment_word, count_pairs, and apply_merge with identical behavior.
"""

try:
    from ethikit._kernels import _speedups as _impl

    BACKEND = "cython"
except ImportError:
    from ethikit._kernels import pure as _impl

    BACKEND = "pure"

segment_word = _impl.segment_word
count_pairs = _impl.count_pairs
apply_merge = _impl.apply_merge

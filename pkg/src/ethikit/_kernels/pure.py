"""Pure-Python tokenizer kernels.

Reference implementations of the two hot loops: greedy longest-match word
segmentation and merge-pair counting/rewriting for vocabulary training.
The compiled twin in _speedups.pyx must stay behaviorally identical; the
parity tests compare the two on random inputs.
"""

from __future__ import annotations


def segment_word(word, token_ids, prefix, max_chars):
    """Greedy longest-match-first segmentation.

    Returns the list of subword strings covering ``word``, where non-initial
    pieces carry ``prefix``, or None when no segmentation exists or the word
    is longer than ``max_chars``.
    """
    n = len(word)
    if n == 0 or n > max_chars:
        return None
    pieces = []
    start = 0
    while start < n:
        end = n
        found = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = prefix + piece
            if piece in token_ids:
                found = piece
                break
            end -= 1
        if found is None:
            return None
        pieces.append(found)
        start = end
    return pieces


def count_pairs(seqs, freqs):
    """Count adjacent symbol pairs across word symbol sequences.

    ``seqs`` is a list of symbol lists, ``freqs`` the matching word counts.
    Returns {(left, right): total corpus count}.
    """
    counts = {}
    for seq, freq in zip(seqs, freqs):
        for i in range(len(seq) - 1):
            pair = (seq[i], seq[i + 1])
            counts[pair] = counts.get(pair, 0) + freq
    return counts


def apply_merge(seqs, left, right, merged):
    """Rewrite every left-to-right adjacent (left, right) into ``merged``.

    Mutates ``seqs`` in place; overlapping occurrences are consumed greedily
    from the left.
    """
    for idx, seq in enumerate(seqs):
        if left not in seq:
            continue
        out = []
        i = 0
        n = len(seq)
        while i < n:
            if i + 1 < n and seq[i] == left and seq[i + 1] == right:
                out.append(merged)
                i += 2
            else:
                out.append(seq[i])
                i += 1
        seqs[idx] = out

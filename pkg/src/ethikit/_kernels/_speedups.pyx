# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled tokenizer kernels.

Behaviorally identical to ethikit._kernels.pure; selected at import when the
extension was built. Strings stay Python objects — the win comes from
compiling the character-position loops and dict probes.
"""


def segment_word(word, token_ids, str prefix, int max_chars):
    """Greedy longest-match-first segmentation (compiled twin of pure.segment_word)."""
    cdef int n = len(word)
    cdef int start = 0
    cdef int end
    if n == 0 or n > max_chars:
        return None
    pieces = []
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


def count_pairs(list seqs, list freqs):
    """Count adjacent symbol pairs across word symbol sequences."""
    cdef dict counts = {}
    cdef int i, m
    cdef long freq
    for seq, f in zip(seqs, freqs):
        freq = f
        m = len(seq) - 1
        for i in range(m):
            pair = (seq[i], seq[i + 1])
            if pair in counts:
                counts[pair] = counts[pair] + freq
            else:
                counts[pair] = freq
    return counts


def apply_merge(list seqs, left, right, merged):
    """Rewrite every left-to-right adjacent (left, right) into ``merged`` in place."""
    cdef int i, n, idx
    for idx in range(len(seqs)):
        seq = seqs[idx]
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

"""Trainable frequency-aware WordPiece-style tokenizer.

Vocabulary training greedily merges the most frequent adjacent symbol pair
(corpus-count weighted, floor ``min_frequency``) until the budget is spent;
encoding uses greedy longest-match-first with a ``##`` continuation prefix
for non-initial pieces. Whole words that cannot be covered map to [UNK].
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from ethikit import _kernels
from ethikit.errors import (
    ConfigError,
    DuplicateToken,
    EmptyCorpus,
    IdOutOfRange,
    MalformedVocab,
)

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)
PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = range(5)

CONTINUATION_PREFIX = "##"

DEFAULT_MAX_WORD_CHARS = 100


@dataclass(frozen=True)
class TokenizerConfig:
    vocab_size: int = 8000
    min_frequency: int = 2
    max_word_chars: int = DEFAULT_MAX_WORD_CHARS

    def __post_init__(self) -> None:
        if self.vocab_size <= len(SPECIAL_TOKENS):
            raise ConfigError("vocab_size must exceed the special-token count")
        if self.min_frequency < 1:
            raise ConfigError("min_frequency must be >= 1")
        if self.max_word_chars < 1:
            raise ConfigError("max_word_chars must be >= 1")


class Vocab:
    """Immutable subword inventory with dense ids; specials occupy 0..4."""

    continuation_prefix = CONTINUATION_PREFIX

    def __init__(self, tokens, max_word_chars: int = DEFAULT_MAX_WORD_CHARS):
        tokens = tuple(tokens)
        if tokens[: len(SPECIAL_TOKENS)] != SPECIAL_TOKENS:
            raise MalformedVocab(
                f"first {len(SPECIAL_TOKENS)} tokens must be {SPECIAL_TOKENS}"
            )
        id_of: dict[str, int] = {}
        for i, tok in enumerate(tokens):
            if tok in id_of:
                raise DuplicateToken(f"token {tok!r} appears twice")
            id_of[tok] = i
        self.tokens = tokens
        self.id_of = id_of
        self.max_word_chars = max_word_chars

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise IdOutOfRange(f"id {token_id} outside 0..{len(self.tokens) - 1}")
        return self.tokens[token_id]


def _word_symbols(word: str) -> list[str]:
    return [word[0]] + [CONTINUATION_PREFIX + ch for ch in word[1:]]


def _strip_prefix(symbol: str) -> str:
    if symbol.startswith(CONTINUATION_PREFIX):
        return symbol[len(CONTINUATION_PREFIX):]
    return symbol


def train_vocab(corpus, cfg: TokenizerConfig) -> Vocab:
    """Learn a subword vocabulary from normalized text.

    Single characters meeting the frequency floor seed the inventory; then the
    most frequent adjacent pair (ties to the lexicographically greatest pair)
    is merged repeatedly while its joint count still meets the floor and the
    size budget allows. Deterministic for a fixed corpus and config.
    """
    word_counts: Counter[str] = Counter()
    for line in corpus:
        word_counts.update(line.split())
    if not word_counts:
        raise EmptyCorpus("corpus contains no tokens")

    char_counts: Counter[str] = Counter()
    for word, freq in word_counts.items():
        for ch in word:
            char_counts[ch] += freq
    alphabet = sorted(
        ch for ch, count in char_counts.items() if count >= cfg.min_frequency
    )

    tokens: list[str] = list(SPECIAL_TOKENS) + alphabet
    token_set = set(tokens)

    words = sorted(word_counts)
    seqs: list[list[str]] = [_word_symbols(w) for w in words]
    freqs: list[int] = [word_counts[w] for w in words]

    while len(tokens) < cfg.vocab_size:
        counts = _kernels.count_pairs(seqs, freqs)
        best = None
        best_count = 0
        for pair, count in counts.items():
            if count < cfg.min_frequency:
                continue
            if count > best_count or (count == best_count and pair > best):
                best = pair
                best_count = count
        if best is None:
            break
        merged = best[0] + _strip_prefix(best[1])
        _kernels.apply_merge(seqs, best[0], best[1], merged)
        if merged not in token_set:
            tokens.append(merged)
            token_set.add(merged)

    return Vocab(tokens, max_word_chars=cfg.max_word_chars)


def encode_word(word: str, vocab: Vocab) -> list[int]:
    """Segment one whitespace-free word into token ids, [UNK] as fallback."""
    pieces = _kernels.segment_word(
        word, vocab.id_of, vocab.continuation_prefix, vocab.max_word_chars
    )
    if pieces is None:
        return [UNK_ID]
    return [vocab.id_of[p] for p in pieces]


def encode(text: str, vocab: Vocab) -> list[int]:
    """Whitespace-split then encode each word; no specials are added here."""
    ids: list[int] = []
    for word in text.split():
        ids.extend(encode_word(word, vocab))
    return ids


def decode(ids, vocab: Vocab) -> str:
    """Inverse of encode up to [UNK] losses.

    Continuation pieces are glued to their predecessor; everything else is
    space-separated.
    """
    words: list[str] = []
    for token_id in ids:
        tok = vocab.token(token_id)
        if tok.startswith(vocab.continuation_prefix) and words:
            words[-1] += _strip_prefix(tok)
        else:
            words.append(tok)
    return " ".join(words)


def save_vocab(vocab: Vocab, path) -> None:
    """One token per line; the line number is the id."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tok in vocab.tokens:
            fh.write(tok + "\n")


def load_vocab(path, max_word_chars: int = DEFAULT_MAX_WORD_CHARS) -> Vocab:
    with open(path, encoding="utf-8") as fh:
        tokens = [line.rstrip("\n") for line in fh]
    if len(tokens) < len(SPECIAL_TOKENS):
        raise MalformedVocab(f"{path}: fewer than {len(SPECIAL_TOKENS)} tokens")
    return Vocab(tokens, max_word_chars=max_word_chars)

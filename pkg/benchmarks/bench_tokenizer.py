"""Benchmark the compiled tokenizer kernels against the pure-Python fallback.

Times the two hot paths on a synthetic corpus: greedy longest-match encoding
and the pair-count/merge loop used by vocabulary training.

Usage: python benchmarks/bench_tokenizer.py [--sentences N] [--rounds N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import ethikit._kernels as kernels
from ethikit._kernels import pure
from ethikit.tokenizer import CONTINUATION_PREFIX, TokenizerConfig, train_vocab

try:
    from ethikit._kernels import _speedups
except ImportError:
    _speedups = None


def synthetic_corpus(n_sentences: int, seed: int = 0) -> list[str]:
    # three-syllable words and a capped vocabulary keep the encoder on the
    # multi-piece greedy path instead of whole-word hits
    rng = np.random.default_rng(seed)
    syllables = ["ba", "do", "ki", "lu", "men", "ra", "sto", "tu", "ve", "zo"]
    inventory = sorted(
        {a + b + c for a in syllables for b in syllables for c in syllables}
    )
    words = np.array(inventory)[rng.permutation(len(inventory))[:400]]
    return [
        " ".join(words[rng.integers(0, len(words), size=10)])
        for _ in range(n_sentences)
    ]


def time_encode(impl, words, vocab, rounds: int) -> float:
    best = float("inf")
    for _ in range(rounds):
        started = time.perf_counter()
        for word in words:
            impl.segment_word(word, vocab.id_of, CONTINUATION_PREFIX, 100)
        best = min(best, time.perf_counter() - started)
    return best


def time_merge_loop(impl, seqs, freqs, rounds: int) -> float:
    best = float("inf")
    for _ in range(rounds):
        local = [list(s) for s in seqs]
        started = time.perf_counter()
        for _ in range(30):
            counts = impl.count_pairs(local, freqs)
            if not counts:
                break
            pair = max(counts, key=lambda p: (counts[p], p))
            merged = pair[0] + pair[1].removeprefix(CONTINUATION_PREFIX)
            impl.apply_merge(local, pair[0], pair[1], merged)
        best = min(best, time.perf_counter() - started)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sentences", type=int, default=2000)
    parser.add_argument("--rounds", type=int, default=3)
    args = parser.parse_args()

    corpus = synthetic_corpus(args.sentences)
    vocab = train_vocab(corpus, TokenizerConfig(vocab_size=220, min_frequency=2))
    words = [w for line in corpus for w in line.split()]

    distinct = sorted(set(words))
    seqs = [[w[0]] + [CONTINUATION_PREFIX + c for c in w[1:]] for w in distinct]
    freqs = [words.count(w) for w in distinct]

    impls = [("pure", pure)]
    if _speedups is not None:
        impls.append(("cython", _speedups))

    print(f"active backend: {kernels.BACKEND}")
    print(f"corpus: {args.sentences} sentences, {len(words)} words, "
          f"{len(vocab)} vocab entries\n")
    print(f"{'kernel':<22} {'backend':<8} {'seconds':>9} {'throughput':>16}")
    encode_times = {}
    merge_times = {}
    for name, impl in impls:
        t = time_encode(impl, words, vocab, args.rounds)
        encode_times[name] = t
        print(f"{'segment_word':<22} {name:<8} {t:>9.4f} "
              f"{len(words) / t:>12.0f} w/s")
    for name, impl in impls:
        t = time_merge_loop(impl, seqs, freqs, args.rounds)
        merge_times[name] = t
        print(f"{'count_pairs+merge':<22} {name:<8} {t:>9.4f} "
              f"{30 / t:>10.0f} merges/s")

    if "cython" in encode_times:
        print(f"\nspeedup (pure/cython): "
              f"encode {encode_times['pure'] / encode_times['cython']:.2f}x, "
              f"merge loop {merge_times['pure'] / merge_times['cython']:.2f}x")


if __name__ == "__main__":
    main()

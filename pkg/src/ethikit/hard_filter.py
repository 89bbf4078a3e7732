"""Adversarial filtration: proxy models score examples, the hardest survive.

Small proxy classifiers are trained on a development set; each pool example
is scored by its mean per-example cross-entropy across proxies, and the
examples at or above the keep quantile form the hard subset. Loss (rather
than 0/1 error) gives a total order with few ties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ethikit.errors import EmptyDataset, QuantileOutOfRange
from ethikit.loss import PROB_CLAMP
from ethikit.model import ModelParams
from ethikit.tokenizer import Vocab
from ethikit.trainer import TrainConfig, predict_probs, split_train_val
from ethikit.trainer import train as train_model


@dataclass(frozen=True)
class FilterConfig:
    proxy: TrainConfig
    n_proxies: int = 2
    keep_quantile: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_proxies < 1:
            raise ValueError("n_proxies must be >= 1")
        if not 0.0 < self.keep_quantile < 1.0:
            raise QuantileOutOfRange("keep_quantile must lie in (0, 1)")


@dataclass(frozen=True)
class DifficultyScore:
    example_id: int
    score: float


def train_proxies(dev_set, cfg: FilterConfig, vocab: Vocab) -> list[ModelParams]:
    """Independently seeded proxy trainings on the development set."""
    dev_set = list(dev_set)
    if not dev_set:
        raise EmptyDataset("empty development set")
    proxies = []
    for i in range(cfg.n_proxies):
        seed = cfg.seed + i
        proxy_cfg = replace(
            cfg.proxy,
            seed=seed,
            model=replace(cfg.proxy.model, seed=seed),
        )
        dev_train, dev_val = split_train_val(dev_set, seed=seed)
        params, _ = train_model(dev_train, dev_val, vocab, proxy_cfg)
        proxies.append(params)
    return proxies


def _per_example_bce(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(labels * np.log(p) + (1.0 - labels) * np.log1p(-p))


def score_examples(
    proxies,
    pool,
    vocab: Vocab,
    batch_size: int = 32,
    max_len: int = 128,
) -> list[DifficultyScore]:
    """Mean per-example cross-entropy across proxies, eval mode."""
    pool = list(pool)
    if not pool:
        raise EmptyDataset("empty pool")
    labels = np.array([ex.label for ex in pool], dtype=np.float64)
    total = np.zeros(len(pool), dtype=np.float64)
    for proxy in proxies:
        probs = predict_probs(proxy, pool, vocab, batch_size, max_len)
        total += _per_example_bce(probs, labels)
    mean = total / len(proxies)
    return [DifficultyScore(example_id=i, score=float(s)) for i, s in enumerate(mean)]


def hard_indices(scores, q: float) -> list[int]:
    """Example ids scoring at or above the q-quantile, in stable id order."""
    if not 0.0 < q < 1.0:
        raise QuantileOutOfRange(f"q={q} outside (0, 1)")
    by_id = sorted(scores, key=lambda s: s.example_id)
    values = sorted(s.score for s in by_id)
    threshold = values[min(math.floor(q * len(values)), len(values) - 1)]
    return [s.example_id for s in by_id if s.score >= threshold]


def filter_hard(pool, scores, q: float):
    """Partition the pool at the q-quantile of difficulty, hardest kept.

    Examples scoring at or above the threshold are hard; ties all land on the
    hard side, and both subsets preserve pool order.
    """
    pool = list(pool)
    if len(scores) != len(pool) or sorted(s.example_id for s in scores) != list(range(len(pool))):
        raise ValueError("scores must cover the pool exactly")
    keep = set(hard_indices(scores, q))
    hard = [ex for i, ex in enumerate(pool) if i in keep]
    easy = [ex for i, ex in enumerate(pool) if i not in keep]
    return hard, easy

"""Fine-tuning loop: stratified split, epochs, accumulation cadence, curves.

Each epoch shuffles the training set, walks micro-batches through
forward/loss/backward/accumulate, flushes every ``n_acc`` micro-batches (plus
one leftover flush for a partial window at the epoch boundary), then records
eval-mode loss and accuracy on both splits. The best checkpoint by validation
accuracy (ties to lower validation loss) is retained.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ethikit import loss as loss_mod
from ethikit import metrics as metrics_mod
from ethikit.batching import DEFAULT_MAX_LEN, make_batches
from ethikit.errors import EmptyDataset, InvalidConfig, TooFewExamples
from ethikit.model import ModelConfig, ModelParams, backward, classify, forward, init_params
from ethikit.optim import OptimConfig, accumulate, flush, init_state
from ethikit.tokenizer import Vocab


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    optim: OptimConfig = field(default_factory=OptimConfig)
    epochs: int = 5
    batch_size: int = 32
    max_len: int = DEFAULT_MAX_LEN
    seed: int = 0
    early_stop_patience: int | None = None

    @property
    def n_acc(self) -> int:
        return self.optim.n_acc

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise InvalidConfig("early_stop_patience must be >= 1")


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    seconds: float


EPOCH_CSV_HEADER = "epoch,train_loss,train_acc,val_loss,val_acc,seconds"


def epoch_logs_csv(logs) -> str:
    lines = [EPOCH_CSV_HEADER]
    for log in logs:
        lines.append(
            f"{log.epoch},{log.train_loss!r},{log.train_acc!r},"
            f"{log.val_loss!r},{log.val_acc!r},{log.seconds!r}"
        )
    return "\n".join(lines) + "\n"


def split_train_val(examples, ratio: float = 0.8, seed: int = 0):
    """Seeded, label-stratified split; train gets floor(n * ratio) examples."""
    examples = list(examples)
    n = len(examples)
    if n < 2:
        raise TooFewExamples(f"cannot split {n} example(s)")
    if not 0.0 < ratio < 1.0:
        raise InvalidConfig("ratio must lie strictly between 0 and 1")

    rng = np.random.default_rng(seed)
    pos = [ex for ex in examples if ex.label == 1]
    neg = [ex for ex in examples if ex.label != 1]
    rng.shuffle(pos)
    rng.shuffle(neg)

    n_train = int(n * ratio)
    take_pos = int(len(pos) * ratio)
    take_neg = int(len(neg) * ratio)
    # Largest-remainder top-up keeps each side's positive rate within one
    # example of the whole while the total matches floor(n * ratio).
    while take_pos + take_neg < n_train:
        frac_pos = len(pos) * ratio - take_pos
        frac_neg = len(neg) * ratio - take_neg
        if take_neg >= len(neg) or (take_pos < len(pos) and frac_pos >= frac_neg):
            take_pos += 1
        else:
            take_neg += 1
    train = pos[:take_pos] + neg[:take_neg]
    val = pos[take_pos:] + neg[take_neg:]
    return train, val


def predict_probs(
    params: ModelParams,
    dataset,
    vocab: Vocab,
    batch_size: int = 32,
    max_len: int = DEFAULT_MAX_LEN,
) -> np.ndarray:
    """Eval-mode probabilities for every example, in dataset order."""
    dataset = list(dataset)
    if not dataset:
        raise EmptyDataset("nothing to score")
    batches = make_batches(dataset, vocab, batch_size, shuffle_seed=None, max_len=max_len)
    return np.concatenate([classify(params, b) for b in batches])


def _eval_loss_acc(params, dataset, vocab, batch_size, max_len):
    probs = predict_probs(params, dataset, vocab, batch_size, max_len)
    labels = np.array([ex.label for ex in dataset], dtype=np.float64)
    mean_loss = loss_mod.bce(probs, labels).mean_loss
    acc = float(((probs >= 0.5).astype(np.int64) == labels.astype(np.int64)).mean())
    return mean_loss, acc


def evaluate(
    params: ModelParams,
    dataset,
    vocab: Vocab,
    batch_size: int = 32,
    max_len: int = DEFAULT_MAX_LEN,
) -> metrics_mod.EvalReport:
    """Full metric report at threshold 0.5 over a labeled dataset."""
    dataset = list(dataset)
    if not dataset:
        raise EmptyDataset("cannot evaluate an empty dataset")
    probs = predict_probs(params, dataset, vocab, batch_size, max_len)
    labels = np.array([ex.label for ex in dataset], dtype=np.int64)
    return metrics_mod.build_report(probs, labels)


def train(train_set, val_set, vocab: Vocab, cfg: TrainConfig):
    """Run the fine-tuning loop; returns (best params, per-epoch logs)."""
    train_set = list(train_set)
    val_set = list(val_set)
    if not train_set:
        raise EmptyDataset("empty training set")
    if not val_set:
        raise EmptyDataset("empty validation set")

    params = init_params(cfg.model)
    state = init_state(params, cfg.optim)
    dropout_rng = np.random.default_rng(cfg.seed)

    logs: list[EpochLog] = []
    best_params = params.copy()
    best_key: tuple[float, float] | None = None
    best_acc = -1.0
    best_acc_epoch = 0

    for epoch in range(cfg.epochs):
        started = time.perf_counter()
        batches = make_batches(
            train_set, vocab, cfg.batch_size,
            shuffle_seed=(cfg.seed, epoch), max_len=cfg.max_len,
        )
        for batch in batches:
            logits, cache = forward(params, batch, train=True, rng=dropout_rng)
            grads = backward(
                params, cache, loss_mod.bce_grad_logits(logits, batch.labels)
            )
            accumulate(state, grads)
            if state.counter == cfg.optim.n_acc:
                flush(params, state, cfg.optim)
        if state.counter > 0:
            flush(params, state, cfg.optim, allow_partial=True)

        train_loss, train_acc = _eval_loss_acc(
            params, train_set, vocab, cfg.batch_size, cfg.max_len
        )
        val_loss, val_acc = _eval_loss_acc(
            params, val_set, vocab, cfg.batch_size, cfg.max_len
        )
        logs.append(EpochLog(
            epoch=epoch,
            train_loss=train_loss,
            train_acc=train_acc,
            val_loss=val_loss,
            val_acc=val_acc,
            seconds=time.perf_counter() - started,
        ))

        key = (val_acc, -val_loss)
        if best_key is None or key > best_key:
            best_key = key
            best_params = params.copy()
        if val_acc > best_acc:
            best_acc = val_acc
            best_acc_epoch = epoch
        elif (
            cfg.early_stop_patience is not None
            and epoch - best_acc_epoch >= cfg.early_stop_patience
        ):
            break

    return best_params, logs

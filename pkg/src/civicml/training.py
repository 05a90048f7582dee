"""Training loops: MLM masking and pretraining, context extension,
multi-label fine-tuning with early stopping, grid search, multi-seed runs.

Pretraining defaults: Adam (betas 0.9/0.999, eps 1e-6), linear warmup then
linear decay to zero, global gradient-norm clipping at 5.0, and gradient
accumulation for the effective batch. Fine-tuning uses a constant learning
rate, no clipping, and keeps the checkpoint with the lowest validation loss.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from . import metrics as M
from .data import DataError, DatasetSplit, EvidenceItem
from .model import (EncoderModel, NumericError, backward, cls_logits, forward_encode,
                    loss_mlm, loss_multilabel, mlm_logits, _sigmoid)
from .tokenizer import TokenSequence, Vocab, batch_ids, encode


class TrainingDiverged(NumericError):
    """Non-finite loss during training; carries the loss trace so far."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass
class MaskingPolicy:
    mask_rate: float = 0.15
    random_rate: float = 0.10  # conditional on selection
    revert_rate: float = 0.10  # conditional on selection

    def __post_init__(self):
        for name in ("mask_rate", "random_rate", "revert_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.random_rate + self.revert_rate > 1.0:
            raise ValueError("random_rate + revert_rate must be <= 1")


@dataclass
class TrainSchedule:
    steps: int
    batch_size: int = 8
    grad_accum: int = 16
    lr: float = 3e-4
    warmup_steps: int = 500
    decay: str = "linear"  # "linear" | "constant"
    max_grad_norm: float | None = 5.0
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-6

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.grad_accum < 1:
            raise ValueError("steps/batch_size/grad_accum out of range")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.decay not in ("linear", "constant"):
            raise ValueError(f"unknown decay kind {self.decay!r}")

    @property
    def effective_batch(self) -> int:
        return self.batch_size * self.grad_accum


@dataclass
class FinetuneGrid:
    learning_rates: tuple[float, ...] = (1e-6, 3e-6, 6e-6)
    batch_sizes: tuple[int, ...] = (16, 32)
    epochs: int = 20
    seeds_per_cell: int = 3
    base_seed: int = 0

    def __post_init__(self):
        if not self.learning_rates or not self.batch_sizes:
            raise ValueError("grid must be non-empty")


# ---------------------------------------------------------------------------
# masking
# ---------------------------------------------------------------------------

def mask_batch(ids: np.ndarray, valid: np.ndarray, policy: MaskingPolicy,
               rng: np.random.Generator, vocab: Vocab):
    """BERT-style masking over a padded id batch.

    Content tokens (non-special, inside the attended region) are selected
    independently with mask_rate; a selected token becomes <mask>, a random
    non-special token, or stays itself, with the conditional split
    (1 - random - revert) / random / revert. Returns (masked_ids, target_ids,
    mask_positions).
    """
    ids = np.asarray(ids, dtype=np.int64)
    content = valid.copy()
    for sid in vocab.special_ids:
        content &= ids != sid

    u = rng.random(ids.shape)
    selected = content & (u < policy.mask_rate)
    action = rng.random(ids.shape)
    n_special = len(vocab.special_ids)
    if len(vocab) > n_special:
        rand_tokens = rng.integers(n_special, len(vocab), size=ids.shape)
    else:  # degenerate vocab of only specials; fall back to <mask>
        rand_tokens = np.full(ids.shape, vocab.mask_id, dtype=np.int64)

    mask_cut = 1.0 - policy.random_rate - policy.revert_rate
    masked = ids.copy()
    to_mask = selected & (action < mask_cut)
    to_random = selected & (action >= mask_cut) & (action < mask_cut + policy.random_rate)
    masked[to_mask] = vocab.mask_id
    masked[to_random] = rand_tokens[to_random]
    # remaining selected positions revert to the original token
    return masked, ids, selected


def mask_tokens(seq: TokenSequence, policy: MaskingPolicy, rng: np.random.Generator, vocab: Vocab):
    """Single-sequence wrapper over mask_batch."""
    ids = seq.ids[None, :]
    valid = np.zeros_like(ids, dtype=bool)
    valid[0, : seq.attention_length] = True
    masked, targets, positions = mask_batch(ids, valid, policy, rng, vocab)
    return TokenSequence(masked[0], seq.attention_length), targets[0], positions[0]


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, eps=1e-6):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            K.adam_step(
                p.reshape(-1), np.ascontiguousarray(grads[name].reshape(-1)),
                self.m[name].reshape(-1), self.v[name].reshape(-1),
                lr, self.beta1, self.beta2, self.eps, bc1, bc2,
            )


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so the global norm is at most max_norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def lr_at(schedule: TrainSchedule, step: int) -> float:
    """Learning rate for 0-indexed update `step` under warmup/decay."""
    if schedule.warmup_steps > 0 and step < schedule.warmup_steps:
        return schedule.lr * (step + 1) / schedule.warmup_steps
    if schedule.decay == "constant":
        return schedule.lr
    span = max(schedule.steps - schedule.warmup_steps, 1)
    return schedule.lr * max(0.0, (schedule.steps - step) / span)


# ---------------------------------------------------------------------------
# MLM pretraining
# ---------------------------------------------------------------------------

def _accumulate(total: dict[str, np.ndarray] | None, grads: dict[str, np.ndarray]):
    if total is None:
        return {k: g.copy() for k, g in grads.items()}
    for k, g in grads.items():
        total[k] += g
    return total


def encode_corpus(vocab: Vocab, texts: list[str], max_len: int) -> list[TokenSequence]:
    return [encode(vocab, t, max_len) for t in texts]


def evaluate_mlm(model: EncoderModel, vocab: Vocab, seqs: list[TokenSequence],
                 policy: MaskingPolicy, seed: int = 1234, batch_size: int = 32) -> float:
    """Deterministic held-out MLM loss (fixed masking seed)."""
    rng = np.random.default_rng(seed)
    losses, weights = [], []
    for lo in range(0, len(seqs), batch_size):
        chunk = seqs[lo : lo + batch_size]
        ids, valid = batch_ids(chunk, vocab)
        masked, targets, positions = mask_batch(ids, valid, policy, rng, vocab)
        if not positions.any():
            continue
        logits = mlm_logits(model, forward_encode(model, masked, valid))
        losses.append(loss_mlm(logits, targets, positions))
        weights.append(int(positions.sum()))
    if not losses:
        raise DataError("held-out corpus produced no masked positions")
    return float(np.average(losses, weights=weights))


def pretrain_mlm(model: EncoderModel, corpus: list[str], vocab: Vocab,
                 schedule: TrainSchedule, policy: MaskingPolicy | None = None,
                 max_len: int | None = None) -> tuple[EncoderModel, list[float]]:
    """Adam MLM pretraining with warmup/decay and gradient clipping.

    Returns (model, per-update loss trace). The model is updated in place and
    also returned. Non-finite loss aborts with TrainingDiverged carrying the
    trace collected so far.
    """
    policy = policy or MaskingPolicy()
    max_len = min(max_len or model.config.context_width, model.config.context_width)
    seqs = encode_corpus(vocab, corpus, max_len)
    seqs = [s for s in seqs if s.attention_length > 2]
    if not seqs:
        raise DataError("tokenized corpus is empty")

    rng = np.random.default_rng(schedule.seed)
    opt = Adam(model.params, schedule.adam_beta1, schedule.adam_beta2, schedule.adam_eps)
    trace: list[float] = []

    order: list[int] = []

    def next_batch() -> list[TokenSequence]:
        nonlocal order
        out = []
        while len(out) < schedule.batch_size:
            if not order:
                order = list(rng.permutation(len(seqs)))
            out.append(seqs[order.pop()])
        return out

    for step in range(schedule.steps):
        total = None
        micro_losses = []
        for _ in range(schedule.grad_accum):
            chunk = next_batch()
            ids, valid = batch_ids(chunk, vocab)
            masked, targets, positions = mask_batch(ids, valid, policy, rng, vocab)
            if not positions.any():
                continue
            try:
                loss, grads = backward(model, masked, valid, "mlm",
                                       target_ids=targets, mask_positions=positions)
            except NumericError as exc:
                raise TrainingDiverged(f"diverged at update {step}: {exc}", trace) from exc
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at update {step}", trace)
            micro_losses.append(loss)
            total = _accumulate(total, grads)
        if total is None:
            continue
        for g in total.values():
            g /= len(micro_losses)
        if schedule.max_grad_norm is not None:
            clip_gradients(total, schedule.max_grad_norm)
        opt.step(model.params, total, lr_at(schedule, step))
        trace.append(float(np.mean(micro_losses)))
    return model, trace


# ---------------------------------------------------------------------------
# context extension
# ---------------------------------------------------------------------------

def extend_context(model: EncoderModel, new_width: int) -> EncoderModel:
    """Grow the positional table by tiling identical copies of the old one.

    All other parameters are carried over unchanged, so forward passes on
    sequences within the old width are untouched.
    """
    old = model.config.context_width
    if new_width % old != 0 or new_width < old:
        raise ValueError(f"new width {new_width} must be a positive multiple of the old width {old}")
    reps = new_width // old
    params = {k: v.copy() for k, v in model.params.items()}
    params["pos_emb"] = np.tile(model.params["pos_emb"], (reps, 1))
    config = dataclasses.replace(model.config, context_width=new_width)
    return EncoderModel(config, params)


# ---------------------------------------------------------------------------
# fine-tuning
# ---------------------------------------------------------------------------

@dataclass
class FinetuneResult:
    model: EncoderModel
    best_epoch: int  # -1 when no epoch ran
    best_val_loss: float
    val_trace: list[float] = field(default_factory=list)
    train_trace: list[float] = field(default_factory=list)


def _encode_items(vocab: Vocab, items: list[EvidenceItem], max_len: int):
    seqs = [encode(vocab, it.abstract, max_len) for it in items]
    labels = np.stack([it.labels for it in items]).astype(float)
    return seqs, labels


def _batched_cls_loss(model, vocab, seqs, labels, batch_size=64) -> float:
    losses, weights = [], []
    for lo in range(0, len(seqs), batch_size):
        ids, valid = batch_ids(seqs[lo : lo + batch_size], vocab)
        logits = cls_logits(model, forward_encode(model, ids, valid))
        losses.append(loss_multilabel(logits, labels[lo : lo + batch_size]))
        weights.append(len(seqs[lo : lo + batch_size]))
    return float(np.average(losses, weights=weights))


def predict_scores(model: EncoderModel, vocab: Vocab, items: list[EvidenceItem],
                   max_len: int | None = None, batch_size: int = 64) -> np.ndarray:
    """Sigmoid class probabilities, shape (N, 5)."""
    max_len = min(max_len or model.config.context_width, model.config.context_width)
    seqs, _ = _encode_items(vocab, items, max_len)
    out = []
    for lo in range(0, len(seqs), batch_size):
        ids, valid = batch_ids(seqs[lo : lo + batch_size], vocab)
        out.append(_sigmoid(cls_logits(model, forward_encode(model, ids, valid))))
    return np.concatenate(out, axis=0)


def finetune(model: EncoderModel, split: DatasetSplit, vocab: Vocab, lr: float,
             batch_size: int, epochs: int, seed: int,
             max_len: int | None = None) -> FinetuneResult:
    """Multi-label BCE fine-tuning, constant lr, early-stop at best val loss."""
    if not split.train:
        raise DataError("empty train split")
    if not split.validation:
        raise DataError("empty validation split")
    max_len = min(max_len or model.config.context_width, model.config.context_width)
    train_seqs, train_labels = _encode_items(vocab, split.train, max_len)
    val_seqs, val_labels = _encode_items(vocab, split.validation, max_len)

    work = model.copy()
    best = FinetuneResult(model=work.copy(), best_epoch=-1, best_val_loss=float("inf"))
    rng = np.random.default_rng(seed)
    opt = Adam(work.params, eps=1e-6)

    for epoch in range(epochs):
        order = rng.permutation(len(train_seqs))
        epoch_losses = []
        for lo in range(0, len(order), batch_size):
            sel = order[lo : lo + batch_size]
            ids, valid = batch_ids([train_seqs[i] for i in sel], vocab)
            try:
                loss, grads = backward(work, ids, valid, "multilabel", labels=train_labels[sel])
            except NumericError as exc:
                raise TrainingDiverged(f"diverged in epoch {epoch}: {exc}", best.train_trace) from exc
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}", best.train_trace)
            opt.step(work.params, grads, lr)
            epoch_losses.append(loss)
        best.train_trace.append(float(np.mean(epoch_losses)))
        val_loss = _batched_cls_loss(work, vocab, val_seqs, val_labels)
        best.val_trace.append(val_loss)
        if val_loss < best.best_val_loss:
            best.best_val_loss = val_loss
            best.best_epoch = epoch
            best.model = work.copy()
    return best


@dataclass
class SearchResult:
    best_lr: float
    best_batch_size: int
    mean_val_loss: dict[tuple[float, int], float]
    per_seed_val_loss: dict[tuple[float, int], list[float]]


def hyperparam_search(model_factory, split: DatasetSplit, vocab: Vocab,
                      grid: FinetuneGrid, max_len: int | None = None) -> SearchResult:
    """Average best-validation-loss over seeds per (lr, batch) cell; argmin wins.

    model_factory(seed) supplies the starting model for one run. Divergent
    runs count as +inf so finite cells still compare.
    """
    mean_loss: dict[tuple[float, int], float] = {}
    per_seed: dict[tuple[float, int], list[float]] = {}
    for lr, bs in itertools.product(grid.learning_rates, grid.batch_sizes):
        losses = []
        for j in range(grid.seeds_per_cell):
            seed = grid.base_seed + j
            try:
                result = finetune(model_factory(seed), split, vocab, lr, bs,
                                  grid.epochs, seed, max_len=max_len)
                losses.append(result.best_val_loss)
            except TrainingDiverged:
                losses.append(float("inf"))
        per_seed[(lr, bs)] = losses
        mean_loss[(lr, bs)] = float(np.mean(losses))
    best_lr, best_bs = min(mean_loss, key=lambda k: (mean_loss[k], k))
    return SearchResult(best_lr, best_bs, mean_loss, per_seed)


def multi_seed_run(model_factory, split: DatasetSplit, vocab: Vocab, lr: float,
                   batch_size: int, epochs: int, seeds: list[int],
                   max_len: int | None = None):
    """Independent fine-tunes per seed; calibrated test metrics aggregated."""
    results: list[FinetuneResult] = []
    reports: list[M.MetricsReport] = []
    for seed in seeds:
        res = finetune(model_factory(seed), split, vocab, lr, batch_size, epochs, seed, max_len=max_len)
        results.append(res)
        val_scores = predict_scores(res.model, vocab, split.validation, max_len=max_len)
        val_labels = np.stack([it.labels for it in split.validation])
        thresholds = M.calibrate_thresholds(val_scores, val_labels)
        test_scores = predict_scores(res.model, vocab, split.test, max_len=max_len)
        test_labels = np.stack([it.labels for it in split.test])
        preds = M.apply_thresholds(test_scores, thresholds)
        reports.append(M.compute_metrics(preds, test_labels))
    return results, reports, M.aggregate_seeds(reports)

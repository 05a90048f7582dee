"""Integrated-gradients token attribution for the classifier.

Attribution target is the pre-sigmoid logit of one class; the path integral
runs from a baseline to the input in the space of embedding-plus-positional
matrices and is approximated with a midpoint Riemann sum. Summing a token's
attribution row over the embedding dimension gives its token-level score, and
the completeness identity sum(ig) = F(input) - F(baseline) is tracked as a
residual. A small axiom suite checks Sensitivity(a)/(b) and implementation
invariance on closed-form toy models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import LEVELS
from .data import EvidenceItem
from .model import EncoderModel, embed, logit_grad_wrt_embeddings
from .tokenizer import TokenSequence, Vocab, encode

BASELINE_KINDS = ("zero_embedding", "pad_sequence")


@dataclass
class AttributionConfig:
    baseline_kind: str = "zero_embedding"
    steps: int = 256
    target_class: str = "A"

    def __post_init__(self):
        if self.baseline_kind not in BASELINE_KINDS:
            raise ValueError(f"baseline_kind must be one of {BASELINE_KINDS}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.target_class not in LEVELS:
            raise ValueError(f"target_class must be one of {LEVELS}")

    @property
    def class_index(self) -> int:
        return LEVELS.index(self.target_class)


@dataclass
class TokenAttribution:
    token: str
    position: int
    score: float
    completeness_residual: float


def path_integrated_gradients(grad_fn, x: np.ndarray, baseline: np.ndarray, steps: int) -> np.ndarray:
    """Midpoint Riemann approximation of the straight-path gradient integral.

    grad_fn(z) -> (F(z), dF/dz). For a linear F the result is exact for any
    step count (the integrand is constant along the path).
    """
    diff = x - baseline
    acc = np.zeros_like(x)
    for k in range(1, steps + 1):
        alpha = (k - 0.5) / steps
        _, g = grad_fn(baseline + alpha * diff)
        acc += g
    return diff * (acc / steps)


def _baseline_embeddings(model: EncoderModel, vocab: Vocab, length: int, kind: str) -> np.ndarray:
    if kind == "zero_embedding":
        return np.zeros((1, length, model.config.embed_dim))
    ids = np.full((1, length), vocab.pad_id, dtype=np.int64)
    ids[0, 0] = vocab.bos_id
    ids[0, -1] = vocab.eos_id
    return embed(model, ids)


def integrated_gradients(model: EncoderModel, vocab: Vocab, seq: TokenSequence,
                         config: AttributionConfig):
    """Per-position, per-dimension attribution matrix for the target logit.

    Returns (matrix of shape (L, embed_dim), F(input), F(baseline)).
    """
    ids = np.asarray(seq.ids, dtype=np.int64)[None, :]
    valid = np.zeros_like(ids, dtype=bool)
    valid[0, : seq.attention_length] = True
    x = embed(model, ids)
    baseline = _baseline_embeddings(model, vocab, ids.shape[1], config.baseline_kind)

    c = config.class_index
    f_input, _ = logit_grad_wrt_embeddings(model, x, valid, c)
    f_base, _ = logit_grad_wrt_embeddings(model, baseline, valid, c)

    def grad_fn(z):
        return logit_grad_wrt_embeddings(model, z, valid, c)

    matrix = path_integrated_gradients(grad_fn, x, baseline, config.steps)[0]
    return matrix, f_input, f_base


def token_attributions(matrix: np.ndarray, tokens: list[str], delta: float) -> list[TokenAttribution]:
    """Collapse the embedding dimension to one score per token.

    delta = F(input) - F(baseline); every entry carries the sequence-level
    completeness residual |sum(scores) - delta|.
    """
    scores = matrix.sum(axis=1)
    residual = float(abs(scores.sum() - delta))
    return [
        TokenAttribution(token=tok, position=i, score=float(scores[i]), completeness_residual=residual)
        for i, tok in enumerate(tokens)
    ]


def attribute_item(model: EncoderModel, vocab: Vocab, text: str,
                   config: AttributionConfig, max_len: int | None = None) -> list[TokenAttribution]:
    """End-to-end attribution of one abstract for one target class."""
    max_len = min(max_len or model.config.context_width, model.config.context_width)
    seq = encode(vocab, text, max_len)
    matrix, f_input, f_base = integrated_gradients(model, vocab, seq, config)
    tokens = [vocab.id_to_token[int(i)] for i in seq.ids]
    return token_attributions(matrix, tokens, f_input - f_base)


def top_tokens_per_class(model: EncoderModel, vocab: Vocab, items: list[EvidenceItem],
                         k: int, steps: int = 64, baseline_kind: str = "zero_embedding",
                         max_len: int | None = None) -> dict[str, list[tuple[str, float]]]:
    """Token scores summed across items per class; top-k by aggregate score.

    Special tokens are excluded from the ranking.
    """
    if not items:
        raise ValueError("items must be non-empty")
    specials = {vocab.id_to_token[i] for i in vocab.special_ids}
    out: dict[str, list[tuple[str, float]]] = {}
    for level in LEVELS:
        config = AttributionConfig(baseline_kind=baseline_kind, steps=steps, target_class=level)
        agg: dict[str, float] = {}
        for item in items:
            for ta in attribute_item(model, vocab, item.abstract, config, max_len=max_len):
                if ta.token in specials:
                    continue
                agg[ta.token] = agg.get(ta.token, 0.0) + ta.score
        ranked = sorted(agg.items(), key=lambda kv: (-kv[1], kv[0]))
        out[level] = ranked[:k]
    return out


# ---------------------------------------------------------------------------
# axiom suite on closed-form toy models
# ---------------------------------------------------------------------------

def _linear_fn(w):
    def fn(z):
        return float(w @ z), w.copy()

    return fn


def _tanh_mlp_fn(w1, w2):
    # F(z) = w2 . tanh(w1 z); gradient in closed form
    def fn(z):
        h = np.tanh(w1 @ z)
        return float(w2 @ h), w1.T @ (w2 * (1.0 - h * h))

    return fn


def axiom_suite(seed: int = 0, steps: int = 128) -> dict:
    """Check Sensitivity(a), Sensitivity(b), and implementation invariance.

    Sensitivity(a): input and baseline differing in one feature with different
    outputs yield nonzero attribution there. Sensitivity(b): a feature with
    zeroed incoming weights gets zero attribution (to 1e-10). Implementation
    invariance: permuting hidden units leaves attributions unchanged (to 1e-8).
    """
    rng = np.random.default_rng(seed)
    report: dict[str, dict] = {}

    w = rng.normal(size=6)
    baseline = np.zeros(6)
    x = baseline.copy()
    x[2] = 1.5  # differs in exactly one feature
    ig = path_integrated_gradients(_linear_fn(w), x, baseline, 1)
    value = float(abs(ig[2]))
    report["sensitivity_a"] = {"passed": value > 1e-12, "attribution_abs": value}

    w1 = rng.normal(size=(8, 6))
    dead = 4
    w1[:, dead] = 0.0
    w2 = rng.normal(size=8)
    x2 = rng.normal(size=6)
    ig2 = path_integrated_gradients(_tanh_mlp_fn(w1, w2), x2, np.zeros(6), steps)
    report["sensitivity_b"] = {"passed": abs(float(ig2[dead])) <= 1e-10,
                               "attribution_abs": abs(float(ig2[dead]))}

    perm = rng.permutation(8)
    ig3 = path_integrated_gradients(_tanh_mlp_fn(w1[perm], w2[perm]), x2, np.zeros(6), steps)
    max_diff = float(np.max(np.abs(ig3 - ig2)))
    report["implementation_invariance"] = {"passed": max_diff <= 1e-8, "max_diff": max_diff}

    report["all_passed"] = all(report[k]["passed"] for k in
                               ("sensitivity_a", "sensitivity_b", "implementation_invariance"))
    return report

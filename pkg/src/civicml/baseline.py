"""Non-transformer comparison model: bigram tf-idf features feeding five
one-vs-rest logistic regressions.

Features are unigrams plus adjacent-word bigrams over the tokenizer's
pretokenization (lowercased words, punctuation split off). Weighting is the
smoothed convention idf = ln((1+D)/(1+df)) + 1 with L2-normalized rows.
Training is deterministic full-batch gradient descent with Armijo
backtracking, run to a gradient-norm tolerance.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import LEVELS, NUM_LEVELS
from .tokenizer import pretokenize


@dataclass
class TfidfModel:
    features: list[str]
    df: np.ndarray
    idf: np.ndarray
    n_docs: int

    def __post_init__(self):
        self.feature_index = {f: i for i, f in enumerate(self.features)}


@dataclass
class OvrLogisticModel:
    weights: np.ndarray  # (5, F)
    bias: np.ndarray  # (5,)
    reg: float


def _grams(text: str) -> list[str]:
    words = pretokenize(text)
    return words + [f"{a} {b}" for a, b in zip(words, words[1:])]


def fit_tfidf(train_texts: list[str]) -> TfidfModel:
    """Fit the feature vocabulary and idf weights on training texts only."""
    if not train_texts:
        raise ValueError("empty corpus")
    df_counts: dict[str, int] = {}
    for text in train_texts:
        for g in set(_grams(text)):
            df_counts[g] = df_counts.get(g, 0) + 1
    features = sorted(df_counts)
    df = np.array([df_counts[f] for f in features], dtype=float)
    n_docs = len(train_texts)
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    return TfidfModel(features, df, idf, n_docs)


def transform(model: TfidfModel, text: str) -> sp.csr_matrix:
    """Term counts times idf, L2-normalized; unseen grams dropped."""
    counts: dict[int, float] = {}
    for g in _grams(text):
        j = model.feature_index.get(g)
        if j is not None:
            counts[j] = counts.get(j, 0.0) + 1.0
    if not counts:
        return sp.csr_matrix((1, len(model.features)))
    cols = np.fromiter(counts.keys(), dtype=np.int64)
    vals = np.fromiter(counts.values(), dtype=float) * model.idf[cols]
    vals /= np.linalg.norm(vals)
    return sp.csr_matrix((vals, (np.zeros_like(cols), cols)), shape=(1, len(model.features)))


def transform_many(model: TfidfModel, texts: list[str]) -> sp.csr_matrix:
    return sp.vstack([transform(model, t) for t in texts], format="csr")


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logloss(z, y):
    # sum of binary cross-entropies, numerically stable
    return float(np.sum(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def _fit_binary(x: sp.csr_matrix, y: np.ndarray, reg: float, tol: float, max_iter: int):
    """L2-regularized logistic regression by gradient descent with backtracking."""
    n, f = x.shape
    w = np.zeros(f)
    b = 0.0
    step = 1.0
    for _ in range(max_iter):
        z = x @ w + b
        p = _sigmoid(z)
        r = p - y
        gw = x.T @ r + reg * w
        gb = float(r.sum())
        gnorm = np.sqrt(float(gw @ gw) + gb * gb)
        if gnorm <= tol:
            break
        loss = _logloss(z, y) + 0.5 * reg * float(w @ w)
        step = min(step * 2.0, 1e6)
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            z_new = x @ w_new + b_new
            new_loss = _logloss(z_new, y) + 0.5 * reg * float(w_new @ w_new)
            if new_loss <= loss - 0.25 * step * gnorm * gnorm or step < 1e-12:
                break
            step *= 0.5
        w, b = w_new, b_new
    else:
        warnings.warn(f"logistic regression did not reach gradient norm {tol} in {max_iter} iterations")
    return w, b


def train_ovr(features: sp.csr_matrix, labels, reg: float = 1.0,
              tol: float = 1e-6, max_iter: int = 5000) -> OvrLogisticModel:
    """Five independent binary logistic regressions over the tf-idf space."""
    labels = np.asarray(labels, dtype=float)
    if features.shape[0] != labels.shape[0]:
        raise ValueError("feature rows do not align with labels")
    weights = np.zeros((NUM_LEVELS, features.shape[1]))
    bias = np.zeros(NUM_LEVELS)
    for c in range(NUM_LEVELS):
        y = labels[:, c]
        if y.all() or not y.any():
            warnings.warn(f"class {LEVELS[c]} is degenerate in training (all {'positive' if y.all() else 'negative'})")
        weights[c], bias[c] = _fit_binary(features, y, reg, tol, max_iter)
    return OvrLogisticModel(weights, bias, reg)


def predict_proba(model: OvrLogisticModel, features) -> np.ndarray:
    """sigmoid(w.x + b) per class; accepts a single row or a stacked matrix."""
    if features.shape[-1] != model.weights.shape[1]:
        raise ValueError(
            f"feature dimension {features.shape[-1]} does not match model dimension {model.weights.shape[1]}"
        )
    z = features @ model.weights.T + model.bias
    z = np.asarray(z)
    return _sigmoid(z)


def save_baseline(tfidf: TfidfModel, ovr: OvrLogisticModel, path: str | Path) -> None:
    obj = {
        "format": "civicml-baseline-v1",
        "features": tfidf.features,
        "df": tfidf.df.tolist(),
        "idf": tfidf.idf.tolist(),
        "n_docs": tfidf.n_docs,
        "reg": ovr.reg,
        "bias": ovr.bias.tolist(),
        "weights": {LEVELS[c]: ovr.weights[c].tolist() for c in range(NUM_LEVELS)},
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_baseline(path: str | Path) -> tuple[TfidfModel, OvrLogisticModel]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("format") != "civicml-baseline-v1":
        raise ValueError("not a baseline model file")
    tfidf = TfidfModel(
        features=list(obj["features"]),
        df=np.asarray(obj["df"], dtype=float),
        idf=np.asarray(obj["idf"], dtype=float),
        n_docs=int(obj["n_docs"]),
    )
    weights = np.stack([np.asarray(obj["weights"][lvl], dtype=float) for lvl in LEVELS])
    ovr = OvrLogisticModel(weights, np.asarray(obj["bias"], dtype=float), float(obj["reg"]))
    return tfidf, ovr

"""Encoder-only transformer with exact hand-derived gradients.

Pre-layer-norm blocks with unmasked (bidirectional) multi-head self-attention
and a GELU feed-forward, learned positional encodings, a bias-free MLM head
(logits = X @ W_mlm) and a bias-free CLS head over the position-0 encoding
(logits = x_cls @ W_cls). Pad positions are removed from attention by an
additive -inf mask before the softmax, which keeps non-pad encodings
independent of padding.

Everything is float64 numpy; the fused elementwise loops live in
``civicml.kernels``. Checkpoints store a one-line JSON header followed by the
raw little-endian float32 tensors in declared parameter order.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import NUM_LEVELS
from . import kernels as K

LN_EPS = 1e-5
INIT_STD = 0.02
CHECKPOINT_FORMAT = "civicml-ckpt-v1"


class NumericError(RuntimeError):
    """Non-finite value produced during a numeric computation."""


@dataclass
class ModelConfig:
    num_blocks: int = 2
    context_width: int = 128
    embed_dim: int = 64
    hidden_dim: int = 256
    num_heads: int = 4
    vocab_size: int = 8192
    num_labels: int = NUM_LEVELS

    def __post_init__(self):
        for name in ("num_blocks", "context_width", "embed_dim", "hidden_dim", "num_heads", "vocab_size", "num_labels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.embed_dim % self.num_heads != 0:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads


def param_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter names and shapes in declared (checkpoint) order."""
    e, h, v, n = config.embed_dim, config.hidden_dim, config.vocab_size, config.context_width
    shapes: list[tuple[str, tuple[int, ...]]] = [("tok_emb", (v, e)), ("pos_emb", (n, e))]
    for i in range(config.num_blocks):
        p = f"b{i}."
        shapes += [
            (p + "ln1_g", (e,)), (p + "ln1_b", (e,)),
            (p + "wq", (e, e)), (p + "bq", (e,)),
            (p + "wk", (e, e)), (p + "bk", (e,)),
            (p + "wv", (e, e)), (p + "bv", (e,)),
            (p + "wo", (e, e)), (p + "bo", (e,)),
            (p + "ln2_g", (e,)), (p + "ln2_b", (e,)),
            (p + "w1", (e, h)), (p + "b1", (h,)),
            (p + "w2", (h, e)), (p + "b2", (e,)),
        ]
    shapes += [("lnf_g", (e,)), ("lnf_b", (e,)), ("mlm_w", (e, v)), ("cls_w", (e, config.num_labels))]
    return shapes


@dataclass
class EncoderModel:
    config: ModelConfig
    params: dict[str, np.ndarray]

    def copy(self) -> "EncoderModel":
        return EncoderModel(self.config, {k: v.copy() for k, v in self.params.items()})


def init_model(config: ModelConfig, seed: int) -> EncoderModel:
    """Scaled-normal init (std 0.02) for matrices, ones/zeros for layer norms."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config):
        if len(shape) == 1:  # layer-norm gains start at 1, every bias at 0
            params[name] = np.ones(shape) if name.endswith("_g") else np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, INIT_STD, size=shape)
    return EncoderModel(config, params)


def num_params(model: EncoderModel) -> int:
    return sum(p.size for p in model.params.values())


def _split_heads(x: np.ndarray, num_heads: int) -> np.ndarray:
    b, l, e = x.shape
    return x.reshape(b, l, num_heads, e // num_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, l, dh = x.shape
    return np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(b, l, h * dh)


def embed(model: EncoderModel, ids: np.ndarray) -> np.ndarray:
    """Token embedding plus positional encoding (the input space attributions live in)."""
    ids = np.asarray(ids, dtype=np.int64)
    b, l = ids.shape
    if l > model.config.context_width:
        raise ValueError(f"sequence length {l} exceeds context width {model.config.context_width}")
    return model.params["tok_emb"][ids] + model.params["pos_emb"][:l]


def encode_from_embeddings(model: EncoderModel, x0: np.ndarray, valid: np.ndarray,
                           cache: dict | None = None) -> np.ndarray:
    """Run the transformer blocks and final layer norm on embedded input."""
    cfg = model.config
    p = model.params
    b, l, e = x0.shape
    valid = np.ascontiguousarray(np.asarray(valid, dtype=bool))
    scale = 1.0 / np.sqrt(cfg.head_dim)
    x = x0
    if cache is not None:
        cache["valid"] = valid
        cache["blocks"] = []
    for i in range(cfg.num_blocks):
        pr = f"b{i}."
        h1, xhat1, rstd1 = K.layer_norm_fwd(x.reshape(-1, e), p[pr + "ln1_g"], p[pr + "ln1_b"], LN_EPS)
        h1 = h1.reshape(b, l, e)
        q = _split_heads(h1 @ p[pr + "wq"] + p[pr + "bq"], cfg.num_heads)
        k = _split_heads(h1 @ p[pr + "wk"] + p[pr + "bk"], cfg.num_heads)
        v = _split_heads(h1 @ p[pr + "wv"] + p[pr + "bv"], cfg.num_heads)
        scores = np.matmul(q, k.transpose(0, 1, 3, 2)) * scale
        probs = K.masked_softmax(scores, valid)
        ctx = _merge_heads(np.matmul(probs, v))
        attn_out = ctx @ p[pr + "wo"] + p[pr + "bo"]
        x_mid = x + attn_out
        h2, xhat2, rstd2 = K.layer_norm_fwd(x_mid.reshape(-1, e), p[pr + "ln2_g"], p[pr + "ln2_b"], LN_EPS)
        h2 = h2.reshape(b, l, e)
        u = h2 @ p[pr + "w1"] + p[pr + "b1"]
        g = K.gelu_fwd(u.reshape(-1, cfg.hidden_dim)).reshape(b, l, cfg.hidden_dim)
        x_out = x_mid + g @ p[pr + "w2"] + p[pr + "b2"]
        if cache is not None:
            cache["blocks"].append(
                dict(h1=h1, xhat1=xhat1, rstd1=rstd1, q=q, k=k, v=v, probs=probs, ctx=ctx,
                     h2=h2, xhat2=xhat2, rstd2=rstd2, u=u, g=g)
            )
        x = x_out
    xf, xhatf, rstdf = K.layer_norm_fwd(x.reshape(-1, e), p["lnf_g"], p["lnf_b"], LN_EPS)
    if cache is not None:
        cache["xhatf"] = xhatf
        cache["rstdf"] = rstdf
    xf = xf.reshape(b, l, e)
    if not np.isfinite(xf).all():
        raise NumericError("non-finite encoder output")
    return xf


def forward_encode(model: EncoderModel, ids: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Final per-position encodings X of shape (batch, length, embed_dim)."""
    return encode_from_embeddings(model, embed(model, ids), valid)


def mlm_logits(model: EncoderModel, encodings: np.ndarray) -> np.ndarray:
    """logits = X @ W_mlm; row argmax is the predicted token per position."""
    return encodings @ model.params["mlm_w"]


def cls_logits(model: EncoderModel, encodings: np.ndarray) -> np.ndarray:
    """logits = x_cls @ W_cls over the position-0 (bos/CLS) encoding."""
    return encodings[:, 0, :] @ model.params["cls_w"]


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def _loss_mlm_with_grad(logits, target_ids, mask_positions):
    mask_positions = np.asarray(mask_positions, dtype=bool)
    m = int(mask_positions.sum())
    if m == 0:
        raise ValueError("no masked positions in batch")
    rows = logits[mask_positions]
    targets = np.asarray(target_ids, dtype=np.int64)[mask_positions]
    mx = rows.max(axis=1, keepdims=True)
    ex = np.exp(rows - mx)
    z = ex.sum(axis=1, keepdims=True)
    lse = (mx + np.log(z))[:, 0]
    loss = float(np.mean(lse - rows[np.arange(m), targets]))
    soft = ex / z
    soft[np.arange(m), targets] -= 1.0
    dlogits = np.zeros_like(logits)
    dlogits[mask_positions] = soft / m
    return loss, dlogits


def loss_mlm(logits, target_ids, mask_positions) -> float:
    """Mean cross-entropy over masked positions only."""
    loss, _ = _loss_mlm_with_grad(logits, target_ids, mask_positions)
    return loss


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    neg = ~pos
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[neg])
    out[neg] = ez / (1.0 + ez)
    return out


def _loss_multilabel_with_grad(logits, labels):
    z = np.atleast_2d(np.asarray(logits, dtype=float))
    y = np.atleast_2d(np.asarray(labels, dtype=float))
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    loss = float(per.mean())
    dz = (_sigmoid(z) - y) / z.size
    return loss, dz


def loss_multilabel(logits, labels) -> float:
    """Unweighted mean over classes of sigmoid binary cross-entropy."""
    loss, _ = _loss_multilabel_with_grad(logits, labels)
    return loss


# ---------------------------------------------------------------------------
# backward
# ---------------------------------------------------------------------------

def _backward_encoder(model: EncoderModel, cache: dict, dxf: np.ndarray,
                      need_param_grads: bool = True):
    """Reverse the blocks; returns (param grads, gradient wrt embeddings)."""
    cfg = model.config
    p = model.params
    b, l, e = dxf.shape
    scale = 1.0 / np.sqrt(cfg.head_dim)
    grads: dict[str, np.ndarray] = {}

    dx2, dgf, dbf = K.layer_norm_bwd(
        np.ascontiguousarray(dxf.reshape(-1, e)), cache["xhatf"], cache["rstdf"], p["lnf_g"]
    )
    if need_param_grads:
        grads["lnf_g"], grads["lnf_b"] = dgf, dbf
    dx = dx2.reshape(b, l, e)

    for i in reversed(range(cfg.num_blocks)):
        pr = f"b{i}."
        c = cache["blocks"][i]
        # feed-forward sublayer
        dff = dx
        dg = dff @ p[pr + "w2"].T
        du = K.gelu_bwd(c["u"].reshape(-1, cfg.hidden_dim),
                        np.ascontiguousarray(dg.reshape(-1, cfg.hidden_dim))).reshape(b, l, cfg.hidden_dim)
        dh2 = du @ p[pr + "w1"].T
        dxmid_ln, dg2, db2 = K.layer_norm_bwd(
            np.ascontiguousarray(dh2.reshape(-1, e)), c["xhat2"], c["rstd2"], p[pr + "ln2_g"]
        )
        dxmid = dx + dxmid_ln.reshape(b, l, e)
        if need_param_grads:
            grads[pr + "w2"] = c["g"].reshape(-1, cfg.hidden_dim).T @ dff.reshape(-1, e)
            grads[pr + "b2"] = dff.reshape(-1, e).sum(axis=0)
            grads[pr + "w1"] = c["h2"].reshape(-1, e).T @ du.reshape(-1, cfg.hidden_dim)
            grads[pr + "b1"] = du.reshape(-1, cfg.hidden_dim).sum(axis=0)
            grads[pr + "ln2_g"], grads[pr + "ln2_b"] = dg2, db2
        # attention sublayer
        do = dxmid
        dctx = do @ p[pr + "wo"].T
        dctx_h = _split_heads(dctx, cfg.num_heads)
        dprobs = np.matmul(dctx_h, c["v"].transpose(0, 1, 3, 2))
        dv = np.matmul(c["probs"].transpose(0, 1, 3, 2), dctx_h)
        dscores = K.softmax_bwd(c["probs"], np.ascontiguousarray(dprobs))
        dq = np.matmul(dscores, c["k"]) * scale
        dk = np.matmul(dscores.transpose(0, 1, 3, 2), c["q"]) * scale
        dqm, dkm, dvm = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
        dh1 = dqm @ p[pr + "wq"].T + dkm @ p[pr + "wk"].T + dvm @ p[pr + "wv"].T
        dxin_ln, dg1, db1 = K.layer_norm_bwd(
            np.ascontiguousarray(dh1.reshape(-1, e)), c["xhat1"], c["rstd1"], p[pr + "ln1_g"]
        )
        if need_param_grads:
            h1_2 = c["h1"].reshape(-1, e)
            grads[pr + "wo"] = c["ctx"].reshape(-1, e).T @ do.reshape(-1, e)
            grads[pr + "bo"] = do.reshape(-1, e).sum(axis=0)
            grads[pr + "wq"] = h1_2.T @ dqm.reshape(-1, e)
            grads[pr + "bq"] = dqm.reshape(-1, e).sum(axis=0)
            grads[pr + "wk"] = h1_2.T @ dkm.reshape(-1, e)
            grads[pr + "bk"] = dkm.reshape(-1, e).sum(axis=0)
            grads[pr + "wv"] = h1_2.T @ dvm.reshape(-1, e)
            grads[pr + "bv"] = dvm.reshape(-1, e).sum(axis=0)
            grads[pr + "ln1_g"], grads[pr + "ln1_b"] = dg1, db1
        dx = dxmid + dxin_ln.reshape(b, l, e)
    return grads, dx


def backward(model: EncoderModel, ids: np.ndarray, valid: np.ndarray, loss_kind: str, *,
             target_ids: np.ndarray | None = None, mask_positions: np.ndarray | None = None,
             labels: np.ndarray | None = None, class_index: int | None = None):
    """Forward + exact reverse-mode gradients for every parameter.

    loss_kind: "mlm" (needs target_ids, mask_positions), "multilabel" (needs
    labels), or "cls_logit" (needs class_index; differentiates the raw
    target-class logit, summed over the batch). Returns (loss, grads).
    """
    ids = np.asarray(ids, dtype=np.int64)
    cache: dict = {}
    x0 = embed(model, ids)
    xf = encode_from_embeddings(model, x0, valid, cache)
    b, l, e = xf.shape

    if loss_kind == "mlm":
        logits = mlm_logits(model, xf)
        loss, dlogits = _loss_mlm_with_grad(logits, target_ids, mask_positions)
        head_w = "mlm_w"
        dhead = xf.reshape(-1, e).T @ dlogits.reshape(-1, model.config.vocab_size)
        dxf = dlogits @ model.params["mlm_w"].T
    elif loss_kind == "multilabel":
        logits = cls_logits(model, xf)
        loss, dlogits = _loss_multilabel_with_grad(logits, labels)
        head_w = "cls_w"
        dhead = xf[:, 0, :].T @ dlogits
        dxf = np.zeros_like(xf)
        dxf[:, 0, :] = dlogits @ model.params["cls_w"].T
    elif loss_kind == "cls_logit":
        logits = cls_logits(model, xf)
        loss = float(logits[:, class_index].sum())
        dlogits = np.zeros_like(logits)
        dlogits[:, class_index] = 1.0
        head_w = "cls_w"
        dhead = xf[:, 0, :].T @ dlogits
        dxf = np.zeros_like(xf)
        dxf[:, 0, :] = dlogits @ model.params["cls_w"].T
    else:
        raise ValueError(f"unknown loss_kind {loss_kind!r}")

    grads, dx0 = _backward_encoder(model, cache, dxf)
    grads[head_w] = dhead
    grads.setdefault("mlm_w", np.zeros_like(model.params["mlm_w"]))
    grads.setdefault("cls_w", np.zeros_like(model.params["cls_w"]))

    grads["tok_emb"] = np.zeros_like(model.params["tok_emb"])
    K.embedding_grad(ids.reshape(-1), np.ascontiguousarray(dx0.reshape(-1, e)), grads["tok_emb"])
    dpos = np.zeros_like(model.params["pos_emb"])
    dpos[:l] = dx0.sum(axis=0)
    grads["pos_emb"] = dpos

    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in tensor {name!r}")
    return loss, grads


def logit_grad_wrt_embeddings(model: EncoderModel, x0: np.ndarray, valid: np.ndarray,
                              class_index: int) -> tuple[float, np.ndarray]:
    """Target-class logit and its gradient wrt the embedding matrix (for IG)."""
    cache: dict = {}
    xf = encode_from_embeddings(model, x0, valid, cache)
    logits = cls_logits(model, xf)
    value = float(logits[:, class_index].sum())
    dxf = np.zeros_like(xf)
    dxf[:, 0, :] = model.params["cls_w"][:, class_index]
    _, dx0 = _backward_encoder(model, cache, dxf, need_param_grads=False)
    if not np.isfinite(dx0).all():
        raise NumericError("non-finite gradient wrt embeddings")
    return value, dx0


# ---------------------------------------------------------------------------
# checkpoint io
# ---------------------------------------------------------------------------

def save_model(model: EncoderModel, path: str | Path) -> None:
    names = [n for n, _ in param_shapes(model.config)]
    header = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(model.config),
        "tensors": [[n, list(model.params[n].shape)] for n in names],
        "dtype": "<f4",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(model.params[n], dtype="<f4").tobytes())


def load_model(path: str | Path) -> EncoderModel:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unrecognized checkpoint format in {path}")
        config = ModelConfig(**header["config"])
        params: dict[str, np.ndarray] = {}
        for name, shape in header["tensors"]:
            count = int(np.prod(shape))
            buf = fh.read(count * 4)
            if len(buf) != count * 4:
                raise ValueError(f"checkpoint truncated in tensor {name!r}")
            params[name] = np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
    return EncoderModel(config, params)

"""Attention encoder over encoded windows, with hand-rolled gradients.

The network is deliberately bare: L multi-head self-attention layers (no
feed-forward blocks, no normalization; the residual connection is optional
and off by default), mean pooling over rows, and a sigmoid scorer.  Forward
passes are batched as (B, m, d) and every gradient is derived by hand, which
keeps the whole model in plain NumPy / BLAS.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .encoding import EncodingTables
from .errors import ConfigError, DataError

__all__ = [
    "ModelParameters",
    "ForwardTrace",
    "stable_sigmoid",
    "softmax_rows",
    "attention_layer",
    "forward",
    "backward",
    "adam_step",
    "AdamState",
    "save_checkpoint",
    "load_checkpoint",
]


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Sigmoid computed without overflow for large |x|."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    """Softmax along the last axis with max-subtraction."""
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class ModelParameters:
    """All learnable state: per-layer projections, scorer, encoding tables."""

    def __init__(self, w_q, w_k, w_v, w_s, b_s, tables: EncodingTables,
                 heads: int, residual: bool = False):
        self.w_q = w_q
        self.w_k = w_k
        self.w_v = w_v
        self.w_s = w_s
        self.b_s = b_s  # shape-() array so the optimizer can treat it uniformly
        self.tables = tables
        self.heads = heads
        self.residual = residual

    @property
    def layers(self) -> int:
        return len(self.w_q)

    @property
    def dim(self) -> int:
        return self.w_q[0].shape[0]

    @classmethod
    def init(cls, dim: int, layers: int, heads: int, k: int, tau: int,
             rng: np.random.Generator, dist_cap: int, residual: bool = False):
        """Draw every parameter from uniform(-1/sqrt(dim), 1/sqrt(dim))."""
        if layers < 1:
            raise ConfigError(f"need at least one attention layer, got {layers}")
        if heads < 1 or dim % heads != 0:
            raise ConfigError(f"head count {heads} must divide dimension {dim}")
        tables = EncodingTables(k, tau, dim, rng, dist_cap)
        bound = 1.0 / np.sqrt(dim)
        draw = lambda: rng.uniform(-bound, bound, size=(dim, dim))
        w_q = [draw() for _ in range(layers)]
        w_k = [draw() for _ in range(layers)]
        w_v = [draw() for _ in range(layers)]
        w_s = rng.uniform(-bound, bound, size=dim)
        b_s = np.asarray(rng.uniform(-bound, bound))
        return cls(w_q, w_k, w_v, w_s, b_s, tables, heads, residual)

    def param_dict(self) -> dict[str, np.ndarray]:
        """Flat name -> array view of every learnable tensor."""
        out = {}
        for i in range(self.layers):
            out[f"w_q.{i}"] = self.w_q[i]
            out[f"w_k.{i}"] = self.w_k[i]
            out[f"w_v.{i}"] = self.w_v[i]
        out["w_s"] = self.w_s
        out["b_s"] = self.b_s
        out["tables.diff"] = self.tables.diff
        out["tables.dist"] = self.tables.dist
        out["tables.temp"] = self.tables.temp
        return out


@dataclass
class ForwardTrace:
    """Everything the backward pass needs, plus the outputs."""

    x: np.ndarray                      # (B, m, d) encoder input
    hidden: list                       # layer inputs h_0 .. h_L, each (B, m, d)
    caches: list                       # per-layer attention caches
    pooled: np.ndarray                 # (B, d)
    logits: np.ndarray                 # (B,)
    scores: np.ndarray                 # (B,)


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, m, d = x.shape
    return x.reshape(b, m, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, m, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, m, h * dh)


def attention_layer(h: np.ndarray, w_q: np.ndarray, w_k: np.ndarray,
                    w_v: np.ndarray, heads: int):
    """One scaled dot-product self-attention layer.

    ``h`` is (B, m, d); heads act on contiguous column groups of width
    d / heads.  Returns the (B, m, d) output and a cache for backward.
    """
    q = h @ w_q
    k = h @ w_k
    v = h @ w_v
    qh = _split_heads(q, heads)
    kh = _split_heads(k, heads)
    vh = _split_heads(v, heads)
    scale = 1.0 / np.sqrt(qh.shape[-1])
    attn = softmax_rows((qh @ kh.transpose(0, 1, 3, 2)) * scale)
    out = _merge_heads(attn @ vh)
    cache = (h, qh, kh, vh, attn, scale)
    return out, cache


def _attention_backward(d_out, cache, w_q, w_k, w_v, heads):
    h, qh, kh, vh, attn, scale = cache
    d_oh = _split_heads(d_out, heads)
    d_attn = d_oh @ vh.transpose(0, 1, 3, 2)
    d_vh = attn.transpose(0, 1, 3, 2) @ d_oh
    # softmax backward, rowwise over the last axis
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
    d_scores *= scale
    d_qh = d_scores @ kh
    d_kh = d_scores.transpose(0, 1, 3, 2) @ qh
    d_q = _merge_heads(d_qh)
    d_k = _merge_heads(d_kh)
    d_v = _merge_heads(d_vh)
    flat = h.reshape(-1, h.shape[-1])
    d_wq = flat.T @ d_q.reshape(-1, d_q.shape[-1])
    d_wk = flat.T @ d_k.reshape(-1, d_k.shape[-1])
    d_wv = flat.T @ d_v.reshape(-1, d_v.shape[-1])
    d_h = d_q @ w_q.T + d_k @ w_k.T + d_v @ w_v.T
    return d_h, d_wq, d_wk, d_wv


def forward(x: np.ndarray, params: ModelParameters) -> ForwardTrace:
    """Run the encoder and scorer on a batch of encoded windows.

    Accepts (m, d) for a single window or (B, m, d) for a batch; the trace
    always stores batched arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise DataError(f"expected (B, m, d) input, got shape {x.shape}")
    if x.shape[-1] != params.dim:
        raise DataError(f"input dimension {x.shape[-1]} != model dimension {params.dim}")

    h = x
    hidden = [h]
    caches = []
    for i in range(params.layers):
        out, cache = attention_layer(h, params.w_q[i], params.w_k[i], params.w_v[i],
                                     params.heads)
        if params.residual:
            out = out + h
        caches.append(cache)
        h = out
        hidden.append(h)

    pooled = h.mean(axis=1)
    logits = pooled @ params.w_s + float(params.b_s)
    scores = stable_sigmoid(logits)
    return ForwardTrace(x, hidden, caches, pooled, logits, scores)


def backward(trace: ForwardTrace, params: ModelParameters,
             d_logits: np.ndarray | None = None,
             d_scores: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Gradients of a scalar objective w.r.t. every parameter and the input.

    Supply either ``d_logits`` (gradient at the pre-sigmoid logit, preferred
    for losses that simplify there) or ``d_scores`` (gradient at the sigmoid
    output).  Returns a dict matching ``param_dict`` keys plus ``"x"``.
    """
    if (d_logits is None) == (d_scores is None):
        raise ConfigError("provide exactly one of d_logits / d_scores")
    if d_logits is None:
        s = trace.scores
        d_logits = np.asarray(d_scores, dtype=np.float64) * s * (1.0 - s)
    d_logits = np.asarray(d_logits, dtype=np.float64).reshape(-1)

    grads: dict[str, np.ndarray] = {}
    grads["w_s"] = trace.pooled.T @ d_logits
    grads["b_s"] = np.asarray(d_logits.sum())
    d_pooled = d_logits[:, None] * params.w_s[None, :]

    b, m, _ = trace.x.shape
    d_h = np.repeat(d_pooled[:, None, :], m, axis=1) / m
    for i in reversed(range(params.layers)):
        d_in, d_wq, d_wk, d_wv = _attention_backward(
            d_h, trace.caches[i], params.w_q[i], params.w_k[i], params.w_v[i],
            params.heads)
        if params.residual:
            d_in = d_in + d_h
        grads[f"w_q.{i}"] = d_wq
        grads[f"w_k.{i}"] = d_wk
        grads[f"w_v.{i}"] = d_wv
        d_h = d_in
    grads["x"] = d_h
    return grads


def adam_step(param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray,
              t: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8):
    """One Adam update (in place on ``param``, ``m``, ``v``); ``t`` is 1-based."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class AdamState:
    """Adam moments for a parameter dict, with a shared step counter."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> bool:
        """Apply one update; returns False (and changes nothing) on non-finite grads."""
        for g in grads.values():
            if not np.all(np.isfinite(g)):
                return False
        self.t += 1
        for key, p in params.items():
            adam_step(p, grads[key], self.m[key], self.v[key], self.t,
                      self.lr, self.beta1, self.beta2, self.eps)
        return True


CHECKPOINT_VERSION = 1


def save_checkpoint(path: str, params: ModelParameters, config: dict,
                    adam: AdamState | None = None) -> None:
    """Serialize parameters, config, and optimizer state to an .npz file."""
    payload: dict[str, np.ndarray] = {}
    for key, arr in params.param_dict().items():
        payload[f"param/{key}"] = arr
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": config,
        "heads": params.heads,
        "residual": params.residual,
        "layers": params.layers,
        "tables": {"k": params.tables.k, "tau": params.tables.tau,
                   "dist_cap": params.tables.dist_cap},
    }
    if adam is not None:
        meta["adam"] = {"lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2,
                        "eps": adam.eps, "t": adam.t}
        for key, arr in adam.m.items():
            payload[f"adam_m/{key}"] = arr
        for key, arr in adam.v.items():
            payload[f"adam_v/{key}"] = arr
    payload["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **payload)


def load_checkpoint(path: str):
    """Restore (params, config, adam) from ``save_checkpoint`` output."""
    try:
        data = np.load(path)
    except OSError as exc:
        raise DataError(f"cannot open checkpoint {path!r}: {exc}") from None
    with data:
        if "meta" not in data:
            raise DataError(f"{path!r} is not a recognized checkpoint")
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("version") != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {meta.get('version')}")

        tinfo = meta["tables"]
        tables = EncodingTables.__new__(EncodingTables)
        tables.k = tinfo["k"]
        tables.tau = tinfo["tau"]
        tables.dist_cap = tinfo["dist_cap"]
        tables.diff = data["param/tables.diff"]
        tables.dist = data["param/tables.dist"]
        tables.temp = data["param/tables.temp"]

        layers = meta["layers"]
        params = ModelParameters(
            w_q=[data[f"param/w_q.{i}"] for i in range(layers)],
            w_k=[data[f"param/w_k.{i}"] for i in range(layers)],
            w_v=[data[f"param/w_v.{i}"] for i in range(layers)],
            w_s=data["param/w_s"],
            b_s=data["param/b_s"],
            tables=tables,
            heads=meta["heads"],
            residual=meta["residual"],
        )

        adam = None
        if "adam" in meta:
            ainfo = meta["adam"]
            adam = AdamState(params.param_dict(), ainfo["lr"], ainfo["beta1"],
                             ainfo["beta2"], ainfo["eps"])
            adam.t = ainfo["t"]
            for key in adam.m:
                adam.m[key] = data[f"adam_m/{key}"]
                adam.v[key] = data[f"adam_v/{key}"]
        return params, meta["config"], adam

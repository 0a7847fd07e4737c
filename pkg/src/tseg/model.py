"""The temporal segmentation network.

A fixed-length window of frame embeddings is summed with a learned
positional table, passed through a stack of pre-norm multihead attention
blocks (full bidirectional attention, no mask), and classified per position
by independent linear+sigmoid heads, one per window slot.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, ShapeError
from .optim import Parameter


@dataclass(frozen=True)
class ModelConfig:
    window_len: int = 60
    embed_dim: int = 512
    num_heads: int = 16
    num_layers: int = 16
    ff_dim: int | None = None
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.ff_dim is None:
            object.__setattr__(self, "ff_dim", 4 * self.embed_dim)
        if self.window_len < 1 or self.num_layers < 1 or self.ff_dim < 1:
            raise ConfigError("window_len, num_layers and ff_dim must be >= 1")
        if self.num_heads < 1 or self.embed_dim % self.num_heads != 0:
            raise ConfigError(
                f"embed_dim {self.embed_dim} must be divisible by num_heads {self.num_heads}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")

    @property
    def head_dim(self):
        return self.embed_dim // self.num_heads


def param_count(config):
    """Closed-form parameter count for a config."""
    t, d, f = config.window_len, config.embed_dim, config.ff_dim
    per_layer = 2 * d + 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d)
    return t * d + config.num_layers * per_layer + 2 * d + t * (d + 1)


class Block:
    """One pre-norm attention block: LN -> MHA -> add, LN -> FF -> add."""

    FIELDS = (
        "ln1_gain", "ln1_bias", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
        "ln2_gain", "ln2_bias", "ff1_w", "ff1_b", "ff2_w", "ff2_b",
    )

    def __init__(self, params):
        for f, p in zip(self.FIELDS, params):
            setattr(self, f, p)

    def parameters(self):
        return [getattr(self, f) for f in self.FIELDS]

    def attention(self, x, num_heads):
        """Multihead scaled dot-product attention over an already-normalized
        input; returns (output tensor (B,T,D), attention weights (B,H,T,T))."""
        bsz, t, d = x.shape
        dk = d // num_heads
        q = _linear(x, self.wq, self.bq)
        k = _linear(x, self.wk, self.bk)
        v = _linear(x, self.wv, self.bv)
        qh = ad.reshape(ad.split_heads(q, num_heads), (bsz * num_heads, t, dk))
        kh = ad.reshape(ad.split_heads(k, num_heads), (bsz * num_heads, t, dk))
        vh = ad.reshape(ad.split_heads(v, num_heads), (bsz * num_heads, t, dk))
        scores = ad.scale(ad.bmm(qh, kh, trans_b=True), 1.0 / math.sqrt(dk))
        weights = ad.softmax_rows(scores)
        ctx = ad.bmm(weights, vh)
        ctx = ad.merge_heads(ad.reshape(ctx, (bsz, num_heads, t, dk)))
        out = _linear(ctx, self.wo, self.bo)
        return out, weights.data.reshape(bsz, num_heads, t, t)

    def apply(self, h, num_heads, dropout_rate=0.0, rng=None):
        a = ad.layer_norm(h, self.ln1_gain.tensor, self.ln1_bias.tensor)
        attn_out, _ = self.attention(a, num_heads)
        if dropout_rate > 0.0:
            attn_out = ad.dropout(attn_out, dropout_rate, rng)
        h = ad.add(h, attn_out)
        a2 = ad.layer_norm(h, self.ln2_gain.tensor, self.ln2_bias.tensor)
        f = _linear(ad.gelu(_linear(a2, self.ff1_w, self.ff1_b)), self.ff2_w, self.ff2_b)
        if dropout_rate > 0.0:
            f = ad.dropout(f, dropout_rate, rng)
        return ad.add(h, f)


def _linear(x, w, b):
    """(B, T, Din) -> (B, T, Dout) through a weight Parameter (Din, Dout)."""
    bsz, t, din = x.shape
    y = ad.add_bias(ad.matmul(ad.reshape(x, (bsz * t, din)), w.tensor), b.tensor)
    return ad.reshape(y, (bsz, t, w.shape[1]))


def _xavier(rng, fan_in, fan_out, shape, dtype):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class TemporalSegmenter:
    """Positional table + attention stack + per-position classifiers."""

    def __init__(self, config, seed=0, dtype=np.float32):
        self.config = config
        t, d, f = config.window_len, config.embed_dim, config.ff_dim
        rng = np.random.default_rng(seed)
        self.pos_embed = Parameter(
            (rng.normal(0.0, 0.02, size=(t, d))).astype(dtype), name="pos_embed"
        )
        self.layers = []
        for i in range(config.num_layers):
            params = []
            for fname in Block.FIELDS:
                full = f"layers.{i}.{fname}"
                if fname in ("ln1_gain", "ln2_gain"):
                    params.append(Parameter(np.ones(d, dtype=dtype), name=full))
                elif fname in ("ln1_bias", "ln2_bias"):
                    params.append(Parameter(np.zeros(d, dtype=dtype), name=full))
                elif fname in ("wq", "wk", "wv", "wo"):
                    params.append(Parameter(_xavier(rng, d, d, (d, d), dtype), name=full))
                elif fname in ("bq", "bk", "bv", "bo"):
                    params.append(Parameter(np.zeros(d, dtype=dtype), name=full))
                elif fname == "ff1_w":
                    params.append(Parameter(_xavier(rng, d, f, (d, f), dtype), name=full))
                elif fname == "ff1_b":
                    params.append(Parameter(np.zeros(f, dtype=dtype), name=full))
                elif fname == "ff2_w":
                    params.append(Parameter(_xavier(rng, f, d, (f, d), dtype), name=full))
                else:  # ff2_b
                    params.append(Parameter(np.zeros(d, dtype=dtype), name=full))
            self.layers.append(Block(params))
        self.final_ln_gain = Parameter(np.ones(d, dtype=dtype), name="final_ln_gain")
        self.final_ln_bias = Parameter(np.zeros(d, dtype=dtype), name="final_ln_bias")
        # genuinely independent per-position heads, no weight sharing
        self.classifiers = []
        for pos in range(t):
            w = Parameter(_xavier(rng, d, 1, (d,), dtype), name=f"cls.{pos}.w")
            b = Parameter(np.zeros((), dtype=dtype), name=f"cls.{pos}.b")
            self.classifiers.append((w, b))

    @property
    def dtype(self):
        return self.pos_embed.data.dtype

    def parameters(self):
        """All parameters, in the declared (checkpoint) order."""
        out = [self.pos_embed]
        for layer in self.layers:
            out.extend(layer.parameters())
        out.extend([self.final_ln_gain, self.final_ln_bias])
        for w, b in self.classifiers:
            out.extend([w, b])
        return out

    def num_params(self):
        return sum(p.data.size for p in self.parameters())

    def zero_grads(self):
        for p in self.parameters():
            p.zero_grad()

    def add_positional(self, batch):
        x = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch, dtype=self.dtype))
        return ad.add_positional(x, self.pos_embed.tensor)

    def attention_block(self, e, layer_index=0, train_mode=False, rng=None):
        """Apply one full block (LN, attention, residual, LN, FF, residual)."""
        x = e if isinstance(e, Tensor) else Tensor(np.asarray(e, dtype=self.dtype))
        rate = self.config.dropout_rate if train_mode else 0.0
        return self.layers[layer_index].apply(x, self.config.num_heads, rate, rng)

    def forward(self, batch, train_mode=False, rng=None):
        """(B, T, D) embeddings -> (B, T) per-position probabilities."""
        x = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch, dtype=self.dtype))
        cfg = self.config
        if x.data.ndim != 3 or x.shape[1] != cfg.window_len or x.shape[2] != cfg.embed_dim:
            raise ShapeError(
                f"forward: expected (B, {cfg.window_len}, {cfg.embed_dim}), got {x.shape}"
            )
        rate = cfg.dropout_rate if train_mode else 0.0
        if rate > 0.0 and rng is None:
            raise ConfigError("dropout is active but no rng was supplied")
        h = ad.add_positional(x, self.pos_embed.tensor)
        for layer in self.layers:
            h = layer.apply(h, cfg.num_heads, rate, rng)
        h = ad.layer_norm(h, self.final_ln_gain.tensor, self.final_ln_bias.tensor)
        w = ad.stack_rows([w.tensor for w, _ in self.classifiers])
        b = ad.stack_scalars([b.tensor for _, b in self.classifiers])
        return ad.sigmoid(ad.pos_linear(h, w, b))

    def forward_probs(self, batch):
        """Inference forward: no graph recording, returns a numpy (B, T) array."""
        with ad.no_grad():
            return self.forward(batch, train_mode=False).data

    def cast(self, dtype):
        """Clone of this model with parameters cast to dtype (fresh Adam state)."""
        clone = TemporalSegmenter.__new__(TemporalSegmenter)
        clone.config = self.config
        clone.pos_embed = self.pos_embed.astype(dtype)
        clone.layers = [
            Block([p.astype(dtype) for p in layer.parameters()]) for layer in self.layers
        ]
        clone.final_ln_gain = self.final_ln_gain.astype(dtype)
        clone.final_ln_bias = self.final_ln_bias.astype(dtype)
        clone.classifiers = [(w.astype(dtype), b.astype(dtype)) for w, b in self.classifiers]
        return clone

    def to_double(self):
        return self.cast(np.float64)


def init_params(config, seed):
    """Deterministically initialize a model for a config and seed."""
    return TemporalSegmenter(config, seed=seed)


def bce_loss(probs, labels, clamp=1e-7):
    """Per-frame binary cross-entropy, averaged over positions then batch.

    With a dense (B, T) layout that equals the global mean. Probabilities
    are clamped to [clamp, 1-clamp] before the logs.
    """
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if not np.all(np.isin(uniq, (0, 1))):
        raise ContractError(f"bce_loss: labels must be binary, got values {uniq[:5]}")
    return ad.bce_loss_op(probs, labels.astype(probs.dtype), clamp)


def transition_penalty(probs, lam):
    """Regularizer discouraging adjacent-position probability jumps.

    Disabled by default in training configs: it trades recall for fewer
    false positives, a poor default for a skip-detection task.
    """
    return ad.transition_penalty_op(probs, lam)

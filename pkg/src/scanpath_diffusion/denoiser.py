"""Transformer denoiser: predicts the clean latent from a noisy one.

Encoder-only, pre-norm residual blocks (attention + width-4d GELU feed
forward), layer norms on the way in and out, and no output head: the final
layer norm IS the prediction, in latent space. The step index enters once,
as a sinusoidal code pushed through a two-layer MLP and added to every
position of the input; the model has no positional table of its own (the
latents already carry one). Attention never attends to padding slots.

Forward and backward are written out by hand on float64 numpy; forward can
record a cache that backward consumes, returning both parameter gradients
and the gradient with respect to the input latents (the training loss
needs the latter, since the latents are built from trainable tables).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import ValidationError

LN_EPS = 1e-5
MASK_BIAS = -1e30


# ---------------------------------------------------------------------------
# primitive ops (forward + backward pairs)

def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return xhat * g + b, (xhat, inv)


def _layer_norm_bwd(d_out, g, cache):
    xhat, inv = cache
    d_xhat = d_out * g
    d_g = (d_out * xhat).sum(axis=tuple(range(d_out.ndim - 1)))
    d_b = d_out.sum(axis=tuple(range(d_out.ndim - 1)))
    m1 = d_xhat.mean(axis=-1, keepdims=True)
    m2 = (d_xhat * xhat).mean(axis=-1, keepdims=True)
    d_x = inv * (d_xhat - m1 - xhat * m2)
    return d_x, d_g, d_b


def _linear(x, w, b):
    return x @ w + b


def _linear_bwd(d_out, x, w):
    din, dout = w.shape
    d_w = x.reshape(-1, din).T @ d_out.reshape(-1, dout)
    d_b = d_out.reshape(-1, dout).sum(axis=0)
    d_x = d_out @ w.T
    return d_x, d_w, d_b


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def _gelu_grad(x):
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0))) + x * np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def timestep_embedding(t, dim: int, max_period: float = 10000.0) -> np.ndarray:
    """Sinusoidal code for (a batch of) step indices, shape (B, dim)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(max_period) * np.arange(half) / half)
    args = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.cos(args), np.sin(args)], axis=1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((emb.shape[0], 1))], axis=1)
    return emb


# ---------------------------------------------------------------------------
# parameters

@dataclass
class DenoiserParams:
    dim: int
    n_blocks: int
    n_heads: int
    tensors: dict[str, np.ndarray]

    @property
    def head_dim(self) -> int:
        return self.dim // self.n_heads


def init_denoiser(dim: int, n_blocks: int, n_heads: int, rng: np.random.Generator) -> DenoiserParams:
    """Fresh denoiser weights.

    Normal(0, 0.02) for weight matrices, zeros for biases and for the
    closing projection of each residual branch, so every block starts as
    the identity and the early updates stay small.
    """
    if dim % n_heads != 0:
        raise ValidationError(f"dim {dim} not divisible by {n_heads} heads")
    if n_blocks < 1:
        raise ValidationError(f"need at least 1 block, got {n_blocks}")

    def w(*shape):
        return rng.normal(0.0, 0.02, size=shape)

    t = {
        "time_w1": w(dim, 4 * dim), "time_b1": np.zeros(4 * dim),
        "time_w2": w(4 * dim, dim), "time_b2": np.zeros(dim),
        "ln_in_g": np.ones(dim), "ln_in_b": np.zeros(dim),
        "ln_out_g": np.ones(dim), "ln_out_b": np.zeros(dim),
    }
    for i in range(n_blocks):
        p = f"b{i}."
        t[p + "ln1_g"] = np.ones(dim)
        t[p + "ln1_b"] = np.zeros(dim)
        t[p + "wq"] = w(dim, dim)
        t[p + "bq"] = np.zeros(dim)
        t[p + "wk"] = w(dim, dim)
        t[p + "bk"] = np.zeros(dim)
        t[p + "wv"] = w(dim, dim)
        t[p + "bv"] = np.zeros(dim)
        t[p + "wo"] = np.zeros((dim, dim))
        t[p + "bo"] = np.zeros(dim)
        t[p + "ln2_g"] = np.ones(dim)
        t[p + "ln2_b"] = np.zeros(dim)
        t[p + "ffn_w1"] = w(dim, 4 * dim)
        t[p + "ffn_b1"] = np.zeros(4 * dim)
        t[p + "ffn_w2"] = np.zeros((4 * dim, dim))
        t[p + "ffn_b2"] = np.zeros(dim)
    return DenoiserParams(dim=dim, n_blocks=n_blocks, n_heads=n_heads, tensors=t)


# ---------------------------------------------------------------------------
# forward / backward

def _split_heads(x, n_heads):
    b, l, d = x.shape
    return x.reshape(b, l, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, l, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, l, h * dh)


def forward(params: DenoiserParams, z, t, pad_mask, need_cache: bool = False):
    """Run the denoiser. Returns (prediction, cache or None).

    z is (B, L, dim) float; t is a scalar step or a (B,) array; pad_mask is
    (B, L) bool with True on real slots. Padding is excluded from attention
    keys; outputs at padding positions are computed but meaningless.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 3 or z.shape[2] != params.dim:
        raise ValidationError(f"expected z of shape (B, L, {params.dim}), got {z.shape}")
    pad_mask = np.asarray(pad_mask, dtype=bool)
    bsz, seq, dim = z.shape
    p = params.tensors

    t_arr = np.broadcast_to(np.atleast_1d(np.asarray(t, dtype=np.float64)), (bsz,))
    t_code = timestep_embedding(t_arr, dim)
    t_hid = _linear(t_code, p["time_w1"], p["time_b1"])
    t_act = _gelu(t_hid)
    t_vec = _linear(t_act, p["time_w2"], p["time_b2"])

    z_in = z + t_vec[:, None, :]
    h, ln_in_cache = _layer_norm(z_in, p["ln_in_g"], p["ln_in_b"])

    key_bias = np.where(pad_mask, 0.0, MASK_BIAS)[:, None, None, :]
    scale = 1.0 / math.sqrt(params.head_dim)

    blocks = []
    for i in range(params.n_blocks):
        pre = f"b{i}."
        h_pre_attn = h
        a, ln1_cache = _layer_norm(h, p[pre + "ln1_g"], p[pre + "ln1_b"])
        q = _split_heads(_linear(a, p[pre + "wq"], p[pre + "bq"]), params.n_heads)
        k = _split_heads(_linear(a, p[pre + "wk"], p[pre + "bk"]), params.n_heads)
        v = _split_heads(_linear(a, p[pre + "wv"], p[pre + "bv"]), params.n_heads)
        scores = q @ k.swapaxes(-1, -2) * scale + key_bias
        scores -= scores.max(axis=-1, keepdims=True)
        att = np.exp(scores)
        att /= att.sum(axis=-1, keepdims=True)
        ctx = _merge_heads(att @ v)
        attn_out = _linear(ctx, p[pre + "wo"], p[pre + "bo"])
        h = h_pre_attn + attn_out

        h_pre_ffn = h
        fin, ln2_cache = _layer_norm(h, p[pre + "ln2_g"], p[pre + "ln2_b"])
        u = _linear(fin, p[pre + "ffn_w1"], p[pre + "ffn_b1"])
        g = _gelu(u)
        ffn_out = _linear(g, p[pre + "ffn_w2"], p[pre + "ffn_b2"])
        h = h_pre_ffn + ffn_out
        if need_cache:
            blocks.append({
                "a": a, "ln1": ln1_cache, "q": q, "k": k, "v": v, "att": att,
                "ctx": ctx, "ln2": ln2_cache, "fin": fin, "u": u, "g": g,
            })

    out, ln_out_cache = _layer_norm(h, p["ln_out_g"], p["ln_out_b"])
    if not need_cache:
        return out, None
    cache = {
        "z_shape": z.shape, "t_code": t_code, "t_hid": t_hid, "t_act": t_act,
        "ln_in": ln_in_cache, "ln_out": ln_out_cache, "blocks": blocks,
    }
    return out, cache


def backward(params: DenoiserParams, cache, d_out):
    """Backprop through a cached forward pass.

    Returns (grads, d_z): parameter gradients keyed like the tensors dict,
    and the gradient with respect to the input latents.
    """
    p = params.tensors
    grads = {name: np.zeros_like(arr) for name, arr in p.items()}
    scale = 1.0 / math.sqrt(params.head_dim)

    d_h, d_g, d_b = _layer_norm_bwd(d_out, p["ln_out_g"], cache["ln_out"])
    grads["ln_out_g"] += d_g
    grads["ln_out_b"] += d_b

    for i in reversed(range(params.n_blocks)):
        pre = f"b{i}."
        blk = cache["blocks"][i]

        # feed-forward branch
        d_ffn_out = d_h
        d_g_act, d_w2, d_b2 = _linear_bwd(d_ffn_out, blk["g"], p[pre + "ffn_w2"])
        grads[pre + "ffn_w2"] += d_w2
        grads[pre + "ffn_b2"] += d_b2
        d_u = d_g_act * _gelu_grad(blk["u"])
        d_fin, d_w1, d_b1 = _linear_bwd(d_u, blk["fin"], p[pre + "ffn_w1"])
        grads[pre + "ffn_w1"] += d_w1
        grads[pre + "ffn_b1"] += d_b1
        d_h_ln2, d_g2, d_b2g = _layer_norm_bwd(d_fin, p[pre + "ln2_g"], blk["ln2"])
        grads[pre + "ln2_g"] += d_g2
        grads[pre + "ln2_b"] += d_b2g
        d_h = d_h + d_h_ln2

        # attention branch
        d_attn_out = d_h
        d_ctx, d_wo, d_bo = _linear_bwd(d_attn_out, blk["ctx"], p[pre + "wo"])
        grads[pre + "wo"] += d_wo
        grads[pre + "bo"] += d_bo
        d_ctx_h = _split_heads(d_ctx, params.n_heads)
        att = blk["att"]
        d_att = d_ctx_h @ blk["v"].swapaxes(-1, -2)
        d_v = att.swapaxes(-1, -2) @ d_ctx_h
        d_scores = att * (d_att - (d_att * att).sum(axis=-1, keepdims=True))
        d_q = d_scores @ blk["k"] * scale
        d_k = d_scores.swapaxes(-1, -2) @ blk["q"] * scale
        d_a = np.zeros_like(blk["a"])
        for name, d_head in (("wq", d_q), ("wk", d_k), ("wv", d_v)):
            d_x, d_w, d_bias = _linear_bwd(_merge_heads(d_head), blk["a"], p[pre + name])
            grads[pre + name] += d_w
            grads[pre + "b" + name[1]] += d_bias
            d_a += d_x
        d_h_ln1, d_g1, d_b1g = _layer_norm_bwd(d_a, p[pre + "ln1_g"], blk["ln1"])
        grads[pre + "ln1_g"] += d_g1
        grads[pre + "ln1_b"] += d_b1g
        d_h = d_h + d_h_ln1

    d_z_in, d_g_in, d_b_in = _layer_norm_bwd(d_h, p["ln_in_g"], cache["ln_in"])
    grads["ln_in_g"] += d_g_in
    grads["ln_in_b"] += d_b_in

    d_t_vec = d_z_in.sum(axis=1)
    d_t_act, d_tw2, d_tb2 = _linear_bwd(d_t_vec, cache["t_act"], p["time_w2"])
    grads["time_w2"] += d_tw2
    grads["time_b2"] += d_tb2
    d_t_hid = d_t_act * _gelu_grad(cache["t_hid"])
    _, d_tw1, d_tb1 = _linear_bwd(d_t_hid, cache["t_code"], p["time_w1"])
    grads["time_w1"] += d_tw1
    grads["time_b1"] += d_tb1

    return grads, d_z_in

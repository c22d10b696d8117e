"""Transformer building blocks shared by the fusion encoder and the decoder."""

from __future__ import annotations

import math

from . import autodiff as ad
from .autodiff import Tensor
from .model import ModelConfig, PolicyParameters


def multi_head_attention(
    params: PolicyParameters,
    prefix: str,
    queries: Tensor,
    keys_values: Tensor,
    cfg: ModelConfig,
) -> Tensor:
    """Full (unmasked) multi-head attention of `queries` over `keys_values`."""
    p = params.tensors
    q = ad.add(ad.matmul(queries, p[f"{prefix}.wq"]), p[f"{prefix}.bq"])
    k = ad.add(ad.matmul(keys_values, p[f"{prefix}.wk"]), p[f"{prefix}.bk"])
    v = ad.add(ad.matmul(keys_values, p[f"{prefix}.wv"]), p[f"{prefix}.bv"])
    dh = cfg.d_model // cfg.heads
    scale = 1.0 / math.sqrt(dh)
    per_head = []
    for h in range(cfg.heads):
        lo, hi = h * dh, (h + 1) * dh
        qh = ad.slice_cols(q, lo, hi)
        kh = ad.slice_cols(k, lo, hi)
        vh = ad.slice_cols(v, lo, hi)
        scores = ad.mul(ad.matmul(qh, ad.transpose(kh)), scale)
        attn = ad.softmax(scores)
        per_head.append(ad.matmul(attn, vh))
    merged = ad.concat_cols(per_head)
    return ad.add(ad.matmul(merged, p[f"{prefix}.wo"]), p[f"{prefix}.bo"])


def feed_forward(params: PolicyParameters, prefix: str, x: Tensor) -> Tensor:
    p = params.tensors
    hidden = ad.relu(ad.add(ad.matmul(x, p[f"{prefix}.w1"]), p[f"{prefix}.b1"]))
    return ad.add(ad.matmul(hidden, p[f"{prefix}.w2"]), p[f"{prefix}.b2"])


def residual_norm(
    params: PolicyParameters, prefix: str, x: Tensor, sub: Tensor, cfg: ModelConfig
) -> Tensor:
    p = params.tensors
    return ad.layer_norm(
        ad.add(x, sub), p[f"{prefix}.g"], p[f"{prefix}.b"], eps=cfg.layer_norm_eps
    )

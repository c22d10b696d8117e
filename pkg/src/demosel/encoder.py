"""Multi-modal interactive encoding.

The query and every candidate contribute one token per modality, laid out
as [query_text, query_image, cand0_text, cand0_image, ...]. Tokens get a
learned role embedding per modality; candidate tokens additionally get a
per-slot positional embedding tying a candidate's modalities together.
A full-attention transformer encoder then fuses everything into the
interactive feature matrix M.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import CapacityError, ContractError, DimensionError
from .features import IMAGE, TEXT, CandidatePool, FeatureVector, Query
from .layers import feed_forward, multi_head_attention, residual_norm
from .model import ModelConfig, PolicyParameters

QUERY = "query"


@dataclass
class InteractiveFeatures:
    """Fused token matrix plus the (item, modality) tag of each row."""

    M: Tensor
    token_map: list[tuple[object, str]]

    def __post_init__(self):
        if self.M.shape[0] != len(self.token_map):
            raise DimensionError("token_map length does not match M rows")


@dataclass
class EncodedQuery:
    """Everything the policy needs for one query: the interactive features
    and the per-candidate projected vectors used for scoring and decoder
    feedback."""

    features: InteractiveFeatures
    cand_text: Tensor  # (n, d_model) projected text features
    cand_image: Tensor  # (n, d_model) projected image features (placeholder rows
    # for candidates without images)
    demo_embed: Tensor  # (n, d_model) decoder feedback embedding per candidate
    n: int

    @property
    def M(self) -> Tensor:
        return self.features.M


def project_features(
    raw: FeatureVector, params: PolicyParameters, cfg: ModelConfig
) -> Tensor:
    """Affine map from provider dimension d_e into model width."""
    if raw.dim != cfg.d_e:
        raise DimensionError(f"feature dim {raw.dim} != configured d_e {cfg.d_e}")
    key = "proj.text" if raw.modality == TEXT else "proj.image"
    vec = Tensor(raw.values)
    return ad.add(ad.matmul(vec, params[f"{key}.w"]), params[f"{key}.b"])


def _image_token(item, params: PolicyParameters, cfg: ModelConfig) -> Tensor:
    """Projected pooled image feature, or the learned no-image placeholder."""
    if not item.image_features:
        return params["noimage"]
    pooled = np.mean([fv.values for fv in item.image_features], axis=0)
    return project_features(FeatureVector(pooled, IMAGE), params, cfg)


def apply_role_position(
    tokens: list[tuple[object, str, Tensor]],
    params: PolicyParameters,
    cfg: ModelConfig,
) -> list[tuple[object, str, Tensor]]:
    """Add role embeddings to every token and slot embeddings to candidate
    tokens; query tokens carry no positional term."""
    slots = params["role.slots"]
    out = []
    for item_tag, modality, vec in tokens:
        role = params["role.text"] if modality == TEXT else params["role.image"]
        shifted = ad.add(vec, role)
        if item_tag != QUERY:
            k = int(item_tag)
            if k >= cfg.max_slots:
                raise CapacityError(
                    f"candidate slot {k} exceeds positional table size {cfg.max_slots}"
                )
            shifted = ad.add(shifted, ad.take_row(slots, k))
        out.append((item_tag, modality, shifted))
    return out


def fuse(
    tokens: list[tuple[object, str, Tensor]],
    params: PolicyParameters,
    cfg: ModelConfig,
) -> InteractiveFeatures:
    """Run the fusion encoder over the token sequence; every output row
    attends to every input row."""
    if len(tokens) < 2:
        raise ContractError("fusion needs at least a query token and a candidate token")
    x = ad.stack_rows([vec for _, _, vec in tokens])
    for layer in range(cfg.encoder_layers):
        attn = multi_head_attention(params, f"enc{layer}.attn", x, x, cfg)
        x = residual_norm(params, f"enc{layer}.ln1", x, attn, cfg)
        ffn = feed_forward(params, f"enc{layer}.ffn", x)
        x = residual_norm(params, f"enc{layer}.ln2", x, ffn, cfg)
    token_map = [(tag, modality) for tag, modality, _ in tokens]
    return InteractiveFeatures(M=x, token_map=token_map)


def encode(
    query: Query, pool: CandidatePool, params: PolicyParameters, cfg: ModelConfig
) -> EncodedQuery:
    """Project, tag, and fuse a query with its candidate pool."""
    if len(pool) == 0:
        raise ContractError("candidate pool is empty")
    tokens: list[tuple[object, str, Tensor]] = []
    tokens.append((QUERY, TEXT, project_features(query.text_feature, params, cfg)))
    tokens.append((QUERY, IMAGE, _image_token(query, params, cfg)))

    text_rows, image_rows = [], []
    for k, demo in enumerate(pool.demos):
        t_vec = project_features(demo.text_feature, params, cfg)
        i_vec = _image_token(demo, params, cfg)
        tokens.append((k, TEXT, t_vec))
        tokens.append((k, IMAGE, i_vec))
        text_rows.append(t_vec)
        image_rows.append(i_vec)

    features = fuse(apply_role_position(tokens, params, cfg), params, cfg)
    cand_text = ad.stack_rows(text_rows)
    cand_image = ad.stack_rows(image_rows)
    demo_embed = ad.mul(ad.add(cand_text, cand_image), 0.5)
    return EncodedQuery(
        features=features,
        cand_text=cand_text,
        cand_image=cand_image,
        demo_embed=demo_embed,
        n=len(pool),
    )

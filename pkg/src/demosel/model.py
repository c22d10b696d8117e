"""Model configuration and the learnable parameter set.

Parameters live in a flat name -> Tensor mapping with dotted names
(``enc0.attn.wq``, ``role.slots``, ...). The flat layout keeps checkpoint
serialization and finite-difference checks trivial.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError


@dataclass
class ModelConfig:
    """Architecture of the selection network.

    Desk-scale defaults (2 encoder / 2 decoder layers, 4 heads, width 64)
    keep CI runtimes small; every field is adjustable.
    """

    d_e: int = 32
    d_model: int = 64
    encoder_layers: int = 2
    decoder_layers: int = 2
    heads: int = 4
    ffn_dim: int = 128
    max_slots: int = 64
    alpha_text: float = 0.5
    alpha_image: float = 0.5
    learnable_alpha: bool = False
    autoregressive: bool = True  # False: decoder ignores selected demos (ablation)
    init_std: float = 0.02
    layer_norm_eps: float = 1e-5

    def validate(self):
        if self.d_e < 1 or self.d_model < 1:
            raise ConfigError("d_e and d_model must be positive")
        if self.d_model % self.heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by heads {self.heads}"
            )
        if self.encoder_layers < 1 or self.decoder_layers < 1:
            raise ConfigError("need at least one encoder and one decoder layer")
        if self.max_slots < 1:
            raise ConfigError("max_slots must be positive")
        if self.alpha_text < 0 or self.alpha_image < 0:
            raise ConfigError("alpha weights must be nonnegative")
        if self.alpha_text + self.alpha_image <= 0:
            raise ConfigError("alpha_text + alpha_image must be > 0")
        if self.init_std <= 0:
            raise ConfigError("init_std must be positive")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
        return cls(**d).validate()


def _attention_block(names: list, prefix: str, d_model: int):
    for part in ("wq", "wk", "wv", "wo"):
        names.append((f"{prefix}.{part}", (d_model, d_model), "weight"))
    for part in ("bq", "bk", "bv", "bo"):
        names.append((f"{prefix}.{part}", (d_model,), "zero"))


def _ffn_block(names: list, prefix: str, d_model: int, ffn: int):
    names.append((f"{prefix}.w1", (d_model, ffn), "weight"))
    names.append((f"{prefix}.b1", (ffn,), "zero"))
    names.append((f"{prefix}.w2", (ffn, d_model), "weight"))
    names.append((f"{prefix}.b2", (d_model,), "zero"))


def _layer_norm_block(names: list, prefix: str, d_model: int):
    names.append((f"{prefix}.g", (d_model,), "one"))
    names.append((f"{prefix}.b", (d_model,), "zero"))


def _parameter_specs(cfg: ModelConfig) -> list:
    names: list = []
    names.append(("proj.text.w", (cfg.d_e, cfg.d_model), "weight"))
    names.append(("proj.text.b", (cfg.d_model,), "zero"))
    names.append(("proj.image.w", (cfg.d_e, cfg.d_model), "weight"))
    names.append(("proj.image.b", (cfg.d_model,), "zero"))
    names.append(("role.text", (cfg.d_model,), "weight"))
    names.append(("role.image", (cfg.d_model,), "weight"))
    names.append(("role.slots", (cfg.max_slots, cfg.d_model), "weight"))
    names.append(("noimage", (cfg.d_model,), "weight"))
    for layer in range(cfg.encoder_layers):
        _attention_block(names, f"enc{layer}.attn", cfg.d_model)
        _layer_norm_block(names, f"enc{layer}.ln1", cfg.d_model)
        _ffn_block(names, f"enc{layer}.ffn", cfg.d_model, cfg.ffn_dim)
        _layer_norm_block(names, f"enc{layer}.ln2", cfg.d_model)
    names.append(("dec.start", (cfg.d_model,), "weight"))
    for layer in range(cfg.decoder_layers):
        _attention_block(names, f"dec{layer}.self", cfg.d_model)
        _layer_norm_block(names, f"dec{layer}.ln1", cfg.d_model)
        _attention_block(names, f"dec{layer}.cross", cfg.d_model)
        _layer_norm_block(names, f"dec{layer}.ln2", cfg.d_model)
        _ffn_block(names, f"dec{layer}.ffn", cfg.d_model, cfg.ffn_dim)
        _layer_norm_block(names, f"dec{layer}.ln3", cfg.d_model)
    names.append(("alpha.text", (), "alpha_text"))
    names.append(("alpha.image", (), "alpha_image"))
    return names


@dataclass
class PolicyParameters:
    """All learnable weights, keyed by dotted name."""

    tensors: dict[str, Tensor]
    config: ModelConfig = field(default_factory=ModelConfig)

    @classmethod
    def initialize(cls, cfg: ModelConfig, seed: int = 0) -> "PolicyParameters":
        """Fresh parameters: N(0, init_std) weights and embeddings,
        layer-norm gain 1 / bias 0, zero biases."""
        cfg.validate()
        rng = np.random.default_rng(seed)
        tensors: dict[str, Tensor] = {}
        for name, shape, kind in _parameter_specs(cfg):
            if kind == "weight":
                data = rng.normal(0.0, cfg.init_std, size=shape)
            elif kind == "zero":
                data = np.zeros(shape)
            elif kind == "one":
                data = np.ones(shape)
            elif kind == "alpha_text":
                data = np.array(cfg.alpha_text)
            elif kind == "alpha_image":
                data = np.array(cfg.alpha_image)
            else:  # pragma: no cover
                raise AssertionError(kind)
            requires = kind not in ("alpha_text", "alpha_image") or cfg.learnable_alpha
            tensors[name] = Tensor(data, requires_grad=requires)
        return cls(tensors=tensors, config=cfg)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def items(self):
        return self.tensors.items()

    def names(self) -> list[str]:
        return list(self.tensors)

    def trainable(self):
        return {k: t for k, t in self.tensors.items() if t.requires_grad}

    def zero_grad(self):
        for t in self.tensors.values():
            if t.requires_grad:
                t.zero_grad()

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self.tensors.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        missing = set(self.tensors) - set(arrays)
        if missing:
            raise ConfigError(f"checkpoint missing parameters: {sorted(missing)[:3]}...")
        for name, t in self.tensors.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ConfigError(
                    f"parameter {name}: shape {arr.shape} != expected {t.data.shape}"
                )
            t.data = np.ascontiguousarray(arr)

    @property
    def alpha(self) -> tuple[Tensor, Tensor]:
        return self.tensors["alpha.text"], self.tensors["alpha.image"]

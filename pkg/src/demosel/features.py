"""Item data model and feature providers.

Items (queries and candidate demonstrations) carry pre-computed embedding
vectors, one per modality. Features come from a pluggable provider; this
module ships a seeded synthetic generator and a JSONL loader with one
record per item:

    {"id": str, "text_feat": [float...], "image_feats": [[float...], ...],
     "answer": str}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError

TEXT = "text"
IMAGE = "image"


@dataclass
class FeatureVector:
    """Fixed-dimension embedding for one modality of one item."""

    values: np.ndarray
    modality: str

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise DimensionError(f"feature vector must be 1-D, got {self.values.shape}")
        if self.modality not in (TEXT, IMAGE):
            raise ConfigError(f"unknown modality {self.modality!r}")
        if not np.all(np.isfinite(self.values)):
            raise DimensionError("feature vector contains non-finite values")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class Query:
    """An input item whose answer must be produced; selection conditions on it."""

    id: str
    text_feature: FeatureVector
    image_features: list[FeatureVector] = field(default_factory=list)
    answer: str | None = None
    text: str = ""


@dataclass
class Demonstration:
    """A candidate example: query-shaped content plus its known answer."""

    id: str
    text_feature: FeatureVector
    image_features: list[FeatureVector] = field(default_factory=list)
    answer: str = ""
    text: str = ""


@dataclass
class CandidatePool:
    """Indexed set of demonstrations available for selection; indices are
    stable for the lifetime of a run."""

    demos: list[Demonstration]

    def __len__(self) -> int:
        return len(self.demos)

    def __getitem__(self, i: int) -> Demonstration:
        return self.demos[i]

    @property
    def size(self) -> int:
        return len(self.demos)


def averaged_features(item) -> np.ndarray:
    """Single d_e vector summarizing an item: mean of text and pooled image
    features (text alone when the item has no image)."""
    text = item.text_feature.values
    if not item.image_features:
        return text.copy()
    img = np.mean([fv.values for fv in item.image_features], axis=0)
    return (text + img) / 2.0


class SyntheticFeatureProvider:
    """Deterministic per-id unit-norm features, for tests and smoke runs.

    The same (id, modality) always yields the same vector, independent of
    call order: each draw is seeded from a hash of (seed, id, modality).
    """

    def __init__(self, d_e: int, seed: int = 0):
        if d_e < 1:
            raise ConfigError(f"d_e must be >= 1, got {d_e}")
        self.d_e = d_e
        self.seed = seed

    def _vector(self, item_id: str, modality: str, k: int = 0) -> np.ndarray:
        digest = hashlib.sha256(
            f"{self.seed}:{item_id}:{modality}:{k}".encode()
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        v = rng.standard_normal(self.d_e)
        return v / np.linalg.norm(v)

    def text(self, item_id: str) -> FeatureVector:
        return FeatureVector(self._vector(item_id, TEXT), TEXT)

    def images(self, item_id: str, count: int = 1) -> list[FeatureVector]:
        return [
            FeatureVector(self._vector(item_id, IMAGE, k), IMAGE) for k in range(count)
        ]


def _item_from_record(rec: dict, d_e: int | None, path: str, lineno: int):
    for key in ("id", "text_feat"):
        if key not in rec:
            raise ConfigError(f"{path}:{lineno}: record missing field {key!r}")
    text = FeatureVector(np.asarray(rec["text_feat"], dtype=np.float64), TEXT)
    if d_e is not None and text.dim != d_e:
        raise DimensionError(
            f"{path}:{lineno}: text_feat has dim {text.dim}, expected {d_e}"
        )
    images = [
        FeatureVector(np.asarray(v, dtype=np.float64), IMAGE)
        for v in rec.get("image_feats", [])
    ]
    for fv in images:
        if fv.dim != text.dim:
            raise DimensionError(f"{path}:{lineno}: image_feat dim {fv.dim} != {text.dim}")
    return str(rec["id"]), text, images, rec.get("answer"), rec.get("text", "")


def load_items_jsonl(path: str | Path, d_e: int | None = None) -> list[Demonstration]:
    """Load items from a JSONL file, one record per line."""
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise ConfigError(f"{path}:{lineno}: invalid JSON ({err})") from err
            item_id, text, images, answer, raw = _item_from_record(
                rec, d_e, str(path), lineno
            )
            items.append(
                Demonstration(
                    id=item_id,
                    text_feature=text,
                    image_features=images,
                    answer="" if answer is None else str(answer),
                    text=raw,
                )
            )
    return items


def load_pool_jsonl(path: str | Path, d_e: int | None = None) -> CandidatePool:
    return CandidatePool(load_items_jsonl(path, d_e))


def queries_from_items(items: list[Demonstration]) -> list[Query]:
    """Reinterpret loaded items as queries (answer becomes ground truth)."""
    return [
        Query(
            id=it.id,
            text_feature=it.text_feature,
            image_features=it.image_features,
            answer=it.answer or None,
            text=it.text,
        )
        for it in items
    ]

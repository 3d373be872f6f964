"""Forest ensembles for all thirteen compared variants, plus JSON persistence."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset, IndexSet, Standardizer, as_index_array, derive_seed, make_rng
from .tree import GrowthConfig, grow_tree, node_count, node_from_dict, predict_tree_batch, tree_depth

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


class Variant(Enum):
    RaF = "RaF"
    DRaF = "DRaF"
    MPRaF_P = "MPRaF-P"
    MPRaF_T = "MPRaF-T"
    MPRaF_N = "MPRaF-N"
    MPDRaF_P = "MPDRaF-P"
    MPDRaF_T = "MPDRaF-T"
    RaF_PCA = "RaF-PCA"
    RaF_LDA = "RaF-LDA"
    DRaF_PCA = "DRaF-PCA"
    DRaF_LDA = "DRaF-LDA"
    Het_RaF = "Het-RaF"
    Het_DRaF = "Het-DRaF"

    @classmethod
    def parse(cls, name: "str | Variant") -> "Variant":
        if isinstance(name, Variant):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for v in cls:
            if v.value.lower() == key:
                return v
        valid = ", ".join(v.value.lower() for v in cls)
        raise ValueError(f"unknown variant {name!r}; valid variants: {valid}")

    @property
    def cli_name(self) -> str:
        return self.value.lower()

    @property
    def spec(self) -> "VariantSpec":
        return VARIANTS[self]


@dataclass(frozen=True)
class VariantSpec:
    root_bootstrap: bool
    node_bootstrap: bool
    split: str
    regularization: str = "tikhonov"
    rotation: str = "none"


VARIANTS = {
    Variant.RaF: VariantSpec(True, False, "axis"),
    Variant.DRaF: VariantSpec(False, True, "axis"),
    Variant.MPRaF_P: VariantSpec(True, False, "mpsvm", "raw"),
    Variant.MPRaF_T: VariantSpec(True, False, "mpsvm", "tikhonov"),
    Variant.MPRaF_N: VariantSpec(True, False, "mpsvm", "nullspace"),
    Variant.MPDRaF_P: VariantSpec(False, True, "mpsvm", "raw"),
    Variant.MPDRaF_T: VariantSpec(False, True, "mpsvm", "tikhonov"),
    Variant.RaF_PCA: VariantSpec(True, False, "rotation", rotation="pca"),
    Variant.RaF_LDA: VariantSpec(True, False, "rotation", rotation="lda"),
    Variant.DRaF_PCA: VariantSpec(False, True, "rotation", rotation="pca"),
    Variant.DRaF_LDA: VariantSpec(False, True, "rotation", rotation="lda"),
    Variant.Het_RaF: VariantSpec(True, False, "heterogeneous"),
    Variant.Het_DRaF: VariantSpec(False, True, "heterogeneous"),
}


def variant_config(variant: Variant | str, base: GrowthConfig | None = None, **overrides) -> GrowthConfig:
    """Growth config for ``variant``; structural fields always come from the variant."""
    v = Variant.parse(variant)
    s = v.spec
    base = base if base is not None else GrowthConfig()
    fields = dict(base.__dict__)
    fields.update(overrides)
    fields.update(split=s.split, node_bootstrap=s.node_bootstrap, rotation=s.rotation)
    if s.split == "mpsvm":
        fields["regularization"] = s.regularization
    return GrowthConfig(**fields)


def tree_seed(seed: int, i: int) -> int:
    return derive_seed(seed, 0x7E, i)


def root_rows_for_tree(variant: Variant | str, n_rows: int, seed: int, i: int) -> np.ndarray:
    """Root rows of tree ``i``: a bootstrap of all rows, or all rows for double variants."""
    rows = np.arange(n_rows)
    if Variant.parse(variant).spec.root_bootstrap:
        return rows[make_rng(tree_seed(seed, i), 0xB0).integers(0, n_rows, size=n_rows)]
    return rows


@dataclass(eq=False)
class ForestModel:
    trees: list
    variant: Variant
    config: GrowthConfig
    n_features: int
    n_classes: int
    label_tokens: tuple[str, ...]
    seed: int
    n_train: int
    scaler: Standardizer | None = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a forest needs at least one tree")

    @property
    def ntree(self) -> int:
        return len(self.trees)

    def prepare(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"feature count mismatch: model expects {self.n_features}, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite input")
        return self.scaler.transform(X) if self.scaler is not None else X

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Per-class vote counts, one row per sample."""
        Z = self.prepare(X)
        out = np.zeros((len(Z), self.n_classes), dtype=np.int64)
        rows = np.arange(len(Z))
        for t in self.trees:
            np.add.at(out, (rows, predict_tree_batch(t, Z)), 1)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum: ties go to the lowest class index
        return np.argmax(self.votes(X), axis=1)

    def mean_node_count(self) -> float:
        return float(np.mean([node_count(t) for t in self.trees]))

    def mean_depth(self) -> float:
        return float(np.mean([tree_depth(t) for t in self.trees]))

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "variant": self.variant.value,
            "config": self.config.to_dict(),
            "label_map": list(self.label_tokens),
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "fingerprint": {"rows": self.n_train, "features": self.n_features, "seed": self.seed},
            "normalizer": self.scaler.to_dict() if self.scaler is not None else None,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format version {d.get('format_version')!r}")
        fp = d["fingerprint"]
        return cls(
            trees=[node_from_dict(t) for t in d["trees"]],
            variant=Variant.parse(d["variant"]),
            config=GrowthConfig.from_dict(d["config"]),
            n_features=int(d["n_features"]),
            n_classes=int(d["n_classes"]),
            label_tokens=tuple(d["label_map"]),
            seed=int(fp["seed"]),
            n_train=int(fp["rows"]),
            scaler=Standardizer.from_dict(d["normalizer"]) if d.get("normalizer") else None,
        )


def _grow_one(args):
    data, variant, config, seed, i = args
    rows = root_rows_for_tree(variant, data.n_rows, seed, i)
    return grow_tree(data, rows, config, derive_seed(tree_seed(seed, i), 1))


def train_forest(ds: Dataset, variant: Variant | str, config: GrowthConfig | None = None, ntree: int = 50,
                 seed: int = 0, normalize: bool = True, n_jobs: int = 1) -> ForestModel:
    """Train ``ntree`` trees of ``variant`` on ``ds``.

    Root-bootstrap variants grow tree ``i`` on a bootstrap of all rows; double
    variants grow every tree on all rows and resample at the nodes instead.
    Per-tree seeds are fixed from ``(seed, i)`` up front, so results do not
    depend on ``n_jobs``.
    """
    v = Variant.parse(variant)
    if ntree < 1:
        raise ValueError("ntree must be at least 1")
    cfg = variant_config(v, config)
    cfg.resolve_mtry(ds.feature_count)
    scaler = Standardizer.fit(ds.features) if normalize else None
    data = ds.with_features(scaler.transform(ds.features)) if scaler is not None else ds
    jobs = [(data, v, cfg, int(seed), i) for i in range(ntree)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            trees = list(ex.map(_grow_one, jobs))
    else:
        trees = [_grow_one(j) for j in jobs]
    tokens = ds.label_tokens if ds.label_tokens is not None else tuple(str(k) for k in range(ds.class_count))
    return ForestModel(trees, v, cfg, ds.feature_count, ds.class_count, tokens, int(seed), ds.n_rows, scaler)


def predict(model: ForestModel, x: np.ndarray) -> int:
    """Majority vote for one sample; ties go to the lowest class index."""
    return int(model.predict(np.asarray(x, dtype=float)[None, :])[0])


def evaluate(model: ForestModel, test_rows: IndexSet | np.ndarray, ds: Dataset) -> dict:
    rows = as_index_array(test_rows)
    if len(rows) == 0:
        raise ValueError("empty test set")
    pred = model.predict(ds.features[rows])
    K = model.n_classes
    conf = np.zeros((K, K), dtype=np.int64)
    np.add.at(conf, (ds.labels[rows], pred), 1)
    return {"accuracy": float(np.trace(conf) / conf.sum()), "confusion": conf, "predictions": pred}


def dumps(model: ForestModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))


def loads(text: str) -> ForestModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model file does not hold a JSON object")
    try:
        return ForestModel.from_dict(doc)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model file: {exc!r}") from None


def save(model: ForestModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model))
        fh.write("\n")


def load(path: str | os.PathLike) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())

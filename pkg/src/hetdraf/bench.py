"""Cross-validated multi-dataset, multi-variant benchmark runs.

Results are appended to a CSV, one record per (dataset, variant, repetition,
fold).  Re-running against an existing file skips every record already there.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

from .data import DataError, Dataset, derive_seed, load_csv, stratified_kfold
from .forest import Variant, evaluate, train_forest
from .tree import GrowthConfig

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("dataset", "variant", "rep", "fold", "accuracy", "train_seconds", "mean_nodes")

# hyperparameter names accepted in a bench spec, mapped to GrowthConfig fields
HYPERPARAMS = {
    "minleaf": "minleaf", "mtry": "mtry", "topm": "top_m", "top_m": "top_m",
    "ridge_lambda": "ridge_lambda", "svm_c": "svm_c", "lssvm_c": "lssvm_c",
    "mpsvm_delta": "delta", "delta": "delta", "svm_iters": "svm_iters",
    "bootstrap_threshold": "bootstrap_threshold", "classifiers": "classifiers",
}


@dataclass
class BenchSpec:
    datasets: list
    variants: list
    ntree: int = 50
    folds: int = 5
    repetitions: int = 1
    seed: int = 0
    normalize: bool = True
    params: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.datasets:
            raise ValueError("bench spec lists no datasets")
        if not self.variants:
            raise ValueError("bench spec lists no variants")
        self.variants = [Variant.parse(v) for v in self.variants]
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.repetitions < 1 or self.ntree < 1:
            raise ValueError("repetitions and ntree must be positive")
        self.overrides = {Variant.parse(k): dict(v) for k, v in self.overrides.items()}

    def config_for(self, variant: Variant) -> GrowthConfig:
        raw = dict(self.params)
        raw.update(self.overrides.get(variant, {}))
        kw = {}
        for k, v in raw.items():
            if k not in HYPERPARAMS:
                raise ValueError(f"unknown hyperparameter {k!r}")
            if k == "mtry" and v == "sqrt":
                v = None
            if k == "classifiers":
                v = tuple(v)
            kw[HYPERPARAMS[k]] = v
        return GrowthConfig(**kw)


def load_spec(path: str | os.PathLike) -> BenchSpec:
    """Read a bench spec from JSON or TOML; dataset paths are relative to the spec file."""
    path = os.fspath(path)
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    else:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    doc = dict(doc)
    doc["datasets"] = [p if os.path.isabs(p) else os.path.join(base, p) for p in doc.get("datasets", [])]
    known = {"datasets", "variants", "ntree", "folds", "repetitions", "seed", "normalize", "params", "overrides"}
    extra = set(doc) - known
    if extra:
        raise ValueError(f"unknown bench spec keys: {sorted(extra)}")
    return BenchSpec(**doc)


def dataset_name(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


@dataclass(frozen=True)
class ResultRecord:
    dataset: str
    variant: str
    rep: int
    fold: int
    accuracy: float
    train_seconds: float
    mean_nodes: float

    @property
    def key(self) -> tuple:
        return (self.dataset, self.variant, self.rep, self.fold)

    def row(self) -> list:
        return [self.dataset, self.variant, self.rep, self.fold, repr(self.accuracy),
                f"{self.train_seconds:.4f}", repr(self.mean_nodes)]


def read_results(path: str | os.PathLike) -> list[ResultRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(header) != RESULT_COLUMNS:
            raise DataError(f"{path}: unexpected results header {header}")
        out = []
        for i, r in enumerate(reader, start=2):
            if not r:
                continue
            if len(r) != len(RESULT_COLUMNS):
                raise DataError(f"{path}: line {i}: expected {len(RESULT_COLUMNS)} columns")
            try:
                out.append(ResultRecord(r[0], r[1], int(r[2]), int(r[3]), float(r[4]), float(r[5]), float(r[6])))
            except ValueError:
                raise DataError(f"{path}: line {i}: malformed record") from None
        return out


def _run_one(job) -> ResultRecord:
    ds, name, variant, config, spec_seed, ntree, normalize, k, rep, fold = job
    plan = stratified_kfold(ds, k, derive_seed(spec_seed, rep))
    train, test = plan.folds[fold]
    t0 = time.perf_counter()
    model = train_forest(ds.subset(train), variant, config, ntree, derive_seed(spec_seed, rep, fold), normalize)
    secs = time.perf_counter() - t0
    acc = evaluate(model, test, ds)["accuracy"]
    return ResultRecord(name, variant.value, rep, fold, acc, secs, model.mean_node_count())


def run_bench(spec: BenchSpec, out_path: str | os.PathLike, n_jobs: int = 1) -> tuple[int, int]:
    """Run every missing record of ``spec`` into ``out_path``.

    Returns ``(records written, datasets that failed to load)``.
    """
    done = set()
    if os.path.exists(out_path) and os.path.getsize(out_path) > 0:
        done = {r.key for r in read_results(out_path)}
    loaded: list[tuple[str, Dataset]] = []
    failed = 0
    for p in spec.datasets:
        try:
            ds = load_csv(p)
            stratified_kfold(ds, spec.folds, spec.seed)
            loaded.append((dataset_name(p), ds))
        except (DataError, OSError) as exc:
            log.warning("skipping dataset %s: %s", p, exc)
            failed += 1
    jobs = []
    for name, ds in loaded:
        for v in spec.variants:
            cfg = spec.config_for(v)
            for rep in range(spec.repetitions):
                for fold in range(spec.folds):
                    if (name, v.value, rep, fold) in done:
                        continue
                    jobs.append((ds, name, v, cfg, spec.seed, spec.ntree, spec.normalize, spec.folds, rep, fold))

    fresh = not os.path.exists(out_path) or os.path.getsize(out_path) == 0
    written = 0
    with open(out_path, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(RESULT_COLUMNS)
            fh.flush()

        def emit(rec: ResultRecord):
            nonlocal written
            w.writerow(rec.row())
            fh.flush()
            written += 1
            log.info("%s %s rep=%d fold=%d acc=%.4f", rec.dataset, rec.variant, rec.rep, rec.fold, rec.accuracy)

        if n_jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=n_jobs) as ex:
                futures = [ex.submit(_run_one, j) for j in jobs]
                for fut in as_completed(futures):
                    emit(fut.result())
        else:
            for j in jobs:
                emit(_run_one(j))
    return written, failed

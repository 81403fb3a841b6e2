"""Outcome-model surface: specs, fitting, prediction, and persistence.

Four algorithms are available: penalized logistic regression, a bagged
random forest, and two boosted-tree styles (leaf-wise and depth-wise).
Hyperparameters are carried in raw (search-space) units and transformed at
fit time: exponents become 2**x and the forest's min.node.size becomes
round(n ** x) for the training-set size n.

Predicted probabilities are for the target's category index 1 (the second
declared label).
"""

from __future__ import annotations

import math
import pickle
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .boosting import BoostedModel, fit_boosted
from .cohort import CATEGORICAL, CohortError, CohortSchema, ColumnSpec
from .impute import ImputedTable
from .logistic import LogisticModel, fit_logistic_table
from .trees import RandomForest

MODEL_FORMAT_VERSION = 1

ALGORITHMS = ("logistic", "random_forest", "gbt_leafwise", "gbt_depthwise")

# name -> (default, lower, upper, transform, integer)
# transforms: "id" (none), "pow2" (2**x at fit), "pow_n" (round(n**x) at fit)
HYPERPARAM_TABLE: Dict[str, Dict[str, Tuple[float, float, float, str, bool]]] = {
    "logistic": {
        "l2_exponent": (0.0, -20.0, 7.0, "pow2", False),
    },
    "random_forest": {
        "num.trees": (500, 1, 2000, "id", True),
        "min.node.size": (0.5, 0.0, 1.0, "pow_n", False),
        "max.depth": (15, 1, 50, "id", True),
        "min.bucket": (10, 1, 60, "id", True),
    },
    "gbt_leafwise": {
        "booster": (1, 1, 2, "id", True),
        "max_depth": (6, 1, 15, "id", True),
        "learning_rate": (math.log2(0.3), -10.0, 0.0, "pow2", False),
        "early_stopping_rounds": (7, 7, 30, "id", True),
        "min_data_in_leaf": (10, 1, 60, "id", True),
        "num_leaves": (15, 4, 60, "id", True),
    },
    "gbt_depthwise": {
        "gamma": (0.0, -15.0, 3.0, "pow2", False),
        "eta": (math.log2(0.3), -10.0, 0.0, "pow2", False),
        "max_depth": (6, 1, 15, "id", True),
        "early_stopping_rounds": (7, 7, 30, "id", True),
        "max_leaves": (15, 4, 60, "id", True),
        "min_child_weight": (1.0, 0.0, 7.0, "pow2", False),
    },
}


@dataclass(frozen=True)
class LearnerSpec:
    """An algorithm plus raw hyperparameter values inside the search bounds."""

    algorithm: str
    hyperparams: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise CohortError(f"unknown algorithm {self.algorithm!r}")
        table = HYPERPARAM_TABLE[self.algorithm]
        for name, value in self.hyperparams.items():
            if name not in table:
                raise CohortError(
                    f"{self.algorithm}: unknown hyperparameter {name!r}"
                )
            _, lo, hi, _, _ = table[name]
            if not (lo <= value <= hi):
                raise CohortError(
                    f"{self.algorithm}: {name}={value} outside [{lo}, {hi}]"
                )

    def resolved(self) -> Dict[str, float]:
        """Raw hyperparams with defaults filled in."""
        table = HYPERPARAM_TABLE[self.algorithm]
        out = {name: row[0] for name, row in table.items()}
        out.update(self.hyperparams)
        return out


def min_node_size_from_exponent(n: int, exponent: float) -> int:
    """The round(n ** x) forest transform."""
    return max(1, int(round(n ** exponent)))


@dataclass
class TrainedModel:
    """A fitted classifier bound to the feature sub-schema it was trained on."""

    algorithm: str
    inner: object
    feature_specs: Tuple[ColumnSpec, ...]
    fingerprint: str
    n_train: int
    target: str

    def feature_names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.feature_specs)


def feature_columns(schema: CohortSchema, target: str) -> list[str]:
    """Predictor columns: everything except outcomes and the treatment column."""
    excluded = set(schema.outcome_cols) | {target}
    if schema.treatment_col:
        excluded.add(schema.treatment_col)
    return [c.name for c in schema.columns if c.name not in excluded]


def _feature_matrix(schema: CohortSchema, values: np.ndarray, names):
    idx = [schema.index_of(n) for n in names]
    specs = tuple(schema.columns[i] for i in idx)
    ncats = np.array(
        [len(c.categories) if c.kind == CATEGORICAL else 0 for c in specs],
        dtype=np.int64,
    )
    return values[:, idx], ncats, specs


def fit(spec: LearnerSpec, table: ImputedTable, target: str,
        seed: int = 0) -> TrainedModel:
    """Fit the given learner on the complete table to predict `target`."""
    schema = table.schema
    tspec = schema.column(target)
    if not tspec.is_binary:
        raise CohortError(f"target {target!r} must be a binary categorical column")
    y = table.values[:, schema.index_of(target)].astype(np.int64)
    classes = np.unique(y)
    if len(classes) < 2:
        raise CohortError(f"target {target!r} has a single class in training data")

    names = feature_columns(schema, target)
    X, ncats, specs = _feature_matrix(schema, table.values, names)
    n = X.shape[0]
    hp = spec.resolved()

    if spec.algorithm == "logistic":
        inner = fit_logistic_table(X, y, ncats, lam=2.0 ** hp["l2_exponent"])
    elif spec.algorithm == "random_forest":
        inner = RandomForest(
            n_trees=int(hp["num.trees"]),
            task="classify",
            max_depth=int(hp["max.depth"]),
            min_node_size=min_node_size_from_exponent(n, hp["min.node.size"]),
            min_bucket=int(hp["min.bucket"]),
            seed=seed,
        ).fit(X, y, ncats)
    elif spec.algorithm == "gbt_leafwise":
        inner = fit_boosted(
            X, y, ncats,
            style="leafwise",
            learning_rate=2.0 ** hp["learning_rate"],
            num_leaves=int(hp["num_leaves"]),
            max_depth=int(hp["max_depth"]),
            min_data_in_leaf=int(hp["min_data_in_leaf"]),
            booster="goss" if int(hp["booster"]) == 2 else "gbdt",
            early_stopping_rounds=int(hp["early_stopping_rounds"]),
            seed=seed,
        )
    else:
        inner = fit_boosted(
            X, y, ncats,
            style="depthwise",
            learning_rate=2.0 ** hp["eta"],
            num_leaves=int(hp["max_leaves"]),
            max_depth=int(hp["max_depth"]),
            min_child_weight=2.0 ** hp["min_child_weight"],
            gamma=2.0 ** hp["gamma"],
            early_stopping_rounds=int(hp["early_stopping_rounds"]),
            seed=seed,
        )

    sub = CohortSchema(columns=specs)
    return TrainedModel(
        algorithm=spec.algorithm,
        inner=inner,
        feature_specs=specs,
        fingerprint=sub.fingerprint(),
        n_train=n,
        target=target,
    )


def predict_proba(model: TrainedModel, table: ImputedTable) -> np.ndarray:
    """Event probability per row; rejects tables whose feature schema differs."""
    schema = table.schema
    available = {c.name for c in schema.columns}
    missing = [n for n in model.feature_names() if n not in available]
    if missing:
        raise CohortError(f"prediction table lacks feature columns {missing}")
    sub = CohortSchema(
        columns=tuple(schema.column(n) for n in model.feature_names())
    )
    if sub.fingerprint() != model.fingerprint:
        raise CohortError("feature schema fingerprint mismatch")
    X, _, _ = _feature_matrix(schema, table.values, model.feature_names())
    if isinstance(model.inner, (LogisticModel, BoostedModel)):
        probs = model.inner.predict_proba(X)
    else:
        probs = (
            model.inner.predict_proba(X)[:, 1]
            if X.shape[0]
            else np.empty(0)
        )
    return np.clip(probs, 0.0, 1.0)


def save_model(model: TrainedModel, path) -> None:
    payload = {"format_version": MODEL_FORMAT_VERSION, "model": model}
    with open(path, "wb") as fh:
        pickle.dump(payload, fh)


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise CohortError(f"unsupported model format version {version!r}")
    return payload["model"]

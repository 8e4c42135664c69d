"""Linear performance ranker: closed-form ridge on standardized score features.

Rows are (score vector, true accuracy) pairs collected over models and
open-source datasets. Features are standardized with training statistics,
the bias stays unregularized, and the fit is deterministic regardless of row
order (rows are canonically sorted before accumulation).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .core import EPS_STD, ValidationError
from .scores import FEATURE_NAMES, ScoreVector

logger = logging.getLogger("swab.ranker")

DEFAULT_RIDGE = 1e-3


@dataclass(frozen=True)
class LinearRanker:
    weights: np.ndarray
    bias: float
    ridge_lambda: float
    feature_names: tuple[str, ...]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    training_meta: dict

    def __post_init__(self):
        if self.weights.shape != self.feature_mean.shape or self.weights.shape != self.feature_std.shape:
            raise ValidationError("weight/statistic lengths differ")
        if self.weights.shape != (len(self.feature_names),):
            raise ValidationError("weight count must equal feature count")

    @property
    def raw_weights(self) -> np.ndarray:
        """Coefficients expressed in un-standardized feature space."""
        return self.weights / self.feature_std

    @property
    def raw_bias(self) -> float:
        return float(self.bias - np.sum(self.weights * self.feature_mean / self.feature_std))

    def to_json(self) -> str:
        payload = {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "ridge_lambda": self.ridge_lambda,
            "feature_names": list(self.feature_names),
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "training_meta": self.training_meta,
        }
        return json.dumps(payload, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LinearRanker":
        d = json.loads(text)
        return cls(
            weights=np.asarray(d["weights"], dtype=np.float64),
            bias=float(d["bias"]),
            ridge_lambda=float(d["ridge_lambda"]),
            feature_names=tuple(d["feature_names"]),
            feature_mean=np.asarray(d["feature_mean"], dtype=np.float64),
            feature_std=np.asarray(d["feature_std"], dtype=np.float64),
            training_meta=d["training_meta"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def fit(
    rows: list[tuple[ScoreVector, float]],
    ridge_lambda: float = DEFAULT_RIDGE,
    feature_names: tuple[str, ...] = FEATURE_NAMES,
) -> LinearRanker:
    """Ridge-regularized least squares via the normal equations.

    Needs at least feature_count+1 rows and targets in [0, 1]. With
    ridge_lambda=0 a rank-deficient design raises with a hint to add ridge.
    """
    n_feat = len(feature_names)
    if len(rows) < n_feat + 1:
        raise ValidationError(
            f"need at least {n_feat + 1} training rows, got {len(rows)}"
        )
    if ridge_lambda < 0:
        raise ValidationError("ridge coefficient must be nonnegative")

    rows = sorted(rows, key=lambda r: (r[0].dataset_id, r[0].model_id))
    X = np.array([sv.as_array(feature_names) for sv, _ in rows])
    y = np.array([float(acc) for _, acc in rows])
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise ValidationError("target accuracies must lie in [0, 1]")

    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), EPS_STD)
    Z = (X - mean) / std

    A = Z.T @ Z + ridge_lambda * np.eye(n_feat)
    if ridge_lambda == 0.0:
        # a singular normal matrix cannot be solved meaningfully
        if np.linalg.matrix_rank(A, tol=1e-10 * max(1.0, float(np.abs(A).max()))) < n_feat:
            raise ValidationError(
                "features are collinear and ridge_lambda=0; set ridge_lambda>0"
            )
    y_mean = float(y.mean())
    w = np.linalg.solve(A, Z.T @ (y - y_mean))
    bias = y_mean  # standardized columns have zero mean, so the bias separates

    residual = float(np.sqrt(np.mean((Z @ w + bias - y) ** 2)))
    meta = {
        "datasets": sorted({sv.dataset_id for sv, _ in rows}),
        "n_rows": len(rows),
        "loss": "mse+ridge",
        "train_rmse": residual,
    }
    return LinearRanker(
        weights=w,
        bias=bias,
        ridge_lambda=ridge_lambda,
        feature_names=tuple(feature_names),
        feature_mean=mean,
        feature_std=std,
        training_meta=meta,
    )


def predict(model: LinearRanker, sv: ScoreVector) -> float:
    """w . standardize(features) + b; unclamped (only ordering is consumed)."""
    x = sv.as_array(model.feature_names)
    if x.shape != model.weights.shape:
        raise ValidationError("feature count mismatch")
    z = (x - model.feature_mean) / model.feature_std
    return float(model.weights @ z + model.bias)


def rank_from_predictions(preds: np.ndarray) -> np.ndarray:
    """Rank 1 = largest prediction; ties share the average rank."""
    p = np.asarray(preds, dtype=np.float64)
    if p.size < 2:
        raise ValidationError("need at least two predictions to rank")
    if not np.all(np.isfinite(p)):
        raise ValidationError("predictions contain NaN/Inf")
    return rankdata(-p, method="average")

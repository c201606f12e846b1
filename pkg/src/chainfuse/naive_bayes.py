"""Binary Naive Bayes producing calibrated supports in [0, 1].

Numeric features use Gaussian class-conditionals with a variance floor;
nominal features use Laplace add-1 smoothed category probabilities with a
dedicated extra category for missing values.  Posteriors are evaluated in
log space and clamped away from 0 and 1 so downstream squared-distance
fusion never saturates irrecoverably.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

VAR_FLOOR = 1e-9
CLAMP_LO = 1e-6
CLAMP_HI = 1.0 - 1e-6
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class NaiveBayesModel:
    """Trained binary NB over a fixed column schema.

    ``kinds[j]`` is -1 for a numeric column, else the declared nominal
    category count (an extra trailing category is reserved for missing
    values).  Immutable by convention once trained.
    """

    kinds: np.ndarray  # (d,)
    class_counts: np.ndarray  # (2,)
    means: np.ndarray  # (2, n_numeric)
    variances: np.ndarray  # (2, n_numeric), floored
    cat_log_probs: list[np.ndarray]  # per nominal column: (2, V + 1)

    @property
    def n_features(self) -> int:
        return len(self.kinds)

    @property
    def numeric_cols(self) -> np.ndarray:
        return np.flatnonzero(self.kinds < 0)

    @property
    def nominal_cols(self) -> np.ndarray:
        return np.flatnonzero(self.kinds >= 0)

    def to_dict(self) -> dict:
        return {
            "kinds": self.kinds.tolist(),
            "class_counts": self.class_counts.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "cat_log_probs": [t.tolist() for t in self.cat_log_probs],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NaiveBayesModel":
        return cls(
            kinds=np.asarray(payload["kinds"], dtype=np.int64),
            class_counts=np.asarray(payload["class_counts"], dtype=np.int64),
            means=np.asarray(payload["means"], dtype=np.float64).reshape(2, -1),
            variances=np.asarray(payload["variances"], dtype=np.float64).reshape(2, -1),
            cat_log_probs=[
                np.asarray(t, dtype=np.float64) for t in payload["cat_log_probs"]
            ],
        )


def _as_matrix(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    return rows


def train_nb(rows: np.ndarray, targets: np.ndarray, kinds: np.ndarray) -> NaiveBayesModel:
    """Fit class-conditional ML parameters with Laplace smoothing on nominals.

    Missing numeric values contribute to neither mean nor variance; a class
    with no observations for a numeric column falls back to the pooled
    estimate so both classes always carry comparable likelihood terms.
    """
    X = _as_matrix(rows)
    y = np.asarray(targets).astype(np.int8).ravel()
    kinds = np.asarray(kinds, dtype=np.int64)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if X.shape[0] != y.shape[0]:
        raise ValueError("rows and targets disagree on length")
    if X.shape[1] != kinds.shape[0]:
        raise ValueError("rows do not match the declared schema width")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("targets must be binary")

    class_counts = np.array([np.count_nonzero(y == 0), np.count_nonzero(y == 1)])
    num_cols = np.flatnonzero(kinds < 0)
    nom_cols = np.flatnonzero(kinds >= 0)

    X_num = X[:, num_cols]
    observed = ~np.isnan(X_num)
    pooled_cnt = observed.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        pooled_sum = np.where(observed, X_num, 0.0).sum(axis=0)
        pooled_mean = np.where(pooled_cnt > 0, pooled_sum / np.maximum(pooled_cnt, 1), 0.0)
        pooled_sq = np.where(observed, X_num, 0.0) ** 2
        pooled_var = np.where(
            pooled_cnt > 0,
            pooled_sq.sum(axis=0) / np.maximum(pooled_cnt, 1) - pooled_mean**2,
            0.0,
        )

    means = np.zeros((2, len(num_cols)))
    variances = np.zeros((2, len(num_cols)))
    for cls in (0, 1):
        mask = y == cls
        obs = observed[mask]
        vals = np.where(obs, X_num[mask], 0.0)
        cnt = obs.sum(axis=0)
        safe = np.maximum(cnt, 1)
        mean = vals.sum(axis=0) / safe
        var = (vals**2).sum(axis=0) / safe - mean**2
        means[cls] = np.where(cnt > 0, mean, pooled_mean)
        variances[cls] = np.where(cnt > 0, var, pooled_var)
    variances = np.maximum(variances, VAR_FLOOR)

    cat_log_probs = []
    for col in nom_cols:
        n_cats = int(kinds[col]) + 1  # trailing slot holds "missing"
        raw = X[:, col]
        codes = np.where(np.isnan(raw), n_cats - 1, raw).astype(np.int64)
        if codes.min() < 0 or codes.max() >= n_cats:
            raise ValueError(f"nominal column {col} holds out-of-range codes")
        table = np.empty((2, n_cats))
        for cls in (0, 1):
            counts = np.bincount(codes[y == cls], minlength=n_cats)
            table[cls] = np.log(counts + 1.0) - np.log(class_counts[cls] + n_cats)
        cat_log_probs.append(table)

    return NaiveBayesModel(
        kinds=kinds.copy(),
        class_counts=class_counts,
        means=means,
        variances=variances,
        cat_log_probs=cat_log_probs,
    )


def predict_proba(model: NaiveBayesModel, rows: np.ndarray) -> np.ndarray:
    """Posterior probability of class 1 for each row, clamped to (0, 1).

    Missing values skip their likelihood term entirely, so an all-missing
    row scores the class-1 prior.  Accepts a single row or an (n, d) batch;
    always returns a 1-D array.
    """
    X = _as_matrix(rows)
    if X.shape[1] != model.n_features:
        raise ValueError(
            f"row width {X.shape[1]} does not match trained schema {model.n_features}"
        )
    n0, n1 = (int(c) for c in model.class_counts)
    if n1 == 0:
        return np.full(X.shape[0], CLAMP_LO)
    if n0 == 0:
        return np.full(X.shape[0], CLAMP_HI)

    total = n0 + n1
    log_odds = np.full(X.shape[0], np.log(n1 / total) - np.log(n0 / total))

    num_cols = model.numeric_cols
    if len(num_cols):
        X_num = X[:, num_cols]
        missing = np.isnan(X_num)
        safe = np.where(missing, 0.0, X_num)
        for cls, sign in ((1, 1.0), (0, -1.0)):
            mean, var = model.means[cls], model.variances[cls]
            term = -0.5 * (_LOG_2PI + np.log(var) + (safe - mean) ** 2 / var)
            log_odds += sign * np.where(missing, 0.0, term).sum(axis=1)

    for table, col in zip(model.cat_log_probs, model.nominal_cols):
        raw = X[:, col]
        missing = np.isnan(raw)
        codes = np.where(missing, 0, raw).astype(np.int64)
        if codes.min() < 0 or codes.max() >= table.shape[1] - 1:
            raise ValueError(f"nominal column {col} holds out-of-range codes")
        contrib = table[1][codes] - table[0][codes]
        log_odds += np.where(missing, 0.0, contrib)

    return np.clip(expit(log_odds), CLAMP_LO, CLAMP_HI)

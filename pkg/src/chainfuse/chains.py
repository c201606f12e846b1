"""Classifier chains, bagged chain ensembles, and binary-relevance baselines.

A chain trains one binary NB per label in a fixed order; link t consumes the
base features plus the t preceding labels in chain order, encoded as
two-valued nominal columns so Laplace smoothing applies.  Ensembles bag
bootstrap samples (100% size, with replacement) and, for chains, draw an
independent uniform-random label order per member.

Seeding uses a splittable counter scheme: member i of an ensemble seeded
with ``seed`` draws from ``SeedSequence([seed, i])``, so members are
reproducible independently of each other and may be trained concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import MultiLabelDataset
from .naive_bayes import NaiveBayesModel, predict_proba, train_nb

#: supports at or above this value harden to a positive label inside chains
HARD_THRESHOLD = 0.5


@dataclass
class ChainModel:
    """m chained NB links; ``order[t]`` is the label trained at step t."""

    order: np.ndarray
    links: list[NaiveBayesModel]
    feature_kinds: np.ndarray

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(len(self.links))):
            raise ValueError("order must permute the label indices")
        self.order = order
        for t, link in enumerate(self.links):
            if link.n_features != len(self.feature_kinds) + t:
                raise ValueError(f"link {t} schema width is inconsistent with its depth")

    @property
    def n_labels(self) -> int:
        return len(self.links)

    def to_dict(self) -> dict:
        return {
            "order": self.order.tolist(),
            "links": [link.to_dict() for link in self.links],
            "feature_kinds": self.feature_kinds.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ChainModel":
        return cls(
            order=np.asarray(payload["order"], dtype=np.int64),
            links=[NaiveBayesModel.from_dict(p) for p in payload["links"]],
            feature_kinds=np.asarray(payload["feature_kinds"], dtype=np.int64),
        )


@dataclass
class BRModel:
    """m independent NB models over the base features only."""

    links: list[NaiveBayesModel]
    feature_kinds: np.ndarray

    @property
    def n_labels(self) -> int:
        return len(self.links)

    def to_dict(self) -> dict:
        return {
            "links": [link.to_dict() for link in self.links],
            "feature_kinds": self.feature_kinds.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BRModel":
        return cls(
            links=[NaiveBayesModel.from_dict(p) for p in payload["links"]],
            feature_kinds=np.asarray(payload["feature_kinds"], dtype=np.int64),
        )


@dataclass
class EnsembleModel:
    """c bagged members: chains for ECC, binary-relevance models for EBR."""

    members: list
    bag_seeds: list[int]
    kind: str  # "ECC" | "EBR"

    def __post_init__(self):
        if self.kind not in ("ECC", "EBR"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if len(self.members) < 1:
            raise ValueError("ensemble needs at least one member")

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def n_labels(self) -> int:
        return self.members[0].n_labels

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "bag_seeds": list(self.bag_seeds),
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EnsembleModel":
        member_cls = ChainModel if payload["kind"] == "ECC" else BRModel
        return cls(
            members=[member_cls.from_dict(p) for p in payload["members"]],
            bag_seeds=list(payload["bag_seeds"]),
            kind=payload["kind"],
        )


@dataclass(frozen=True)
class DecisionProfile:
    """Per-member, per-label supports (c x m) with their hardened votes."""

    supports: np.ndarray
    hard: np.ndarray

    def __post_init__(self):
        supports = np.asarray(self.supports, dtype=np.float64)
        hard = np.asarray(self.hard, dtype=np.int8)
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "hard", hard)
        if supports.ndim != 2 or supports.shape != hard.shape:
            raise ValueError("supports and hard votes must be matching 2-D matrices")
        if supports.size and (supports.min() < 0.0 or supports.max() > 1.0):
            raise ValueError("supports must lie in [0, 1]")
        if not np.array_equal(hard, (supports >= HARD_THRESHOLD).astype(np.int8)):
            raise ValueError("hard votes must equal thresholded supports")

    @classmethod
    def from_supports(cls, supports: np.ndarray) -> "DecisionProfile":
        supports = np.asarray(supports, dtype=np.float64)
        return cls(supports=supports, hard=(supports >= HARD_THRESHOLD).astype(np.int8))

    @property
    def n_members(self) -> int:
        return self.supports.shape[0]

    @property
    def n_labels(self) -> int:
        return self.supports.shape[1]


# ---------------------------------------------------------------------------
# Chain training / prediction
# ---------------------------------------------------------------------------


def _augment(kinds: np.ndarray, depth: int) -> np.ndarray:
    return np.concatenate([kinds, np.full(depth, 2, dtype=np.int64)])


def train_cc(ds: MultiLabelDataset, order, seed: int | None = None) -> ChainModel:
    """Train a classifier chain along ``order`` using true predecessor labels.

    ``seed`` is reserved for stochastic base learners; NB training is
    deterministic, so it is accepted and unused.
    """
    del seed
    order = np.asarray(order, dtype=np.int64)
    kinds = ds.feature_kinds()
    X = ds.features
    links = []
    for t, label in enumerate(order):
        extra = ds.labels[:, order[:t]].astype(np.float64)
        X_aug = np.hstack([X, extra]) if t else X
        links.append(train_nb(X_aug, ds.labels[:, label], _augment(kinds, t)))
    return ChainModel(order=order, links=links, feature_kinds=kinds)


def predict_cc(model: ChainModel, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Chain prediction: each link sees its predecessors' hardened labels.

    Returns ``(supports, hard)`` in original label order.  Accepts a single
    row or an (n, d) batch; output is (n, m) either way.
    """
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    n = X.shape[0]
    m = model.n_labels
    supports = np.empty((n, m))
    hard = np.empty((n, m), dtype=np.int8)
    chained = np.empty((n, m))
    for t, label in enumerate(model.order):
        X_aug = np.hstack([X, chained[:, :t]]) if t else X
        p = predict_proba(model.links[t], X_aug)
        supports[:, label] = p
        hard[:, label] = p >= HARD_THRESHOLD
        chained[:, t] = hard[:, label]
    return supports, hard


def train_br(ds: MultiLabelDataset, seed: int | None = None) -> BRModel:
    """m independent NB models on the base features (no label chaining)."""
    del seed
    kinds = ds.feature_kinds()
    links = [train_nb(ds.features, ds.labels[:, j], kinds) for j in range(ds.n_labels)]
    return BRModel(links=links, feature_kinds=kinds)


def predict_br(model: BRModel, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    supports = np.column_stack([predict_proba(link, X) for link in model.links])
    return supports, (supports >= HARD_THRESHOLD).astype(np.int8)


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


def member_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Sub-seed for ensemble member ``index``; independent of other members."""
    return np.random.SeedSequence(entropy=[int(seed), int(index)])


def _train_ensemble(ds: MultiLabelDataset, c: int, seed: int, kind: str) -> EnsembleModel:
    if c < 1:
        raise ValueError("ensemble size must be at least 1")
    members = []
    bag_seeds = []
    n = ds.n_instances
    for i in range(c):
        ss = member_seed(seed, i)
        bag_seeds.append(int(ss.generate_state(1, np.uint64)[0]))
        rng = np.random.default_rng(ss)
        order = rng.permutation(ds.n_labels)
        bag = rng.integers(0, n, size=n)
        sample = ds.subset(bag)
        if kind == "ECC":
            members.append(train_cc(sample, order))
        else:
            members.append(train_br(sample))
    return EnsembleModel(members=members, bag_seeds=bag_seeds, kind=kind)


def train_ecc(ds: MultiLabelDataset, c: int, seed: int) -> EnsembleModel:
    """Bagged chains: each member gets an independent random label order and
    a bootstrap sample (n draws with replacement) from its own sub-stream."""
    return _train_ensemble(ds, c, seed, "ECC")


def train_ebr(ds: MultiLabelDataset, c: int, seed: int) -> EnsembleModel:
    """Bagged binary-relevance models; bagging mirrors :func:`train_ecc`."""
    return _train_ensemble(ds, c, seed, "EBR")


def decision_profiles(ens: EnsembleModel, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(n, c, m) supports and hard votes for a batch of rows."""
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    predict = predict_cc if ens.kind == "ECC" else predict_br
    supports = np.empty((X.shape[0], ens.n_members, ens.n_labels))
    hard = np.empty_like(supports, dtype=np.int8)
    for i, member in enumerate(ens.members):
        s, h = predict(member, X)
        supports[:, i, :] = s
        hard[:, i, :] = h
    return supports, hard


def decision_profile(ens: EnsembleModel, row: np.ndarray) -> DecisionProfile:
    """Decision profile of a single instance: row i holds member i's supports."""
    supports, hard = decision_profiles(ens, np.asarray(row, dtype=np.float64))
    return DecisionProfile(supports=supports[0], hard=hard[0])

"""Fusion schemes turning ensemble decision profiles into label sets.

Five schemes: majority vote (MV), mean ensemble (ME), per-label decision
templates (DT), decision templates widened to unconditionally dependent
label groups (UDDT), and a stacked chain meta-classifier (STACK).

Template similarity is one minus the squared entry-wise distance between a
profile slice and the template; it is 1 exactly when they coincide and may
be negative.  A label is assigned when the positive template is strictly
more similar than the negative one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chains import (
    ChainModel,
    DecisionProfile,
    EnsembleModel,
    decision_profiles,
    predict_cc,
    train_cc,
)
from .correlation import PhiMatrix, dependent_labels
from .datasets import FeatureSpec, MultiLabelDataset

SCHEMES = ("MV", "ME", "DT", "UDDT", "STACK")


@dataclass
class DecisionTemplatePair:
    """Per-label mean profiles over the selected label columns.

    ``selected`` always contains the label itself; ``dt_pos``/``dt_neg`` are
    the mean profile slices over training rows where the label is present /
    absent.  A side with no training rows is filled with the neutral 0.5
    matrix and flagged through its zero count; fusion then falls back to
    mean-support thresholding for that label.
    """

    label: int
    selected: tuple[int, ...]
    dt_pos: np.ndarray  # (c, len(selected))
    dt_neg: np.ndarray
    pos_count: int
    neg_count: int

    def __post_init__(self):
        self.selected = tuple(int(i) for i in self.selected)
        self.dt_pos = np.asarray(self.dt_pos, dtype=np.float64)
        self.dt_neg = np.asarray(self.dt_neg, dtype=np.float64)
        if self.label not in self.selected:
            raise ValueError("selected label set must contain the label itself")
        if list(self.selected) != sorted(set(self.selected)):
            raise ValueError("selected label set must be strictly ascending")
        shape = (self.dt_pos.shape[0], len(self.selected))
        if self.dt_pos.shape != shape or self.dt_neg.shape != shape:
            raise ValueError("template matrices must be (members, len(selected))")
        for name, mat in (("dt_pos", self.dt_pos), ("dt_neg", self.dt_neg)):
            if mat.size and (mat.min() < 0.0 or mat.max() > 1.0):
                raise ValueError(f"{name} entries must lie in [0, 1]")

    @property
    def degenerate(self) -> bool:
        return self.pos_count == 0 or self.neg_count == 0

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "selected": list(self.selected),
            "dt_pos": self.dt_pos.tolist(),
            "dt_neg": self.dt_neg.tolist(),
            "pos_count": self.pos_count,
            "neg_count": self.neg_count,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DecisionTemplatePair":
        return cls(
            label=int(payload["label"]),
            selected=tuple(payload["selected"]),
            dt_pos=np.asarray(payload["dt_pos"], dtype=np.float64),
            dt_neg=np.asarray(payload["dt_neg"], dtype=np.float64),
            pos_count=int(payload["pos_count"]),
            neg_count=int(payload["neg_count"]),
        )


@dataclass
class FusionModel:
    """A fitted fusion rule; only the fields of its scheme are populated."""

    scheme: str
    threshold: float | None = None  # MV / ME
    templates: list[DecisionTemplatePair] | None = None  # DT / UDDT
    phi_t: float | None = None  # UDDT
    meta: ChainModel | None = None  # STACK

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown fusion scheme {self.scheme!r}")
        wanted = {
            "MV": {"threshold"},
            "ME": {"threshold"},
            "DT": {"templates"},
            "UDDT": {"templates", "phi_t"},
            "STACK": {"meta"},
        }[self.scheme]
        for name in ("threshold", "templates", "phi_t", "meta"):
            have = getattr(self, name) is not None
            if have != (name in wanted):
                raise ValueError(
                    f"scheme {self.scheme} {'requires' if name in wanted else 'forbids'} {name}"
                )

    def to_dict(self) -> dict:
        payload: dict = {"scheme": self.scheme}
        if self.threshold is not None:
            payload["threshold"] = self.threshold
        if self.phi_t is not None:
            payload["phi_t"] = self.phi_t
        if self.templates is not None:
            payload["templates"] = [t.to_dict() for t in self.templates]
        if self.meta is not None:
            payload["meta"] = self.meta.to_dict()
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "FusionModel":
        return cls(
            scheme=payload["scheme"],
            threshold=payload.get("threshold"),
            templates=[DecisionTemplatePair.from_dict(t) for t in payload["templates"]]
            if "templates" in payload
            else None,
            phi_t=payload.get("phi_t"),
            meta=ChainModel.from_dict(payload["meta"]) if "meta" in payload else None,
        )


# ---------------------------------------------------------------------------
# Vote / mean fusion
# ---------------------------------------------------------------------------


def _check_threshold(t: float) -> float:
    if not 0.0 < t <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    return float(t)


def fuse_mv_batch(hard: np.ndarray, t: float) -> np.ndarray:
    """Label j assigned when the fraction of positive votes is at least t."""
    t = _check_threshold(t)
    hard = np.asarray(hard)
    return (hard.mean(axis=-2) >= t).astype(np.int8)


def fuse_mv(dp: DecisionProfile, t: float) -> np.ndarray:
    return fuse_mv_batch(dp.hard, t)


def fuse_me_batch(supports: np.ndarray, t: float) -> np.ndarray:
    """Label j assigned when the mean support is at least t."""
    t = _check_threshold(t)
    supports = np.asarray(supports, dtype=np.float64)
    return (supports.mean(axis=-2) >= t).astype(np.int8)


def fuse_me(dp: DecisionProfile, t: float) -> np.ndarray:
    return fuse_me_batch(dp.supports, t)


# ---------------------------------------------------------------------------
# Decision templates
# ---------------------------------------------------------------------------

_NEUTRAL = 0.5


def _masked_template(profiles: np.ndarray, mask: np.ndarray, cols) -> tuple[np.ndarray, int]:
    count = int(np.count_nonzero(mask))
    c = profiles.shape[1]
    if count == 0:
        return np.full((c, len(cols)), _NEUTRAL), 0
    return profiles[mask][:, :, cols].mean(axis=0), count


def _fit_templates(
    profiles: np.ndarray, labels: np.ndarray, selected_for
) -> list[DecisionTemplatePair]:
    profiles = np.asarray(profiles, dtype=np.float64)
    labels = np.asarray(labels)
    if profiles.ndim != 3:
        raise ValueError("profiles must be (instances, members, labels)")
    if profiles.shape[0] != labels.shape[0]:
        raise ValueError("profiles and labels disagree on instance count")
    if profiles.shape[0] < 1:
        raise ValueError("template fitting needs at least one instance")
    templates = []
    for j in range(labels.shape[1]):
        cols = selected_for(j)
        pos_mask = labels[:, j] == 1
        dt_pos, pos_count = _masked_template(profiles, pos_mask, cols)
        dt_neg, neg_count = _masked_template(profiles, ~pos_mask, cols)
        templates.append(
            DecisionTemplatePair(
                label=j,
                selected=cols,
                dt_pos=dt_pos,
                dt_neg=dt_neg,
                pos_count=pos_count,
                neg_count=neg_count,
            )
        )
    return templates


def fit_dt(profiles: np.ndarray, labels: np.ndarray) -> list[DecisionTemplatePair]:
    """Per-label templates over the label's own column only (selected = {j})."""
    return _fit_templates(profiles, labels, lambda j: (j,))


def fit_uddt(
    profiles: np.ndarray, labels: np.ndarray, pm: PhiMatrix, phi_t: float
) -> list[DecisionTemplatePair]:
    """Templates widened to each label's unconditionally dependent set."""
    if not 0.0 <= phi_t <= 1.0:
        raise ValueError("phi threshold must lie in [0, 1]")
    return _fit_templates(profiles, labels, lambda j: dependent_labels(pm, j, phi_t))


def similarity(dp_slice: np.ndarray, template: np.ndarray) -> float:
    """1 minus the squared entry-wise distance; 1 iff identical, may be negative."""
    dp_slice = np.asarray(dp_slice, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    if dp_slice.shape != template.shape:
        raise ValueError(
            f"shape mismatch: profile slice {dp_slice.shape} vs template {template.shape}"
        )
    return 1.0 - float(((dp_slice - template) ** 2).sum())


def fuse_dt_batch(supports: np.ndarray, templates: list[DecisionTemplatePair]) -> np.ndarray:
    """Assign label j when its positive template is strictly more similar.

    Labels whose templates are degenerate (a training side was empty) fall
    back to mean-support thresholding at 0.5.
    """
    supports = np.asarray(supports, dtype=np.float64)
    single = supports.ndim == 2
    if single:
        supports = supports[None]
    out = np.zeros((supports.shape[0], len(templates)), dtype=np.int8)
    for pair in templates:
        j = pair.label
        if pair.degenerate:
            out[:, j] = supports[:, :, j].mean(axis=1) >= _NEUTRAL
            continue
        sl = supports[:, :, pair.selected]
        sim_pos = 1.0 - ((sl - pair.dt_pos) ** 2).sum(axis=(1, 2))
        sim_neg = 1.0 - ((sl - pair.dt_neg) ** 2).sum(axis=(1, 2))
        out[:, j] = sim_pos > sim_neg
    return out[0] if single else out


def fuse_dt(dp: DecisionProfile, templates: list[DecisionTemplatePair]) -> np.ndarray:
    return fuse_dt_batch(dp.supports, templates)


# ---------------------------------------------------------------------------
# Stacking
# ---------------------------------------------------------------------------


def flatten_profiles(supports: np.ndarray) -> np.ndarray:
    """(n, c, m) supports to (n, c*m) meta-features, member-major."""
    supports = np.asarray(supports, dtype=np.float64)
    if supports.ndim == 2:
        supports = supports[None]
    return supports.reshape(supports.shape[0], -1)


def unflatten_profile(flat: np.ndarray, c: int, m: int) -> np.ndarray:
    return np.asarray(flat, dtype=np.float64).reshape(c, m)


def fit_stack(ds: MultiLabelDataset, ens: EnsembleModel, seed: int) -> FusionModel:
    """Train a chain meta-classifier on the ensemble's flattened supports.

    Meta-instances are the c*m supports of each training row; the meta chain
    uses a seeded random label order.
    """
    supports, _ = decision_profiles(ens, ds.features)
    meta_X = flatten_profiles(supports)
    schema = tuple(
        FeatureSpec(f"meta_{i:05d}", "numeric") for i in range(meta_X.shape[1])
    )
    meta_ds = MultiLabelDataset(
        feature_schema=schema,
        features=meta_X,
        labels=ds.labels,
        label_names=ds.label_names,
        relation="stack-meta",
    )
    order = np.random.default_rng(np.random.SeedSequence(entropy=[int(seed)])).permutation(
        ds.n_labels
    )
    return FusionModel(scheme="STACK", meta=train_cc(meta_ds, order))


def fuse_stack_batch(model: FusionModel, supports: np.ndarray) -> np.ndarray:
    if model.scheme != "STACK":
        raise ValueError("fusion model is not a stacking model")
    _, hard = predict_cc(model.meta, flatten_profiles(supports))
    return hard


def fuse_stack(model: FusionModel, dp: DecisionProfile) -> np.ndarray:
    return fuse_stack_batch(model, dp.supports)[0]


# ---------------------------------------------------------------------------
# Uniform fusion entry point
# ---------------------------------------------------------------------------


def fuse_batch(model: FusionModel, supports: np.ndarray, hard: np.ndarray) -> np.ndarray:
    """Apply any fitted fusion model to a batch of (n, c, m) profiles."""
    if model.scheme == "MV":
        return fuse_mv_batch(hard, model.threshold)
    if model.scheme == "ME":
        return fuse_me_batch(supports, model.threshold)
    if model.scheme in ("DT", "UDDT"):
        return fuse_dt_batch(supports, model.templates)
    return fuse_stack_batch(model, supports)

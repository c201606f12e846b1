"""Classifier chains, bagged ensembles and binary-relevance baselines."""

from __future__ import annotations

import numpy as np
import pytest

from chainfuse.chains import (
    EnsembleModel,
    decision_profile,
    decision_profiles,
    predict_br,
    predict_cc,
    train_br,
    train_cc,
    train_ebr,
    train_ecc,
)
from chainfuse.datasets import FeatureSpec, MultiLabelDataset
from chainfuse.metrics import hamming_loss
from chainfuse.naive_bayes import predict_proba, train_nb
from tests.conftest import make_synthetic


def duplicated_label_ds(n=240, noise=0.02, seed=21):
    """Two labels, the second a near-copy of the first."""
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 2, size=n).astype(np.int8)
    copy = base.copy()
    flip = rng.random(n) < noise
    copy[flip] ^= 1
    features = rng.normal(0, 1, size=(n, 3)) + base[:, None] * 2.0
    return MultiLabelDataset(
        feature_schema=tuple(FeatureSpec(f"f{i}", "numeric") for i in range(3)),
        features=features,
        labels=np.column_stack([base, copy]),
        label_names=("orig", "dup"),
    )


def test_single_label_chain_equals_plain_nb(synthetic_ds):
    ds = make_synthetic(m=1, seed=4)
    chain = train_cc(ds, [0])
    nb = train_nb(ds.features, ds.labels[:, 0], ds.feature_kinds())
    supports, hard = predict_cc(chain, ds.features)
    assert np.array_equal(supports[:, 0], predict_proba(nb, ds.features))
    assert np.array_equal(hard[:, 0], predict_proba(nb, ds.features) >= 0.5)


def test_chain_learns_duplicated_label():
    ds = duplicated_label_ds()
    train, test = ds.subset(range(160)), ds.subset(range(160, 240))
    chain = train_cc(train, order=[0, 1])
    supports, hard = predict_cc(chain, test.features)
    # held-out support for the duplicate, conditioned on the first label
    # being predicted positive, is near-perfect
    pos = hard[:, 0] == 1
    assert pos.any()
    assert supports[pos, 1].mean() > 0.9
    assert (hard[:, 0] == hard[:, 1]).mean() > 0.9
    assert ((supports >= 0) & (supports <= 1)).all()


def test_chain_training_deterministic(synthetic_ds):
    a = train_cc(synthetic_ds, order=[2, 0, 3, 1])
    b = train_cc(synthetic_ds, order=[2, 0, 3, 1])
    for la, lb in zip(a.links, b.links):
        assert np.array_equal(la.means, lb.means)
        assert np.array_equal(la.variances, lb.variances)
        for ta, tb in zip(la.cat_log_probs, lb.cat_log_probs):
            assert np.array_equal(ta, tb)


def test_chain_link_schema_widths(synthetic_ds):
    chain = train_cc(synthetic_ds, order=[1, 3, 0, 2])
    d = synthetic_ds.n_features
    for t, link in enumerate(chain.links):
        assert link.n_features == d + t


def test_predict_cc_single_row(synthetic_ds):
    chain = train_cc(synthetic_ds, order=[0, 1, 2, 3])
    supports, hard = predict_cc(chain, synthetic_ds.features[0])
    assert supports.shape == (1, 4)
    assert np.array_equal(hard, (supports >= 0.5).astype(np.int8))


def test_ecc_single_member(synthetic_ds):
    ens = train_ecc(synthetic_ds, c=1, seed=5)
    assert ens.n_members == 1
    dp = decision_profile(ens, synthetic_ds.features[0])
    supports, _ = predict_cc(ens.members[0], synthetic_ds.features[0])
    assert np.array_equal(dp.supports, supports)


def test_ecc_distinct_orders(synthetic_ds):
    ens = train_ecc(synthetic_ds, c=12, seed=6)
    orders = {tuple(m.order.tolist()) for m in ens.members}
    assert len(orders) >= 2


def test_ecc_deterministic(synthetic_ds):
    a = train_ecc(synthetic_ds, c=4, seed=9)
    b = train_ecc(synthetic_ds, c=4, seed=9)
    for ma, mb in zip(a.members, b.members):
        assert np.array_equal(ma.order, mb.order)
        for la, lb in zip(ma.links, mb.links):
            assert np.array_equal(la.means, lb.means)


def test_ecc_member_substreams_independent(synthetic_ds):
    # members are keyed by (seed, index): a smaller ensemble with the same
    # seed reproduces the matching prefix of a larger one
    big = train_ecc(synthetic_ds, c=5, seed=10)
    small = train_ecc(synthetic_ds, c=3, seed=10)
    for ms, mb in zip(small.members, big.members):
        assert np.array_equal(ms.order, mb.order)
        for ls, lb in zip(ms.links, mb.links):
            assert np.array_equal(ls.means, lb.means)
            assert np.array_equal(ls.variances, lb.variances)


def test_decision_profiles_match_member_loop(synthetic_ds):
    ens = train_ecc(synthetic_ds, c=6, seed=11)
    X = synthetic_ds.features[:10]
    supports, hard = decision_profiles(ens, X)
    assert supports.shape == (10, 6, synthetic_ds.n_labels)
    for i, member in enumerate(ens.members):
        s, h = predict_cc(member, X)
        assert np.array_equal(supports[:, i, :], s)
        assert np.array_equal(hard[:, i, :], h)
    assert ((supports >= 1e-6) & (supports <= 1 - 1e-6)).all()


def test_br_single_label_equals_nb():
    ds = make_synthetic(m=1, seed=14)
    br = train_br(ds)
    nb = train_nb(ds.features, ds.labels[:, 0], ds.feature_kinds())
    supports, _ = predict_br(br, ds.features)
    assert np.array_equal(supports[:, 0], predict_proba(nb, ds.features))


def test_br_invariant_to_label_permutation(synthetic_ds):
    perm = np.array([2, 0, 3, 1])
    permuted = MultiLabelDataset(
        feature_schema=synthetic_ds.feature_schema,
        features=synthetic_ds.features,
        labels=synthetic_ds.labels[:, perm],
        label_names=tuple(synthetic_ds.label_names[i] for i in perm),
    )
    s_base, _ = predict_br(train_br(synthetic_ds), synthetic_ds.features[:5])
    s_perm, _ = predict_br(train_br(permuted), synthetic_ds.features[:5])
    assert np.allclose(s_base[:, perm], s_perm)


def test_ebr_profile_shape(synthetic_ds):
    ens = train_ebr(synthetic_ds, c=3, seed=15)
    assert ens.kind == "EBR"
    supports, hard = decision_profiles(ens, synthetic_ds.features[:4])
    assert supports.shape == (4, 3, synthetic_ds.n_labels)
    assert hard.shape == supports.shape


@pytest.mark.invariant
def test_cc_close_to_br_on_independent_labels():
    # independent labels: chaining should neither help nor hurt materially
    rng = np.random.default_rng(30)
    n, m = 500, 3
    labels = rng.integers(0, 2, size=(n, m)).astype(np.int8)
    features = rng.normal(size=(n, m * 2))
    for j in range(m):
        features[:, j] += labels[:, j] * 1.5
    ds = MultiLabelDataset(
        feature_schema=tuple(FeatureSpec(f"f{i}", "numeric") for i in range(m * 2)),
        features=features,
        labels=labels,
        label_names=tuple(f"l{j}" for j in range(m)),
    )
    train, test = ds.subset(range(350)), ds.subset(range(350, 500))
    _, hard_cc = predict_cc(train_cc(train, order=list(range(m))), test.features)
    _, hard_br = predict_br(train_br(train), test.features)
    h_cc = np.mean([hamming_loss(test.labels[i], hard_cc[i]) for i in range(test.n_instances)])
    h_br = np.mean([hamming_loss(test.labels[i], hard_br[i]) for i in range(test.n_instances)])
    assert abs(h_cc - h_br) <= 0.05


def test_ensemble_serialization_roundtrip(synthetic_ds):
    for trainer in (train_ecc, train_ebr):
        ens = trainer(synthetic_ds, c=3, seed=16)
        clone = EnsembleModel.from_dict(ens.to_dict())
        assert clone.kind == ens.kind
        assert clone.bag_seeds == ens.bag_seeds
        s0, h0 = decision_profiles(ens, synthetic_ds.features[:6])
        s1, h1 = decision_profiles(clone, synthetic_ds.features[:6])
        assert np.array_equal(s0, s1)
        assert np.array_equal(h0, h1)


def test_decision_profile_invariant_enforced():
    from chainfuse.chains import DecisionProfile

    supports = np.array([[0.7, 0.2], [0.4, 0.9]])
    dp = DecisionProfile.from_supports(supports)
    assert np.array_equal(dp.hard, [[1, 0], [0, 1]])
    with pytest.raises(ValueError, match="hard votes"):
        DecisionProfile(supports=supports, hard=np.zeros((2, 2), dtype=np.int8))
    with pytest.raises(ValueError, match="lie in"):
        DecisionProfile.from_supports(np.array([[1.4, 0.0]]))


def test_ensemble_json_serialization_is_lossless(synthetic_ds, tmp_path):
    import json

    ens = train_ecc(synthetic_ds, c=2, seed=17)
    path = tmp_path / "model.json"
    path.write_text(json.dumps({"format": "chainfuse-ensemble", "version": 1, "model": ens.to_dict()}))
    payload = json.loads(path.read_text())
    assert payload["version"] == 1
    clone = EnsembleModel.from_dict(payload["model"])
    s0, _ = decision_profiles(ens, synthetic_ds.features[:4])
    s1, _ = decision_profiles(clone, synthetic_ds.features[:4])
    assert np.array_equal(s0, s1)

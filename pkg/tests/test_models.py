import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reladv.errors import DimensionMismatch, InvalidConfig, MissingNormalizer
from reladv.graph import build_graph
from reladv.models import (
    LabeledDataset,
    LinearModel,
    MlpModel,
    NormalizedClassifier,
    TrainConfig,
    grad_input,
    load_model,
    loss,
    predict,
    save_model,
    train,
    zero_one_loss,
)
from reladv.normalize import EquivalenceNormalizer
from reladv.oracle import FiniteDistribution, best_robust_labeling, is_robust, robust_accuracy
from reladv.relation import RelationSpec, all_vectors, as_vector


def test_linear_predict_examples():
    m = LinearModel([1.0, 0.0], -0.5)
    assert predict(m, np.array([1, 0])) == 1
    assert predict(m, np.array([0, 0])) == 0
    assert LinearModel([1.0], -1.0).predict(np.array([1])) == 0  # score 0 goes to label 0


def test_zero_mlp_predicts_lowest_label():
    m = MlpModel.zeros([3, 4, 2])
    assert (m.predict(np.eye(3)) == 0).all()
    assert m.loss(np.ones(3), 1) == pytest.approx(math.log(2))


def _merged_rule(x1, x2, x3, x4):
    return (x2 and x3) or (x1 and x2) or (x1 and x3 and x4)


def test_separating_weights_on_normalized_table():
    m = LinearModel([0.4, 0.7, 0.5, 0.2], -1.0)
    for x in itertools.product((0, 1), repeat=4):
        assert m.predict(np.array(x)) == int(bool(_merged_rule(*x)))


def test_zero_one_loss():
    m = LinearModel([1.0], 0.0)
    assert zero_one_loss(m, np.array([1]), 1) == 0.0
    assert zero_one_loss(m, np.array([1]), 0) == 1.0


def _forward_nll(m, x, y):
    h = x.astype(float)
    for i, (W, b) in enumerate(zip(m.weights, m.biases)):
        h = h @ W + b
        if i < len(m.weights) - 1:
            h = np.where(h > 0, h, 0.0)
    p = np.exp(h - h.max())
    p /= p.sum()
    return -math.log(p[y])


def random_mlp(seed, d=None):
    rng = np.random.default_rng(seed)
    d = d or int(rng.integers(2, 7))
    sizes = [d] + [int(rng.integers(2, 6)) for _ in range(int(rng.integers(1, 3)))] + [2]
    return MlpModel.init(sizes, rng), rng


@given(st.integers(0, 10**6))
def test_nll_matches_independent_forward(seed):
    m, rng = random_mlp(seed)
    x = rng.random(m.d)
    y = int(rng.integers(0, 2))
    assert loss(m, x, y) == pytest.approx(_forward_nll(m, x, y), rel=1e-12)


def _fd_check(m, x, y, h=1e-5):
    g = grad_input(m, x, y)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fd = (m.loss(x + e, y) - m.loss(x - e, y)) / (2 * h)
        assert abs(fd - g[i]) <= 1e-4 * max(1.0, abs(fd))


@given(st.integers(0, 10**6))
def test_input_gradient_matches_finite_differences(seed):
    m, rng = random_mlp(seed)
    _fd_check(m, rng.random(m.d), int(rng.integers(0, 2)))


@given(st.integers(0, 10**6))
def test_parameter_gradients_match_finite_differences(seed):
    m, rng = random_mlp(seed, d=3)
    X = rng.random((4, 3))
    y = rng.integers(0, 2, 4)
    grads = m.param_grads(X, y)
    params = [p.copy() for p in m.params]
    h = 1e-6
    for k, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[k][idx] += h
            minus[k][idx] -= h
            m.set_params(plus)
            lp = m.loss(X, y).mean()
            m.set_params(minus)
            lm = m.loss(X, y).mean()
            assert abs((lp - lm) / (2 * h) - grads[k][idx]) <= 1e-5
    m.set_params(params)


def test_constant_model_has_zero_gradient():
    m = MlpModel.zeros([3, 4, 2])
    assert np.array_equal(m.grad_input(np.ones(3), 0), np.zeros(3))


@given(st.integers(0, 10**6))
def test_linear_gradient_is_parallel_to_weights(seed):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(5)
    m = LinearModel(w, 0.3)
    x = rng.random(5)
    for y, sign in ((1, -1), (0, 1)):
        g = m.grad_input(x, y)
        ratio = g / w
        assert np.allclose(ratio, ratio[0]) and np.sign(ratio[0]) == sign


def test_dimension_mismatch():
    m = LinearModel([1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        m.predict(np.ones(3))
    with pytest.raises(DimensionMismatch):
        m.loss(np.ones((2, 2)), [0, 1, 1])


# training -------------------------------------------------------------------


def _toy(rng, n=200, d=6):
    X = (rng.random((n, d)) < 0.5).astype(np.uint8)
    y = (X[:, 0] | X[:, 1]).astype(int)
    return LabeledDataset(X, y)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        TrainConfig(scheme="bogus")
    with pytest.raises(InvalidConfig):
        TrainConfig(epochs=0)
    with pytest.raises(InvalidConfig):
        TrainConfig(lr=0.0)


def test_normalizing_schemes_need_normalizer(rng):
    data = _toy(rng)
    with pytest.raises(MissingNormalizer):
        train(LinearModel.init(6, rng), data, TrainConfig(scheme="np"))
    with pytest.raises(InvalidConfig):
        train(LinearModel.init(6, rng), data, TrainConfig(scheme="adversarial"))


def test_np_with_identity_normalizer_equals_natural(rng):
    data = _toy(rng)
    a = MlpModel.init([6, 4, 2], np.random.default_rng(1))
    b = MlpModel.init([6, 4, 2], np.random.default_rng(1))
    train(a, data, TrainConfig(scheme="natural", epochs=3, seed=4))
    train(b, data, TrainConfig(scheme="np", epochs=3, seed=4), normalizer=EquivalenceNormalizer(()))
    for p, q in zip(a.params, b.params):
        assert np.array_equal(p, q)


def test_separable_data_fit_within_fifty_epochs(rng):
    data = _toy(rng)
    m = LinearModel.init(6, rng)
    train(m, data, TrainConfig(epochs=50, lr=0.5, seed=0))
    assert (m.predict(data.X) == data.y).all()


def test_full_batch_loss_non_increasing_at_small_lr(rng):
    data = _toy(rng, n=64)
    m = MlpModel.init([6, 8, 2], rng)
    train(m, data, TrainConfig(epochs=30, lr=1e-3, batch_size=64))
    losses = m.history.train_loss
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_same_seed_same_parameters(rng):
    data = _toy(rng)
    spec = RelationSpec(additive={4, 5}, equivalence_groups=[(0, 1, 2)])
    outs = []
    for _ in range(2):
        m = MlpModel.init([6, 5, 2], np.random.default_rng(7))
        train(m, data, TrainConfig(scheme="unified", epochs=3, seed=3), spec=spec,
              normalizer=EquivalenceNormalizer([(0, 1, 2)]))
        outs.append([p.tobytes() for p in m.params])
    assert outs[0] == outs[1]


def test_unified_on_opposite_labels_in_one_cycle():
    # x = 10 and z = 01 are interchangeable and labelled oppositely with equal mass
    X = np.array([[1, 0]] * 20 + [[0, 1]] * 20, np.uint8)
    y = np.array([0] * 20 + [1] * 20)
    spec = RelationSpec(equivalence_groups=[(0, 1)])
    norm = EquivalenceNormalizer([(0, 1)])
    m = MlpModel.init([2, 4, 2], np.random.default_rng(0))
    train(m, LabeledDataset(X, y), TrainConfig(scheme="unified", epochs=20, seed=0), spec=spec, normalizer=norm)
    f = NormalizedClassifier(m, norm)
    assert f.predict(np.array([1, 0])) == f.predict(np.array([0, 1]))
    g = build_graph(spec, all_vectors(2))
    dist = FiniteDistribution.deterministic({"10": 0.5, "01": 0.5}, {"10": 0, "01": 1})
    best, _ = best_robust_labeling(g, dist)
    assert robust_accuracy(f, g, dist) == pytest.approx(best) == pytest.approx(0.5)


def test_np_model_robust_on_training_points(rng):
    spec = RelationSpec(equivalence_groups=[(0, 1), (2, 3)])
    g = build_graph(spec, all_vectors(5))
    X = np.array([as_vector(v) for v in g.nodes])
    y = (X[:, :2].max(1) & X[:, 4]).astype(int)
    norm = EquivalenceNormalizer(spec.equivalence_groups)
    m = MlpModel.init([5, 6, 2], rng)
    train(m, LabeledDataset(X, y), TrainConfig(scheme="np", epochs=5), normalizer=norm)
    f = NormalizedClassifier(m, norm)
    assert all(is_robust(f, g, v) for v in g.nodes)


def test_validation_selection_and_history(rng):
    data = _toy(rng)
    m = MlpModel.init([6, 4, 2], rng)
    train(m, data.subset(np.arange(150)), TrainConfig(epochs=6), val=data.subset(np.arange(150, 200)))
    h = m.history
    assert len(h.train_loss) == len(h.val_loss) == 6
    assert h.val_loss[h.best_epoch] == min(h.val_loss)


def test_attack_labels_leave_other_class_clean(rng):
    from reladv.models import _scheme_inputs

    spec = RelationSpec(additive={3, 4, 5})
    X = np.zeros((6, 6), np.uint8)
    y = np.array([0, 0, 0, 1, 1, 1])
    m = LinearModel(np.array([0, 0, 0, -1.0, -1.0, -1.0]), 0.5)
    cfg = TrainConfig(scheme="adversarial", attack_labels=(1,), attack_k=3, attack_m=3)
    out = _scheme_inputs(m, X, y, cfg, spec, None)
    assert not out[:3].any() and out[3:, 3:].all()


# datasets and checkpoints -----------------------------------------------------


def test_dataset_jsonl_roundtrip(tmp_path, rng):
    data = _toy(rng, n=10)
    data.save(tmp_path / "d.jsonl")
    back = LabeledDataset.load(tmp_path / "d.jsonl", d=6)
    assert np.array_equal(back.X, data.X) and np.array_equal(back.y, data.y)
    with pytest.raises(DimensionMismatch):
        LabeledDataset.from_jsonl('{"features": [9], "label": 1}\n', d=4)
    with pytest.raises(InvalidConfig):
        LabeledDataset(np.zeros((1, 2)), [3])


@pytest.mark.parametrize("make", [lambda r: LinearModel.init(5, r), lambda r: MlpModel.init([5, 3, 4, 2], r)])
def test_checkpoint_roundtrip(tmp_path, rng, make):
    m = make(rng)
    rel = RelationSpec(equivalence_groups=[(0, 1)])
    save_model(m, tmp_path / "m.json", rel)
    back, back_rel = load_model(tmp_path / "m.json")
    X = rng.random((7, 5))
    assert np.array_equal(back.logits(X), m.logits(X)) and back_rel == rel

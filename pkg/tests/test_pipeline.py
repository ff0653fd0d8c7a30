import numpy as np
import pytest

from reladv.attacks import AttackConfig, Partition
from reladv.errors import DimensionMismatch, InvalidConfig
from reladv.models import LabeledDataset, LinearModel, MlpModel, NormalizedClassifier, TrainConfig, train
from reladv.normalize import EquivalenceNormalizer
from reladv.pipeline import (
    EvalReport,
    ExperimentConfig,
    SynthConfig,
    eval_rule,
    evaluate,
    format_table,
    hidden_rule,
    run_experiment,
    split_dataset,
    synth_dataset,
    train_scheme,
)
from reladv.relation import atomic_moves

SMALL = SynthConfig(d=24, n=400, n_groups=3, group_size=3, n_spurious=4, n_terms=3)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        SynthConfig(d=10, n_groups=3, group_size=4)
    with pytest.raises(InvalidConfig):
        SynthConfig(noise=0.5)
    with pytest.raises(InvalidConfig):
        SynthConfig(group_size=1)
    with pytest.raises(InvalidConfig):
        SynthConfig(p_active=1.5)


def test_layout():
    cfg = SynthConfig()
    assert cfg.groups[1] == [4, 5, 6, 7]
    assert cfg.spurious == list(range(32, 40))
    assert cfg.plain == list(range(40, 64))
    spec = cfg.relation()
    assert spec.additive == frozenset(cfg.spurious) and len(spec.equivalence_groups) == 8


def test_same_seed_same_file(tmp_path):
    for name in ("a", "b"):
        synth_dataset(SMALL, seed=3)[0].save(tmp_path / name)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert not np.array_equal(synth_dataset(SMALL, 3)[0].X, synth_dataset(SMALL, 4)[0].X)


def test_labels_depend_only_on_group_ors():
    data, spec = synth_dataset(SMALL, seed=1)
    ors = np.stack([data.X[:, g].max(axis=1) for g in SMALL.groups], axis=1)
    assert np.array_equal(eval_rule(hidden_rule(SMALL), ors), data.y)
    # every group move keeps the label
    norm = EquivalenceNormalizer(spec.equivalence_groups)
    for x in data.X[:20]:
        for z in atomic_moves(spec.without(type(spec)(additive=spec.additive)), x):
            assert np.array_equal(norm(z), norm(x))


def test_spurious_features_favor_benign():
    data, _ = synth_dataset(SynthConfig(), seed=0)
    sp = data.X[:, SynthConfig().spurious].mean(axis=1)
    assert sp[data.y == 0].mean() > 5 * sp[data.y == 1].mean()


def test_noise_flips_labels():
    clean, _ = synth_dataset(SMALL, seed=2)
    noisy, _ = synth_dataset(SynthConfig(**{**SMALL.__dict__, "noise": 0.2}), seed=2)
    rate = (clean.y != noisy.y).mean()
    assert 0.1 < rate < 0.3


def test_no_groups_means_np_equals_natural():
    cfg = SynthConfig(d=12, n=200, n_groups=0, n_spurious=0)
    data, spec = synth_dataset(cfg, seed=0)
    assert spec.is_empty and data.y.any()
    a = MlpModel.init([12, 4, 2], np.random.default_rng(0))
    b = MlpModel.init([12, 4, 2], np.random.default_rng(0))
    train(a, data, TrainConfig(epochs=2, seed=1))
    train(b, data, TrainConfig(scheme="np", epochs=2, seed=1), normalizer=EquivalenceNormalizer(spec.equivalence_groups))
    assert all(np.array_equal(p, q) for p, q in zip(a.params, b.params))


def test_split():
    data, _ = synth_dataset(SMALL, seed=0)
    tr, va, te = split_dataset(data, seed=0)
    assert (len(tr), len(va), len(te)) == (240, 80, 80)
    parts = sorted(r.tobytes() + bytes([l]) for p in (tr, va, te) for r, l in zip(p.X, p.y))
    assert parts == sorted(r.tobytes() + bytes([l]) for r, l in zip(data.X, data.y))


def test_normalized_model_recovers_rule():
    cfg = SynthConfig()
    data, spec = synth_dataset(cfg, seed=0)
    tr, va, te = split_dataset(data, seed=0)
    exp = ExperimentConfig(synth=cfg, epochs=20)
    model, norm = train_scheme("np", tr, va, spec, exp, seed=0)
    acc = (NormalizedClassifier(model, norm).predict(te.X) == te.y).mean()
    assert acc >= 0.95


# evaluation ------------------------------------------------------------------


def _small_model(seed=0):
    data, spec = synth_dataset(SMALL, seed=seed)
    model = MlpModel.init([SMALL.d, 16, 2], np.random.default_rng(seed))
    train(model, data, TrainConfig(epochs=10, seed=seed))
    return model, data, spec


def test_constant_model_is_robust():
    data, spec = synth_dataset(SMALL, seed=0)
    model = LinearModel(np.zeros(SMALL.d), 1.0)
    rep = evaluate(model, data, spec)
    assert rep.fnr_natural == rep.fnr_adversarial == 0.0
    assert rep.fpr_natural == rep.fpr_adversarial == 100.0


def test_natural_model_is_evaded():
    model, data, spec = _small_model()
    rep = evaluate(model, data, spec, seed=0)
    assert 0 <= rep.fnr_natural < rep.fnr_adversarial <= 100
    assert rep.fpr_adversarial == rep.fpr_natural
    assert rep.n_malicious + rep.n_benign == len(data)
    assert set(rep.per_attack) == {"group(K=3)", "grad(m=4,K=10)"}


def test_report_roundtrip_and_determinism():
    model, data, spec = _small_model()
    a = evaluate(model, data, spec, seed=5, config={"scheme": "natural"})
    assert EvalReport.from_json(a.to_json()) == a
    assert evaluate(model, data, spec, seed=5, config={"scheme": "natural"}).to_json() == a.to_json()


def test_fnr_monotone_in_budget():
    model, data, spec = _small_model(seed=1)
    part = Partition.by_rule(spec)
    prev = -1.0
    for k in range(4):
        rep = evaluate(model, data, spec, attacks=[AttackConfig("group", k=k, partition=part),
                                                    AttackConfig("grad", k=k, m=2)])
        assert rep.fnr_adversarial >= prev
        prev = rep.fnr_adversarial


def test_normalized_evaluation_is_constant_on_group_closure():
    model, data, spec = _small_model()
    norm = EquivalenceNormalizer(spec.equivalence_groups)
    f = NormalizedClassifier(model, norm)
    groups_only = type(spec)(equivalence_groups=spec.equivalence_groups)
    rng = np.random.default_rng(0)
    for x in data.X[:30]:
        z = x.copy()
        for _ in range(6):
            moves = atomic_moves(groups_only, z)
            if not moves:
                break
            z = moves[rng.integers(len(moves))]
            assert f.predict(z) == f.predict(x)


def test_dimension_check():
    data, spec = synth_dataset(SMALL, seed=0)
    with pytest.raises(DimensionMismatch):
        evaluate(LinearModel(np.zeros(3)), data, spec)


def test_experiment_smoke():
    exp = ExperimentConfig(synth=SMALL, hidden=(8,), epochs=3, warmup_epochs=1, attack_k=2, attack_m=2)
    reports = run_experiment(seed=0, cfg=exp)
    assert set(reports) == {"natural", "adversarial", "np", "unified"}
    table = format_table({k: [v] for k, v in reports.items()})
    assert table.splitlines()[0].startswith("scheme") and len(table.splitlines()) == 6

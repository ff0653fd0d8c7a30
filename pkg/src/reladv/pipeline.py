"""Synthetic malware-style data, scheme training and attack evaluation."""
from __future__ import annotations

import json
import logging
import statistics
from math import comb
from dataclasses import asdict, dataclass, field

import numpy as np

from .attacks import AttackConfig, Partition, attack_suite
from .errors import DimensionMismatch, InvalidConfig
from .models import LabeledDataset, MlpModel, NormalizedClassifier, TrainConfig, train
from .normalize import EquivalenceNormalizer
from .relation import RelationSpec

log = logging.getLogger(__name__)


@dataclass
class SynthConfig:
    """Feature layout: equivalence groups first, then spurious additive features, then plain ones."""

    d: int = 64
    n: int = 2000
    n_groups: int = 8
    group_size: int = 4
    n_spurious: int = 8
    rule_seed: int = 0
    noise: float = 0.0
    n_terms: int = 4
    term_size: int = 2
    p_active: float = 0.4
    p_extra: float = 0.15
    p_spurious_benign: float = 0.6
    p_spurious_malicious: float = 0.05
    p_plain: float = 0.3

    def __post_init__(self):
        if self.n_groups * self.group_size + self.n_spurious > self.d:
            raise InvalidConfig("groups and spurious features do not fit in d")
        if self.n_groups and self.group_size < 2:
            raise InvalidConfig("equivalence groups need at least two members")
        if not 0 <= self.noise < 0.5:
            raise InvalidConfig("noise rate must lie in [0, 0.5)")
        if self.n < 1 or self.n_terms < 1 or self.term_size < 1:
            raise InvalidConfig("n, n_terms and term_size must be positive")
        for name in ("p_active", "p_extra", "p_spurious_benign", "p_spurious_malicious", "p_plain"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidConfig(f"{name} must be a probability")

    @property
    def groups(self) -> list[list[int]]:
        s = self.group_size
        return [list(range(i * s, (i + 1) * s)) for i in range(self.n_groups)]

    @property
    def spurious(self) -> list[int]:
        start = self.n_groups * self.group_size
        return list(range(start, start + self.n_spurious))

    @property
    def plain(self) -> list[int]:
        return list(range(self.n_groups * self.group_size + self.n_spurious, self.d))

    def relation(self) -> RelationSpec:
        return RelationSpec(additive=frozenset(self.spurious),
                            equivalence_groups=tuple(tuple(g) for g in self.groups))

    def rule_units(self) -> list[list[int]]:
        """Feature sets whose OR feeds the hidden rule: the groups, or a few plain features."""
        if self.n_groups >= self.term_size:
            return self.groups
        return [[f] for f in self.plain[: max(self.term_size, 4)]]


def hidden_rule(cfg: SynthConfig) -> list[tuple[int, ...]]:
    """Monotone DNF over rule units: a list of conjunctive terms of unit indices."""
    units = len(cfg.rule_units())
    if units < cfg.term_size:
        raise InvalidConfig("not enough features for the hidden rule")
    rng = np.random.default_rng(cfg.rule_seed)
    terms = set()
    while len(terms) < min(cfg.n_terms, comb(units, cfg.term_size)):
        terms.add(tuple(sorted(rng.choice(units, cfg.term_size, replace=False).tolist())))
    return sorted(terms)


def eval_rule(terms, active: np.ndarray) -> np.ndarray:
    out = np.zeros(active.shape[0], bool)
    for t in terms:
        out |= active[:, list(t)].all(axis=1)
    return out.astype(np.int64)


def synth_dataset(cfg: SynthConfig, seed: int = 0) -> tuple[LabeledDataset, RelationSpec]:
    """Sample a dataset whose labels depend only on group ORs.

    Each active group switches on one uniformly chosen member plus each
    other member with probability ``p_extra``. Spurious features are set
    mostly on benign samples, so a model that trusts them can be evaded by
    adding them.
    """
    rng = np.random.default_rng(seed)
    units = cfg.rule_units()
    X = (rng.random((cfg.n, cfg.d)) < cfg.p_plain).astype(np.uint8)
    X[:, cfg.spurious] = 0
    active = (rng.random((cfg.n, len(units))) < cfg.p_active).astype(np.uint8)
    y = eval_rule(hidden_rule(cfg), active)
    for u, members in enumerate(units):
        members = np.asarray(members)
        X[:, members] = 0
        on = np.flatnonzero(active[:, u])
        if members.size == 1:
            X[on, members[0]] = 1
            continue
        pick = rng.integers(0, members.size, size=on.size)
        extra = rng.random((on.size, members.size)) < cfg.p_extra
        extra[np.arange(on.size), pick] = True
        X[np.ix_(on, members)] = extra.astype(np.uint8)
    flip = rng.random(cfg.n) < cfg.noise
    y = np.where(flip, 1 - y, y)
    if cfg.spurious:
        p = np.where(y == 1, cfg.p_spurious_malicious, cfg.p_spurious_benign)
        X[:, cfg.spurious] = (rng.random((cfg.n, cfg.n_spurious)) < p[:, None]).astype(np.uint8)
    return LabeledDataset(X, y), cfg.relation()


def split_dataset(data: LabeledDataset, seed: int = 0, fractions=(0.6, 0.2, 0.2)):
    """Seeded shuffle into train / validation / test parts."""
    order = np.random.default_rng(seed).permutation(len(data))
    a = int(round(fractions[0] * len(data)))
    b = a + int(round(fractions[1] * len(data)))
    return data.subset(order[:a]), data.subset(order[a:b]), data.subset(order[b:])


# evaluation -----------------------------------------------------------------


@dataclass
class EvalReport:
    fnr_natural: float
    fpr_natural: float
    fnr_adversarial: float
    fpr_adversarial: float
    per_attack: dict = field(default_factory=dict)
    n_malicious: int = 0
    n_benign: int = 0
    seed: int | None = None
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def default_attacks(spec: RelationSpec, group_k: int = 3, grad_m: int = 4, grad_k: int = 10) -> list[AttackConfig]:
    return [
        AttackConfig("group", k=group_k, partition=Partition.by_rule(spec)),
        AttackConfig("grad", k=grad_k, m=grad_m),
    ]


def _pct(num, den) -> float:
    return 100.0 * num / den if den else 0.0


def evaluate(model, data: LabeledDataset, spec: RelationSpec, normalizer=None, attacks=None,
             seed: int | None = None, config: dict | None = None, graph=None) -> EvalReport:
    """Clean and attacked error rates; class 1 is malicious.

    A malicious sample counts as evaded when it is already misclassified or
    any attack flips it. Benign samples are never attacked.
    """
    if data.d != model.d:
        raise DimensionMismatch(f"model expects d={model.d}, data has d={data.d}")
    f = model if normalizer is None else NormalizedClassifier(model, normalizer)
    attacks = default_attacks(spec) if attacks is None else list(attacks)
    pred = f.predict(data.X)
    mal = np.flatnonzero(data.y == 1)
    ben = np.flatnonzero(data.y == 0)
    fn = int((pred[mal] == 0).sum())
    fp = int((pred[ben] == 1).sum())
    evaded = 0
    hits = {cfg.name: 0 for cfg in attacks}
    for i in mal:
        res = attack_suite(f, spec, graph, data.X[i], 1, attacks)
        evaded += bool(res.success)
        for name, ok in res.details.items():
            hits[name] += bool(ok)
    return EvalReport(
        fnr_natural=_pct(fn, mal.size),
        fpr_natural=_pct(fp, ben.size),
        fnr_adversarial=_pct(evaded, mal.size),
        fpr_adversarial=_pct(fp, ben.size),
        per_attack={k: _pct(v, mal.size) for k, v in hits.items()},
        n_malicious=int(mal.size),
        n_benign=int(ben.size),
        seed=seed,
        config=dict(config or {}),
    )


# experiments ----------------------------------------------------------------

TABLE_SCHEMES = ("natural", "adversarial", "np", "unified")


@dataclass
class ExperimentConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    hidden: tuple = (32, 32, 32)
    epochs: int = 30
    lr: float = 0.1
    batch_size: int = 32
    attack_k: int = 5
    attack_m: int = 8
    warmup_epochs: int = 5
    # classes perturbed during training, per scheme (None: every class); raw
    # adversarial training collapses to a constant predictor unless only
    # malicious samples are attacked
    attack_labels: dict = field(default_factory=lambda: {"adversarial": (1,), "unified": None})
    schemes: tuple = TABLE_SCHEMES

    def train_config(self, scheme: str, seed: int) -> TrainConfig:
        return TrainConfig(scheme=scheme, epochs=self.epochs, lr=self.lr, seed=seed,
                           batch_size=self.batch_size, attack_k=self.attack_k, attack_m=self.attack_m,
                           warmup_epochs=self.warmup_epochs,
                           attack_labels=self.attack_labels.get(scheme))


def train_scheme(scheme: str, train_set, val_set, spec: RelationSpec, cfg: ExperimentConfig, seed: int):
    """Train one MLP; returns ``(model, normalizer or None)``."""
    normalizer = None
    if scheme in ("np", "unified"):
        normalizer = EquivalenceNormalizer(spec.equivalence_groups)
    model = MlpModel.init([train_set.d, *cfg.hidden, 2], np.random.default_rng(seed))
    train(model, train_set, cfg.train_config(scheme, seed), spec=spec, normalizer=normalizer, val=val_set)
    return model, normalizer


def run_experiment(seed: int = 0, cfg: ExperimentConfig | None = None) -> dict[str, EvalReport]:
    """Generate data, train every scheme and evaluate it on the held-out split."""
    cfg = cfg or ExperimentConfig()
    data, spec = synth_dataset(cfg.synth, seed)
    tr, va, te = split_dataset(data, seed)
    out = {}
    for scheme in cfg.schemes:
        model, normalizer = train_scheme(scheme, tr, va, spec, cfg, seed)
        out[scheme] = evaluate(model, te, spec, normalizer, seed=seed, config={"scheme": scheme})
        log.info("seed %d %s: %s", seed, scheme, out[scheme])
    return out


def _mean_sd(values) -> str:
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return f"{statistics.fmean(values):5.1f}±{sd:4.1f}"


def format_table(reports: dict[str, list[EvalReport]]) -> str:
    """Plain-text table: one row per scheme, mean±sd over repeats."""
    head = f"{'scheme':<12} {'FNR clean':>11} {'FNR attacked':>13} {'FPR clean':>11} {'FPR attacked':>13}"
    rows = [head, "-" * len(head)]
    for scheme, reps in reports.items():
        cols = [_mean_sd([getattr(r, k) for r in reps])
                for k in ("fnr_natural", "fnr_adversarial", "fpr_natural", "fpr_adversarial")]
        rows.append(f"{scheme:<12} {cols[0]:>11} {cols[1]:>13} {cols[2]:>11} {cols[3]:>13}")
    return "\n".join(rows)

"""Command-line entry point: ``reladv <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import oracle
from .attacks import AttackConfig, Partition, attack_suite, run_attack
from .errors import InvalidConfig, ReladvError
from .graph import build_graph, is_reversible
from .models import LabeledDataset, LinearModel, MlpModel, NormalizedClassifier, TrainConfig, load_model, save_model, train
from .normalize import EquivalenceNormalizer, GraphNormalizer
from .pipeline import ExperimentConfig, SynthConfig, evaluate, format_table, run_experiment, synth_dataset
from .relation import RelationSpec, all_vectors, load_relation, save_relation
from .ruleminer import extract_groups, groups_to_relation, read_api_csv

log = logging.getLogger("reladv")


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _relation(args) -> tuple[RelationSpec, int | None]:
    if not args.relation:
        return RelationSpec(), None
    return load_relation(args.relation)


def _dataset(path, d=None) -> LabeledDataset:
    return LabeledDataset.load(path, d)


def _normalizer_for(spec: RelationSpec, d: int):
    """Closed-form normalizer for equivalence groups, graph normalizer for small explicit domains."""
    if spec.is_empty:
        return None
    if spec.explicit_edges or spec.additive:
        if d > 16:
            raise InvalidConfig("graph normalization needs d <= 16")
        return GraphNormalizer(build_graph(spec, all_vectors(d)), spec)
    return EquivalenceNormalizer(spec.equivalence_groups)


def _normalize_subset(arg, spec: RelationSpec) -> RelationSpec | None:
    if arg is None:
        return None
    if arg == "equivalence":
        return RelationSpec(equivalence_groups=spec.equivalence_groups)
    sub, _ = load_relation(arg)
    return sub


# commands -------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    cfg = SynthConfig(d=args.d, n=args.n, n_groups=args.groups, group_size=args.group_size,
                      n_spurious=args.spurious, rule_seed=args.rule_seed, noise=args.noise)
    data, spec = synth_dataset(cfg, args.seed)
    _emit(data.to_jsonl(), args.out)
    if args.relation:
        save_relation(spec, args.relation, dim=cfg.d)
    return 0


def cmd_mine_rules(args) -> int:
    spec = groups_to_relation(extract_groups(read_api_csv(args.inp)))
    _emit(json.dumps(spec.to_json_dict()), args.out)
    return 0


def cmd_train(args) -> int:
    spec, dim = _relation(args)
    data = _dataset(args.data, args.d or dim)
    val = _dataset(args.val, data.d) if args.val else None
    sub = _normalize_subset(args.normalize_subset, spec)
    if args.scheme in ("np", "unified") and sub is None:
        sub = RelationSpec(equivalence_groups=spec.equivalence_groups)
    normalizer = _normalizer_for(sub, data.d) if sub is not None else None
    if args.scheme in ("np", "unified") and normalizer is None:
        normalizer = EquivalenceNormalizer(())
    rng = np.random.default_rng(args.seed)
    if args.arch == "linear":
        model = LinearModel.init(data.d, rng)
    else:
        model = MlpModel.init([data.d, *args.hidden, 2], rng)
    cfg = TrainConfig(scheme=args.scheme, epochs=args.epochs, lr=args.lr, seed=args.seed,
                      batch_size=args.batch_size, attack_k=args.attack_k, attack_m=args.attack_m,
                      warmup_epochs=args.warmup)
    train(model, data, cfg, spec=spec, normalizer=normalizer, val=val)
    rel = normalizer.relation if normalizer is not None else None
    if args.out:
        save_model(model, args.out, rel)
    acc = float((_classifier(model, rel, data.d).predict(data.X) == data.y).mean())
    print(json.dumps({"scheme": args.scheme, "train_accuracy": acc,
                      "final_loss": model.history.train_loss[-1]}))
    return 0


def _classifier(model, rel, d):
    if rel is None or rel.is_empty:
        return model
    return NormalizedClassifier(model, _normalizer_for(rel, d))


def _load_classifier(path):
    model, rel = load_model(path)
    return model, _classifier(model, rel, model.d)


def _attack_configs(args, spec) -> list[AttackConfig]:
    if args.algo == "suite":
        return [AttackConfig("exhaustive"), AttackConfig("group", k=args.k, partition=Partition.by_rule(spec)),
                AttackConfig("grad", k=args.k, m=args.m)]
    part = Partition.by_rule(spec) if args.algo == "group" else None
    return [AttackConfig(args.algo, k=args.k, m=args.m, partition=part)]


def cmd_attack(args) -> int:
    spec, _ = _relation(args)
    model, f = _load_classifier(args.model)
    data = _dataset(args.data, model.d)
    configs = _attack_configs(args, spec)
    graph = build_graph(spec, all_vectors(data.d)) if data.d <= 16 and not spec.is_empty else None
    lines = []
    for x, y in zip(data.X, data.y):
        if args.algo == "suite":
            res = attack_suite(f, spec, graph, x, int(y), configs)
        else:
            res = run_attack(configs[0], f, spec, graph, x, int(y))
        lines.append(json.dumps(res.to_json_dict()))
    _emit("\n".join(lines), args.out)
    return 0


def cmd_eval(args) -> int:
    spec, _ = _relation(args)
    model, rel = load_model(args.model)
    data = _dataset(args.data, model.d)
    normalizer = _normalizer_for(rel, data.d) if rel is not None and not rel.is_empty else None
    attacks = [AttackConfig("group", k=args.group_k, partition=Partition.by_rule(spec)),
               AttackConfig("grad", k=args.grad_k, m=args.grad_m)]
    report = evaluate(model, data, spec, normalizer, attacks, seed=args.seed, config={"model": str(args.model)})
    _emit(report.to_json(), args.out)
    if args.table:
        print(format_table({Path(args.model).stem: [report]}))
    return 0


def _parse_labels(path, graph):
    raw = json.loads(Path(path).read_text())
    return {k: int(raw[k]) for k in graph.nodes}


def cmd_analyze(args) -> int:
    spec, dim = _relation(args)
    dist = oracle.FiniteDistribution.load(args.dist)
    if args.exact:
        dist = oracle.FiniteDistribution(
            {x: Fraction(str(m)) for x, m in dist.mu.items()},
            {x: {l: Fraction(str(p)) for l, p in e.items()} for x, e in dist.eta.items()},
            dist.labels,
        )
    keys = sorted(dist.mu)
    d = dim or (len(keys[0]) if keys and isinstance(keys[0], str) else None)
    if spec.explicit_edges and not (spec.additive or spec.equivalence_groups):
        domain = sorted(set(keys) | {v for e in spec.explicit_edges for v in e})
    elif d is not None and d <= 16:
        domain = all_vectors(d)
    else:
        domain = keys
    graph = build_graph(spec, domain)
    acc_star, comp_labels = oracle.optimal_robust_accuracy(graph, dist)
    out = {
        "nodes": len(graph),
        "edges": graph.num_edges,
        "reversible": is_reversible(graph),
        "optimal_robust_accuracy": float(acc_star),
        "component_labels": comp_labels,
    }
    if args.labels:
        f = _parse_labels(args.labels, graph)
    elif args.model:
        f = _load_classifier(args.model)[1]
    else:
        f = None
    if f is not None:
        out["robustness"] = float(oracle.robustness(f, graph, dist))
        out["robust_accuracy"] = float(oracle.robust_accuracy(f, graph, dist))
    if args.edge:
        x, z = args.edge.split(",")
        out["tradeoff_delta"] = float(oracle.tradeoff_delta(graph, (x, z), dist))
    if args.brute_force:
        best, witness = oracle.best_robust_labeling(graph, dist)
        out["best_robust_accuracy"] = float(best)
        out["best_labeling"] = {k: int(v) for k, v in zip(graph.nodes, witness)}
    _emit(json.dumps(out, indent=1), args.out)
    return 0


def cmd_normalize(args) -> int:
    spec, dim = _relation(args)
    data = _dataset(args.data, args.d or dim)
    sub = _normalize_subset(args.subset, spec) if args.subset != "full" else spec
    norm = _normalizer_for(sub, data.d)
    X = data.X if norm is None else norm.batch(data.X)
    _emit(LabeledDataset(X, data.y).to_jsonl(), args.out)
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig(epochs=args.epochs)
    reports: dict[str, list] = {s: [] for s in cfg.schemes}
    for seed in range(args.seed, args.seed + args.repeats):
        for scheme, rep in run_experiment(seed, cfg).items():
            reports[scheme].append(rep)
    print(format_table(reports))
    if args.out:
        Path(args.out).write_text(json.dumps({s: [json.loads(r.to_json()) for r in reps]
                                              for s, reps in reports.items()}, indent=1) + "\n")
    return 0


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--relation", help="relation spec JSON")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="reladv", description="Robust learning against relational adversaries.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[common], help="sample a synthetic dataset (writes the relation to --relation)")
    g.add_argument("--n", type=int, default=2000)
    g.add_argument("--d", type=int, default=64)
    g.add_argument("--groups", type=int, default=8)
    g.add_argument("--group-size", type=int, default=4)
    g.add_argument("--spurious", type=int, default=8)
    g.add_argument("--rule-seed", type=int, default=0)
    g.add_argument("--noise", type=float, default=0.0)
    g.set_defaults(func=cmd_gen_data)

    m = sub.add_parser("mine-rules", parents=[common], help="extract API equivalence groups from a CSV inventory")
    m.add_argument("--in", dest="inp", required=True)
    m.set_defaults(func=cmd_mine_rules)

    t = sub.add_parser("train", parents=[common], help="train a classifier under one scheme")
    t.add_argument("--data", required=True)
    t.add_argument("--val")
    t.add_argument("--d", type=int)
    t.add_argument("--scheme", choices=["natural", "np", "adversarial", "unified"], default="natural")
    t.add_argument("--arch", choices=["mlp", "linear"], default="mlp")
    t.add_argument("--hidden", type=int, nargs="*", default=[32, 32, 32])
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--warmup", type=int, default=0, help="epochs trained without attacks")
    t.add_argument("--normalize-subset", help="'equivalence' or a relation JSON for the normalized sub-relation")
    t.add_argument("--attack-k", type=int, default=5)
    t.add_argument("--attack-m", type=int, default=8)
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("attack", parents=[common], help="attack every sample of a dataset")
    a.add_argument("--algo", choices=["exhaustive", "group", "grad", "suite"], default="suite")
    a.add_argument("--k", type=int, default=3)
    a.add_argument("--m", type=int, default=4)
    a.add_argument("--model", required=True)
    a.add_argument("--data", required=True)
    a.set_defaults(func=cmd_attack)

    e = sub.add_parser("eval", parents=[common], help="clean and attacked FNR/FPR report")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--group-k", type=int, default=3)
    e.add_argument("--grad-k", type=int, default=10)
    e.add_argument("--grad-m", type=int, default=4)
    e.add_argument("--table", action="store_true", help="also print a plain-text table")
    e.set_defaults(func=cmd_eval)

    an = sub.add_parser("analyze", parents=[common], help="exact robustness quantities on a finite domain")
    an.add_argument("--dist", required=True, help="distribution JSON")
    an.add_argument("--labels", help="JSON map from input to predicted label")
    an.add_argument("--model", help="model checkpoint used as the labeling")
    an.add_argument("--edge", help="extra edge 'x,z' for the trade-off")
    an.add_argument("--brute-force", action="store_true", help="search all labelings (<= 16 nodes)")
    an.add_argument("--exact", action="store_true", help="use rational arithmetic")
    an.set_defaults(func=cmd_analyze)

    n = sub.add_parser("normalize", parents=[common], help="write the normalized dataset")
    n.add_argument("--data", required=True)
    n.add_argument("--d", type=int)
    n.add_argument("--subset", default="equivalence",
                   help="'equivalence' (default), 'full', or a relation JSON to normalize over")
    n.set_defaults(func=cmd_normalize)

    x = sub.add_parser("experiment", parents=[common], help="train and evaluate every scheme on synthetic data")
    x.add_argument("--repeats", type=int, default=5)
    x.add_argument("--epochs", type=int, default=30)
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ReladvError, OSError) as exc:
        print(f"reladv {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

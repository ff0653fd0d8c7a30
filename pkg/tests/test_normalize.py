import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_graph, random_reversible_graph
from reladv.errors import NodeNotInDomain, NotReversible, OverlappingGroups
from reladv.graph import ExplicitGraph, build_graph, closure, wcc
from reladv.models import LinearModel, MlpModel, NormalizedClassifier
from reladv.normalize import (
    EquivalenceNormalizer,
    GraphNormalizer,
    StrongestAdvNormalizer,
    equivalence_normalize,
    generic_normalize,
    strongest_adv_normalize,
)
from reladv.oracle import is_robust
from reladv.relation import RelationSpec, all_vectors, as_vector


def test_generic_examples():
    assert generic_normalize(ExplicitGraph(["a"]), "a") == "a"
    chain = ExplicitGraph(["a", "b", "c"], [("a", "b"), ("b", "c")])
    assert {generic_normalize(chain, v) for v in "abc"} == {"c"}
    cyc = ExplicitGraph(["b", "a"], [("a", "b"), ("b", "a")])
    assert generic_normalize(cyc, "a") == generic_normalize(cyc, "b") == "a"
    with pytest.raises(NodeNotInDomain):
        generic_normalize(chain, "q")


def test_generic_picks_a_sink_component():
    # two sinks: the first finished in DFS from the smallest root wins
    g = ExplicitGraph(["a", "b", "c"], [("a", "b"), ("a", "c")])
    assert generic_normalize(g, "c") == "b"
    # the representative of a sink cycle is its smallest member
    g = ExplicitGraph(list("pqrs"), [("p", "s"), ("s", "r"), ("r", "s")])
    assert generic_normalize(g, "p") == "r"


graphs = st.builds(lambda s, n, p: random_graph(random.Random(s), n, p),
                   st.integers(0, 10**6), st.integers(1, 20), st.floats(0, 0.25))


@given(graphs)
def test_generic_constant_per_wcc_idempotent_and_in_component(g):
    norm = GraphNormalizer(g)
    idx = wcc(g)
    for members in idx.members:
        outs = {norm(v) for v in members}
        assert len(outs) == 1
        (rep,) = outs
        assert rep in members
        assert norm(rep) == rep


@given(graphs, st.integers(0, 10**6))
def test_normalized_labeling_is_robust_everywhere(g, seed):
    rng = random.Random(seed)
    base = {v: rng.randrange(2) for v in g.nodes}
    norm = GraphNormalizer(g)
    f = {v: base[norm(v)] for v in g.nodes}
    assert all(is_robust(f, g, v) for v in g.nodes)


@given(st.integers(0, 10**6))
def test_reversible_normal_form_constant_on_closures(seed):
    g = random_reversible_graph(random.Random(seed), 10, 0.15)
    norm = GraphNormalizer(g)
    for v in g.nodes:
        assert {norm(z) for z in closure(g, v)} == {norm(v)}


def test_equivalence_examples():
    assert equivalence_normalize([(0, 1)], "01") == "10"
    assert equivalence_normalize([(0, 1)], "00") == "00"
    assert equivalence_normalize([(0, 1), (2, 3)], "0111") == "1010"
    out = equivalence_normalize([(0, 1)], np.array([0, 1], np.uint8))
    assert isinstance(out, np.ndarray) and out.tolist() == [1, 0]
    with pytest.raises(OverlappingGroups):
        EquivalenceNormalizer([(0, 1), (1, 2)])


GROUPS = [(0, 2, 4), (1, 3)]


@given(st.sampled_from(all_vectors(6)))
def test_equivalence_normal_form_in_closure_and_idempotent(x):
    g = build_graph(RelationSpec(equivalence_groups=GROUPS), all_vectors(6))
    norm = EquivalenceNormalizer(GROUPS)
    nx = norm(x)
    assert nx in closure(g, x)
    assert norm(nx) == nx
    assert {norm(z) for z in closure(g, x)} == {nx}


def test_equivalence_matches_generic_on_explicit_graph():
    # on the materialized graph every closure is a component, so both give one value per component
    g = build_graph(RelationSpec(equivalence_groups=GROUPS), all_vectors(6))
    norm = EquivalenceNormalizer(GROUPS)
    gen = GraphNormalizer(g)
    for members in wcc(g).members:
        assert len({norm(v) for v in members}) == 1
        assert len({gen(v) for v in members}) == 1


def test_pullback_routes_gradient_of_off_groups():
    norm = EquivalenceNormalizer([(0, 1, 2)])
    X = np.array([[0, 0, 0, 1], [0, 1, 0, 1]], np.uint8)
    G = np.array([[2.0, 5.0, 7.0, 1.0], [2.0, 5.0, 7.0, 1.0]])
    out = norm.pullback(X, G)
    assert out[0].tolist() == [2.0, 2.0, 2.0, 1.0]
    assert out[1].tolist() == [0.0, 0.0, 0.0, 1.0]


def test_normalized_classifier_gradient_matches_first_step_change(rng):
    # setting one bit of an all-off group changes the loss like setting the canonical bit
    model = LinearModel(rng.standard_normal(4), 0.1)
    norm = EquivalenceNormalizer([(0, 1, 2)])
    f = NormalizedClassifier(model, norm)
    x = np.array([0, 0, 0, 1], np.uint8)
    g = f.grad_input(x.astype(float), 1)
    assert g[0] == pytest.approx(g[2]) and g[1] == pytest.approx(g[2])
    assert f.predict(np.array([0, 0, 1, 1])) == f.predict(np.array([1, 0, 0, 1]))


class ConstantModel:
    def predict(self, X):
        return np.zeros(len(np.atleast_2d(X)), np.int64)

    def loss(self, X, y):
        return np.full(len(np.atleast_2d(X)), 0.5)


def test_strongest_adv_constant_classifier_returns_minimum():
    spec = RelationSpec(equivalence_groups=[(0, 1)])
    g = build_graph(spec, all_vectors(2))
    assert strongest_adv_normalize(ConstantModel(), spec, g, "11") == "01"


def test_strongest_adv_two_cycle_picks_higher_loss():
    # w favors bit 0, so with label f("01") = 0 the loss is highest at "10"
    spec = RelationSpec.explicit([("01", "10"), ("10", "01")])
    g = build_graph(spec, ["01", "10"])
    model = LinearModel(np.array([2.0, -1.0]), 0.0)
    assert model.predict(as_vector("01")) == 0
    n = StrongestAdvNormalizer(model, spec, g)
    assert n("01") == n("10") == "10"


def test_strongest_adv_three_cycle_unique_maximizer():
    spec = RelationSpec.explicit([("001", "010"), ("010", "100"), ("100", "001")])
    g = build_graph(spec, ["001", "010", "100"])
    model = LinearModel(np.array([0.3, -1.0, 2.0]), -0.5)
    y = int(model.predict(as_vector("001")))
    losses = {v: float(model.loss(as_vector(v), y)) for v in g.nodes}
    want = max(losses, key=losses.get)
    assert {strongest_adv_normalize(model, spec, g, v) for v in g.nodes} == {want}


def test_strongest_adv_requires_reversible():
    spec = RelationSpec(additive={0})
    with pytest.raises(NotReversible):
        StrongestAdvNormalizer(ConstantModel(), spec, domain=all_vectors(2))


@given(st.integers(0, 10**6))
def test_strongest_adv_is_sound_on_random_mlps(seed):
    rng = np.random.default_rng(seed)
    spec = RelationSpec(equivalence_groups=[(0, 1, 2)])
    g = build_graph(spec, all_vectors(4))
    model = MlpModel.init([4, 5, 2], rng)
    n = StrongestAdvNormalizer(model, spec, g)
    f = NormalizedClassifier(model, n)
    for v in g.nodes:
        assert is_robust(f, g, v)
        assert n(n(v)) == n(v)

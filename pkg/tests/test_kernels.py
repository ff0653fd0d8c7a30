"""The numba kernels, the numpy/scipy fallback and the plain loops must agree."""
import os
import random
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_graph
from reladv import kernels
from reladv.attacks import _group_arrays
from reladv.kernels import _loops
from reladv.relation import RelationSpec

JIT = kernels.numba_kernels()
REF = kernels.numpy_kernels()
PATHS = [JIT, REF, _loops]

graphs = st.builds(lambda s, n, p: random_graph(random.Random(s), n, p),
                   st.integers(0, 10**6), st.integers(1, 30), st.floats(0, 0.2))


@given(graphs, st.data())
def test_graph_kernels_agree(g, data):
    src = data.draw(st.integers(0, len(g) - 1))
    outs = [(k.reach_mask(g.indptr, g.indices, src), k.weak_labels(g.indptr, g.indices),
             k.strong_labels(g.indptr, g.indices)) for k in PATHS]
    for other in outs[1:]:
        for a, b in zip(outs[0], other):
            assert np.array_equal(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))


def test_labels_are_canonical():
    # ids follow the smallest member, so node 0 always has label 0
    g = random_graph(random.Random(3), 20, 0.1)
    for k in PATHS:
        lab = np.asarray(k.weak_labels(g.indptr, g.indices))
        first = [int(lab[np.flatnonzero(lab == c)[0]]) for c in np.unique(lab)]
        assert first == sorted(first) and lab[0] == 0


@given(st.integers(1, 8), st.integers(0, 10**6))
def test_best_labeling_agrees(n, seed):
    rng = np.random.default_rng(seed)
    reach = rng.integers(0, 1 << n, n).astype(np.int64) | (1 << np.arange(n))
    k = int(rng.integers(1, n + 1))
    comp = rng.integers(0, k, n).astype(np.int64)
    g0 = np.round(rng.random(n), 2)
    g1 = np.round(rng.random(n), 2)
    res = [k_.best_labeling(reach, comp, k, g0, g1) for k_ in PATHS]
    for value, mask in res[1:]:
        assert value == pytest.approx(res[0][0], abs=1e-12)
        assert int(mask) == int(res[0][1])


SPEC = RelationSpec(additive={8, 9, 10}, equivalence_groups=[(0, 1, 2), (3, 4, 5, 6)])


@given(st.lists(st.integers(0, 1), min_size=12, max_size=12),
       st.lists(st.integers(-3, 3), min_size=12, max_size=12), st.integers(0, 6))
def test_grad_step_agrees(x, g, m):
    x = np.array(x, np.uint8)
    g = np.array(g, np.float64)
    arrays = _group_arrays(SPEC, 12)
    outs = [k.greedy_grad_step(x, g, *arrays, m) for k in PATHS]
    for z, applied in outs[1:]:
        assert np.array_equal(z, outs[0][0])
        assert [tuple(map(int, a)) for a in applied] == [tuple(map(int, a)) for a in outs[0][1]]


def test_grad_batch_matches_rowwise_steps(rng):
    X = (rng.random((40, 12)) < 0.4).astype(np.uint8)
    G = rng.standard_normal((40, 12))
    arrays = _group_arrays(SPEC, 12)
    out_j, n_j = JIT.greedy_grad_batch(X, G, *arrays, 3)
    out_r, n_r = REF.greedy_grad_batch(X, G, *arrays, 3)
    assert np.array_equal(out_j, out_r) and np.array_equal(n_j, n_r)
    for i in range(40):
        z, applied = JIT.greedy_grad_step(X[i], G[i], *arrays, 3)
        assert np.array_equal(out_j[i], z) and n_j[i] == len(applied)


@given(st.integers(0, 10**6))
def test_color_kernels_agree(seed):
    rng = np.random.default_rng(seed)
    rgb = rng.random((50, 3))
    rgb[:5] = rgb[:5, :1]  # achromatic rows
    rgb[5:8] = np.round(rgb[5:8])  # primaries and corners
    for k in PATHS[1:]:
        assert np.allclose(k.rgb_to_hsv(rgb), JIT.rgb_to_hsv(rgb), atol=1e-15)
        hsv = JIT.rgb_to_hsv(rgb)
        assert np.allclose(k.hsv_to_rgb(hsv), JIT.hsv_to_rgb(hsv), atol=1e-15)


def _flag_state(value):
    env = dict(os.environ, RELADV_DISABLE_JIT=value)
    code = "from reladv import kernels; print(kernels.USE_NUMBA, kernels.active.reach_mask.__module__)"
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                          check=True).stdout.split()


def test_env_flag_selects_fallback():
    assert _flag_state("1") == ["False", "reladv.kernels._numpy"]
    assert _flag_state("0")[0] == "True"


def test_active_matches_flag():
    expected = REF if kernels.JIT_DISABLED else JIT
    assert kernels.reach_mask is expected.reach_mask

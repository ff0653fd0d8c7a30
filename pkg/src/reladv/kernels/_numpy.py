"""Vectorized numpy/scipy implementations used when JIT is disabled."""
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import _loops


def canonical_labels(labels):
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(order.size, np.int64)
    remap[order] = np.arange(order.size)
    return remap[np.searchsorted(np.unique(labels), labels)]


def _adjacency(indptr, indices):
    n = indptr.shape[0] - 1
    data = np.ones(indices.shape[0], dtype=np.int8)
    return csr_matrix((data, indices, indptr), shape=(n, n))


def reach_mask(indptr, indices, src):
    n = indptr.shape[0] - 1
    order = breadth_first_order(_adjacency(indptr, indices), src, directed=True,
                                return_predecessors=False)
    seen = np.zeros(n, bool)
    seen[order] = True
    return seen


def weak_labels(indptr, indices):
    _, labels = connected_components(_adjacency(indptr, indices), directed=True, connection="weak")
    return canonical_labels(labels)


def strong_labels(indptr, indices):
    _, labels = connected_components(_adjacency(indptr, indices), directed=True, connection="strong")
    return canonical_labels(labels)


def best_labeling(reach_bits, comp, k, gain0, gain1):
    masks = np.arange(1 << k, dtype=np.int64)
    node_bits = np.zeros_like(masks)
    for x, c in enumerate(comp):
        node_bits |= ((masks >> c) & 1) << x
    total = np.zeros(masks.size)
    for x, r in enumerate(reach_bits):
        hit = node_bits & r
        on = (node_bits >> x) & 1
        total += np.where(on == 1, np.where(hit == r, gain1[x], 0.0), np.where(hit == 0, gain0[x], 0.0))
    best = int(np.argmax(total))
    return float(total[best]), best


greedy_grad_step = _loops.greedy_grad_step
greedy_grad_batch = _loops.greedy_grad_batch


def rgb_to_hsv(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    hi = rgb.max(axis=1)
    lo = rgb.min(axis=1)
    c = hi - lo
    safe = np.where(c > 0, c, 1.0)
    h = np.where(
        hi == r, ((g - b) / safe) % 6.0,
        np.where(hi == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    ) / 6.0
    h = np.where(c > 0, h, 0.0)
    h = np.where(h >= 1.0, h - 1.0, h)
    s = np.where(hi > 0, c / np.where(hi > 0, hi, 1.0), 0.0)
    return np.stack([h, s, hi], axis=1)


def hsv_to_rgb(hsv):
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[:, 0], hsv[:, 1], hsv[:, 2]
    h6 = h * 6.0
    i = np.floor(h6)
    f = h6 - i
    i = i.astype(np.int64) % 6
    lo = v * (1.0 - s)
    dn = v * (1.0 - s * f)
    up = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, dn, lo, lo, up, v])
    g = np.choose(i, [up, v, v, dn, lo, lo])
    b = np.choose(i, [lo, lo, up, v, v, dn])
    return np.stack([r, g, b], axis=1)

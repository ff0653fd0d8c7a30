"""Loop kernels written in the numba-compilable subset of Python.

These run either compiled (``numba.njit``) or, for kernels without a
vectorized counterpart, as plain Python. Graphs are CSR arrays
(``indptr``, ``indices``) over nodes ``0..n-1``.
"""
import numpy as np


def canonical_labels(labels):
    """Renumber component labels by order of first appearance."""
    n = labels.shape[0]
    remap = np.full(n + 1, -1, np.int64)
    out = np.empty(n, np.int64)
    nxt = 0
    for v in range(n):
        c = labels[v]
        if remap[c] == -1:
            remap[c] = nxt
            nxt += 1
        out[v] = remap[c]
    return out


def reach_mask(indptr, indices, src):
    n = indptr.shape[0] - 1
    seen = np.zeros(n, np.bool_)
    queue = np.empty(n, np.int64)
    seen[src] = True
    queue[0] = src
    head = 0
    tail = 1
    while head < tail:
        v = queue[head]
        head += 1
        for e in range(indptr[v], indptr[v + 1]):
            w = indices[e]
            if not seen[w]:
                seen[w] = True
                queue[tail] = w
                tail += 1
    return seen


def _find(parent, v):
    root = v
    while parent[root] != root:
        root = parent[root]
    while parent[v] != root:
        nxt = parent[v]
        parent[v] = root
        v = nxt
    return root


def weak_labels(indptr, indices):
    n = indptr.shape[0] - 1
    parent = np.arange(n)
    for v in range(n):
        for e in range(indptr[v], indptr[v + 1]):
            a = _find(parent, v)
            b = _find(parent, indices[e])
            if a != b:
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    labels = np.empty(n, np.int64)
    for v in range(n):
        labels[v] = _find(parent, v)
    return canonical_labels(labels)


def strong_labels(indptr, indices):
    # iterative Tarjan
    n = indptr.shape[0] - 1
    index = np.full(n, -1, np.int64)
    low = np.zeros(n, np.int64)
    onstack = np.zeros(n, np.bool_)
    stack = np.empty(n, np.int64)
    comp = np.full(n, -1, np.int64)
    call_node = np.empty(n, np.int64)
    call_edge = np.empty(n, np.int64)
    sp = 0
    counter = 0
    ncomp = 0
    for s in range(n):
        if index[s] != -1:
            continue
        depth = 0
        call_node[0] = s
        call_edge[0] = indptr[s]
        index[s] = counter
        low[s] = counter
        counter += 1
        stack[sp] = s
        sp += 1
        onstack[s] = True
        while depth >= 0:
            v = call_node[depth]
            e = call_edge[depth]
            if e < indptr[v + 1]:
                w = indices[e]
                call_edge[depth] = e + 1
                if index[w] == -1:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    onstack[w] = True
                    depth += 1
                    call_node[depth] = w
                    call_edge[depth] = indptr[w]
                elif onstack[w] and index[w] < low[v]:
                    low[v] = index[w]
            else:
                if low[v] == index[v]:
                    while True:
                        sp -= 1
                        w = stack[sp]
                        onstack[w] = False
                        comp[w] = ncomp
                        if w == v:
                            break
                    ncomp += 1
                depth -= 1
                if depth >= 0:
                    u = call_node[depth]
                    if low[v] < low[u]:
                        low[u] = low[v]
    return canonical_labels(comp)


def best_labeling(reach_bits, comp, k, gain0, gain1):
    """Exhaustive search over binary labelings constant on ``k`` blocks.

    ``reach_bits[x]`` is the bitmask of nodes reachable from ``x`` (including
    ``x``); node ``x`` takes label bit ``comp[x]`` of the block labeling.
    ``gainL[x]`` is the mass earned when ``x`` is robust and labelled ``L``.
    Returns the best value and the smallest block mask attaining it.
    """
    n = reach_bits.shape[0]
    best = -1.0
    best_mask = 0
    for mask in range(1 << k):
        node_bits = 0
        for x in range(n):
            if (mask >> comp[x]) & 1:
                node_bits |= 1 << x
        total = 0.0
        for x in range(n):
            r = reach_bits[x]
            hit = node_bits & r
            if (node_bits >> x) & 1:
                if hit == r:
                    total += gain1[x]
            elif hit == 0:
                total += gain0[x]
        if total > best:
            best = total
            best_mask = mask
    return best, best_mask


def _succ_before(x, a_add, a_rem, b_add, b_rem):
    # lexicographic comparison of the successors produced by two moves
    pos = np.empty(4, np.int64)
    npos = 0
    for p in (a_add, a_rem, b_add, b_rem):
        if p >= 0:
            pos[npos] = p
            npos += 1
    pos = np.sort(pos[:npos])
    for t in range(npos):
        p = pos[t]
        va = 1 if p == a_add else (0 if p == a_rem else x[p])
        vb = 1 if p == b_add else (0 if p == b_rem else x[p])
        if va != vb:
            return va < vb
    return False


def greedy_grad_step(x, g, addmask, gid, gptr, gmem, m):
    """One GreedyByGrad iteration for additive + equivalence-group relations.

    Returns the new vector and an ``(applied, 2)`` array of (added, removed)
    coordinates, -1 meaning none.
    """
    d = x.shape[0]
    ngroups = gptr.shape[0] - 1
    count = np.zeros(ngroups, np.int64)
    for j in range(d):
        if gid[j] >= 0 and x[j]:
            count[gid[j]] += 1
    cap = d + 1
    for q in range(ngroups):
        sz = gptr[q + 1] - gptr[q]
        cap += sz * sz + sz
    madd = np.empty(cap, np.int64)
    mrem = np.empty(cap, np.int64)
    score = np.empty(cap, np.float64)
    nm = 0
    for j in range(d):
        if x[j]:
            continue
        if addmask[j] or (gid[j] >= 0 and count[gid[j]] >= 1):
            if g[j] > 0:
                madd[nm] = j
                mrem[nm] = -1
                score[nm] = g[j]
                nm += 1
    for q in range(ngroups):
        if count[q] == 0:
            continue
        for a in range(gptr[q], gptr[q + 1]):
            i = gmem[a]
            if not x[i]:
                continue
            if count[q] >= 2 and -g[i] > 0:
                madd[nm] = -1
                mrem[nm] = i
                score[nm] = -g[i]
                nm += 1
            for b in range(gptr[q], gptr[q + 1]):
                j = gmem[b]
                if x[j]:
                    continue
                c = g[j] - g[i]
                if c > 0:
                    madd[nm] = j
                    mrem[nm] = i
                    score[nm] = c
                    nm += 1
    order = np.arange(nm)
    # insertion sort: score descending, then successor ascending
    for s in range(1, nm):
        cur = order[s]
        t = s - 1
        while t >= 0:
            prev = order[t]
            if score[cur] > score[prev] or (
                score[cur] == score[prev]
                and _succ_before(x, madd[cur], mrem[cur], madd[prev], mrem[prev])
            ):
                order[t + 1] = prev
                t -= 1
            else:
                break
        order[t + 1] = cur
    out = x.copy()
    touched = np.zeros(d, np.bool_)
    applied = np.empty((min(m, nm), 2), np.int64)
    na = 0
    for s in range(nm):
        if na >= m:
            break
        mv = order[s]
        j = madd[mv]
        i = mrem[mv]
        if (j >= 0 and touched[j]) or (i >= 0 and touched[i]):
            continue
        if i < 0:
            if out[j] or not (addmask[j] or (gid[j] >= 0 and count[gid[j]] >= 1)):
                continue
        elif j < 0:
            if not out[i] or count[gid[i]] < 2:
                continue
        elif not out[i] or out[j]:
            continue
        if j >= 0:
            out[j] = 1
            touched[j] = True
            if gid[j] >= 0:
                count[gid[j]] += 1
        if i >= 0:
            out[i] = 0
            touched[i] = True
            count[gid[i]] -= 1
        applied[na, 0] = j
        applied[na, 1] = i
        na += 1
    return out, applied[:na]


def greedy_grad_batch(X, G, addmask, gid, gptr, gmem, m):
    out = np.empty_like(X)
    nmoves = np.zeros(X.shape[0], np.int64)
    for r in range(X.shape[0]):
        z, applied = greedy_grad_step(X[r], G[r], addmask, gid, gptr, gmem, m)
        out[r] = z
        nmoves[r] = applied.shape[0]
    return out, nmoves


def rgb_to_hsv(rgb):
    n = rgb.shape[0]
    out = np.empty((n, 3), np.float64)
    for p in range(n):
        r = rgb[p, 0]
        g = rgb[p, 1]
        b = rgb[p, 2]
        hi = max(r, g, b)
        lo = min(r, g, b)
        c = hi - lo
        h = 0.0
        if c > 0.0:
            if hi == r:
                h = ((g - b) / c) % 6.0
            elif hi == g:
                h = (b - r) / c + 2.0
            else:
                h = (r - g) / c + 4.0
            h /= 6.0
            if h >= 1.0:
                h -= 1.0
        out[p, 0] = h
        out[p, 1] = c / hi if hi > 0.0 else 0.0
        out[p, 2] = hi
    return out


def hsv_to_rgb(hsv):
    n = hsv.shape[0]
    out = np.empty((n, 3), np.float64)
    for p in range(n):
        h = hsv[p, 0]
        s = hsv[p, 1]
        v = hsv[p, 2]
        h6 = h * 6.0
        i = int(np.floor(h6))
        f = h6 - i
        i = i % 6
        lo = v * (1.0 - s)
        dn = v * (1.0 - s * f)
        up = v * (1.0 - s * (1.0 - f))
        if i == 0:
            r, g, b = v, up, lo
        elif i == 1:
            r, g, b = dn, v, lo
        elif i == 2:
            r, g, b = lo, v, up
        elif i == 3:
            r, g, b = lo, dn, v
        elif i == 4:
            r, g, b = up, lo, v
        else:
            r, g, b = v, lo, dn
        out[p, 0] = r
        out[p, 1] = g
        out[p, 2] = b
    return out

"""Compiled HNSW primitives.

Graph layout (all arrays owned by :class:`acm.ann.hnsw.HnswIndex`):

* ``data[n, dim]``        float32 unit vectors
* ``levels[n]``           top layer of each node
* ``links0[n, m0 + 1]``   layer-0 adjacency, column 0 holds the list length
* ``upper_row[n]``        first row in ``upper`` for layer 1 of node n, -1 if none
* ``upper[r, m + 1]``     adjacency for layers >= 1; node n, layer L lives at row
                          ``upper_row[n] + L - 1``

Every ordering is on the pair (distance, id), so equal distances resolve to
the lower insertion id.
"""

from __future__ import annotations

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic

_JIT = dict(cache=True, nogil=True)

# floats per 64-byte cache line
_LINE = 16


@intrinsic
def _prefetch(typingctx, arr, row, col):
    """Hint the CPU to pull ``arr[row, col]`` into cache (read, high locality)."""
    sig = types.void(arr, row, col)

    def codegen(context, builder, signature, args):
        aryty = signature.args[0]
        ary = context.make_array(aryty)(context, builder, args[0])
        inds = [context.cast(builder, args[i], signature.args[i], types.intp) for i in (1, 2)]
        ptr = cgutils.get_item_pointer2(
            context, builder, data=ary.data, shape=cgutils.unpack_tuple(builder, ary.shape),
            strides=cgutils.unpack_tuple(builder, ary.strides), layout=aryty.layout, inds=inds)
        i8p = ir.IntType(8).as_pointer()
        i32 = ir.IntType(32)
        fnty = ir.FunctionType(ir.VoidType(), [i8p, i32, i32, i32])
        fn = cgutils.get_or_insert_function(builder.module, fnty, "llvm.prefetch.p0i8")
        builder.call(fn, [builder.bitcast(ptr, i8p), i32(0), i32(3), i32(1)])
        return context.get_dummy_value()

    return sig, codegen


@njit(**_JIT)
def vec_dist(a, b):
    """Half squared Euclidean distance; equals cosine distance on unit vectors."""
    n = a.shape[0]
    s0 = np.float32(0.0)
    s1 = np.float32(0.0)
    s2 = np.float32(0.0)
    s3 = np.float32(0.0)
    i = 0
    while i + 4 <= n:
        d0 = a[i] - b[i]
        d1 = a[i + 1] - b[i + 1]
        d2 = a[i + 2] - b[i + 2]
        d3 = a[i + 3] - b[i + 3]
        s0 += d0 * d0
        s1 += d1 * d1
        s2 += d2 * d2
        s3 += d3 * d3
        i += 4
    while i < n:
        d0 = a[i] - b[i]
        s0 += d0 * d0
        i += 1
    return np.float32(0.5) * ((s0 + s1) + (s2 + s3))


@njit(**_JIT)
def _lt(d1, i1, d2, i2):
    return d1 < d2 or (d1 == d2 and i1 < i2)


# -- binary heaps over parallel (dist, id) arrays -----------------------------


@njit(**_JIT)
def _min_push(hd, hi, size, d, idx):
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        if _lt(d, idx, hd[parent], hi[parent]):
            hd[pos] = hd[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    hd[pos] = d
    hi[pos] = idx
    return size + 1


@njit(**_JIT)
def _min_pop(hd, hi, size):
    """Remove the root; caller reads hd[0], hi[0] beforehand."""
    size -= 1
    d = hd[size]
    idx = hi[size]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _lt(hd[child + 1], hi[child + 1], hd[child], hi[child]):
            child += 1
        if _lt(hd[child], hi[child], d, idx):
            hd[pos] = hd[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    if size > 0:
        hd[pos] = d
        hi[pos] = idx
    return size


@njit(**_JIT)
def _max_push(hd, hi, size, d, idx):
    pos = size
    while pos > 0:
        parent = (pos - 1) >> 1
        if _lt(hd[parent], hi[parent], d, idx):
            hd[pos] = hd[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    hd[pos] = d
    hi[pos] = idx
    return size + 1


@njit(**_JIT)
def _max_pop(hd, hi, size):
    size -= 1
    d = hd[size]
    idx = hi[size]
    pos = 0
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _lt(hd[child], hi[child], hd[child + 1], hi[child + 1]):
            child += 1
        if _lt(d, idx, hd[child], hi[child]):
            hd[pos] = hd[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    if size > 0:
        hd[pos] = d
        hi[pos] = idx
    return size


# -- adjacency access ----------------------------------------------------------


@njit(**_JIT)
def _neighbors(links0, upper_row, upper, node, layer):
    if layer == 0:
        row = links0[node]
    else:
        row = upper[upper_row[node] + layer - 1]
    return row[1:row[0] + 1]


@njit(**_JIT)
def _set_neighbors(links0, upper_row, upper, node, layer, ids, count):
    if layer == 0:
        row = links0[node]
    else:
        row = upper[upper_row[node] + layer - 1]
    row[0] = count
    for j in range(count):
        row[j + 1] = ids[j]


@njit(**_JIT)
def _next_tag(visited, vstate):
    vstate[0] += 1
    if vstate[0] >= 2147483647:
        visited[:] = 0
        vstate[0] = 1
    return np.int32(vstate[0])


# -- search --------------------------------------------------------------------


@njit(**_JIT)
def greedy_closest(data, links0, upper_row, upper, q, ep, ep_d, layer):
    """ef=1 descent on one layer; returns the local minimum reached from ``ep``."""
    cur = ep
    cur_d = ep_d
    changed = True
    while changed:
        changed = False
        nbrs = _neighbors(links0, upper_row, upper, cur, layer)
        for j in range(nbrs.shape[0]):
            c = nbrs[j]
            d = vec_dist(data[c], q)
            if _lt(d, c, cur_d, cur):
                cur = c
                cur_d = d
                changed = True
    return cur, cur_d


@njit(**_JIT)
def search_layer(data, links0, upper_row, upper, q, ep, ep_d, layer, ef, visited, vstate):
    """Beam search on one layer. Returns (dists, ids) sorted ascending, len <= ef."""
    tag = _next_tag(visited, vstate)
    cap = 64 if ef < 64 else ef * 2
    cd = np.empty(cap, np.float32)
    ci = np.empty(cap, np.int64)
    rd = np.empty(ef + 1, np.float32)
    ri = np.empty(ef + 1, np.int64)
    csize = _min_push(cd, ci, 0, ep_d, ep)
    rsize = _max_push(rd, ri, 0, ep_d, ep)
    visited[ep] = tag
    while csize > 0:
        c_d = cd[0]
        c_i = ci[0]
        if rsize >= ef and _lt(rd[0], ri[0], c_d, c_i):
            break
        csize = _min_pop(cd, ci, csize)
        nbrs = _neighbors(links0, upper_row, upper, c_i, layer)
        # issue all row loads first so the misses overlap with the distance loop
        for j in range(nbrs.shape[0]):
            e = nbrs[j]
            if visited[e] != tag:
                for col in range(0, data.shape[1], _LINE):
                    _prefetch(data, e, col)
        for j in range(nbrs.shape[0]):
            e = nbrs[j]
            if visited[e] == tag:
                continue
            visited[e] = tag
            d = vec_dist(data[e], q)
            if rsize < ef or _lt(d, e, rd[0], ri[0]):
                if csize == cd.shape[0]:
                    nd = np.empty(cap * 2, np.float32)
                    ni = np.empty(cap * 2, np.int64)
                    nd[:cap] = cd
                    ni[:cap] = ci
                    cd = nd
                    ci = ni
                    cap *= 2
                csize = _min_push(cd, ci, csize, d, e)
                rsize = _max_push(rd, ri, rsize, d, e)
                if rsize > ef:
                    rsize = _max_pop(rd, ri, rsize)
    out_d = np.empty(rsize, np.float32)
    out_i = np.empty(rsize, np.int64)
    for j in range(rsize - 1, -1, -1):
        out_d[j] = rd[0]
        out_i[j] = ri[0]
        rsize = _max_pop(rd, ri, rsize)
    return out_d, out_i


@njit(**_JIT)
def knn_query(data, links0, upper_row, upper, entry, max_level, q, k, ef, visited, vstate):
    ep = entry
    ep_d = vec_dist(data[ep], q)
    for layer in range(max_level, 0, -1):
        ep, ep_d = greedy_closest(data, links0, upper_row, upper, q, ep, ep_d, layer)
    width = ef if ef > k else k
    dists, ids = search_layer(data, links0, upper_row, upper, q, ep, ep_d, 0, width, visited, vstate)
    n = k if k < ids.shape[0] else ids.shape[0]
    return dists[:n].copy(), ids[:n].copy()


# -- construction --------------------------------------------------------------


@njit(**_JIT)
def select_heuristic(data, base, cand_d, cand_i, m, out):
    """Keep a candidate unless some kept neighbour is strictly closer to it
    than ``base`` is.  Ties keep the candidate, so exact duplicates stay linked.

    ``cand_*`` must be sorted ascending by distance to ``base``. Writes kept
    ids to ``out`` and returns how many were kept.
    """
    kept = 0
    for j in range(cand_i.shape[0]):
        if kept >= m:
            break
        c = cand_i[j]
        dc = cand_d[j]
        good = True
        vc = data[c]
        for r in range(kept):
            if vec_dist(vc, data[out[r]]) < dc:
                good = False
                break
        if good:
            out[kept] = c
            kept += 1
    return kept


@njit(**_JIT)
def _sort_pairs(d, i):
    # insertion sort: lists are at most m0 + 1 long and mostly sorted
    for a in range(1, d.shape[0]):
        kd = d[a]
        ki = i[a]
        b = a - 1
        while b >= 0 and _lt(kd, ki, d[b], i[b]):
            d[b + 1] = d[b]
            i[b + 1] = i[b]
            b -= 1
        d[b + 1] = kd
        i[b + 1] = ki


@njit(**_JIT)
def _link_back(data, links0, upper_row, upper, e, q, layer, max_deg, heuristic, scratch):
    nbrs = _neighbors(links0, upper_row, upper, e, layer)
    n = nbrs.shape[0]
    if n < max_deg:
        if layer == 0:
            row = links0[e]
        else:
            row = upper[upper_row[e] + layer - 1]
        row[n + 1] = q
        row[0] = n + 1
        return
    cd = np.empty(n + 1, np.float32)
    ci = np.empty(n + 1, np.int64)
    ve = data[e]
    for j in range(n):
        ci[j] = nbrs[j]
        cd[j] = vec_dist(data[nbrs[j]], ve)
    ci[n] = q
    cd[n] = vec_dist(data[q], ve)
    _sort_pairs(cd, ci)
    if heuristic:
        kept = select_heuristic(data, ve, cd, ci, max_deg, scratch)
    else:
        kept = max_deg
        for j in range(kept):
            scratch[j] = ci[j]
    _set_neighbors(links0, upper_row, upper, e, layer, scratch, kept)


@njit(**_JIT)
def insert_node(data, levels, links0, upper_row, upper, q, entry, max_level,
                m, m0, ef_construction, heuristic, visited, vstate):
    """Wire node ``q`` (vector and level already stored) into the graph.

    Returns the new (entry, max_level).
    """
    level = levels[q]
    if q == 0:
        return q, level
    vq = data[q]
    ep = entry
    ep_d = vec_dist(data[ep], vq)
    for layer in range(max_level, level, -1):
        ep, ep_d = greedy_closest(data, links0, upper_row, upper, vq, ep, ep_d, layer)
    scratch = np.empty(m0 + 1, np.int64)
    top = level if level < max_level else max_level
    for layer in range(top, -1, -1):
        w_d, w_i = search_layer(data, links0, upper_row, upper, vq, ep, ep_d, layer,
                                ef_construction, visited, vstate)
        if heuristic:
            kept = select_heuristic(data, vq, w_d, w_i, m, scratch)
        else:
            kept = m if m < w_i.shape[0] else w_i.shape[0]
            for j in range(kept):
                scratch[j] = w_i[j]
        chosen = scratch[:kept].copy()
        _set_neighbors(links0, upper_row, upper, q, layer, chosen, kept)
        max_deg = m0 if layer == 0 else m
        for j in range(kept):
            _link_back(data, links0, upper_row, upper, chosen[j], q, layer, max_deg,
                       heuristic, scratch)
        ep = w_i[0]
        ep_d = w_d[0]
    if level > max_level:
        return q, level
    return entry, max_level


@njit(**_JIT)
def all_dists(data, n, q, out):
    for j in range(n):
        out[j] = vec_dist(data[j], q)

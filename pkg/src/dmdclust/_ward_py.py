"""Pure-Python connectivity-constrained Ward agglomeration.

Reference implementation of the compiled kernel in ``_ward.pyx``.  Both use
the same arithmetic in the same order so their merge sequences agree bit for
bit, including tie-breaks.
"""
import heapq

import numpy as np


def _cost(ma, mb, sa, sb):
    acc = 0.0
    for x, y in zip(ma, mb):
        diff = x - y
        acc += diff * diff
    return (sa * sb / (sa + sb)) * acc


def ward_merge(points, edges):
    """Greedy constrained Ward merges.

    Parameters
    ----------
    points : (N, D) float64 array
    edges : (E, 2) int64 array of undirected pairs, no self-loops

    Returns
    -------
    children : (M, 2) int64, merged cluster ids (leaves 0..N-1, merge s makes N+s)
    costs : (M,) float64 Ward cost of each merge
    sizes : (M,) int64 size of each new cluster
    """
    points = np.asarray(points, dtype=np.float64)
    n_leaves = points.shape[0]
    total = 2 * n_leaves - 1
    means = [row for row in points.tolist()] + [None] * (n_leaves - 1)
    sizes = [1.0] * n_leaves + [0.0] * (n_leaves - 1)
    first = list(range(n_leaves)) + [0] * (n_leaves - 1)
    active = [True] * n_leaves + [False] * (n_leaves - 1)
    nbrs = [set() for _ in range(total)]

    heap = []
    for a, b in np.asarray(edges, dtype=np.int64).tolist():
        if b in nbrs[a]:
            continue
        nbrs[a].add(b)
        nbrs[b].add(a)
        lo, hi = (a, b) if a < b else (b, a)
        heap.append((_cost(means[a], means[b], 1.0, 1.0), lo, hi, a, b))
    heapq.heapify(heap)

    children, costs, new_sizes = [], [], []
    new = n_leaves
    while heap:
        cost, _, _, a, b = heapq.heappop(heap)
        if not (active[a] and active[b]):
            continue
        sa, sb = sizes[a], sizes[b]
        ssum = sa + sb
        means[new] = [(sa * x + sb * y) / ssum for x, y in zip(means[a], means[b])]
        sizes[new] = ssum
        first[new] = first[a] if first[a] < first[b] else first[b]
        active[a] = active[b] = False
        active[new] = True
        merged = (nbrs[a] | nbrs[b]) - {a, b}
        nbrs[a] = nbrs[b] = None
        nbrs[new] = merged
        for c in merged:
            nb = nbrs[c]
            nb.discard(a)
            nb.discard(b)
            nb.add(new)
            fc = first[c]
            fn = first[new]
            lo, hi = (fc, fn) if fc < fn else (fn, fc)
            heapq.heappush(heap, (_cost(means[new], means[c], ssum, sizes[c]), lo, hi, new, c))
        children.append((a, b) if a < b else (b, a))
        costs.append(cost)
        new_sizes.append(int(ssum))
        new += 1

    return (np.array(children, dtype=np.int64).reshape(-1, 2),
            np.array(costs, dtype=np.float64),
            np.array(new_sizes, dtype=np.int64))

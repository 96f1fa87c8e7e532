# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled connectivity-constrained Ward agglomeration.

Mirror of ``_ward_py.ward_merge``: same heap key (cost, first member pair),
same floating point expression order.
"""
import numpy as np

from libcpp.vector cimport vector
from libcpp.unordered_set cimport unordered_set


cdef struct Entry:
    double cost
    Py_ssize_t lo
    Py_ssize_t hi
    Py_ssize_t a
    Py_ssize_t b


cdef inline bint _less(const Entry& x, const Entry& y) noexcept nogil:
    if x.cost != y.cost:
        return x.cost < y.cost
    if x.lo != y.lo:
        return x.lo < y.lo
    if x.hi != y.hi:
        return x.hi < y.hi
    if x.a != y.a:
        return x.a < y.a
    return x.b < y.b


cdef void _push(vector[Entry]& heap, Entry e) noexcept nogil:
    heap.push_back(e)
    cdef Py_ssize_t i = heap.size() - 1
    cdef Py_ssize_t parent
    while i > 0:
        parent = (i - 1) >> 1
        if _less(heap[i], heap[parent]):
            heap[i], heap[parent] = heap[parent], heap[i]
            i = parent
        else:
            break


cdef Entry _pop(vector[Entry]& heap) noexcept nogil:
    cdef Entry top = heap[0]
    cdef Py_ssize_t n = heap.size() - 1
    heap[0] = heap[n]
    heap.pop_back()
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t left, right, best
    while True:
        left = 2 * i + 1
        right = left + 1
        best = i
        if left < n and _less(heap[left], heap[best]):
            best = left
        if right < n and _less(heap[right], heap[best]):
            best = right
        if best == i:
            break
        heap[i], heap[best] = heap[best], heap[i]
        i = best
    return top


cdef inline double _cost(double[:, ::1] means, Py_ssize_t a, Py_ssize_t b,
                         double sa, double sb) noexcept nogil:
    cdef double acc = 0.0
    cdef double diff
    cdef Py_ssize_t k
    for k in range(means.shape[1]):
        diff = means[a, k] - means[b, k]
        acc += diff * diff
    return (sa * sb / (sa + sb)) * acc


def ward_merge(points, edges):
    """See ``_ward_py.ward_merge``."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    edg = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 2)
    cdef Py_ssize_t n_leaves = pts.shape[0]
    cdef Py_ssize_t dim = pts.shape[1]
    cdef Py_ssize_t total = 2 * n_leaves - 1 if n_leaves > 0 else 0

    means_arr = np.zeros((max(total, 1), dim), dtype=np.float64)
    means_arr[:n_leaves] = pts
    cdef double[:, ::1] means = means_arr
    sizes_arr = np.zeros(max(total, 1), dtype=np.float64)
    sizes_arr[:n_leaves] = 1.0
    cdef double[::1] sizes = sizes_arr
    first_arr = np.zeros(max(total, 1), dtype=np.int64)
    first_arr[:n_leaves] = np.arange(n_leaves)
    cdef long long[::1] first = first_arr
    active_arr = np.zeros(max(total, 1), dtype=np.uint8)
    active_arr[:n_leaves] = 1
    cdef unsigned char[::1] active = active_arr
    cdef long long[:, ::1] e = edg

    n_out = max(n_leaves - 1, 0)
    children_arr = np.zeros((n_out, 2), dtype=np.int64)
    costs_arr = np.zeros(n_out, dtype=np.float64)
    new_sizes_arr = np.zeros(n_out, dtype=np.int64)
    cdef long long[:, ::1] children = children_arr
    cdef double[::1] costs = costs_arr
    cdef long long[::1] new_sizes = new_sizes_arr

    cdef vector[unordered_set[Py_ssize_t]] nbrs
    cdef vector[Entry] heap
    cdef Entry ent
    cdef Py_ssize_t i, a, b, c, new, step = 0
    cdef double sa, sb, ssum, popped_cost
    cdef unordered_set[Py_ssize_t] merged

    with nogil:
        nbrs.resize(total)
        for i in range(e.shape[0]):
            a = e[i, 0]
            b = e[i, 1]
            if nbrs[a].count(b):
                continue
            nbrs[a].insert(b)
            nbrs[b].insert(a)
            ent.cost = _cost(means, a, b, 1.0, 1.0)
            ent.lo = a if a < b else b
            ent.hi = b if a < b else a
            ent.a = a
            ent.b = b
            _push(heap, ent)

        new = n_leaves
        while heap.size() > 0:
            ent = _pop(heap)
            popped_cost = ent.cost
            a = ent.a
            b = ent.b
            if not (active[a] and active[b]):
                continue
            sa = sizes[a]
            sb = sizes[b]
            ssum = sa + sb
            for i in range(dim):
                means[new, i] = (sa * means[a, i] + sb * means[b, i]) / ssum
            sizes[new] = ssum
            first[new] = first[a] if first[a] < first[b] else first[b]
            active[a] = 0
            active[b] = 0
            active[new] = 1

            merged.clear()
            for c in nbrs[a]:
                if c != b:
                    merged.insert(c)
            for c in nbrs[b]:
                if c != a:
                    merged.insert(c)
            nbrs[a].clear()
            nbrs[b].clear()
            nbrs[new] = merged
            for c in merged:
                nbrs[c].erase(a)
                nbrs[c].erase(b)
                nbrs[c].insert(new)
                ent.cost = _cost(means, new, c, ssum, sizes[c])
                if first[c] < first[new]:
                    ent.lo = first[c]
                    ent.hi = first[new]
                else:
                    ent.lo = first[new]
                    ent.hi = first[c]
                ent.a = new
                ent.b = c
                _push(heap, ent)

            children[step, 0] = a if a < b else b
            children[step, 1] = b if a < b else a
            costs[step] = popped_cost
            new_sizes[step] = <long long> ssum
            step += 1
            new += 1

    return children_arr[:step], costs_arr[:step], new_sizes_arr[:step]

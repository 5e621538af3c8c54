# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled maximum-clique kernel on packed uint64 bitsets.

Mirror of _bnb_py.run_search: branch-and-bound with a greedy-coloring
bound, pruning only subtrees that cannot tie the incumbent, and an
incumbent rule preferring lexicographically smaller vertex sets among
equal sizes.  Must stay result-identical with the pure-Python twin.
"""

import time

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy, memset

ctypedef unsigned long long u64

cdef extern from *:
    """
    static inline int popcount_u64(unsigned long long x) {
        return __builtin_popcountll(x);
    }
    static inline int ctz_u64(unsigned long long x) {
        return __builtin_ctzll(x);
    }
    """
    int popcount_u64(u64 x) nogil
    int ctz_u64(u64 x) nogil


cdef struct SearchState:
    int n
    int nw
    u64 *adj          # n * nw words
    u64 *scratch      # (n + 2) levels * nw words for candidate sets
    u64 *color_tmp    # 2 * nw words
    int *order        # coloring order buffer, n ints per level
    int *colors
    int *stack        # current clique (kernel ids)
    int stack_size
    long long *orig   # kernel id -> original id
    int best_size
    long long *best   # sorted original ids
    long long *offer_buf
    long long nodes
    double deadline
    bint expired


cdef void offer(SearchState *st) nogil:
    """Record the current stack if it beats the incumbent (size first,
    then lexicographically smaller original ids)."""
    cdef int size = st.stack_size
    cdef int i, j
    cdef long long v
    if size < st.best_size:
        return
    # insertion-sort the original ids of the stack
    for i in range(size):
        st.offer_buf[i] = st.orig[st.stack[i]]
    for i in range(1, size):
        v = st.offer_buf[i]
        j = i - 1
        while j >= 0 and st.offer_buf[j] > v:
            st.offer_buf[j + 1] = st.offer_buf[j]
            j -= 1
        st.offer_buf[j + 1] = v
    if size == st.best_size:
        for i in range(size):
            if st.offer_buf[i] < st.best[i]:
                break
            if st.offer_buf[i] > st.best[i]:
                return
        else:
            return
    st.best_size = size
    memcpy(st.best, st.offer_buf, size * sizeof(long long))


cdef int color_sort(SearchState *st, u64 *P, int level) nogil:
    """Greedy coloring of P; fills order/colors (ascending color).

    Returns the number of vertices in P.  Scan positions only advance
    because bits are only ever cleared.
    """
    cdef int nw = st.nw
    cdef u64 *uncolored = st.color_tmp
    cdef u64 *q = st.color_tmp + nw
    cdef int *order = st.order + level * st.n
    cdef int *colors = st.colors + level * st.n
    cdef int count = 0, color = 0
    cdef int w, v, u_start = 0, q_start
    cdef u64 *row
    memcpy(uncolored, P, nw * sizeof(u64))
    while True:
        while u_start < nw and uncolored[u_start] == 0:
            u_start += 1
        if u_start == nw:
            break
        color += 1
        memcpy(q, uncolored, nw * sizeof(u64))
        q_start = u_start
        while True:
            while q_start < nw and q[q_start] == 0:
                q_start += 1
            if q_start == nw:
                break
            v = q_start * 64 + ctz_u64(q[q_start])
            order[count] = v
            colors[count] = color
            count += 1
            uncolored[v >> 6] &= ~((<u64>1) << (v & 63))
            q[v >> 6] &= ~((<u64>1) << (v & 63))
            row = st.adj + v * nw
            for w in range(q_start, nw):
                q[w] &= ~row[w]
    return count


cdef void expand(SearchState *st, u64 *P, int level):
    cdef int nw = st.nw
    cdef int count, idx, v, w, avail
    cdef u64 *new_p
    cdef u64 *row
    cdef u64 word
    st.nodes += 1
    if st.nodes % 4096 == 0:
        if time.monotonic() > st.deadline:
            st.expired = True
    if st.expired:
        return
    count = color_sort(st, P, level)
    cdef int *order = st.order + level * st.n
    cdef int *colors = st.colors + level * st.n
    for idx in range(count - 1, -1, -1):
        if st.stack_size + colors[idx] < st.best_size:
            return
        v = order[idx]
        st.stack[st.stack_size] = v
        st.stack_size += 1
        new_p = st.scratch + (level + 1) * nw
        row = st.adj + v * nw
        avail = 0
        for w in range(nw):
            word = P[w] & row[w]
            new_p[w] = word
            avail += popcount_u64(word)
        if avail == 0:
            offer(st)
        elif st.stack_size + avail >= st.best_size:
            expand(st, new_p, level + 1)
            if st.expired:
                st.stack_size -= 1
                return
        st.stack_size -= 1
        P[v >> 6] &= ~((<u64>1) << (v & 63))


def run_search(cnp.ndarray[cnp.uint64_t, ndim=2] adj_words,
               cnp.ndarray[cnp.int64_t, ndim=1] orig_ids,
               cnp.ndarray[cnp.int64_t, ndim=1] seed,
               double deadline):
    """Search the whole graph; returns (clique original ids, completed)."""
    cdef int n = adj_words.shape[0]
    cdef int nw = adj_words.shape[1]
    if n == 0:
        return [], True

    cdef cnp.ndarray[cnp.uint64_t, ndim=2] adj_c = np.ascontiguousarray(adj_words)
    cdef SearchState st
    st.n = n
    st.nw = nw
    st.adj = <u64 *> adj_c.data
    st.scratch = <u64 *> malloc((n + 2) * nw * sizeof(u64))
    st.color_tmp = <u64 *> malloc(2 * nw * sizeof(u64))
    st.order = <int *> malloc((n + 1) * n * sizeof(int))
    st.colors = <int *> malloc((n + 1) * n * sizeof(int))
    st.stack = <int *> malloc(n * sizeof(int))
    st.best = <long long *> malloc(n * sizeof(long long))
    st.offer_buf = <long long *> malloc(n * sizeof(long long))
    st.orig = <long long *> malloc(n * sizeof(long long))
    if (st.scratch == NULL or st.color_tmp == NULL or st.order == NULL
            or st.colors == NULL or st.stack == NULL or st.best == NULL
            or st.offer_buf == NULL or st.orig == NULL):
        free(st.scratch); free(st.color_tmp); free(st.order); free(st.colors)
        free(st.stack); free(st.best); free(st.offer_buf); free(st.orig)
        raise MemoryError
    cdef int i
    for i in range(n):
        st.orig[i] = orig_ids[i]
    st.stack_size = 0
    st.nodes = 0
    st.deadline = deadline
    st.expired = False

    seed_ids = sorted([int(orig_ids[seed[i]]) for i in range(seed.shape[0])])
    st.best_size = len(seed_ids)
    for i in range(st.best_size):
        st.best[i] = seed_ids[i]

    cdef u64 *root = st.scratch
    memset(root, 0, nw * sizeof(u64))
    for i in range(n):
        root[i >> 6] |= (<u64>1) << (i & 63)

    try:
        expand(&st, root, 0)
        result = [int(st.best[i]) for i in range(st.best_size)]
        completed = not st.expired
    finally:
        free(st.scratch); free(st.color_tmp); free(st.order); free(st.colors)
        free(st.stack); free(st.best); free(st.offer_buf); free(st.orig)
    return result, completed

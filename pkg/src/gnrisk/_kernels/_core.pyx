# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: Brandes accumulation, all-source BFS and the exact
greedy split scan.  ``_fallback.py`` mirrors each function operation for
operation."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport INFINITY

cnp.import_array()


def brandes(indptr, indices, edge_ids, Py_ssize_t n_edges):
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const long long[::1] eid = np.ascontiguousarray(edge_ids, dtype=np.int64)
    cdef Py_ssize_t n = ip.shape[0] - 1
    node_out = np.zeros(n, dtype=np.float64)
    edge_out = np.zeros(n_edges, dtype=np.float64)
    cdef double[::1] node_bc = node_out
    cdef double[::1] edge_bc = edge_out
    if n <= 0:
        return node_out, edge_out
    cdef long long *dist = <long long *> malloc(n * sizeof(long long))
    cdef long long *queue = <long long *> malloc(n * sizeof(long long))
    cdef double *sigma = <double *> malloc(n * sizeof(double))
    cdef double *delta = <double *> malloc(n * sizeof(double))
    cdef Py_ssize_t s, i, head, tail, k, v, w
    cdef long long dv, dw
    cdef double coeff, c
    try:
        with nogil:
            for s in range(n):
                for i in range(n):
                    dist[i] = -1
                    sigma[i] = 0.0
                    delta[i] = 0.0
                sigma[s] = 1.0
                dist[s] = 0
                head = 0
                tail = 0
                queue[tail] = s
                tail += 1
                # queue[0:tail] doubles as the BFS visitation stack
                while head < tail:
                    v = queue[head]
                    head += 1
                    dv = dist[v]
                    for k in range(ip[v], ip[v + 1]):
                        w = ix[k]
                        if dist[w] < 0:
                            dist[w] = dv + 1
                            queue[tail] = w
                            tail += 1
                        if dist[w] == dv + 1:
                            sigma[w] += sigma[v]
                while tail > 0:
                    tail -= 1
                    w = queue[tail]
                    dw = dist[w]
                    coeff = (1.0 + delta[w]) / sigma[w]
                    for k in range(ip[w], ip[w + 1]):
                        v = ix[k]
                        if dist[v] == dw - 1:
                            c = sigma[v] * coeff
                            edge_bc[eid[k]] += c
                            delta[v] += c
                    if w != s:
                        node_bc[w] += delta[w]
    finally:
        free(dist)
        free(queue)
        free(sigma)
        free(delta)
    return node_out * 0.5, edge_out * 0.5


def bfs_stats(indptr, indices):
    cdef const long long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t n = ip.shape[0] - 1
    sums_out = np.zeros(max(n, 0), dtype=np.int64)
    ecc_out = np.zeros(max(n, 0), dtype=np.int64)
    cdef long long[::1] sums = sums_out
    cdef long long[::1] ecc = ecc_out
    if n <= 0:
        return sums_out, ecc_out
    cdef long long *dist = <long long *> malloc(n * sizeof(long long))
    cdef long long *queue = <long long *> malloc(n * sizeof(long long))
    cdef Py_ssize_t s, i, head, tail, k, v, w
    cdef long long dv, total, far
    try:
        with nogil:
            for s in range(n):
                for i in range(n):
                    dist[i] = -1
                dist[s] = 0
                head = 0
                tail = 0
                queue[tail] = s
                tail += 1
                total = 0
                far = 0
                while head < tail:
                    v = queue[head]
                    head += 1
                    dv = dist[v]
                    total += dv
                    if dv > far:
                        far = dv
                    for k in range(ip[v], ip[v + 1]):
                        w = ix[k]
                        if dist[w] < 0:
                            dist[w] = dv + 1
                            queue[tail] = w
                            tail += 1
                sums[s] = total
                ecc[s] = far
    finally:
        free(dist)
        free(queue)
    return sums_out, ecc_out


def best_split(X, order, in_node, g, h, double G, double H, double lam, double gamma,
               double min_child_hessian):
    cdef const double[:, :] x = np.asarray(X, dtype=np.float64)
    cdef const long long[:, ::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef const unsigned char[::1] mem = np.ascontiguousarray(in_node, dtype=np.uint8)
    cdef const double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n_features = x.shape[1]
    cdef Py_ssize_t n_rows = od.shape[1]
    # gains[f, j] scores the boundary just before the j-th node row of feature f
    cdef double[:, ::1] gains = np.full((n_features, n_rows), -INFINITY)
    cdef double[:, ::1] lower = np.zeros((n_features, n_rows))
    cdef Py_ssize_t f, j, r
    cdef long long best_f = -1
    cdef double best_thr = 0.0, best_gain = 0.0
    cdef double GL, HL, GR, HR, gain, prev_v, cur_v, thr, root_term, eps, top
    cdef bint have_prev, done
    root_term = G * G / (H + lam)
    eps = 1e-12 * (1.0 + root_term)
    top = -INFINITY
    done = False
    with nogil:
        for f in range(n_features):
            GL = 0.0
            HL = 0.0
            have_prev = False
            prev_v = 0.0
            for j in range(n_rows):
                r = od[f, j]
                if not mem[r]:
                    continue
                cur_v = x[r, f]
                if have_prev and prev_v < cur_v:
                    GR = G - GL
                    HR = H - HL
                    if HL >= min_child_hessian and HR >= min_child_hessian:
                        gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - root_term) - gamma
                        gains[f, j] = gain
                        lower[f, j] = prev_v
                        if gain > top:
                            top = gain
                GL += gv[r]
                HL += hv[r]
                prev_v = cur_v
                have_prev = True
        # ties within eps of the best keep the lowest feature, then the lowest threshold
        if top > eps:
            for f in range(n_features):
                if done:
                    break
                for j in range(n_rows):
                    if gains[f, j] >= top - eps:
                        cur_v = x[od[f, j], f]
                        thr = 0.5 * (lower[f, j] + cur_v)
                        if thr <= lower[f, j]:
                            thr = cur_v
                        best_f = f
                        best_thr = thr
                        best_gain = gains[f, j]
                        done = True
                        break
    return int(best_f), float(best_thr), float(best_gain)


def partition_order(order, side):
    """Stable split of each feature's row order into rows with ``side`` set
    (left) and the rest (right)."""
    cdef const long long[:, ::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef const unsigned char[::1] sd = np.ascontiguousarray(side, dtype=np.uint8)
    cdef Py_ssize_t n_features = od.shape[0]
    cdef Py_ssize_t n_rows = od.shape[1]
    cdef Py_ssize_t n_left = 0
    cdef Py_ssize_t f, j, a, b
    cdef long long r
    for j in range(n_rows):
        if sd[od[0, j]]:
            n_left += 1
    left_arr = np.empty((n_features, n_left), dtype=np.int64)
    right_arr = np.empty((n_features, n_rows - n_left), dtype=np.int64)
    cdef long long[:, ::1] lo = left_arr
    cdef long long[:, ::1] ro = right_arr
    with nogil:
        for f in range(n_features):
            a = 0
            b = 0
            for j in range(n_rows):
                r = od[f, j]
                if sd[r]:
                    lo[f, a] = r
                    a += 1
                else:
                    ro[f, b] = r
                    b += 1
    return left_arr, right_arr

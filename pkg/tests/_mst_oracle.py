"""Exhaustive minimum spanning tree over all Pruefer sequences (N <= 9)."""
import numpy as np


def _tree_weights(seqs, n, dist):
    """Total weight of the tree coded by every column of ``seqs`` ((n-2) x m)."""
    m = seqs.shape[1]
    flat = dist.reshape(-1)
    degree = np.ones((n, m), dtype=np.int8)
    for row in seqs:
        for v in range(n):
            degree[v] += row == v
    total = np.zeros(m)
    for s in seqs:
        leaf = np.full(m, n, dtype=np.intp)
        for v in range(n - 1, -1, -1):
            leaf[degree[v] == 1] = v          # smallest leaf wins
        total += flat[leaf * n + s]
        for v in range(n):
            degree[v] -= (leaf == v)
            degree[v] -= (s == v)
    ones = degree == 1
    a = np.argmax(ones, axis=0)
    b = n - 1 - np.argmax(ones[::-1], axis=0)
    return total + flat[a * n + b]


def decode(seq, n):
    degree = [1] * n
    for s in seq:
        degree[s] += 1
    edges = []
    for s in seq:
        leaf = min(i for i in range(n) if degree[i] == 1)
        edges.append((min(leaf, s), max(leaf, s)))
        degree[leaf] -= 1
        degree[s] -= 1
    a, b = [i for i in range(n) if degree[i] == 1]
    edges.append((a, b))
    return sorted(edges)


def brute_force_mst(points):
    """(edges, total weight) of the minimum spanning tree by exhaustive enumeration."""
    raw = np.asarray(points, dtype=np.float64)
    pts = raw[:, None] if raw.ndim == 1 else raw
    n = pts.shape[0]
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    if n == 2:
        return [(0, 1)], float(dist[0, 1])
    if n == 3:
        seqs = np.arange(3)[None, :]
        w = _tree_weights(seqs, n, dist)
        i = int(np.argmin(w))
        return decode([i], n), float(w[i])
    # all Pruefer sequences: a fixed leading digit times every tail
    tail = np.indices((n,) * (n - 3)).reshape(n - 3, -1)
    best_w, best_seq = np.inf, None
    for lead in range(n):
        seqs = np.vstack([np.full((1, tail.shape[1]), lead), tail])
        w = _tree_weights(seqs, n, dist)
        i = int(np.argmin(w))
        if w[i] < best_w:
            best_w, best_seq = float(w[i]), seqs[:, i].tolist()
    return decode(best_seq, n), best_w

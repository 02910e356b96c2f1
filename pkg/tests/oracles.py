"""Independent reference implementations used only to check the library.

These deliberately recompute everything from first principles (no
Lance-Williams, no shared winner-search code) so agreement is meaningful.
"""

import numpy as np


def online_kmeans(code0, data, draws, eps):
    """Plain online k-means: per presented row, move only the nearest
    centroid by eps (ties to the smallest index)."""
    code = code0.copy()
    for t in draws:
        x = data[t]
        dist = np.linalg.norm(code - x, axis=1)
        w = int(np.argmin(dist))
        code[w] += eps * (x - code[w])
    return code


def ward_cost(points_a, points_b):
    wa, wb = len(points_a), len(points_b)
    mu_a = points_a.mean(axis=0)
    mu_b = points_b.mean(axis=0)
    return wa * wb / (wa + wb) * float(((mu_a - mu_b) ** 2).sum())


def ward_tree_bruteforce(X):
    """Greedy Ward agglomeration recomputing every pair cost from the raw
    member points at every step; same tie rule as the library."""
    X = np.asarray(X, dtype=float)
    P = len(X)
    clusters = {i: [i] for i in range(P)}
    next_id = P
    merges = []
    while len(clusters) > 1:
        best = None
        for a in sorted(clusters):
            for b in sorted(clusters):
                if a >= b:
                    continue
                cost = ward_cost(X[clusters[a]], X[clusters[b]])
                key = (cost, min(a, b), max(a, b))
                if best is None or key < best[0]:
                    best = (key, a, b)
        (cost, left, right), a, b = best
        merges.append((left, right, cost, next_id))
        clusters[next_id] = clusters.pop(a) + clusters.pop(b)
        next_id += 1
    return merges


def ward_weighted_bruteforce(X, weights):
    """Weighted variant: cluster weight is the sum of member weights and the
    centroid is weight-averaged."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(weights, dtype=float)
    P = len(X)
    clusters = {i: [i] for i in range(P)}
    next_id = P
    merges = []

    def cost_of(members_a, members_b):
        wa = w[members_a].sum()
        wb = w[members_b].sum()
        mu_a = np.average(X[members_a], axis=0, weights=w[members_a])
        mu_b = np.average(X[members_b], axis=0, weights=w[members_b])
        return wa * wb / (wa + wb) * float(((mu_a - mu_b) ** 2).sum())

    while len(clusters) > 1:
        best = None
        for a in sorted(clusters):
            for b in sorted(clusters):
                if a >= b:
                    continue
                cost = cost_of(clusters[a], clusters[b])
                key = (cost, min(a, b), max(a, b))
                if best is None or key < best[0]:
                    best = (key, a, b)
        (cost, left, right), a, b = best
        merges.append((left, right, cost, next_id))
        clusters[next_id] = clusters.pop(a) + clusters.pop(b)
        next_id += 1
    return merges


def indicator_ca_singular_values(Z):
    """Singular values of the standardized residual of an indicator matrix,
    computed the textbook CA way."""
    Z = np.asarray(Z, dtype=float)
    total = Z.sum()
    P = Z / total
    r = P.sum(axis=1)
    c = P.sum(axis=0)
    S = (P - np.outer(r, c)) / np.sqrt(np.outer(r, c))
    return np.linalg.svd(S, compute_uv=False)


def ca_supplementary_projection(B, sup_counts):
    """Transition-formula projection computed independently: row profile of
    the supplementary counts times D^{-1/2} V of the Burt residual."""
    B = np.asarray(B, dtype=float)
    total = B.sum()
    P = B / total
    r = P.sum(axis=1)
    S = (P - np.outer(r, r)) / np.sqrt(np.outer(r, r))
    vals, vecs = np.linalg.eigh((S + S.T) / 2)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    keep = vals > 1e-12
    std = vecs[:, keep] / np.sqrt(r)[:, None]
    coords = std * np.sqrt(vals[keep])
    # align signs with the library's orientation rule
    for a in range(std.shape[1]):
        peak = np.argmax(np.abs(coords[:, a]))
        if coords[peak, a] < 0:
            std[:, a] = -std[:, a]
    profiles = sup_counts / sup_counts.sum(axis=1, keepdims=True)
    return profiles @ std

"""Weighted geometric-consistency graph and densest-clique inlier selection.

Candidate associations are all-to-all point pairs between two submaps. Two
associations are consistent when the intra-map distances of their endpoints
agree; agreement is scored by a Gaussian kernel with a hard cutoff. The
inlier set is the support of a binary u maximizing u'Au / u'u subject to
never selecting a zero-affinity pair, found by a projected power-iteration
ascent with a geometric homotopy penalty on infeasible pairs, then rounded
greedily and truncated to the densest prefix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SizeLimitError, TooLargeError

MAX_CANDIDATES = 10000
_SUPPORT_TOL = 1e-8


@dataclass(frozen=True)
class Association:
    """A putative pairing: point index_a in submap A <-> index_b in submap B."""

    index_a: int
    index_b: int


@dataclass(frozen=True)
class AffinityMatrix:
    size: int
    entries: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.entries, dtype=float)
        if M.shape != (self.size, self.size):
            raise ValueError("entries must be %d x %d" % (self.size, self.size))
        if self.size:
            if not np.allclose(M, M.T):
                raise ValueError("affinity matrix must be symmetric")
            if M.min() < 0 or M.max() > 1:
                raise ValueError("affinity entries must lie in [0, 1]")
            if not np.allclose(np.diag(M), 1.0):
                raise ValueError("affinity diagonal must be all ones")
        object.__setattr__(self, "entries", M)


def consistency_score(x, sigma, epsilon):
    """Gaussian consistency weight with hard cutoff: exp(-x^2 / 2 sigma^2)
    for |x| <= epsilon, else 0. Accepts scalars or arrays."""
    if sigma <= 0 or epsilon <= 0:
        raise ValueError("sigma and epsilon must be positive")
    x = np.asarray(x, dtype=float)
    score = np.where(np.abs(x) <= epsilon, np.exp(-0.5 * (x / sigma) ** 2), 0.0)
    return float(score) if score.ndim == 0 else score


def build_affinity(submap_a, submap_b, params, max_candidates=MAX_CANDIDATES):
    """All-to-all candidate associations and their pairwise affinity matrix.

    Entries are zeroed for association pairs that share an endpoint (one-to-one
    matching) or whose endpoints within either map are closer than gamma
    (duplicate-object suppression).
    """
    na, nb = len(submap_a), len(submap_b)
    if na == 0 or nb == 0:
        raise ValueError("submaps must be non-empty")
    n = na * nb
    if n > max_candidates:
        raise SizeLimitError("candidate count %d exceeds cap %d; check submap "
                             "parameters" % (n, max_candidates))
    pa, pb = submap_a.points, submap_b.points
    DA = np.linalg.norm(pa[:, None, :] - pa[None, :, :], axis=2)
    DB = np.linalg.norm(pb[:, None, :] - pb[None, :, :], axis=2)

    # association p = (i, k) lives at flat index i * nb + k
    X = DA[:, None, :, None] - DB[None, :, None, :]
    valid = np.abs(X) <= params.epsilon
    valid &= (DA >= params.gamma)[:, None, :, None]   # gamma within map A
    valid &= (DB >= params.gamma)[None, :, None, :]   # gamma within map B
    ia = np.arange(na)
    valid[ia, :, ia, :] = False                       # shared source endpoint
    ib = np.arange(nb)
    valid[:, ib, :, ib] = False                       # shared target endpoint
    M = np.zeros((na, nb, na, nb))
    M[valid] = np.exp(-0.5 * (X[valid] / params.sigma) ** 2)
    M = M.reshape(n, n)
    np.fill_diagonal(M, 1.0)

    associations = [Association(i, k) for i in range(na) for k in range(nb)]
    return associations, AffinityMatrix(n, M)


def _density(idx, A):
    if not len(idx):
        return 0.0
    sub = A[np.ix_(idx, idx)]
    return float(sub.sum()) / len(idx)


def _grow(seed, A, feasible):
    """Greedily extend a feasible seed set, always adding the candidate with
    the largest affinity mass to the current set (ties: lowest index), and
    return the densest prefix of the growth sequence."""
    members = list(seed)
    feas = np.logical_and.reduce(feasible[members], axis=0)
    feas[members] = False
    sig = A[members].sum(axis=0)
    k = len(members)
    Q = float(A[np.ix_(members, members)].sum())
    best, best_density = members[:], Q / k
    while True:
        cand = np.flatnonzero(feas)
        if not cand.size:
            break
        j = int(cand[np.lexsort((cand, -sig[cand]))[0]])
        Q += 1.0 + 2.0 * sig[j]
        k += 1
        members.append(j)
        feas &= feasible[j]
        feas[j] = False
        sig = sig + A[j]
        if Q / k > best_density + 1e-12:
            best, best_density = members[:], Q / k
    return best, best_density


def _local_improve(selected, A, feasible):
    """Steepest-ascent add / remove / swap moves on the density objective."""
    S = sorted(selected)
    n = len(A)
    while True:
        k = len(S)
        Q = float(A[np.ix_(S, S)].sum())
        d = Q / k
        in_set = np.zeros(n, dtype=bool)
        in_set[S] = True
        sig = A[S].sum(axis=0)          # affinity mass of every node w.r.t. S
        feas_all = np.logical_and.reduce(feasible[S], axis=0)

        best_gain, move = 1e-12, None
        add = np.flatnonzero(feas_all & ~in_set)
        for j in add:
            nd = (Q + 1.0 + 2.0 * sig[j]) / (k + 1)
            if nd - d > best_gain:
                best_gain, move = nd - d, ("add", int(j))
        if k > 1:
            for i in S:
                nd = (Q - 1.0 - 2.0 * (sig[i] - 1.0)) / (k - 1)
                if nd - d > best_gain:
                    best_gain, move = nd - d, ("remove", i)
        for i in S:
            Qi = Q - 1.0 - 2.0 * (sig[i] - 1.0)
            feas_wo_i = np.logical_and.reduce(feasible[[m for m in S if m != i]],
                                              axis=0) if k > 1 else np.ones(n, bool)
            for j in np.flatnonzero(feas_wo_i & ~in_set):
                nd = (Qi + 1.0 + 2.0 * (sig[j] - A[i, j])) / k
                if nd - d > best_gain:
                    best_gain, move = nd - d, ("swap", i, int(j))
        if move is None:
            return S
        if move[0] == "add":
            S = sorted(S + [move[1]])
        elif move[0] == "remove":
            S = [m for m in S if m != move[1]]
        else:
            S = sorted([m for m in S if m != move[1]] + [move[2]])


def _round(u, A, feasible):
    """Round the relaxed u to a feasible set: multi-start greedy growth from
    the heaviest nodes (all feasible pairs too, on small problems), keep the
    densest result, then polish with local moves. Fully deterministic."""
    n = len(u)
    order = np.lexsort((np.arange(n), -u))
    best, best_density = [], -1.0

    seeds = [[int(i)] for i in (order if n <= 64 else order[:32])]
    if n <= 64:
        pairs = np.argwhere(np.triu(feasible, k=1))
        seeds.extend([[int(i), int(j)] for i, j in pairs])
    for seed in seeds:
        grown, density = _grow(seed, A, feasible)
        if density > best_density + 1e-12 or (abs(density - best_density) <= 1e-12
                                              and len(grown) > len(best)):
            best, best_density = grown, density
    if not best:
        return []
    return _local_improve(best, A, feasible)


def densest_clique(affinity, assoc):
    """Approximate densest geometrically consistent clique (the inlier set).

    Deterministic: the ascent starts from a power-iteration estimate of the
    principal eigenvector, the homotopy penalty grows geometrically (x1.4)
    until the support is feasible, and rounding is greedy by descending u.
    """
    A = affinity.entries
    n = affinity.size
    if n == 0:
        return set()
    feasible = A > 0.0
    infeasible = ~feasible
    np.fill_diagonal(infeasible, False)

    u = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(100):
        v = np.maximum(A @ u, 0.0)
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            break
        v /= norm
        if np.linalg.norm(v - u) < 1e-9:
            u = v
            break
        u = v

    d = 0.0
    for _ in range(60):
        Md = np.where(infeasible, -d, A)
        for _ in range(200):
            v = np.maximum(Md @ u, 0.0)
            norm = np.linalg.norm(v)
            if norm < 1e-12:
                # ascent collapsed; restart from the heaviest row
                v = np.zeros(n)
                v[int(np.argmax(A.sum(axis=1)))] = 1.0
                norm = 1.0
            v /= norm
            if np.linalg.norm(v - u) < 1e-9:
                u = v
                break
            u = v
        support = np.flatnonzero(u > _SUPPORT_TOL)
        if support.size and not infeasible[np.ix_(support, support)].any():
            break
        d = 0.25 if d == 0.0 else d * 1.4

    selected = _round(u, A, feasible)
    return {assoc[i] for i in selected}


def densest_clique_exact(affinity, assoc):
    """Exhaustive oracle for the densest consistent clique (n <= 20).

    Ties are broken by larger cardinality, then lexicographically earliest
    index set.
    """
    A = affinity.entries
    n = affinity.size
    if n > 20:
        raise TooLargeError("exhaustive enumeration is capped at 20 associations")
    if n == 0:
        return set()
    Z = np.asarray(np.logical_not(A > 0.0), dtype=float)
    np.fill_diagonal(Z, 0.0)

    def indices(mask):
        return tuple(i for i in range(n) if (mask >> i) & 1)

    best_density, best_k, best_idx = -1.0, 0, ()
    bits = np.arange(n)
    chunk = 1 << 16
    for start in range(1, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        B = ((masks[:, None] >> bits) & 1).astype(float)
        viol = np.einsum("mi,ij,mj->m", B, Z, B)
        q = np.einsum("mi,ij,mj->m", B, A, B)
        k = B.sum(axis=1)
        density = np.where(viol > 0, -1.0, q / k)
        for idx in np.flatnonzero(density > best_density - 1e-12):
            dens, kk = density[idx], int(k[idx])
            if dens > best_density + 1e-12:
                best_density, best_k, best_idx = dens, kk, indices(int(masks[idx]))
            elif abs(dens - best_density) <= 1e-12:
                cand = indices(int(masks[idx]))
                if kk > best_k or (kk == best_k and cand < best_idx):
                    best_k, best_idx = kk, cand
    return {assoc[i] for i in best_idx}

"""Brute-force reference implementations used only by the test-suite.

Nothing here imports the code paths it is used to check.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


# --------------------------------------------------------------------------
# LP by vertex enumeration
# --------------------------------------------------------------------------
def _vertices(G: np.ndarray, h: np.ndarray, eq: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vertices of {x : G x <= h, G[eq] x == h[eq]} by enumerating bases."""
    k, n = G.shape
    eq_idx = np.flatnonzero(eq)
    ineq_idx = np.flatnonzero(~eq)
    need = n - len(eq_idx)
    if need < 0:
        combos = [()]
    else:
        combos = list(itertools.combinations(ineq_idx, need))
    if not combos:
        return np.zeros((0, n))
    sel = np.array([np.concatenate([eq_idx, np.array(c, dtype=int)]) for c in combos], dtype=int)
    if sel.shape[1] != n:
        # more equalities than variables: solve by least squares and check
        x, *_ = np.linalg.lstsq(G[eq_idx], h[eq_idx], rcond=None)
        pts = x[None, :]
    else:
        mats = G[sel]
        rhs = h[sel]
        det = np.linalg.det(mats)
        ok = np.abs(det) > 1e-9
        if not np.any(ok):
            return np.zeros((0, n))
        pts = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    slack = pts @ G.T - h[None, :]
    feas = np.all(slack <= tol * (1 + np.abs(h)), axis=1)
    if np.any(eq):
        feas &= np.all(np.abs(slack[:, eq]) <= tol * (1 + np.abs(h[eq])), axis=1)
    return pts[feas]


def lp_by_vertices(c, A, senses, b, lower, upper):
    """Return (status, value) for ``min c.x`` with rows ``A x (sense) b``.

    Requires finite lower bounds so the feasible region is pointed.  Unbounded
    is decided on the recession cone normalised by ``sum(d) == 1``.
    """
    c = np.asarray(c, float)
    n = len(c)
    G, h, eq = [], [], []
    for row, s, rhs in zip(A, senses, b):
        row = np.asarray(row, float)
        if not np.any(row):
            # constant row: either always true or the problem is infeasible
            if (s == "<=" and rhs < 0) or (s == ">=" and rhs > 0) or (s == "=" and rhs != 0):
                return "Infeasible", math.inf
            continue
        if s == "<=":
            G.append(row); h.append(rhs); eq.append(False)
        elif s == ">=":
            G.append(-row); h.append(-rhs); eq.append(False)
        else:
            G.append(row); h.append(rhs); eq.append(True)
    for j in range(n):
        e = np.zeros(n); e[j] = -1.0
        G.append(e); h.append(-lower[j]); eq.append(False)
        if math.isfinite(upper[j]):
            e = np.zeros(n); e[j] = 1.0
            G.append(e); h.append(upper[j]); eq.append(False)
    G = np.array(G); h = np.array(h, float); eq = np.array(eq)
    verts = _vertices(G, h, eq)
    if len(verts) == 0:
        return "Infeasible", math.inf
    best = float(np.min(verts @ c))
    # recession cone: G d <= 0 (== 0 on equalities), sum d = 1
    Gc = np.vstack([G, np.ones((1, n)), -np.ones((1, n))])
    hc = np.concatenate([np.zeros(len(h)), [1.0, -1.0]])
    eqc = np.concatenate([eq, [False, False]])
    rays = _vertices(Gc, hc, eqc)
    if len(rays) and float(np.min(rays @ c)) < -1e-9:
        return "Unbounded", -math.inf
    return "Optimal", best


# --------------------------------------------------------------------------
# TSP / makespan by permutations
# --------------------------------------------------------------------------
def min_setup_brute(s, jobs):
    """Minimum tour setup from 0 through ``jobs`` back to 0 (s[j][0] == 0)."""
    jobs = list(jobs)
    if not jobs:
        return 0.0
    best = math.inf
    for perm in itertools.permutations(jobs):
        t = s[0][perm[0]]
        for a, b in zip(perm, perm[1:]):
            t += s[a][b]
        t += s[perm[-1]][0]
        best = min(best, t)
    return best


# --------------------------------------------------------------------------
# 2D rectangle packing via normal patterns
# --------------------------------------------------------------------------
def _subset_sums(values, cap):
    sums = {0.0}
    for v in values:
        sums |= {round(s + v, 9) for s in sums if s + v <= cap + 1e-9}
    return sorted(sums)


def rect_fits_brute(W, H, items):
    """Exact orthogonal packing test (no rotation) over normal-pattern coordinates."""
    items = sorted(items, key=lambda r: (-r[0] * r[1], r))
    if not items:
        return True
    if sum(w * h for w, h in items) > W * H + 1e-9:
        return False
    cand = []
    for j, (w, h) in enumerate(items):
        others = [items[k] for k in range(len(items)) if k != j]
        xs = [x for x in _subset_sums([o[0] for o in others], W - w) if x <= W - w + 1e-9]
        ys = [y for y in _subset_sums([o[1] for o in others], H - h) if y <= H - h + 1e-9]
        if not xs or not ys:
            return False
        cand.append((xs, ys))
    placed: list[tuple[float, float, float, float]] = []

    def rec(j):
        if j == len(items):
            return True
        w, h = items[j]
        xs, ys = cand[j]
        # identical rectangles are interchangeable: place them in lexicographic order
        floor = placed[-1][:2] if j > 0 and items[j - 1] == items[j] else None
        for x in xs:
            for y in ys:
                if floor is not None and (x, y) <= floor:
                    continue
                if all(x + w <= px + 1e-9 or px + pw <= x + 1e-9 or y + h <= py + 1e-9 or py + ph <= y + 1e-9
                       for px, py, pw, ph in placed):
                    placed.append((x, y, w, h))
                    if rec(j + 1):
                        return True
                    placed.pop()
        return False

    return rec(0)


# --------------------------------------------------------------------------
# Exhaustive assignment optima
# --------------------------------------------------------------------------
def mkp_optimum(weights, capacities, costs):
    """Min-cost assignment of every item to one slot within capacities."""
    n, m = len(weights), len(capacities)
    best = math.inf
    for assign in itertools.product(range(m), repeat=n):
        load = [0.0] * m
        for j, i in enumerate(assign):
            load[i] += weights[j]
        if all(load[i] <= capacities[i] + 1e-9 for i in range(m)):
            best = min(best, sum(costs[i][j] for j, i in enumerate(assign)))
    return best


def binpack_optimum(bins, items):
    """Fewest non-empty bins for a rectangle packing (math.inf if impossible)."""
    n, m = len(items), len(bins)
    cache: dict[tuple, bool] = {}

    def fits(i, subset):
        key = (tuple(bins[i]), tuple(sorted(tuple(items[j]) for j in subset)))
        if key not in cache:
            cache[key] = rect_fits_brute(*bins[i], [items[j] for j in sorted(subset)])
        return cache[key]

    best = math.inf
    for assign in itertools.product(range(m), repeat=n):
        groups: dict[int, set] = {}
        for j, i in enumerate(assign):
            groups.setdefault(i, set()).add(j)
        if len(groups) >= best:
            continue
        if all(fits(i, frozenset(g)) for i, g in groups.items()):
            best = len(groups)
    return best


def scheduling_optimum(p, s):
    """Min makespan over all assignments; p[i][j], s[i][j][k] with job 0 artificial."""
    m = len(p)
    jobs = list(range(1, len(p[0])))
    best = math.inf
    for assign in itertools.product(range(m), repeat=len(jobs)):
        span = 0.0
        for i in range(m):
            mine = [j for j, a in zip(jobs, assign) if a == i]
            span = max(span, sum(p[i][j] for j in mine) + min_setup_brute(s[i], mine))
        best = min(best, span)
    return best


# --------------------------------------------------------------------------
# symmetric families
# --------------------------------------------------------------------------
def random_partition(rng, n):
    """Random GroupPartition of ``range(n)`` (labels drawn per element)."""
    from symbenders.sdg import GroupPartition

    k = rng.randint(1, n)
    labels = [rng.randrange(k) for _ in range(n)]
    return GroupPartition.from_groups([[j for j in range(n) if labels[j] == g] for g in set(labels)])


def group_permutations(partition):
    """Every permutation of range(n) that maps each group onto itself."""
    per_group = [list(itertools.permutations(g)) for g in partition.groups]
    n = sum(len(g) for g in partition.groups)
    for choice in itertools.product(*per_group):
        perm = list(range(n))
        for g, img in zip(partition.groups, choice):
            for a, b in zip(g, img):
                perm[a] = b
        yield perm


def brute_force_group_match(alpha, zhat, partition):
    """max over group-wise permutations pi of sum_j alpha[pi(j)] * zhat[j]."""
    return max(sum(alpha[p[j]] * zhat[j] for j in range(len(alpha))) for p in group_permutations(partition))


def enumerate_family(cut, partition):
    """All member item choices {group: items} of an abstract cut."""
    support = cut.rep.support()
    options = [list(itertools.combinations(partition.groups[g], cut.rep[g])) for g in support]
    for choice in itertools.product(*options):
        yield {g: list(c) for g, c in zip(support, choice)}

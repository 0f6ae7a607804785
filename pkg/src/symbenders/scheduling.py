"""Unrelated machine scheduling with sequence-dependent setup times.

Job 0 is an artificial start/finish job present on every machine with zero
processing time and zero setup back into it.  ``p[i][j]`` and ``s[i][j][k]``
are indexed over ``0..n``; items of the assignment layout are the real jobs
``1..n`` shifted down by one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lp import LinearProgram, Relation
from .mip import MasterModel, SlotCut
from .sdg import GroupPartition, Sdg, detect_group_partition, merge_sdgs, mip_sdg
from .symcuts import AbstractCut, AssignmentLayout, ConcreteCut, CutKind, representative_vector

HELD_KARP_LIMIT = 20
_TOL = 1e-9


class InvalidInstance(ValueError):
    pass


class TooLarge(ValueError):
    pass


class NonTransitiveRelation(ValueError):
    pass


@dataclass(frozen=True)
class SchedulingInstance:
    p: tuple[tuple[float, ...], ...]
    s: tuple[tuple[tuple[float, ...], ...], ...]

    @property
    def num_machines(self) -> int:
        return len(self.p)

    @property
    def num_jobs(self) -> int:
        """Real jobs, excluding job 0."""
        return len(self.p[0]) - 1 if self.p else 0

    @property
    def jobs(self) -> range:
        return range(1, self.num_jobs + 1)

    @classmethod
    def create(cls, p: Sequence[Sequence[float]], s: Sequence[Sequence[Sequence[float]]]) -> "SchedulingInstance":
        inst = cls(
            tuple(tuple(float(v) for v in row) for row in p),
            tuple(tuple(tuple(float(v) for v in r) for r in mat) for mat in s),
        )
        inst.validate()
        return inst

    def validate(self) -> None:
        m = len(self.p)
        if m == 0:
            raise InvalidInstance("need at least one machine")
        n0 = len(self.p[0])
        if n0 < 1 or any(len(row) != n0 for row in self.p):
            raise InvalidInstance("p must be machines x (jobs + 1)")
        if len(self.s) != m or any(len(mat) != n0 or any(len(r) != n0 for r in mat) for mat in self.s):
            raise InvalidInstance("s must be machines x (jobs + 1) x (jobs + 1)")
        for i in range(m):
            if self.p[i][0] != 0.0:
                raise InvalidInstance("job 0 must have zero processing time")
            if any(v < 0 for v in self.p[i]):
                raise InvalidInstance("processing times must be nonnegative")
            s = np.array(self.s[i])
            if np.any(s < 0):
                raise InvalidInstance("setup times must be nonnegative")
            if np.any(s[1:, 0] != 0):
                raise InvalidInstance("setup back into job 0 must be zero")
            real = s[1:, 1:]
            # s[j,k] + s[k,l] >= s[j,l] over real jobs
            lhs = real[:, :, None] + real[None, :, :]
            if np.any(lhs < real[:, None, :] - 1e-9):
                raise InvalidInstance(f"setup times on machine {i} violate the triangle inequality")

    def to_json(self) -> dict:
        return {
            "type": "scheduling",
            "machines": self.num_machines,
            "p": [list(r) for r in self.p],
            "s": [[list(r) for r in mat] for mat in self.s],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "SchedulingInstance":
        try:
            if data["type"] != "scheduling":
                raise InvalidInstance(f"not a scheduling instance: {data['type']!r}")
            inst = cls.create(data["p"], data["s"])
            if int(data.get("machines", inst.num_machines)) != inst.num_machines:
                raise InvalidInstance("machine count does not match p")
            return inst
        except (KeyError, TypeError) as exc:
            raise InvalidInstance(f"malformed instance: {exc}") from exc


# --------------------------------------------------------------------------
# subproblem
# --------------------------------------------------------------------------
def tsp_min_setup(inst: SchedulingInstance, i: int, jobs: Iterable[int]) -> float:
    """Cheapest tour ``0 -> C -> 0`` on machine ``i`` by subset dynamic programming."""
    C = sorted(set(jobs))
    k = len(C)
    if k > HELD_KARP_LIMIT:
        raise TooLarge(f"{k} jobs exceed the exact tour limit of {HELD_KARP_LIMIT}")
    return _held_karp(inst.s[i], tuple(C))


@lru_cache(maxsize=200_000)
def _held_karp(s: tuple[tuple[float, ...], ...], C: tuple[int, ...]) -> float:
    k = len(C)
    if k == 0:
        return 0.0
    S = np.array(s)
    start = S[0, list(C)]
    back = S[list(C), 0]
    inner = S[np.ix_(C, C)]
    full = 1 << k
    dp = np.full((full, k), np.inf)
    for j in range(k):
        dp[1 << j, j] = start[j]
    bits = 1 << np.arange(k)
    for mask in range(1, full):
        row = dp[mask]
        if not np.isfinite(row).any():
            continue
        # extend by every job outside the mask
        best_next = np.min(row[:, None] + inner, axis=0)
        for t in np.flatnonzero((mask & bits) == 0):
            nxt = mask | int(bits[t])
            if best_next[t] < dp[nxt, t]:
                dp[nxt, t] = best_next[t]
    return float(np.min(dp[full - 1] + back))


def makespan(inst: SchedulingInstance, i: int, jobs: Iterable[int]) -> float:
    C = sorted(set(jobs))
    return sum(inst.p[i][j] for j in C) + tsp_min_setup(inst, i, C)


def saving_bound(inst: SchedulingInstance, i: int, C: Sequence[int], j: int) -> float:
    """Upper bound on the time saved on machine ``i`` when job ``j`` leaves ``C``.

    The predecessor set includes job 0 so that the bound also covers the
    machine's startup into ``j``.
    """
    s = inst.s[i]
    return inst.p[i][j] + max(s[k][j] for k in list(C) + [0] if k != j)


def scheduling_cut(
    inst: SchedulingInstance,
    i: int,
    C: Iterable[int],
    partition: GroupPartition,
    z: Sequence[int],
    epigraph: int,
) -> tuple[AbstractCut, ConcreteCut]:
    """Optimality cut ``T >= T_i(C) - sum_{j in C} (1 - z_ij) theta_ij`` and its group form.

    ``partition`` groups the items (job - 1) of machine ``i``; ``z[item]`` is the
    master column of that item on machine ``i``.
    """
    jobs = sorted(set(C))
    if not jobs:
        raise ValueError("cut needs a nonempty job set")
    total = makespan(inst, i, jobs)
    items = [j - 1 for j in jobs]
    rep = representative_vector(items, partition)
    s = inst.s[i]
    theta = []
    for gid in rep.support():
        members = [e + 1 for e in partition.groups[gid]]
        g = members[0]
        # predecessors: job 0, any other group met by C, and the own group if C holds two of it
        best = s[0][g]
        for h in rep.support():
            if h != gid:
                best = max(best, s[partition.groups[h][0] + 1][g])
        if rep[gid] >= 2:
            best = max(best, s[members[1]][g])
        theta.append((gid, inst.p[i][g] + best))
    abstract = AbstractCut(i, rep, CutKind.MAKESPAN, total, tuple(theta))
    coeffs: dict[int, float] = {epigraph: 1.0}
    rhs = total
    for j in jobs:
        t = saving_bound(inst, i, jobs, j)
        coeffs[z[j - 1]] = -t
        rhs -= t
    return abstract, ConcreteCut(coeffs, Relation.GE, rhs)


# --------------------------------------------------------------------------
# job equivalence
# --------------------------------------------------------------------------
def _equivalent(inst: SchedulingInstance, i: int, a: int, b: int) -> bool:
    p, s = inst.p[i], inst.s[i]
    if p[a] != p[b] or s[a][b] != s[b][a]:
        return False
    for k in range(inst.num_jobs + 1):
        if k in (a, b):
            continue
        if s[a][k] != s[b][k] or s[k][a] != s[k][b]:
            return False
    return True


def job_equivalence(inst: SchedulingInstance, i: int) -> GroupPartition:
    """Groups of interchangeable jobs on machine ``i`` over ``0..n``; job 0 stays alone."""
    parent = list(range(inst.num_jobs + 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in inst.jobs:
        for b in range(a + 1, inst.num_jobs + 1):
            if find(a) != find(b) and _equivalent(inst, i, a, b):
                parent[find(b)] = find(a)
    groups: dict[int, list[int]] = {}
    for j in range(inst.num_jobs + 1):
        groups.setdefault(find(j), []).append(j)
    for g in groups.values():
        for x in range(len(g)):
            for y in range(x + 1, len(g)):
                if not _equivalent(inst, i, g[x], g[y]):
                    raise NonTransitiveRelation(f"jobs {g[x]} and {g[y]} on machine {i}")
    return GroupPartition.from_groups(groups.values())


def item_partition(inst: SchedulingInstance, i: int) -> GroupPartition:
    """``job_equivalence`` on real jobs, indexed by item (job - 1)."""
    groups = [[j - 1 for j in g] for g in job_equivalence(inst, i).groups if g != (0,)]
    return GroupPartition.from_groups(groups)


# --------------------------------------------------------------------------
# master
# --------------------------------------------------------------------------
@dataclass
class SchedulingVars:
    z: list[list[int]]
    y: list[list[list[int]]]
    xi: list[int]
    T: int


def build_master_scheduling(inst: SchedulingInstance, partitions: Sequence[GroupPartition] | None = None) -> MasterModel:
    """Assignment master with a relaxed tour per machine; makespan cuts arrive lazily.

    ``z_i0 = 1`` is substituted as a constant.  Self-loop tour variables of
    real jobs are fixed to zero; the self-loop of job 0 stays free so that a
    machine may stay empty.
    """
    m, n = inst.num_machines, inst.num_jobs
    N0 = range(n + 1)
    lp = LinearProgram(0, [], [], [])
    z = [[lp.add_var(0.0, 0.0, 1.0) for _ in range(n)] for _ in range(m)]
    y = [[[lp.add_var(0.0, 0.0, 1.0 if j == k == 0 or j != k else 0.0) for k in N0] for j in N0] for _ in range(m)]
    xi = [lp.add_var(0.0, 0.0, math.inf) for _ in range(m)]
    T = lp.add_var(1.0, 0.0, math.inf)
    for j in range(n):
        lp.add_row({z[i][j]: 1.0 for i in range(m)}, Relation.EQ, 1.0)
    for i in range(m):
        for j in N0:
            out = {y[i][j][k]: 1.0 for k in N0}
            inc = {y[i][k][j]: 1.0 for k in N0}
            if j == 0:
                lp.add_row(out, Relation.EQ, 1.0)
                lp.add_row(inc, Relation.EQ, 1.0)
            else:
                out[z[i][j - 1]] = -1.0
                inc[z[i][j - 1]] = -1.0
                lp.add_row(out, Relation.EQ, 0.0)
                lp.add_row(inc, Relation.EQ, 0.0)
        setup = {y[i][j][k]: -inst.s[i][j][k] for j in N0 for k in N0}
        setup[xi[i]] = 1.0
        lp.add_row(setup, Relation.EQ, 0.0)
        load = {z[i][j - 1]: inst.p[i][j] for j in inst.jobs}
        load[xi[i]] = 1.0
        load[T] = -1.0
        lp.add_row(load, Relation.LE, 0.0)
    if partitions is None:
        partitions = [item_partition(inst, i) for i in range(m)]
    layout = AssignmentLayout(z, list(partitions), epigraph=T)
    model = MasterModel(lp, [v for row in z for v in row], layout)
    model.slot_oracle = _makespan_oracle(inst, layout)
    model.info["vars"] = SchedulingVars(z, y, xi, T)
    return model


def _makespan_oracle(inst: SchedulingInstance, layout: AssignmentLayout):
    def oracle(i: int, support: list[int]) -> SlotCut | None:
        if not support:
            return None
        jobs = [j + 1 for j in support]
        abstract, concrete = scheduling_cut(inst, i, jobs, layout.partitions[i], layout.z[i], layout.epigraph)
        return SlotCut(abstract, concrete)

    return oracle


def assignment_makespan(inst: SchedulingInstance, assignment: Mapping[int, int]) -> float:
    """Makespan of a job -> machine assignment with optimal sequencing."""
    per: dict[int, list[int]] = {i: [] for i in range(inst.num_machines)}
    for j, i in assignment.items():
        per[i].append(j)
    return max(makespan(inst, i, js) for i, js in per.items())


# --------------------------------------------------------------------------
# symmetry detection
# --------------------------------------------------------------------------
def machine_gadget(inst: SchedulingInstance, i: int, z: Sequence[int], var_color) -> Sdg:
    """Anchor, one node per job and one dummy per unordered job pair.

    Processing and startup times color the anchor-job edges; the dummy of
    ``{j, k}`` meets ``j`` with color ``(s_jk, s_kj)`` and ``k`` with ``(s_kj, s_jk)``.
    """
    g = Sdg()
    s, p = inst.s[i], inst.p[i]
    anchor = g.add_anchor(("machine",))
    nodes = {}
    for j in inst.jobs:
        nodes[j] = g.add_variable(z[j - 1], var_color(z[j - 1]))
        g.add_edge(anchor, nodes[j], ("p", p[j], s[0][j]))
    for j in inst.jobs:
        for k in range(j + 1, inst.num_jobs + 1):
            e = g.add_node(("pair",))
            g.add_edge(e, nodes[j], (s[j][k], s[k][j]))
            g.add_edge(e, nodes[k], (s[k][j], s[j][k]))
            g.add_edge(e, anchor, "pair")
    return g


def build_sdg_scheduling(inst: SchedulingInstance, model: MasterModel) -> Sdg:
    g = mip_sdg(model.lp, model.integer_vars)
    color = lambda v: g.colors[g.variable_nodes[v]]  # noqa: E731
    for i in range(inst.num_machines):
        g = merge_sdgs(g, machine_gadget(inst, i, model.layout.z[i], color))
    return g


def detected_item_partition(inst: SchedulingInstance, model: MasterModel) -> GroupPartition:
    """Job groups certified on the full master SDG, indexed by item (job - 1)."""
    if inst.num_jobs == 0:
        return GroupPartition(())
    z0 = model.layout.z[0]
    found = detect_group_partition(build_sdg_scheduling(inst, model), z0)
    return found.map({v: j for j, v in enumerate(z0)})

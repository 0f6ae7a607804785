"""Symmetric cut pools and sorted-indicator extended formulations.

Cuts for an assignment master live on one slot (bin or machine) at a time.
Items of a slot are split into groups of interchangeable items; a cut's whole
symmetric family is then identified by the slot and the per-group item counts
(its representative vector).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .lp import EPS_FEAS, Relation, Row, make_row
from .sdg import GroupPartition


class UnknownItem(KeyError):
    pass


class MissingBlock(KeyError):
    pass


class CutKind(str, enum.Enum):
    NOGOOD = "NoGood"
    MAKESPAN = "MakespanBound"


class CutOrigin(str, enum.Enum):
    ORACLE = "Oracle"
    POOL = "Pool"
    EXTENDED = "ExtendedFormulation"


@dataclass(frozen=True)
class ConcreteCut:
    coeffs: dict[int, float]
    rel: Relation
    rhs: float
    origin: CutOrigin = CutOrigin.ORACLE

    def to_row(self) -> Row:
        return make_row(self.coeffs, self.rel, self.rhs)

    def violation(self, x: Sequence[float]) -> float:
        return self.to_row().violation(x)

    def key(self) -> tuple:
        return (tuple(sorted(self.coeffs.items())), self.rel.value, self.rhs)


@dataclass(frozen=True)
class RepresentativeVector:
    counts: tuple[int, ...]

    def __getitem__(self, gid: int) -> int:
        return self.counts[gid]

    def __len__(self) -> int:
        return len(self.counts)

    def dominated_by(self, other: "RepresentativeVector") -> bool:
        """Componentwise ``self <= other``."""
        return len(self.counts) == len(other.counts) and all(a <= b for a, b in zip(self.counts, other.counts))

    def support(self) -> list[int]:
        return [g for g, c in enumerate(self.counts) if c > 0]

    @property
    def total(self) -> int:
        return sum(self.counts)


def representative_vector(items: Iterable[int], partition: GroupPartition) -> RepresentativeVector:
    counts = [0] * len(partition)
    for j in set(items):
        try:
            counts[partition.group_of(j)] += 1
        except KeyError:
            raise UnknownItem(j) from None
    return RepresentativeVector(tuple(counts))


@dataclass(frozen=True)
class AbstractCut:
    """A stored cut standing for its symmetric family on one slot.

    NoGood: at most ``rep.total - 1`` of any item set with this representative
    vector fit together.  MakespanBound: the slot's makespan is at least
    ``makespan`` minus ``theta[G]`` for each of the ``rep[G]`` items of group
    ``G`` that the assignment leaves out.
    """

    slot: int
    rep: RepresentativeVector
    kind: CutKind
    makespan: float = 0.0
    theta: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind is CutKind.MAKESPAN and sorted(g for g, _ in self.theta) != self.rep.support():
            raise ValueError("theta must be given exactly for groups with a positive count")

    @property
    def rhs(self) -> float:
        if self.kind is CutKind.NOGOOD:
            return float(self.rep.total - 1)
        return self.makespan

    def theta_of(self, gid: int) -> float:
        return dict(self.theta)[gid]

    def key(self) -> tuple:
        return (self.slot, self.rep.counts, self.kind.value)

    def item_coefficients(self, items_by_group: Mapping[int, Sequence[int]]) -> dict[int, float]:
        """z-coefficients when the family member uses ``items_by_group[G]``."""
        out: dict[int, float] = {}
        theta = dict(self.theta)
        for gid in self.rep.support():
            chosen = items_by_group[gid]
            if len(chosen) != self.rep[gid]:
                raise ValueError("member does not match the representative vector")
            for j in chosen:
                out[j] = 1.0 if self.kind is CutKind.NOGOOD else theta[gid]
        return out

    def to_json(self) -> dict:
        data: dict = {"slot": self.slot, "kind": self.kind.value, "rep": list(self.rep.counts)}
        if self.kind is CutKind.NOGOOD:
            data["rhs"] = self.rhs
        else:
            data["makespan"] = self.makespan
            data["theta"] = {str(g): t for g, t in self.theta}
        return data


# --------------------------------------------------------------------------
# slot layout of an assignment master
# --------------------------------------------------------------------------
@dataclass
class AssignmentLayout:
    """Where the assignment variables of a master sit.

    ``z[i][j]`` is the column of item ``j`` on slot ``i``; ``epigraph`` the
    makespan variable bounded by optimality cuts (None for pure feasibility);
    ``partitions[i]`` the item groups used for cuts on slot ``i``.
    """

    z: list[list[int]]
    partitions: list[GroupPartition]
    epigraph: int | None = None

    @property
    def num_slots(self) -> int:
        return len(self.z)

    @property
    def num_items(self) -> int:
        return len(self.z[0]) if self.z else 0

    def slot_values(self, x: Sequence[float], i: int) -> list[float]:
        return [float(x[v]) for v in self.z[i]]

    def support(self, x: Sequence[float], i: int, tol: float = 0.5) -> list[int]:
        return [j for j, v in enumerate(self.z[i]) if x[v] > tol]


def concrete_from_members(
    cut: AbstractCut, layout: AssignmentLayout, items_by_group: Mapping[int, Sequence[int]], origin: CutOrigin
) -> ConcreteCut:
    """z-space inequality of one family member."""
    alpha = cut.item_coefficients(items_by_group)
    z = layout.z[cut.slot]
    if cut.kind is CutKind.NOGOOD:
        return ConcreteCut({z[j]: 1.0 for j in alpha}, Relation.LE, cut.rhs, origin)
    if layout.epigraph is None:
        raise ValueError("makespan cut needs an epigraph variable")
    # T >= makespan - sum theta_j (1 - z_j)   <=>   T - sum theta_j z_j >= makespan - sum theta_j
    coeffs = {layout.epigraph: 1.0}
    for j, t in alpha.items():
        coeffs[z[j]] = coeffs.get(z[j], 0.0) - t
    return ConcreteCut(coeffs, Relation.GE, cut.makespan - sum(alpha.values()), origin)


# --------------------------------------------------------------------------
# sorted matching
# --------------------------------------------------------------------------
def _by_value_desc(values: Sequence[float], members: Sequence[int]) -> list[int]:
    return sorted(members, key=lambda j: (-values[j], j))


def sorted_match(
    alpha: Sequence[float], zhat: Sequence[float], partition: GroupPartition
) -> tuple[float, list[float]]:
    """Maximise ``<pi^-1(alpha), zhat>`` over group-wise permutations ``pi``.

    Returns the maximum and the permuted coefficient vector attaining it.
    """
    permuted = [0.0] * len(alpha)
    total = 0.0
    for group in partition.groups:
        coefs = sorted((alpha[j] for j in group), reverse=True)
        for a, j in zip(coefs, _by_value_desc(zhat, group)):
            permuted[j] = a
            total += a * zhat[j]
    return total, permuted


def separate_pool_sorted(
    cut: AbstractCut,
    zhat: Sequence[float],
    xhat: float,
    partition: GroupPartition,
    layout: AssignmentLayout | None = None,
    origin: CutOrigin = CutOrigin.POOL,
) -> ConcreteCut | None:
    """Most violated member of the cut's family at ``(zhat, xhat)``, or None.

    ``zhat`` holds the slot's item values.  NoGood families read as
    ``sum z <= rep.total - 1`` and ignore ``xhat``.
    """
    theta = dict(cut.theta)
    alpha_groups: dict[int, list[float]] = {}
    for gid in cut.rep.support():
        a = 1.0 if cut.kind is CutKind.NOGOOD else theta[gid]
        size = len(partition.groups[gid])
        alpha_groups[gid] = [a] * cut.rep[gid] + [0.0] * (size - cut.rep[gid])
    chosen: dict[int, list[int]] = {}
    value = 0.0
    for gid, coefs in alpha_groups.items():
        order = _by_value_desc(zhat, partition.groups[gid])
        chosen[gid] = sorted(order[: cut.rep[gid]])
        value += sum(a * zhat[j] for a, j in zip(coefs, order))
    if cut.kind is CutKind.NOGOOD:
        if value <= cut.rhs + EPS_FEAS:
            return None
    else:
        beta = cut.makespan - sum(theta[g] * cut.rep[g] for g in cut.rep.support())
        if value + beta <= xhat + EPS_FEAS:
            return None
    if layout is None:
        raise ValueError("a layout is needed to emit a concrete cut")
    return concrete_from_members(cut, layout, chosen, origin)


# --------------------------------------------------------------------------
# pool
# --------------------------------------------------------------------------
@dataclass
class CutPool:
    cuts: list[AbstractCut] = field(default_factory=list)
    _keys: set[tuple] = field(default_factory=set)
    _by_slot: dict[int, list[AbstractCut]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cuts)

    def register(self, cut: AbstractCut) -> bool:
        """Add ``cut``; returns False when an equal (slot, rep, kind) entry exists."""
        key = cut.key()
        if key in self._keys:
            return False
        self._keys.add(key)
        self.cuts.append(cut)
        self._by_slot.setdefault(cut.slot, []).append(cut)
        return True

    def slot_cuts(self, slot: int) -> list[AbstractCut]:
        return self._by_slot.get(slot, [])

    def to_json(self) -> str:
        return json.dumps([c.to_json() for c in self.cuts], indent=2, sort_keys=True)


def register_cut(pool: CutPool, cut: AbstractCut) -> bool:
    return pool.register(cut)


def nogood_member_within(
    cut: AbstractCut, support: Iterable[int], partition: GroupPartition
) -> dict[int, list[int]] | None:
    """Family member of a NoGood cut contained in ``support``, if any.

    Per group, the lowest-index items of ``support`` are used.
    """
    items = sorted(set(support))
    if not cut.rep.dominated_by(representative_vector(items, partition)):
        return None
    chosen: dict[int, list[int]] = {}
    for gid in cut.rep.support():
        chosen[gid] = [j for j in items if partition.group_of(j) == gid][: cut.rep[gid]]
    return chosen


def dominance_match_nogood(
    pool: CutPool, slot: int, support: Iterable[int], partition: GroupPartition
) -> tuple[AbstractCut, dict[int, list[int]]] | None:
    """First stored NoGood on ``slot`` whose representative vector fits under ``R(support)``."""
    items = sorted(set(support))
    for cut in pool.slot_cuts(slot):
        if cut.kind is CutKind.NOGOOD:
            chosen = nogood_member_within(cut, items, partition)
            if chosen is not None:
                return cut, chosen
    return None


# --------------------------------------------------------------------------
# sorted-indicator blocks
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ZetaBlock:
    """``zeta_vars[k-1]`` is 1 exactly when at least k of ``member_vars`` are 1."""

    slot: int
    group: int
    zeta_vars: tuple[int, ...]
    member_vars: tuple[int, ...]
    linking_rows: tuple[Row, ...]


def build_zeta_block(slot: int, group: int, member_vars: Sequence[int], zeta_vars: Sequence[int]) -> ZetaBlock:
    size = len(member_vars)
    if size < 1 or len(zeta_vars) != size:
        raise ValueError("need one zeta variable per group member")
    rows: list[Row] = []
    for k in range(1, size + 1):
        zeta = zeta_vars[k - 1]
        # sum z <= k - 1 + (|G| - k + 1) zeta_k
        upper = {v: 1.0 for v in member_vars}
        upper[zeta] = -float(size - k + 1)
        rows.append(make_row(upper, Relation.LE, k - 1))
        # k zeta_k <= sum z
        lower = {v: -1.0 for v in member_vars}
        lower[zeta] = float(k)
        rows.append(make_row(lower, Relation.LE, 0.0))
    return ZetaBlock(slot, group, tuple(zeta_vars), tuple(member_vars), tuple(rows))


def ef_cut_from_abstract(
    cut: AbstractCut, blocks: Mapping[tuple[int, int], ZetaBlock], epigraph: int | None = None
) -> ConcreteCut:
    """The single zeta-space row equivalent to the cut's whole family."""
    support = cut.rep.support()
    for gid in support:
        if (cut.slot, gid) not in blocks:
            raise MissingBlock((cut.slot, gid))
    if cut.kind is CutKind.NOGOOD:
        coeffs = {blocks[(cut.slot, g)].zeta_vars[cut.rep[g] - 1]: 1.0 for g in support}
        return ConcreteCut(coeffs, Relation.LE, float(len(support) - 1), CutOrigin.EXTENDED)
    if epigraph is None:
        raise ValueError("makespan cut needs an epigraph variable")
    theta = dict(cut.theta)
    # T >= makespan - sum_G sum_{h<=rep} theta_G (1 - zeta_h)
    coeffs: dict[int, float] = {epigraph: 1.0}
    rhs = cut.makespan
    for g in support:
        for h in range(cut.rep[g]):
            coeffs[blocks[(cut.slot, g)].zeta_vars[h]] = -theta[g]
            rhs -= theta[g]
    return ConcreteCut(coeffs, Relation.GE, rhs, CutOrigin.EXTENDED)

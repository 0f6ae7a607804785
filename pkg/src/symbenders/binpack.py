"""Multiple knapsack and two-dimensional rectangle bin packing as Benders masters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .lp import LinearProgram, LpStatus, Relation, solve_lp
from .mip import MasterModel, SlotCut
from .sdg import GroupPartition, Sdg, detect_group_partition, merge_sdgs, mip_sdg
from .symcuts import (
    AbstractCut,
    AssignmentLayout,
    ConcreteCut,
    CutKind,
    representative_vector,
)

_TOL = 1e-9


class InvalidInstance(ValueError):
    pass


class SubproblemUnbounded(ValueError):
    pass


class SubproblemInfeasible(ValueError):
    pass


@dataclass(frozen=True)
class BinPackInstance:
    """Either an MKP (``capacities``/``weights``) or a rectangle packing (``bins``/``items``)."""

    kind: str
    bins: tuple[tuple[float, float], ...] = ()
    items: tuple[tuple[float, float], ...] = ()
    capacities: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    costs: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind == "rectpack":
            if any(w <= 0 or h <= 0 for w, h in self.bins + self.items):
                raise InvalidInstance("dimensions must be positive")
            if self.bins and self.items:
                max_w = max(w for w, _ in self.bins)
                max_h = max(h for _, h in self.bins)
                for j, (w, h) in enumerate(self.items):
                    if w > max_w + _TOL or h > max_h + _TOL:
                        raise InvalidInstance(f"item {j} fits in no bin")
        elif self.kind == "mkp":
            if any(a <= 0 for a in self.weights) or any(b <= 0 for b in self.capacities):
                raise InvalidInstance("weights and capacities must be positive")
        else:
            raise InvalidInstance(f"unknown kind {self.kind!r}")
        if self.costs is not None:
            if len(self.costs) != self.num_bins or any(len(r) != self.num_items for r in self.costs):
                raise InvalidInstance("cost matrix must be bins x items")

    @classmethod
    def rectangle(cls, bins: Sequence[tuple[float, float]], items: Sequence[tuple[float, float]]) -> "BinPackInstance":
        return cls(
            "rectpack",
            bins=tuple((float(w), float(h)) for w, h in bins),
            items=tuple((float(w), float(h)) for w, h in items),
        )

    @classmethod
    def mkp(
        cls,
        capacities: Sequence[float],
        weights: Sequence[float],
        costs: Sequence[Sequence[float]] | None = None,
    ) -> "BinPackInstance":
        return cls(
            "mkp",
            capacities=tuple(float(b) for b in capacities),
            weights=tuple(float(a) for a in weights),
            costs=None if costs is None else tuple(tuple(float(c) for c in r) for r in costs),
        )

    @property
    def num_bins(self) -> int:
        return len(self.bins) if self.kind == "rectpack" else len(self.capacities)

    @property
    def num_items(self) -> int:
        return len(self.items) if self.kind == "rectpack" else len(self.weights)

    def area(self, j: int) -> float:
        w, h = self.items[j]
        return w * h

    def to_json(self) -> dict:
        if self.kind == "rectpack":
            data: dict = {
                "type": "rectpack",
                "bins": [{"W": w, "H": h} for w, h in self.bins],
                "items": [{"w": w, "h": h} for w, h in self.items],
            }
        else:
            data = {
                "type": "mkp",
                "bins": [{"beta": b} for b in self.capacities],
                "items": [{"a": a} for a in self.weights],
            }
        if self.costs is not None:
            data["costs"] = [list(r) for r in self.costs]
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "BinPackInstance":
        try:
            costs = data.get("costs")
            if data["type"] == "rectpack":
                inst = cls.rectangle([(b["W"], b["H"]) for b in data["bins"]], [(i["w"], i["h"]) for i in data["items"]])
                if costs is not None:
                    inst = cls("rectpack", inst.bins, inst.items, costs=tuple(tuple(map(float, r)) for r in costs))
                return inst
            if data["type"] == "mkp":
                return cls.mkp([b["beta"] for b in data["bins"]], [i["a"] for i in data["items"]], costs)
        except (KeyError, TypeError) as exc:
            raise InvalidInstance(f"malformed instance: {exc}") from exc
        raise InvalidInstance(f"unknown instance type {data.get('type')!r}")


# --------------------------------------------------------------------------
# master
# --------------------------------------------------------------------------
def build_master_binpack(inst: BinPackInstance, partition: GroupPartition | None = None) -> MasterModel:
    """Assignment master without any Benders rows; cuts arrive through the slot oracle.

    Rectangle packing minimises the number of used bins and carries the area
    and linking rows; the MKP master is the bare partitioning problem with
    assignment costs.
    """
    m, n = inst.num_bins, inst.num_items
    lp = LinearProgram(0, [], [], [])
    z = [[lp.add_var(inst.costs[i][j] if inst.costs else 0.0, 0.0, 1.0) for j in range(n)] for i in range(m)]
    integer = [v for row in z for v in row]
    if inst.kind == "rectpack":
        u = [lp.add_var(1.0, 0.0, 1.0) for _ in range(m)]
        integer += u
    for j in range(n):
        lp.add_row({z[i][j]: 1.0 for i in range(m)}, Relation.EQ, 1.0)
    if inst.kind == "rectpack":
        for i, (W, H) in enumerate(inst.bins):
            coeffs = {z[i][j]: inst.area(j) for j in range(n)}
            coeffs[u[i]] = -W * H
            lp.add_row(coeffs, Relation.LE, 0.0)
        for i in range(m):
            for j in range(n):
                lp.add_row({z[i][j]: 1.0, u[i]: -1.0}, Relation.LE, 0.0)
    model = MasterModel(lp, integer, AssignmentLayout(z, [GroupPartition.singletons(range(n))] * m))
    if partition is None:
        partition = item_partition(inst, model)
    model.layout.partitions = [partition] * m
    model.slot_oracle = _slot_oracle(inst, model.layout)
    return model


def _slot_oracle(inst: BinPackInstance, layout: AssignmentLayout):
    check = oracle_capacity if inst.kind == "mkp" else oracle_rectpack

    def oracle(i: int, support: list[int]) -> SlotCut | None:
        res = check(inst, i, support, layout.partitions[i])
        if not isinstance(res, AbstractCut):
            return None
        concrete = ConcreteCut({layout.z[i][j]: 1.0 for j in support}, Relation.LE, float(len(support) - 1))
        return SlotCut(res, concrete)

    return oracle


def _nogood(i: int, support: Sequence[int], partition: GroupPartition | None, n: int) -> AbstractCut:
    part = partition if partition is not None else GroupPartition.singletons(range(n))
    return AbstractCut(i, representative_vector(support, part), CutKind.NOGOOD)


# --------------------------------------------------------------------------
# oracles
# --------------------------------------------------------------------------
def oracle_capacity(
    inst: BinPackInstance, i: int, support: Sequence[int], partition: GroupPartition | None = None
) -> bool | AbstractCut:
    """True when the items fit the slot's capacity, else the no-good on the whole set."""
    if sum(inst.weights[j] for j in support) <= inst.capacities[i] + _TOL:
        return True
    return _nogood(i, support, partition, inst.num_items)


def oracle_rectpack(
    inst: BinPackInstance, i: int, support: Sequence[int], partition: GroupPartition | None = None
) -> dict[int, tuple[float, float]] | AbstractCut:
    """A placement of the items in bin ``i``, or the no-good on the whole set."""
    W, H = inst.bins[i]
    placement = pack_rectangles(W, H, [inst.items[j] for j in support])
    if placement is None:
        return _nogood(i, support, partition, inst.num_items)
    return {j: placement[k] for k, j in enumerate(support)}


def pack_rectangles(W: float, H: float, items: Sequence[tuple[float, float]]) -> list[tuple[float, float]] | None:
    """Exact orthogonal packing without rotation; bottom-left corners or None.

    Every feasible packing can be pushed down and left until each item rests
    on the floor or on another item's top edge and against the left wall or
    another item's right edge.  The items of such a packing can be placed one
    by one so that each item's supports come first, so a search over these
    contact positions is complete.
    """
    n = len(items)
    if n == 0:
        return []
    if any(w > W + _TOL or h > H + _TOL for w, h in items):
        return None
    if sum(w * h for w, h in items) > W * H + _TOL:
        return None
    # identical items are interchangeable; keep one representative per type
    types = sorted(set(items), key=lambda t: (-t[0] * t[1], -t[0], -t[1]))
    count = [sum(1 for it in items if it == t) for t in types]
    return _pack_types(W, H, tuple(types), tuple(count), items)


def _pack_types(W, H, types, count, items):
    placed: list[tuple[float, float, float, float]] = []
    left = list(count)
    failed: set[tuple] = set()

    def overlaps(x, y, w, h) -> bool:
        for px, py, pw, ph in placed:
            if x < px + pw - _TOL and px < x + w - _TOL and y < py + ph - _TOL and py < y + h - _TOL:
                return True
        return False

    def supported(x, y, w, h) -> bool:
        # must rest against the left wall or a placed right edge, and on the floor or a top edge
        left_ok = x <= _TOL or any(
            abs(px + pw - x) <= _TOL and py < y + h - _TOL and y < py + ph - _TOL for px, py, pw, ph in placed
        )
        if not left_ok:
            return False
        return y <= _TOL or any(
            abs(py + ph - y) <= _TOL and px < x + w - _TOL and x < px + pw - _TOL for px, py, pw, ph in placed
        )

    def key() -> tuple:
        return tuple(sorted((round(p[0], 9), round(p[1], 9), p[2], p[3]) for p in placed))

    def rec() -> bool:
        if not any(left):
            return True
        k = key()
        if k in failed:
            return False
        xs = sorted({0.0} | {px + pw for px, _, pw, _ in placed})
        ys = sorted({0.0} | {py + ph for _, py, _, ph in placed})
        for t, (w, h) in enumerate(types):
            if not left[t]:
                continue
            for y in ys:
                if y + h > H + _TOL:
                    break
                for x in xs:
                    if x + w > W + _TOL:
                        break
                    if overlaps(x, y, w, h) or not supported(x, y, w, h):
                        continue
                    placed.append((x, y, w, h))
                    left[t] -= 1
                    if rec():
                        return True
                    left[t] += 1
                    placed.pop()
        failed.add(k)
        return False

    if not rec():
        return None
    # hand the positions back in input order
    pool: dict[tuple[float, float], list[tuple[float, float]]] = {}
    for x, y, w, h in placed:
        pool.setdefault((w, h), []).append((x, y))
    return [pool[it].pop() for it in items]


def check_placement(W: float, H: float, items: Sequence[tuple[float, float]], pos: Sequence[tuple[float, float]]) -> bool:
    """In-bin and pairwise non-overlapping."""
    for (w, h), (x, y) in zip(items, pos):
        if x < -_TOL or y < -_TOL or x + w > W + _TOL or y + h > H + _TOL:
            return False
    for a in range(len(items)):
        for b in range(a + 1, len(items)):
            (wa, ha), (xa, ya) = items[a], pos[a]
            (wb, hb), (xb, yb) = items[b], pos[b]
            if xa < xb + wb - _TOL and xb < xa + wa - _TOL and ya < yb + hb - _TOL and yb < ya + ha - _TOL:
                return False
    return True


# --------------------------------------------------------------------------
# symmetry detection
# --------------------------------------------------------------------------
def build_sdg_binpack(inst: BinPackInstance, model: MasterModel) -> Sdg:
    """The master's constraint graph merged with one compact subproblem gadget per bin."""
    g = mip_sdg(model.lp, model.integer_vars)
    z = model.layout.z
    for i in range(inst.num_bins):
        gadget = Sdg()
        if inst.kind == "rectpack":
            W, H = inst.bins[i]
            anchor = gadget.add_anchor(("bin", W, H))
            for j, (w, h) in enumerate(inst.items):
                wn = gadget.add_node(("width",))
                hn = gadget.add_node(("height",))
                var = gadget.add_variable(z[i][j], g.colors[g.variable_nodes[z[i][j]]])
                gadget.add_edge(anchor, wn, w)
                gadget.add_edge(wn, hn, h)
                gadget.add_edge(hn, var)
        else:
            cap = gadget.add_anchor(("capacity", inst.capacities[i]))
            for j, a in enumerate(inst.weights):
                var = gadget.add_variable(z[i][j], g.colors[g.variable_nodes[z[i][j]]])
                gadget.add_edge(cap, var, a)
        g = merge_sdgs(g, gadget)
    return g


def item_partition(inst: BinPackInstance, model: MasterModel) -> GroupPartition:
    """Item groups certified on the master's SDG (columns of the first bin as candidates)."""
    if inst.num_bins == 0 or inst.num_items == 0:
        return GroupPartition.singletons(range(inst.num_items))
    z0 = model.layout.z[0]
    found = detect_group_partition(build_sdg_binpack(inst, model), z0)
    item_of = {v: j for j, v in enumerate(z0)}
    return found.map(item_of)


def equal_item_partition(inst: BinPackInstance) -> GroupPartition:
    """Items grouped by identical size and identical cost column."""
    keys: dict[tuple, list[int]] = {}
    for j in range(inst.num_items):
        size = inst.items[j] if inst.kind == "rectpack" else (inst.weights[j],)
        col = tuple(r[j] for r in inst.costs) if inst.costs else ()
        keys.setdefault((size, col), []).append(j)
    return GroupPartition.from_groups(keys.values())


# --------------------------------------------------------------------------
# classical Benders demo
# --------------------------------------------------------------------------
def classical_benders_cut(
    sub: LinearProgram, coupling: Sequence[Mapping[int, float]], zhat: Sequence[float]
) -> tuple[dict[int, float], float]:
    """Optimality cut ``x >= beta + alpha.z`` from the LP dual at ``zhat``.

    ``sub`` holds the rows ``D y (rel) f``; row ``r`` of the actual
    subproblem has right-hand side ``f_r - sum_k coupling[r][k] * z_k``.
    """
    lp = sub.copy()
    for row, c in zip(lp.rows, coupling):
        row.rhs = row.rhs - sum(a * zhat[k] for k, a in c.items())
    sol = solve_lp(lp)
    if sol.status is LpStatus.UNBOUNDED:
        raise SubproblemUnbounded("subproblem is unbounded")
    if sol.status is LpStatus.INFEASIBLE:
        raise SubproblemInfeasible("subproblem is infeasible")
    u = sol.duals
    beta = float(sum(u[r] * row.rhs for r, row in enumerate(sub.rows)))
    alpha: dict[int, float] = {}
    for r, c in enumerate(coupling):
        for k, a in c.items():
            alpha[k] = alpha.get(k, 0.0) - float(u[r]) * a
    return alpha, beta


def demo_subproblem() -> tuple[LinearProgram, list[dict[int, float]]]:
    """``min 5y + 3z : y + 2z = 2 - x, y, z >= 0`` coupled to the single master column 0."""
    sub = LinearProgram.nonneg([5.0, 3.0])
    sub.add_row({0: 1.0, 1: 2.0}, Relation.EQ, 2.0)
    return sub, [{0: 1.0}]

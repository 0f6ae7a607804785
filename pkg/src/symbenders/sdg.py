"""Symmetry detection graphs.

An :class:`Sdg` is an undirected graph with colored nodes and edges.  Some
nodes stand for master variables (``variable_nodes``); color-preserving
automorphisms restricted to those nodes are formulation symmetries.  Graphs
built for different parts of a model are combined with :func:`merge_sdgs`,
which fuses the nodes of shared variables.

Symmetry detection here is deliberately narrow: variables are grouped by 1-WL
color refinement and a group is only reported once every member can be swapped
with the group's first member by an explicitly constructed and verified
automorphism.  Stars of transpositions generate the full symmetric group on
each reported group, which is the structure the cut pools rely on.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from .lp import LinearProgram

_MISSING = object()


class ColorClash(ValueError):
    """Two graphs disagree on the color of a shared variable node."""


@dataclass
class Sdg:
    colors: list[Hashable] = field(default_factory=list)
    adj: list[dict[int, Hashable]] = field(default_factory=list)
    variable_nodes: dict[int, int] = field(default_factory=dict)
    anchors: set[int] = field(default_factory=set)

    def add_node(self, color: Hashable) -> int:
        self.colors.append(color)
        self.adj.append({})
        return len(self.colors) - 1

    def add_anchor(self, color: Hashable) -> int:
        node = self.add_node(color)
        self.anchors.add(node)
        return node

    def add_variable(self, var: int, color: Hashable) -> int:
        if var in self.variable_nodes:
            raise ValueError(f"variable {var} already has a node")
        node = self.add_node(color)
        self.variable_nodes[var] = node
        return node

    def add_edge(self, u: int, v: int, color: Hashable = None) -> None:
        if u == v:
            raise ValueError("self-loops are not supported")
        old = self.adj[u].get(v, _MISSING)
        if old is not _MISSING:
            # parallel edges collapse into one edge carrying the color multiset
            parts = list(old[1]) if isinstance(old, tuple) and old[:1] == ("multi",) else [old]
            color = ("multi", tuple(sorted(parts + [color], key=_color_key)))
        self.adj[u][v] = color
        self.adj[v][u] = color

    @property
    def num_nodes(self) -> int:
        return len(self.colors)

    def edges(self) -> list[tuple[int, int, Hashable]]:
        return [(u, v, c) for u, nb in enumerate(self.adj) for v, c in sorted(nb.items()) if u < v]

    def node_of(self, var: int) -> int:
        return self.variable_nodes[var]

    def is_anchored(self) -> bool:
        """Every node is reachable from an anchor without passing through a variable node."""
        var_nodes = set(self.variable_nodes.values())
        if self.anchors & var_nodes:
            return False
        seen = set(self.anchors)
        queue = deque(self.anchors)
        while queue:
            u = queue.popleft()
            for v in self.adj[u]:
                if v not in seen:
                    seen.add(v)
                    if v not in var_nodes:
                        queue.append(v)
        return len(seen) == self.num_nodes

    def copy(self) -> "Sdg":
        return Sdg(list(self.colors), [dict(a) for a in self.adj], dict(self.variable_nodes), set(self.anchors))


def _color_key(color: Hashable) -> tuple[str, str]:
    return (type(color).__name__, repr(color))


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint groups of interchangeable elements, each sorted ascending."""

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for g in self.groups:
            if not g:
                raise ValueError("empty group")
            if seen.intersection(g):
                raise ValueError("groups overlap")
            seen.update(g)

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[int]]) -> "GroupPartition":
        gs = [tuple(sorted(set(g))) for g in groups]
        gs = [g for g in gs if g]
        gs.sort()
        return cls(tuple(gs))

    @classmethod
    def singletons(cls, elements: Iterable[int]) -> "GroupPartition":
        return cls.from_groups([e] for e in elements)

    def group_of(self, element: int) -> int:
        lookup = self.__dict__.get("_lookup")
        if lookup is None:
            lookup = {e: gid for gid, g in enumerate(self.groups) for e in g}
            object.__setattr__(self, "_lookup", lookup)
        return lookup[element]

    @property
    def elements(self) -> list[int]:
        return sorted(e for g in self.groups for e in g)

    def meet(self, other: "GroupPartition") -> "GroupPartition":
        """Coarsest common refinement of two partitions of the same ground set."""
        buckets: dict[tuple[int, int], list[int]] = {}
        for e in self.elements:
            buckets.setdefault((self.group_of(e), other.group_of(e)), []).append(e)
        return GroupPartition.from_groups(buckets.values())

    def map(self, f: Mapping[int, int]) -> "GroupPartition":
        return GroupPartition.from_groups([f[e] for e in g] for g in self.groups)

    def __len__(self) -> int:
        return len(self.groups)


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------
def merge_sdgs(g1: Sdg, g2: Sdg) -> Sdg:
    """Disjoint union of ``g1`` and ``g2`` with shared variable nodes fused."""
    out = g1.copy()
    mapping: list[int] = []
    var_of = {node: var for var, node in g2.variable_nodes.items()}
    for node, color in enumerate(g2.colors):
        var = var_of.get(node)
        if var is not None and var in out.variable_nodes:
            target = out.variable_nodes[var]
            if out.colors[target] != color:
                raise ColorClash(f"variable {var}: {out.colors[target]!r} != {color!r}")
            mapping.append(target)
        elif var is not None:
            mapping.append(out.add_variable(var, color))
        else:
            mapping.append(out.add_node(color))
    for u, v, c in g2.edges():
        out.add_edge(mapping[u], mapping[v], c)
    out.anchors |= {mapping[a] for a in g2.anchors}
    return out


def mip_sdg(lp: LinearProgram, integer_vars: Iterable[int] = (), variables: Iterable[int] | None = None) -> Sdg:
    """Constraint/variable graph of ``lp`` with a single anchor linked to every row.

    Variable nodes are colored by (objective, bounds, integrality), row nodes
    by (relation, rhs), edges by the coefficient.  Variables in no row hang
    directly off the anchor.
    """
    ints = set(integer_vars)
    keep = range(lp.num_vars) if variables is None else sorted(set(variables))
    g = Sdg()
    anchor = g.add_anchor(("mip-anchor",))
    for j in keep:
        g.add_variable(j, ("var", lp.objective[j], lp.lower[j], lp.upper[j], j in ints))
    touched: set[int] = set()
    for row in lp.rows:
        if not row.coeffs:
            continue
        r = g.add_node(("row", row.rel.value, row.rhs))
        g.add_edge(anchor, r, "row")
        for j, a in sorted(row.coeffs.items()):
            if j not in g.variable_nodes:
                raise ValueError(f"row references variable {j} outside the graph")
            g.add_edge(r, g.variable_nodes[j], a)
            touched.add(j)
    for j in keep:
        if j not in touched:
            g.add_edge(anchor, g.variable_nodes[j], "free")
    return g


# --------------------------------------------------------------------------
# analysis
# --------------------------------------------------------------------------
def color_refinement(g: Sdg) -> list[int]:
    """Stable 1-WL coloring.  Class ids follow the sorted order of signatures."""
    palette = sorted({_color_key(c) for c in g.colors})
    index = {k: i for i, k in enumerate(palette)}
    cls = [index[_color_key(c)] for c in g.colors]
    edge_keys = [{v: _color_key(c) for v, c in nb.items()} for nb in g.adj]
    count = len(palette)
    for _ in range(g.num_nodes + 1):
        sigs = [
            (cls[u], tuple(sorted((edge_keys[u][v], cls[v]) for v in g.adj[u])))
            for u in range(g.num_nodes)
        ]
        order = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [order[s] for s in sigs]
        if len(order) == count:
            return new
        cls, count = new, len(order)
    return cls  # pragma: no cover - refinement stabilises within |V| rounds


def verify_automorphism(g: Sdg, perm: Sequence[int] | Mapping[int, int]) -> bool:
    """True iff ``perm`` preserves node colors, edges and edge colors.

    A mapping is read as a partial permutation that fixes every node not listed.
    """
    if isinstance(perm, Mapping):
        moved = {u: v for u, v in perm.items() if u != v}
        if sorted(moved) != sorted(moved.values()):
            return False
        full = None
    else:
        if sorted(perm) != list(range(g.num_nodes)):
            return False
        moved = {u: v for u, v in enumerate(perm) if u != v}
        full = perm

    def image(u: int) -> int:
        return full[u] if full is not None else moved.get(u, u)

    for u, v in moved.items():
        if g.colors[u] != g.colors[v]:
            return False
        if len(g.adj[u]) != len(g.adj[v]):
            return False
        target = g.adj[v]
        for w, c in g.adj[u].items():
            if target.get(image(w), _MISSING) != c:
                return False
    return True


def transposition_automorphism(
    g: Sdg,
    classes: Sequence[int],
    a: int,
    b: int,
    frozen: Iterable[int] = (),
    budget: int = 20000,
) -> dict[int, int] | None:
    """Extend the swap of nodes ``a`` and ``b`` to an involutive automorphism.

    Neighbors that are adjacent to both endpoints with equal edge colors stay
    fixed; private neighbors are paired depth-first by refined class, edge
    color and overlap of already-fixed neighborhoods.  Nodes in ``frozen``
    must stay fixed.  Returns the moved part of the permutation, or None.
    """
    if classes[a] != classes[b]:
        return None
    frozen = set(frozen)
    adj = g.adj
    stack: list[tuple[dict[int, int], list[int]]] = [({a: b, b: a}, [b, a])]
    steps = 0
    while stack:
        sigma, pending = stack.pop()
        ok = True
        while pending and ok:
            x = pending.pop()
            y = sigma[x]
            for n in sorted(adj[x]):
                steps += 1
                if steps > budget:
                    return None
                e = adj[x][n]
                if n in sigma:
                    if adj[y].get(sigma[n], _MISSING) != e:
                        ok = False
                        break
                    continue
                if adj[y].get(n, _MISSING) == e:
                    sigma[n] = n
                    continue
                if n in frozen:
                    ok = False
                    break
                options = []
                for m, em in adj[y].items():
                    if em != e or m in sigma or m in frozen or classes[m] != classes[n]:
                        continue
                    if any(
                        k in sigma and adj[m].get(sigma[k], _MISSING) != adj[n][k] for k in adj[n]
                    ):
                        continue
                    shared = sum(1 for k in adj[n] if k in adj[m])
                    options.append((-shared, m))
                if not options:
                    ok = False
                    break
                options.sort()
                for _, alt in reversed(options[1:3]):
                    branch = dict(sigma)
                    branch[n], branch[alt] = alt, n
                    stack.append((branch, pending + [x, n, alt]))
                m = options[0][1]
                sigma[n], sigma[m] = m, n
                pending.extend((n, m))
        if ok:
            moved = {u: v for u, v in sigma.items() if u != v}
            if verify_automorphism(g, moved):
                return moved
    return None


def detect_group_partition(g: Sdg, variables: Iterable[int] | None = None) -> GroupPartition:
    """Group master variables whose swaps are certified graph automorphisms.

    ``variables`` restricts the candidates (default: every variable of ``g``).
    Within a refinement class, each group is a star around its smallest
    variable: every member swaps with it while all other candidates of the
    class stay put.
    """
    classes = color_refinement(g)
    cand = sorted(g.variable_nodes) if variables is None else sorted(set(variables))
    by_class: dict[int, list[int]] = {}
    for var in cand:
        by_class.setdefault(classes[g.variable_nodes[var]], []).append(var)
    groups: list[list[int]] = []
    for members in by_class.values():
        nodes = {v: g.variable_nodes[v] for v in members}
        remaining = list(members)
        while remaining:
            root, rest = remaining[0], []
            group = [root]
            for v in remaining[1:]:
                frozen = [nodes[w] for w in members if w not in (root, v)]
                if transposition_automorphism(g, classes, nodes[root], nodes[v], frozen) is not None:
                    group.append(v)
                else:
                    rest.append(v)
            groups.append(group)
            remaining = rest
    return GroupPartition.from_groups(groups)


def to_dot(g: Sdg, classes: Sequence[int] | None = None) -> str:
    """Graphviz rendering; node labels are class ids and edge labels edge colors."""
    if classes is None:
        classes = color_refinement(g)
    var_of = {node: var for var, node in g.variable_nodes.items()}
    lines = ["graph sdg {"]
    for u in range(g.num_nodes):
        shape = "box" if u in var_of else ("doublecircle" if u in g.anchors else "circle")
        label = f"{classes[u]}" + (f"\\nv{var_of[u]}" if u in var_of else "")
        lines.append(f'  n{u} [label="{label}", shape={shape}];')
    for u, v, c in g.edges():
        lines.append(f'  n{u} -- n{v} [label="{"" if c is None else c}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

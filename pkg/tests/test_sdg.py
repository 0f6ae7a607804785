import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symbenders.lp import LinearProgram, Relation
from symbenders.sdg import (
    ColorClash,
    GroupPartition,
    Sdg,
    color_refinement,
    detect_group_partition,
    merge_sdgs,
    mip_sdg,
    to_dot,
    transposition_automorphism,
    verify_automorphism,
)

X1, X2, W1, W2 = 0, 1, 2, 3


def _master_graph() -> Sdg:
    lp = LinearProgram(4, [5.0, 5.0, 1.0, 1.0], [0.0] * 4, [math.inf] * 4, [])
    lp.add_row({X1: 1.0, X2: 1.0}, Relation.EQ, 1.0)
    return mip_sdg(lp)


def _subproblem_graph(x: int, w: int) -> Sdg:
    """Anchored graph of ``5y + 3z <= w`` subject to ``x + y + 2z = 2``."""
    g = Sdg()
    row = g.add_anchor(("row", "=", 2.0))
    xn = g.add_variable(x, ("var", 5.0, 0.0, math.inf, False))
    wn = g.add_variable(w, ("var", 1.0, 0.0, math.inf, False))
    y = g.add_node(("sub", 5.0))
    z = g.add_node(("sub", 3.0))
    g.add_edge(row, xn, 1.0)
    g.add_edge(row, y, 1.0)
    g.add_edge(row, z, 2.0)
    g.add_edge(row, wn, "epigraph")
    return g


def _benders_graph() -> Sdg:
    return merge_sdgs(merge_sdgs(_master_graph(), _subproblem_graph(X1, W1)), _subproblem_graph(X2, W2))


def star(k: int) -> tuple[Sdg, int, list[int]]:
    g = Sdg()
    c = g.add_anchor("c")
    leaves = []
    for j in range(k):
        leaves.append(g.add_variable(j, "leaf"))
        g.add_edge(c, leaves[-1], 1)
    return g, c, leaves


# -- merging --------------------------------------------------------------
def test_merge_fuses_shared_variables():
    g = _benders_graph()
    # master: anchor, row, x1, x2, w1, w2; each subproblem adds row, y, z
    assert g.num_nodes == 6 + 2 * 3
    assert g.variable_nodes.keys() == {X1, X2, W1, W2}
    assert g.is_anchored()


def test_merge_disjoint_is_additive():
    g1, _, _ = star(3)
    g2 = Sdg()
    a = g2.add_anchor("a")
    g2.add_edge(a, g2.add_variable(10, "leaf"), 1)
    merged = merge_sdgs(g1, g2)
    assert merged.num_nodes == g1.num_nodes + g2.num_nodes
    assert len(merged.edges()) == len(g1.edges()) + len(g2.edges())


def test_merge_with_copy_fuses_all_variable_nodes():
    g = _benders_graph()
    merged = merge_sdgs(g, g.copy())
    non_var = g.num_nodes - len(g.variable_nodes)
    assert merged.num_nodes == g.num_nodes + non_var
    assert merged.is_anchored()


def test_merge_color_clash():
    g1, _, _ = star(2)
    g2 = Sdg()
    a = g2.add_anchor("a")
    g2.add_edge(a, g2.add_variable(0, "other"), 1)
    with pytest.raises(ColorClash):
        merge_sdgs(g1, g2)


def test_anchored_detects_variable_cut_vertex():
    g = Sdg()
    a = g.add_anchor("a")
    v = g.add_variable(0, "v")
    far = g.add_node("far")
    g.add_edge(a, v)
    g.add_edge(v, far)
    assert not g.is_anchored()


def test_parallel_edges_keep_color_multiset():
    g = Sdg()
    u, v = g.add_node("u"), g.add_node("v")
    g.add_edge(u, v, 2.0)
    g.add_edge(u, v, 1.0)
    assert g.adj[u][v] == g.adj[v][u]
    assert g.adj[u][v][0] == "multi"


# -- refinement -----------------------------------------------------------
def test_refinement_star():
    g, c, leaves = star(5)
    cls = color_refinement(g)
    assert len(set(cls)) == 2
    assert len({cls[v] for v in leaves}) == 1
    assert cls[c] != cls[leaves[0]]


def test_refinement_path():
    g = Sdg()
    a, b, c = (g.add_node("n") for _ in range(3))
    g.add_edge(a, b)
    g.add_edge(b, c)
    cls = color_refinement(g)
    assert cls[a] == cls[c] != cls[b]


def test_refinement_benders_example():
    g = _benders_graph()
    cls = color_refinement(g)
    vn = g.variable_nodes
    assert cls[vn[X1]] == cls[vn[X2]]
    assert cls[vn[W1]] == cls[vn[W2]]
    assert cls[vn[X1]] != cls[vn[W1]]
    subs = [u for u, c in enumerate(g.colors) if c == ("sub", 3.0)]
    assert len(subs) == 2 and cls[subs[0]] == cls[subs[1]]


def test_refinement_is_deterministic_and_refines_input_colors():
    g = _benders_graph()
    cls = color_refinement(g)
    assert cls == color_refinement(g.copy())
    for u in range(g.num_nodes):
        for v in range(g.num_nodes):
            if cls[u] == cls[v]:
                assert g.colors[u] == g.colors[v]


# -- detection ------------------------------------------------------------
def test_detect_benders_example():
    part = detect_group_partition(_benders_graph())
    assert part.groups == ((X1, X2), (W1, W2))


def test_benders_swap_preserves_two_block_lp_points():
    """Swapping the two halves of the two-block demo LP maps feasible points to feasible points of equal cost."""
    c = np.array([5, 5, 5, 5, 3, 3], dtype=float)
    A = np.array([[1, 1, 0, 0, 0, 0], [1, 0, 1, 0, 2, 0], [0, 1, 0, 1, 0, 2]], dtype=float)
    b = np.array([1, 2, 2], dtype=float)
    perm = [1, 0, 3, 2, 5, 4]
    rng = random.Random(3)
    for _ in range(200):
        x1 = rng.random()
        z1, z2 = rng.uniform(0, (2 - x1) / 2), rng.uniform(0, (1 + x1) / 2)
        pt = np.array([x1, 1 - x1, 2 - x1 - 2 * z1, 1 + x1 - 2 * z2, z1, z2])
        assert np.allclose(A @ pt, b) and np.all(pt >= -1e-12)
        sw = pt[perm]
        assert np.allclose(A @ sw, b)
        assert math.isclose(c @ sw, c @ pt)


def test_detect_distinct_colors_gives_singletons():
    g = Sdg()
    a = g.add_anchor("a")
    for j in range(4):
        g.add_edge(a, g.add_variable(j, f"c{j}"), 1)
    assert detect_group_partition(g) == GroupPartition.singletons(range(4))


def test_detect_refuses_unequal_gadgets():
    """Same local colors but different private structure must not be grouped."""
    g = Sdg()
    a = g.add_anchor("a")
    v0, v1 = g.add_variable(0, "v"), g.add_variable(1, "v")
    g.add_edge(a, v0, 1)
    g.add_edge(a, v1, 1)
    p0, p1 = g.add_node("p"), g.add_node("p")
    g.add_edge(v0, p0, 1)
    g.add_edge(v1, p1, 2)
    assert detect_group_partition(g).groups == ((0,), (1,))


def test_detect_star_and_transpositions_verify():
    g, c, leaves = star(4)
    part = detect_group_partition(g)
    assert part.groups == ((0, 1, 2, 3),)
    cls = color_refinement(g)
    for v in leaves[1:]:
        sigma = transposition_automorphism(g, cls, leaves[0], v, [u for u in leaves[1:] if u != v])
        assert sigma == {leaves[0]: v, v: leaves[0]}
        assert verify_automorphism(g, sigma)


def test_detect_swaps_private_gadgets():
    g = Sdg()
    a = g.add_anchor("a")
    for j in range(3):
        v = g.add_variable(j, "v")
        g.add_edge(a, v, "link")
        gadget = g.add_node("g")
        g.add_edge(a, gadget, "link2")
        g.add_edge(v, gadget, 1)
    assert detect_group_partition(g).groups == ((0, 1, 2),)


# -- verification ---------------------------------------------------------
def test_verify_identity_and_bad_swaps():
    g, c, leaves = star(3)
    assert verify_automorphism(g, list(range(g.num_nodes)))
    perm = list(range(g.num_nodes))
    perm[c], perm[leaves[0]] = leaves[0], c
    assert not verify_automorphism(g, perm)
    perm = list(range(g.num_nodes))
    perm[leaves[0]], perm[leaves[1]] = leaves[1], leaves[0]
    assert verify_automorphism(g, perm)
    assert not verify_automorphism(g, [0, 0, 1, 2])


def test_to_dot_lists_every_edge():
    g = _benders_graph()
    dot = to_dot(g)
    assert dot.startswith("graph sdg {")
    assert dot.count(" -- ") == len(g.edges())


# -- partitions -----------------------------------------------------------
def test_partition_meet_and_lookup():
    p = GroupPartition.from_groups([[0, 1, 2], [3, 4]])
    q = GroupPartition.from_groups([[0, 1], [2, 3], [4]])
    assert p.meet(q).groups == ((0, 1), (2,), (3,), (4,))
    assert p.group_of(4) == 1
    with pytest.raises(ValueError):
        GroupPartition(((0, 1), (1, 2)))


# -- soundness on random graphs -------------------------------------------
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_detected_groups_are_certified(seed):
    rng = random.Random(seed)
    g = Sdg()
    a = g.add_anchor("a")
    nvar = rng.randint(2, 6)
    rows = [g.add_node(("row", rng.randint(0, 1))) for _ in range(rng.randint(1, 4))]
    for r in rows:
        g.add_edge(a, r, "row")
    for j in range(nvar):
        v = g.add_variable(j, ("v", rng.randint(0, 1)))
        for r in rows:
            if rng.random() < 0.6:
                g.add_edge(r, v, rng.randint(1, 2))
        if not g.adj[v]:
            g.add_edge(a, v, "free")
    part = detect_group_partition(g)
    cls = color_refinement(g)
    for group in part.groups:
        nodes = [g.variable_nodes[v] for v in group]
        movers = set(g.variable_nodes.values())
        for other in nodes[1:]:
            frozen = movers - {nodes[0], other}
            sigma = transposition_automorphism(g, cls, nodes[0], other, frozen)
            assert sigma is not None and verify_automorphism(g, sigma)

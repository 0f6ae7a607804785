import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from symbenders.lp import Relation
from symbenders.sdg import GroupPartition
from symbenders.symcuts import (
    AbstractCut,
    AssignmentLayout,
    CutKind,
    CutOrigin,
    CutPool,
    MissingBlock,
    RepresentativeVector,
    UnknownItem,
    build_zeta_block,
    concrete_from_members,
    dominance_match_nogood,
    ef_cut_from_abstract,
    register_cut,
    representative_vector,
    separate_pool_sorted,
    sorted_match,
)

from oracles import brute_force_group_match, enumerate_family, random_partition


def _rep(*counts):
    return RepresentativeVector(tuple(counts))


def _layout(n, epigraph=None, partition=None):
    part = partition or GroupPartition.singletons(range(n))
    return AssignmentLayout([list(range(n))], [part], epigraph)


# -- representative vectors -----------------------------------------------
def test_representative_vector_examples():
    part = GroupPartition.from_groups([[0, 1, 2], [3, 4]])
    assert representative_vector([0, 1, 3], part) == _rep(2, 1)
    assert representative_vector([], part) == _rep(0, 0)
    assert representative_vector(range(5), part) == _rep(3, 2)
    with pytest.raises(UnknownItem):
        representative_vector([7], part)


# -- sorted matching ------------------------------------------------------
def test_sorted_match_example():
    part = GroupPartition.from_groups([[0, 1, 2]])
    value, permuted = sorted_match([5.0, 2.0, 2.0], [0.0, 1.0, 1.0], part)
    assert value == 7.0
    assert permuted == [2.0, 5.0, 2.0]
    assert value == brute_force_group_match([5.0, 2.0, 2.0], [0.0, 1.0, 1.0], part)


def test_sorted_match_zero_point_and_singletons():
    part = GroupPartition.from_groups([[0, 1, 2]])
    assert sorted_match([3.0, 1.0, 2.0], [0.0] * 3, part)[0] == 0.0
    singles = GroupPartition.singletons(range(3))
    alpha, z = [3.0, 1.0, 2.0], [0.5, 1.0, 0.0]
    assert sorted_match(alpha, z, singles) == (sum(a * b for a, b in zip(alpha, z)), alpha)


def test_sorted_match_exactness_sample():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(1, 8)
        part = random_partition(rng, n)
        alpha = [float(rng.randint(-5, 5)) for _ in range(n)]
        # dyadic values keep every partial sum exact
        z = [rng.randint(0, 16) / 16 for _ in range(n)]
        assert sorted_match(alpha, z, part)[0] == brute_force_group_match(alpha, z, part)


def test_pool_separation_makespan_family():
    # one group of three jobs, cut built for two of them with theta 5 and makespan 9
    part = GroupPartition.from_groups([[0, 1, 2]])
    layout = _layout(3, epigraph=3, partition=part)
    cut = AbstractCut(0, _rep(2), CutKind.MAKESPAN, 9.0, ((0, 5.0),))
    # jobs 1 and 2 assigned, T = 4: the member on {1, 2} requires T >= 9
    found = separate_pool_sorted(cut, [0.0, 1.0, 1.0], 4.0, part, layout)
    assert found is not None and found.origin is CutOrigin.POOL
    x = [0.0, 1.0, 1.0, 4.0]
    assert found.violation(x) == pytest.approx(5.0)
    assert found.coeffs == {3: 1.0, 1: -5.0, 2: -5.0}
    assert separate_pool_sorted(cut, [0.0, 1.0, 1.0], 9.0, part, layout) is None
    # only one job assigned: bound 9 - 5 = 4
    assert separate_pool_sorted(cut, [1.0, 0.0, 0.0], 4.0, part, layout) is None


def test_pool_separation_nogood_family():
    part = GroupPartition.from_groups([[0, 1, 2], [3]])
    layout = _layout(4, partition=part)
    cut = AbstractCut(0, _rep(2, 1), CutKind.NOGOOD)
    found = separate_pool_sorted(cut, [0.0, 1.0, 1.0, 1.0], 0.0, part, layout)
    assert found.coeffs == {1: 1.0, 2: 1.0, 3: 1.0} and found.rhs == 2.0
    assert separate_pool_sorted(cut, [1.0, 1.0, 1.0, 0.0], 0.0, part, layout) is None


# -- dominance ------------------------------------------------------------
def test_dominance_examples():
    part = GroupPartition.from_groups([[0, 1, 2], [3, 4, 5]])
    pool = CutPool()
    assert dominance_match_nogood(pool, 0, [0, 1, 3], part) is None
    stored = AbstractCut(0, _rep(2, 0), CutKind.NOGOOD)
    pool.register(stored)
    hit = dominance_match_nogood(pool, 0, [2, 1, 5], part)
    assert hit == (stored, {0: [1, 2]})
    assert dominance_match_nogood(pool, 0, [0, 3, 4, 5], part) is None
    assert dominance_match_nogood(pool, 1, [0, 1, 2], part) is None


def test_nogood_lifting_matches_capacity_oracle():
    """A set containing an overweight subset is overweight as well."""
    rng = random.Random(5)
    for _ in range(300):
        w = [rng.randint(1, 6) for _ in range(7)]
        cap = rng.randint(5, 15)
        base = [j for j in range(7) if rng.random() < 0.5]
        if sum(w[j] for j in base) <= cap:
            continue
        sup = sorted(set(base) | {j for j in range(7) if rng.random() < 0.5})
        assert sum(w[j] for j in sup) > cap


# -- pool bookkeeping -----------------------------------------------------
def test_register_dedup():
    pool = CutPool()
    a = AbstractCut(0, _rep(1, 1), CutKind.NOGOOD)
    assert register_cut(pool, a) and not register_cut(pool, a)
    assert len(pool) == 1
    register_cut(pool, AbstractCut(1, _rep(1, 1), CutKind.NOGOOD))
    register_cut(pool, AbstractCut(0, _rep(2, 1), CutKind.NOGOOD))
    assert len(pool) == 3
    assert '"kind": "NoGood"' in pool.to_json()


def test_abstract_cut_invariants():
    assert AbstractCut(0, _rep(2, 1), CutKind.NOGOOD).rhs == 2.0
    with pytest.raises(ValueError):
        AbstractCut(0, _rep(2, 1), CutKind.MAKESPAN, 9.0, ((0, 5.0),))


def test_concrete_member_makespan_row():
    layout = _layout(2, epigraph=2)
    cut = AbstractCut(0, _rep(1, 1), CutKind.MAKESPAN, 9.0, ((0, 5.0), (1, 4.0)))
    c = concrete_from_members(cut, layout, {0: [0], 1: [1]}, CutOrigin.ORACLE)
    # T - 5 z0 - 4 z1 >= 0
    assert c.rel is Relation.GE and c.rhs == 0.0 and c.coeffs == {2: 1.0, 0: -5.0, 1: -4.0}


# -- zeta blocks ----------------------------------------------------------
def _block_feasible(block, values):
    return all(row.violation(values) <= 1e-9 for row in block.linking_rows)


@pytest.mark.parametrize("size", [1, 2, 3, 4])
def test_zeta_block_forces_sorted_indicators(size):
    z = list(range(size))
    zeta = list(range(size, 2 * size))
    block = build_zeta_block(0, 0, z, zeta)
    assert len(block.linking_rows) == 2 * size
    for bits in itertools.product([0, 1], repeat=size):
        s = sum(bits)
        feasible = [
            zb for zb in itertools.product([0, 1], repeat=size) if _block_feasible(block, list(bits) + list(zb))
        ]
        assert feasible == [tuple(1 if k <= s else 0 for k in range(1, size + 1))]


def test_zeta_block_named_examples():
    block = build_zeta_block(0, 0, [0, 1, 2], [3, 4, 5])
    assert _block_feasible(block, [1, 1, 0, 1, 1, 0])
    assert _block_feasible(block, [0, 0, 0, 0, 0, 0])
    assert _block_feasible(block, [1, 1, 1, 1, 1, 1])
    assert not _block_feasible(block, [1, 1, 0, 1, 0, 0])


def test_ef_nogood_row():
    blocks = {(0, 0): build_zeta_block(0, 0, [0, 1], [10, 11]), (0, 1): build_zeta_block(0, 1, [2], [12])}
    row = ef_cut_from_abstract(AbstractCut(0, _rep(2, 1), CutKind.NOGOOD), blocks)
    assert row.coeffs == {11: 1.0, 12: 1.0} and row.rel is Relation.LE and row.rhs == 1.0
    single = ef_cut_from_abstract(AbstractCut(0, _rep(0, 1), CutKind.NOGOOD), blocks)
    assert single.coeffs == {12: 1.0} and single.rhs == 0.0
    with pytest.raises(MissingBlock):
        ef_cut_from_abstract(AbstractCut(1, _rep(1, 0), CutKind.NOGOOD), blocks)


def test_ef_makespan_row():
    blocks = {(0, 0): build_zeta_block(0, 0, [0, 1], [10, 11])}
    cut = AbstractCut(0, _rep(2), CutKind.MAKESPAN, 9.0, ((0, 5.0),))
    row = ef_cut_from_abstract(cut, blocks, epigraph=20)
    # T >= 9 - 5(1 - zeta1) - 5(1 - zeta2)  <=>  T - 5 zeta1 - 5 zeta2 >= -1
    assert row.coeffs == {20: 1.0, 10: -5.0, 11: -5.0}
    assert row.rel is Relation.GE and row.rhs == -1.0


# -- zeta link: EF violation iff some family member is violated -------------
def _ef_link_case(rng):
    n = rng.randint(1, 8)
    part = random_partition(rng, n)
    kind = rng.choice([CutKind.NOGOOD, CutKind.MAKESPAN])
    counts = [rng.randint(0, len(g)) for g in part.groups]
    if sum(counts) == 0:
        counts[0] = 1
    rep = RepresentativeVector(tuple(counts))
    theta = tuple((g, float(rng.randint(1, 6))) for g in rep.support()) if kind is CutKind.MAKESPAN else ()
    cut = AbstractCut(0, rep, kind, float(rng.randint(5, 30)), theta)
    T = n
    zeta_base = n + 1
    blocks, nxt = {}, zeta_base
    for gid, g in enumerate(part.groups):
        blocks[(0, gid)] = build_zeta_block(0, gid, list(g), list(range(nxt, nxt + len(g))))
        nxt += len(g)
    layout = AssignmentLayout([list(range(n))], [part], T)
    return n, part, cut, blocks, layout, nxt


def _implied_point(z, xhat, part, blocks, n, width):
    x = [0.0] * width
    x[:n] = z
    x[n] = xhat
    for gid, g in enumerate(part.groups):
        s = sum(z[j] for j in g)
        for k, v in enumerate(blocks[(0, gid)].zeta_vars, start=1):
            x[v] = 1.0 if s >= k else 0.0
    return x


def test_zeta_link_exhaustive_family():
    rng = random.Random(2024)
    for _ in range(500):
        n, part, cut, blocks, layout, width = _ef_link_case(rng)
        z = [float(rng.randint(0, 1)) for _ in range(n)]
        xhat = float(rng.randint(0, 30))
        x = _implied_point(z, xhat, part, blocks, n, width)
        ef = ef_cut_from_abstract(cut, blocks, layout.epigraph)
        ef_violated = ef.violation(x) > 1e-9
        members = [concrete_from_members(cut, layout, m, CutOrigin.ORACLE) for m in enumerate_family(cut, part)]
        assert ef_violated == any(m.violation(x) > 1e-9 for m in members)
        for block in blocks.values():
            assert _block_feasible(block, x)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_pool_separation_is_most_violated_member(seed):
    rng = random.Random(seed)
    n, part, cut, blocks, layout, _ = _ef_link_case(rng)
    zhat = [rng.choice([0.0, 1.0, round(rng.random(), 3)]) for _ in range(n)]
    xhat = float(rng.randint(0, 30))
    x = zhat + [xhat]
    members = [concrete_from_members(cut, layout, m, CutOrigin.ORACLE) for m in enumerate_family(cut, part)]
    worst = max(m.violation(x) for m in members)
    found = separate_pool_sorted(cut, zhat, xhat, part, layout)
    if found is None:
        assert worst <= 1e-7 + 1e-9
    else:
        assert found.violation(x) == pytest.approx(worst, abs=1e-9)

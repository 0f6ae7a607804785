"""LP-based branch-and-cut with lazy Benders separation at integral solutions."""
from __future__ import annotations

import enum
import heapq
import itertools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .lp import EPS_INT, LinearProgram, LpState, LpStatus, Relation, Row, make_row
from .sdg import GroupPartition
from .symcuts import (
    AbstractCut,
    AssignmentLayout,
    ConcreteCut,
    CutKind,
    CutOrigin,
    CutPool,
    ZetaBlock,
    build_zeta_block,
    concrete_from_members,
    nogood_member_within,
    ef_cut_from_abstract,
    separate_pool_sorted,
)

EPS_CUT = 1e-6
MAX_SYMBREAK_SLOTS = 40


class MalformedModel(ValueError):
    pass


class TooManySlots(ValueError):
    pass


class Mode(str, enum.Enum):
    PLAIN = "plain"
    POOL = "pool"
    EFROW = "efrow"
    EFCONS = "efcons"

    @property
    def uses_pool(self) -> bool:
        return self is not Mode.PLAIN

    @property
    def extended(self) -> bool:
        return self in (Mode.EFROW, Mode.EFCONS)


class MipStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    NODE_LIMIT = "NodeLimit"
    TIME_LIMIT = "TimeLimit"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SlotCut:
    """Oracle answer for one slot: the stored family and the z-space row on the actual set."""

    abstract: AbstractCut
    concrete: ConcreteCut


SlotOracle = Callable[[int, list[int]], "SlotCut | None"]
GenericOracle = Callable[[np.ndarray], list[ConcreteCut]]


@dataclass
class MasterModel:
    lp: LinearProgram
    integer_vars: list[int]
    layout: AssignmentLayout | None = None
    slot_oracle: SlotOracle | None = None
    oracle: GenericOracle | None = None
    pool: CutPool | None = None
    zeta_blocks: dict[tuple[int, int], ZetaBlock] = field(default_factory=dict)
    symbreak_rows: list[Row] = field(default_factory=list)
    symbreak_partition: GroupPartition | None = None
    info: dict = field(default_factory=dict)

    def validate(self) -> None:
        n = self.lp.num_vars
        try:
            self.lp.validate()
        except ValueError as exc:
            raise MalformedModel(str(exc)) from exc
        if any(not 0 <= j < n for j in self.integer_vars):
            raise MalformedModel("integer variable index out of range")
        if self.layout is not None:
            if any(not 0 <= v < n for row in self.layout.z for v in row):
                raise MalformedModel("layout references unknown variable")
            if self.layout.epigraph is not None and not 0 <= self.layout.epigraph < n:
                raise MalformedModel("epigraph variable out of range")
        for block in self.zeta_blocks.values():
            if any(not 0 <= v < n for v in block.zeta_vars + block.member_vars):
                raise MalformedModel("zeta block references unknown variable")
        if self.slot_oracle is not None and self.layout is None:
            raise MalformedModel("slot oracle needs an assignment layout")


@dataclass(frozen=True)
class SolveSettings:
    mode: Mode = Mode.PLAIN
    symbreak: bool = False
    node_limit: int = 10_000_000
    time_limit_sec: float = 60.0
    row_age_limit: int = 5
    trace: bool = False

    def __post_init__(self) -> None:
        if self.node_limit <= 0 or self.time_limit_sec <= 0 or self.row_age_limit <= 0:
            raise ValueError("limits must be positive")


@dataclass
class MipResult:
    status: MipStatus
    incumbent: np.ndarray | None
    objective: float
    nodes: int = 0
    oracle_calls: int = 0
    pool_hits: int = 0
    separated_solutions: int = 0
    cuts_added: int = 0
    time_sec: float = 0.0
    cut_time_sec: float = 0.0
    oracle_time_sec: float = 0.0
    pool_size: int = 0
    pool: CutPool | None = None
    trace: list[np.ndarray] = field(default_factory=list)
    emitted: list[tuple[np.ndarray, ConcreteCut]] = field(default_factory=list)


# --------------------------------------------------------------------------
# model augmentation
# --------------------------------------------------------------------------
def build_symbreak_rows(partition: GroupPartition, z: Sequence[Sequence[int]]) -> list[Row]:
    """Lexicographically ordered columns within each group of interchangeable items.

    ``z[i][j]`` is the variable of item ``j`` on slot ``i``.  Column weights are
    powers of two, exact in double precision up to 40 slots.
    """
    m = len(z)
    if m > MAX_SYMBREAK_SLOTS:
        raise TooManySlots(m)
    rows = []
    for group in partition.groups:
        for j, k in zip(group, group[1:]):
            coeffs: dict[int, float] = {}
            for i in range(m):
                w = float(2 ** (m - 1 - i))
                coeffs[z[i][j]] = coeffs.get(z[i][j], 0.0) + w
                coeffs[z[i][k]] = coeffs.get(z[i][k], 0.0) - w
            rows.append(make_row(coeffs, Relation.GE, 0.0))
    return rows


def augment_model(model: MasterModel, settings: SolveSettings) -> MasterModel:
    """Copy of ``model`` with sorted-indicator blocks and symmetry-breaking rows as requested."""
    model.validate()
    lp = model.lp.copy()
    integer_vars = list(model.integer_vars)
    blocks: dict[tuple[int, int], ZetaBlock] = {}
    layout = model.layout
    if settings.mode.extended:
        if layout is None:
            raise MalformedModel("extended formulations need an assignment layout")
        for i, part in enumerate(layout.partitions):
            for gid, group in enumerate(part.groups):
                zetas = [lp.add_var(0.0, 0.0, 1.0) for _ in group]
                integer_vars.extend(zetas)
                block = build_zeta_block(i, gid, [layout.z[i][j] for j in group], zetas)
                lp.rows.extend(block.linking_rows)
                blocks[(i, gid)] = block
    symrows: list[Row] = []
    sym_part = None
    if settings.symbreak and layout is not None:
        sym_part = model.symbreak_partition
        if sym_part is None:
            sym_part = layout.partitions[0]
            for p in layout.partitions[1:]:
                sym_part = sym_part.meet(p)
        symrows = build_symbreak_rows(sym_part, layout.z)
        lp.rows.extend(symrows)
    return replace(
        model,
        lp=lp,
        integer_vars=integer_vars,
        pool=(model.pool if model.pool is not None else CutPool()) if settings.mode.uses_pool else model.pool,
        zeta_blocks=blocks or dict(model.zeta_blocks),
        symbreak_rows=symrows,
        symbreak_partition=sym_part,
    )


# --------------------------------------------------------------------------
# separation
# --------------------------------------------------------------------------
@dataclass
class SeparationStats:
    oracle_calls: int = 0
    pool_hits: int = 0
    separated_solutions: int = 0
    oracle_time_sec: float = 0.0
    cut_time_sec: float = 0.0
    # abstract cuts registered by the most recent call, for permanent EF rows
    new_abstract: list[AbstractCut] = field(default_factory=list)


def _violated(cut: ConcreteCut, x: np.ndarray) -> bool:
    return cut.violation(x) >= EPS_CUT


def _in_mode_space(cut: AbstractCut, model: MasterModel, mode: Mode, z_cut: ConcreteCut) -> ConcreteCut:
    if mode.extended:
        return ef_cut_from_abstract(cut, model.zeta_blocks, model.layout.epigraph)
    return z_cut


def _pool_scan(model: MasterModel, x: np.ndarray, mode: Mode) -> list[ConcreteCut]:
    layout = model.layout
    out = []
    for i in range(layout.num_slots):
        part = layout.partitions[i]
        support = None
        for cut in model.pool.slot_cuts(i):
            if cut.kind is CutKind.NOGOOD:
                if support is None:
                    support = layout.support(x, i)
                hit = nogood_member_within(cut, support, part)
                if hit is None:
                    continue
                z_cut = concrete_from_members(cut, layout, hit, CutOrigin.POOL)
            else:
                xhat = float(x[layout.epigraph])
                z_cut = separate_pool_sorted(cut, layout.slot_values(x, i), xhat, part, layout, CutOrigin.POOL)
                if z_cut is None:
                    continue
            emitted = _in_mode_space(cut, model, mode, z_cut)
            if _violated(emitted, x):
                out.append(emitted)
                break
    return out


def separate_at_integral(
    model: MasterModel, solution: Sequence[float], settings: SolveSettings, stats: SeparationStats | None = None
) -> list[ConcreteCut]:
    """Cuts violated by an integral master solution; pool first, oracles on a miss."""
    stats = stats if stats is not None else SeparationStats()
    start = time.perf_counter()
    x = np.asarray(solution, dtype=float)
    mode = settings.mode
    stats.separated_solutions += 1
    stats.new_abstract = []
    cuts: list[ConcreteCut] = []
    if mode.uses_pool and model.pool is not None and model.layout is not None:
        cuts = _pool_scan(model, x, mode)
        stats.pool_hits += len(cuts)
    if not cuts:
        if model.slot_oracle is not None:
            layout = model.layout
            for i in range(layout.num_slots):
                support = layout.support(x, i)
                t0 = time.perf_counter()
                answer = model.slot_oracle(i, support)
                stats.oracle_time_sec += time.perf_counter() - t0
                stats.oracle_calls += 1
                if answer is None:
                    continue
                if mode.uses_pool and model.pool.register(answer.abstract):
                    stats.new_abstract.append(answer.abstract)
                emitted = _in_mode_space(answer.abstract, model, mode, answer.concrete)
                if _violated(emitted, x):
                    cuts.append(emitted)
        if model.oracle is not None:
            t0 = time.perf_counter()
            found = model.oracle(x)
            stats.oracle_time_sec += time.perf_counter() - t0
            stats.oracle_calls += 1
            cuts.extend(c for c in found if _violated(c, x))
    stats.cut_time_sec += time.perf_counter() - start
    return cuts


# --------------------------------------------------------------------------
# branch-and-cut
# --------------------------------------------------------------------------
class RowAging:
    """Removable LP rows dropped after ``limit`` consecutive solves with nonzero slack."""

    def __init__(self, state: LpState, limit: int):
        self.state = state
        self.limit = limit
        self.ages: dict[int, int] = {}

    def track(self, handle: int) -> None:
        self.ages[handle] = 0

    def after_solve(self) -> list[int]:
        removed = []
        for h in list(self.ages):
            self.ages[h] = self.ages[h] + 1 if self.state.slack(h) ** 2 > 1e-12 else 0
            if self.ages[h] >= self.limit:
                self.state.remove_row(h)
                del self.ages[h]
                removed.append(h)
        return removed


def _objective_is_integral(lp: LinearProgram, integer_vars: set[int]) -> bool:
    return all(c == 0.0 or (j in integer_vars and float(c).is_integer()) for j, c in enumerate(lp.objective))


def _most_fractional(x: np.ndarray, integer_vars: np.ndarray) -> int | None:
    vals = x[integer_vars]
    frac = np.abs(vals - np.round(vals))
    if frac.size == 0 or frac.max() <= EPS_INT:
        return None
    score = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
    best = score.max()
    # lowest index among the most fractional
    cand = integer_vars[score >= best - 1e-12]
    return int(cand.min())


def solve_bnc(model: MasterModel, settings: SolveSettings | None = None) -> MipResult:
    """Best-bound branch-and-cut; Benders cuts are separated only at integral LP solutions."""
    settings = settings or SolveSettings()
    work = augment_model(model, settings)
    clock = time.perf_counter()
    deadline = clock + settings.time_limit_sec
    state = LpState(work.lp)
    int_vars = np.array(sorted(set(work.integer_vars)), dtype=int)
    int_set = set(int(j) for j in int_vars)
    # original integer variables are branched on before zeta variables
    primary = np.array(sorted(set(model.integer_vars)), dtype=int)
    secondary = np.array(sorted(int_set - set(model.integer_vars)), dtype=int)
    integral_obj = _objective_is_integral(work.lp, int_set)
    root_lb = list(work.lp.lower)
    root_ub = list(work.lp.upper)
    stats = SeparationStats()
    aging = RowAging(state, settings.row_age_limit)
    result = MipResult(MipStatus.INFEASIBLE, None, math.inf)
    incumbent: np.ndarray | None = None
    best = math.inf

    def prunes(bound: float) -> bool:
        if not math.isfinite(best):
            return False
        if integral_obj:
            return math.ceil(bound - 1e-6) >= best - 1e-9
        return bound >= best - 1e-9

    counter = itertools.count()
    heap: list[tuple[float, int, tuple[tuple[int, float, float], ...]]] = [(-math.inf, next(counter), ())]
    applied: dict[int, tuple[float, float]] = {}
    status = None

    def apply(changes: tuple[tuple[int, float, float], ...]) -> None:
        target = {j: (lo, hi) for j, lo, hi in changes}
        for j in list(applied):
            if j not in target:
                state.set_bounds(j, root_lb[j], root_ub[j])
                del applied[j]
        for j, bnd in target.items():
            if applied.get(j) != bnd:
                state.set_bounds(j, *bnd)
                applied[j] = bnd

    while heap:
        if result.nodes >= settings.node_limit:
            status = MipStatus.NODE_LIMIT
            break
        if time.perf_counter() > deadline:
            status = MipStatus.TIME_LIMIT
            break
        parent_bound, _, changes = heapq.heappop(heap)
        if prunes(parent_bound):
            continue
        result.nodes += 1
        apply(changes)
        while True:
            sol = state.solve(warm=True)
            if sol.status is LpStatus.UNBOUNDED:
                raise MalformedModel("master relaxation is unbounded")
            if sol.status is LpStatus.INFEASIBLE:
                break
            if settings.mode is Mode.EFROW:
                aging.after_solve()
            if prunes(sol.objective_value):
                break
            x = np.asarray(sol.primal)
            j = _most_fractional(x, primary)
            if j is None:
                j = _most_fractional(x, secondary)
            if j is not None:
                v = x[j]
                lo, hi = state.bounds(j)
                base = [c for c in changes if c[0] != j]
                down = tuple(sorted(base + [(j, lo, math.floor(v))]))
                up = tuple(sorted(base + [(j, math.ceil(v), hi)]))
                heapq.heappush(heap, (sol.objective_value, next(counter), down))
                heapq.heappush(heap, (sol.objective_value, next(counter), up))
                break
            xr = x.copy()
            xr[int_vars] = np.round(xr[int_vars])
            if settings.trace:
                result.trace.append(xr.copy())
            cuts = separate_at_integral(work, xr, settings, stats)
            permanent: set[tuple] = set()
            if settings.mode is Mode.EFCONS:
                for ab in stats.new_abstract:
                    cut = ef_cut_from_abstract(ab, work.zeta_blocks, work.layout.epigraph)
                    if cut.key() not in permanent:
                        permanent.add(cut.key())
                        state.add_row(cut.to_row())
                        result.cuts_added += 1
            for cut in cuts:
                if settings.trace:
                    result.emitted.append((xr, cut))
                if cut.key() in permanent:
                    continue
                h = state.add_row(cut.to_row())
                result.cuts_added += 1
                if settings.mode is Mode.EFROW:
                    aging.track(h)
            if not cuts:
                obj = float(np.dot(work.lp.objective, xr))
                if obj < best - 1e-9:
                    best, incumbent = obj, xr
                break
            if time.perf_counter() > deadline:
                status = MipStatus.TIME_LIMIT
                break
        if status is not None:
            break
    if status is None:
        status = MipStatus.OPTIMAL if incumbent is not None else MipStatus.INFEASIBLE
    result.status = status
    result.incumbent = None if incumbent is None else incumbent[: model.lp.num_vars]
    result.objective = best
    result.oracle_calls = stats.oracle_calls
    result.pool_hits = stats.pool_hits
    result.separated_solutions = stats.separated_solutions
    result.cut_time_sec = stats.cut_time_sec
    result.oracle_time_sec = stats.oracle_time_sec
    result.pool_size = len(work.pool) if work.pool is not None else 0
    result.pool = work.pool
    result.time_sec = time.perf_counter() - clock
    return result

"""Seeded instance generators with identical-item batches.

Randomness comes from SplitMix64 (Steele, Lea and Flood's constants) so that
an instance is fully determined by its seed and its :class:`GenSpec`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .binpack import BinPackInstance
from .scheduling import SchedulingInstance, item_partition

_MASK = (1 << 64) - 1
BIN_SIDE = 15.0
TOOLS = 10
MAX_TOOLSET = 5


class SplitMix64:
    """64-bit SplitMix generator."""

    GAMMA = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def randint(self, lo: int, hi: int) -> int:
        return lo + self.below(hi - lo + 1)

    def tenths(self, lo: int, hi: int) -> float:
        """Uniform value on the one-decimal grid of ``[lo, hi]``."""
        return self.randint(10 * lo, 10 * hi) / 10.0

    def subset(self, population: int, k: int) -> frozenset[int]:
        """Uniform ``k``-subset of ``{1..population}`` (partial Fisher-Yates)."""
        pool = list(range(1, population + 1))
        for t in range(k):
            u = t + self.below(population - t)
            pool[t], pool[u] = pool[u], pool[t]
        return frozenset(pool[:k])

    def split(self) -> "SplitMix64":
        return SplitMix64(self.next_u64())


class Family(str, enum.Enum):
    RECTANGLE = "rectpack"
    SCHEDULING = "scheduling"
    MKP = "mkp"


@dataclass(frozen=True)
class GenSpec:
    seed: int
    family: Family
    batches: int
    batch_size: int
    slots: int | None = None  # bins (default: one per item) or machines (default 3)

    def __post_init__(self) -> None:
        if self.batches < 1 or self.batch_size < 1:
            raise ValueError("batches and batch_size must be at least 1")


def _labels(batches: int, batch_size: int) -> list[int]:
    return [b for b in range(batches) for _ in range(batch_size)]


def gen_rectpack(spec: GenSpec) -> tuple[BinPackInstance, list[int]]:
    """Square 15x15 bins and ``batches`` batches of identical rectangles.

    Batch sizes are redrawn when they repeat an earlier batch, so the batch
    labels are exactly the classes of identical items.
    """
    rng = SplitMix64(spec.seed)
    sizes: list[tuple[float, float]] = []
    while len(sizes) < spec.batches:
        wh = (rng.tenths(1, 10), rng.tenths(1, 10))
        if wh not in sizes:
            sizes.append(wh)
    labels = _labels(spec.batches, spec.batch_size)
    items = [sizes[b] for b in labels]
    bins = len(items) if spec.slots is None else spec.slots
    return BinPackInstance.rectangle([(BIN_SIDE, BIN_SIDE)] * bins, items), labels


def gen_mkp(spec: GenSpec) -> tuple[BinPackInstance, list[int]]:
    """MKP with integer weights and costs in ``[1, 10]`` shared per batch.

    Capacities split 110-140% of the total weight as evenly as integers allow,
    so most but not all draws are feasible.
    """
    rng = SplitMix64(spec.seed)
    weights: list[float] = []
    while len(weights) < spec.batches:
        a = float(rng.randint(1, 10))
        if a not in weights:
            weights.append(a)
    labels = _labels(spec.batches, spec.batch_size)
    bins = 3 if spec.slots is None else spec.slots
    total = sum(weights[b] for b in labels)
    slack = rng.randint(110, 140) / 100.0
    caps = [float(max(1, round(total * slack / bins + rng.randint(-2, 2)))) for _ in range(bins)]
    batch_cost = [[float(rng.randint(1, 10)) for _ in range(spec.batches)] for _ in range(bins)]
    costs = [[row[b] for b in labels] for row in batch_cost]
    return BinPackInstance.mkp(caps, [weights[b] for b in labels], costs), labels


def symmetric_difference_setups(toolsets: list[frozenset[int]]) -> list[list[float]]:
    """``s[j][k] = |C_j ^ C_k|`` with job 0 tool-free and zero setup back into 0."""
    n0 = len(toolsets)
    return [[0.0 if k == 0 else float(len(toolsets[j] ^ toolsets[k])) for k in range(n0)] for j in range(n0)]


def gen_scheduling(spec: GenSpec) -> tuple[SchedulingInstance, list[int]]:
    """Identical machines; each batch shares a processing time and a tool set.

    A draw whose batches are not pairwise distinguishable by the job
    equivalence (possible for tiny batches) is discarded and redrawn.
    """
    rng = SplitMix64(spec.seed)
    machines = 3 if spec.slots is None else spec.slots
    labels = _labels(spec.batches, spec.batch_size)
    while True:
        batches = []
        while len(batches) < spec.batches:
            p = rng.tenths(1, 10)
            tools = rng.subset(TOOLS, rng.randint(0, MAX_TOOLSET))
            if (p, tools) not in batches:
                batches.append((p, tools))
        p_row = [0.0] + [batches[b][0] for b in labels]
        s = symmetric_difference_setups([frozenset()] + [batches[b][1] for b in labels])
        inst = SchedulingInstance.create([p_row] * machines, [s] * machines)
        expected = sorted(tuple(j for j, l in enumerate(labels) if l == b) for b in range(spec.batches))
        if sorted(item_partition(inst, 0).groups) == expected:
            return inst, labels


def generate(spec: GenSpec):
    if spec.family is Family.RECTANGLE:
        return gen_rectpack(spec)
    if spec.family is Family.SCHEDULING:
        return gen_scheduling(spec)
    return gen_mkp(spec)

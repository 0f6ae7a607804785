"""Run (instance, setting) matrices and aggregate them with shifted geometric means."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .binpack import BinPackInstance, build_master_binpack
from .mip import MipResult, MipStatus, Mode, SolveSettings, solve_bnc
from .scheduling import SchedulingInstance, build_master_scheduling

OBJ_TOL = 1e-6


class EmptyInput(ValueError):
    pass


class InstanceError(ValueError):
    pass


class ObjectiveMismatch(RuntimeError):
    pass


def shifted_geometric_mean(values: Iterable[float], shift: float = 1.0) -> float:
    vals = [float(v) for v in values]
    if not vals:
        raise EmptyInput("shifted geometric mean of no values")
    if any(v + shift <= 0 for v in vals):
        raise ValueError("values + shift must be positive")
    return math.exp(math.fsum(math.log(v + shift) for v in vals) / len(vals)) - shift


@dataclass(frozen=True)
class Setting:
    mode: Mode
    symbreak: bool

    @property
    def label(self) -> str:
        return f"{self.mode.value}/{'sb' if self.symbreak else 'nosb'}"

    @classmethod
    def parse(cls, text: str) -> "Setting":
        """``mode`` or ``mode:on|off``."""
        mode, _, sb = text.partition(":")
        try:
            m = Mode(mode.lower())
        except ValueError:
            raise InstanceError(f"unknown mode {mode!r}") from None
        if sb not in ("", "on", "off"):
            raise InstanceError(f"symbreak must be on or off, got {sb!r}")
        return cls(m, sb == "on")


ALL_SETTINGS = tuple(Setting(m, sb) for m in Mode for sb in (False, True))


@dataclass
class RunRecord:
    instance: str
    setting: str
    symbreak: bool
    status: str
    objective: float
    nodes: int
    separated_solutions: int
    oracle_calls: int
    pool_hits: int
    time_sec: float
    cut_time_sec: float
    oracle_time_sec: float
    error: str = ""

    @property
    def solved(self) -> bool:
        return self.status in (MipStatus.OPTIMAL.value, MipStatus.INFEASIBLE.value)


DETERMINISTIC_COLUMNS = (
    "instance", "setting", "symbreak", "status", "objective",
    "nodes", "separated_solutions", "oracle_calls", "pool_hits", "error",
)
TIMING_COLUMNS = ("instance", "setting", "symbreak", "time_sec", "cut_time_sec", "oracle_time_sec")


# --------------------------------------------------------------------------
# instances
# --------------------------------------------------------------------------
Instance = BinPackInstance | SchedulingInstance


def instance_from_json(data: Mapping) -> Instance:
    kind = data.get("type") if isinstance(data, Mapping) else None
    if kind in ("rectpack", "mkp"):
        return BinPackInstance.from_json(data)
    if kind == "scheduling":
        return SchedulingInstance.from_json(data)
    raise InstanceError(f"unknown instance type {kind!r}")


def load_instance(path: str | Path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InstanceError(f"cannot read {path}: {exc}") from exc
    try:
        return instance_from_json(data)
    except ValueError as exc:
        raise InstanceError(f"{path}: {exc}") from exc


def load_dir(directory: str | Path) -> list[tuple[str, Instance]]:
    """Instance files of a directory in name order; label sidecars are skipped."""
    paths = sorted(p for p in Path(directory).glob("*.json") if not p.name.endswith(".labels.json"))
    if not paths:
        raise InstanceError(f"no instance files in {directory}")
    return [(p.stem, load_instance(p)) for p in paths]


def build_model(inst: Instance):
    if isinstance(inst, SchedulingInstance):
        return build_master_scheduling(inst)
    return build_master_binpack(inst)


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------
def solve_instance(inst: Instance, setting: Setting, time_limit: float = 60.0, node_limit: int = 10_000_000) -> MipResult:
    settings = SolveSettings(mode=setting.mode, symbreak=setting.symbreak, time_limit_sec=time_limit, node_limit=node_limit)
    return solve_bnc(build_model(inst), settings)


def run_one(name: str, inst: Instance, setting: Setting, time_limit: float = 60.0, node_limit: int = 10_000_000) -> RunRecord:
    try:
        r = solve_instance(inst, setting, time_limit, node_limit)
    except Exception as exc:  # recorded, the matrix keeps going
        return RunRecord(name, setting.mode.value, setting.symbreak, "Error", math.nan, 0, 0, 0, 0, 0.0, 0.0, 0.0,
                         f"{type(exc).__name__}: {exc}")
    return RunRecord(
        name, setting.mode.value, setting.symbreak, r.status.value, r.objective, r.nodes,
        r.separated_solutions, r.oracle_calls, r.pool_hits, r.time_sec, r.cut_time_sec, r.oracle_time_sec,
    )


def check_agreement(records: Sequence[RunRecord]) -> None:
    """Every setting that finished must report the same optimum (or infeasibility) per instance."""
    by_instance: dict[str, list[RunRecord]] = {}
    for rec in records:
        if rec.solved:
            by_instance.setdefault(rec.instance, []).append(rec)
    for name, recs in by_instance.items():
        ref = recs[0]
        for rec in recs[1:]:
            same = rec.status == ref.status and (
                rec.status == MipStatus.INFEASIBLE.value or abs(rec.objective - ref.objective) <= OBJ_TOL * (1 + abs(ref.objective))
            )
            if not same:
                raise ObjectiveMismatch(
                    f"instance {name}: {ref.setting}/sb={ref.symbreak} gives {ref.status} {ref.objective!r} "
                    f"but {rec.setting}/sb={rec.symbreak} gives {rec.status} {rec.objective!r}"
                )


def run_matrix(
    instances: Sequence[tuple[str, Instance]],
    settings: Sequence[Setting] = ALL_SETTINGS,
    time_limit: float = 60.0,
    node_limit: int = 10_000_000,
    check: bool = True,
) -> list[RunRecord]:
    records = [run_one(name, inst, s, time_limit, node_limit) for name, inst in instances for s in settings]
    if check:
        check_agreement(records)
    return records


# --------------------------------------------------------------------------
# aggregation and output
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class AggregateRow:
    setting: str
    symbreak: bool
    runs: int
    solved: int
    time_sec: float
    cut_time_sec: float
    nodes: float
    separated_solutions: float
    oracle_calls: float

    @property
    def label(self) -> str:
        return f"{self.setting}/{'sb' if self.symbreak else 'nosb'}"


def aggregate(records: Sequence[RunRecord]) -> list[AggregateRow]:
    """One row per setting in first-seen order; node counts use shift 10, the rest shift 1."""
    groups: dict[tuple[str, bool], list[RunRecord]] = {}
    for rec in records:
        groups.setdefault((rec.setting, rec.symbreak), []).append(rec)
    rows = []
    for (setting, sb), recs in groups.items():
        rows.append(AggregateRow(
            setting, sb, len(recs), sum(r.solved for r in recs),
            shifted_geometric_mean([r.time_sec for r in recs], 1.0),
            shifted_geometric_mean([r.cut_time_sec for r in recs], 1.0),
            shifted_geometric_mean([r.nodes for r in recs], 10.0),
            shifted_geometric_mean([r.separated_solutions for r in recs], 1.0),
            shifted_geometric_mean([r.oracle_calls for r in recs], 1.0),
        ))
    return rows


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv(records: Sequence[RunRecord], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([_fmt(getattr(rec, c)) for c in columns])
    return buf.getvalue()


def records_csv(records: Sequence[RunRecord]) -> str:
    """Per-run table without wall-clock columns, byte-identical across reruns."""
    return _csv(records, DETERMINISTIC_COLUMNS)


def timing_csv(records: Sequence[RunRecord]) -> str:
    return _csv(records, TIMING_COLUMNS)


def read_records(deterministic: str, timing: str | None = None) -> list[RunRecord]:
    det = list(csv.DictReader(io.StringIO(deterministic)))
    tim = list(csv.DictReader(io.StringIO(timing))) if timing else [{}] * len(det)
    types = {f.name: f.type for f in fields(RunRecord)}
    out = []
    for d, t in zip(det, tim):
        row = {**d, **t}
        kw = {}
        for name, typ in types.items():
            raw = row.get(name, "0" if typ in ("int", "float") else "")
            if typ == "bool":
                kw[name] = raw == "1"
            elif typ == "int":
                kw[name] = int(raw)
            elif typ == "float":
                kw[name] = float(raw)
            else:
                kw[name] = raw
        out.append(RunRecord(**kw))
    return out


def format_table(rows: Sequence[AggregateRow]) -> str:
    header = ["setting", "#solved", "time", "cut-time", "nodes", "#sepa", "oracle"]
    body = [
        [r.label, f"{r.solved}/{r.runs}", f"{r.time_sec:.3f}", f"{r.cut_time_sec:.3f}",
         f"{r.nodes:.1f}", f"{r.separated_solutions:.1f}", f"{r.oracle_calls:.1f}"]
        for r in rows
    ]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = []
    for k, line in enumerate([header] + body):
        cells = [line[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(line[1:], widths[1:])]
        lines.append("  ".join(cells))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"

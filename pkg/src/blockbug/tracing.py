"""Omniscient trace: every executed statement is recorded together with a
full post-execution state snapshot, so any recorded moment can be restored.

Trace shape rules:

- one entry per executed statement block (hats included);
- waiting blocks (wait, glide, say-for-secs, ...) produce exactly two
  entries — the initial and the final execution state — no matter how many
  ticks pass in between;
- monitor refreshes produce no entries.

The trace also records every injected event with the coordinates needed to
re-inject it at the identical point during a replay: the number of entries
that existed at injection time and the tick the event was scheduled for.
Replaying the base snapshot plus this event script reproduces the run
bit-for-bit (the replay-oracle property the tests lean on).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import TraceFileError, TraceIndexError
from .model import Project, block_lookup, contains_touching_mouse, serialize_project
from .values import Value
from .vm import (
    MAX_IDLE_TICKS,
    BlockEvent,
    ParamRecord,
    Vm,
    frac_str,
    parse_frac,
    restore,
)

TRACE_FORMAT = "nbt"
TRACE_VERSION = 1
DEFAULT_SOFT_CAP = 200_000


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def project_hash(project: Project) -> str:
    return hashlib.sha256(serialize_project(project).encode("utf-8")).hexdigest()[:16]


@dataclass
class TraceEntry:
    """One recorded statement execution; field numbers follow the snapshot
    item list in the trace docs (docs/trace-format.md)."""

    index: int
    block_id: str                       # (1)
    opcode: str                         # (2)
    phase: str                          # complete | start | end
    params: dict[str, Value]            # (3) names + (5) evaluated values
    variables_read: list[str]           # (4)
    records: list[ParamRecord]          # (6)
    exec_time: Fraction                 # (7)
    instance_id: int                    # (8)
    post_state: dict                    # (9) full canonical snapshot
    exec_state: dict
    error: str | None = None
    mouse_position: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        doc = {
            "index": self.index,
            "block": self.block_id,
            "op": self.opcode,
            "phase": self.phase,
            "params": self.params,
            "reads": list(self.variables_read),
            "records": [r.to_dict() for r in self.records],
            "time": frac_str(self.exec_time),
            "instance": self.instance_id,
            "state": self.post_state,
            "exec": self.exec_state,
            "error": self.error,
        }
        if self.mouse_position is not None:
            doc["mouse"] = list(self.mouse_position)
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "TraceEntry":
        mouse = doc.get("mouse")
        return TraceEntry(
            index=doc["index"],
            block_id=doc["block"],
            opcode=doc["op"],
            phase=doc["phase"],
            params=dict(doc["params"]),
            variables_read=list(doc["reads"]),
            records=[ParamRecord.from_dict(r) for r in doc["records"]],
            exec_time=parse_frac(doc["time"]),
            instance_id=doc["instance"],
            post_state=doc["state"],
            exec_state=doc["exec"],
            error=doc["error"],
            mouse_position=(mouse[0], mouse[1]) if mouse else None,
        )

    @property
    def seconds(self) -> float:
        return float(self.exec_time)


@dataclass
class RecordedEvent:
    """An injected event plus the coordinates needed for exact replay."""

    tick: int          # tick whose boundary dispatches the event
    after_entry: int   # entries recorded when the event was injected
    event: dict

    def to_dict(self) -> dict:
        return {"tick": self.tick, "after": self.after_entry, "event": self.event}

    @staticmethod
    def from_dict(doc: dict) -> "RecordedEvent":
        return RecordedEvent(doc["tick"], doc["after"], dict(doc["event"]))


class Tracer:
    """Drives the interpreter and records the omniscient trace.

    The tracer owns the stepping loop so that each entry is snapshotted at
    the precise moment its statement finished, before the clock moves on.
    """

    def __init__(self, vm: Vm, enabled: bool = True,
                 soft_cap: int = DEFAULT_SOFT_CAP):
        self.vm = vm
        self.enabled = enabled
        self.soft_cap = soft_cap
        self.entries: list[TraceEntry] = []
        self.events: list[RecordedEvent] = []
        self.base = vm.canonical()
        self.hash = project_hash(vm.project)
        self.cap_hit = False

    # -- lifecycle -----------------------------------------------------------

    def toggle_tracing(self, on: bool) -> None:
        """Switching tracing on or off clears the trace; repeating the
        current setting is a no-op."""
        if on == self.enabled:
            return
        self.enabled = on
        self.clear("toggle")

    def clear(self, cause: str = "manual") -> None:
        self.entries = []
        self.events = []
        self.base = self.vm.canonical()
        self.cap_hit = False
        if cause == "code-edit":
            self.hash = project_hash(self.vm.project)

    def press_green_flag(self) -> None:
        self.vm.press_green_flag()
        self.clear("green-flag")

    def inject(self, event: dict) -> None:
        """Inject an input event (validating it) and remember it for replay."""
        self.vm.inject_event(event)
        self.events.append(RecordedEvent(
            tick=self.vm.tick_no + 1, after_entry=len(self.entries),
            event=dict(event)))

    # -- stepping --------------------------------------------------------------

    def step_statement(self, max_idle_ticks: int = MAX_IDLE_TICKS) -> list[BlockEvent]:
        """Run until exactly one statement executes, recording it. Returns []
        when the program finished, stalled, or the trace cap was reached."""
        if self.cap_hit:
            return []
        idle = 0
        while True:
            batch = self.vm._run_turn_step()
            if batch is not None:
                self._record(batch)
                return batch
            if self.vm.finished():
                return []
            self.vm._tick_boundary()
            idle += 1
            if idle > max_idle_ticks:
                return []

    def advance_tick(self) -> list[BlockEvent]:
        """Drain the current tick (recording every statement) and cross the
        boundary into the next one."""
        out: list[BlockEvent] = []
        while not self.cap_hit and (batch := self.vm._run_turn_step()) is not None:
            self._record(batch)
            out.extend(batch)
        self.vm._tick_boundary()
        return out

    def run_script(self, ticks: int, timed_events: list[dict] = ()) -> list[BlockEvent]:
        """Run whole ticks until the virtual tick counter reaches ``ticks``,
        injecting each timed event ({"tick": t, "event": {...}}, t >= 1) just
        before the boundary that starts tick t."""
        by_tick: dict[int, list[dict]] = {}
        for rec in timed_events:
            by_tick.setdefault(int(rec["tick"]), []).append(rec["event"])
        out: list[BlockEvent] = []
        while self.vm.tick_no < ticks:
            for event in by_tick.get(self.vm.tick_no + 1, []):
                self.inject(event)
            out.extend(self.advance_tick())
        return out

    # -- recording ---------------------------------------------------------------

    def _record(self, batch: list[BlockEvent]) -> None:
        if not self.enabled:
            return
        for event in batch:
            if event.kind != "block":
                continue  # monitor refreshes never enter the trace
            if len(self.entries) >= self.soft_cap:
                self.cap_hit = True
                return
            self.entries.append(self._entry_for(event))

    def _entry_for(self, event: BlockEvent) -> TraceEntry:
        vm = self.vm
        block = event.block
        mouse = None
        if contains_touching_mouse(block):
            mouse = (vm.mouse["x"], vm.mouse["y"])
        return TraceEntry(
            index=len(self.entries),
            block_id=block.id,
            opcode=event.block.opcode,
            phase=event.phase,
            params=dict(event.params),
            variables_read=self._reads(event.records, event.block),
            records=list(event.records),
            exec_time=vm.clock,
            instance_id=event.instance_id,
            post_state=vm.canonical(),
            exec_state=vm.exec_state(),
            error=event.error,
            mouse_position=mouse,
        )

    def _reads(self, records: list[ParamRecord], block) -> list[str]:
        """Item (4): variable/list names actually read while evaluating the
        statement's inputs, walked from the ParamRecord tree."""
        names: list[str] = []

        def visit(record: ParamRecord) -> None:
            key = {"data_variable": "VARIABLE",
                   "data_itemoflist": "LIST",
                   "data_lengthoflist": "LIST",
                   "data_listcontainsitem": "LIST",
                   "data_listcontents": "LIST"}.get(record.opcode)
            if key is not None:
                try:
                    _, _, b = block_lookup(self.vm.project, record.block_id)
                    name = b.fields.get(key, "")
                except Exception:
                    name = ""
                if name and name not in names:
                    names.append(name)
            for child in record.children:
                visit(child)

        for record in records:
            visit(record)
        if block.opcode == "data_changevariable":
            name = block.fields.get("VARIABLE", "")
            if name and name not in names:
                names.append(name)
        return names

    # -- time travel ----------------------------------------------------------------

    def restore_state(self, index: int) -> Vm:
        """A fresh interpreter equal to the state right after entry ``index``."""
        if not 0 <= index < len(self.entries):
            raise TraceIndexError(
                f"trace index {index} out of range (0..{len(self.entries) - 1})")
        return restore(self.vm.project, self.entries[index].post_state)

    def truncate(self, index: int) -> int:
        """Drop every entry after ``index`` (resume-from-past). Returns the
        new length."""
        if not 0 <= index < len(self.entries):
            raise TraceIndexError(
                f"trace index {index} out of range (0..{len(self.entries) - 1})")
        del self.entries[index + 1:]
        # events injected after the cut point belong to the discarded future
        self.events = [e for e in self.events if e.after_entry <= index]
        self.cap_hit = False
        return len(self.entries)


def replay_to(project: Project, base: dict, events: list[RecordedEvent],
              count: int, max_idle_ticks: int = MAX_IDLE_TICKS) -> Vm:
    """Re-run from the base snapshot until ``count`` entries worth of
    statements have executed, re-injecting recorded events at their original
    coordinates. This is the independent oracle for restore_state."""
    vm = restore(project, base)
    pending = sorted(events, key=lambda e: (e.after_entry, e.tick))
    cursor = 0
    recorded = 0

    def inject_due() -> None:
        nonlocal cursor
        while (cursor < len(pending)
               and pending[cursor].after_entry <= recorded
               and pending[cursor].tick == vm.tick_no + 1):
            vm.pending_events.append(dict(pending[cursor].event))
            cursor += 1

    idle = 0
    while recorded < count:
        # injections fire only here: after the previous statement's snapshot
        # was taken and before anything else runs, mirroring the original
        inject_due()
        batch = vm._run_turn_step()
        if batch is not None:
            recorded += sum(1 for e in batch if e.kind == "block")
            idle = 0
            continue
        if vm.finished() and cursor >= len(pending):
            break
        vm._tick_boundary()
        idle += 1
        if idle > max_idle_ticks:
            break
    return vm


# -- trace files (.nbt.jsonl) ------------------------------------------------------


def export_trace(tracer: Tracer) -> str:
    header = {
        "format": TRACE_FORMAT,
        "version": TRACE_VERSION,
        "project": tracer.hash,
        "seed": tracer.vm.seed,
        "quantum": "1/30",
        "enabled": tracer.enabled,
        "base": tracer.base,
        "events": [e.to_dict() for e in tracer.events],
    }
    lines = [canonical_json(header)]
    lines.extend(canonical_json(e.to_dict()) for e in tracer.entries)
    return "\n".join(lines) + "\n"


def import_trace(project: Project, text: str) -> Tracer:
    lines = [line for line in text.split("\n") if line.strip()]
    if not lines:
        raise TraceFileError("empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise TraceFileError(f"corrupt trace header: {e}") from e
    if header.get("format") != TRACE_FORMAT:
        raise TraceFileError(f"not a trace file (format={header.get('format')!r})")
    if header.get("version") != TRACE_VERSION:
        raise TraceFileError(f"unsupported trace version {header.get('version')!r}")
    if header.get("project") != project_hash(project):
        raise TraceFileError("trace was recorded against a different project")
    entries = []
    for n, line in enumerate(lines[1:], start=2):
        try:
            entries.append(TraceEntry.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise TraceFileError(f"corrupt trace entry at line {n}: {e}") from e
    state = entries[-1].post_state if entries else header["base"]
    vm = restore(project, state)
    tracer = Tracer(vm, enabled=header.get("enabled", True))
    tracer.base = header["base"]
    tracer.events = [RecordedEvent.from_dict(d) for d in header.get("events", [])]
    tracer.entries = entries
    return tracer

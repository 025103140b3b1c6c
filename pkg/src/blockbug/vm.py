"""Deterministic interpreter: threads, virtual time, events, clones, sensing.

Scheduling (normative):

- Time advances in ticks of QUANTUM = 1/30 s; the clock moves at the end of a
  tick, so every block executed during tick k carries time k/30.
- Within a tick every thread gets one turn, in thread-list order; a turn runs
  whole statements until the thread yields (end of a loop iteration), starts
  waiting, or finishes. New threads spawned mid-tick are appended and get
  their first turn in the same tick.
- Thread list order is spawn order; spawns triggered by one event happen in
  canonical order: stage first, sprites in declaration order, clones in
  creation order, scripts in file order.
- Injected events are queued and dispatched at the next tick boundary.

Failsoft: runtime faults (division by zero, bad list indices, unknown
variables) never raise; the block becomes a no-op or yields a neutral value
and the block event carries an error note.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import EventRejectedError, UnknownInstanceError
from .model import (
    Block,
    Project,
    Script,
    Target,
    iter_statements,
)
from .raster import (
    closest_pair,
    color_mask,
    edge_mask,
    instance_mask,
    mask_positions,
    mouse_mask,
    render_stage,
)
from .values import (
    Value,
    compare,
    is_whole,
    normalize_direction,
    to_bool,
    to_number,
    to_string,
)

QUANTUM = Fraction(1, 30)
CLONE_CAP = 300
MAX_IDLE_TICKS = 600  # ~20 virtual seconds without any block executing


class BreakpointHalt(Exception):
    """Raised before a breakpointed statement executes; carries the halt site.
    Control flow, not an error: the interpreter state is untouched and the
    same statement runs next once the breakpoint is stepped past."""

    def __init__(self, block_id: str, thread_id: int, instance_id: int):
        super().__init__(block_id)
        self.block_id = block_id
        self.thread_id = thread_id
        self.instance_id = instance_id


def frac_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def parse_frac(s: str) -> Fraction:
    n, _, d = s.partition("/")
    return Fraction(int(n), int(d or "1"))


def seconds_to_ticks(secs: float) -> int:
    """Wait durations round up to whole ticks; every wait lasts >= 1 tick."""
    if not math.isfinite(secs) or secs <= 0:
        return 1
    exact = Fraction(secs).limit_denominator(1_000_000_000)
    return max(1, math.ceil(exact / QUANTUM))


class CountedRng:
    """Seeded RNG whose state snapshot is just (seed, draws); restoring
    replays the generator, which keeps snapshots canonical and tiny."""

    def __init__(self, seed: int, draws: int = 0):
        self.seed = seed
        self.draws = 0
        self._random = random.Random(seed)
        for _ in range(draws):
            self.draw()

    def draw(self) -> float:
        self.draws += 1
        return self._random.random()

    def pick_random(self, a: Value, b: Value) -> Value:
        lo, hi = to_number(a), to_number(b)
        whole = is_whole(a) and is_whole(b)
        if lo > hi:
            lo, hi = hi, lo
        r = self.draw()
        if whole:
            lo_i, hi_i = int(lo), int(hi)
            return lo_i + min(int(r * (hi_i - lo_i + 1)), hi_i - lo_i)
        return lo + r * (hi - lo)


@dataclass
class ParamRecord:
    """Recorded evaluation of one reporter/Boolean block (trace item (6))."""

    block_id: str
    opcode: str
    value: Value
    children: list["ParamRecord"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "block_id": self.block_id,
            "opcode": self.opcode,
            "value": self.value,
            "children": [c.to_dict() for c in self.children],
        }

    @staticmethod
    def from_dict(doc: dict) -> "ParamRecord":
        return ParamRecord(
            block_id=doc["block_id"],
            opcode=doc["opcode"],
            value=doc["value"],
            children=[ParamRecord.from_dict(c) for c in doc.get("children", [])],
        )


@dataclass
class BlockEvent:
    """One executed block, as emitted by the scheduler to the tracer."""

    kind: str  # "block" | "monitor" | "diagnostic"
    block: Block | None
    instance_id: int
    thread_id: int
    phase: str = "complete"  # complete | start | end (waiting blocks)
    params: dict[str, Value] = field(default_factory=dict)
    records: list[ParamRecord] = field(default_factory=list)
    error: str | None = None
    note: str = ""


@dataclass
class TouchingEvidence:
    touched: bool
    overlap: list[tuple[int, int]] = field(default_factory=list)
    p_a: tuple[int, int] | None = None
    p_b: tuple[int, int] | None = None
    distance: float | None = None
    empty_subject: bool = False
    empty_object: bool = False
    color_missing: bool = False
    mask_a: object = field(default=None, repr=False)
    mask_b: object = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "touched": self.touched,
            "overlap_count": len(self.overlap),
            "overlap_sample": [list(p) for p in self.overlap[:32]],
            "p_a": list(self.p_a) if self.p_a else None,
            "p_b": list(self.p_b) if self.p_b else None,
            "distance": self.distance,
            "empty_subject": self.empty_subject,
            "empty_object": self.empty_object,
            "color_missing": self.color_missing,
        }


class TargetInstance:
    """Mutable runtime state of one target (the stage, a sprite, or a clone)."""

    def __init__(self, instance_id: int, target: Target, is_clone: bool = False):
        self.instance_id = instance_id
        self.target = target
        self.is_clone = is_clone
        init = target.initial
        self.x = float(init.x)
        self.y = float(init.y)
        self.direction = float(init.direction)
        self.size = float(init.size)
        self.visible = bool(init.visible)
        self.draggable = bool(init.draggable)
        self.rotation_style = init.rotation_style
        self.layer = int(init.layer)
        self.costume_index = int(init.costume)
        self.graphic_effects: dict[str, float] = {}
        self.volume = 100.0
        self.bubble: tuple[str, str] | None = None
        self.variables: dict[str, Value] = {v.name: v.value for v in target.variables}
        self.lists: dict[str, list[Value]] = {v.name: list(v.values) for v in target.lists}
        self.playing_sounds: list[tuple[str, Fraction]] = []

    @property
    def is_stage(self) -> bool:
        return self.target.is_stage

    @property
    def name(self) -> str:
        return self.target.name

    def clamp_position(self) -> None:
        self.x = min(max(self.x, -240.0), 240.0)
        self.y = min(max(self.y, -180.0), 180.0)

    def costume(self):
        idx = min(max(self.costume_index, 0), len(self.target.costumes) - 1)
        return self.target.costumes[idx]

    def clone_from(self, other: "TargetInstance") -> None:
        self.x, self.y = other.x, other.y
        self.direction = other.direction
        self.size = other.size
        self.visible = other.visible
        self.draggable = other.draggable
        self.rotation_style = other.rotation_style
        self.layer = other.layer
        self.costume_index = other.costume_index
        self.graphic_effects = dict(other.graphic_effects)
        self.volume = other.volume
        self.bubble = None  # bubbles are not inherited
        self.variables = dict(other.variables)
        self.lists = {k: list(v) for k, v in other.lists.items()}
        self.playing_sounds = []

    def to_dict(self) -> dict:
        return {
            "id": self.instance_id,
            "origin": self.name,
            "is_clone": self.is_clone,
            "x": self.x,
            "y": self.y,
            "direction": self.direction,
            "size": self.size,
            "visible": self.visible,
            "draggable": self.draggable,
            "rotation_style": self.rotation_style,
            "layer": self.layer,
            "costume": self.costume_index,
            "effects": dict(sorted(self.graphic_effects.items())),
            "volume": self.volume,
            "bubble": list(self.bubble) if self.bubble else None,
            "variables": dict(sorted(self.variables.items())),
            "lists": {k: list(v) for k, v in sorted(self.lists.items())},
            "playing": [[n, frac_str(t)] for n, t in self.playing_sounds],
        }


@dataclass
class Frame:
    seq: tuple[Block, ...]
    idx: int = 0
    owner: Block | None = None  # control block owning this substack
    sub: int = 0  # which substack of the owner

    def to_dict(self) -> dict:
        return {
            "owner": self.owner.id if self.owner else None,
            "sub": self.sub,
            "idx": self.idx,
        }


class Thread:
    def __init__(self, thread_id: int, instance_id: int, target_name: str,
                 script_index: int, script: Script):
        self.thread_id = thread_id
        self.instance_id = instance_id
        self.target_name = target_name
        self.script_index = script_index
        self.script = script
        self.started = False
        self.status = "running"  # running | waiting | done
        self.wait: tuple | None = None
        self.frames: list[Frame] = [Frame(seq=script.body)]
        # repeat counters keyed by loop block id, per enclosing frame depth
        self.loop_counts: dict[str, int] = {}

    def current_block(self) -> Block | None:
        if not self.started:
            return self.script.hat
        for frame in reversed(self.frames):
            if frame.idx < len(frame.seq):
                return frame.seq[frame.idx]
        return None

    def to_dict(self) -> dict:
        wait: list | None
        if self.wait is None:
            wait = None
        else:
            kind = self.wait[0]
            if kind == "time":
                wait = ["time", frac_str(self.wait[1])]
            elif kind == "glide":
                x0, y0, x1, y1, t0, t1 = self.wait[1:]
                wait = ["glide", x0, y0, x1, y1, frac_str(t0), frac_str(t1)]
            elif kind == "threads":
                wait = ["threads", sorted(self.wait[1])]
            elif kind == "sound":
                wait = ["sound", self.wait[1], frac_str(self.wait[2])]
            elif kind == "ask":
                wait = ["ask", bool(self.wait[1])]
            else:  # until
                wait = [kind]
        return {
            "id": self.thread_id,
            "instance": self.instance_id,
            "target": self.target_name,
            "script": self.script_index,
            "started": self.started,
            "status": self.status,
            "wait": wait,
            "frames": [f.to_dict() for f in self.frames],
            "loops": dict(sorted(self.loop_counts.items())),
        }


class Vm:
    """The interpreter. All state is owned here; snapshots are canonical
    dicts produced by :meth:`canonical` and restored by :func:`restore`."""

    def __init__(self, project: Project, seed: int = 0):
        self.project = project
        self.seed = seed
        self.rng = CountedRng(seed)
        self.clock: Fraction = Fraction(0)
        self.tick_no = 0
        self.mouse = {"x": 0.0, "y": 0.0, "pressed": False}
        self.keys_down: set[str] = set()
        self.answer: str = ""
        self.instances: list[TargetInstance] = []
        self.threads: list[Thread] = []
        self.pending_events: list[dict] = []
        self.next_instance_id = 0
        self.next_thread_id = 1
        self.step_counter = 0
        self.turn_pos = 0  # index into threads of the next turn this tick
        self.last_executed: dict[int, str] = {}  # thread id -> block id
        self.overall_last: str | None = None
        # debugger attachments; deliberately not part of canonical state
        self.breakpoints: set[str] = set()
        self.bp_skip: str | None = None
        for target in project.targets:
            self.instances.append(TargetInstance(self.next_instance_id, target))
            self.next_instance_id += 1

    # -- instance helpers --------------------------------------------------

    def instance(self, instance_id: int) -> TargetInstance:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        raise UnknownInstanceError(f"unknown instance: {instance_id}")

    def instances_named(self, name: str) -> list[TargetInstance]:
        return [i for i in self.instances if i.name == name]

    def stage_instance(self) -> TargetInstance:
        return self.instances[0]

    def _resolve_variable(self, inst: TargetInstance, name: str):
        if name in inst.variables:
            return inst
        stage = self.stage_instance()
        if name in stage.variables:
            return stage
        return None

    def _resolve_list(self, inst: TargetInstance, name: str):
        if name in inst.lists:
            return inst
        stage = self.stage_instance()
        if name in stage.lists:
            return stage
        return None

    # -- event plumbing ----------------------------------------------------

    def inject_event(self, event: dict) -> None:
        """Queue an input event; it is dispatched at the next tick boundary."""
        if event.get("type") == "sprite-click":
            inst = self._click_target(event)
            if not inst.visible:
                raise EventRejectedError(
                    f"instance {inst.instance_id} ({inst.name}) is hidden")
        self.pending_events.append(dict(event))

    def _click_target(self, event: dict) -> TargetInstance:
        if "instance" in event:
            return self.instance(int(event["instance"]))
        name = event.get("sprite", "")
        matches = [i for i in self.instances_named(name) if not i.is_clone]
        if not matches:
            raise UnknownInstanceError(f"unknown sprite: {name}")
        return matches[0]

    def press_green_flag(self) -> None:
        """Stop everything, delete clones, and start all flag scripts."""
        self.threads = []
        self.turn_pos = 0
        self.instances = [i for i in self.instances if not i.is_clone]
        for inst in self.instances:
            inst.bubble = None
            inst.playing_sounds = []
        self.last_executed = {}
        self.overall_last = None
        self._spawn_hats("event_whenflagclicked", lambda hat, inst: not inst.is_clone)

    def _spawn_hats(self, opcode: str, accept=lambda hat, inst: True,
                    restart: bool = True) -> list[int]:
        """Spawn a thread per matching (instance, script) in canonical order.
        Returns the ids of the threads started (or restarted)."""
        spawned: list[int] = []
        for inst in self._canonical_instances():
            for script_index, script in enumerate(inst.target.scripts):
                if script.hat.opcode != opcode or not accept(script.hat, inst):
                    continue
                existing = next(
                    (t for t in self.threads
                     if t.instance_id == inst.instance_id
                     and t.script_index == script_index and t.status != "done"),
                    None,
                )
                if existing is not None:
                    if restart:
                        fresh = Thread(existing.thread_id, inst.instance_id,
                                       inst.name, script_index, script)
                        self.threads[self.threads.index(existing)] = fresh
                        spawned.append(fresh.thread_id)
                    continue
                thread = Thread(self.next_thread_id, inst.instance_id, inst.name,
                                script_index, script)
                self.next_thread_id += 1
                self.threads.append(thread)
                spawned.append(thread.thread_id)
        return spawned

    def _canonical_instances(self) -> list[TargetInstance]:
        """Stage, then sprites in declaration order, then clones in creation
        order (instance ids are allocated in exactly that order)."""
        originals = [i for i in self.instances if not i.is_clone]
        clones = sorted((i for i in self.instances if i.is_clone),
                        key=lambda i: i.instance_id)
        return originals + clones

    def _dispatch(self, event: dict) -> None:
        etype = event.get("type")
        if etype == "key-down":
            key = str(event.get("key", ""))
            self.keys_down.add(key)
            self._spawn_hats(
                "event_whenkeypressed",
                lambda hat, inst: hat.fields.get("KEY_OPTION") == key,
            )
        elif etype == "key-up":
            self.keys_down.discard(str(event.get("key", "")))
        elif etype == "mouse-move":
            self.mouse["x"] = float(event.get("x", 0))
            self.mouse["y"] = float(event.get("y", 0))
        elif etype == "mouse-down":
            self.mouse["pressed"] = True
        elif etype == "mouse-up":
            self.mouse["pressed"] = False
        elif etype == "sprite-click":
            try:
                inst = self._click_target(event)
            except UnknownInstanceError:
                return
            if inst.visible:
                self._spawn_hats(
                    "event_whenthisspriteclicked",
                    lambda hat, i: i.instance_id == inst.instance_id,
                )
        elif etype == "broadcast":
            self._broadcast(str(event.get("message", "")))
        elif etype == "answer":
            self.answer = to_string(event.get("text", ""))
            for t in self.threads:
                if t.status == "waiting" and t.wait is not None and t.wait[0] == "ask":
                    t.wait = ("ask", True)  # answered
        elif etype == "_clone-start":
            self._dispatch_clone_start(event)

    def _broadcast(self, message: str) -> list[int]:
        return self._spawn_hats(
            "event_whenbroadcastreceived",
            lambda hat, inst: hat.fields.get("BROADCAST_OPTION") == message,
        )

    def _switch_backdrop(self, inst_stage: TargetInstance, name: str) -> None:
        names = [c.name for c in inst_stage.target.costumes]
        if name in names:
            inst_stage.costume_index = names.index(name)
            self._spawn_hats(
                "event_whenbackdropswitchesto",
                lambda hat, inst: hat.fields.get("BACKDROP") == name,
            )

    # -- scheduling --------------------------------------------------------

    def finished(self) -> bool:
        return not self.threads and not self.pending_events

    def _tick_boundary(self) -> None:
        self.clock += QUANTUM
        self.tick_no += 1
        self.threads = [t for t in self.threads if t.status != "done"]
        self.turn_pos = 0
        pending, self.pending_events = self.pending_events, []
        for event in pending:
            self._dispatch(event)
        for inst in self.instances:
            inst.playing_sounds = [(n, t) for n, t in inst.playing_sounds
                                   if t > self.clock]

    def _run_turn_step(self) -> list[BlockEvent] | None:
        """Execute one statement of the current tick. None = tick exhausted."""
        while self.turn_pos < len(self.threads):
            thread = self.threads[self.turn_pos]
            if thread.status == "done":
                self.turn_pos += 1
                continue
            if thread.status == "waiting":
                events = self._try_complete_wait(thread)
                if events is None:
                    self.turn_pos += 1
                    continue
                return events
            events = self._execute_next(thread)
            if events is not None:
                return events
            # thread yielded or finished; its turn is over
            self.turn_pos += 1
        return None

    def step_once(self, max_idle_ticks: int = MAX_IDLE_TICKS) -> list[BlockEvent]:
        """Run until exactly one statement executes (the first event is the
        block event; monitor updates may follow). Returns [] when the program
        is finished or no thread can make progress."""
        idle = 0
        while True:
            events = self._run_turn_step()
            if events is not None:
                return events
            if self.finished():
                return []
            self._tick_boundary()
            idle += 1
            if idle > max_idle_ticks:
                return []

    def scheduler_tick(self) -> list[BlockEvent]:
        """Run the remainder of the current tick and cross the boundary."""
        out: list[BlockEvent] = []
        while (events := self._run_turn_step()) is not None:
            out.extend(events)
        self._tick_boundary()
        return out

    # -- wait completion ---------------------------------------------------

    def _try_complete_wait(self, thread: Thread) -> list[BlockEvent] | None:
        assert thread.wait is not None
        kind = thread.wait[0]
        block = thread.current_block()
        if kind == "time":
            if self.clock < thread.wait[1]:
                return None
        elif kind == "glide":
            x0, y0, x1, y1, t0, t1 = thread.wait[1:]
            inst = self.instance(thread.instance_id)
            if self.clock < t1:
                f = float((self.clock - t0) / (t1 - t0))
                inst.x = x0 + (x1 - x0) * f
                inst.y = y0 + (y1 - y0) * f
                inst.clamp_position()
                return None
            inst.x, inst.y = x1, y1
            inst.clamp_position()
        elif kind == "until":
            inst = self.instance(thread.instance_id)
            params, records, err = self._eval_inputs(inst, block)
            if not to_bool(params.get("CONDITION", False)):
                return None
            return self._finish_wait(thread, block, params, records, err)
        elif kind == "threads":
            alive = {t.thread_id for t in self.threads if t.status != "done"}
            if any(tid in alive for tid in thread.wait[1]):
                return None
        elif kind == "sound":
            if self.clock < thread.wait[2]:
                return None
        elif kind == "ask":
            if len(thread.wait) < 2 or not thread.wait[1]:
                return None
        if block is not None and block.opcode in ("looks_sayforsecs", "looks_thinkforsecs"):
            self.instance(thread.instance_id).bubble = None
        return self._finish_wait(thread, block, {}, [], None)

    def _finish_wait(self, thread: Thread, block: Block, params: dict,
                     records: list, err: str | None) -> list[BlockEvent]:
        thread.status = "running"
        thread.wait = None
        event = BlockEvent(
            kind="block", block=block, instance_id=thread.instance_id,
            thread_id=thread.thread_id, phase="end", params=params,
            records=records, error=err,
        )
        self._note_executed(thread, block)
        self._advance(thread)
        return [event]

    # -- statement execution ----------------------------------------------

    def _note_executed(self, thread: Thread, block: Block) -> None:
        self.step_counter += 1
        self.last_executed[thread.thread_id] = block.id
        self.overall_last = block.id

    def _advance(self, thread: Thread) -> None:
        """Move past the current statement, unwinding finished frames (frame
        pops at loop frames mark the thread as yielded by the caller)."""
        thread.frames[-1].idx += 1

    def _unwind(self, thread: Thread) -> bool:
        """Pop exhausted frames. Returns True if the thread must yield (a
        loop-iteration edge was crossed or the script ended)."""
        while thread.frames and thread.frames[-1].idx >= len(thread.frames[-1].seq):
            frame = thread.frames.pop()
            owner = frame.owner
            if owner is not None and owner.opcode in (
                    "control_forever", "control_repeat", "control_repeat_until"):
                # back-edge: the loop header re-executes on the next turn
                return True
        if not thread.frames:
            thread.status = "done"
            return True
        return False

    def _execute_next(self, thread: Thread) -> list[BlockEvent] | None:
        """Execute the thread's next statement; None when the turn is over."""
        if not thread.started:
            thread.started = True
            hat = thread.script.hat
            self._note_executed(thread, hat)
            event = BlockEvent(kind="block", block=hat,
                               instance_id=thread.instance_id,
                               thread_id=thread.thread_id)
            if not thread.frames or not thread.script.body:
                thread.status = "done"
            return [event]
        if self._unwind(thread):
            return None
        frame = thread.frames[-1]
        block = frame.seq[frame.idx]
        return self._execute_statement(thread, block)

    def _eval_inputs(self, inst: TargetInstance, block: Block):
        params: dict[str, Value] = {}
        records: list[ParamRecord] = []
        err: str | None = None
        for name, kind in block.info.inputs:
            slot = block.inputs.get(name)
            if slot is None:
                params[name] = "" if kind in ("any", "string") else 0
            elif slot.kind == "literal":
                params[name] = slot.value
            elif slot.kind == "color":
                params[name] = "#%02X%02X%02X" % slot.color
            else:
                value, record, sub_err = self.evaluate_reporter(inst, slot.block)
                params[name] = value
                records.append(record)
                err = err or sub_err
        return params, records, err

    def evaluate_reporter(self, inst: TargetInstance, block: Block):
        """Evaluate a reporter/Boolean block -> (value, ParamRecord, error)."""
        params, child_records, err = self._eval_inputs(inst, block)
        value: Value
        op = block.opcode
        try:
            value, op_err = self._reporter_value(inst, block, params)
            err = err or op_err
        except Exception as e:  # failsoft: never propagate
            value = 0
            err = err or f"{type(e).__name__}: {e}"
        record = ParamRecord(block_id=block.id, opcode=op, value=value,
                             children=child_records)
        return value, record, err

    def _reporter_value(self, inst: TargetInstance, block: Block,
                        p: dict[str, Value]) -> tuple[Value, str | None]:
        op = block.opcode
        if op == "operator_add":
            return to_number(p["NUM1"]) + to_number(p["NUM2"]), None
        if op == "operator_subtract":
            return to_number(p["NUM1"]) - to_number(p["NUM2"]), None
        if op == "operator_multiply":
            return to_number(p["NUM1"]) * to_number(p["NUM2"]), None
        if op == "operator_divide":
            d = to_number(p["NUM2"])
            if d == 0:
                return 0, "division by zero"
            return to_number(p["NUM1"]) / d, None
        if op == "operator_lt":
            return compare(p["OPERAND1"], p["OPERAND2"]) < 0, None
        if op == "operator_equals":
            return compare(p["OPERAND1"], p["OPERAND2"]) == 0, None
        if op == "operator_gt":
            return compare(p["OPERAND1"], p["OPERAND2"]) > 0, None
        if op == "operator_and":
            return to_bool(p["OPERAND1"]) and to_bool(p["OPERAND2"]), None
        if op == "operator_or":
            return to_bool(p["OPERAND1"]) or to_bool(p["OPERAND2"]), None
        if op == "operator_not":
            return not to_bool(p["OPERAND"]), None
        if op == "operator_random":
            return self.rng.pick_random(p["FROM"], p["TO"]), None
        if op == "operator_join":
            return to_string(p["STRING1"]) + to_string(p["STRING2"]), None
        if op == "operator_contains":
            return to_string(p["STRING2"]).lower() in to_string(p["STRING1"]).lower(), None
        if op == "motion_xposition":
            return inst.x, None
        if op == "motion_yposition":
            return inst.y, None
        if op == "motion_direction":
            return inst.direction, None
        if op == "looks_size":
            return inst.size, None
        if op == "looks_costumenumber":
            return inst.costume_index + 1, None
        if op == "looks_backdropnumber":
            return self.stage_instance().costume_index + 1, None
        if op == "sensing_mousex":
            return self.mouse["x"], None
        if op == "sensing_mousey":
            return self.mouse["y"], None
        if op == "sensing_keypressed":
            return block.fields.get("KEY_OPTION", "") in self.keys_down, None
        if op == "sensing_touchingobject":
            touched, _ = self.touching_query(
                "object", inst.instance_id, block.fields.get("TOUCHINGOBJECTMENU", ""))
            return touched, None
        if op == "sensing_touchingcolor":
            touched, _ = self.touching_query("color", inst.instance_id, p["COLOR"])
            return touched, None
        if op == "sensing_coloristouchingcolor":
            touched, _ = self.touching_query(
                "color-touching-color", inst.instance_id, (p["COLOR"], p["COLOR2"]))
            return touched, None
        if op == "sensing_distanceto":
            try:
                return self.distance_query(
                    inst.instance_id, block.fields.get("DISTANCETOMENU", "")), None
            except UnknownInstanceError as e:
                return 0, str(e)
        if op == "data_variable":
            name = block.fields.get("VARIABLE", "")
            holder = self._resolve_variable(inst, name)
            if holder is None:
                return 0, f"unknown variable: {name}"
            return holder.variables[name], None
        if op == "data_itemoflist":
            holder, name = self._list_of(inst, block)
            if holder is None:
                return "", f"unknown list: {name}"
            idx = _list_index(p["INDEX"], len(holder.lists[name]))
            return (holder.lists[name][idx - 1] if idx else ""), None
        if op == "data_lengthoflist":
            holder, name = self._list_of(inst, block)
            if holder is None:
                return 0, f"unknown list: {name}"
            return len(holder.lists[name]), None
        if op == "data_listcontainsitem":
            holder, name = self._list_of(inst, block)
            if holder is None:
                return False, f"unknown list: {name}"
            return any(compare(v, p["ITEM"]) == 0 for v in holder.lists[name]), None
        if op == "data_listcontents":
            holder, name = self._list_of(inst, block)
            if holder is None:
                return "", f"unknown list: {name}"
            items = [to_string(v) for v in holder.lists[name]]
            # single characters join tight, like the reference environment
            joiner = "" if all(len(s) == 1 for s in items) else " "
            return joiner.join(items), None
        return 0, f"reporter {op} not implemented"

    def _list_of(self, inst: TargetInstance, block: Block):
        name = block.fields.get("LIST", "")
        return self._resolve_list(inst, name), name

    def _execute_statement(self, thread: Thread, block: Block) -> list[BlockEvent] | None:
        if block.id in self.breakpoints:
            if self.bp_skip == block.id:
                self.bp_skip = None  # stepped past exactly once
            else:
                raise BreakpointHalt(block.id, thread.thread_id, thread.instance_id)
        inst = self.instance(thread.instance_id)
        op = block.opcode
        if op == "control_repeat" and block.id in thread.loop_counts:
            # TIMES is evaluated once, on loop entry; later header executions
            # consume the stored counter without re-evaluating anything
            params, records, err = {}, [], None
        else:
            params, records, err = self._eval_inputs(inst, block)
        event = BlockEvent(kind="block", block=block, instance_id=inst.instance_id,
                           thread_id=thread.thread_id, params=params, records=records,
                           error=err)
        events = [event]
        advance = True

        try:
            if op in ("control_if", "control_if_else"):
                condition = to_bool(params.get("CONDITION", False))
                self._advance(thread)
                advance = False
                if condition:
                    thread.frames.append(Frame(seq=block.substacks[0], owner=block, sub=0))
                elif op == "control_if_else":
                    thread.frames.append(Frame(seq=block.substacks[1], owner=block, sub=1))
            elif op == "control_forever":
                advance = False
                thread.frames.append(Frame(seq=block.substacks[0], owner=block, sub=0))
            elif op == "control_repeat":
                advance = False
                if block.id in thread.loop_counts:
                    remaining = thread.loop_counts[block.id]
                else:
                    remaining = int(math.floor(to_number(params.get("TIMES", 0))))
                if remaining >= 1:
                    thread.loop_counts[block.id] = remaining - 1
                    thread.frames.append(Frame(seq=block.substacks[0], owner=block, sub=0))
                else:
                    thread.loop_counts.pop(block.id, None)
                    self._advance(thread)
            elif op == "control_repeat_until":
                advance = False
                if to_bool(params.get("CONDITION", False)):
                    self._advance(thread)
                else:
                    thread.frames.append(Frame(seq=block.substacks[0], owner=block, sub=0))
            elif op == "control_wait":
                ticks = seconds_to_ticks(to_number(params.get("DURATION", 0)))
                self._start_wait(thread, event, ("time", self.clock + ticks * QUANTUM))
                return events
            elif op == "control_wait_until":
                if not to_bool(params.get("CONDITION", False)):
                    self._start_wait(thread, event, ("until",))
                    return events
                # condition already true: still a waiting block, so it keeps
                # the two-entry shape by waiting a minimal single tick
                self._start_wait(thread, event, ("time", self.clock + QUANTUM))
                return events
            elif op == "control_stop":
                option = block.fields.get("STOP_OPTION", "all")
                advance = False
                if option == "all":
                    for t in self.threads:
                        t.status = "done"
                elif option == "this script":
                    thread.status = "done"
                else:  # other scripts in sprite
                    for t in self.threads:
                        if (t.instance_id == thread.instance_id
                                and t.thread_id != thread.thread_id):
                            t.status = "done"
                    advance = True
            elif op == "control_create_clone_of":
                option = block.fields.get("CLONE_OPTION", "myself")
                origin_name = inst.name if option == "myself" else option
                originals = [i for i in self.instances_named(origin_name)
                             if not i.is_stage]
                if not originals:
                    event.error = event.error or f"unknown sprite: {origin_name}"
                else:
                    origin = (inst if option == "myself" and not inst.is_stage
                              else originals[0])
                    _, clone_err = self.spawn_clone(origin.instance_id)
                    event.error = event.error or clone_err
            elif op == "control_delete_this_clone":
                advance = False
                if inst.is_clone:
                    self.instances.remove(inst)
                    for t in self.threads:
                        if t.instance_id == inst.instance_id:
                            t.status = "done"
                else:
                    event.error = "not a clone"
                    advance = True
            elif op == "control_start_as_clone":
                pass  # hats execute via thread start, never here
            elif op == "event_broadcast":
                self._broadcast(to_string(params.get("BROADCAST_INPUT", "")))
            elif op == "event_broadcastandwait":
                ids = self._broadcast(to_string(params.get("BROADCAST_INPUT", "")))
                self._start_wait(thread, event, ("threads", ids))
                return events
            elif op.startswith("motion_"):
                self._motion(thread, inst, block, params, event)
                if thread.status == "waiting":
                    return events
            elif op.startswith("looks_"):
                self._looks(thread, inst, block, params, event)
                if thread.status == "waiting":
                    return events
            elif op.startswith("sound_"):
                self._sound(thread, inst, block, event)
                if thread.status == "waiting":
                    return events
            elif op == "sensing_askandwait":
                self._start_wait(thread, event, ("ask", False))
                return events
            elif op.startswith("data_"):
                events.extend(self._data(inst, block, params, event))
            else:
                event.error = event.error or f"statement {op} not implemented"
        except Exception as e:  # failsoft
            event.error = event.error or f"{type(e).__name__}: {e}"

        self._note_executed(thread, block)
        if advance:
            self._advance(thread)
        return events

    def _start_wait(self, thread: Thread, event: BlockEvent, wait: tuple) -> None:
        event.phase = "start"
        thread.status = "waiting"
        thread.wait = wait
        self._note_executed(thread, event.block)

    def _motion(self, thread: Thread, inst: TargetInstance, block: Block,
                p: dict, event: BlockEvent) -> None:
        op = block.opcode
        if inst.is_stage:
            event.error = "the stage cannot move"
            return
        if op == "motion_movesteps":
            steps = to_number(p["STEPS"])
            rad = math.radians(inst.direction)
            inst.x += steps * math.sin(rad)
            inst.y += steps * math.cos(rad)
        elif op == "motion_gotoxy":
            inst.x = to_number(p["X"])
            inst.y = to_number(p["Y"])
        elif op == "motion_glideto":
            ticks = seconds_to_ticks(to_number(p["SECS"]))
            x1 = min(max(to_number(p["X"]), -240.0), 240.0)
            y1 = min(max(to_number(p["Y"]), -180.0), 180.0)
            self._start_wait(thread, event, (
                "glide", inst.x, inst.y, x1, y1, self.clock,
                self.clock + ticks * QUANTUM))
            return
        elif op == "motion_pointtowards":
            target = block.fields.get("TOWARDS", "mouse-pointer")
            if target == "mouse-pointer":
                tx, ty = self.mouse["x"], self.mouse["y"]
            else:
                others = [i for i in self.instances_named(target) if not i.is_stage]
                if not others:
                    event.error = f"unknown sprite: {target}"
                    return
                tx, ty = others[0].x, others[0].y
            dx, dy = tx - inst.x, ty - inst.y
            if dx == 0 and dy == 0:
                return
            inst.direction = normalize_direction(math.degrees(math.atan2(dx, dy)))
        elif op == "motion_pointindirection":
            inst.direction = normalize_direction(to_number(p["DIRECTION"]))
        elif op == "motion_turnright":
            inst.direction = normalize_direction(inst.direction + to_number(p["DEGREES"]))
        elif op == "motion_turnleft":
            inst.direction = normalize_direction(inst.direction - to_number(p["DEGREES"]))
        elif op == "motion_setx":
            inst.x = to_number(p["X"])
        elif op == "motion_changex":
            inst.x += to_number(p["DX"])
        elif op == "motion_sety":
            inst.y = to_number(p["Y"])
        elif op == "motion_changey":
            inst.y += to_number(p["DY"])
        inst.clamp_position()

    def _looks(self, thread: Thread, inst: TargetInstance, block: Block,
               p: dict, event: BlockEvent) -> None:
        op = block.opcode
        if op == "looks_say":
            inst.bubble = ("say", to_string(p["MESSAGE"])) if to_string(p["MESSAGE"]) else None
        elif op == "looks_think":
            inst.bubble = ("think", to_string(p["MESSAGE"])) if to_string(p["MESSAGE"]) else None
        elif op == "looks_sayforsecs":
            inst.bubble = ("say", to_string(p["MESSAGE"]))
            ticks = seconds_to_ticks(to_number(p["SECS"]))
            self._start_wait(thread, event, ("time", self.clock + ticks * QUANTUM))
        elif op == "looks_thinkforsecs":
            inst.bubble = ("think", to_string(p["MESSAGE"]))
            ticks = seconds_to_ticks(to_number(p["SECS"]))
            self._start_wait(thread, event, ("time", self.clock + ticks * QUANTUM))
        elif op == "looks_show":
            inst.visible = True
        elif op == "looks_hide":
            inst.visible = False
        elif op == "looks_switchcostume":
            names = [c.name for c in inst.target.costumes]
            name = block.fields.get("COSTUME", "")
            if name in names:
                inst.costume_index = names.index(name)
            else:
                event.error = f"unknown costume: {name}"
        elif op == "looks_nextcostume":
            inst.costume_index = (inst.costume_index + 1) % max(
                len(inst.target.costumes), 1)
        elif op == "looks_switchbackdrop":
            self._switch_backdrop(self.stage_instance(),
                                  block.fields.get("BACKDROP", ""))
        elif op == "looks_setsize":
            if not inst.is_stage:
                inst.size = min(max(to_number(p["SIZE"]), 5.0), 500.0)
        elif op == "looks_changesize":
            if not inst.is_stage:
                inst.size = min(max(inst.size + to_number(p["CHANGE"]), 5.0), 500.0)

    def _sound(self, thread: Thread, inst: TargetInstance, block: Block,
               event: BlockEvent) -> None:
        op = block.opcode
        if op == "sound_stopall":
            for i in self.instances:
                i.playing_sounds = []
            return
        name = block.fields.get("SOUND_MENU", "")
        sound = next((s for s in inst.target.sounds if s.name == name), None)
        if sound is None:
            event.error = f"unknown sound: {name}"
            return
        ticks = seconds_to_ticks(sound.duration) if sound.duration > 0 else 0
        end = self.clock + ticks * QUANTUM
        if ticks:
            inst.playing_sounds.append((name, end))
        if op == "sound_playuntildone":
            self._start_wait(thread, event, ("sound", name, max(
                end, self.clock + QUANTUM)))

    def _data(self, inst: TargetInstance, block: Block, p: dict,
              event: BlockEvent) -> list[BlockEvent]:
        op = block.opcode
        monitor_events: list[BlockEvent] = []
        if op in ("data_setvariable", "data_changevariable"):
            name = block.fields.get("VARIABLE", "")
            holder = self._resolve_variable(inst, name)
            if holder is None:
                event.error = f"unknown variable: {name}"
                return []
            if op == "data_setvariable":
                holder.variables[name] = p["VALUE"]
            else:
                holder.variables[name] = to_number(holder.variables[name]) + to_number(
                    p["VALUE"])
            monitor_events.extend(self._monitor_updates(holder, "variable", name,
                                                        event))
            return monitor_events
        name = block.fields.get("LIST", "")
        holder = self._resolve_list(inst, name)
        if holder is None:
            event.error = f"unknown list: {name}"
            return []
        items = holder.lists[name]
        if op == "data_addtolist":
            items.append(p["ITEM"])
        elif op == "data_deleteoflist":
            idx = _list_index(p["INDEX"], len(items))
            if idx:
                del items[idx - 1]
            else:
                event.error = "index out of range"
        elif op == "data_insertatlist":
            idx = _list_index(p["INDEX"], len(items) + 1)
            if idx:
                items.insert(idx - 1, p["ITEM"])
            else:
                event.error = "index out of range"
        elif op == "data_replaceitemoflist":
            idx = _list_index(p["INDEX"], len(items))
            if idx:
                items[idx - 1] = p["ITEM"]
            else:
                event.error = "index out of range"
        monitor_events.extend(self._monitor_updates(holder, "list", name, event))
        return monitor_events

    def _monitor_updates(self, holder: TargetInstance, kind: str, name: str,
                         cause: BlockEvent) -> list[BlockEvent]:
        for monitor in self.project.monitors:
            if (monitor.kind == kind and monitor.name == name and monitor.visible
                    and monitor.target == holder.name):
                return [BlockEvent(kind="monitor", block=cause.block,
                                   instance_id=holder.instance_id,
                                   thread_id=cause.thread_id,
                                   note=f"{kind} {name} updated")]
        return []

    # -- clones, sensing ----------------------------------------------------

    def spawn_clone(self, origin_instance_id: int) -> tuple[int | None, str | None]:
        origin = self.instance(origin_instance_id)
        if origin.is_stage:
            return None, "cannot clone the stage"
        clone_count = sum(1 for i in self.instances if i.is_clone)
        if clone_count >= CLONE_CAP:
            return None, f"clone cap of {CLONE_CAP} reached"
        clone = TargetInstance(self.next_instance_id, origin.target, is_clone=True)
        self.next_instance_id += 1
        clone.clone_from(origin)
        self.instances.append(clone)
        self.pending_events.append({"type": "_clone-start",
                                    "instance": clone.instance_id})
        return clone.instance_id, None

    def _dispatch_clone_start(self, event: dict) -> None:
        instance_id = int(event["instance"])
        try:
            inst = self.instance(instance_id)
        except UnknownInstanceError:
            return
        self._spawn_hats("control_start_as_clone",
                         lambda hat, i: i.instance_id == instance_id)

    def render(self):
        return render_stage(self.instances, lambda i: i.costume())

    def touching_query(self, kind: str, subject_id: int, arg):
        """-> (bool, TouchingEvidence). See docs/format.md for the pixel-set
        definitions of each query kind."""
        subject = self.instance(subject_id)
        evidence = TouchingEvidence(touched=False)
        if not subject.visible or subject.is_stage:
            evidence.empty_subject = True
            return False, evidence
        raster = self.render()
        mask_a = raster.masks.get(subject_id)
        if mask_a is None or not mask_a.any():
            evidence.empty_subject = True
            return False, evidence

        if kind == "object":
            if arg == "mouse-pointer":
                mask_b = mouse_mask(self.mouse["x"], self.mouse["y"])
            elif arg == "edge":
                mask_b = edge_mask()
            else:
                mask_b = None
                for other in self.instances_named(str(arg)):
                    if other.instance_id == subject_id or other.is_stage:
                        continue
                    m = raster.masks.get(other.instance_id)
                    if m is not None:
                        mask_b = m if mask_b is None else (mask_b | m)
                if mask_b is None or not mask_b.any():
                    evidence.empty_object = True
                    return False, evidence
        elif kind == "color":
            rgb = _parse_rgb(arg)
            others = [i for i in self.instances if i.instance_id != subject_id]
            without = render_stage(others, lambda i: i.costume())
            mask_b = color_mask(without.color, rgb)
            if not mask_b.any():
                evidence.color_missing = True
                return False, evidence
        else:  # color-touching-color
            rgb_a = _parse_rgb(arg[0])
            rgb_b = _parse_rgb(arg[1])
            solo = instance_mask(subject, subject.costume())
            solo_render = render_stage([subject], lambda i: i.costume())
            mask_a = solo & color_mask(solo_render.color, rgb_a)
            if not mask_a.any():
                evidence.empty_subject = True
                evidence.color_missing = True
                return False, evidence
            others = [i for i in self.instances if i.instance_id != subject_id]
            without = render_stage(others, lambda i: i.costume())
            mask_b = color_mask(without.color, rgb_b)
            if not mask_b.any():
                evidence.color_missing = True
                return False, evidence

        overlap = mask_a & mask_b
        evidence.mask_a, evidence.mask_b = mask_a, mask_b
        if overlap.any():
            evidence.touched = True
            evidence.overlap = [tuple(p) for p in mask_positions(overlap).tolist()]
            return True, evidence
        p_a, p_b, dist = closest_pair(mask_a, mask_b)
        evidence.p_a, evidence.p_b, evidence.distance = p_a, p_b, dist
        return False, evidence

    def distance_query(self, from_id: int, to) -> float:
        src = self.instance(from_id)
        if to == "mouse-pointer":
            tx, ty = self.mouse["x"], self.mouse["y"]
        elif isinstance(to, int):
            dst = self.instance(to)
            tx, ty = dst.x, dst.y
        else:
            others = [i for i in self.instances_named(str(to)) if not i.is_stage]
            if not others:
                raise UnknownInstanceError(f"unknown sprite: {to}")
            tx, ty = others[0].x, others[0].y
        return math.hypot(tx - src.x, ty - src.y)

    # -- canonical serialization --------------------------------------------

    def canonical(self) -> dict:
        return {
            "clock": frac_str(self.clock),
            "tick": self.tick_no,
            "rng": {"seed": self.seed, "draws": self.rng.draws},
            "mouse": {"x": self.mouse["x"], "y": self.mouse["y"],
                      "pressed": self.mouse["pressed"]},
            "keys_down": sorted(self.keys_down),
            "answer": self.answer,
            "next_instance_id": self.next_instance_id,
            "next_thread_id": self.next_thread_id,
            "step_counter": self.step_counter,
            "turn_pos": self.turn_pos,
            "pending": [dict(sorted(e.items())) for e in self.pending_events],
            "instances": [i.to_dict() for i in self.instances],
            "threads": [t.to_dict() for t in self.threads],
            "last": {str(tid): bid for tid, bid in sorted(self.last_executed.items())},
            "overall_last": self.overall_last,
        }

    def exec_state(self) -> dict:
        """Item (9)'s execution-state companion: thread ids, next thread, step
        count, and the last executed block per thread."""
        active = [t.thread_id for t in self.threads if t.status != "done"]
        next_id = None
        for pos in range(self.turn_pos, len(self.threads)):
            if self.threads[pos].status != "done":
                next_id = self.threads[pos].thread_id
                break
        return {
            "threads": active,
            "next": next_id,
            "steps": self.step_counter,
            "last": {str(tid): bid for tid, bid in sorted(self.last_executed.items())
                     if any(t.thread_id == tid for t in self.threads)},
            "overall_last": self.overall_last,
        }


def _list_index(value: Value, length: int) -> int:
    """1-based list index, or 0 when out of range (failsoft)."""
    idx = int(math.floor(to_number(value) + 0.5))
    return idx if 1 <= idx <= length else 0


def _parse_rgb(arg) -> tuple[int, int, int]:
    if isinstance(arg, tuple):
        return arg
    s = to_string(arg)
    if s.startswith("#") and len(s) == 7:
        return (int(s[1:3], 16), int(s[3:5], 16), int(s[5:7], 16))
    n = int(to_number(s)) & 0xFFFFFF
    return ((n >> 16) & 0xFF, (n >> 8) & 0xFF, n & 0xFF)


def boot(project: Project, seed: int = 0) -> Vm:
    return Vm(project, seed)


def restore(project: Project, snapshot: dict) -> Vm:
    """Rebuild a Vm from a canonical snapshot; restore(s).canonical() == s."""
    vm = Vm.__new__(Vm)
    vm.project = project
    vm.seed = snapshot["rng"]["seed"]
    vm.rng = CountedRng(vm.seed, snapshot["rng"]["draws"])
    vm.clock = parse_frac(snapshot["clock"])
    vm.tick_no = snapshot["tick"]
    vm.mouse = dict(snapshot["mouse"])
    vm.keys_down = set(snapshot["keys_down"])
    vm.answer = snapshot["answer"]
    vm.pending_events = [dict(e) for e in snapshot["pending"]]
    vm.next_instance_id = snapshot["next_instance_id"]
    vm.next_thread_id = snapshot["next_thread_id"]
    vm.step_counter = snapshot["step_counter"]
    vm.turn_pos = snapshot["turn_pos"]
    vm.instances = [_restore_instance(project, doc) for doc in snapshot["instances"]]
    vm.threads = [_restore_thread(project, doc) for doc in snapshot["threads"]]
    vm.last_executed = {int(k): v for k, v in snapshot["last"].items()}
    vm.overall_last = snapshot["overall_last"]
    vm.breakpoints = set()
    vm.bp_skip = None
    return vm


def _restore_instance(project: Project, doc: dict) -> TargetInstance:
    target = project.target_named(doc["origin"])
    if target is None:
        raise UnknownInstanceError(f"snapshot names unknown target {doc['origin']!r}")
    inst = TargetInstance(doc["id"], target, is_clone=doc["is_clone"])
    inst.x, inst.y = doc["x"], doc["y"]
    inst.direction = doc["direction"]
    inst.size = doc["size"]
    inst.visible = doc["visible"]
    inst.draggable = doc["draggable"]
    inst.rotation_style = doc["rotation_style"]
    inst.layer = doc["layer"]
    inst.costume_index = doc["costume"]
    inst.graphic_effects = dict(doc["effects"])
    inst.volume = doc["volume"]
    inst.bubble = tuple(doc["bubble"]) if doc["bubble"] else None
    inst.variables = dict(doc["variables"])
    inst.lists = {k: list(v) for k, v in doc["lists"].items()}
    inst.playing_sounds = [(n, parse_frac(t)) for n, t in doc["playing"]]
    return inst


def _restore_thread(project: Project, doc: dict) -> Thread:
    target = project.target_named(doc["target"])
    script = target.scripts[doc["script"]]
    thread = Thread(doc["id"], doc["instance"], doc["target"], doc["script"], script)
    thread.started = doc["started"]
    thread.status = doc["status"]
    thread.loop_counts = dict(doc["loops"])
    wait = doc["wait"]
    if wait is None:
        thread.wait = None
    elif wait[0] == "time":
        thread.wait = ("time", parse_frac(wait[1]))
    elif wait[0] == "glide":
        thread.wait = ("glide", wait[1], wait[2], wait[3], wait[4],
                       parse_frac(wait[5]), parse_frac(wait[6]))
    elif wait[0] == "threads":
        thread.wait = ("threads", list(wait[1]))
    elif wait[0] == "sound":
        thread.wait = ("sound", wait[1], parse_frac(wait[2]))
    elif wait[0] == "ask":
        thread.wait = ("ask", bool(wait[1]))
    else:
        thread.wait = ("until",)
    blocks_by_id = {}
    for stmt in (script.hat, *iter_statements(script.body)):
        blocks_by_id[stmt.id] = stmt
    frames = []
    for fdoc in doc["frames"]:
        if fdoc["owner"] is None:
            frame = Frame(seq=script.body, idx=fdoc["idx"])
        else:
            owner = blocks_by_id[fdoc["owner"]]
            frame = Frame(seq=owner.substacks[fdoc["sub"]], idx=fdoc["idx"],
                          owner=owner, sub=fdoc["sub"])
        frames.append(frame)
    thread.frames = frames
    return thread

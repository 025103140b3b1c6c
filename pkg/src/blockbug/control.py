"""Execution control: pause/resume, stepping, time travel, breakpoints.

The controller owns the debugger view of a traced run: the mode
(running/paused/stopped), the selected trace index while paused, and the
breakpoint set. It never executes blocks itself — all stepping goes through
the tracer — but it is the only component allowed to move the interpreter
back in time (restoring snapshots and truncating the trace).

Halt-before-execute: a breakpointed block is NOT in the trace when the halt
fires; the markers still point at its predecessor. Stepping or resuming past
the halt executes the block exactly once before the breakpoint re-arms.

State-changing calls emit protocol events (paused, resumed, truncated,
highlight, target_blink, notice) into ``outbox``; the session layer drains
and delivers them.
"""

from __future__ import annotations

from .errors import (
    BreakpointEligibilityError,
    DebugModeError,
    TraceIndexError,
)
from .model import block_lookup
from .tracing import Tracer
from .vm import BreakpointHalt, Vm, boot


class Controller:
    def __init__(self, tracer: Tracer):
        self.tracer = tracer
        self.mode = "stopped"  # running | paused | stopped
        self.selected: int | None = None
        self.breakpoints: set[str] = set()
        self.tracer.vm.breakpoints = self.breakpoints
        self.outbox: list[dict] = []
        self.pending_halt: str | None = None
        self._scheduled: dict[int, list[dict]] = {}
        self._notice_count = 0

    # -- plumbing ---------------------------------------------------------------

    @property
    def vm(self) -> Vm:
        return self.tracer.vm

    def _emit(self, event: str, **payload) -> None:
        self.outbox.append({"event": event, **payload})

    def _notice(self, message: str) -> None:
        self._notice_count += 1
        self._emit("notice", message=message)

    def _last_index(self) -> int | None:
        return len(self.tracer.entries) - 1 if self.tracer.entries else None

    def _at_live_end(self) -> bool:
        return self.selected == self._last_index()

    def _swap_vm(self, vm: Vm) -> None:
        """Install a restored interpreter; breakpoints travel with the
        debugger, not with snapshots."""
        vm.breakpoints = self.breakpoints
        self.tracer.vm = vm
        self.pending_halt = None

    def markers(self) -> dict:
        """Last executed block per active script plus the overall last."""
        state = self.vm.exec_state()
        return {"scripts": state["last"], "overall": state["overall_last"]}

    def _emit_paused(self, reason: str) -> None:
        payload = {
            "reason": reason,
            "markers": self.markers(),
            "selected_index": self.selected,
        }
        self._emit("paused", **payload)
        entries = self.tracer.entries
        if self.selected is not None and entries:
            self._emit("target_blink",
                       instance_id=entries[self.selected].instance_id)

    def _halt(self, halt: BreakpointHalt) -> None:
        self.mode = "paused"
        self.selected = self._last_index()
        self.pending_halt = halt.block_id
        self._emit("highlight", block_id=halt.block_id)
        self._emit_paused("breakpoint")

    def _arm_skip_if_halted(self) -> None:
        if self.pending_halt is not None:
            self.vm.bp_skip = self.pending_halt
            self.pending_halt = None

    # -- run control --------------------------------------------------------------

    def green_flag(self) -> None:
        """Restart the program: clears the trace and starts running."""
        self.tracer.press_green_flag()
        self.pending_halt = None
        self.selected = None
        self._scheduled = {}
        self.mode = "running"
        self._emit("resumed")

    def pause(self, reason: str = "user") -> None:
        if self.mode != "running":
            raise DebugModeError(f"cannot pause while {self.mode}")
        self.mode = "paused"
        self.selected = self._last_index()
        self._emit_paused(reason)

    def resume(self) -> None:
        """Continue execution; resuming from a past index discards the future."""
        if self.mode != "paused":
            raise DebugModeError(f"cannot resume while {self.mode}")
        if self.selected is not None and not self._at_live_end():
            index = self.selected
            self.tracer.truncate(index)
            self._swap_vm(self.tracer.restore_state(index))
            self._emit("truncated", new_length=len(self.tracer.entries))
        else:
            self._arm_skip_if_halted()
        self.mode = "running"
        self.selected = None
        self._emit("resumed")

    def schedule_events(self, timed_events: list[dict]) -> None:
        """Queue timed events ({"tick": t, "event": ...}) for future runs.
        The schedule survives breakpoint halts and resumes."""
        for rec in timed_events:
            self._scheduled.setdefault(int(rec["tick"]), []).append(rec["event"])

    def run(self, until_tick: int, timed_events: list[dict] = ()) -> str:
        """Run whole ticks while mode stays ``running``, up to the absolute
        virtual tick ``until_tick``. Returns why the loop ended: "end",
        "breakpoint", "cap", or "budget"."""
        if self.mode != "running":
            raise DebugModeError(f"cannot run while {self.mode}")
        self.schedule_events(timed_events)
        while True:
            if self.vm.tick_no >= until_tick:
                return "budget"
            for event in self._scheduled.pop(self.vm.tick_no + 1, []):
                self.tracer.inject(event)
            if self.vm.finished() and not self._scheduled:
                self.mode = "stopped"
                self.selected = None
                return "end"
            try:
                self.tracer.advance_tick()
            except BreakpointHalt as halt:
                self._halt(halt)
                return "breakpoint"
            if self.tracer.cap_hit:
                self.mode = "paused"
                self.selected = self._last_index()
                self._notice("trace cap reached; execution paused")
                self._emit_paused("trace-cap")
                return "cap"

    # -- stepping -------------------------------------------------------------------

    def _enter_history(self) -> None:
        """Navigating a finished run re-enters paused mode at the live end;
        the recorded past stays reachable after the program stops."""
        if self.mode == "stopped" and self.tracer.entries:
            self.mode = "paused"
            if self.selected is None:
                self.selected = self._last_index()

    def step_over(self) -> None:
        """At the live end: execute exactly one statement. At a historical
        index: move the selection forward and restore, touching nothing."""
        self._enter_history()
        if self.mode != "paused":
            raise DebugModeError(f"cannot step while {self.mode}")
        if self.selected is not None and not self._at_live_end():
            self.selected += 1
            self._swap_vm(self.tracer.restore_state(self.selected))
            self._emit_paused("step")
            return
        self._arm_skip_if_halted()
        before = len(self.tracer.entries)
        try:
            self.tracer.step_statement()
        except BreakpointHalt as halt:
            self._halt(halt)
            return
        if len(self.tracer.entries) == before:
            self._notice("program finished; nothing to step")
            return
        self.selected = self._last_index()
        entry = self.tracer.entries[-1]
        self._emit("highlight", block_id=entry.block_id)
        self._emit_paused("step")

    def step_back(self) -> None:
        self._enter_history()
        if self.mode != "paused":
            raise DebugModeError(f"cannot step while {self.mode}")
        if self.selected is None or self.selected == 0:
            self._notice("no predecessor to step back to")
            return
        self.selected -= 1
        self._swap_vm(self.tracer.restore_state(self.selected))
        self._emit_paused("step")

    def seek(self, index: int) -> None:
        self._enter_history()
        if self.mode != "paused":
            raise DebugModeError(f"cannot seek while {self.mode}")
        if not 0 <= index < len(self.tracer.entries):
            raise TraceIndexError(
                f"trace index {index} out of range (0..{len(self.tracer.entries) - 1})")
        self.selected = index
        self._swap_vm(self.tracer.restore_state(index))
        self._emit_paused("seek")

    def initial_step(self) -> None:
        """Fresh start, then a single executed block, then pause."""
        if self.mode == "running":
            raise DebugModeError("cannot take the initial step while running")
        self._swap_vm(boot(self.vm.project, seed=self.vm.seed))
        self.tracer.press_green_flag()
        try:
            self.tracer.step_statement()
        except BreakpointHalt as halt:  # breakpoints are never on hats, but stay safe
            self._halt(halt)
            return
        if not self.tracer.entries:
            self.mode = "stopped"
            self.selected = None
            self._notice("program has no green-flag scripts")
            return
        self.mode = "paused"
        self.selected = 0
        self._emit("highlight", block_id=self.tracer.entries[0].block_id)
        self._emit_paused("step")

    # -- breakpoints -------------------------------------------------------------------

    def set_breakpoint(self, block_id: str) -> None:
        _, _, block = block_lookup(self.vm.project, block_id)
        if not block.breakpoint_eligible:
            raise BreakpointEligibilityError(
                f"breakpoints are not allowed on {block.info.kind.value} blocks")
        self.breakpoints.add(block_id)

    def remove_breakpoint(self, block_id: str) -> None:
        if block_id not in self.breakpoints:
            return
        self.breakpoints.discard(block_id)
        if self.pending_halt == block_id:
            self.pending_halt = None

    def drain_outbox(self) -> list[dict]:
        out, self.outbox = self.outbox, []
        return out


def controller_for(project, seed: int = 0) -> Controller:
    return Controller(Tracer(boot(project, seed=seed)))

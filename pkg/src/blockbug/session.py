"""Debug sessions: the command table behind the protocol, and the scripted
session runner used for headless tests and golden transcripts.

A Session owns one engine stack (project, tracer, controller, analyses) and
is transport-agnostic: ``handle(command, payload)`` returns the response
payload plus any events the command produced. The server module frames these
as protocol messages; the script runner writes them into a transcript.

Time is virtual throughout — nothing here looks at the wall clock — so a
transcript replayed against a fresh session reproduces every byte.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path

from . import images, protocol
from .answers import Analyses, answer_question
from .control import Controller, controller_for
from .errors import ProtocolError, TraceIndexError, UnknownQuestionError
from .model import Block, Project, parse_project
from .questions import (
    list_executions,
    list_instances,
    questions_for_block,
    questions_for_target,
)
from .tracing import export_trace, import_trace
from .vm import restore

#: every event name a session can emit (the UI keeps a renderer per kind)
EVENT_KINDS = (
    "paused", "resumed", "truncated", "highlight", "target_blink", "notice",
    "project-loaded", "trace-cleared", "trace-appended", "stage-frame",
)

#: commands whose effect moves the interpreter, so the client needs a frame
_FRAME_COMMANDS = frozenset({
    "load_project", "green_flag", "tick", "pause", "resume", "step_over",
    "step_back", "initial_step", "seek", "import_trace",
})


class Session:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.project: Project | None = None
        self.controller: Controller | None = None
        self._analyses: Analyses | None = None
        self._questions: dict[str, object] = {}
        self._events: list[tuple[str, dict]] = []

    # -- plumbing ---------------------------------------------------------------

    def _emit(self, name: str, **payload) -> None:
        self._events.append((name, payload))

    def _require_project(self) -> Controller:
        if self.controller is None:
            raise ProtocolError("no project loaded")
        return self.controller

    @property
    def entries(self):
        return self.controller.tracer.entries if self.controller else []

    def handle(self, command: str, payload: dict) -> tuple[dict, list[tuple[str, dict]]]:
        """Run one command; -> (response payload, [(event name, payload)]).

        Engine errors become {"error": {...}} payloads; the session survives
        and the next command runs against unchanged state.
        """
        handler = COMMANDS.get(command)
        self._events = []
        if handler is None:
            exc = ProtocolError(f"unknown command {command!r}")
            return protocol.error_response(0, command, exc)["payload"], []
        before = len(self.entries)
        try:
            result = handler(self, payload) or {}
        except Exception as exc:  # noqa: BLE001 - protocol boundary
            events, self._events = self._events, []
            self._drain_controller(events)
            return protocol.error_response(0, command, exc)["payload"], events
        events, self._events = self._events, []
        self._drain_controller(events)
        if len(self.entries) != before:
            events.append(("trace-appended", {"length": len(self.entries)}))
        if command in _FRAME_COMMANDS and self.controller is not None:
            events.append(("stage-frame", self._frame_payload()))
        return result, events

    def _drain_controller(self, events: list) -> None:
        if self.controller is None:
            return
        for doc in self.controller.drain_outbox():
            doc = dict(doc)
            events.append((doc.pop("event"), doc))

    def _frame_payload(self, index: int | None = None) -> dict:
        ctl = self._require_project()
        if index is None:
            vm = ctl.vm
        else:
            entries = ctl.tracer.entries
            if not 0 <= index < len(entries):
                raise TraceIndexError(
                    f"trace index {index} out of range (0..{len(entries) - 1})")
            vm = restore(self.project, entries[index].post_state)
        return {"image": images.png_base64(images.stage_frame(vm)),
                "tick": vm.tick_no, "index": index}

    def _state(self) -> dict:
        ctl = self.controller
        return {
            "protocol": protocol.PROTOCOL_VERSION,
            "project": self.project is not None,
            "mode": ctl.mode if ctl else "stopped",
            "selected": ctl.selected if ctl else None,
            "trace_length": len(self.entries),
            "tick": ctl.vm.tick_no if ctl else 0,
            "tracing": ctl.tracer.enabled if ctl else True,
            "breakpoints": sorted(ctl.breakpoints) if ctl else [],
        }

    # -- commands ---------------------------------------------------------------

    def cmd_load_project(self, payload: dict) -> dict:
        if "source" in payload:
            text = payload["source"]
        elif "path" in payload:
            text = Path(payload["path"]).read_text(encoding="utf-8")
        else:
            raise ProtocolError("load_project needs 'source' or 'path'")
        project = parse_project(text)
        self.project = project
        self.controller = controller_for(project, seed=self.seed)
        self._analyses = None
        self._questions = {}
        self._emit("project-loaded",
                   targets=[t.name for t in project.targets])
        return {"targets": [t.name for t in project.targets],
                "sprites": [t.name for t in project.sprites]}

    def cmd_toggle_tracing(self, payload: dict) -> dict:
        ctl = self._require_project()
        on = bool(payload.get("on", not ctl.tracer.enabled))
        changed = on != ctl.tracer.enabled
        ctl.tracer.toggle_tracing(on)
        if changed:
            ctl.selected = None
            ctl.pending_halt = None
            self._emit("trace-cleared", tracing=on)
        return {"tracing": on, "cleared": changed}

    def cmd_green_flag(self, payload: dict) -> dict:
        ctl = self._require_project()
        ctl.green_flag()
        return self._state()

    def cmd_tick(self, payload: dict) -> dict:
        ctl = self._require_project()
        count = int(payload.get("count", 1))
        if count < 0:
            raise ProtocolError("tick count must be non-negative")
        stop = ctl.run(until_tick=ctl.vm.tick_no + count)
        return dict(self._state(), stop=stop)

    def cmd_inject_event(self, payload: dict) -> dict:
        ctl = self._require_project()
        event = payload.get("event")
        if not isinstance(event, dict):
            raise ProtocolError("inject_event needs an 'event' object")
        if "tick" in payload:
            ctl.schedule_events([{"tick": int(payload["tick"]),
                                  "event": event}])
            return {"scheduled": int(payload["tick"])}
        ctl.tracer.inject(event)
        return {"scheduled": None}

    def cmd_pause(self, payload: dict) -> dict:
        self._require_project().pause()
        return self._state()

    def cmd_resume(self, payload: dict) -> dict:
        self._require_project().resume()
        return self._state()

    def cmd_step_over(self, payload: dict) -> dict:
        self._require_project().step_over()
        return self._state()

    def cmd_step_back(self, payload: dict) -> dict:
        self._require_project().step_back()
        return self._state()

    def cmd_initial_step(self, payload: dict) -> dict:
        self._require_project().initial_step()
        return self._state()

    def cmd_seek(self, payload: dict) -> dict:
        self._require_project().seek(int(payload["index"]))
        return self._state()

    def cmd_set_breakpoint(self, payload: dict) -> dict:
        ctl = self._require_project()
        ctl.set_breakpoint(str(payload["block"]))
        return {"breakpoints": sorted(ctl.breakpoints)}

    def cmd_remove_breakpoint(self, payload: dict) -> dict:
        ctl = self._require_project()
        ctl.remove_breakpoint(str(payload["block"]))
        return {"breakpoints": sorted(ctl.breakpoints)}

    def cmd_list_instances(self, payload: dict) -> dict:
        self._require_project()
        return {"instances": list_instances(
            self.project, self.entries, str(payload["name"]))}

    def cmd_list_executions(self, payload: dict) -> dict:
        self._require_project()
        return {"executions": list_executions(
            self.entries, str(payload["block"]))}

    def cmd_list_questions(self, payload: dict) -> dict:
        self._require_project()
        if "instance" in payload:
            tree = questions_for_target(self.project, self.entries,
                                        int(payload["instance"]))
        elif "block" in payload:
            tree = questions_for_block(self.project, self.entries,
                                       str(payload["block"]),
                                       ordinal=int(payload.get("ordinal", 1)))
        else:
            raise ProtocolError("list_questions needs 'instance' or 'block'")
        for q in tree.questions:
            self._questions[q.id] = q
        return tree.to_dict()

    def cmd_ask(self, payload: dict) -> dict:
        self._require_project()
        qid = str(payload.get("question", ""))
        question = self._questions.get(qid)
        if question is None:
            raise UnknownQuestionError(
                f"unknown question id {qid!r}; list_questions first")
        if self._analyses is None:
            self._analyses = Analyses(self.project)
        answer = answer_question(self.project, self.entries, question,
                                 self._analyses)
        return dict(answer.to_dict(), question=qid)

    def cmd_export_trace(self, payload: dict) -> dict:
        ctl = self._require_project()
        text = export_trace(ctl.tracer)
        if "path" in payload:
            path = Path(payload["path"])
            path.write_text(text, encoding="utf-8")
            return {"path": str(payload["path"]),
                    "entries": len(ctl.tracer.entries)}
        return {"text": text, "entries": len(ctl.tracer.entries)}

    def cmd_import_trace(self, payload: dict) -> dict:
        self._require_project()
        if "text" in payload:
            text = payload["text"]
        elif "path" in payload:
            text = Path(payload["path"]).read_text(encoding="utf-8")
        else:
            raise ProtocolError("import_trace needs 'text' or 'path'")
        tracer = import_trace(self.project, text)
        ctl = Controller(tracer)
        self.controller = ctl
        self._questions = {}
        if tracer.entries:
            ctl.mode = "paused"
            ctl.selected = len(tracer.entries) - 1
            ctl._emit_paused("import")
        return self._state()

    def cmd_get_stage_frame(self, payload: dict) -> dict:
        index = payload.get("index")
        return self._frame_payload(None if index is None else int(index))

    def cmd_get_scripts(self, payload: dict) -> dict:
        self._require_project()
        return {"targets": [_target_doc(t) for t in self.project.targets]}

    def cmd_get_state(self, payload: dict) -> dict:
        return self._state()


#: protocol command -> handler; the coverage test walks this table
COMMANDS = {
    "load_project": Session.cmd_load_project,
    "toggle_tracing": Session.cmd_toggle_tracing,
    "green_flag": Session.cmd_green_flag,
    "tick": Session.cmd_tick,
    "inject_event": Session.cmd_inject_event,
    "pause": Session.cmd_pause,
    "resume": Session.cmd_resume,
    "step_over": Session.cmd_step_over,
    "step_back": Session.cmd_step_back,
    "initial_step": Session.cmd_initial_step,
    "seek": Session.cmd_seek,
    "set_breakpoint": Session.cmd_set_breakpoint,
    "remove_breakpoint": Session.cmd_remove_breakpoint,
    "list_instances": Session.cmd_list_instances,
    "list_executions": Session.cmd_list_executions,
    "list_questions": Session.cmd_list_questions,
    "ask": Session.cmd_ask,
    "export_trace": Session.cmd_export_trace,
    "import_trace": Session.cmd_import_trace,
    "get_stage_frame": Session.cmd_get_stage_frame,
    "get_scripts": Session.cmd_get_scripts,
    "get_state": Session.cmd_get_state,
}


def _block_doc(block: Block) -> dict:
    info = block.info
    inputs = []
    for name, slot_kind in info.inputs:
        slot = block.inputs.get(name)
        doc = {"name": name, "kind": slot_kind}
        if slot is None:
            doc["value"] = None
        elif slot.kind == "literal":
            doc["value"] = slot.value
        elif slot.kind == "color":
            doc["value"] = "#%02X%02X%02X" % slot.color
        else:
            doc["block"] = _block_doc(slot.block)
        inputs.append(doc)
    from .model import CATEGORY_COLORS, block_text
    return {
        "id": block.id,
        "opcode": block.opcode,
        "kind": info.kind.value,
        "category": info.category.value,
        "color": CATEGORY_COLORS[info.category],
        "text": block_text(block),
        "breakpoint_eligible": block.breakpoint_eligible,
        "fields": dict(block.fields),
        "inputs": inputs,
        "substacks": [[_block_doc(b) for b in stack]
                      for stack in block.substacks],
    }


def _target_doc(target) -> dict:
    return {
        "name": target.name,
        "is_stage": target.is_stage,
        "scripts": [{"hat": _block_doc(s.hat),
                     "body": [_block_doc(b) for b in s.body]}
                    for s in target.scripts],
    }


# ---------------------------------------------------------------------------
# scripted sessions


@dataclass
class ScriptCommand:
    verb: str
    args: list[str]
    line_no: int
    raw: str


def parse_script(text: str) -> list[ScriptCommand]:
    commands = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            tokens = shlex.split(line)
        except ValueError as e:
            raise ProtocolError(f"script line {n}: {e}") from e
        commands.append(ScriptCommand(tokens[0], tokens[1:], n, raw))
    return commands


_EVENT_SHAPES = {
    "key-down": ("key",),
    "key-up": ("key",),
    "sprite-click": ("sprite",),
    "mouse-move": ("x", "y"),
    "mouse-down": (),
    "mouse-up": (),
    "answer": ("text",),
}


def _script_event(args: list[str]) -> tuple[dict, int | None]:
    """``event key-down a [@40]`` -> ({"type": "key-down", "key": "a"}, 40)."""
    tick = None
    if args and args[-1].startswith("@"):
        tick = int(args[-1][1:])
        args = args[:-1]
    if not args or args[0] not in _EVENT_SHAPES:
        raise ProtocolError(
            f"unknown event type {args[0] if args else '(none)'!r}")
    kind, params = args[0], _EVENT_SHAPES[args[0]]
    event: dict = {"type": kind}
    if params == ("text",):
        event["text"] = " ".join(args[1:])
    else:
        if len(args) - 1 != len(params):
            raise ProtocolError(f"event {kind} needs {len(params)} argument(s)")
        for name, value in zip(params, args[1:]):
            event[name] = float(value) if name in ("x", "y") else value
    return event, tick


_EXPECT_OPS = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    "contains": lambda a, b: any(str(b) in str(x) for x in a)
    if isinstance(a, (list, tuple)) else str(b) in str(a),
}


def _expect_value(token: str):
    if token == "none":
        return None
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


@dataclass
class ScriptRunner:
    """Executes a SessionScript, collecting a protocol transcript."""

    session: Session
    base_dir: Path = Path(".")
    transcript: list[str] = field(default_factory=list)
    halts: int = 0
    last_response: dict = field(default_factory=dict)
    last_questions: list = field(default_factory=list)
    last_answer: str = ""
    last_error: str | None = None
    _seq: int = 0
    _event_seq: int = 0

    def request(self, command: str, payload: dict | None = None) -> dict:
        self._seq += 1
        msg = protocol.request(self._seq, command, payload)
        self.transcript.append(protocol.encode(msg))
        result, events = self.session.handle(command, msg["payload"])
        resp = protocol.response(self._seq, command, result)
        self.transcript.append(protocol.encode(resp))
        for name, data in events:
            self._event_seq += 1
            self.transcript.append(protocol.encode(
                protocol.event(self._event_seq, name, data)))
            if name == "paused" and data.get("reason") == "breakpoint":
                self.halts += 1
        self.last_response = result
        self.last_error = (result.get("error") or {}).get("code")
        if command == "list_questions" and "error" not in result:
            self.last_questions = [
                q for cat in result.get("categories", [])
                for grp in cat.get("groups", [])
                for q in grp.get("questions", [])]
        if command == "ask" and "error" not in result:
            self.last_answer = result.get("text", "")
        return result

    # -- metric access for expect -------------------------------------------

    def metric(self, name: str):
        state = self.session._state()
        if name in state:
            return state[name]
        if name == "halts":
            return self.halts
        if name == "answer":
            return self.last_answer
        if name == "error":
            return self.last_error
        if name == "questions":
            return [q["text"] for q in self.last_questions]
        if name == "stop":
            return self.last_response.get("stop")
        raise ProtocolError(f"unknown expect metric {name!r}")

    def check(self, cmd: ScriptCommand) -> bool:
        if len(cmd.args) < 3:
            raise ProtocolError(
                f"script line {cmd.line_no}: expect needs METRIC OP VALUE")
        metric, op = cmd.args[0], cmd.args[1]
        if op not in _EXPECT_OPS:
            raise ProtocolError(f"unknown expect operator {op!r}")
        expected = _expect_value(" ".join(cmd.args[2:]))
        actual = self.metric(metric)
        ok = bool(_EXPECT_OPS[op](actual, expected))
        self._event_seq += 1
        self.transcript.append(protocol.encode(protocol.event(
            self._event_seq, "expect",
            {"line": cmd.line_no, "ok": ok, "metric": metric, "op": op,
             "expected": expected,
             "actual": actual if not isinstance(actual, list) else len(actual)})))
        return ok

    def resolve_question(self, selector: str) -> str:
        """A question id, or a (quoted) question text from the last listing."""
        for q in self.last_questions:
            if q["id"] == selector or q["text"] == selector:
                return q["id"]
        return selector

    def run(self, commands: list[ScriptCommand]) -> int:
        for cmd in commands:
            verb, args = cmd.verb, cmd.args
            if verb == "expect":
                if not self.check(cmd):
                    return 1
                continue
            if verb == "load":
                self.request("load_project",
                             {"path": str(self.base_dir / args[0])})
            elif verb == "flag":
                self.request("green_flag")
            elif verb == "tick":
                self.request("tick", {"count": int(args[0])})
            elif verb == "event":
                event, tick = _script_event(args)
                payload = {"event": event}
                if tick is not None:
                    payload["tick"] = tick
                self.request("inject_event", payload)
            elif verb == "pause":
                self.request("pause")
            elif verb == "resume":
                self.request("resume")
            elif verb == "step":
                self.request("step_over")
            elif verb == "step_back":
                self.request("step_back")
            elif verb == "initial_step":
                self.request("initial_step")
            elif verb == "seek":
                self.request("seek", {"index": int(args[0])})
            elif verb == "break":
                self.request("set_breakpoint", {"block": args[0]})
            elif verb == "unbreak":
                self.request("remove_breakpoint", {"block": args[0]})
            elif verb == "questions":
                kind, _, rest = args[0].partition(":")
                if kind == "instance":
                    self.request("list_questions", {"instance": int(rest)})
                elif kind == "block":
                    block, _, ordinal = rest.partition(":")
                    payload = {"block": block}
                    if ordinal:
                        payload["ordinal"] = int(ordinal)
                    self.request("list_questions", payload)
                else:
                    raise ProtocolError(
                        f"script line {cmd.line_no}: questions needs "
                        f"instance:<id> or block:<id>[:<ordinal>]")
            elif verb == "ask":
                self.request("ask",
                             {"question": self.resolve_question(args[0])})
            elif verb == "export":
                self.request("export_trace",
                             {"path": str(self.base_dir / args[0])})
            elif verb == "import":
                self.request("import_trace",
                             {"path": str(self.base_dir / args[0])})
            elif verb == "frame":
                payload = {"index": int(args[0])} if args else {}
                self.request("get_stage_frame", payload)
            elif verb == "state":
                self.request("get_state")
            else:
                raise ProtocolError(
                    f"script line {cmd.line_no}: unknown command {verb!r}")
            if self.last_error is not None:
                # engine errors don't kill the session, but a script that
                # trips one without expecting it should fail loudly
                return 1
        return 0


def run_script_text(text: str, base_dir: str | Path = ".",
                    seed: int = 0, project: str | None = None) -> tuple[int, list[str]]:
    runner = ScriptRunner(Session(seed=seed), base_dir=Path(base_dir))
    if project is not None:
        runner.request("load_project", {"path": str(project)})
        if runner.last_error is not None:
            return 1, runner.transcript
    exit_code = runner.run(parse_script(text))
    return exit_code, runner.transcript


def run_script(path: str | Path, seed: int = 0,
               project: str | None = None) -> tuple[int, list[str]]:
    path = Path(path)
    return run_script_text(path.read_text(encoding="utf-8"),
                           base_dir=path.parent, seed=seed, project=project)

"""Static program model: opcode table, AST types, project parsing and validation.

The on-disk project format (.nbp.json) is documented in docs/format.md, which
is the normative schema. Projects are immutable after load and safe to share
across readers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .costumes import CostumeAsset, costume_from_json, costume_to_json
from .errors import (
    ArityMismatchError,
    DuplicateIdError,
    ProjectFormatError,
    UnknownIdError,
    UnknownOpcodeError,
)
from .values import Value


class Category(str, Enum):
    MOTION = "Motion"
    LOOKS = "Looks"
    SOUND = "Sound"
    EVENTS = "Events"
    CONTROL = "Control"
    SENSING = "Sensing"
    OPERATORS = "Operators"
    VARIABLES = "Variables"
    LISTS = "Lists"


# Category colors as used by question trees and the UI.
CATEGORY_COLORS = {
    Category.MOTION: "#4C97FF",
    Category.LOOKS: "#9966FF",
    Category.SOUND: "#C94FC9",
    Category.EVENTS: "#FFBF00",
    Category.CONTROL: "#FFAB19",
    Category.SENSING: "#5CB1D6",
    Category.OPERATORS: "#59C059",
    Category.VARIABLES: "#FF8C1A",
    Category.LISTS: "#FF661A",
}
EXECUTION_COLOR = "#D0112A"


class BlockKind(str, Enum):
    HAT = "hat"
    STATEMENT = "statement"
    REPORTER = "reporter"
    BOOLEAN = "boolean"


@dataclass(frozen=True)
class OpcodeInfo:
    """Static description of one opcode: shape, slots and display strings."""

    name: str
    category: Category
    kind: BlockKind
    inputs: tuple[tuple[str, str], ...] = ()  # (slot name, slot kind)
    fields: tuple[str, ...] = ()
    substacks: int = 0
    waiting: bool = False
    terminal: bool = False  # no fall-through successor
    label: str = ""  # render template, {NAME} per slot/field
    type_name: str = ""  # short human name used in answer texts

    def input_kind(self, name: str) -> str | None:
        for n, k in self.inputs:
            if n == name:
                return k
        return None


def _op(
    name: str,
    category: Category,
    kind: BlockKind,
    label: str,
    type_name: str = "",
    inputs: tuple[tuple[str, str], ...] = (),
    fields: tuple[str, ...] = (),
    substacks: int = 0,
    waiting: bool = False,
    terminal: bool = False,
) -> OpcodeInfo:
    return OpcodeInfo(
        name=name,
        category=category,
        kind=kind,
        inputs=inputs,
        fields=fields,
        substacks=substacks,
        waiting=waiting,
        terminal=terminal,
        label=label,
        type_name=type_name or label.split("{")[0].strip() or name,
    )


_C = Category
_K = BlockKind

OPCODES: dict[str, OpcodeInfo] = {
    op.name: op
    for op in [
        # Events
        _op("event_whenflagclicked", _C.EVENTS, _K.HAT, "when green flag clicked"),
        _op("event_whenkeypressed", _C.EVENTS, _K.HAT, "when {KEY_OPTION} key pressed",
            fields=("KEY_OPTION",)),
        _op("event_whenthisspriteclicked", _C.EVENTS, _K.HAT, "when this sprite clicked"),
        _op("event_whenbroadcastreceived", _C.EVENTS, _K.HAT, "when I receive {BROADCAST_OPTION}",
            fields=("BROADCAST_OPTION",)),
        _op("event_whenbackdropswitchesto", _C.EVENTS, _K.HAT, "when backdrop switches to {BACKDROP}",
            fields=("BACKDROP",)),
        _op("event_broadcast", _C.EVENTS, _K.STATEMENT, "broadcast {BROADCAST_INPUT}",
            type_name="broadcast", inputs=(("BROADCAST_INPUT", "any"),)),
        _op("event_broadcastandwait", _C.EVENTS, _K.STATEMENT, "broadcast {BROADCAST_INPUT} and wait",
            type_name="broadcast and wait", inputs=(("BROADCAST_INPUT", "any"),), waiting=True),
        # Control
        _op("control_wait", _C.CONTROL, _K.STATEMENT, "wait {DURATION} seconds",
            type_name="wait", inputs=(("DURATION", "number"),), waiting=True),
        _op("control_repeat", _C.CONTROL, _K.STATEMENT, "repeat {TIMES}",
            type_name="repeat", inputs=(("TIMES", "number"),), substacks=1),
        _op("control_forever", _C.CONTROL, _K.STATEMENT, "forever",
            substacks=1, terminal=True),
        _op("control_if", _C.CONTROL, _K.STATEMENT, "if {CONDITION} then",
            type_name="if", inputs=(("CONDITION", "boolean"),), substacks=1),
        _op("control_if_else", _C.CONTROL, _K.STATEMENT, "if {CONDITION} then else",
            type_name="if else", inputs=(("CONDITION", "boolean"),), substacks=2),
        _op("control_wait_until", _C.CONTROL, _K.STATEMENT, "wait until {CONDITION}",
            type_name="wait until", inputs=(("CONDITION", "boolean"),), waiting=True),
        _op("control_repeat_until", _C.CONTROL, _K.STATEMENT, "repeat until {CONDITION}",
            type_name="repeat until", inputs=(("CONDITION", "boolean"),), substacks=1),
        _op("control_stop", _C.CONTROL, _K.STATEMENT, "stop {STOP_OPTION}",
            type_name="stop", fields=("STOP_OPTION",), terminal=True),
        _op("control_create_clone_of", _C.CONTROL, _K.STATEMENT, "create clone of {CLONE_OPTION}",
            type_name="create clone", fields=("CLONE_OPTION",)),
        _op("control_start_as_clone", _C.CONTROL, _K.HAT, "when I start as a clone"),
        _op("control_delete_this_clone", _C.CONTROL, _K.STATEMENT, "delete this clone",
            terminal=True),
        # Motion
        _op("motion_movesteps", _C.MOTION, _K.STATEMENT, "move {STEPS} steps",
            type_name="move", inputs=(("STEPS", "number"),)),
        _op("motion_gotoxy", _C.MOTION, _K.STATEMENT, "go to x: {X} y: {Y}",
            type_name="go to", inputs=(("X", "number"), ("Y", "number"))),
        _op("motion_glideto", _C.MOTION, _K.STATEMENT, "glide {SECS} secs to x: {X} y: {Y}",
            type_name="glide", inputs=(("SECS", "number"), ("X", "number"), ("Y", "number")),
            waiting=True),
        _op("motion_pointtowards", _C.MOTION, _K.STATEMENT, "point towards {TOWARDS}",
            type_name="point towards", fields=("TOWARDS",)),
        _op("motion_pointindirection", _C.MOTION, _K.STATEMENT, "point in direction {DIRECTION}",
            type_name="point in direction", inputs=(("DIRECTION", "number"),)),
        _op("motion_turnright", _C.MOTION, _K.STATEMENT, "turn right {DEGREES} degrees",
            type_name="turn right", inputs=(("DEGREES", "number"),)),
        _op("motion_turnleft", _C.MOTION, _K.STATEMENT, "turn left {DEGREES} degrees",
            type_name="turn left", inputs=(("DEGREES", "number"),)),
        _op("motion_setx", _C.MOTION, _K.STATEMENT, "set x to {X}",
            type_name="set x", inputs=(("X", "number"),)),
        _op("motion_changex", _C.MOTION, _K.STATEMENT, "change x by {DX}",
            type_name="change x", inputs=(("DX", "number"),)),
        _op("motion_sety", _C.MOTION, _K.STATEMENT, "set y to {Y}",
            type_name="set y", inputs=(("Y", "number"),)),
        _op("motion_changey", _C.MOTION, _K.STATEMENT, "change y by {DY}",
            type_name="change y", inputs=(("DY", "number"),)),
        _op("motion_xposition", _C.MOTION, _K.REPORTER, "x position"),
        _op("motion_yposition", _C.MOTION, _K.REPORTER, "y position"),
        _op("motion_direction", _C.MOTION, _K.REPORTER, "direction"),
        # Looks
        _op("looks_say", _C.LOOKS, _K.STATEMENT, "say {MESSAGE}",
            type_name="say", inputs=(("MESSAGE", "any"),)),
        _op("looks_sayforsecs", _C.LOOKS, _K.STATEMENT, "say {MESSAGE} for {SECS} seconds",
            type_name="say", inputs=(("MESSAGE", "any"), ("SECS", "number")), waiting=True),
        _op("looks_think", _C.LOOKS, _K.STATEMENT, "think {MESSAGE}",
            type_name="think", inputs=(("MESSAGE", "any"),)),
        _op("looks_thinkforsecs", _C.LOOKS, _K.STATEMENT, "think {MESSAGE} for {SECS} seconds",
            type_name="think", inputs=(("MESSAGE", "any"), ("SECS", "number")), waiting=True),
        _op("looks_show", _C.LOOKS, _K.STATEMENT, "show"),
        _op("looks_hide", _C.LOOKS, _K.STATEMENT, "hide"),
        _op("looks_switchcostume", _C.LOOKS, _K.STATEMENT, "switch costume to {COSTUME}",
            type_name="switch costume", fields=("COSTUME",)),
        _op("looks_nextcostume", _C.LOOKS, _K.STATEMENT, "next costume"),
        _op("looks_switchbackdrop", _C.LOOKS, _K.STATEMENT, "switch backdrop to {BACKDROP}",
            type_name="switch backdrop", fields=("BACKDROP",)),
        _op("looks_setsize", _C.LOOKS, _K.STATEMENT, "set size to {SIZE} %",
            type_name="set size", inputs=(("SIZE", "number"),)),
        _op("looks_changesize", _C.LOOKS, _K.STATEMENT, "change size by {CHANGE}",
            type_name="change size", inputs=(("CHANGE", "number"),)),
        _op("looks_size", _C.LOOKS, _K.REPORTER, "size"),
        _op("looks_costumenumber", _C.LOOKS, _K.REPORTER, "costume number"),
        _op("looks_backdropnumber", _C.LOOKS, _K.REPORTER, "backdrop number"),
        # Sound
        _op("sound_play", _C.SOUND, _K.STATEMENT, "start sound {SOUND_MENU}",
            type_name="play sound", fields=("SOUND_MENU",)),
        _op("sound_playuntildone", _C.SOUND, _K.STATEMENT, "play sound {SOUND_MENU} until done",
            type_name="play sound until done", fields=("SOUND_MENU",), waiting=True),
        _op("sound_stopall", _C.SOUND, _K.STATEMENT, "stop all sounds"),
        # Sensing
        _op("sensing_touchingobject", _C.SENSING, _K.BOOLEAN, "touching {TOUCHINGOBJECTMENU} ?",
            fields=("TOUCHINGOBJECTMENU",)),
        _op("sensing_touchingcolor", _C.SENSING, _K.BOOLEAN, "touching color {COLOR} ?",
            inputs=(("COLOR", "color"),)),
        _op("sensing_coloristouchingcolor", _C.SENSING, _K.BOOLEAN,
            "color {COLOR} is touching {COLOR2} ?",
            inputs=(("COLOR", "color"), ("COLOR2", "color"))),
        _op("sensing_distanceto", _C.SENSING, _K.REPORTER, "distance to {DISTANCETOMENU}",
            fields=("DISTANCETOMENU",)),
        _op("sensing_keypressed", _C.SENSING, _K.BOOLEAN, "key {KEY_OPTION} pressed ?",
            fields=("KEY_OPTION",)),
        _op("sensing_mousex", _C.SENSING, _K.REPORTER, "mouse x"),
        _op("sensing_mousey", _C.SENSING, _K.REPORTER, "mouse y"),
        _op("sensing_askandwait", _C.SENSING, _K.STATEMENT, "ask {QUESTION} and wait",
            type_name="ask", inputs=(("QUESTION", "any"),), waiting=True),
        # Operators
        _op("operator_add", _C.OPERATORS, _K.REPORTER, "{NUM1} + {NUM2}",
            type_name="+", inputs=(("NUM1", "number"), ("NUM2", "number"))),
        _op("operator_subtract", _C.OPERATORS, _K.REPORTER, "{NUM1} - {NUM2}",
            type_name="-", inputs=(("NUM1", "number"), ("NUM2", "number"))),
        _op("operator_multiply", _C.OPERATORS, _K.REPORTER, "{NUM1} * {NUM2}",
            type_name="*", inputs=(("NUM1", "number"), ("NUM2", "number"))),
        _op("operator_divide", _C.OPERATORS, _K.REPORTER, "{NUM1} / {NUM2}",
            type_name="/", inputs=(("NUM1", "number"), ("NUM2", "number"))),
        _op("operator_lt", _C.OPERATORS, _K.BOOLEAN, "{OPERAND1} < {OPERAND2}",
            type_name="<", inputs=(("OPERAND1", "any"), ("OPERAND2", "any"))),
        _op("operator_equals", _C.OPERATORS, _K.BOOLEAN, "{OPERAND1} = {OPERAND2}",
            type_name="=", inputs=(("OPERAND1", "any"), ("OPERAND2", "any"))),
        _op("operator_gt", _C.OPERATORS, _K.BOOLEAN, "{OPERAND1} > {OPERAND2}",
            type_name=">", inputs=(("OPERAND1", "any"), ("OPERAND2", "any"))),
        _op("operator_and", _C.OPERATORS, _K.BOOLEAN, "{OPERAND1} and {OPERAND2}",
            type_name="and", inputs=(("OPERAND1", "boolean"), ("OPERAND2", "boolean"))),
        _op("operator_or", _C.OPERATORS, _K.BOOLEAN, "{OPERAND1} or {OPERAND2}",
            type_name="or", inputs=(("OPERAND1", "boolean"), ("OPERAND2", "boolean"))),
        _op("operator_not", _C.OPERATORS, _K.BOOLEAN, "not {OPERAND}",
            type_name="not", inputs=(("OPERAND", "boolean"),)),
        _op("operator_random", _C.OPERATORS, _K.REPORTER, "pick random {FROM} to {TO}",
            type_name="pick random", inputs=(("FROM", "number"), ("TO", "number"))),
        _op("operator_join", _C.OPERATORS, _K.REPORTER, "join {STRING1} {STRING2}",
            type_name="join", inputs=(("STRING1", "any"), ("STRING2", "any"))),
        _op("operator_contains", _C.OPERATORS, _K.BOOLEAN, "{STRING1} contains {STRING2} ?",
            type_name="contains", inputs=(("STRING1", "any"), ("STRING2", "any"))),
        # Variables
        _op("data_setvariable", _C.VARIABLES, _K.STATEMENT, "set {VARIABLE} to {VALUE}",
            type_name="set variable", fields=("VARIABLE",), inputs=(("VALUE", "any"),)),
        _op("data_changevariable", _C.VARIABLES, _K.STATEMENT, "change {VARIABLE} by {VALUE}",
            type_name="change variable", fields=("VARIABLE",), inputs=(("VALUE", "number"),)),
        _op("data_variable", _C.VARIABLES, _K.REPORTER, "{VARIABLE}", type_name="variable",
            fields=("VARIABLE",)),
        # Lists
        _op("data_addtolist", _C.LISTS, _K.STATEMENT, "add {ITEM} to {LIST}",
            type_name="add to list", fields=("LIST",), inputs=(("ITEM", "any"),)),
        _op("data_deleteoflist", _C.LISTS, _K.STATEMENT, "delete {INDEX} of {LIST}",
            type_name="delete of list", fields=("LIST",), inputs=(("INDEX", "number"),)),
        _op("data_insertatlist", _C.LISTS, _K.STATEMENT, "insert {ITEM} at {INDEX} of {LIST}",
            type_name="insert at list", fields=("LIST",),
            inputs=(("ITEM", "any"), ("INDEX", "number"))),
        _op("data_replaceitemoflist", _C.LISTS, _K.STATEMENT,
            "replace item {INDEX} of {LIST} with {ITEM}", type_name="replace item of list",
            fields=("LIST",), inputs=(("INDEX", "number"), ("ITEM", "any"))),
        _op("data_itemoflist", _C.LISTS, _K.REPORTER, "item {INDEX} of {LIST}",
            type_name="item of list", fields=("LIST",), inputs=(("INDEX", "number"),)),
        _op("data_lengthoflist", _C.LISTS, _K.REPORTER, "length of {LIST}",
            type_name="length of list", fields=("LIST",)),
        _op("data_listcontainsitem", _C.LISTS, _K.BOOLEAN, "{LIST} contains {ITEM} ?",
            type_name="list contains", fields=("LIST",), inputs=(("ITEM", "any"),)),
        _op("data_listcontents", _C.LISTS, _K.REPORTER, "{LIST}", type_name="list",
            fields=("LIST",)),
    ]
}

HAT_OPCODES = frozenset(n for n, i in OPCODES.items() if i.kind is BlockKind.HAT)
WAITING_OPCODES = frozenset(n for n, i in OPCODES.items() if i.waiting)


def opcode_category(opcode: str) -> Category:
    """Category of a known opcode; raises for unknown opcodes."""
    info = OPCODES.get(opcode)
    if info is None:
        raise UnknownOpcodeError(f"unknown opcode: {opcode}")
    return info.category


@dataclass(frozen=True)
class InputSlot:
    """One filled input hole: a literal, a color literal, or a nested block."""

    kind: str  # "literal" | "color" | "block"
    value: Value | None = None
    color: tuple[int, int, int] | None = None
    block: "Block | None" = None


@dataclass(frozen=True)
class Block:
    id: str
    opcode: str
    inputs: dict[str, InputSlot] = field(default_factory=dict)
    fields: dict[str, str] = field(default_factory=dict)
    substacks: tuple[tuple["Block", ...], ...] = ()

    @property
    def info(self) -> OpcodeInfo:
        return OPCODES[self.opcode]

    @property
    def breakpoint_eligible(self) -> bool:
        return self.info.kind is BlockKind.STATEMENT

    def nested_blocks(self):
        """Yield the reporter/Boolean blocks in this block's input slots,
        depth-first in slot order."""
        for name, _ in self.info.inputs:
            slot = self.inputs.get(name)
            if slot is not None and slot.kind == "block" and slot.block is not None:
                yield slot.block
                yield from slot.block.nested_blocks()


@dataclass(frozen=True)
class Script:
    hat: Block
    body: tuple[Block, ...]


@dataclass(frozen=True)
class VariableDecl:
    name: str
    value: Value


@dataclass(frozen=True)
class ListDecl:
    name: str
    values: tuple[Value, ...]


@dataclass(frozen=True)
class SoundDecl:
    name: str
    duration: float = 0.0


@dataclass(frozen=True)
class InitialState:
    x: float = 0.0
    y: float = 0.0
    direction: float = 90.0
    size: float = 100.0
    visible: bool = True
    rotation_style: str = "all-around"
    draggable: bool = False
    costume: int = 0
    layer: int = 0


@dataclass(frozen=True)
class Target:
    name: str
    is_stage: bool
    scripts: tuple[Script, ...]
    variables: tuple[VariableDecl, ...] = ()
    lists: tuple[ListDecl, ...] = ()
    costumes: tuple[CostumeAsset, ...] = ()
    sounds: tuple[SoundDecl, ...] = ()
    initial: InitialState = InitialState()

    def all_blocks(self):
        for script in self.scripts:
            yield script.hat
            yield from script.hat.nested_blocks()
            for blk in iter_statements(script.body):
                yield blk
                yield from blk.nested_blocks()


@dataclass(frozen=True)
class Monitor:
    target: str
    kind: str  # "variable" | "list"
    name: str
    visible: bool = True


@dataclass
class Project:
    stage: Target
    sprites: tuple[Target, ...]
    monitors: tuple[Monitor, ...] = ()
    _index: dict | None = field(default=None, repr=False, compare=False)

    @property
    def targets(self) -> tuple[Target, ...]:
        return (self.stage, *self.sprites)

    def target_named(self, name: str) -> Target | None:
        for t in self.targets:
            if t.name == name:
                return t
        return None

    def _block_index(self) -> dict:
        if self._index is None:
            index: dict[str, tuple[Target, Script, Block, Block]] = {}
            for target in self.targets:
                for script in target.scripts:
                    for stmt in (script.hat, *iter_statements(script.body)):
                        index[stmt.id] = (target, script, stmt, stmt)
                        for nested in stmt.nested_blocks():
                            index[nested.id] = (target, script, nested, stmt)
            self._index = index
        return self._index

    def block_ids(self) -> list[str]:
        return list(self._block_index().keys())


def iter_statements(body) -> "list[Block]":
    """Flatten a block sequence including all substack statements, pre-order."""
    out: list[Block] = []
    for blk in body:
        out.append(blk)
        for sub in blk.substacks:
            out.extend(iter_statements(sub))
    return out


def block_lookup(project: Project, block_id: str) -> tuple[Target, Script, Block]:
    """Resolve a block id to its owning target and script.

    Reporter/Boolean blocks resolve to the script of their enclosing
    statement block.
    """
    entry = project._block_index().get(block_id)
    if entry is None:
        raise UnknownIdError(f"unknown block id: {block_id}")
    target, script, block, _ = entry
    return target, script, block


def enclosing_statement(project: Project, block_id: str) -> Block:
    entry = project._block_index().get(block_id)
    if entry is None:
        raise UnknownIdError(f"unknown block id: {block_id}")
    return entry[3]


# --- Parsing ---------------------------------------------------------------


def parse_project(data: bytes | str) -> Project:
    """Parse and structurally validate a .nbp.json project file."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ProjectFormatError(f"project file is not UTF-8: {e}")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise ProjectFormatError(f"invalid JSON: {e.msg}", line=e.lineno, column=e.colno)
    return project_from_dict(doc)


def project_from_dict(doc: dict) -> Project:
    if not isinstance(doc, dict) or "stage" not in doc:
        raise ProjectFormatError("project must be an object with a 'stage' entry")
    seen_ids: set[str] = set()
    stage = _target_from_dict(doc["stage"], is_stage=True, seen_ids=seen_ids)
    sprites = tuple(
        _target_from_dict(s, is_stage=False, seen_ids=seen_ids)
        for s in doc.get("sprites", [])
    )
    monitors = tuple(
        Monitor(
            target=m.get("target", "Stage"),
            kind=m.get("kind", "variable"),
            name=m["name"],
            visible=bool(m.get("visible", True)),
        )
        for m in doc.get("monitors", [])
    )
    return Project(stage=stage, sprites=sprites, monitors=monitors)


def _target_from_dict(doc: dict, is_stage: bool, seen_ids: set[str]) -> Target:
    name = doc.get("name", "Stage" if is_stage else "")
    init_doc = doc.get("initial", {})
    initial = InitialState(
        x=float(init_doc.get("x", 0.0)),
        y=float(init_doc.get("y", 0.0)),
        direction=float(init_doc.get("direction", 90.0)),
        size=float(init_doc.get("size", 100.0)),
        visible=bool(init_doc.get("visible", True)),
        rotation_style=init_doc.get("rotation_style", "all-around"),
        draggable=bool(init_doc.get("draggable", False)),
        costume=int(init_doc.get("costume", 0)),
        layer=int(init_doc.get("layer", 0)),
    )
    if is_stage:
        initial = InitialState(costume=initial.costume, layer=0, direction=90.0)
    costumes = tuple(costume_from_json(c) for c in doc.get("costumes", []))
    sounds = []
    for s in doc.get("sounds", []):
        if isinstance(s, str):
            sounds.append(SoundDecl(name=s))
        else:
            sounds.append(SoundDecl(name=s["name"], duration=float(s.get("duration", 0.0))))
    variables = tuple(
        VariableDecl(name=v["name"], value=v.get("value", 0)) for v in doc.get("variables", [])
    )
    lists = tuple(
        ListDecl(name=v["name"], values=tuple(v.get("values", []))) for v in doc.get("lists", [])
    )
    scripts = tuple(_script_from_dict(s, seen_ids) for s in doc.get("scripts", []))
    return Target(
        name=name,
        is_stage=is_stage,
        scripts=scripts,
        variables=variables,
        lists=lists,
        costumes=costumes,
        sounds=tuple(sounds),
        initial=initial,
    )


def _script_from_dict(doc: dict, seen_ids: set[str]) -> Script:
    if "hat" not in doc:
        raise ProjectFormatError("script is missing a 'hat' block")
    hat = _block_from_dict(doc["hat"], seen_ids)
    body = tuple(_block_from_dict(b, seen_ids) for b in doc.get("body", []))
    return Script(hat=hat, body=body)


def _block_from_dict(doc: dict, seen_ids: set[str]) -> Block:
    block_id = doc.get("id")
    if not block_id or not isinstance(block_id, str):
        raise ProjectFormatError(f"block without an id: {doc!r}")
    if block_id in seen_ids:
        raise DuplicateIdError(f"duplicate block id: {block_id}")
    seen_ids.add(block_id)
    opcode = doc.get("op")
    info = OPCODES.get(opcode or "")
    if info is None:
        raise UnknownOpcodeError(f"unknown opcode: {opcode!r} (block {block_id})")
    inputs: dict[str, InputSlot] = {}
    for slot_name, slot_doc in doc.get("inputs", {}).items():
        inputs[slot_name] = _slot_from_dict(slot_doc, block_id, seen_ids)
    fields = {k: str(v) for k, v in doc.get("fields", {}).items()}
    substack_docs = doc.get("substacks", [])
    if len(substack_docs) != info.substacks:
        raise ArityMismatchError(
            f"block {block_id} ({opcode}) expects {info.substacks} substack(s), "
            f"got {len(substack_docs)}"
        )
    substacks = tuple(
        tuple(_block_from_dict(b, seen_ids) for b in sub) for sub in substack_docs
    )
    return Block(id=block_id, opcode=opcode, inputs=inputs, fields=fields, substacks=substacks)


def _slot_from_dict(doc, block_id: str, seen_ids: set[str]) -> InputSlot:
    if isinstance(doc, dict) and "block" in doc:
        return InputSlot(kind="block", block=_block_from_dict(doc["block"], seen_ids))
    if isinstance(doc, dict) and "color" in doc:
        return InputSlot(kind="color", color=parse_color(doc["color"], block_id))
    if isinstance(doc, dict) and "literal" in doc:
        return InputSlot(kind="literal", value=doc["literal"])
    if isinstance(doc, (str, int, float, bool)):
        return InputSlot(kind="literal", value=doc)
    raise ProjectFormatError(f"bad input slot on block {block_id}: {doc!r}")


def parse_color(text: str, block_id: str = "?") -> tuple[int, int, int]:
    if not isinstance(text, str) or not text.startswith("#") or len(text) != 7:
        raise ProjectFormatError(f"bad color literal on block {block_id}: {text!r}")
    try:
        return (int(text[1:3], 16), int(text[3:5], 16), int(text[5:7], 16))
    except ValueError:
        raise ProjectFormatError(f"bad color literal on block {block_id}: {text!r}")


def color_to_hex(rgb: tuple[int, int, int]) -> str:
    return "#%02X%02X%02X" % rgb


# --- Serialization ---------------------------------------------------------


def serialize_project(project: Project) -> str:
    """Canonical JSON text; parse(serialize(p)) is structurally equal to p."""
    return json.dumps(project_to_dict(project), sort_keys=True, separators=(",", ":"))


def project_to_dict(project: Project) -> dict:
    return {
        "format": "nbp",
        "version": 1,
        "stage": _target_to_dict(project.stage),
        "sprites": [_target_to_dict(t) for t in project.sprites],
        "monitors": [
            {"target": m.target, "kind": m.kind, "name": m.name, "visible": m.visible}
            for m in project.monitors
        ],
    }


def _target_to_dict(t: Target) -> dict:
    return {
        "name": t.name,
        "costumes": [costume_to_json(c) for c in t.costumes],
        "sounds": [{"name": s.name, "duration": s.duration} for s in t.sounds],
        "variables": [{"name": v.name, "value": v.value} for v in t.variables],
        "lists": [{"name": v.name, "values": list(v.values)} for v in t.lists],
        "initial": {
            "x": t.initial.x,
            "y": t.initial.y,
            "direction": t.initial.direction,
            "size": t.initial.size,
            "visible": t.initial.visible,
            "rotation_style": t.initial.rotation_style,
            "draggable": t.initial.draggable,
            "costume": t.initial.costume,
            "layer": t.initial.layer,
        },
        "scripts": [
            {"hat": _block_to_dict(s.hat), "body": [_block_to_dict(b) for b in s.body]}
            for s in t.scripts
        ],
    }


def _block_to_dict(b: Block) -> dict:
    doc: dict = {"id": b.id, "op": b.opcode}
    if b.inputs:
        slots = {}
        for name, slot in b.inputs.items():
            if slot.kind == "block":
                slots[name] = {"block": _block_to_dict(slot.block)}
            elif slot.kind == "color":
                slots[name] = {"color": color_to_hex(slot.color)}
            else:
                slots[name] = {"literal": slot.value}
        doc["inputs"] = slots
    if b.fields:
        doc["fields"] = dict(b.fields)
    if b.substacks:
        doc["substacks"] = [[_block_to_dict(x) for x in sub] for sub in b.substacks]
    return doc


# --- Validation ------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "info"
    block_id: str | None
    rule: str
    message: str


def validate_project(project: Project) -> list[Diagnostic]:
    """Check model invariants; returns diagnostics in deterministic order."""
    diags: list[Diagnostic] = []

    names = [s.name for s in project.sprites]
    for name in sorted({n for n in names if names.count(n) > 1 or not n}):
        diags.append(Diagnostic("error", None, "sprite-names",
                                f"sprite name not unique or empty: {name!r}"))

    for target in project.targets:
        if not target.costumes:
            diags.append(Diagnostic("error", None, "costumes",
                                    f"target {target.name} has no costumes"))
        elif not (0 <= target.initial.costume < len(target.costumes)):
            diags.append(Diagnostic("error", None, "costume-index",
                                    f"target {target.name} initial costume out of range"))
        var_names = [v.name for v in target.variables]
        for name in sorted({n for n in var_names if var_names.count(n) > 1}):
            diags.append(Diagnostic("error", None, "variable-names",
                                    f"duplicate variable {name!r} in {target.name}"))
        for script in target.scripts:
            if script.hat.opcode not in HAT_OPCODES:
                diags.append(Diagnostic("error", script.hat.id, "hat-opcode",
                                        f"script hat {script.hat.id} is not a hat block"))
            for blk in iter_statements(script.body):
                kind = blk.info.kind
                if kind is BlockKind.HAT:
                    diags.append(Diagnostic("error", blk.id, "hat-in-body",
                                            f"hat block {blk.id} inside a script body"))
                elif kind in (BlockKind.REPORTER, BlockKind.BOOLEAN):
                    diags.append(Diagnostic("error", blk.id, "reporter-in-body",
                                            f"{kind.value} block {blk.id} in a script body"))
                diags.extend(_check_slots(blk))
            diags.extend(_check_slots(script.hat))

    # Broadcasts that are never received are worth a hint.
    received = set()
    sent = {}
    for target in project.targets:
        for blk in target.all_blocks():
            if blk.opcode == "event_whenbroadcastreceived":
                received.add(blk.fields.get("BROADCAST_OPTION", ""))
            elif blk.opcode in ("event_broadcast", "event_broadcastandwait"):
                slot = blk.inputs.get("BROADCAST_INPUT")
                if slot is not None and slot.kind == "literal":
                    sent.setdefault(str(slot.value), blk.id)
    for msg in sorted(set(sent) - received):
        diags.append(Diagnostic("info", sent[msg], "broadcast-unreceived",
                                f"message never received: {msg!r}"))
    return diags


def _check_slots(blk: Block) -> list[Diagnostic]:
    diags = []
    for name, kind in blk.info.inputs:
        slot = blk.inputs.get(name)
        if slot is None:
            continue  # missing slots default at evaluation time
        if slot.kind == "block":
            nested_kind = slot.block.info.kind
            if nested_kind not in (BlockKind.REPORTER, BlockKind.BOOLEAN):
                diags.append(Diagnostic("error", slot.block.id, "slot-kind",
                                        f"statement block {slot.block.id} in an input slot"))
            elif kind == "boolean" and nested_kind is not BlockKind.BOOLEAN:
                diags.append(Diagnostic("error", slot.block.id, "slot-kind",
                                        f"reporter {slot.block.id} in a Boolean slot"))
            diags.extend(_check_slots(slot.block))
    for name in blk.fields:
        if name not in blk.info.fields:
            diags.append(Diagnostic("error", blk.id, "field-name",
                                    f"unexpected field {name!r} on {blk.opcode}"))
    return diags


def block_is_terminal(block: Block) -> bool:
    """True when control flow never reaches the block's successor."""
    if block.opcode == "control_stop":
        return block.fields.get("STOP_OPTION", "all") != "other scripts in sprite"
    return block.info.terminal


def contains_touching_mouse(block: Block) -> bool:
    """True if the block or any nested input block senses the mouse-pointer."""
    for b in (block, *block.nested_blocks()):
        if (b.opcode == "sensing_touchingobject"
                and b.fields.get("TOUCHINGOBJECTMENU") == "mouse-pointer"):
            return True
    return False


def variables_read(block: Block) -> list[str]:
    """Variable and list names read by the block's input expressions, in
    evaluation order (item (4) of a trace entry)."""
    names: list[str] = []
    for b in block.nested_blocks():
        if b.opcode == "data_variable":
            name = b.fields.get("VARIABLE", "")
        elif b.opcode in ("data_itemoflist", "data_lengthoflist",
                          "data_listcontainsitem", "data_listcontents"):
            name = b.fields.get("LIST", "")
        else:
            continue
        if name and name not in names:
            names.append(name)
    return names


def block_text(block: Block) -> str:
    """Readable rendering of a block (used in questions and answer texts)."""
    info = block.info
    parts = {}
    for name, _ in info.inputs:
        slot = block.inputs.get(name)
        if slot is None:
            parts[name] = ""
        elif slot.kind == "block":
            parts[name] = block_text(slot.block)
        elif slot.kind == "color":
            parts[name] = color_to_hex(slot.color)
        else:
            from .values import to_string

            parts[name] = to_string(slot.value)
    for name in info.fields:
        parts[name] = block.fields.get(name, "")
    try:
        return info.label.format(**parts)
    except (KeyError, IndexError):
        return info.label

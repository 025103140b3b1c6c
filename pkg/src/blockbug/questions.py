"""The question catalog.

Target questions ask about observable behavior of a sprite/stage instance
("Why didn't the position of sprite Star change?"); block questions ask about
one block and the reporters inside it ("Why did x position have the value
42?").  Every row lives in a declarative table mapping a template to its
trigger (which blocks/attributes must appear in the subject's code), its
evidence predicate over the trace, and the answer strategy the answerer
dispatches on.

A question is positive ("Why did ...?") when its evidence predicate holds for
at least one trace entry and negative ("Why didn't ...?") otherwise; a few
rows exist in only one polarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .analysis import build_ddg, ref_for_reporter
from .errors import TraceIndexError, UnknownIdError, UnknownInstanceError
from .model import (
    CATEGORY_COLORS,
    EXECUTION_COLOR,
    Block,
    Project,
    Target,
    block_lookup,
    block_text,
    enclosing_statement,
    iter_statements,
)
from .values import to_string

CATEGORY_ORDER = ("Motion", "Looks", "Sound", "Events", "Control",
                  "Sensing", "Operators", "Variables", "Lists", "Execution")

POLARITY_ORDER = ("why-did", "why-didnt", "when-did")

CATEGORY_COLOR = {c.value: color for c, color in CATEGORY_COLORS.items()}
CATEGORY_COLOR["Execution"] = EXECUTION_COLOR


@dataclass
class Question:
    id: str
    category: str
    polarity: str       # why-did | why-didnt | when-did
    template_key: str
    text: str
    bindings: dict
    subject: dict       # {"instance": id} | {"block": id, "ordinal": n, ...}
    strategy: str
    blocks: tuple = ()  # related block ids (the answerer's candidates)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "polarity": self.polarity,
            "template_key": self.template_key,
            "text": self.text,
            "bindings": dict(self.bindings),
            "subject": dict(self.subject),
            "strategy": self.strategy,
            "blocks": list(self.blocks),
        }


@dataclass
class QuestionTree:
    questions: list = field(default_factory=list)

    def add(self, question: Question) -> None:
        self.questions.append(question)

    def find(self, question_id: str) -> Question | None:
        for q in self.questions:
            if q.id == question_id:
                return q
        return None

    def categories(self) -> list[str]:
        present = {q.category for q in self.questions}
        return [c for c in CATEGORY_ORDER if c in present]

    def group(self, category: str) -> dict:
        groups: dict[str, list[Question]] = {}
        for q in self.questions:
            if q.category == category:
                groups.setdefault(q.polarity, []).append(q)
        return {p: groups[p] for p in POLARITY_ORDER if p in groups}

    def to_dict(self) -> dict:
        return {"categories": [
            {"name": c,
             "color": CATEGORY_COLOR[c],
             "groups": [{"polarity": p, "questions": [q.to_dict() for q in qs]}
                        for p, qs in self.group(c).items()]}
            for c in self.categories()]}


# ---------------------------------------------------------------------------
# trace view: executed-block lookup and snapshot deltas


class TraceView:
    """Index over a trace: executions per block, per-instance state series."""

    def __init__(self, project: Project, trace):
        self.project = project
        self.entries = list(trace)
        self._by_block: dict[str, list[int]] = {}
        self._series: dict[int, list[dict]] = {}
        self.meta: dict[int, dict] = {}
        for i, entry in enumerate(self.entries):
            self._by_block.setdefault(entry.block_id, []).append(i)
            for st in entry.post_state["instances"]:
                iid = st["id"]
                self._series.setdefault(iid, []).append(st)
                m = self.meta.setdefault(iid, {"origin": st["origin"],
                                               "is_clone": st["is_clone"],
                                               "first": i})
                m["last"] = i

    def occurrences(self, block_id: str, instance_id: int | None = None) -> list[int]:
        idx = self._by_block.get(block_id, [])
        if instance_id is None:
            return idx
        return [i for i in idx if self.entries[i].instance_id == instance_id]

    def executed(self, block_id: str, instance_id: int | None = None) -> bool:
        return bool(self.occurrences(block_id, instance_id))

    def _states(self, instance_id: int) -> list[dict]:
        series = self._series.get(instance_id, [])
        meta = self.meta.get(instance_id)
        if meta is None or meta["is_clone"]:
            return series
        # originals start from their declared initial state, which the first
        # entry's snapshot may already have moved away from
        target = self.project.target_named(meta["origin"])
        init = target.initial
        base = {"x": init.x, "y": init.y, "direction": init.direction,
                "size": init.size}
        return [base] + series

    def has_delta(self, instance_id: int, key: str, sign: int) -> bool:
        states = self._states(instance_id)
        for before, after in zip(states, states[1:]):
            if sign * (after[key] - before[key]) > 0:
                return True
        return False

    def has_turn(self, instance_id: int, clockwise: bool) -> bool:
        states = self._states(instance_id)
        for before, after in zip(states, states[1:]):
            dd = (after["direction"] - before["direction"] + 180.0) % 360.0 - 180.0
            if clockwise and dd > 0:
                return True
            if not clockwise and dd < 0:
                return True
        return False

    # -- instances ----------------------------------------------------------

    def instance_target(self, instance_id: int) -> tuple[Target, bool]:
        meta = self.meta.get(instance_id)
        if meta is not None:
            return self.project.target_named(meta["origin"]), meta["is_clone"]
        # never traced: original instances exist anyway, numbered in
        # declaration order (stage = 0)
        targets = self.project.targets
        if 0 <= instance_id < len(targets):
            return targets[instance_id], False
        raise UnknownInstanceError(f"unknown instance: {instance_id}")

    def instance_label(self, instance_id: int) -> str:
        target, is_clone = self.instance_target(instance_id)
        if target.is_stage:
            return "the stage"
        if not is_clone:
            return f"sprite {target.name}"
        clones = sorted(i for i, m in self.meta.items()
                        if m["origin"] == target.name and m["is_clone"])
        return f"sprite {target.name} (clone {clones.index(instance_id) + 1})"


# ---------------------------------------------------------------------------
# target questions (Motion ... Sensing)


@dataclass(frozen=True)
class TargetRow:
    key: str
    category: str
    text: str
    polarities: str = "both"    # both | positive
    stage_ok: bool = False
    sprite_ok: bool = True
    any_instance: bool = False  # evidence may come from any instance
    strategy: str = "behavior"


TARGET_ROWS = (
    TargetRow("position-change", "Motion",
              "Why {did} the position of {sprite} change?"),
    TargetRow("move-dirwards", "Motion",
              "Why did {sprite} move {direction}wards?", polarities="positive"),
    TargetRow("direction-change", "Motion",
              "Why {did} the direction of {sprite} change?"),
    TargetRow("direction-change-to", "Motion",
              "Why {did} the direction of {sprite} change to {direction}°?"),
    TargetRow("point-towards", "Motion",
              "Why {did} {sprite} point towards {object}?"),
    TargetRow("turn-rotation", "Motion",
              "Why {did} {sprite} turn {rotation}?"),
    TargetRow("turn-side", "Motion",
              "Why {did} {sprite} turn to the {side}?"),
    TargetRow("say-think", "Looks",
              "Why {did} {sprite} {verb} [{message}]?"),
    TargetRow("size-change", "Looks",
              "Why {did} the size of {sprite} change?"),
    TargetRow("size-trend", "Looks",
              "Why did the size of {sprite} {trend}?", polarities="positive"),
    TargetRow("show-hide", "Looks",
              "Why {did} {sprite} {verb} itself?"),
    TargetRow("costume-change", "Looks",
              "Why {did} the costume of {sprite} change?"),
    TargetRow("costume-change-to", "Looks",
              "Why {did} the costume of {sprite} change to [{costume}]?"),
    TargetRow("sprite-backdrop-change", "Looks",
              "Why {did} {sprite} change the backdrop?"),
    TargetRow("sprite-backdrop-change-to", "Looks",
              "Why {did} {sprite} change the backdrop to [{backdrop}]?"),
    TargetRow("backdrop-change", "Looks",
              "Why {did} the backdrop change?",
              stage_ok=True, sprite_ok=False, any_instance=True),
    TargetRow("backdrop-change-to", "Looks",
              "Why {did} the backdrop change to [{backdrop}]?",
              stage_ok=True, sprite_ok=False, any_instance=True),
    TargetRow("play-sound", "Sound",
              "Why {did} {target} play sound [{sound}]?", stage_ok=True),
    TargetRow("stop-all-sounds", "Sound",
              "Why {did} {target} stop all sounds?", stage_ok=True),
    TargetRow("broadcast-message", "Events",
              "Why {did} {target} broadcast the message [{message}]?",
              stage_ok=True),
    TargetRow("receive-message", "Events",
              "Why {did} {target} receive the message [{message}]?",
              stage_ok=True),
    TargetRow("start-as-clone", "Control",
              "Why {did} {sprite} start as a clone?"),
    TargetRow("create-clone-of", "Control",
              "Why {did} {target} create a clone of {clone_target}?",
              stage_ok=True),
    TargetRow("ask", "Sensing",
              "Why {did} {target} ask [{message}]?", stage_ok=True),
)

_POSITION_OPS = ("motion_movesteps", "motion_gotoxy", "motion_glideto",
                 "motion_setx", "motion_changex", "motion_sety",
                 "motion_changey")
_DIRECTION_OPS = ("motion_turnright", "motion_turnleft",
                  "motion_pointindirection", "motion_pointtowards")
_SIZE_OPS = ("looks_setsize", "looks_changesize")


def _statements(target: Target, *ops: str) -> list[Block]:
    found = []
    for sc in target.scripts:
        for blk in iter_statements(sc.body):
            if blk.opcode in ops:
                found.append(blk)
    return found


def _hats(target: Target, op: str) -> list[Block]:
    return [sc.hat for sc in target.scripts if sc.hat.opcode == op]


def _literal(block: Block, name: str):
    slot = block.inputs.get(name)
    if slot is not None and slot.kind == "literal":
        return slot.value
    return None


def _grouped(blocks: list[Block], get) -> list[tuple[object, list[Block]]]:
    groups: dict = {}
    for blk in blocks:
        value = get(blk)
        if value is None:
            continue
        groups.setdefault(value, []).append(blk)
    return list(groups.items())


def _variants(word_key: str, pairs) -> list[tuple[dict, list[Block]]]:
    return [({word_key: word}, blocks) for word, blocks in pairs if blocks]


def _target_bindings(row: TargetRow, project: Project,
                     target: Target) -> list[tuple[dict, list[Block]]]:
    """All (placeholder bindings, related blocks) pairs the row yields for
    this target's code; empty when the row's trigger is absent."""
    key = row.key
    if key == "position-change":
        blocks = _statements(target, *_POSITION_OPS)
        return [({}, blocks)] if blocks else []
    if key == "move-dirwards":
        blocks = _statements(target, *_POSITION_OPS)
        if not blocks:
            return []
        return [({"direction": d}, blocks) for d in ("right", "left", "up", "down")]
    if key == "direction-change":
        blocks = _statements(target, *_DIRECTION_OPS)
        return [({}, blocks)] if blocks else []
    if key == "direction-change-to":
        pairs = _grouped(_statements(target, "motion_pointindirection"),
                         lambda b: _literal(b, "DIRECTION"))
        return [({"direction": to_string(v)}, blocks) for v, blocks in pairs]
    if key == "point-towards":
        pairs = _grouped(_statements(target, "motion_pointtowards"),
                         lambda b: b.fields.get("TOWARDS"))
        return [({"object": v}, blocks) for v, blocks in pairs]
    if key == "turn-rotation":
        blocks = _statements(target, *_DIRECTION_OPS)
        if not blocks:
            return []
        return [({"rotation": r}, blocks)
                for r in ("clockwise", "counterclockwise")]
    if key == "turn-side":
        return _variants("side", [
            ("right", _statements(target, "motion_turnright")),
            ("left", _statements(target, "motion_turnleft")),
        ])
    if key == "say-think":
        out = []
        for verb, ops in (("say", ("looks_say", "looks_sayforsecs")),
                          ("think", ("looks_think", "looks_thinkforsecs"))):
            pairs = _grouped(_statements(target, *ops),
                             lambda b: _literal(b, "MESSAGE"))
            out.extend(({"verb": verb, "message": to_string(v)}, blocks)
                       for v, blocks in pairs)
        return out
    if key == "size-change":
        blocks = _statements(target, *_SIZE_OPS)
        return [({}, blocks)] if blocks else []
    if key == "size-trend":
        blocks = _statements(target, *_SIZE_OPS)
        if not blocks:
            return []
        return [({"trend": t}, blocks) for t in ("increase", "decrease")]
    if key == "show-hide":
        return _variants("verb", [
            ("show", _statements(target, "looks_show")),
            ("hide", _statements(target, "looks_hide")),
        ])
    if key == "costume-change":
        blocks = _statements(target, "looks_switchcostume", "looks_nextcostume")
        return [({}, blocks)] if blocks else []
    if key == "costume-change-to":
        pairs = _grouped(_statements(target, "looks_switchcostume"),
                         lambda b: b.fields.get("COSTUME"))
        return [({"costume": v}, blocks) for v, blocks in pairs]
    if key == "sprite-backdrop-change":
        blocks = _statements(target, "looks_switchbackdrop")
        return [({}, blocks)] if blocks else []
    if key == "sprite-backdrop-change-to":
        pairs = _grouped(_statements(target, "looks_switchbackdrop"),
                         lambda b: b.fields.get("BACKDROP"))
        return [({"backdrop": v}, blocks) for v, blocks in pairs]
    if key == "backdrop-change":
        blocks = [b for t in project.targets
                  for b in _statements(t, "looks_switchbackdrop")]
        return [({}, blocks)] if blocks else []
    if key == "backdrop-change-to":
        blocks = [b for t in project.targets
                  for b in _statements(t, "looks_switchbackdrop")]
        pairs = _grouped(blocks, lambda b: b.fields.get("BACKDROP"))
        return [({"backdrop": v}, group) for v, group in pairs]
    if key == "play-sound":
        pairs = _grouped(_statements(target, "sound_play", "sound_playuntildone"),
                         lambda b: b.fields.get("SOUND_MENU"))
        return [({"sound": v}, blocks) for v, blocks in pairs]
    if key == "stop-all-sounds":
        blocks = _statements(target, "sound_stopall")
        return [({}, blocks)] if blocks else []
    if key == "broadcast-message":
        pairs = _grouped(_statements(target, "event_broadcast",
                                     "event_broadcastandwait"),
                         lambda b: _literal(b, "BROADCAST_INPUT"))
        return [({"message": to_string(v)}, blocks) for v, blocks in pairs]
    if key == "receive-message":
        pairs = _grouped(_hats(target, "event_whenbroadcastreceived"),
                         lambda b: b.fields.get("BROADCAST_OPTION"))
        return [({"message": v}, blocks) for v, blocks in pairs]
    if key == "start-as-clone":
        hats = _hats(target, "control_start_as_clone")
        return [({}, hats)] if hats else []
    if key == "create-clone-of":
        pairs = _grouped(_statements(target, "control_create_clone_of"),
                         lambda b: b.fields.get("CLONE_OPTION"))
        return [({"clone_target": v}, blocks) for v, blocks in pairs]
    if key == "ask":
        pairs = _grouped(_statements(target, "sensing_askandwait"),
                         lambda b: _literal(b, "QUESTION"))
        return [({"message": to_string(v)}, blocks) for v, blocks in pairs]
    raise AssertionError(f"unhandled row {key}")


def _row_evidence(row: TargetRow, view: TraceView, instance_id: int,
                  binding: dict, blocks: list[Block]) -> bool:
    if row.key == "move-dirwards":
        axis, sign = {"right": ("x", 1), "left": ("x", -1),
                      "up": ("y", 1), "down": ("y", -1)}[binding["direction"]]
        return view.has_delta(instance_id, axis, sign)
    if row.key == "size-trend":
        sign = 1 if binding["trend"] == "increase" else -1
        return view.has_delta(instance_id, "size", sign)
    if row.key == "turn-rotation":
        return view.has_turn(instance_id,
                             clockwise=binding["rotation"] == "clockwise")
    who = None if row.any_instance else instance_id
    return any(view.executed(blk.id, who) for blk in blocks)


def questions_for_target(project: Project, trace,
                         instance_id: int) -> QuestionTree:
    view = TraceView(project, trace)
    target, _ = view.instance_target(instance_id)
    label = view.instance_label(instance_id)
    tree = QuestionTree()
    for row in TARGET_ROWS:
        if target.is_stage and not row.stage_ok:
            continue
        if not target.is_stage and not row.sprite_ok:
            continue
        for binding, blocks in _target_bindings(row, project, target):
            has = _row_evidence(row, view, instance_id, binding, blocks)
            if row.polarities == "positive" and not has:
                continue
            polarity = "why-did" if has else "why-didnt"
            text = row.text.format(did="did" if has else "didn't",
                                   sprite=label, target=label, **binding)
            qid = f"t{instance_id}:{row.key}"
            if binding:
                qid += ":" + "/".join(to_string(v) for v in binding.values())
            tree.add(Question(
                id=qid, category=row.category, polarity=polarity,
                template_key=row.key, text=text, bindings=dict(binding),
                subject={"instance": instance_id}, strategy=row.strategy,
                blocks=tuple(blk.id for blk in blocks)))
    return tree


def list_instances(project: Project, trace, sprite_name: str) -> list[dict]:
    target = project.target_named(sprite_name)
    if target is None:
        raise UnknownIdError(f"unknown sprite: {sprite_name}")
    view = TraceView(project, trace)
    original = None
    clones = []
    for iid, meta in sorted(view.meta.items()):
        if meta["origin"] != sprite_name:
            continue
        if meta["is_clone"]:
            clones.append(iid)
        else:
            original = iid
    if original is None:
        original = project.targets.index(target)
    out = [{"instance": original, "label": sprite_name, "is_clone": False,
            "first_entry": view.meta.get(original, {}).get("first"),
            "last_entry": view.meta.get(original, {}).get("last")}]
    for k, iid in enumerate(clones, start=1):
        out.append({"instance": iid, "label": f"{sprite_name} (clone {k})",
                    "is_clone": True,
                    "first_entry": view.meta[iid]["first"],
                    "last_entry": view.meta[iid]["last"]})
    return out


# ---------------------------------------------------------------------------
# block questions (Execution + contained reporters/conditions)


_ATTR_REPORTERS = {
    "motion_xposition": "Motion",
    "motion_yposition": "Motion",
    "motion_direction": "Motion",
    "looks_size": "Looks",
    "looks_costumenumber": "Looks",
    "looks_backdropnumber": "Looks",
}

_CONDITIONS = {
    "operator_lt": ("condition-compare", "Operators", "boolean-operator"),
    "operator_equals": ("condition-compare", "Operators", "boolean-operator"),
    "operator_gt": ("condition-compare", "Operators", "boolean-operator"),
    "operator_contains": ("condition-contains", "Operators", "boolean-operator"),
    "sensing_touchingobject": ("condition-touching", "Sensing", "touching"),
    "sensing_touchingcolor": ("condition-touching-color", "Sensing", "touching"),
    "sensing_coloristouchingcolor": ("condition-color-touching", "Sensing", "touching"),
}


def list_executions(trace, block_id: str) -> list[dict]:
    """Selectable executions of a statement: one per execution, where a
    waiting block's start/end entry pair counts once."""
    out: list[dict] = []
    open_start: dict[int, dict] = {}  # instance id -> pending descriptor
    for i, entry in enumerate(trace):
        if entry.block_id != block_id:
            continue
        if entry.phase == "end":
            pending = open_start.pop(entry.instance_id, None)
            if pending is not None:
                pending["final_index"] = i
            continue
        desc = {"ordinal": len(out) + 1, "entry_index": i,
                "final_index": i if entry.phase == "complete" else None,
                "time": float(entry.exec_time), "phase": entry.phase}
        if entry.phase == "start":
            open_start[entry.instance_id] = desc
        out.append(desc)
    return out


def _operand_display(block: Block, name: str, record) -> object:
    slot = block.inputs.get(name)
    if slot is None:
        return ""
    if slot.kind == "literal":
        return slot.value
    if slot.kind == "color":
        return "#%02X%02X%02X" % slot.color
    for child in record.children:
        if child.block_id == slot.block.id:
            return child.value
    return ""


def questions_for_block(project: Project, trace, block_id: str,
                        ordinal: int | None = None) -> QuestionTree:
    stmt = enclosing_statement(project, block_id)
    entries = list(trace)
    execs = list_executions(entries, stmt.id)
    tree = QuestionTree()

    if not execs:
        tree.add(Question(
            id=f"b:{stmt.id}:why-didnt-execute", category="Execution",
            polarity="why-didnt", template_key="block-execute",
            text="Why didn't the block execute?", bindings={},
            subject={"block": stmt.id, "ordinal": None, "entry_index": None},
            strategy="block-not-executed", blocks=(stmt.id,)))
        return tree

    if ordinal is None:
        ordinal = len(execs)
    if not 1 <= ordinal <= len(execs):
        raise TraceIndexError(
            f"block {stmt.id} has {len(execs)} executions, not {ordinal}")
    selected = execs[ordinal - 1]
    entry = entries[selected["entry_index"]]
    subject = {"block": stmt.id, "ordinal": ordinal,
               "entry_index": selected["entry_index"]}

    tree.add(Question(
        id=f"b:{stmt.id}@{ordinal}:why-did-execute", category="Execution",
        polarity="why-did", template_key="block-execute",
        text="Why did the block execute?", bindings={}, subject=dict(subject),
        strategy="block-executed", blocks=(stmt.id,)))
    tree.add(Question(
        id=f"b:{stmt.id}@{ordinal}:when-did-execute", category="Execution",
        polarity="when-did", template_key="block-when",
        text="When did the block execute?", bindings={}, subject=dict(subject),
        strategy="execution-time", blocks=(stmt.id,)))

    seen: set = set()

    def add_once(question: Question) -> None:
        key = (question.template_key, question.text)
        if key not in seen:
            seen.add(key)
            tree.add(question)

    def visit(record) -> None:
        op = record.opcode
        if op in _ATTR_REPORTERS:
            _, _, blk = block_lookup(project, record.block_id)
            name = block_text(blk)
            add_once(Question(
                id=f"b:{stmt.id}@{ordinal}:attr-value:{record.block_id}",
                category=_ATTR_REPORTERS[op], polarity="why-did",
                template_key="attr-value",
                text=f"Why did {name} have the value {to_string(record.value)}?",
                bindings={"name": name, "value": record.value,
                          "reporter_block": record.block_id},
                subject=dict(subject), strategy="reporter-value",
                blocks=(record.block_id,)))
        elif op == "data_variable":
            _, _, blk = block_lookup(project, record.block_id)
            vname = blk.fields.get("VARIABLE", "")
            add_once(Question(
                id=f"b:{stmt.id}@{ordinal}:variable-value:{record.block_id}",
                category="Variables", polarity="why-did",
                template_key="variable-value",
                text=(f"Why did [{vname}] have the value"
                      f" {to_string(record.value)}?"),
                bindings={"variable": vname, "value": record.value,
                          "reporter_block": record.block_id},
                subject=dict(subject), strategy="variable-value",
                blocks=(record.block_id,)))
            for value, setters in _missed_settings(project, record):
                add_once(Question(
                    id=(f"b:{stmt.id}@{ordinal}:variable-value:"
                        f"{record.block_id}/{to_string(value)}"),
                    category="Variables", polarity="why-didnt",
                    template_key="variable-value",
                    text=(f"Why didn't [{vname}] have the value"
                          f" {to_string(value)}?"),
                    bindings={"variable": vname, "value": value,
                              "reporter_block": record.block_id},
                    subject=dict(subject), strategy="variable-value",
                    blocks=tuple(setters)))
        elif op == "data_listcontents":
            _, _, blk = block_lookup(project, record.block_id)
            lname = blk.fields.get("LIST", "")
            add_once(Question(
                id=f"b:{stmt.id}@{ordinal}:list-value:{record.block_id}",
                category="Lists", polarity="why-did", template_key="list-value",
                text=(f"Why did [{lname}] have the value"
                      f" {to_string(record.value)}?"),
                bindings={"list": lname, "value": record.value,
                          "reporter_block": record.block_id},
                subject=dict(subject), strategy="list-value",
                blocks=(record.block_id,)))
        elif op == "data_listcontainsitem" and not record.value:
            _, _, blk = block_lookup(project, record.block_id)
            lname = blk.fields.get("LIST", "")
            item = _operand_display(blk, "ITEM", record)
            add_once(Question(
                id=f"b:{stmt.id}@{ordinal}:list-contain:{record.block_id}",
                category="Lists", polarity="why-didnt",
                template_key="list-contain",
                text=f"Why didn't [{lname}] contain [{to_string(item)}]?",
                bindings={"list": lname, "item": item,
                          "reporter_block": record.block_id},
                subject=dict(subject), strategy="list-contain",
                blocks=(record.block_id,)))
        elif op in _CONDITIONS:
            template_key, category, strategy = _CONDITIONS[op]
            _, _, blk = block_lookup(project, record.block_id)
            condition = block_text(blk)
            did = "did" if record.value else "didn't"
            add_once(Question(
                id=f"b:{stmt.id}@{ordinal}:{template_key}:{record.block_id}",
                category=category,
                polarity="why-did" if record.value else "why-didnt",
                template_key=template_key,
                text=f"Why {did} the condition {condition} evaluate to true?",
                bindings={"condition": condition, "value": record.value,
                          "condition_block": record.block_id},
                subject=dict(subject), strategy=strategy,
                blocks=(record.block_id,)))
        for child in record.children:
            visit(child)

    for record in entry.records:
        visit(record)
    return tree


def _missed_settings(project: Project, record) -> list[tuple[object, list[str]]]:
    """Literal values some set-variable block assigns to this variable that
    differ from the traced value (the negative variable question rule)."""
    ref = ref_for_reporter(project, record.block_id)
    if ref is None:
        return []
    by_value: dict = {}
    traced = to_string(record.value)
    for block_id, _ in build_ddg(project).defs.get(ref, ()):
        _, _, blk = block_lookup(project, block_id)
        if blk.opcode != "data_setvariable":
            continue
        value = _literal(blk, "VALUE")
        if value is None or to_string(value) == traced:
            continue
        by_value.setdefault(to_string(value), (value, []))[1].append(block_id)
    return list(by_value.values())

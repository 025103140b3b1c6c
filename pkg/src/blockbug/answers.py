"""Answer construction: a textual explanation plus visual evidence for every
question the catalog can generate.

Each answer strategy walks the relevant analysis artifact (answer graph,
data slice, operand records, restored snapshot) and renders its findings
through the templates module.  All functions are pure given (project, trace,
question); snapshot restoration happens on private interpreter copies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import images
from . import templates as T
from .analysis import (
    _initial_value,
    build_cdg,
    build_cfg,
    build_ddg,
    dynamic_data_slice,
    extract_answer_graph,
    make_acyclic,
    reachable,
    ref_for_reporter,
    user_event_node,
)
from .errors import UnknownIdError
from .model import Block, Project, block_lookup, block_text
from .questions import Question, TraceView
from .values import to_string
from .vm import restore


@dataclass
class Answer:
    text: str
    visual: dict
    details: list = field(default_factory=list)  # [{"block": id, "text": str}]
    nav: list = field(default_factory=list)      # block ids, clickable

    def to_dict(self) -> dict:
        return {"text": self.text, "visual": self.visual,
                "details": list(self.details), "nav": list(self.nav)}


class Analyses:
    """Lazily built analysis artifacts shared between answers for one
    project."""

    def __init__(self, project: Project):
        self.project = project
        self._cdg = None
        self._ddg = None

    @property
    def cdg(self):
        if self._cdg is None:
            self._cdg = make_acyclic(build_cdg(build_cfg(self.project)))
        return self._cdg

    @property
    def ddg(self):
        if self._ddg is None:
            self._ddg = build_ddg(self.project)
        return self._ddg


def _display(value) -> str:
    return "" if value is None else to_string(value)


def _cap(text: str) -> str:
    return text[:1].upper() + text[1:]


# ---------------------------------------------------------------------------
# answer graphs: serialization and reason chains


def graph_payload(graph) -> dict:
    nodes = []
    for node in graph.nodes.values():
        nodes.append({
            "id": node.id, "kind": node.kind, "opcode": node.opcode,
            "label": node.label, "target": node.target,
            "margin_color": node.margin_color, "executed": node.executed,
            "opacity": node.opacity, "entry_index": node.entry_index,
            "condition_value": (None if node.condition_value is None
                                else to_string(node.condition_value)),
            "values": {k: _display(v) for k, v in node.values.items()},
        })
    edges = [{"src": e.src, "dst": e.dst, "required": e.required,
              "executed": e.executed, "style": e.style,
              "interruption": e.interruption} for e in graph.edges]
    frontier = None
    if graph.frontier is not None:
        frontier = {"src": graph.frontier.src, "dst": graph.frontier.dst}
    return {"kind": "answer-graph", "target_block": graph.target_block,
            "nodes": nodes, "edges": edges, "frontier": frontier}


def graph_set_payload(graphs) -> dict:
    """Several answer graphs with their merge groups: graphs sharing any node
    (a common hat prefix) belong to one group and are joined at those nodes;
    distinct groups render side by side."""
    payloads = [graph_payload(g) for g in graphs]
    group_of = list(range(len(graphs)))

    def find(i):
        while group_of[i] != i:
            group_of[i] = group_of[group_of[i]]
            i = group_of[i]
        return i

    node_sets = [set(g.nodes) for g in graphs]
    for i in range(len(graphs)):
        for j in range(i + 1, len(graphs)):
            if node_sets[i] & node_sets[j]:
                group_of[find(j)] = find(i)
    groups: dict[int, list[int]] = {}
    for i in range(len(graphs)):
        groups.setdefault(find(i), []).append(i)
    merge = [{"graphs": members,
              "shared": sorted(set.intersection(*(node_sets[m] for m in members))
                               if len(members) > 1 else set())}
             for _, members in sorted(groups.items())]
    return {"kind": "graph-set", "graphs": payloads, "groups": merge}


def _condition_text(block: Block) -> str:
    slot = block.inputs.get("CONDITION")
    if slot is None:
        return ""
    if slot.kind == "literal":
        return to_string(slot.value)
    return block_text(slot.block)


def _reason_bindings(project: Project, block_id: str) -> dict:
    target, script, block = block_lookup(project, block_id)
    op = block.opcode
    fields = block.fields
    if op == "event_whenkeypressed":
        return {"key": fields.get("KEY_OPTION", "")}
    if op == "event_whenthisspriteclicked":
        return {"sprite": target.name}
    if op == "event_whenbroadcastreceived":
        return {"message": fields.get("BROADCAST_OPTION", "")}
    if op == "event_whenbackdropswitchesto":
        return {"backdrop": fields.get("BACKDROP", "")}
    if op in ("event_broadcast", "event_broadcastandwait"):
        slot = block.inputs.get("BROADCAST_INPUT")
        if slot is not None and slot.kind == "literal":
            return {"message": to_string(slot.value)}
        return {"message": block_text(slot.block) if slot else ""}
    if op == "control_create_clone_of":
        option = fields.get("CLONE_OPTION", "myself")
        return {"sprite": target.name if option == "myself" else option}
    if op in ("control_if", "control_if_else", "control_repeat_until",
              "control_wait_until"):
        return {"condition": _condition_text(block), "required": "true"}
    return {}


def _event_reason(node_id: str, positive: bool) -> str:
    if node_id == "user:green-flag":
        return ("the green flag was clicked" if positive
                else T.EVENT_NEGATIVE["green-flag"])
    if node_id.startswith("user:key:"):
        key = node_id[len("user:key:"):]
        return (f"the key [{key}] was pressed" if positive
                else T.EVENT_NEGATIVE["key"].format(key=key))
    if node_id.startswith("user:click:"):
        sprite = node_id[len("user:click:"):]
        return (f"the sprite {sprite} was clicked" if positive
                else T.EVENT_NEGATIVE["click"].format(sprite=sprite))
    return node_id


def _edge_reason(project: Project, graph, edge) -> str:
    """Positive reason contributed by the edge's source node."""
    node = graph.nodes[edge.src]
    if node.kind == "event":
        return _event_reason(node.id, True)
    bindings = _reason_bindings(project, node.id)
    if edge.required in ("true", "false"):
        bindings["required"] = edge.required
    return T.reason_for(node.opcode, True, bindings)


def _executed_path(graph) -> list:
    """Edges from the highest executed cause down to the target, following
    the most recent executed parent at every step."""
    incoming: dict[str, list] = {}
    for e in graph.edges:
        incoming.setdefault(e.dst, []).append(e)
    path = []
    cur = graph.target_block
    seen = {cur}
    while True:
        candidates = [e for e in incoming.get(cur, ())
                      if graph.nodes[e.src].executed and e.src not in seen]
        if not candidates:
            break
        edge = max(candidates,
                   key=lambda e: (graph.nodes[e.src].entry_index
                                  if graph.nodes[e.src].entry_index is not None
                                  else -1))
        path.append(edge)
        seen.add(edge.src)
        cur = edge.src
        if graph.nodes[cur].kind == "event":
            break
    path.reverse()
    return path


def _chain_reasons(project: Project, graph) -> list[tuple[str, str]]:
    """(node id, reason text) pairs along the executed path, top-down.  A
    user-event edge is folded into the hat below it, which carries the same
    phrase."""
    path = _executed_path(graph)
    out = []
    for i, edge in enumerate(path):
        if graph.nodes[edge.src].kind == "event" and i + 1 < len(path):
            continue
        out.append((edge.src, _edge_reason(project, graph, edge)))
    return out


def answer_block_executed(project: Project, graph) -> Answer:
    pairs = _chain_reasons(project, graph)
    reasons = [r for _, r in pairs] or [T.PRE_RECORDING_REASON]
    return Answer(
        text=T.compose_block_executed(reasons),
        visual=graph_payload(graph),
        details=[{"block": b, "text": r} for b, r in pairs],
        nav=[b for b, _ in pairs if not b.startswith("user:")])


def _not_executed_reason(project: Project, graph) -> tuple[str, bool, str | None]:
    """(reason, needs long form, blocking node id) for an unexecuted target."""
    target_node = graph.nodes[graph.target_block]
    if target_node.executed:
        # executed, but by a different instance than the question asks about
        _, script, _ = block_lookup(project, graph.target_block)
        t = block_lookup(project, script.hat.id)[0]
        user = user_event_node(script.hat, t)
        if user is not None:
            return _event_reason(user, False), False, None
        return T.INTERRUPTED, False, None
    edge = graph.frontier
    if edge is not None:
        src = graph.nodes[edge.src]
        if edge.style == "dashed-crossed":
            block = block_lookup(project, src.id)[2]
            reason = T.CONDITION_WASNT.format(
                condition=_condition_text(block), required=edge.required)
        else:
            reason = T.INTERRUPTED
        return reason, edge.dst != graph.target_block, edge.src
    # nothing on the way to the target ever executed: the root explains it
    with_incoming = {e.dst for e in graph.edges}
    root = next((n for n in graph.nodes.values() if n.id not in with_incoming),
                target_node)
    if root.kind == "event":
        reason = _event_reason(root.id, False)
    else:
        reason = T.reason_for(root.opcode, False,
                              _reason_bindings(project, root.id))
    anchors = {root.id}
    if root.kind == "event":
        # the phrase describes the hat the user event triggers, so blocks
        # directly below that hat still count as immediate
        anchors |= {e.dst for e in graph.edges if e.src == root.id}
    immediate = graph.target_block in anchors or any(
        e.src in anchors and e.dst == graph.target_block for e in graph.edges)
    return reason, not immediate, root.id


def answer_block_not_executed(project: Project, cdg, graph) -> Answer:
    if not reachable(cdg, graph.target_block):
        return Answer(T.NOT_REACHABLE, graph_payload(graph))
    reason, long_form, blocker = _not_executed_reason(project, graph)
    template = T.BLOCK_NOT_EXECUTED_FAR if long_form else T.BLOCK_NOT_EXECUTED
    details = []
    nav = []
    if blocker is not None and not blocker.startswith("user:"):
        details.append({"block": blocker, "text": reason})
        nav.append(blocker)
    return Answer(template.format(reason=reason), graph_payload(graph),
                  details, nav)


# ---------------------------------------------------------------------------
# execution time


def _fmt_seconds(value) -> str:
    return to_string(round(float(value), 2))


def answer_execution_time(project: Project, trace, subject: dict) -> Answer:
    entries = list(trace)
    idx = subject["entry_index"]
    entry = entries[idx]
    elapsed = entry.exec_time - entries[0].exec_time
    flag_start = entries[0].opcode == "event_whenflagclicked"
    template = T.EXECUTED_AFTER_FLAG if flag_start else T.EXECUTED_AFTER_RECORDING
    vm = restore(project, entry.post_state)
    return Answer(
        text=template.format(elapsed=_fmt_seconds(elapsed)),
        visual={"kind": "time-mark",
                "elapsed": float(elapsed),
                "anchor": "green-flag" if flag_start else "recording-start",
                "entry_index": idx,
                "slider": idx / max(len(entries) - 1, 1),
                "image": images.png_base64(images.stage_frame(vm))})


# ---------------------------------------------------------------------------
# target behavior


_BEHAVIOR = {
    "position-change": ("the position of {sprite} changed",
                        "the position of {sprite} didn't change"),
    "move-dirwards": ("{sprite} moved {direction}wards", None),
    "direction-change": ("the direction of {sprite} changed",
                         "the direction of {sprite} didn't change"),
    "direction-change-to": ("the direction of {sprite} changed to {direction}°",
                            "the direction of {sprite} didn't change"
                            " to {direction}°"),
    "point-towards": ("{sprite} pointed towards {object}",
                      "{sprite} didn't point towards {object}"),
    "turn-rotation": ("{sprite} turned {rotation}",
                      "{sprite} didn't turn {rotation}"),
    "turn-side": ("{sprite} turned to the {side}",
                  "{sprite} didn't turn to the {side}"),
    "say-think": ("{sprite} {verb_past} [{message}]",
                  "{sprite} didn't {verb} [{message}]"),
    "size-change": ("the size of {sprite} changed",
                    "the size of {sprite} didn't change"),
    "size-trend": ("the size of {sprite} {trend_past}", None),
    "show-hide": ("{sprite} {verb_past} itself",
                  "{sprite} didn't {verb} itself"),
    "costume-change": ("the costume of {sprite} changed",
                       "the costume of {sprite} didn't change"),
    "costume-change-to": ("the costume of {sprite} changed to [{costume}]",
                          "the costume of {sprite} didn't change"
                          " to [{costume}]"),
    "sprite-backdrop-change": ("{sprite} changed the backdrop",
                               "{sprite} didn't change the backdrop"),
    "sprite-backdrop-change-to": ("{sprite} changed the backdrop"
                                  " to [{backdrop}]",
                                  "{sprite} didn't change the backdrop"
                                  " to [{backdrop}]"),
    "backdrop-change": ("the backdrop changed", "the backdrop didn't change"),
    "backdrop-change-to": ("the backdrop changed to [{backdrop}]",
                           "the backdrop didn't change to [{backdrop}]"),
    "play-sound": ("{target} played sound [{sound}]",
                   "{target} didn't play sound [{sound}]"),
    "stop-all-sounds": ("{target} stopped all sounds",
                        "{target} didn't stop all sounds"),
    "broadcast-message": ("{target} broadcast the message [{message}]",
                          "{target} didn't broadcast the message [{message}]"),
    "receive-message": ("{target} received the message [{message}]",
                        "{target} didn't receive the message [{message}]"),
    "start-as-clone": ("{sprite} started as a clone",
                       "{sprite} didn't start as a clone"),
    "create-clone-of": ("{target} created a clone of {clone_target}",
                        "{target} didn't create a clone of {clone_target}"),
    "ask": ("{target} asked [{message}]", "{target} didn't ask [{message}]"),
}

_PAST = {"say": "said", "think": "thought", "show": "showed", "hide": "hid",
         "increase": "increased", "decrease": "decreased"}

_DELTA_KEYS = ("move-dirwards", "size-trend", "turn-rotation")

_ANY_INSTANCE_KEYS = ("backdrop-change", "backdrop-change-to")


def _behavior_statement(question: Question, label: str, positive: bool) -> str:
    template = _BEHAVIOR[question.template_key][0 if positive else 1]
    bindings = dict(question.bindings)
    if "verb" in bindings:
        bindings["verb_past"] = _PAST[bindings["verb"]]
    if "trend" in bindings:
        bindings["trend_past"] = _PAST[bindings["trend"]]
    return template.format(sprite=label, target=label, **bindings)


def _instance_state(post_state: dict, instance_id: int) -> dict | None:
    for st in post_state["instances"]:
        if st["id"] == instance_id:
            return st
    return None


def _delta_matches(key: str, bindings: dict, before: dict, after: dict) -> bool:
    if key == "move-dirwards":
        axis, sign = {"right": ("x", 1), "left": ("x", -1),
                      "up": ("y", 1), "down": ("y", -1)}[bindings["direction"]]
        return sign * (after[axis] - before[axis]) > 0
    if key == "size-trend":
        sign = 1 if bindings["trend"] == "increase" else -1
        return sign * (after["size"] - before["size"]) > 0
    dd = (after["direction"] - before["direction"] + 180.0) % 360.0 - 180.0
    return dd > 0 if bindings["rotation"] == "clockwise" else dd < 0


def _causal_executions(view: TraceView, question: Question) -> list[tuple[str, int]]:
    """Latest relevant execution per candidate block: (block id, entry index),
    ordered by entry index."""
    iid = question.subject["instance"]
    key = question.template_key
    blocks = set(question.blocks)
    if key in _DELTA_KEYS:
        target, _ = view.instance_target(iid)
        init = target.initial
        prev = None if view.meta.get(iid, {}).get("is_clone") else {
            "x": init.x, "y": init.y, "direction": init.direction,
            "size": init.size}
        latest: dict[str, int] = {}
        for i, entry in enumerate(view.entries):
            state = _instance_state(entry.post_state, iid)
            if state is None:
                continue
            if (prev is not None and entry.instance_id == iid
                    and entry.block_id in blocks
                    and _delta_matches(key, question.bindings, prev, state)):
                latest[entry.block_id] = i
            prev = state
        return sorted(latest.items(), key=lambda kv: kv[1])
    who = None if key in _ANY_INSTANCE_KEYS else iid
    latest = {}
    for block in question.blocks:
        occurrences = view.occurrences(block, who)
        if occurrences:
            latest[block] = occurrences[-1]
    return sorted(latest.items(), key=lambda kv: kv[1])


def _script_hat(project: Project, block_id: str) -> Block:
    return block_lookup(project, block_id)[1].hat


def _cause_types(project: Project, blocks) -> str:
    names = {T.type_name(block_lookup(project, b)[2].opcode) for b in blocks}
    return names.pop() if len(names) == 1 else "different"


def _positive_behavior(project, entries, view, question, analyses,
                       label) -> Answer:
    behavior = _cap(_behavior_statement(question, label, positive=True))
    causes = _causal_executions(view, question)
    if not causes:  # evidence came from deltas no candidate block explains
        return Answer(behavior + ".", {"kind": "none"})
    graphs = [extract_answer_graph(analyses.cdg, view.entries, block,
                                   at_index=idx)
              for block, idx in causes]
    details = []
    for graph, (block, _) in zip(graphs, causes):
        pairs = _chain_reasons(project, graph)
        reasons = [r for _, r in pairs] or [T.PRE_RECORDING_REASON]
        details.append({"block": block,
                        "text": T.compose_block_executed(reasons)})
    nav = [block for block, _ in causes]
    if len(causes) == 1:
        block, _ = causes[0]
        pairs = _chain_reasons(project, graphs[0])
        reasons = [r for _, r in pairs] or [T.PRE_RECORDING_REASON]
        opcode = block_lookup(project, block)[2].opcode
        text = T.BEHAVIOR_EXECUTED.format(
            behavior=behavior, reasons=T.compose_reason_text(reasons),
            type=T.type_name(opcode))
        return Answer(text, graph_payload(graphs[0]), details, nav)
    text = T.MULTI_CAUSE.format(
        behavior=behavior, count=len(causes),
        type=_cause_types(project, [b for b, _ in causes]))
    return Answer(text, graph_set_payload(graphs), details, nav)


def _negative_behavior(project, entries, view, question, analyses,
                       label) -> Answer:
    iid = question.subject["instance"]
    _, is_clone = view.instance_target(iid)
    behavior = _cap(_behavior_statement(question, label, positive=False))
    blocks = list(question.blocks)
    graphs = [extract_answer_graph(analyses.cdg, entries, b) for b in blocks]
    visual = (graph_set_payload(graphs) if len(graphs) != 1
              else graph_payload(graphs[0]) if graphs else {"kind": "none"})

    if question.template_key == "start-as-clone" and not is_clone:
        return Answer(T.CLONE_HAT_FOR_ORIGINAL, visual, nav=blocks)
    if is_clone and blocks:
        hats = [_script_hat(project, b) for b in blocks]
        if all(h.opcode == "event_whenflagclicked" for h in hats):
            return Answer(T.FLAG_HAT_FOR_CLONE, visual, nav=blocks)
        meta = view.meta.get(iid)
        ran_elsewhere = [b for b in blocks if view.occurrences(b)]
        if meta is not None and ran_elsewhere and all(
                i < meta["first"] or i > meta["last"]
                for b in ran_elsewhere for i in view.occurrences(b)):
            return Answer(T.OUTSIDE_CLONE_LIFETIME, visual, nav=blocks)

    who = None if question.template_key in _ANY_INSTANCE_KEYS else iid
    executed = [b for b in blocks if view.occurrences(b, who)]
    if executed and question.template_key in _DELTA_KEYS:
        details = []
        for block in executed:
            graph = extract_answer_graph(analyses.cdg, entries, block)
            pairs = _chain_reasons(project, graph)
            reasons = [r for _, r in pairs] or [T.PRE_RECORDING_REASON]
            details.append({"block": block,
                            "text": T.compose_block_executed(reasons)})
        return Answer(T.NO_MATCHING_EFFECT.format(behavior=behavior),
                      visual, details, executed)

    details = []
    reasons = []
    for block, graph in zip(blocks, graphs):
        if not reachable(analyses.cdg, block):
            reason, long_form = T.NOT_REACHABLE, None
            details.append({"block": block, "text": T.NOT_REACHABLE})
        else:
            reason, long_form, _ = _not_executed_reason(project, graph)
            template = (T.BLOCK_NOT_EXECUTED_FAR if long_form
                        else T.BLOCK_NOT_EXECUTED)
            details.append({"block": block,
                            "text": template.format(reason=reason)})
        reasons.append(reason)
    if not blocks:
        return Answer(behavior + ".", {"kind": "none"})
    if len(blocks) == 1:
        opcode = block_lookup(project, blocks[0])[2].opcode
        if reasons[0] == T.NOT_REACHABLE:
            return Answer(T.NOT_REACHABLE, visual, details, blocks)
        text = T.BEHAVIOR_NOT_EXECUTED.format(
            behavior=behavior, reason=reasons[0], type=T.type_name(opcode))
        return Answer(text, visual, details, blocks)
    text = T.MULTI_CAUSE_NEGATIVE.format(
        behavior=behavior, count=len(blocks),
        type=_cause_types(project, blocks))
    return Answer(text, visual, details, blocks)


def answer_target_behavior(project: Project, trace, question: Question,
                           analyses: Analyses) -> Answer:
    entries = list(trace)
    view = TraceView(project, entries)
    label = view.instance_label(question.subject["instance"])
    if question.polarity == "why-did":
        return _positive_behavior(project, entries, view, question, analyses,
                                  label)
    return _negative_behavior(project, entries, view, question, analyses,
                              label)


# ---------------------------------------------------------------------------
# reporter values


def _ref_value(project: Project, post_state: dict, ref, instance_id: int):
    kind, scope, name = ref
    per_instance = kind == "attr" or scope != ""
    holder = (_instance_state(post_state, instance_id) if per_instance
              else post_state["instances"][0])
    if holder is None:
        return None
    if kind == "var":
        return holder["variables"].get(name)
    if kind == "list":
        return holder["lists"].get(name, [])
    if name == "backdrop":
        return post_state["instances"][0]["costume"] + 1
    if name == "costume":
        return holder["costume"] + 1
    return holder.get(name)


_WRITE_VALUE_PARAM = {
    "data_setvariable": "VALUE", "data_changevariable": "VALUE",
    "data_addtolist": "ITEM", "data_insertatlist": "ITEM",
    "data_replaceitemoflist": "ITEM", "data_deleteoflist": "INDEX",
}


def _write_reason(project: Project, entry) -> str:
    block = block_lookup(project, entry.block_id)[2]
    op = block.opcode
    bindings: dict = {}
    if op in ("data_setvariable", "data_changevariable"):
        bindings = {"variable": block.fields.get("VARIABLE", ""),
                    "value": _display(entry.params.get("VALUE"))}
    elif op in _WRITE_VALUE_PARAM:
        bindings = {"list": block.fields.get("LIST", ""),
                    "value": _display(entry.params.get(_WRITE_VALUE_PARAM[op]))}
    return T.reason_for(op, True, bindings)


def _value_chain(project: Project, entries, ref, data_slice, reader: int,
                 subject: str, value) -> tuple[str, dict, list]:
    """Chain text + payload + nav for a positive reporter-value question."""
    flag_start = bool(entries) and entries[0].opcode == "event_whenflagclicked"
    anchor = "green-flag" if flag_start else "recording-start"
    nodes = []
    reasons = []
    if data_slice.from_initial:
        initial = _display(data_slice.initial_value)
        reasons.append(T.INITIAL_VALUE_REASON.format(subject="it",
                                                     value=initial))
        nodes.append({"kind": "initial", "anchor": anchor, "value": initial})
    want_thumbs = ref[0] == "attr" and ref[2] in ("x", "y")
    for i in data_slice.indices:
        entry = entries[i]
        before = (_display(_ref_value(project, entries[i - 1].post_state,
                                      ref, reader)) if i > 0
                  else _display(_initial_value(project, ref)))
        after = _display(_ref_value(project, entry.post_state, ref, reader))
        node = {"kind": "write", "block": entry.block_id, "entry_index": i,
                "label": block_text(block_lookup(project, entry.block_id)[2]),
                "before": before, "after": after}
        if want_thumbs:
            vm = restore(project, entry.post_state)
            frame = images.stage_frame(vm)
            inst = vm.instance(reader)
            node["thumbnail"] = images.png_base64(
                images.sprite_thumbnail(frame, inst.x, inst.y))
        nodes.append(node)
        reasons.append(_write_reason(project, entry))
    text = T.compose_value_chain(subject, _display(value), reasons)
    payload = {"kind": "value-chain", "ref": list(ref), "subject": subject,
               "value": _display(value), "anchor": anchor, "nodes": nodes}
    nav = [entries[i].block_id for i in data_slice.indices]
    return text, payload, nav


def _all_writes_chain(project, entries, ref, reader, upto: int,
                      analyses: Analyses) -> dict:
    """Every write execution of ``ref`` before the read, as a chain payload
    (used by the set-but-changed answer)."""
    writers = {block_id for block_id, _ in analyses.ddg.defs.get(ref, ())}
    per_instance = ref[0] == "attr" or ref[1] != ""
    nodes = []
    for i, entry in enumerate(entries[:upto]):
        if entry.block_id not in writers or entry.phase == "start":
            continue
        if per_instance and entry.instance_id != reader:
            continue
        nodes.append({
            "kind": "write", "block": entry.block_id, "entry_index": i,
            "label": block_text(block_lookup(project, entry.block_id)[2]),
            "after": _display(_ref_value(project, entry.post_state, ref,
                                         reader))})
    return {"kind": "value-chain", "ref": list(ref), "nodes": nodes}


def _negative_variable(project, entries, question, analyses) -> Answer:
    idx = question.subject["entry_index"]
    reader = entries[idx].instance_id
    ref = ref_for_reporter(project, question.bindings["reporter_block"])
    value = question.bindings["value"]
    setters = list(question.blocks)
    per_instance = ref is not None and ref[1] != ""
    executed = []
    for block in setters:
        for i, entry in enumerate(entries[:idx]):
            if entry.block_id != block or entry.phase == "start":
                continue
            if per_instance and entry.instance_id != reader:
                continue
            executed.append((block, i))
    if executed:
        return Answer(
            T.SET_BUT_CHANGED.format(value=_display(value)),
            _all_writes_chain(project, entries, ref, reader, idx, analyses),
            nav=[b for b, _ in executed])
    graphs = [extract_answer_graph(analyses.cdg, entries, b) for b in setters]
    behavior = (f"[{question.bindings['variable']}] didn't have the value"
                f" {_display(value)}")
    details = []
    reasons = []
    for block, graph in zip(setters, graphs):
        reason, long_form, _ = _not_executed_reason(project, graph)
        template = T.BLOCK_NOT_EXECUTED_FAR if long_form else T.BLOCK_NOT_EXECUTED
        details.append({"block": block, "text": template.format(reason=reason)})
        reasons.append(reason)
    if len(setters) == 1:
        text = T.BEHAVIOR_NOT_EXECUTED.format(
            behavior=behavior, reason=reasons[0],
            type=T.type_name("data_setvariable"))
        return Answer(text, graph_payload(graphs[0]), details, setters)
    text = T.MULTI_CAUSE_NEGATIVE.format(
        behavior=behavior, count=len(setters),
        type=T.type_name("data_setvariable"))
    return Answer(text, graph_set_payload(graphs), details, setters)


def answer_reporter_value(project: Project, trace, question: Question,
                          analyses: Analyses) -> Answer:
    entries = list(trace)
    if question.strategy == "variable-value" and question.polarity == "why-didnt":
        return _negative_variable(project, entries, question, analyses)
    idx = question.subject["entry_index"]
    reader = entries[idx].instance_id
    reporter = question.bindings["reporter_block"]
    ref = ref_for_reporter(project, reporter)
    if ref is None:
        raise UnknownIdError(f"block reads no variable: {reporter}")
    data_slice = dynamic_data_slice(analyses.ddg, entries, ref, idx)
    if question.strategy == "variable-value":
        subject = f"[{question.bindings['variable']}]"
    elif question.strategy == "list-value":
        subject = f"[{question.bindings['list']}]"
    else:
        subject = question.bindings["name"]
    text, payload, nav = _value_chain(project, entries, ref, data_slice,
                                      reader, subject,
                                      question.bindings["value"])
    return Answer(text, payload, nav=nav)


_LIST_ADDERS = ("data_addtolist", "data_insertatlist", "data_replaceitemoflist")


def answer_list_contains(project: Project, trace, question: Question,
                         analyses: Analyses) -> Answer:
    entries = list(trace)
    idx = question.subject["entry_index"]
    reader = entries[idx].instance_id
    item = question.bindings["item"]
    wanted = _display(item)
    ref = ref_for_reporter(project, question.bindings["reporter_block"])
    behavior = f"[{question.bindings['list']}] didn't contain [{wanted}]"

    for entry in entries[:idx + 1]:
        values = _ref_value(project, entry.post_state, ref, reader) or []
        if any(to_string(v) == wanted for v in values):
            return Answer(
                T.CONTAINED_BUT_REMOVED.format(value=f"[{wanted}]"),
                _all_writes_chain(project, entries, ref, reader, idx + 1,
                                  analyses))

    adders = []
    for block_id, _ in analyses.ddg.defs.get(ref, ()):
        block = block_lookup(project, block_id)[2]
        if block.opcode not in _LIST_ADDERS:
            continue
        slot = block.inputs.get("ITEM")
        if slot is not None and slot.kind == "literal" \
                and to_string(slot.value) == wanted:
            adders.append(block_id)
    if not adders:
        return Answer(T.NEVER_ADDED.format(behavior=_cap(behavior)),
                      {"kind": "none"})
    graphs = [extract_answer_graph(analyses.cdg, entries, b) for b in adders]
    details = []
    reasons = []
    for block, graph in zip(adders, graphs):
        reason, long_form, _ = _not_executed_reason(project, graph)
        template = T.BLOCK_NOT_EXECUTED_FAR if long_form else T.BLOCK_NOT_EXECUTED
        details.append({"block": block, "text": template.format(reason=reason)})
        reasons.append(reason)
    if len(adders) == 1:
        opcode = block_lookup(project, adders[0])[2].opcode
        text = T.BEHAVIOR_NOT_EXECUTED.format(
            behavior=_cap(behavior), reason=reasons[0],
            type=T.type_name(opcode))
        return Answer(text, graph_payload(graphs[0]), details, adders)
    text = T.MULTI_CAUSE_NEGATIVE.format(
        behavior=_cap(behavior), count=len(adders),
        type=_cause_types(project, adders))
    return Answer(text, graph_set_payload(graphs), details, adders)


# ---------------------------------------------------------------------------
# Boolean operators and touching


def _find_record(records, block_id: str):
    for record in records:
        if record.block_id == block_id:
            return record
        found = _find_record(record.children, block_id)
        if found is not None:
            return found
    return None


def _descendants(record) -> list:
    out = []

    def walk(r):
        for child in r.children:
            out.append(child)
            walk(child)

    walk(record)
    return out


_EXPRESSIONS = {
    "operator_gt": ("{0} > {1}", ("OPERAND1", "OPERAND2")),
    "operator_lt": ("{0} < {1}", ("OPERAND1", "OPERAND2")),
    "operator_equals": ("{0} = {1}", ("OPERAND1", "OPERAND2")),
    "operator_and": ("{0} and {1}", ("OPERAND1", "OPERAND2")),
    "operator_or": ("{0} or {1}", ("OPERAND1", "OPERAND2")),
    "operator_not": ("not {0}", ("OPERAND",)),
    "operator_contains": ("[{0}] contains [{1}]", ("STRING1", "STRING2")),
}


def _slot_display(block: Block, name: str, record) -> str:
    slot = block.inputs.get(name)
    if slot is None:
        return ""
    if slot.kind == "literal":
        return to_string(slot.value)
    if slot.kind == "color":
        return "#%02X%02X%02X" % slot.color
    for child in record.children:
        if child.block_id == slot.block.id:
            return _display(child.value)
    return block_text(slot.block)


def answer_boolean_operator(project: Project, trace,
                            question: Question) -> Answer:
    entries = list(trace)
    entry = entries[question.subject["entry_index"]]
    condition_id = question.bindings["condition_block"]
    record = _find_record(entry.records, condition_id)
    if record is None:
        raise UnknownIdError(f"no traced evaluation of {condition_id}")
    block = block_lookup(project, condition_id)[2]
    verdict = to_string(record.value)
    operands = _descendants(record)
    payload = {"kind": "operator", "value": verdict,
               "condition_block": condition_id,
               "operands": [{"block": r.block_id,
                             "label": block_text(
                                 block_lookup(project, r.block_id)[2]),
                             "value": _display(r.value)} for r in operands]}
    if not operands:
        return Answer(T.ALWAYS_CONSTANT.format(value=verdict), payload)
    pairs = [(block_lookup(project, r.block_id)[2], r) for r in operands]
    operand_text = T.compose_operands(
        [(block_text(b), _display(r.value)) for b, r in pairs])
    if block.opcode in _EXPRESSIONS:
        template, slots = _EXPRESSIONS[block.opcode]
        expression = template.format(
            *[_slot_display(block, name, record) for name in slots])
    else:
        expression = block_text(block)
    payload["expression"] = expression
    return Answer(
        T.CONDITION_VERDICT.format(value=verdict, operands=operand_text,
                                   expression=expression),
        payload, nav=[r.block_id for r in operands])


def _object_label(arg: str) -> str:
    if arg == "mouse-pointer":
        return "the mouse-pointer"
    if arg == "edge":
        return "the edge"
    return f"sprite {arg}"


def _color_display(block: Block, name: str, record) -> str:
    slot = block.inputs.get(name)
    if slot is not None and slot.kind == "color":
        return "#%02X%02X%02X" % slot.color
    return _slot_display(block, name, record)


def answer_touching(project: Project, trace, question: Question) -> Answer:
    entries = list(trace)
    entry = entries[question.subject["entry_index"]]
    condition_id = question.bindings["condition_block"]
    record = _find_record(entry.records, condition_id)
    if record is None:
        raise UnknownIdError(f"no traced evaluation of {condition_id}")
    block = block_lookup(project, condition_id)[2]
    view = TraceView(project, entries)
    subject_label = view.instance_label(entry.instance_id)

    vm = restore(project, entry.post_state)
    op = block.opcode
    if op == "sensing_touchingobject":
        arg = block.fields.get("TOUCHINGOBJECTMENU", "")
        kind = "object"
        a_label, b_label = subject_label, _object_label(arg)
    elif op == "sensing_touchingcolor":
        arg = _color_display(block, "COLOR", record)
        kind = "color"
        a_label, b_label = subject_label, f"the color {arg}"
    else:
        c1 = _color_display(block, "COLOR", record)
        c2 = _color_display(block, "COLOR2", record)
        arg = (c1, c2)
        kind = "color-touching-color"
        a_label, b_label = f"the color {c1}", f"the color {c2}"
    touched, evidence = vm.touching_query(kind, entry.instance_id, arg)

    raster = vm.render()
    payload = {"kind": "touching-image", "touched": touched,
               "traced": bool(record.value),
               "evidence": evidence.to_dict(),
               "image": images.png_base64(images.touching_overlay(raster,
                                                                  evidence))}
    if evidence.color_missing:
        if isinstance(arg, tuple):
            color = arg[0] if evidence.empty_subject else arg[1]
        else:
            color = arg
        text = T.MISSING_COLOR.format(color=color)
    elif evidence.empty_subject or evidence.empty_object:
        invisible = a_label if evidence.empty_subject else b_label
        text = _cap(T.INVISIBLE_SPRITE.format(sprite=invisible))
    elif touched:
        text = T.TOUCHED.format(a=_cap(a_label), b=b_label)
    else:
        text = T.DISTANCE.format(a=a_label, b=b_label,
                                 distance=_display(round(evidence.distance, 2)))
    return Answer(text, payload, nav=[condition_id])


# ---------------------------------------------------------------------------
# dispatch


def answer_question(project: Project, trace, question: Question,
                    analyses: Analyses | None = None) -> Answer:
    analyses = analyses or Analyses(project)
    entries = list(trace)
    strategy = question.strategy
    if strategy == "behavior":
        return answer_target_behavior(project, entries, question, analyses)
    if strategy == "block-executed":
        graph = extract_answer_graph(analyses.cdg, entries,
                                     question.subject["block"],
                                     at_index=question.subject["entry_index"])
        return answer_block_executed(project, graph)
    if strategy == "block-not-executed":
        graph = extract_answer_graph(analyses.cdg, entries,
                                     question.subject["block"])
        return answer_block_not_executed(project, analyses.cdg, graph)
    if strategy == "execution-time":
        return answer_execution_time(project, entries, question.subject)
    if strategy in ("reporter-value", "variable-value", "list-value"):
        return answer_reporter_value(project, entries, question, analyses)
    if strategy == "list-contain":
        return answer_list_contains(project, entries, question, analyses)
    if strategy == "boolean-operator":
        return answer_boolean_operator(project, entries, question)
    if strategy == "touching":
        return answer_touching(project, entries, question)
    raise UnknownIdError(f"unknown answer strategy: {strategy}")

"""Control- and data-dependence analyses over block programs.

The pipeline is CFG -> CDG -> acyclic CDG -> answer graph.  Control
dependence is computed structurally from block nesting (blocks directly in
a script body depend on the hat, substack blocks depend on their control
block), which for structured block programs coincides with the classic
postdominator construction.  Loop headers additionally depend on
themselves; those self-cycles, and cycles through mutually broadcasting
scripts, are removed by depth-first back-edge elimination before answer
graphs are extracted.

Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import UnknownIdError
from .model import (
    Block,
    Project,
    Target,
    block_is_terminal,
    block_lookup,
    block_text,
    enclosing_statement,
    iter_statements,
)
from .values import Value, to_bool, to_string

# Colored node margins identify the target a block belongs to; assigned by
# declaration order (stage first), cycling through the palette.
TARGET_MARGIN_COLORS = (
    "#FFD500", "#4C97FF", "#40BF4A", "#FF6680",
    "#9966FF", "#FF8C1A", "#5CB1D6", "#C94FC9",
)

INTERRUPTION_LABEL = "execution paused / stopped"

_BROADCAST_OPS = ("event_broadcast", "event_broadcastandwait")


# ---------------------------------------------------------------------------
# control-flow graph


@dataclass(frozen=True)
class CfgEdge:
    src: str
    dst: str
    label: str  # next | true | false | loop | back | event:broadcast|clone|backdrop


@dataclass
class Cfg:
    """Successor relation over statement blocks, one entry/exit per script."""

    project: Project
    nodes: list[str]
    edges: list[CfgEdge]

    def successors(self, node: str) -> list[CfgEdge]:
        return [e for e in self.edges if e.src == node]

    def to_dot(self) -> str:
        return _dot("cfg", self.nodes,
                    [(e.src, e.dst, {"label": e.label}) for e in self.edges])


def script_entry(hat_id: str) -> str:
    return f"entry:{hat_id}"


def script_exit(hat_id: str) -> str:
    return f"exit:{hat_id}"


def build_cfg(project: Project) -> Cfg:
    nodes: list[str] = []
    edges: list[CfgEdge] = []

    def add(src: str, dst: str, label: str) -> None:
        edges.append(CfgEdge(src, dst, label))

    def wire_sequence(body, tails, exit_id):
        """Connect dangling (node, label) tails through a statement sequence;
        returns the tails left dangling at the end."""
        for blk in body:
            for src, label in tails:
                add(src, blk.id, label)
            tails = wire_statement(blk, exit_id)
        return tails

    def wire_statement(blk: Block, exit_id: str):
        op = blk.opcode
        if op == "control_if":
            inner = wire_sequence(blk.substacks[0], [(blk.id, "true")], exit_id)
            return inner + [(blk.id, "false")]
        if op == "control_if_else":
            then = wire_sequence(blk.substacks[0], [(blk.id, "true")], exit_id)
            other = wire_sequence(blk.substacks[1], [(blk.id, "false")], exit_id)
            return then + other
        if op == "control_forever":
            inner = wire_sequence(blk.substacks[0], [(blk.id, "loop")], exit_id)
            for src, _ in inner:
                add(src, blk.id, "back")
            return []  # forever has no exit
        if op == "control_repeat":
            inner = wire_sequence(blk.substacks[0], [(blk.id, "loop")], exit_id)
            for src, _ in inner:
                add(src, blk.id, "back")
            return [(blk.id, "next")]
        if op == "control_repeat_until":
            inner = wire_sequence(blk.substacks[0], [(blk.id, "false")], exit_id)
            for src, _ in inner:
                add(src, blk.id, "back")
            return [(blk.id, "true")]
        if block_is_terminal(blk):
            return []
        return [(blk.id, "next")]

    broadcast_hats: list[tuple[str, str]] = []  # (message, hat id)
    clone_hats: dict[str, list[str]] = {}       # target name -> hat ids
    backdrop_hats: list[tuple[str, str]] = []   # (backdrop name, hat id)

    for target in project.targets:
        for script in target.scripts:
            hat = script.hat
            nodes.append(script_entry(hat.id))
            nodes.append(hat.id)
            nodes.extend(b.id for b in iter_statements(script.body))
            nodes.append(script_exit(hat.id))
            add(script_entry(hat.id), hat.id, "next")
            tails = wire_sequence(script.body, [(hat.id, "next")],
                                  script_exit(hat.id))
            for src, label in tails:
                add(src, script_exit(hat.id), label)
            if hat.opcode == "event_whenbroadcastreceived":
                broadcast_hats.append((hat.fields.get("BROADCAST_OPTION", ""),
                                       hat.id))
            elif hat.opcode == "control_start_as_clone":
                clone_hats.setdefault(target.name, []).append(hat.id)
            elif hat.opcode == "event_whenbackdropswitchesto":
                backdrop_hats.append((hat.fields.get("BACKDROP", ""), hat.id))

    for target in project.targets:
        for script in target.scripts:
            for blk in iter_statements(script.body):
                if blk.opcode in _BROADCAST_OPS:
                    slot = blk.inputs.get("BROADCAST_INPUT")
                    if slot is not None and slot.kind == "literal":
                        message = to_string(slot.value)
                        matches = [h for m, h in broadcast_hats if m == message]
                    else:  # dynamic message: any receiver may fire
                        matches = [h for _, h in broadcast_hats]
                    for hat_id in matches:
                        add(blk.id, hat_id, "event:broadcast")
                elif blk.opcode == "control_create_clone_of":
                    option = blk.fields.get("CLONE_OPTION", "myself")
                    origin = target.name if option == "myself" else option
                    for hat_id in clone_hats.get(origin, []):
                        add(blk.id, hat_id, "event:clone")
                elif blk.opcode == "looks_switchbackdrop":
                    name = blk.fields.get("BACKDROP", "")
                    for backdrop, hat_id in backdrop_hats:
                        if backdrop == name:
                            add(blk.id, hat_id, "event:backdrop")

    return Cfg(project, nodes, edges)


# ---------------------------------------------------------------------------
# control-dependence graph


@dataclass(frozen=True)
class CdgEdge:
    src: str
    dst: str
    required: str | None  # condition value needed to flow this way
    kind: str  # control | event | user


@dataclass
class Cdg:
    project: Project
    nodes: list[str]  # user-event nodes first, then blocks in declaration order
    edges: list[CdgEdge]
    user_events: list[str]
    cfg_live: frozenset[str]  # blocks reachable from their own script entry
    _order: dict[str, int] = field(default_factory=dict, repr=False)
    _reach: frozenset[str] | None = field(default=None, repr=False)

    def order(self, node: str) -> int:
        return self._order[node]

    def incoming(self, node: str) -> list[CdgEdge]:
        return [e for e in self.edges if e.dst == node]

    def outgoing(self, node: str) -> list[CdgEdge]:
        return [e for e in self.edges if e.src == node]

    def to_dot(self) -> str:
        return _dot(
            "cdg", self.nodes,
            [(e.src, e.dst, {"label": e.required or e.kind}) for e in self.edges])


def user_event_node(hat: Block, target: Target) -> str | None:
    """Identifier of the user action that triggers a hat, if any."""
    if hat.opcode == "event_whenflagclicked":
        return "user:green-flag"
    if hat.opcode == "event_whenkeypressed":
        return f"user:key:{hat.fields.get('KEY_OPTION', '')}"
    if hat.opcode == "event_whenthisspriteclicked":
        return f"user:click:{target.name}"
    return None  # triggered programmatically


def user_event_label(node: str) -> str:
    if node == "user:green-flag":
        return "green flag clicked"
    if node.startswith("user:key:"):
        return f"key [{node[len('user:key:'):]}] pressed"
    if node.startswith("user:click:"):
        return f"sprite [{node[len('user:click:'):]}] clicked"
    return node


_SUBSTACK_REQUIRED = {
    "control_if": ("true",),
    "control_if_else": ("true", "false"),
    "control_repeat": (None,),
    "control_repeat_until": ("false",),
    "control_forever": (None,),
}

_LOOP_SELF_REQUIRED = {
    "control_forever": None,
    "control_repeat": None,
    "control_repeat_until": "false",
}


def build_cdg(cfg: Cfg) -> Cdg:
    project = cfg.project
    edges: list[CdgEdge] = []
    user_events: list[str] = []
    block_nodes: list[str] = []

    for target in project.targets:
        for script in target.scripts:
            hat = script.hat
            block_nodes.append(hat.id)
            block_nodes.extend(b.id for b in iter_statements(script.body))
            user = user_event_node(hat, target)
            if user is not None:
                if user not in user_events:
                    user_events.append(user)
                edges.append(CdgEdge(user, hat.id, None, "user"))

            def depend(parent_id: str, body, required: str | None) -> None:
                for blk in body:
                    edges.append(CdgEdge(parent_id, blk.id, required, "control"))
                    wanted = _SUBSTACK_REQUIRED.get(blk.opcode, ())
                    for sub, req in zip(blk.substacks, wanted):
                        depend(blk.id, sub, req)

            depend(hat.id, script.body, None)
            for blk in iter_statements(script.body):
                if blk.opcode in _LOOP_SELF_REQUIRED:
                    edges.append(CdgEdge(blk.id, blk.id,
                                         _LOOP_SELF_REQUIRED[blk.opcode],
                                         "control"))

    # hats triggered programmatically depend on their triggering blocks
    for e in cfg.edges:
        if e.label.startswith("event:"):
            edges.append(CdgEdge(e.src, e.dst, None, "event"))

    cfg_live = _cfg_live_set(cfg)
    user_events.sort()
    nodes = user_events + block_nodes
    order = {n: i for i, n in enumerate(nodes)}
    return Cdg(project, nodes, edges, user_events, cfg_live, order)


def _cfg_live_set(cfg: Cfg) -> frozenset[str]:
    """Blocks reachable from their own script entry along non-event edges."""
    out: dict[str, list[str]] = {}
    for e in cfg.edges:
        if not e.label.startswith("event:"):
            out.setdefault(e.src, []).append(e.dst)
    live: set[str] = set()
    for node in cfg.nodes:
        if not node.startswith("entry:"):
            continue
        stack = [node]
        while stack:
            cur = stack.pop()
            if cur in live:
                continue
            live.add(cur)
            stack.extend(out.get(cur, ()))
    return frozenset(live)


def make_acyclic(cdg: Cdg) -> Cdg:
    """Remove every back edge found by a depth-first traversal rooted at the
    user-event nodes (remaining components are swept in node order), which
    deletes exactly the edges that close cycles."""
    out: dict[str, list[tuple[int, CdgEdge]]] = {n: [] for n in cdg.nodes}
    for i, e in enumerate(cdg.edges):
        out[e.src].append((i, e))
    for lst in out.values():
        lst.sort(key=lambda pair: (cdg.order(pair[1].dst),
                                   pair[1].required or "", pair[0]))

    WHITE, GRAY, BLACK = 0, 1, 2
    color = dict.fromkeys(cdg.nodes, WHITE)
    dropped: set[int] = set()

    def visit(root: str) -> None:
        color[root] = GRAY
        stack: list[tuple[str, int]] = [(root, 0)]
        while stack:
            node, cursor = stack[-1]
            advanced = False
            for pos in range(cursor, len(out[node])):
                idx, edge = out[node][pos]
                if color[edge.dst] == GRAY:
                    dropped.add(idx)  # closes a cycle through the DFS stack
                elif color[edge.dst] == WHITE:
                    stack[-1] = (node, pos + 1)
                    color[edge.dst] = GRAY
                    stack.append((edge.dst, 0))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()

    for root in cdg.user_events:
        if color[root] == WHITE:
            visit(root)
    for node in cdg.nodes:
        if color[node] == WHITE:
            visit(node)

    kept = [e for i, e in enumerate(cdg.edges) if i not in dropped]
    return Cdg(cdg.project, cdg.nodes, kept, cdg.user_events, cdg.cfg_live,
               cdg._order)


def reachable(cdg: Cdg, block_id: str) -> bool:
    """True iff some chain of triggers starting at a user action can ever
    lead to the block executing."""
    if cdg._reach is None:
        reach: set[str] = set()
        queue = list(cdg.user_events)
        reach.update(queue)
        out: dict[str, list[CdgEdge]] = {}
        for e in cdg.edges:
            out.setdefault(e.src, []).append(e)
        while queue:
            node = queue.pop()
            for e in out.get(node, ()):
                dst = e.dst
                if dst in reach:
                    continue
                if not dst.startswith("user:") and dst not in cdg.cfg_live:
                    continue  # cut off in the CFG (after a stop, forever, ...)
                reach.add(dst)
                queue.append(dst)
        cdg._reach = frozenset(reach)
    if block_id not in cdg._order:
        block_id = enclosing_statement(cdg.project, block_id).id
    return block_id in cdg._reach


# ---------------------------------------------------------------------------
# answer graph


@dataclass
class AgNode:
    id: str
    kind: str  # block | event
    opcode: str | None
    label: str
    target: str | None
    margin_color: str | None
    executed: bool
    opacity: float
    entry_index: int | None  # relevant trace entry, when executed
    condition_value: Value | None
    values: dict[str, Value]  # tooltip: traced input values


@dataclass
class AgEdge:
    src: str
    dst: str
    required: str | None  # condition value or event label
    executed: bool
    style: str  # solid | dashed-crossed
    interruption: str | None


@dataclass
class AnswerGraph:
    target_block: str
    nodes: dict[str, AgNode]
    edges: list[AgEdge]
    frontier: AgEdge | None  # the blocking edge, for unexecuted targets
    frontier_edges: list[AgEdge]

    def node(self, node_id: str) -> AgNode:
        return self.nodes[node_id]

    def to_dot(self) -> str:
        ordered = list(self.nodes)
        attrs = []
        for n in ordered:
            node = self.nodes[n]
            attrs.append({"label": node.label, "opacity": f"{node.opacity:.1f}",
                          "color": node.margin_color or "none"})
        lines = []
        for e in self.edges:
            a = {"label": e.interruption or e.required or "",
                 "style": "dashed" if e.style == "dashed-crossed" else "solid",
                 "executed": "true" if e.executed else "false"}
            lines.append((e.src, e.dst, a))
        return _dot("answer", ordered, lines, node_attrs=attrs)


_EVENT_EDGE_LABELS = {
    "event_broadcast": "broadcast",
    "event_broadcastandwait": "broadcast",
    "control_create_clone_of": "clone",
    "looks_switchbackdrop": "backdrop switch",
}


def extract_answer_graph(cdg: Cdg, trace, target_block: str,
                         at_index: int | None = None) -> AnswerGraph:
    """Backward closure of the acyclic CDG from ``target_block``, annotated
    with execution evidence from ``trace``.

    ``at_index`` selects which execution of the target to explain; the
    default is the end of the trace, so annotations describe the latest
    relevant execution.
    """
    if target_block not in cdg._order:
        raise UnknownIdError(f"block not in dependence graph: {target_block}")

    entries = list(trace)
    anchor = len(entries) - 1 if at_index is None else at_index
    occurrences: dict[str, list[int]] = {}
    for e in entries:
        occurrences.setdefault(e.block_id, []).append(e.index)

    def relevant(block_id: str) -> int | None:
        seen = occurrences.get(block_id)
        if not seen:
            return None
        pos = bisect_right(seen, anchor)
        return seen[pos - 1] if pos else None

    margin = {t.name: TARGET_MARGIN_COLORS[i % len(TARGET_MARGIN_COLORS)]
              for i, t in enumerate(cdg.project.targets)}

    incoming: dict[str, list[CdgEdge]] = {}
    for e in cdg.edges:
        incoming.setdefault(e.dst, []).append(e)

    node_ids: list[str] = []
    kept_edges: list[CdgEdge] = []
    seen = {target_block}
    queue = [target_block]
    while queue:
        cur = queue.pop()
        node_ids.append(cur)
        for e in incoming.get(cur, ()):  # user-event nodes have none: closure stops
            kept_edges.append(e)
            if e.src not in seen:
                seen.add(e.src)
                queue.append(e.src)
    node_ids.sort(key=cdg.order)
    kept_edges.sort(key=lambda e: (cdg.order(e.src), cdg.order(e.dst),
                                   e.required or ""))

    nodes: dict[str, AgNode] = {}
    for node_id in node_ids:
        if node_id.startswith("user:"):
            hat_hits = [relevant(e.dst) for e in cdg.outgoing(node_id)]
            hits = [h for h in hat_hits if h is not None]
            executed = bool(hits)
            nodes[node_id] = AgNode(
                id=node_id, kind="event", opcode=None,
                label=user_event_label(node_id), target=None, margin_color=None,
                executed=executed, opacity=1.0 if executed else 0.5,
                entry_index=max(hits) if hits else None,
                condition_value=None, values={})
            continue
        target, _, block = block_lookup(cdg.project, node_id)
        index = relevant(node_id)
        executed = index is not None
        values: dict[str, Value] = {}
        condition = None
        if executed:
            values = dict(entries[index].params)
            if "CONDITION" in values:
                condition = values["CONDITION"]
        nodes[node_id] = AgNode(
            id=node_id, kind="block", opcode=block.opcode,
            label=block_text(block), target=target.name,
            margin_color=margin[target.name], executed=executed,
            opacity=1.0 if executed else 0.5, entry_index=index,
            condition_value=condition, values=values)

    edges: list[AgEdge] = []
    for e in kept_edges:
        src, dst = nodes[e.src], nodes[e.dst]
        required = e.required
        if e.kind == "event" and required is None:
            required = _EVENT_EDGE_LABELS.get(src.opcode or "", "event")
        style = "solid"
        interruption = None
        if (e.required in ("true", "false") and src.executed
                and to_bool(src.condition_value) != (e.required == "true")):
            style = "dashed-crossed"
        elif src.executed and not dst.executed:
            interruption = INTERRUPTION_LABEL
        edges.append(AgEdge(src=e.src, dst=e.dst, required=required,
                            executed=src.executed and dst.executed,
                            style=style, interruption=interruption))

    target_executed = nodes[target_block].executed
    frontier_edges = [e for e in edges
                      if nodes[e.src].executed and not nodes[e.dst].executed]
    frontier_edges.sort(
        key=lambda e: (-(nodes[e.src].entry_index
                         if nodes[e.src].entry_index is not None else -1),
                       cdg.order(e.src), cdg.order(e.dst)))
    frontier = (frontier_edges[0]
                if frontier_edges and not target_executed else None)
    return AnswerGraph(target_block, nodes, edges, frontier,
                       frontier_edges if not target_executed else [])


# ---------------------------------------------------------------------------
# data-dependence graph and dynamic slicing

Ref = tuple  # (kind, scope, name); kind var|list|attr, scope "" = global


@dataclass(frozen=True)
class DdgEdge:
    def_block: str
    use_block: str
    ref: Ref


@dataclass
class Ddg:
    project: Project
    defs: dict  # Ref -> tuple[(block id, unconditional flag), ...]
    uses: dict  # Ref -> tuple[block id, ...]
    edges: tuple

    def to_dot(self) -> str:
        nodes: list[str] = []
        for e in self.edges:
            for n in (e.def_block, e.use_block):
                if n not in nodes:
                    nodes.append(n)
        return _dot("ddg", nodes,
                    [(e.def_block, e.use_block,
                      {"label": ":".join(str(p) for p in e.ref)})
                     for e in self.edges])


@dataclass
class DataSlice:
    """Write history behind one recorded read: the trace indices from the
    last unconditional overwrite (or the initial value) up to the read."""

    indices: list
    from_initial: bool
    initial_value: Value | None


# writers: ref name -> unconditional? (an unconditional write ignores the
# previous value, so nothing before it can influence the result)
_VAR_WRITERS = {"data_setvariable": True, "data_changevariable": False}
_LIST_WRITERS = {"data_addtolist": False, "data_deleteoflist": False,
                 "data_insertatlist": False, "data_replaceitemoflist": False}
_ATTR_WRITERS: dict[str, tuple[tuple[str, bool], ...]] = {
    "motion_setx": (("x", True),),
    "motion_changex": (("x", False),),
    "motion_sety": (("y", True),),
    "motion_changey": (("y", False),),
    "motion_gotoxy": (("x", True), ("y", True)),
    "motion_glideto": (("x", True), ("y", True)),
    "motion_movesteps": (("x", False), ("y", False)),
    "motion_pointindirection": (("direction", True),),
    "motion_pointtowards": (("direction", True),),
    "motion_turnright": (("direction", False),),
    "motion_turnleft": (("direction", False),),
    "looks_setsize": (("size", True),),
    "looks_changesize": (("size", False),),
    "looks_show": (("visible", True),),
    "looks_hide": (("visible", True),),
    "looks_switchcostume": (("costume", True),),
    "looks_nextcostume": (("costume", False),),
}
_ATTR_READERS = {
    "motion_xposition": "x",
    "motion_yposition": "y",
    "motion_direction": "direction",
    "looks_size": "size",
    "looks_costumenumber": "costume",
}
_LIST_READERS = ("data_itemoflist", "data_lengthoflist", "data_listcontents",
                 "data_listcontainsitem")


def _var_scope(target: Target, name: str) -> str:
    if not target.is_stage and any(v.name == name for v in target.variables):
        return target.name
    return ""


def _list_scope(target: Target, name: str) -> str:
    if not target.is_stage and any(l.name == name for l in target.lists):
        return target.name
    return ""


def ref_for_reporter(project: Project, block_id: str) -> Ref | None:
    """The variable/list/attribute a reporter block reads, if any."""
    target, _, block = block_lookup(project, block_id)
    op = block.opcode
    if op == "data_variable":
        name = block.fields.get("VARIABLE", "")
        return ("var", _var_scope(target, name), name)
    if op in _LIST_READERS:
        name = block.fields.get("LIST", "")
        return ("list", _list_scope(target, name), name)
    if op in _ATTR_READERS:
        return ("attr", target.name, _ATTR_READERS[op])
    if op == "looks_backdropnumber":
        return ("attr", "", "backdrop")
    return None


def build_ddg(project: Project) -> Ddg:
    defs: dict[Ref, list] = {}
    uses: dict[Ref, list] = {}

    def note_def(ref: Ref, block_id: str, unconditional: bool) -> None:
        defs.setdefault(ref, []).append((block_id, unconditional))

    def note_use(ref: Ref, block_id: str) -> None:
        uses.setdefault(ref, []).append(block_id)

    for target in project.targets:
        for script in target.scripts:
            for blk in iter_statements(script.body):
                op = blk.opcode
                if op in _VAR_WRITERS:
                    name = blk.fields.get("VARIABLE", "")
                    ref = ("var", _var_scope(target, name), name)
                    note_def(ref, blk.id, _VAR_WRITERS[op])
                    if op == "data_changevariable":
                        note_use(ref, blk.id)  # reads the old value
                elif op in _LIST_WRITERS:
                    name = blk.fields.get("LIST", "")
                    ref = ("list", _list_scope(target, name), name)
                    note_def(ref, blk.id, _LIST_WRITERS[op])
                    note_use(ref, blk.id)
                elif op in _ATTR_WRITERS:
                    for attr, unconditional in _ATTR_WRITERS[op]:
                        note_def(("attr", target.name, attr), blk.id,
                                 unconditional)
                        if not unconditional:
                            note_use(("attr", target.name, attr), blk.id)
                elif op == "looks_switchbackdrop":
                    note_def(("attr", "", "backdrop"), blk.id, True)
                for nested in blk.nested_blocks():
                    ref = ref_for_reporter(project, nested.id)
                    if ref is not None:
                        note_use(ref, blk.id)

    edges = tuple(
        DdgEdge(d, u, ref)
        for ref in sorted(set(defs) | set(uses), key=str)
        for d, _ in defs.get(ref, ())
        for u in uses.get(ref, ()))
    return Ddg(project,
               {r: tuple(v) for r, v in defs.items()},
               {r: tuple(v) for r, v in uses.items()},
               edges)


def _initial_value(project: Project, ref: Ref) -> Value | None:
    kind, scope, name = ref
    if kind == "var":
        holder = project.target_named(scope) if scope else project.stage
        for v in (holder.variables if holder else ()):
            if v.name == name:
                return v.value
        return 0
    if kind == "list":
        holder = project.target_named(scope) if scope else project.stage
        for l in (holder.lists if holder else ()):
            if l.name == name:
                return list(l.values)
        return []
    if name == "backdrop":
        return project.stage.initial.costume + 1
    holder = project.target_named(scope)
    if holder is None:
        return None
    init = holder.initial
    return {"x": init.x, "y": init.y, "direction": init.direction,
            "size": init.size, "visible": init.visible,
            "costume": init.costume + 1}.get(name)


def dynamic_data_slice(ddg: Ddg, trace, ref: Ref, at_index: int) -> DataSlice:
    """The chain of writes responsible for the value of ``ref`` as read at
    trace index ``at_index``: the last unconditional overwrite before the
    read (or the initial value when there is none) plus every later write.

    Local variables and sprite attributes live per instance, so only writes
    executed by the reading instance count; globals accept writes from any
    instance.
    """
    entries = list(trace)
    writers = dict(ddg.defs.get(ref, ()))
    per_instance = ref[0] == "attr" or ref[1] != ""
    reader = entries[at_index].instance_id if per_instance else None

    writes: list[tuple[int, bool]] = []
    for e in entries[:at_index]:
        if e.block_id not in writers or e.phase == "start":
            continue
        if per_instance and e.instance_id != reader:
            continue
        writes.append((e.index, writers[e.block_id]))

    start = 0
    from_initial = True
    for pos in range(len(writes) - 1, -1, -1):
        if writes[pos][1]:
            start = pos
            from_initial = False
            break
    indices = [i for i, _ in writes[start:]]
    return DataSlice(indices, from_initial,
                     _initial_value(ddg.project, ref) if from_initial else None)


# ---------------------------------------------------------------------------
# dot output


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot(name: str, nodes, edges, node_attrs=None) -> str:
    lines = [f"digraph {name} {{"]
    for i, node in enumerate(nodes):
        if node_attrs is not None:
            attrs = " ".join(f"{k}={_quote(str(v))}"
                             for k, v in node_attrs[i].items())
            lines.append(f"  {_quote(node)} [{attrs}];")
        else:
            lines.append(f"  {_quote(node)};")
    for src, dst, attrs in edges:
        joined = " ".join(f"{k}={_quote(str(v))}" for k, v in attrs.items())
        lines.append(f"  {_quote(src)} -> {_quote(dst)} [{joined}];")
    lines.append("}")
    return "\n".join(lines) + "\n"

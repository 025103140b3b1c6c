"""English answer texts: fixed sentences, per-opcode reason templates, and
the conjunction rules that chain reasons into full answers.

Everything user-facing lives here so the wording can be audited (and one day
localized) in a single place.  Placeholder substitution is plain
``str.format``; escaping is the UI's concern.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import OPCODES, BlockKind

# ---------------------------------------------------------------------------
# fixed answer sentences

NOT_REACHABLE = "The block wasn't executed because it is not reachable!"

SET_BUT_CHANGED = "The variable was set to {value}, but changed afterwards."

MISSING_COLOR = ("The color {color} did not occur when the block was executed!"
                 " Try to select the desired color with the color picker.")

INVISIBLE_SPRITE = ("{sprite} could not be touched, because it was invisible"
                    " when the block was executed!")

TOUCHED = "When the block was executed, {a} touched {b} as shown in the picture."

DISTANCE = "The distance from {a} to {b} was {distance} when the block was executed."

EXECUTED_AFTER_FLAG = ("The block was executed {elapsed} seconds after"
                       " clicking the green flag.")

EXECUTED_AFTER_RECORDING = ("The block was executed {elapsed} seconds after"
                            " starting the recording.")

ASK_THE_QUESTION_MARK = ("Do you need an explanation for a block?"
                         " Then click on the ? next to it!")

MULTI_CAUSE = ("{behavior}, because the execution of {count} {type} blocks"
               " caused this behavior. " + ASK_THE_QUESTION_MARK)

MULTI_CAUSE_NEGATIVE = ("{behavior}, because none of the {count} {type} blocks"
                        " that could cause this behavior was executed. "
                        + ASK_THE_QUESTION_MARK)

NO_MATCHING_EFFECT = ("{behavior}, because none of the executed blocks caused"
                      " this effect. " + ASK_THE_QUESTION_MARK)

CONTAINED_BUT_REMOVED = ("The list contained {value}, but it was removed"
                         " afterwards.")

NEVER_ADDED = "{behavior}, because no block adds that value to the list."

PRE_RECORDING_REASON = ("its triggering blocks ran before the recording"
                        " started")

BLOCK_EXECUTED = "The block was executed, {reasons}."

BLOCK_NOT_EXECUTED = "The block wasn't executed, because {reason}."

BLOCK_NOT_EXECUTED_FAR = ("The block wasn't executed, because {reason} and"
                          " therefore all subsequent blocks that could lead to"
                          " the execution of the block were not executed.")

BEHAVIOR_EXECUTED = "{behavior}, {reasons} and therefore the {type} block was executed."

BEHAVIOR_NOT_EXECUTED = ("{behavior}, because {reason} and therefore the"
                         " {type} block was not executed.")

VALUE_CHAIN = "{subject} had the value {value}, {reasons}."

CONDITION_VERDICT = ("The condition evaluated to {value}, because {operands}"
                     " and therefore {expression} is {value}.")

HAD_VALUE = "{name} had the value {value}"

ALWAYS_CONSTANT = ("The condition is always {value}, because none of the"
                   " blocks is a variable")

INTERRUPTED = "the execution was stopped / paused"

CONDITION_WAS = "the condition {condition} was {required}"

CONDITION_WASNT = "the condition {condition} wasn't {required}"

# §-special clone answers: behavior asked about the wrong kind of instance
CLONE_HAT_FOR_ORIGINAL = ("The blocks under a when-I-start-as-a-clone hat are"
                          " never executed by the original sprite.")

FLAG_HAT_FOR_CLONE = ("The blocks under a when-green-flag-clicked hat can"
                      " never be executed by a clone, because clicking the"
                      " green flag deletes all clones.")

OUTSIDE_CLONE_LIFETIME = ("The event occurred outside the lifetime of this"
                          " clone.")

# generic event reasons used when a frontier sits on a user-event node
EVENT_NEGATIVE = {
    "green-flag": "the green flag wasn't clicked",
    "key": "the key [{key}] wasn't pressed",
    "click": "the sprite {sprite} wasn't clicked",
}

INITIAL_VALUE_REASON = "{subject} started with the value {value}"


# ---------------------------------------------------------------------------
# per-opcode reason templates


@dataclass(frozen=True)
class ReasonTemplates:
    positive: str
    negative: str
    type_name: str


def _condition(type_name: str) -> ReasonTemplates:
    return ReasonTemplates(CONDITION_WAS, CONDITION_WASNT, type_name)


def _generic(type_name: str) -> ReasonTemplates:
    return ReasonTemplates(
        "the " + type_name + " block was executed",
        "the " + type_name + " block wasn't executed",
        type_name)


CATALOG: dict[str, ReasonTemplates] = {
    # hats
    "event_whenflagclicked": ReasonTemplates(
        "the green flag was clicked",
        "the green flag wasn't clicked",
        "when green flag clicked"),
    "event_whenkeypressed": ReasonTemplates(
        "the key [{key}] was pressed",
        "the key [{key}] wasn't pressed",
        "when key pressed"),
    "event_whenthisspriteclicked": ReasonTemplates(
        "the sprite {sprite} was clicked",
        "the sprite {sprite} wasn't clicked",
        "when this sprite clicked"),
    "event_whenbroadcastreceived": ReasonTemplates(
        "the message [{message}] was received",
        "the message [{message}] wasn't received",
        "when I receive"),
    "event_whenbackdropswitchesto": ReasonTemplates(
        "the backdrop switched to [{backdrop}]",
        "the backdrop didn't switch to [{backdrop}]",
        "when backdrop switches to"),
    "control_start_as_clone": ReasonTemplates(
        "the sprite started as a clone",
        "the sprite didn't start as a clone",
        "when I start as a clone"),
    # conditional control flow
    "control_if": _condition("if"),
    "control_if_else": _condition("if else"),
    "control_repeat_until": _condition("repeat until"),
    "control_wait_until": _condition("wait until"),
    # loops and the rest of control
    "control_forever": ReasonTemplates(
        "the forever loop was running",
        "the forever loop wasn't running",
        "forever"),
    "control_repeat": ReasonTemplates(
        "the repeat loop was running",
        "the repeat loop wasn't running",
        "repeat"),
    "control_wait": _generic("wait"),
    "control_stop": _generic("stop"),
    "control_create_clone_of": ReasonTemplates(
        "a clone of {sprite} was created",
        "no clone of {sprite} was created",
        "create clone of"),
    "control_delete_this_clone": _generic("delete this clone"),
    # variables and lists (phrases used in value chains)
    "data_setvariable": ReasonTemplates(
        "the variable [{variable}] was set to {value}",
        "the variable [{variable}] wasn't set",
        "set variable"),
    "data_changevariable": ReasonTemplates(
        "the variable [{variable}] was changed by {value}",
        "the variable [{variable}] wasn't changed",
        "change variable"),
    "data_addtolist": ReasonTemplates(
        "{value} was added to the list [{list}]",
        "nothing was added to the list [{list}]",
        "add to list"),
    "data_deleteoflist": ReasonTemplates(
        "item {value} of the list [{list}] was deleted",
        "no item of the list [{list}] was deleted",
        "delete of list"),
    "data_insertatlist": ReasonTemplates(
        "{value} was inserted into the list [{list}]",
        "nothing was inserted into the list [{list}]",
        "insert at list"),
    "data_replaceitemoflist": ReasonTemplates(
        "an item of the list [{list}] was replaced with {value}",
        "no item of the list [{list}] was replaced",
        "replace item of list"),
    # motion
    "motion_movesteps": _generic("move steps"),
    "motion_turnright": _generic("turn right"),
    "motion_turnleft": _generic("turn left"),
    "motion_gotoxy": _generic("go to x y"),
    "motion_glideto": _generic("glide to"),
    "motion_pointindirection": _generic("point in direction"),
    "motion_pointtowards": _generic("point towards"),
    "motion_setx": _generic("set x"),
    "motion_changex": _generic("change x"),
    "motion_sety": _generic("set y"),
    "motion_changey": _generic("change y"),
    # looks
    "looks_say": _generic("say"),
    "looks_sayforsecs": _generic("say for seconds"),
    "looks_think": _generic("think"),
    "looks_thinkforsecs": _generic("think for seconds"),
    "looks_show": _generic("show"),
    "looks_hide": _generic("hide"),
    "looks_switchcostume": _generic("switch costume"),
    "looks_nextcostume": _generic("next costume"),
    "looks_switchbackdrop": _generic("switch backdrop"),
    "looks_setsize": _generic("set size"),
    "looks_changesize": _generic("change size"),
    # sound, events, sensing statements
    "sound_play": _generic("start sound"),
    "sound_playuntildone": _generic("play sound until done"),
    "sound_stopall": _generic("stop all sounds"),
    "event_broadcast": ReasonTemplates(
        "the message [{message}] was broadcast",
        "the message [{message}] wasn't broadcast",
        "broadcast"),
    "event_broadcastandwait": ReasonTemplates(
        "the message [{message}] was broadcast",
        "the message [{message}] wasn't broadcast",
        "broadcast and wait"),
    "sensing_askandwait": _generic("ask and wait"),
}


def reason_for(opcode: str, positive: bool, bindings: dict | None = None) -> str:
    entry = CATALOG[opcode]
    template = entry.positive if positive else entry.negative
    return template.format(**(bindings or {}))


def type_name(opcode: str) -> str:
    return CATALOG[opcode].type_name


def catalog_is_complete() -> list[str]:
    """Opcodes a reason template is required for but missing (empty = ok)."""
    required = [name for name, info in OPCODES.items()
                if info.kind in (BlockKind.STATEMENT, BlockKind.HAT)]
    return sorted(op for op in required if op not in CATALOG)


# ---------------------------------------------------------------------------
# composition


def compose_reason_text(reasons, therefore: str | None = None) -> str:
    """Chain reasons with the because/then/next cycle; optionally close with
    "and therefore ..."."""
    reasons = list(reasons)
    if not reasons:
        raise ValueError("cannot compose an answer from zero reasons")
    parts = ["because " + reasons[0]]
    for i, reason in enumerate(reasons[1:]):
        parts.append((", then " if i % 2 == 0 else ", next ") + reason)
    text = "".join(parts)
    if therefore is not None:
        text += " and therefore " + therefore
    return text


def compose_block_executed(reasons) -> str:
    """Why-did-the-block-execute sentence: the last reason is attached with
    "and afterwards"."""
    reasons = list(reasons)
    if not reasons:
        raise ValueError("cannot compose an answer from zero reasons")
    if len(reasons) == 1:
        chain = "because " + reasons[0]
    else:
        chain = compose_reason_text(reasons[:-1]) + " and afterwards " + reasons[-1]
    return BLOCK_EXECUTED.format(reasons=chain)


def compose_value_chain(subject: str, value, reasons) -> str:
    """Reporter-value sentence: every step is joined with "then", the final
    one with "and afterwards"."""
    reasons = list(reasons)
    if not reasons:
        raise ValueError("cannot compose an answer from zero reasons")
    if len(reasons) == 1:
        chain = "because " + reasons[0]
    else:
        chain = ("because " + reasons[0]
                 + "".join(", then " + r for r in reasons[1:-1])
                 + " and afterwards " + reasons[-1])
    return VALUE_CHAIN.format(subject=subject, value=value, reasons=chain)


def compose_operands(pairs) -> str:
    """\"A had the value 0, B had the value 1\" enumeration."""
    rendered = [HAD_VALUE.format(name=n, value=v) for n, v in pairs]
    return ", ".join(rendered)

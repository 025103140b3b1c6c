"""Question generation: Table rows, polarity, bindings, instances, ordinals."""

import pytest

from blockbug.errors import TraceIndexError, UnknownIdError, UnknownInstanceError
from blockbug.model import project_from_dict
from blockbug.questions import (
    CATEGORY_ORDER,
    TARGET_ROWS,
    list_executions,
    list_instances,
    questions_for_block,
    questions_for_target,
)
from blockbug.tracing import Tracer
from blockbug.vm import boot

from builders import blk, build, lit, lst, rep, script, sprite, stage, var
from fixtures_all_opcodes import (
    ALL_OPCODES_EVENTS,
    ALL_OPCODES_TICKS,
    all_opcodes_project,
)


def flag(*body):
    return script(blk("event_whenflagclicked"), *body)


def traced(project, ticks=3, events=(), press=True, seed=0):
    t = Tracer(boot(project, seed=seed))
    if press:
        t.press_green_flag()
    t.run_script(ticks, list(events))
    return t.entries


def by_key(tree, key, polarity=None):
    return [q for q in tree.questions
            if q.template_key == key
            and (polarity is None or q.polarity == polarity)]


def texts(tree):
    return [q.text for q in tree.questions]


# -- target questions ---------------------------------------------------------


def test_position_question_positive_after_move():
    p = build(stage(), sprite("A", flag(
        blk("motion_movesteps", inputs={"STEPS": lit(10)}))))
    tree = questions_for_target(p, traced(p), 1)
    (q,) = by_key(tree, "position-change")
    assert q.polarity == "why-did"
    assert q.text == "Why did the position of sprite A change?"
    assert q.category == "Motion"
    assert q.subject == {"instance": 1}
    assert q.blocks == ("b2",)


def test_position_question_negative_when_never_run():
    p = build(stage(), sprite("Star", script(
        blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
        blk("motion_gotoxy", inputs={"X": lit(5), "Y": lit(5)}))))
    tree = questions_for_target(p, traced(p), 1)
    (q,) = by_key(tree, "position-change")
    assert q.polarity == "why-didnt"
    assert q.text == "Why didn't the position of sprite Star change?"
    assert by_key(tree, "move-dirwards") == []  # positive-only row


def test_move_dirwards_evidence_comes_from_deltas():
    p = build(stage(), sprite("A", flag(
        blk("motion_changex", inputs={"DX": lit(4)}),
        blk("motion_changey", inputs={"DY": lit(-3)}))))
    tree = questions_for_target(p, traced(p), 1)
    dirs = {q.bindings["direction"] for q in by_key(tree, "move-dirwards")}
    assert dirs == {"right", "down"}
    assert all(q.polarity == "why-did" for q in by_key(tree, "move-dirwards"))


def test_stage_gets_no_motion_or_sprite_rows():
    p = build(
        stage(flag(blk("looks_switchbackdrop", fields={"BACKDROP": "backdrop1"}))),
        sprite("A", flag(blk("motion_movesteps", inputs={"STEPS": lit(1)}))),
    )
    tree = questions_for_target(p, traced(p), 0)
    assert "Motion" not in tree.categories()
    assert by_key(tree, "start-as-clone") == []
    (q,) = by_key(tree, "backdrop-change")
    assert q.polarity == "why-did"
    assert q.text == "Why did the backdrop change?"


def test_say_questions_bound_per_literal_with_mixed_polarity():
    p = build(stage(), sprite("A", flag(
        blk("looks_say", inputs={"MESSAGE": lit("Hi")}),
        blk("control_if", inputs={"CONDITION": lit(False)}, substacks=[[
            blk("looks_say", inputs={"MESSAGE": lit("Bye")}),
        ]]))))
    tree = questions_for_target(p, traced(p), 1)
    said = {q.bindings["message"]: q.polarity for q in by_key(tree, "say-think")}
    assert said == {"Hi": "why-did", "Bye": "why-didnt"}
    assert "Why did sprite A say [Hi]?" in texts(tree)
    assert "Why didn't sprite A say [Bye]?" in texts(tree)


def test_turn_questions_split_rotation_and_block_side():
    p = build(stage(), sprite("A", flag(
        blk("motion_turnright", inputs={"DEGREES": lit(15)}))))
    tree = questions_for_target(p, traced(p), 1)
    rot = {q.bindings["rotation"]: q.polarity for q in by_key(tree, "turn-rotation")}
    assert rot == {"clockwise": "why-did", "counterclockwise": "why-didnt"}
    sides = {q.bindings["side"] for q in by_key(tree, "turn-side")}
    assert sides == {"right"}  # no turn-left block in the code


def test_size_trend_is_positive_only():
    p = build(stage(), sprite("A", flag(
        blk("looks_changesize", inputs={"CHANGE": lit(25)}))))
    tree = questions_for_target(p, traced(p), 1)
    (q,) = by_key(tree, "size-trend")
    assert (q.bindings["trend"], q.polarity) == ("increase", "why-did")
    (q,) = by_key(tree, "size-change")
    assert q.polarity == "why-did"


def test_value_bound_rows_one_question_per_distinct_literal():
    p = build(stage(), sprite("A", flag(
        blk("motion_pointindirection", inputs={"DIRECTION": lit(0)}),
        blk("motion_pointindirection", inputs={"DIRECTION": lit(0)}),
        blk("motion_pointindirection", inputs={"DIRECTION": lit(180)}),
        blk("motion_pointtowards", fields={"TOWARDS": "mouse-pointer"}))))
    tree = questions_for_target(p, traced(p), 1)
    to = [q for q in by_key(tree, "direction-change-to")]
    assert [q.bindings["direction"] for q in to] == ["0", "180"]
    assert "Why did the direction of sprite A change to 0°?" in texts(tree)
    (q,) = by_key(tree, "point-towards")
    assert q.text == "Why did sprite A point towards mouse-pointer?"


def test_clone_rows_and_clone_labels():
    p = build(stage(), sprite("A",
        flag(blk("control_create_clone_of", fields={"CLONE_OPTION": "myself"})),
        script(blk("control_start_as_clone"),
               blk("motion_movesteps", inputs={"STEPS": lit(1)})),
    ))
    entries = traced(p, ticks=4)
    original = questions_for_target(p, entries, 1)
    (q,) = by_key(original, "create-clone-of")
    assert q.polarity == "why-did"
    assert q.text == "Why did sprite A create a clone of myself?"
    (q,) = by_key(original, "start-as-clone")
    assert q.polarity == "why-didnt"  # the original never runs the clone hat

    clone = questions_for_target(p, entries, 2)
    (q,) = by_key(clone, "start-as-clone")
    assert q.polarity == "why-did"
    assert q.text == "Why did sprite A (clone 1) start as a clone?"


def test_broadcast_and_receive_rows():
    p = build(
        stage(),
        sprite("A", flag(blk("event_broadcast",
                             inputs={"BROADCAST_INPUT": lit("go")}))),
        sprite("B", script(
            blk("event_whenbroadcastreceived", fields={"BROADCAST_OPTION": "go"}),
            blk("looks_show"))),
    )
    entries = traced(p, ticks=3)
    sender = questions_for_target(p, entries, 1)
    (q,) = by_key(sender, "broadcast-message")
    assert q.text == "Why did sprite A broadcast the message [go]?"
    assert by_key(sender, "receive-message") == []
    receiver = questions_for_target(p, entries, 2)
    (q,) = by_key(receiver, "receive-message")
    assert q.polarity == "why-did"


def test_unknown_instance_raises():
    p = build(stage(), sprite("A", flag(blk("looks_show"))))
    with pytest.raises(UnknownInstanceError):
        questions_for_target(p, traced(p), 99)


def test_empty_trace_still_resolves_originals():
    p = build(stage(), sprite("A", flag(
        blk("motion_movesteps", inputs={"STEPS": lit(10)}))))
    tree = questions_for_target(p, [], 1)
    (q,) = by_key(tree, "position-change")
    assert q.polarity == "why-didnt"


def test_no_positive_questions_without_any_trace():
    p = project_from_dict(all_opcodes_project())
    for instance in (0, 1, 2):
        tree = questions_for_target(p, [], instance)
        assert all(q.polarity == "why-didnt" for q in tree.questions)


def test_question_ids_are_deterministic():
    p = build(stage(), sprite("A", flag(
        blk("looks_say", inputs={"MESSAGE": lit("x")}),
        blk("motion_movesteps", inputs={"STEPS": lit(1)}))))
    one = questions_for_target(p, traced(p), 1).to_dict()
    two = questions_for_target(p, traced(p), 1).to_dict()
    assert one == two


def test_tree_dict_orders_categories_and_groups():
    p = project_from_dict(all_opcodes_project())
    entries = traced(p, ALL_OPCODES_TICKS, ALL_OPCODES_EVENTS, seed=7)
    doc = questions_for_target(p, entries, 1).to_dict()
    names = [c["name"] for c in doc["categories"]]
    assert names == [c for c in CATEGORY_ORDER if c in names]
    assert "Motion" in names and "Execution" not in names
    motion = next(c for c in doc["categories"] if c["name"] == "Motion")
    assert motion["color"] == "#4C97FF"
    polarity_order = [g["polarity"] for g in motion["groups"]]
    assert polarity_order == [p for p in ("why-did", "why-didnt", "when-did")
                              if p in polarity_order]
    assert all(c["groups"] for c in doc["categories"])


# -- instance listing ---------------------------------------------------------


def test_list_instances_original_then_clones_in_creation_order():
    p = build(stage(), sprite("A",
        flag(blk("control_create_clone_of", fields={"CLONE_OPTION": "myself"}),
             blk("control_create_clone_of", fields={"CLONE_OPTION": "myself"})),
        script(blk("control_start_as_clone"), blk("looks_hide")),
    ))
    entries = traced(p, ticks=5)
    descriptors = list_instances(p, entries, "A")
    assert [d["label"] for d in descriptors] == ["A", "A (clone 1)", "A (clone 2)"]
    assert [d["is_clone"] for d in descriptors] == [False, True, True]
    assert descriptors[1]["instance"] < descriptors[2]["instance"]


def test_list_instances_keeps_deleted_clone_with_its_lifetime():
    p = build(stage(), sprite("A",
        flag(blk("control_create_clone_of", fields={"CLONE_OPTION": "myself"})),
        script(blk("control_start_as_clone"), blk("control_delete_this_clone")),
    ))
    entries = traced(p, ticks=6)
    descriptors = list_instances(p, entries, "A")
    assert len(descriptors) == 2
    clone = descriptors[1]
    assert clone["first_entry"] is not None
    assert clone["last_entry"] < len(entries) - 1  # gone before the end


def test_list_instances_unknown_sprite():
    p = build(stage(), sprite("A", flag(blk("looks_show"))))
    with pytest.raises(UnknownIdError):
        list_instances(p, traced(p), "Nobody")


# -- block questions ----------------------------------------------------------


def test_executed_block_offers_why_did_and_when_did():
    p = build(stage(), sprite("A", flag(
        blk("looks_say", id="speak", inputs={"MESSAGE": lit("hi")}))))
    tree = questions_for_block(p, traced(p), "speak")
    execution = tree.group("Execution")
    assert [q.text for q in execution["why-did"]] == ["Why did the block execute?"]
    assert [q.text for q in execution["when-did"]] == ["When did the block execute?"]
    assert "why-didnt" not in execution
    (q,) = execution["why-did"]
    assert q.subject["ordinal"] == 1
    assert q.strategy == "block-executed"


def test_unexecuted_block_offers_only_why_didnt():
    p = build(stage(), sprite("A", flag(
        blk("control_if", inputs={"CONDITION": lit(False)}, substacks=[[
            blk("looks_say", id="speak", inputs={"MESSAGE": lit("hi")}),
        ]]))))
    tree = questions_for_block(p, traced(p), "speak")
    assert [q.text for q in tree.questions] == ["Why didn't the block execute?"]
    assert tree.questions[0].strategy == "block-not-executed"


def test_condition_question_polarity_follows_traced_value():
    p = build(stage(), sprite("A", flag(
        blk("control_if", id="fork",
            inputs={"CONDITION": rep(blk("operator_gt", id="cmp", inputs={
                "OPERAND1": rep(blk("motion_xposition", id="readx")),
                "OPERAND2": lit(10)}))},
            substacks=[[blk("looks_show")]]))))
    tree = questions_for_block(p, traced(p), "fork")
    (q,) = by_key(tree, "condition-compare")
    assert q.polarity == "why-didnt"  # x stayed 0, so 0 > 10 was false
    assert q.text == "Why didn't the condition x position > 10 evaluate to true?"
    assert q.bindings["condition_block"] == "cmp"
    (q,) = by_key(tree, "attr-value")
    assert q.polarity == "why-did"
    assert q.text == "Why did x position have the value 0?"
    assert q.category == "Motion"


def test_reporter_questions_ask_about_selected_execution():
    p = build(
        stage(variables=[var("v", 0)]),
        sprite("A", flag(
            blk("control_repeat", inputs={"TIMES": lit(2)}, substacks=[[
                blk("data_changevariable", fields={"VARIABLE": "v"},
                    inputs={"VALUE": lit(1)}),
                blk("looks_say", id="speak",
                    inputs={"MESSAGE": rep(blk("data_variable", id="readv",
                                               fields={"VARIABLE": "v"}))}),
            ]]))))
    entries = traced(p, ticks=4)
    first = questions_for_block(p, entries, "speak", ordinal=1)
    (q,) = by_key(first, "variable-value", "why-did")
    assert q.text == "Why did [v] have the value 1?"
    latest = questions_for_block(p, entries, "speak")
    (q,) = by_key(latest, "variable-value", "why-did")
    assert q.text == "Why did [v] have the value 2?"
    assert q.subject["ordinal"] == 2


def test_negative_variable_question_needs_a_differing_literal_setter():
    p = build(
        stage(variables=[var("v", 0)]),
        sprite("A",
               flag(blk("looks_say", id="speak",
                        inputs={"MESSAGE": rep(blk("data_variable",
                                                   fields={"VARIABLE": "v"}))})),
               script(blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
                      blk("data_setvariable", id="set7",
                          fields={"VARIABLE": "v"}, inputs={"VALUE": lit(7)}),
                      blk("data_setvariable", fields={"VARIABLE": "v"},
                          inputs={"VALUE": lit(0)}))))
    tree = questions_for_block(p, traced(p), "speak")
    negatives = by_key(tree, "variable-value", "why-didnt")
    assert [q.text for q in negatives] == ["Why didn't [v] have the value 7?"]
    assert negatives[0].blocks == ("set7",)
    # the set-to-0 literal matches the traced value, so no question for it


def test_list_questions_positive_value_and_negative_contains():
    p = build(
        stage(lists=[lst("L", ["a"])]),
        sprite("A", flag(
            blk("control_if", id="fork",
                inputs={"CONDITION": rep(blk("data_listcontainsitem",
                                             fields={"LIST": "L"},
                                             inputs={"ITEM": lit("x")}))},
                substacks=[[blk("looks_show")]]),
            blk("looks_say", id="speak",
                inputs={"MESSAGE": rep(blk("data_listcontents",
                                           fields={"LIST": "L"}))}))))
    entries = traced(p)
    fork = questions_for_block(p, entries, "fork")
    (q,) = by_key(fork, "list-contain")
    assert q.polarity == "why-didnt"
    assert q.text == "Why didn't [L] contain [x]?"
    speak = questions_for_block(p, entries, "speak")
    (q,) = by_key(speak, "list-value")
    assert (q.polarity, q.text) == ("why-did", "Why did [L] have the value a?")


def test_reporter_id_resolves_to_enclosing_statement():
    p = build(stage(), sprite("A", flag(
        blk("looks_say", id="speak",
            inputs={"MESSAGE": rep(blk("motion_yposition", id="ready"))}))))
    entries = traced(p)
    via_reporter = questions_for_block(p, entries, "ready").to_dict()
    via_statement = questions_for_block(p, entries, "speak").to_dict()
    assert via_reporter == via_statement


def test_questions_for_block_unknown_id_and_bad_ordinal():
    p = build(stage(), sprite("A", flag(
        blk("looks_say", id="speak", inputs={"MESSAGE": lit("hi")}))))
    entries = traced(p)
    with pytest.raises(UnknownIdError):
        questions_for_block(p, entries, "ghost")
    with pytest.raises(TraceIndexError):
        questions_for_block(p, entries, "speak", ordinal=2)


# -- execution listing --------------------------------------------------------


def test_list_executions_numbers_and_times():
    p = build(stage(), sprite("A", flag(
        blk("control_repeat", inputs={"TIMES": lit(3)}, substacks=[[
            blk("motion_movesteps", id="step", inputs={"STEPS": lit(1)}),
        ]]))))
    entries = traced(p, ticks=5)
    descriptors = list_executions(entries, "step")
    assert [d["ordinal"] for d in descriptors] == [1, 2, 3]
    assert [d["time"] for d in descriptors] == sorted(d["time"] for d in descriptors)
    assert all(d["final_index"] == d["entry_index"] for d in descriptors)
    assert list_executions(entries, "nowhere") == []


def test_waiting_block_counts_one_execution_despite_two_entries():
    p = build(stage(), sprite("A", flag(
        blk("looks_sayforsecs", id="speak",
            inputs={"MESSAGE": lit("hi"), "SECS": lit(0.1)}))))
    entries = traced(p, ticks=8)
    assert sum(1 for e in entries if e.block_id == "speak") == 2
    descriptors = list_executions(entries, "speak")
    assert len(descriptors) == 1
    (d,) = descriptors
    assert d["phase"] == "start"
    assert d["final_index"] is not None and d["final_index"] > d["entry_index"]


# -- catalog coverage over the everything-project -----------------------------


def all_opcodes_entries():
    p = project_from_dict(all_opcodes_project())
    return p, traced(p, ALL_OPCODES_TICKS, ALL_OPCODES_EVENTS, seed=7)


def test_every_target_row_instantiates_on_the_all_opcodes_project():
    p, entries = all_opcodes_entries()
    seen = set()
    instances = [0, 1, 2] + [d["instance"]
                             for d in list_instances(p, entries, "Alpha")
                             if d["is_clone"]]
    for instance in instances:
        for q in questions_for_target(p, entries, instance).questions:
            seen.add(q.template_key)
    assert seen == {row.key for row in TARGET_ROWS}


def test_every_block_row_instantiates_on_the_all_opcodes_project():
    p, entries = all_opcodes_entries()
    seen_keys = set()
    attr_names = set()
    for target in p.targets:
        for sc in target.scripts:
            for block_id in (sc.hat.id, *(b.id for b in _all_ids(sc.body))):
                tree = questions_for_block(p, entries, block_id)
                for q in tree.questions:
                    seen_keys.add((q.template_key, q.polarity))
                    if q.template_key == "attr-value":
                        attr_names.add(q.bindings["name"])
    assert ("block-execute", "why-did") in seen_keys
    assert ("block-execute", "why-didnt") in seen_keys
    assert ("block-when", "when-did") in seen_keys
    assert ("condition-compare", "why-did") in seen_keys
    assert ("condition-contains", "why-did") in seen_keys
    assert ("condition-touching", "why-did") in seen_keys
    assert ("condition-touching", "why-didnt") in seen_keys
    assert ("condition-touching-color", "why-did") in seen_keys
    assert ("condition-color-touching", "why-did") in seen_keys
    assert ("variable-value", "why-did") in seen_keys
    assert ("variable-value", "why-didnt") in seen_keys
    assert ("list-value", "why-did") in seen_keys
    assert ("list-contain", "why-didnt") in seen_keys
    assert attr_names == {"x position", "y position", "direction",
                          "size", "costume number", "backdrop number"}


def _all_ids(body):
    from blockbug.model import iter_statements
    return iter_statements(body)


def test_polarity_soundness_audit():
    # every positive target question must have at least one related block
    # execution (or observed delta); negatives none
    p, entries = all_opcodes_entries()
    executed_by = {}
    for e in entries:
        executed_by.setdefault(e.block_id, set()).add(e.instance_id)
    delta_rows = {"move-dirwards", "size-trend", "turn-rotation"}
    for instance in (0, 1, 2):
        for q in questions_for_target(p, entries, instance).questions:
            if q.template_key in delta_rows:
                continue
            hits = [b for b in q.blocks if instance in executed_by.get(b, ())
                    or (q.template_key.startswith("backdrop-change")
                        and executed_by.get(b))]
            if q.polarity == "why-did":
                assert hits, q.id
            else:
                assert not hits, q.id

"""Answer synthesis: reason chains, graphs, value chains, touching evidence."""

import base64
import json

import numpy as np
import pytest

from blockbug import images
from blockbug.analysis import build_cdg, build_cfg, extract_answer_graph, make_acyclic
from blockbug.answers import answer_question, graph_payload, graph_set_payload
from blockbug.model import project_from_dict
from blockbug.questions import (
    list_executions,
    list_instances,
    questions_for_block,
    questions_for_target,
)
from blockbug.tracing import Tracer
from blockbug.values import to_string
from blockbug.vm import boot, restore

from builders import blk, build, col, lit, lst, rep, script, sprite, stage, var
from fixtures_all_opcodes import (
    ALL_OPCODES_EVENTS,
    ALL_OPCODES_TICKS,
    all_opcodes_project,
)


def flag(*body):
    return script(blk("event_whenflagclicked"), *body)


def traced(project, ticks=4, events=(), press=True, seed=0):
    t = Tracer(boot(project, seed=seed))
    if press:
        t.press_green_flag()
    t.run_script(ticks, list(events))
    return t.entries


def target_q(project, entries, instance, key, polarity=None):
    tree = questions_for_target(project, entries, instance)
    hits = [q for q in tree.questions
            if q.template_key == key
            and (polarity is None or q.polarity == polarity)]
    assert hits, f"no {key} question generated"
    return hits[0]


def block_q(project, entries, block_id, strategy, polarity=None, ordinal=1):
    tree = questions_for_block(project, entries, block_id, ordinal=ordinal)
    hits = [q for q in tree.questions
            if q.strategy == strategy
            and (polarity is None or q.polarity == polarity)]
    assert hits, f"no {strategy} question generated"
    return hits[0]


# -- images --------------------------------------------------------------------


def test_png_encoding_is_deterministic():
    rng = np.random.default_rng(3)
    rgb = rng.integers(0, 256, size=(45, 60, 3), dtype=np.uint8)
    first = images.png_bytes(rgb)
    assert first[:8] == b"\x89PNG\r\n\x1a\n"
    assert images.png_bytes(rgb.copy()) == first


def test_png_base64_matches_bytes():
    rgb = np.zeros((4, 4, 3), dtype=np.uint8)
    assert base64.b64decode(images.png_base64(rgb)) == images.png_bytes(rgb)


def test_sprite_thumbnail_shape_and_edge_clamping():
    frame = np.arange(360 * 480 * 3, dtype=np.uint32).reshape(360, 480, 3)
    frame = (frame % 256).astype(np.uint8)
    centre = images.sprite_thumbnail(frame, 0, 0)
    corner = images.sprite_thumbnail(frame, 239, 179)
    assert centre.shape == (images.THUMB_H, images.THUMB_W, 3)
    assert corner.shape == (images.THUMB_H, images.THUMB_W, 3)
    # centred crop really is centred on the stage origin
    assert np.array_equal(
        centre,
        frame[180 - 45 // 2:180 + 45 - 45 // 2, 240 - 30:240 + 30])


def _touching_fixture(ax=-60, bx=60):
    p = build(stage(),
              sprite("A", flag(
                  blk("control_if", id="fork",
                      inputs={"CONDITION": rep(blk(
                          "sensing_touchingobject", id="probe",
                          fields={"TOUCHINGOBJECTMENU": "B"}))},
                      substacks=[[blk("looks_hide")]])), x=ax),
              sprite("B", x=bx))
    return p, traced(p)


def test_touching_overlay_draws_red_line_between_disjoint_sprites():
    p, entries = _touching_fixture()
    entry = next(e for e in entries if e.block_id == "fork")
    vm = restore(p, entry.post_state)
    touched, evidence = vm.touching_query("object", entry.instance_id, "B")
    assert not touched
    overlay = images.touching_overlay(vm.render(), evidence)
    assert overlay.shape == (360, 480, 3)
    reds = np.all(overlay == np.array(images.LINE_RGB, dtype=np.uint8), axis=-1)
    assert reds.any()
    # both endpoints of the closest-pair segment are coloured in
    for sx, sy in (evidence.p_a, evidence.p_b):
        px, py = 240 + sx, 180 - sy
        assert reds[max(py - 3, 0):py + 4, max(px - 3, 0):px + 4].any()


def test_touching_overlay_keeps_overlap_unfaded_and_fades_the_rest():
    p, entries = _touching_fixture(ax=-4, bx=4)
    entry = next(e for e in entries if e.block_id == "fork")
    vm = restore(p, entry.post_state)
    touched, evidence = vm.touching_query("object", entry.instance_id, "B")
    assert touched and evidence.overlap
    raster = vm.render()
    overlay = images.touching_overlay(raster, evidence)
    ox, oy = evidence.overlap[0]
    assert np.array_equal(overlay[oy, ox], raster.color[oy, ox])
    faded = np.rint(raster.color[0, 0] * 0.5 + 255 * 0.5).astype(np.uint8)
    assert np.array_equal(overlay[0, 0], faded)


# -- answer graph payloads -----------------------------------------------------


def _condition_project(value):
    return build(stage(), sprite("A",
        flag(blk("data_setvariable", fields={"VARIABLE": "v"},
                 inputs={"VALUE": lit(value)}),
             blk("control_if", id="fork",
                 inputs={"CONDITION": rep(blk(
                     "operator_gt",
                     inputs={"OPERAND1": rep(blk("data_variable",
                                                 fields={"VARIABLE": "v"})),
                             "OPERAND2": lit(0)}))},
                 substacks=[[blk("looks_hide", id="inner")]])),
        variables=[var("v", 0)]))


def _graph_for(project, entries, block_id):
    cdg = make_acyclic(build_cdg(build_cfg(project)))
    return extract_answer_graph(cdg, entries, block_id)


def test_graph_payload_shape():
    p = _condition_project(1)
    payload = graph_payload(_graph_for(p, traced(p), "inner"))
    assert payload["kind"] == "answer-graph"
    assert payload["target_block"] == "inner"
    assert payload["frontier"] is None
    for node in payload["nodes"]:
        assert set(node) >= {"id", "kind", "opcode", "label", "executed",
                             "opacity", "entry_index"}
        assert node["opacity"] in (1.0, 0.5)
    for edge in payload["edges"]:
        assert edge["style"] in ("solid", "dashed-crossed")
    json.dumps(payload)


def test_frontier_marks_blocking_condition_edge():
    p = _condition_project(0)
    payload = graph_payload(_graph_for(p, traced(p), "inner"))
    assert payload["frontier"] == {"src": "fork", "dst": "inner"}
    blocking = next(e for e in payload["edges"]
                    if e["src"] == "fork" and e["dst"] == "inner")
    assert blocking["style"] == "dashed-crossed"
    assert blocking["required"] == "true"
    inner = next(n for n in payload["nodes"] if n["id"] == "inner")
    assert not inner["executed"] and inner["opacity"] == 0.5


def test_graph_set_merges_graphs_sharing_a_hat():
    p = build(stage(), sprite("A",
        flag(blk("motion_movesteps", id="m1", inputs={"STEPS": lit(5)}),
             blk("motion_changey", id="m2", inputs={"DY": lit(3)}))))
    entries = traced(p)
    graphs = [_graph_for(p, entries, "m1"), _graph_for(p, entries, "m2")]
    payload = graph_set_payload(graphs)
    assert payload["kind"] == "graph-set"
    assert len(payload["graphs"]) == 2
    (group,) = payload["groups"]
    assert group["graphs"] == [0, 1]
    assert "user:green-flag" in group["shared"]


def test_graph_set_keeps_unrelated_scripts_apart():
    p = build(stage(), sprite("A",
        script(blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
               blk("looks_show", id="s1")),
        script(blk("event_whenkeypressed", fields={"KEY_OPTION": "up arrow"}),
               blk("looks_show", id="s2"))))
    entries = traced(p)
    graphs = [_graph_for(p, entries, "s1"), _graph_for(p, entries, "s2")]
    payload = graph_set_payload(graphs)
    assert [g["graphs"] for g in payload["groups"]] == [[0], [1]]
    assert all(g["shared"] == [] for g in payload["groups"])


# -- why was this block executed -----------------------------------------------


def _click_chain_project():
    return build(stage(), sprite("Cat",
        script(blk("event_whenthisspriteclicked"),
               blk("data_setvariable", fields={"VARIABLE": "v"},
                   inputs={"VALUE": lit(1)}),
               blk("control_if", id="fork",
                   inputs={"CONDITION": rep(blk(
                       "operator_gt",
                       inputs={"OPERAND1": rep(blk("data_variable",
                                                   fields={"VARIABLE": "v"})),
                               "OPERAND2": lit(0)}))},
                   substacks=[[blk("looks_hide", id="inner")]])),
        variables=[var("v", 0)]))


def test_click_hat_condition_chain_text():
    p = _click_chain_project()
    entries = traced(
        p, press=False,
        events=[{"tick": 1, "event": {"type": "sprite-click", "sprite": "Cat"}}])
    q = block_q(p, entries, "inner", "block-executed")
    a = answer_question(p, entries, q)
    assert a.text == ("The block was executed, because the sprite Cat was "
                      "clicked and afterwards the condition v > 0 was true.")
    assert a.visual["kind"] == "answer-graph"
    assert "fork" in a.nav and not any(b.startswith("user:") for b in a.nav)


def test_when_did_execution_time_after_green_flag():
    p = build(stage(), sprite("A", flag(
        blk("control_wait", inputs={"DURATION": lit(2.5)}),
        blk("looks_show", id="tgt"))))
    entries = traced(p, ticks=80)
    q = block_q(p, entries, "tgt", "execution-time")
    a = answer_question(p, entries, q)
    assert a.text == ("The block was executed 2.5 seconds after clicking the "
                      "green flag.")
    assert a.visual["kind"] == "time-mark"
    assert a.visual["anchor"] == "green-flag"
    assert a.visual["elapsed"] == pytest.approx(2.5)
    assert 0 <= a.visual["slider"] <= 1
    assert entries[a.visual["entry_index"]].block_id == "tgt"
    assert base64.b64decode(a.visual["image"])[:8] == b"\x89PNG\r\n\x1a\n"


def test_execution_time_uses_recording_anchor_without_green_flag():
    p = build(stage(), sprite("A", script(
        blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
        blk("control_wait", inputs={"DURATION": lit(1)}),
        blk("looks_show", id="tgt"))))
    entries = traced(
        p, ticks=40, press=False,
        events=[{"tick": 1, "event": {"type": "key-down", "key": "space"}}])
    q = block_q(p, entries, "tgt", "execution-time")
    a = answer_question(p, entries, q)
    assert a.text.endswith("after starting the recording.")
    assert a.visual["anchor"] == "recording-start"


# -- why was this block not executed -------------------------------------------


def test_not_reachable_verbatim():
    p = build(stage(), sprite("A",
        flag(blk("looks_show")),
        script(blk("event_whenbroadcastreceived", fields={"BROADCAST_OPTION": "go"}),
               blk("looks_hide", id="orphan"))))
    entries = traced(p)
    q = block_q(p, entries, "orphan", "block-not-executed")
    a = answer_question(p, entries, q)
    assert a.text == "The block wasn't executed because it is not reachable!"


def test_blocking_condition_short_form():
    p = _condition_project(0)
    entries = traced(p)
    q = block_q(p, entries, "inner", "block-not-executed")
    a = answer_question(p, entries, q)
    assert a.text == ("The block wasn't executed, because the condition "
                      "v > 0 wasn't true.")
    assert a.details == [{"block": "fork", "text":
                          "the condition v > 0 wasn't true"}]


def test_far_form_when_the_blocker_is_in_another_script():
    # the blocking condition guards the broadcast, not the target itself
    p = build(stage(), sprite("A",
        flag(blk("control_if", id="fork",
                 inputs={"CONDITION": rep(blk(
                     "operator_gt",
                     inputs={"OPERAND1": lit(0), "OPERAND2": lit(10)}))},
                 substacks=[[blk("event_broadcast", id="send",
                                 inputs={"BROADCAST_INPUT": lit("go")})]])),
        script(blk("event_whenbroadcastreceived", fields={"BROADCAST_OPTION": "go"}),
               blk("looks_hide", id="deep"))))
    entries = traced(p)
    q = block_q(p, entries, "deep", "block-not-executed")
    a = answer_question(p, entries, q)
    assert a.text == ("The block wasn't executed, because the condition "
                      "0 > 10 wasn't true and therefore all subsequent blocks "
                      "that could lead to the execution of the block were not "
                      "executed.")
    assert a.details == [{"block": "fork", "text":
                          "the condition 0 > 10 wasn't true"}]


def test_unpressed_key_script_uses_short_form_for_first_statement():
    p = build(stage(), sprite("A", script(
        blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
        blk("looks_show", id="tgt"))))
    entries = traced(p)
    q = block_q(p, entries, "tgt", "block-not-executed")
    a = answer_question(p, entries, q)
    assert a.text == ("The block wasn't executed, because the key [space] "
                      "wasn't pressed.")


# -- target behavior -----------------------------------------------------------


def test_positive_behavior_single_cause():
    p = build(stage(), sprite("A", flag(
        blk("motion_movesteps", inputs={"STEPS": lit(10)}))))
    entries = traced(p)
    q = target_q(p, entries, 1, "position-change", "why-did")
    a = answer_question(p, entries, q)
    assert a.text == ("The position of sprite A changed, because the green "
                      "flag was clicked and therefore the move steps block was "
                      "executed.")
    assert a.visual["kind"] == "answer-graph"


def test_positive_behavior_multiple_causes():
    p = build(stage(), sprite("A", flag(
        blk("motion_movesteps", inputs={"STEPS": lit(5)}),
        blk("motion_changey", inputs={"DY": lit(3)}))))
    entries = traced(p)
    q = target_q(p, entries, 1, "position-change", "why-did")
    a = answer_question(p, entries, q)
    assert a.text == ("The position of sprite A changed, because the "
                      "execution of 2 different blocks caused this behavior. "
                      "Do you need an explanation for a block? Then click on "
                      "the ? next to it!")
    assert a.visual["kind"] == "graph-set"
    assert len(a.details) == 2
    assert all(d["text"].startswith("The block was executed, because")
               for d in a.details)


def test_negative_behavior_single_cause():
    p = build(stage(), sprite("A", script(
        blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
        blk("motion_movesteps", inputs={"STEPS": lit(10)}))))
    entries = traced(p)
    q = target_q(p, entries, 1, "position-change", "why-didnt")
    a = answer_question(p, entries, q)
    assert a.text == ("The position of sprite A didn't change, because the "
                      "key [space] wasn't pressed and therefore the move steps "
                      "block was not executed.")


def test_negative_behavior_multiple_causes():
    p = build(stage(), sprite("A",
        script(blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
               blk("looks_show")),
        script(blk("event_whenkeypressed", fields={"KEY_OPTION": "up arrow"}),
               blk("looks_show")), visible=False))
    entries = traced(p)
    q = target_q(p, entries, 1, "show-hide", "why-didnt")
    a = answer_question(p, entries, q)
    assert a.text == ("Sprite A didn't show itself, because none of the 2 "
                      "show blocks that could cause this behavior was "
                      "executed. Do you need an explanation for a block? "
                      "Then click on the ? next to it!")
    assert [d["text"] for d in a.details] == [
        "The block wasn't executed, because the key [space] wasn't pressed.",
        "The block wasn't executed, because the key [up arrow] wasn't pressed.",
    ]


def _cloning_project():
    return build(stage(), sprite("A",
        flag(blk("control_create_clone_of", fields={"CLONE_OPTION": "myself"}),
             blk("motion_movesteps", inputs={"STEPS": lit(5)})),
        script(blk("control_start_as_clone"), blk("looks_hide"))))


def test_start_as_clone_asked_for_the_original():
    p = _cloning_project()
    entries = traced(p)
    q = target_q(p, entries, 1, "start-as-clone")
    a = answer_question(p, entries, q)
    assert a.text == ("The blocks under a when-I-start-as-a-clone hat are "
                      "never executed by the original sprite.")


def test_flag_hat_behavior_asked_for_a_clone():
    p = _cloning_project()
    entries = traced(p)
    clone = next(d["instance"] for d in list_instances(p, entries, "A")
                 if d["is_clone"])
    q = target_q(p, entries, clone, "position-change", "why-didnt")
    a = answer_question(p, entries, q)
    assert a.text == ("The blocks under a when-green-flag-clicked hat can "
                      "never be executed by a clone, because clicking the "
                      "green flag deletes all clones.")


def test_executions_outside_clone_lifetime():
    p = build(stage(), sprite("A",
        script(blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
               blk("looks_say", inputs={"MESSAGE": lit("Hi")})),
        script(blk("event_whenkeypressed", fields={"KEY_OPTION": "c"}),
               blk("control_create_clone_of", fields={"CLONE_OPTION": "myself"})),
        script(blk("control_start_as_clone"), blk("looks_hide"))))
    entries = traced(p, ticks=8, press=False, events=[
        {"tick": 1, "event": {"type": "key-down", "key": "space"}},
        {"tick": 4, "event": {"type": "key-down", "key": "c"}}])
    clone = next(d["instance"] for d in list_instances(p, entries, "A")
                 if d["is_clone"])
    q = target_q(p, entries, clone, "say-think", "why-didnt")
    a = answer_question(p, entries, q)
    assert a.text == "The event occurred outside the lifetime of this clone."


def test_delta_evidence_answer_points_at_the_turn_block():
    p = build(stage(), sprite("A", flag(
        blk("motion_turnright", id="spin", inputs={"DEGREES": lit(30)}))))
    entries = traced(p)
    q = target_q(p, entries, 1, "turn-rotation", "why-did")
    a = answer_question(p, entries, q)
    assert "the green flag was clicked" in a.text
    assert a.text.endswith("block was executed.")
    assert a.nav and "spin" in a.nav


# -- variable and attribute values ---------------------------------------------


def test_variable_chain_with_two_writes():
    p = build(stage(), sprite("A", flag(
        blk("data_setvariable", id="w1", fields={"VARIABLE": "score"},
            inputs={"VALUE": lit(5)}),
        blk("data_changevariable", id="w2", fields={"VARIABLE": "score"},
            inputs={"VALUE": lit(2)}),
        blk("looks_say", id="reader",
            inputs={"MESSAGE": rep(blk("data_variable",
                                       fields={"VARIABLE": "score"}))})),
        variables=[var("score", 0)]))
    entries = traced(p)
    q = block_q(p, entries, "reader", "variable-value", "why-did")
    a = answer_question(p, entries, q)
    assert a.text == ("[score] had the value 7, because the variable [score] "
                      "was set to 5 and afterwards the variable [score] was "
                      "changed by 2.")
    assert a.visual["kind"] == "value-chain"
    assert a.visual["anchor"] == "green-flag"
    assert [(n["block"], n["before"], n["after"])
            for n in a.visual["nodes"]] == [("w1", "0", "5"), ("w2", "5", "7")]


def test_never_written_variable_reports_its_initial_value():
    p = build(stage(), sprite("A", flag(
        blk("looks_say", id="reader",
            inputs={"MESSAGE": rep(blk("data_variable",
                                       fields={"VARIABLE": "idle"}))})),
        variables=[var("idle", 9)]))
    entries = traced(p)
    q = block_q(p, entries, "reader", "variable-value", "why-did")
    a = answer_question(p, entries, q)
    assert a.text == "[idle] had the value 9, because it started with the value 9."


def test_negative_variable_set_but_changed():
    p = build(stage(), sprite("A", flag(
        blk("data_setvariable", id="w1", fields={"VARIABLE": "v"},
            inputs={"VALUE": lit(7)}),
        blk("data_setvariable", id="w2", fields={"VARIABLE": "v"},
            inputs={"VALUE": lit(3)}),
        blk("looks_say", id="reader",
            inputs={"MESSAGE": rep(blk("data_variable",
                                       fields={"VARIABLE": "v"}))})),
        variables=[var("v", 0)]))
    entries = traced(p)
    q = block_q(p, entries, "reader", "variable-value", "why-didnt")
    a = answer_question(p, entries, q)
    assert a.text == "The variable was set to 7, but changed afterwards."
    assert a.visual["kind"] == "value-chain"
    assert [n["block"] for n in a.visual["nodes"]] == ["w1", "w2"]


def test_negative_variable_setter_never_ran():
    p = build(stage(), sprite("A",
        flag(blk("looks_say", id="reader",
                 inputs={"MESSAGE": rep(blk("data_variable",
                                            fields={"VARIABLE": "v"}))})),
        script(blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
               blk("data_setvariable", fields={"VARIABLE": "v"},
                   inputs={"VALUE": lit(7)})),
        variables=[var("v", 0)]))
    entries = traced(p)
    q = block_q(p, entries, "reader", "variable-value", "why-didnt")
    a = answer_question(p, entries, q)
    assert a.text == ("[v] didn't have the value 7, because the key [space] "
                      "wasn't pressed and therefore the set variable block "
                      "was not executed.")


def test_attribute_chain_embeds_stage_thumbnails():
    p = build(stage(), sprite("A", flag(
        blk("motion_gotoxy", inputs={"X": lit(30), "Y": lit(40)}),
        blk("looks_say", id="reader",
            inputs={"MESSAGE": rep(blk("motion_xposition"))}))))
    entries = traced(p)
    q = block_q(p, entries, "reader", "reporter-value", "why-did")
    a = answer_question(p, entries, q)
    assert a.visual["kind"] == "value-chain"
    (node,) = a.visual["nodes"]
    assert node["before"] == "0" and node["after"] == "30"
    from io import BytesIO

    from PIL import Image

    thumb = np.asarray(Image.open(BytesIO(base64.b64decode(node["thumbnail"]))))
    assert thumb.shape == (images.THUMB_H, images.THUMB_W, 3)


# -- boolean operators ----------------------------------------------------------


def test_condition_verdict_shows_operand_values():
    p = build(stage(), sprite("S", flag(
        blk("control_if", id="fork",
            inputs={"CONDITION": rep(blk(
                "operator_lt", id="cmp",
                inputs={"OPERAND1": rep(blk("data_variable",
                                            fields={"VARIABLE": "A"})),
                        "OPERAND2": rep(blk("data_variable",
                                            fields={"VARIABLE": "B"}))}))},
            substacks=[[blk("looks_hide")]])),
        variables=[var("A", 0), var("B", 1)]))
    entries = traced(p)
    q = block_q(p, entries, "cmp", "boolean-operator")
    a = answer_question(p, entries, q)
    assert a.text == ("The condition evaluated to true, because A had the "
                      "value 0, B had the value 1 and therefore 0 < 1 is "
                      "true.")
    assert a.visual["kind"] == "operator"


def test_constant_condition_is_called_out():
    p = build(stage(), sprite("S", flag(
        blk("control_if", id="fork",
            inputs={"CONDITION": rep(blk(
                "operator_gt", id="cmp",
                inputs={"OPERAND1": lit(0), "OPERAND2": lit(10)}))},
            substacks=[[blk("looks_hide")]]))))
    entries = traced(p)
    q = block_q(p, entries, "cmp", "boolean-operator")
    a = answer_question(p, entries, q)
    assert a.text.startswith("The condition is always false")


# -- touching -------------------------------------------------------------------


def test_touching_answer_agrees_with_trace_when_apart():
    p, entries = _touching_fixture()
    q = block_q(p, entries, "fork", "touching")
    a = answer_question(p, entries, q)
    assert a.visual["kind"] == "touching-image"
    assert a.visual["touched"] is False and a.visual["traced"] is False
    dist = a.visual["evidence"]["distance"]
    assert a.text == (f"The distance from sprite A to sprite B was "
                      f"{to_string(round(dist, 2))} when the block was "
                      f"executed.")


def test_touching_answer_agrees_with_trace_when_overlapping():
    p, entries = _touching_fixture(ax=-4, bx=4)
    q = block_q(p, entries, "fork", "touching")
    a = answer_question(p, entries, q)
    assert a.visual["touched"] is True and a.visual["traced"] is True
    assert a.text == ("When the block was executed, Sprite A touched "
                      "sprite B as shown in the picture.")


def test_reported_distance_is_the_brute_force_minimum():
    p, entries = _touching_fixture()
    entry = next(e for e in entries if e.block_id == "fork")
    vm = restore(p, entry.post_state)
    _, evidence = vm.touching_query("object", entry.instance_id, "B")
    pts_a = np.argwhere(evidence.mask_a)[:, ::-1]  # (x, y)
    pts_b = np.argwhere(evidence.mask_b)[:, ::-1]
    best = min(float(np.hypot(*(pa - pb)))
               for pa in pts_a for pb in pts_b)
    assert evidence.distance == pytest.approx(best)


def test_missing_color_reports_the_color():
    p = build(stage(), sprite("A", flag(
        blk("control_if", id="fork",
            inputs={"CONDITION": rep(blk("sensing_touchingcolor",
                                         inputs={"COLOR": col("#123456")}))},
            substacks=[[blk("looks_show")]]))))
    entries = traced(p)
    q = block_q(p, entries, "fork", "touching")
    a = answer_question(p, entries, q)
    assert a.text == ("The color #123456 did not occur when the block was "
                      "executed! Try to select the desired color with the "
                      "color picker.")


def test_invisible_sprite_cannot_be_touched():
    p = build(stage(),
              sprite("A", flag(
                  blk("control_if", id="fork",
                      inputs={"CONDITION": rep(blk(
                          "sensing_touchingobject",
                          fields={"TOUCHINGOBJECTMENU": "B"}))},
                      substacks=[[blk("looks_show")]])), visible=False),
              sprite("B"))
    entries = traced(p)
    q = block_q(p, entries, "fork", "touching")
    a = answer_question(p, entries, q)
    assert a.text == ("Sprite A could not be touched, because it was "
                      "invisible when the block was executed!")


# -- lists ----------------------------------------------------------------------


def test_list_contained_but_removed():
    p = build(stage(), sprite("A", flag(
        blk("data_addtolist", fields={"LIST": "bag"}, inputs={"ITEM": lit("pear")}),
        blk("data_deleteoflist", fields={"LIST": "bag"}, inputs={"INDEX": lit(1)}),
        blk("looks_say", id="reader",
            inputs={"MESSAGE": rep(blk("data_listcontainsitem",
                                       fields={"LIST": "bag"},
                                       inputs={"ITEM": lit("pear")}))})),
        lists=[lst("bag")]))
    entries = traced(p)
    q = block_q(p, entries, "reader", "list-contain", "why-didnt")
    a = answer_question(p, entries, q)
    assert a.text == "The list contained [pear], but it was removed afterwards."


def test_list_value_never_added_anywhere():
    p = build(stage(), sprite("A", flag(
        blk("looks_say", id="reader",
            inputs={"MESSAGE": rep(blk("data_listcontainsitem",
                                       fields={"LIST": "bag"},
                                       inputs={"ITEM": lit("pear")}))})),
        lists=[lst("bag")]))
    entries = traced(p)
    q = block_q(p, entries, "reader", "list-contain", "why-didnt")
    a = answer_question(p, entries, q)
    assert a.text == ("[bag] didn't contain [pear], because no block adds "
                      "that value to the list.")


def test_list_adder_exists_but_never_ran():
    p = build(stage(), sprite("A",
        flag(blk("looks_say", id="reader",
                 inputs={"MESSAGE": rep(blk("data_listcontainsitem",
                                            fields={"LIST": "bag"},
                                            inputs={"ITEM": lit("pear")}))})),
        script(blk("event_whenkeypressed", fields={"KEY_OPTION": "space"}),
               blk("data_addtolist", fields={"LIST": "bag"},
                   inputs={"ITEM": lit("pear")})),
        lists=[lst("bag")]))
    entries = traced(p)
    q = block_q(p, entries, "reader", "list-contain", "why-didnt")
    a = answer_question(p, entries, q)
    assert a.text == ("[bag] didn't contain [pear], because the key [space] "
                      "wasn't pressed and therefore the add to list block "
                      "was not executed.")


# -- every generable question has an answer -------------------------------------


def test_every_generable_question_is_answerable():
    p = project_from_dict(all_opcodes_project())
    t = Tracer(boot(p, seed=7))
    t.press_green_flag()
    t.run_script(ALL_OPCODES_TICKS, list(ALL_OPCODES_EVENTS))
    entries = t.entries
    answered = 0
    for target in p.targets:
        for inst in list_instances(p, entries, target.name):
            for q in questions_for_target(p, entries, inst["instance"]).questions:
                a = answer_question(p, entries, q)
                assert a.text
                json.dumps(a.to_dict())
                answered += 1
        for b in target.all_blocks():
            execs = list_executions(entries, b.id)
            for ordinal in sorted({1, max(len(execs), 1)}):
                for q in questions_for_block(p, entries, b.id,
                                             ordinal=ordinal).questions:
                    a = answer_question(p, entries, q)
                    assert a.text
                    json.dumps(a.to_dict())
                    answered += 1
    assert answered > 400

"""Trace recording, the replay oracle, time travel, and the .nbt.jsonl format."""

import json

import pytest

from blockbug.errors import TraceFileError, TraceIndexError
from blockbug.tracing import (
    Tracer,
    export_trace,
    import_trace,
    replay_to,
)
from blockbug.vm import boot

from builders import blk, build, lit, lst, rep, script, sprite, stage, var


def flag(*body):
    return script(blk("event_whenflagclicked"), *body)


def tracer_for(project, seed=0, **kw):
    t = Tracer(boot(project, seed=seed), **kw)
    t.press_green_flag()
    return t


def run_to_end(tracer, limit=10_000):
    for _ in range(limit):
        if not tracer.step_statement():
            return
    raise AssertionError("program did not terminate")


def simple_project():
    return build(stage(), sprite("A", flag(
        blk("motion_gotoxy", id="go", inputs={"X": lit(10), "Y": lit(20)}),
        blk("motion_changex", id="nudge", inputs={"DX": lit(5)}))))


# -- entry schema -------------------------------------------------------------


def test_entry_carries_all_snapshot_items():
    t = tracer_for(simple_project())
    run_to_end(t)
    entry = next(e for e in t.entries if e.block_id == "go")
    assert entry.opcode == "motion_gotoxy"
    assert entry.params == {"X": 10, "Y": 20}          # (3) + (5)
    assert entry.variables_read == []                  # (4)
    assert entry.records == []                         # (6)
    assert float(entry.exec_time) == 0.0               # (7)
    assert entry.instance_id == 1                      # (8)
    sprite_state = entry.post_state["instances"][1]    # (9)
    assert (sprite_state["x"], sprite_state["y"]) == (10.0, 20.0)
    assert entry.exec_state["steps"] >= 1
    assert entry.mouse_position is None


def test_hat_block_is_the_first_entry():
    t = tracer_for(simple_project())
    run_to_end(t)
    assert t.entries[0].opcode == "event_whenflagclicked"
    assert [e.index for e in t.entries] == list(range(len(t.entries)))


def test_param_record_tree_mirrors_slot_nesting():
    p = build(stage(), sprite("A", flag(
        blk("motion_setx", id="sx",
            inputs={"X": rep(blk("operator_add", id="plus",
                                 inputs={"NUM1": rep(blk("operator_multiply", id="times",
                                                         inputs={"NUM1": lit(2), "NUM2": lit(3)})),
                                         "NUM2": lit(4)}))}))))
    t = tracer_for(p)
    run_to_end(t)
    entry = next(e for e in t.entries if e.block_id == "sx")
    assert len(entry.records) == 1
    plus = entry.records[0]
    assert (plus.block_id, plus.opcode, plus.value) == ("plus", "operator_add", 10)
    assert [c.block_id for c in plus.children] == ["times"]
    assert plus.children[0].value == 6


def test_variables_read_walks_the_evaluation_tree():
    p = build(stage(variables=[var("x", 7)], lists=[lst("xs", [1, 2])]), sprite("A", flag(
        blk("data_changevariable", id="bump",
            inputs={"VALUE": rep(blk("operator_add",
                                     inputs={"NUM1": rep(blk("data_variable", fields={"VARIABLE": "x"})),
                                             "NUM2": rep(blk("data_itemoflist", inputs={"INDEX": lit(1)},
                                                             fields={"LIST": "xs"}))}))},
            fields={"VARIABLE": "y"})),
        variables=[var("y", 0)]))
    t = tracer_for(p)
    run_to_end(t)
    entry = next(e for e in t.entries if e.block_id == "bump")
    assert entry.variables_read == ["x", "xs", "y"]


def test_mouse_position_present_only_for_touching_mouse_blocks():
    p = build(stage(), sprite("A", flag(
        blk("control_if", id="near",
            inputs={"CONDITION": rep(blk("sensing_touchingobject",
                                         fields={"TOUCHINGOBJECTMENU": "mouse-pointer"}))},
            substacks=[[]]),
        blk("motion_changex", id="plain", inputs={"DX": lit(1)}))))
    t = tracer_for(p)
    t.vm.mouse["x"], t.vm.mouse["y"] = 33.0, -44.0
    run_to_end(t)
    near = next(e for e in t.entries if e.block_id == "near")
    plain = next(e for e in t.entries if e.block_id == "plain")
    assert near.mouse_position == (33.0, -44.0)
    assert plain.mouse_position is None


def test_error_note_is_recorded_on_the_entry():
    p = build(stage(), sprite("A", flag(
        blk("motion_setx", id="sx",
            inputs={"X": rep(blk("operator_divide",
                                 inputs={"NUM1": lit(1), "NUM2": lit(0)}))}))))
    t = tracer_for(p)
    run_to_end(t)
    assert next(e for e in t.entries if e.block_id == "sx").error == "division by zero"


# -- trace shape ----------------------------------------------------------------


def test_waiting_block_produces_exactly_two_entries():
    p = build(stage(), sprite("A", flag(
        blk("control_wait", id="w", inputs={"DURATION": lit(2)}))))
    t = tracer_for(p)
    run_to_end(t)
    w = [e for e in t.entries if e.block_id == "w"]
    assert [e.phase for e in w] == ["start", "end"]
    assert float(w[1].exec_time) - float(w[0].exec_time) == pytest.approx(2.0)


def test_monitor_refreshes_are_not_traced():
    p = build(
        stage(variables=[var("score", 0)]),
        sprite("A", flag(blk("data_changevariable", id="ch", inputs={"VALUE": lit(1)},
                             fields={"VARIABLE": "score"}))),
        monitors=[{"target": "Stage", "kind": "variable", "name": "score", "visible": True}],
    )
    t = tracer_for(p)
    run_to_end(t)
    assert [e.block_id for e in t.entries] == ["b1", "ch"]


def test_exec_time_is_non_decreasing():
    t = tracer_for(loopy_project())
    for _ in range(60):
        t.step_statement()
    times = [e.exec_time for e in t.entries]
    assert all(a <= b for a, b in zip(times, times[1:]))
    assert len(t.entries) > 10


# -- lifecycle -------------------------------------------------------------------


def test_toggle_tracing_clears_in_both_directions():
    t = tracer_for(simple_project())
    run_to_end(t)
    assert t.entries
    t.toggle_tracing(False)
    assert t.entries == [] and not t.enabled
    t.press_green_flag()
    run_to_end(t)
    assert t.entries == []  # disabled: nothing recorded
    t.toggle_tracing(True)
    assert t.enabled and t.entries == []


def test_toggle_same_value_is_a_noop():
    t = tracer_for(simple_project())
    run_to_end(t)
    kept = list(t.entries)
    t.toggle_tracing(True)
    assert t.entries == kept


def test_green_flag_clears_the_trace():
    t = tracer_for(simple_project())
    run_to_end(t)
    assert t.entries
    t.press_green_flag()
    assert t.entries == []
    run_to_end(t)
    assert t.entries  # recording resumed from the new base


def test_soft_cap_pauses_recording_with_flag():
    t = tracer_for(loopy_project(), soft_cap=10)
    for _ in range(50):
        t.step_statement()
    assert t.cap_hit
    assert len(t.entries) == 10
    assert t.step_statement() == []  # refuses to run past the cap


def loopy_project():
    return build(stage(), sprite("A", flag(
        blk("control_forever",
            substacks=[[blk("motion_changex", inputs={"DX": lit(1)}),
                        blk("motion_changey", inputs={"DY": lit(1)})]]))))


# -- time travel -------------------------------------------------------------------


def eventful_project():
    return build(
        stage(flag(blk("control_wait", inputs={"DURATION": lit(0.1)}))),
        sprite("A",
               flag(blk("control_repeat", inputs={"TIMES": lit(2)},
                        substacks=[[
                            blk("motion_gotoxy",
                                inputs={"X": rep(blk("operator_random",
                                                     inputs={"FROM": lit(-10), "TO": lit(10)})),
                                        "Y": rep(blk("operator_random",
                                                     inputs={"FROM": lit(-5), "TO": lit(5)}))}),
                            blk("control_create_clone_of", fields={"CLONE_OPTION": "myself"}),
                        ]]),
                    blk("looks_sayforsecs", inputs={"MESSAGE": lit("hi"), "SECS": lit(0.1)})),
               script(blk("control_start_as_clone"),
                      blk("motion_changex", inputs={"DX": lit(1)})),
               script(blk("event_whenkeypressed", fields={"KEY_OPTION": "k"}),
                      blk("motion_changey", inputs={"DY": lit(2)}))),
    )


def traced_eventful_run():
    t = tracer_for(eventful_project(), seed=42)
    injected = False
    for _ in range(10_000):
        if len(t.entries) >= 5 and not injected:
            t.inject({"type": "key-down", "key": "k"})
            injected = True
        if not t.step_statement():
            break
    assert injected and len(t.entries) > 10
    return t


def test_restore_equals_replay_at_every_index():
    t = traced_eventful_run()
    for k in range(len(t.entries)):
        restored = t.restore_state(k).canonical()
        replayed = replay_to(t.vm.project, t.base, t.events, k + 1).canonical()
        assert restored == replayed, f"divergence at entry {k}"


def test_restore_last_entry_matches_live_state():
    t = tracer_for(simple_project())
    while t.step_statement():
        pass  # the final successful step leaves the vm right after the entry
    # step again past the end moves the clock, so compare against the snapshot
    assert t.entries[-1].post_state == t.restore_state(len(t.entries) - 1).canonical()


def test_restore_rejects_out_of_range_indices():
    t = tracer_for(simple_project())
    run_to_end(t)
    with pytest.raises(TraceIndexError):
        t.restore_state(len(t.entries))
    with pytest.raises(TraceIndexError):
        t.restore_state(-1)


def test_truncate_drops_future_entries_and_events():
    t = traced_eventful_run()
    cut = 4  # before the key injection at entry 5
    n = t.truncate(cut)
    assert n == cut + 1 == len(t.entries)
    assert all(e.after_entry <= cut for e in t.events)


def test_truncated_run_can_be_resumed_deterministically():
    t = traced_eventful_run()
    full = [e.to_dict() for e in t.entries]
    cut = 6
    t.truncate(cut)
    vm2 = t.restore_state(cut)
    t2 = Tracer(vm2)
    t2.base, t2.entries, t2.events = t.base, list(t.entries), list(t.events)
    if not any(e.event == {"type": "key-down", "key": "k"} for e in t2.events):
        t2.inject({"type": "key-down", "key": "k"})
    while t2.step_statement():
        pass
    # the preserved prefix is bitwise identical to the original run
    for k in range(cut + 1):
        assert t2.entries[k].to_dict() == full[k]


# -- run_script ---------------------------------------------------------------------


def test_run_script_injects_events_at_their_ticks():
    p = build(stage(), sprite("A",
                              script(blk("event_whenkeypressed", fields={"KEY_OPTION": "a"}),
                                     blk("motion_changex", inputs={"DX": lit(1)}))))
    t = Tracer(boot(p))
    t.run_script(10, [{"tick": 4, "event": {"type": "key-down", "key": "a"}}])
    assert t.vm.tick_no == 10
    assert t.vm.instances_named("A")[0].x == 1.0
    from fractions import Fraction

    hat = t.entries[0]
    assert hat.opcode == "event_whenkeypressed"
    assert hat.exec_time == Fraction(4, 30)


# -- trace files ----------------------------------------------------------------------


def test_export_import_round_trip_is_lossless_and_stable():
    t = traced_eventful_run()
    text = export_trace(t)
    t2 = import_trace(t.vm.project, text)
    assert export_trace(t2) == text
    assert [e.to_dict() for e in t2.entries] == [e.to_dict() for e in t.entries]
    assert t2.vm.canonical() == t.entries[-1].post_state


def test_export_is_one_json_line_per_entry_plus_header():
    t = tracer_for(simple_project())
    run_to_end(t)
    lines = export_trace(t).strip().split("\n")
    assert len(lines) == len(t.entries) + 1
    header = json.loads(lines[0])
    assert header["format"] == "nbt" and header["version"] == 1
    assert header["quantum"] == "1/30"


def test_import_rejects_foreign_projects_and_corrupt_files():
    t = tracer_for(simple_project())
    run_to_end(t)
    text = export_trace(t)

    other = build(stage(), sprite("Z", flag(blk("motion_changex", inputs={"DX": lit(2)}))))
    with pytest.raises(TraceFileError, match="different project"):
        import_trace(other, text)
    with pytest.raises(TraceFileError, match="empty"):
        import_trace(t.vm.project, "")
    with pytest.raises(TraceFileError, match="version"):
        bad = json.loads(text.split("\n")[0])
        bad["version"] = 99
        import_trace(t.vm.project, json.dumps(bad) + "\n")
    with pytest.raises(TraceFileError, match="line 2"):
        import_trace(t.vm.project, text.split("\n")[0] + "\n{not json\n")


def test_empty_trace_round_trips():
    t = Tracer(boot(simple_project()))
    t2 = import_trace(t.vm.project, export_trace(t))
    assert t2.entries == []
    assert t2.vm.canonical() == t.base

"""Source definitions for the committed .nbp.json fixtures.

Run ``python3 tests/fixtures_src.py`` to regenerate the files under
tests/fixtures/; test_fixtures.py asserts the committed files are in sync.
"""

from __future__ import annotations

import pathlib

from builders import (
    backdrop,
    blk,
    col,
    dump,
    ellipse_costume,
    lit,
    lst,
    project_doc,
    rep,
    script,
    sprite,
    stage,
    var,
)

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def collect_the_stars(fixed: bool) -> dict:
    """A star moves to a random position whenever the fish touches it; the
    player steers the fish with the arrow keys. In the buggy variant the
    touching check is not wrapped in a forever loop, so it runs only once."""
    star_if = blk(
        "control_if", id="star_if",
        inputs={"CONDITION": rep(blk("sensing_touchingobject", id="star_touch",
                                     fields={"TOUCHINGOBJECTMENU": "Fish"}))},
        substacks=[[
            blk("motion_gotoxy", id="star_goto", inputs={
                "X": rep(blk("operator_random", id="star_randx",
                             inputs={"FROM": lit(-200), "TO": lit(200)})),
                "Y": rep(blk("operator_random", id="star_randy",
                             inputs={"FROM": lit(-150), "TO": lit(150)})),
            }),
            blk("data_changevariable", id="star_change",
                fields={"VARIABLE": "points"}, inputs={"VALUE": lit(1)}),
        ]],
    )
    if fixed:
        star_tail = [blk("control_forever", id="star_forever", substacks=[[star_if]])]
    else:
        star_tail = [star_if]
    star = sprite(
        "Star",
        script(
            blk("event_whenflagclicked", id="star_flag"),
            blk("data_setvariable", id="star_set",
                fields={"VARIABLE": "points"}, inputs={"VALUE": lit(0)}),
            blk("looks_say", id="star_say", inputs={"MESSAGE": lit("Catch me!")}),
            *star_tail,
        ),
        x=100, y=0,
        costumes=[ellipse_costume("star", 30, 30, "#FFD700")],
    )
    arrows = [("right", "motion_changex", "DX", 10), ("left", "motion_changex", "DX", -10),
              ("up", "motion_changey", "DY", 10), ("down", "motion_changey", "DY", -10)]
    fish = sprite(
        "Fish",
        script(
            blk("event_whenflagclicked", id="fish_flag"),
            blk("motion_gotoxy", id="fish_goto", inputs={"X": lit(-100), "Y": lit(0)}),
        ),
        *[
            script(
                blk("event_whenkeypressed", id=f"fish_{name}_hat",
                    fields={"KEY_OPTION": f"{name} arrow"}),
                blk(op, id=f"fish_{name}", inputs={slot: lit(delta)}),
            )
            for name, op, slot, delta in arrows
        ],
        x=-120, y=-80,
        costumes=[ellipse_costume("fish", 40, 20, "#4C97FF")],
    )
    the_stage = stage(
        script(
            blk("event_whenflagclicked", id="stage_flag"),
            blk("looks_switchbackdrop", id="stage_backdrop", fields={"BACKDROP": "underwater"}),
            blk("sound_play", id="stage_sound", fields={"SOUND_MENU": "pop"}),
        ),
        costumes=[backdrop("#FFFFFF", "blank"), backdrop("#CCEEFF", "underwater")],
        sounds=[{"name": "pop", "duration": 0.0}],
        variables=[var("points", 0)],
    )
    return project_doc(
        the_stage, star, fish,
        monitors=[{"target": "Stage", "kind": "variable", "name": "points", "visible": True}],
    )


def all_fixtures() -> dict[str, dict]:
    from fixtures_all_opcodes import all_opcodes_project

    return {
        "collect_the_stars_fixed.nbp.json": collect_the_stars(fixed=True),
        "collect_the_stars_buggy.nbp.json": collect_the_stars(fixed=False),
        "all_opcodes.nbp.json": all_opcodes_project(),
    }


def regenerate() -> None:
    FIXTURES.mkdir(exist_ok=True)
    for name, doc in all_fixtures().items():
        (FIXTURES / name).write_text(dump(doc) + "\n")
        print(f"wrote {name}")


if __name__ == "__main__":
    regenerate()

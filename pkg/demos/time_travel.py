"""
Time travel over a recorded run
===============================

"""

# Every executed statement carries a full post-execution snapshot, so the
# whole run is a scrubbable timeline: seek anywhere, step backwards, or
# resume from the past (which discards the old future). This script records
# one game of Collect the Stars and then moves around in it.

from pathlib import Path

from blockbug.control import controller_for
from blockbug.model import parse_project
from blockbug.tracing import canonical_json, export_trace, import_trace

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

project = parse_project((FIXTURES / "collect_the_stars_fixed.nbp.json").read_text())
drive = [{"tick": t, "event": {"type": "key-down", "key": "right arrow"}}
         for t in range(1, 41)]

# Record two virtual seconds of play.
ctl = controller_for(project, seed=7)
ctl.green_flag()
ctl.schedule_events(drive)
ctl.run(until_tick=60)
ctl.pause()
entries = ctl.tracer.entries
print("recorded", len(entries), "entries over", entries[-1].seconds, "virtual seconds")

# Find the moment the Star jumped and scrub to just before it.
jump = next(e for e in entries if e.block_id == "star_goto")
print("the jump is entry", jump.index, "at t =", jump.seconds, "s")

ctl.seek(jump.index - 1)
star = ctl.vm.instances_named("Star")[0]
print("seek  ->", ctl.selected, " star at", (star.x, star.y))

ctl.step_over()
star = ctl.vm.instances_named("Star")[0]
print("step  ->", ctl.selected, " star at", (round(star.x, 1), round(star.y, 1)))

ctl.step_back()
star = ctl.vm.instances_named("Star")[0]
print("back  ->", ctl.selected, " star at", (star.x, star.y))

# Resume from the past. Everything after the selected entry is dropped; the
# prefix survives bit for bit, and the restored RNG draws the same random
# landing spot in the new timeline.
prefix = [canonical_json(e.to_dict()) for e in entries[:jump.index]]
ctl.resume()
print("resumed from the past: trace is", len(ctl.tracer.entries), "entries again")
ctl.run(until_tick=60)
entries = ctl.tracer.entries
print("re-ran to the same budget:", len(entries), "entries")
print("prefix preserved bitwise:",
      [canonical_json(e.to_dict()) for e in entries[:jump.index]] == prefix)
star = ctl.vm.instances_named("Star")[0]
print("star lands at", (round(star.x, 1), round(star.y, 1)), "again")

# A trace is a file format too: export, re-import, keep debugging later.
text = export_trace(ctl.tracer)
again = import_trace(project, text)
print("export -> import -> export is identity:", export_trace(again) == text)
print("trace file:", len(text), "bytes for", len(again.entries), "entries")

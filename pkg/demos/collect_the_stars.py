"""
Finding the Collect-the-Stars bug
=================================

"""

# The game: arrow keys steer the Fish, and the Star is supposed to jump to a
# random spot (scoring a point) whenever the Fish touches it. In the buggy
# version the Star never moves, no matter how well you play. This script walks
# the debugger through the same steps a person would take in the UI.

from pathlib import Path

from blockbug.answers import answer_question
from blockbug.control import controller_for
from blockbug.model import parse_project
from blockbug.questions import list_instances, questions_for_block, questions_for_target

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

buggy = parse_project((FIXTURES / "collect_the_stars_buggy.nbp.json").read_text())

# Hold the right arrow for forty ticks so the Fish swims straight at the Star.
drive = [{"tick": t, "event": {"type": "key-down", "key": "right arrow"}}
         for t in range(1, 41)]

# Play the buggy game with a breakpoint on the touching check.
ctl = controller_for(buggy, seed=7)
ctl.set_breakpoint("star_if")
ctl.green_flag()
ctl.schedule_events(drive)

stop = ctl.run(until_tick=45)
print("first run stopped on:", stop)          # the breakpoint fires...
ctl.resume()
stop = ctl.run(until_tick=90)
print("after resume:", stop)                  # ...and never fires again

# The symptom in numbers: the Fish sailed right through the Star, but the
# score stayed 0 and the Star never moved.
stage = ctl.vm.instance(0)
star = ctl.vm.instances_named("Star")[0]
fish = ctl.vm.instances_named("Fish")[0]
print("points:", stage.variables["points"])
print("star:", (star.x, star.y), " fish:", (fish.x, fish.y))

# Ask the debugger what the player is wondering.
entries = ctl.tracer.entries
star_id = list_instances(buggy, entries, "Star")[0]["instance"]
tree = questions_for_target(buggy, entries, star_id)
print()
print("questions about the Star:")
for q in tree.questions:
    print("  -", q.text)

question = next(q for q in tree.questions
                if q.text == "Why didn't the position of sprite Star change?")
answer = answer_question(buggy, entries, question)
print()
print("Q:", question.text)
print("A:", answer.text)

# The answer graph pins the failure to one edge: execution reached star_if
# but never crossed into the go-to block.
graph = answer.visual
for node in graph["nodes"]:
    mark = "x" if node["executed"] else " "
    print(f"  [{mark}] {node['label']}")
print("  frontier:", graph["frontier"]["src"], "->", graph["frontier"]["dst"])

# Drill into the condition itself: it ran exactly once, at the very start,
# when the Fish was still far away -- the check is outside the game loop.
tree = questions_for_block(buggy, entries, "star_touch")
question = next(q for q in tree.questions
                if q.text == "Why didn't the condition touching Fish ? evaluate to true?")
answer = answer_question(buggy, entries, question)
print()
print("Q:", question.text)
print("A:", answer.text)

# The fixed version moves the check inside a forever loop. Same inputs, same
# seed: now the Star jumps and the score moves.
fixed = parse_project((FIXTURES / "collect_the_stars_fixed.nbp.json").read_text())
ctl = controller_for(fixed, seed=7)
ctl.green_flag()
ctl.schedule_events(drive)
ctl.run(until_tick=90)
stage = ctl.vm.instance(0)
star = ctl.vm.instances_named("Star")[0]
print()
print("fixed game -> points:", stage.variables["points"],
      " star moved to:", (round(star.x, 1), round(star.y, 1)))

"""
Driving the debugger over the wire
==================================

"""

# Everything the UI does travels as line-delimited JSON: requests in,
# responses and engine events out, one object per line. Spawn the stdio
# server exactly as a frontend would and watch the exchange.

import json
import queue
import subprocess
import sys
import threading
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
PROJECT = ROOT / "tests" / "fixtures" / "collect_the_stars_buggy.nbp.json"

server = subprocess.Popen(
    [sys.executable, "-m", "blockbug.cli", "serve", "--stdio", "--seed", "7"],
    stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)

# a reader thread feeds a queue so the transcript can be printed in arrival order
lines = queue.Queue()
threading.Thread(target=lambda: [lines.put(l) for l in server.stdout],
                 daemon=True).start()


def show(msg):
    # stage frames carry a base64 PNG; abbreviate so the transcript stays readable
    payload = dict(msg["payload"])
    if "image" in payload:
        payload["image"] = f"<png, {len(payload['image'])} base64 chars>"
    tag = "<-" if msg["kind"] == "response" else " *"
    print(f"{tag} {msg['kind']} seq={msg['seq']} {msg['command']}:",
          json.dumps(payload)[:120])


def call(seq, command, payload):
    request = {"kind": "request", "seq": seq, "command": command, "payload": payload}
    print(f"-> request  seq={seq} {command}")
    server.stdin.write(json.dumps(request) + "\n")
    server.stdin.flush()
    while True:
        msg = json.loads(lines.get())
        show(msg)
        if msg["kind"] == "response" and msg["seq"] == seq:
            break
    # the events this command triggered follow the response in the same flush
    while True:
        try:
            show(json.loads(lines.get(timeout=0.1)))
        except queue.Empty:
            return msg["payload"]


call(1, "load_project", {"path": str(PROJECT)})
call(2, "green_flag", {})
call(3, "tick", {"count": 10})

# Questions must be listed before they can be asked; the tree gives each one
# a stable id that the ask command takes.
tree = call(4, "list_questions", {"block": "star_goto"})
wanted = next(q
              for category in tree["categories"]
              for group in category["groups"]
              for q in group["questions"]
              if q["polarity"] == "why-didnt")
print()
print("asking:", wanted["text"])
answer = call(5, "ask", {"question": wanted["id"]})
print()
print("answer:", answer["text"])

server.stdin.close()
server.wait(timeout=10)

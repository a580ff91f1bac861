"""A tiny line-delimited JSON REPL used to exercise the subprocess transport.

Replies to {"cmd": ...} with an env id, and to {"tactic": "boom", ...} with
deliberately malformed output. `--garbage` makes every reply malformed.
"""

from __future__ import annotations

import json
import sys


def main() -> int:
    garbage = "--garbage" in sys.argv
    env = 0
    pending = []
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        pending.append(line)
        try:
            request = json.loads("".join(pending))
        except ValueError:
            continue
        pending = []
        if garbage:
            sys.stdout.write("not json\n\n")
            sys.stdout.flush()
            continue
        if "cmd" in request:
            env += 1
            reply = {"env": env, "messages": [], "sorries": []}
            if "sorry" in request["cmd"]:
                reply["sorries"] = [{"proofState": env, "goal": "⊢ True"}]
        elif request.get("tactic") == "boom":
            sys.stdout.write("not json\n\n")
            sys.stdout.flush()
            continue
        else:
            reply = {"proofState": 99, "goals": []}
        sys.stdout.write(json.dumps(reply) + "\n\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())

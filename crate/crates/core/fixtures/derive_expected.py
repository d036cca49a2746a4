#!/usr/bin/env python3
"""Derive the expected `rules.json` and `trace.jsonl` of every fixture.

This is the reviewed oracle for the golden files. It does not use the Rust
implementation: the arbitration rules below are written out by hand from the
behavior models, and the simulation is a direct replay of the documented
semantics:

* each source emits at phase + k*period inside its active intervals;
* events run in (time, seq) order, seq being the queue insertion counter;
  a source's next emission is queued right after its current one is handled;
* each emission fans out over outgoing connections sorted by destination;
* a connection is active at t iff its last arrival a satisfies t - a < T
  (T = 1000 ms); the arrival is recorded before the rule is evaluated, and
  regardless of the outcome;
* no rule for the source at that port -> discard / NO_RULE.

Usage: python3 derive_expected.py [--check]
"""

import heapq
import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
WINDOW = 1000

OBJ, FACE, LOOK, REST, COLL = "/Object/pos:o", "/Face/pos:o", "/RandomLook/pos:o", "/RestArm/pos:o", "/collision:o"
GAZE, ARM = "/Gaze/pos:i", "/Arm/pos:i"

S1_CONNECTIONS = [(OBJ, GAZE), (OBJ, ARM), (REST, ARM), (COLL, ARM), (FACE, GAZE), (LOOK, GAZE)]

# (port, candidate) -> (constraint text, predicate over activation dict, provenance)
SEARCH_AND_TRACK_RULES = {
    (ARM, OBJ): ("not /collision:o", lambda a: a[OBJ] and not a[COLL], ["Track Object"]),
    (ARM, REST): ("not /Object/pos:o", lambda a: a[REST] and not a[OBJ], ["Rest Arm"]),
    (GAZE, FACE): ("not /Object/pos:o", lambda a: a[FACE] and not a[OBJ], ["Follow Face"]),
    (GAZE, OBJ): ("not /collision:o", lambda a: a[OBJ] and not a[COLL], ["Track Object"]),
    (GAZE, LOOK): (
        "not /Face/pos:o and not /Object/pos:o",
        lambda a: a[LOOK] and not a[FACE] and not a[OBJ],
        ["Look Around"],
    ),
}

BE_CURIOUS_RULES = {
    (GAZE, FACE): ("true", lambda a: a[FACE], ["Follow Face"]),
    (GAZE, LOOK): ("not /Face/pos:o", lambda a: a[LOOK] and not a[FACE], ["Look Around"]),
}

WAVE, POINT = "/Wave/pos:o", "/Point/pos:o"
CONFLICT_RULES = {
    (ARM, POINT): ("true", lambda a: a[POINT], ["Point"]),
    (ARM, WAVE): ("true", lambda a: a[WAVE], ["Wave"]),
}

FIXTURES = {
    # the observer connection /collision:o -> /Gaze/pos:i is added by auto-observe
    "search-and-track": (S1_CONNECTIONS + [(COLL, GAZE)], SEARCH_AND_TRACK_RULES),
    "no-rules": (S1_CONNECTIONS, {}),
    "be-curious": ([(LOOK, GAZE), (FACE, GAZE)], BE_CURIOUS_RULES),
    "conflict-demo": ([(WAVE, ARM), (POINT, ARM)], CONFLICT_RULES),
}


def rule_text(port, candidate, constraint):
    guard = candidate if constraint == "true" else f"{candidate} and {constraint}"
    return f"{guard} => Select({candidate}) @ {port}"


def rules_json(rules):
    doc = {
        "rules": [
            {"port": port, "candidate": cand, "constraint": text, "provenance": prov}
            for (port, cand), (text, _, prov) in sorted(rules.items())
        ]
    }
    return json.dumps(doc, indent=2) + "\n"


def emissions(source, horizon):
    period, phase = source["period_ms"], source.get("phase_ms", 0)
    active = source.get("active", [[0, horizon]])
    t = phase
    while t < horizon:
        if any(a <= t < b for a, b in active):
            yield t
        t += period


def simulate(scenario, connections, rules):
    horizon = scenario["horizon_ms"]
    sources = [c["source"] for c in scenario["components"] if "source" in c]
    streams = [iter(emissions(s, horizon)) for s in sources]

    queue, seq = [], 0
    for i, it in enumerate(streams):
        t = next(it, None)
        if t is not None:
            heapq.heappush(queue, (t, seq, i))
            seq += 1

    last = {}
    lines = []
    while queue:
        t, _, i = heapq.heappop(queue)
        src = sources[i]["port"]
        for dst in sorted(d for s, d in connections if s == src):
            last[(src, dst)] = t
            incoming = sorted({s for s, d in connections if d == dst})
            snapshot = {s: (s, dst) in last and t - last[(s, dst)] < WINDOW for s in incoming}
            rule = rules.get((dst, src))
            if rule is None:
                outcome, reason, text = "discard", "NO_RULE", "-"
            else:
                constraint, predicate, _ = rule
                ok = predicate(snapshot)
                outcome, reason = ("accept", "SELECTED") if ok else ("discard", "CONSTRAINT_FALSE")
                text = rule_text(dst, src, constraint)
            record = {"t": t, "src": src, "dst": dst, "outcome": outcome, "reason": reason,
                      "rule": text, "assignment": snapshot}
            lines.append(json.dumps(record, separators=(",", ":")))
        t_next = next(streams[i], None)
        if t_next is not None:
            heapq.heappush(queue, (t_next, seq, i))
            seq += 1
    return "".join(line + "\n" for line in lines)


def main():
    check = "--check" in sys.argv
    stale = []
    for name, (connections, rules) in FIXTURES.items():
        scenario = json.loads((HERE / name / "scenario.json").read_text())
        outputs = {
            "rules.json": rules_json(rules),
            "trace.jsonl": simulate(scenario, connections, rules),
        }
        for fname, text in outputs.items():
            path = HERE / name / fname
            if check:
                if not path.exists() or path.read_text() != text:
                    stale.append(str(path))
            else:
                path.write_text(text)
    if stale:
        print("out of date:", *stale, sep="\n  ")
        sys.exit(1)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Convert raw movie interaction-session data into an interval story JSON.

Accepts either of the two layouts the public storyline data sets circulate in:

* JSON: an object with a ``sessions`` (or ``scenes``) list whose entries carry
  a start time (``start``/``begin``), an end time (``end``/``stop``), and a
  member list (``members``/``characters``/``chars``), e.g.

      {"sessions": [{"start": 0, "end": 3, "members": ["Neo", "Trinity"]}]}

* XML: any elements whose tag contains ``session`` or ``scene`` with
  ``start``/``end`` attributes; members are read from child elements' ``name``
  (or ``ref``/``id``) attribute, or their text.

Sessions are emitted in (begin, end) order with ids ``s1, s2, ...``.  Integral
times stay integers; anything else becomes an exact ``[numerator,
denominator]`` pair.  The output is a story document for ``storymin`` (no
--book-mode).  Validate with ``storymin validate`` afterwards: raw data sets
occasionally contain overlapping sessions that share a character, which is not
a well-formed story.  Expected instance sizes for cross-checking a conversion
(layers, nodes, edges): inception (139, 925, 915), starwars (100, 940, 926),
thematrix (82, 683, 669).  Write the output to tests/data/<name>.json to
enable the published-counts test.
"""

from __future__ import annotations

import argparse
import json
import sys
import xml.etree.ElementTree as ET
from fractions import Fraction
from pathlib import Path


def exact_time(value):
    if isinstance(value, bool):
        raise ValueError(f"bad time {value!r}")
    if isinstance(value, int):
        return value
    f = Fraction(str(value))  # exact for JSON decimals and numeric strings
    return int(f) if f.denominator == 1 else [f.numerator, f.denominator]


def pick(d: dict, *names):
    for n in names:
        if n in d:
            return d[n]
    raise KeyError(f"none of {names} in {sorted(d)}")


def sessions_from_json(raw) -> list[tuple]:
    if isinstance(raw, dict):
        raw = pick(raw, "sessions", "scenes", "interactions")
    if not isinstance(raw, list):
        raise ValueError("expected a list of sessions")
    out = []
    for s in raw:
        members = pick(s, "members", "characters", "chars")
        if isinstance(members, str):
            members = [m.strip() for m in members.split(",") if m.strip()]
        out.append((exact_time(pick(s, "start", "begin")),
                    exact_time(pick(s, "end", "stop")),
                    [str(m) for m in members]))
    return out


def sessions_from_xml(text: str) -> list[tuple]:
    root = ET.fromstring(text)
    out = []
    for el in root.iter():
        tag = el.tag.lower()
        if ("session" not in tag and "scene" not in tag) or "start" not in el.attrib:
            continue
        members = []
        for child in el:
            name = (child.get("name") or child.get("ref") or child.get("id")
                    or (child.text or "").strip())
            if name and name not in members:
                members.append(name)
        out.append((exact_time(el.get("start")),
                    exact_time(el.get("end", el.get("stop"))),
                    members))
    return out


def sort_key(time):
    return Fraction(*time) if isinstance(time, list) else Fraction(time)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog=__doc__)
    ap.add_argument("raw", type=Path, help="raw session data (.json or .xml)")
    ap.add_argument("--out", type=Path, help="output file (default: stdout)")
    args = ap.parse_args(argv)

    text = args.raw.read_text()
    if text.lstrip().startswith("<"):
        sessions = sessions_from_xml(text)
    else:
        sessions = sessions_from_json(json.loads(text))
    sessions = [s for s in sessions if s[2]]
    if not sessions:
        print("error: no usable sessions found", file=sys.stderr)
        return 1
    sessions.sort(key=lambda s: (sort_key(s[0]), sort_key(s[1])))

    characters: list[str] = []
    scenes = []
    for k, (begin, end, members) in enumerate(sessions):
        for m in members:
            if m not in characters:
                characters.append(m)
        scenes.append({"id": f"s{k + 1}", "begin": begin, "end": end,
                       "members": members})
    doc = json.dumps({"characters": characters, "scenes": scenes}, indent=2)
    if args.out:
        args.out.write_text(doc + "\n")
    else:
        print(doc)
    return 0


if __name__ == "__main__":
    sys.exit(main())

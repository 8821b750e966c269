#!/usr/bin/env python3
"""Convert a Stanford GraphBase book file (anna.dat, jean.dat, ...) into a
scene-sequence story JSON for ``storymin --book-mode``.

The .dat format: ``*`` lines are comments; lines starting with ``&`` continue
the previous line; character definitions look like ``AA Anna Arkadyevna ...``
(a short code, a space, the description); chapter data lines look like

    3.14:AA,VK;SA,SK,VK

i.e. ``<part>.<chapter>:`` followed by ``;``-separated groups of ``,``-separated
character codes.  Every group is one scene.  Selecting ``--part 3`` keeps the
chapters whose tag starts with ``3.``, in file order; the output then yields
one layer per scene (a character is alive from its first to its last scene of
the selected part).

Groups with a single character are kept as one-member scenes; pass
``--min-members 2`` to drop them if your reference counts assume encounters
only.  Expected instance sizes for cross-checking a conversion (layers,
nodes, edges): anna3 (48, 265, 219), anna8 (28, 192, 175), jean2 (59, 226,
212).  Write the output to tests/data/<name>.json to enable the published-
counts test.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

CHAPTER_RE = re.compile(r"^(\d+(?:\.\d+)*):(.*)$")
CODE_RE = re.compile(r"^([A-Z0-9]{1,2}) +(\S.*)$")


def logical_lines(text: str) -> list[str]:
    lines: list[str] = []
    for raw in text.splitlines():
        if raw.startswith("*"):
            continue
        if raw.startswith("&") and lines:
            lines[-1] += raw[1:]
        else:
            lines.append(raw)
    return lines


def parse_dat(text: str) -> tuple[dict[str, str], list[tuple[str, list[list[str]]]]]:
    """Return (code -> description, [(chapter tag, [scene member lists])])."""
    codes: dict[str, str] = {}
    chapters: list[tuple[str, list[list[str]]]] = []
    for line in logical_lines(text):
        m = CHAPTER_RE.match(line)
        if m:
            tag, body = m.group(1), m.group(2)
            groups = [g for g in body.split(";") if g.strip()]
            scenes = [[c.strip() for c in g.split(",") if c.strip()] for g in groups]
            chapters.append((tag, [s for s in scenes if s]))
            continue
        if not chapters:
            m = CODE_RE.match(line)
            if m:
                codes[m.group(1)] = m.group(2).strip()
    return codes, chapters


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog=__doc__)
    ap.add_argument("dat", type=Path, help="SGB book file, e.g. anna.dat")
    ap.add_argument("--part", required=True,
                    help="top-level division to keep, e.g. 3 keeps chapters 3.*")
    ap.add_argument("--min-members", type=int, default=1,
                    help="drop scenes with fewer members (default: keep all)")
    ap.add_argument("--full-names", action="store_true",
                    help="emit character descriptions instead of short codes")
    ap.add_argument("--out", type=Path, help="output file (default: stdout)")
    args = ap.parse_args(argv)

    codes, chapters = parse_dat(args.dat.read_text(encoding="latin-1"))
    prefix = f"{args.part}."
    scenes = []
    for tag, groups in chapters:
        if not (tag == args.part or tag.startswith(prefix)):
            continue
        for g, members in enumerate(groups):
            if len(members) < args.min_members:
                continue
            unknown = [m for m in members if m not in codes]
            if unknown:
                print(f"warning: chapter {tag} uses undefined codes {unknown}",
                      file=sys.stderr)
            if args.full_names:
                members = [codes.get(m, m) for m in members]
            scenes.append({"id": f"ch{tag}_g{g + 1}", "members": members})
    if not scenes:
        print(f"error: no scenes found for part {args.part!r}", file=sys.stderr)
        return 1

    doc = json.dumps({"scenes": scenes}, indent=2)
    if args.out:
        args.out.write_text(doc + "\n")
    else:
        print(doc)
    return 0


if __name__ == "__main__":
    sys.exit(main())

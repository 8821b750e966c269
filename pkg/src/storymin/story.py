"""Story model: characters, scenes with rational time intervals, lifespans.

A story is a cast of characters plus a list of scenes.  Every scene gathers a
non-empty set of characters over a closed time interval ``[begin, end]`` with
rational endpoints.  Two scenes whose intervals overlap (closed intervals --
touching at a single point counts) must have disjoint member sets: a character
cannot be in two places at once.

Times are kept exact as :class:`fractions.Fraction`.  The JSON format accepts
integers, ``[numerator, denominator]`` pairs, and decimal strings ("2.5");
floats are rejected because binary floats silently misrepresent decimals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .validation import FormatError, ValidationReport

__all__ = [
    "Scene",
    "Story",
    "Lifespan",
    "StoryFormatError",
    "parse_story",
    "parse_scene_sequence",
    "serialize_story",
    "validate_story",
    "lifespan",
    "all_lifespans",
]


class StoryFormatError(FormatError):
    """Malformed story JSON (syntax, shape, or reference errors)."""


@dataclass(frozen=True)
class Scene:
    """A scene: who is together, from when to when (closed interval)."""

    id: str
    members: frozenset[str]
    begin: Fraction
    end: Fraction


@dataclass(frozen=True)
class Story:
    """An immutable story: cast in declaration order, scenes in input order."""

    characters: tuple[str, ...]
    scenes: tuple[Scene, ...]


@dataclass(frozen=True)
class Lifespan:
    """A character's active interval: first scene begin to last scene end."""

    character: str
    begin: Fraction
    end: Fraction


def _parse_time(value, location: str) -> Fraction:
    """Accept int, [num, den], or decimal string.  Reject floats."""
    if isinstance(value, bool):
        raise StoryFormatError("bad-time", "time must be rational, got bool", location)
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        raise StoryFormatError(
            "bad-time",
            "float times are not accepted; use an int, [num, den], or a decimal string",
            location,
        )
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise StoryFormatError("bad-time", f"unparsable time string {value!r}: {exc}", location) from None
    if isinstance(value, list):
        if len(value) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise StoryFormatError("bad-time", "rational time must be [numerator, denominator]", location)
        num, den = value
        if den == 0:
            raise StoryFormatError("bad-time", "zero denominator", location)
        return Fraction(num, den)
    raise StoryFormatError("bad-time", f"unsupported time value {value!r}", location)


def parse_story(text: str) -> Story:
    """Parse story JSON.

    Expected shape::

        {"characters": ["a", "b", ...],
         "scenes": [{"id": "s1", "members": ["a", "b"],
                     "begin": 0, "end": [5, 2]}, ...]}

    Raises :class:`StoryFormatError` on JSON syntax errors (with line/column),
    duplicate character or scene ids, unknown member ids, empty member lists,
    malformed times, and inverted intervals.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoryFormatError("syntax", exc.msg, f"line {exc.lineno} column {exc.colno}") from None

    if not isinstance(raw, dict):
        raise StoryFormatError("bad-shape", "top level must be a JSON object", "$")
    for key in ("characters", "scenes"):
        if key not in raw:
            raise StoryFormatError("bad-shape", f"missing required key {key!r}", "$")
    extra = set(raw) - {"characters", "scenes", "title"}
    if extra:
        raise StoryFormatError("bad-shape", f"unknown keys: {sorted(extra)}", "$")

    chars_raw = raw["characters"]
    if not isinstance(chars_raw, list) or not all(isinstance(c, str) and c for c in chars_raw):
        raise StoryFormatError("bad-shape", "'characters' must be a list of non-empty strings", "$.characters")
    seen: set[str] = set()
    for idx, c in enumerate(chars_raw):
        if c in seen:
            raise StoryFormatError("duplicate-character", f"character {c!r} declared twice", f"$.characters[{idx}]")
        seen.add(c)

    scenes_raw = raw["scenes"]
    if not isinstance(scenes_raw, list):
        raise StoryFormatError("bad-shape", "'scenes' must be a list", "$.scenes")

    scenes: list[Scene] = []
    scene_ids: set[str] = set()
    for idx, sraw in enumerate(scenes_raw):
        loc = f"$.scenes[{idx}]"
        if not isinstance(sraw, dict):
            raise StoryFormatError("bad-shape", "scene must be an object", loc)
        missing = {"id", "members", "begin", "end"} - set(sraw)
        if missing:
            raise StoryFormatError("bad-shape", f"scene missing keys: {sorted(missing)}", loc)
        sid = sraw["id"]
        if not isinstance(sid, str) or not sid:
            raise StoryFormatError("bad-shape", "scene id must be a non-empty string", loc + ".id")
        if sid in scene_ids:
            raise StoryFormatError("duplicate-scene", f"scene id {sid!r} declared twice", loc + ".id")
        scene_ids.add(sid)
        members_raw = sraw["members"]
        if not isinstance(members_raw, list) or not members_raw:
            raise StoryFormatError("empty-members", "scene members must be a non-empty list", loc + ".members")
        members: set[str] = set()
        for midx, m in enumerate(members_raw):
            mloc = f"{loc}.members[{midx}]"
            if not isinstance(m, str):
                raise StoryFormatError("bad-shape", "member must be a string", mloc)
            if m not in seen:
                raise StoryFormatError("unknown-member", f"member {m!r} is not a declared character", mloc)
            if m in members:
                raise StoryFormatError("duplicate-member", f"member {m!r} listed twice", mloc)
            members.add(m)
        begin = _parse_time(sraw["begin"], loc + ".begin")
        end = _parse_time(sraw["end"], loc + ".end")
        if begin > end:
            raise StoryFormatError("inverted-interval", f"begin {begin} > end {end}", loc)
        scenes.append(Scene(sid, frozenset(members), begin, end))

    return Story(tuple(chars_raw), tuple(scenes))


def _time_to_json(t: Fraction):
    return int(t) if t.denominator == 1 else [t.numerator, t.denominator]


def serialize_story(story: Story) -> str:
    """Canonical JSON for a story; ``parse_story`` round-trips it."""
    doc = {
        "characters": list(story.characters),
        "scenes": [
            {
                "id": s.id,
                # keep declaration order for members so output is stable
                "members": [c for c in story.characters if c in s.members],
                "begin": _time_to_json(s.begin),
                "end": _time_to_json(s.end),
            }
            for s in story.scenes
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _intervals_overlap(a: Scene, b: Scene) -> bool:
    # closed intervals: touching endpoints overlap
    return a.begin <= b.end and b.begin <= a.end


def validate_story(story: Story) -> ValidationReport:
    """Check every story invariant; the report lists all violations found.

    Checked here rather than at parse time because ``Story`` values can be
    built programmatically: member references, non-empty member sets,
    interval sanity, the disjointness rule for time-overlapping scenes, and
    that every character appears in at least one scene (otherwise it has no
    lifespan and no drawing position).
    """
    report = ValidationReport()
    declared = set(story.characters)
    if len(declared) != len(story.characters):
        report.add("duplicate-character", "character list contains duplicates", "characters")

    ids_seen: set[str] = set()
    for idx, s in enumerate(story.scenes):
        loc = f"scenes[{idx}]"
        if s.id in ids_seen:
            report.add("duplicate-scene", f"scene id {s.id!r} declared twice", loc)
        ids_seen.add(s.id)
        if not s.members:
            report.add("empty-members", f"scene {s.id!r} has no members", loc)
        for m in sorted(s.members):
            if m not in declared:
                report.add("unknown-member", f"scene {s.id!r} member {m!r} is not declared", loc)
        if s.begin > s.end:
            report.add("inverted-interval", f"scene {s.id!r} has begin {s.begin} > end {s.end}", loc)

    for i in range(len(story.scenes)):
        for j in range(i + 1, len(story.scenes)):
            a, b = story.scenes[i], story.scenes[j]
            if _intervals_overlap(a, b):
                shared = a.members & b.members
                if shared:
                    report.add(
                        "concurrent-member",
                        f"scenes {a.id!r} and {b.id!r} overlap in time but share member(s) "
                        f"{sorted(shared)}",
                        f"scenes[{i}]/scenes[{j}]",
                    )

    in_some_scene = set()
    for s in story.scenes:
        in_some_scene |= s.members
    for c in story.characters:
        if c not in in_some_scene:
            report.add("character-without-scenes", f"character {c!r} appears in no scene", "characters")

    return report


def parse_scene_sequence(text: str) -> Story:
    """Book mode: scenes are an ordered sequence; position replaces time.

    Accepts the regular story JSON (begin/end are then ignored) or a reduced
    form where scenes carry only ``members`` (ids default to ``s<k>``) and
    the character list is inferred in first-appearance order.  Scene k gets
    the degenerate interval [k, k], so the construction yields exactly one
    layer per scene and a character is alive from its first to its last
    appearance.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoryFormatError("syntax", exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(raw, dict) or "scenes" not in raw or not isinstance(raw["scenes"], list):
        raise StoryFormatError("bad-shape", "book input needs a 'scenes' list", "$")

    declared = raw.get("characters")
    if declared is not None:
        if not isinstance(declared, list) or not all(isinstance(c, str) and c for c in declared):
            raise StoryFormatError("bad-shape", "'characters' must be a list of non-empty strings", "$.characters")
        if len(set(declared)) != len(declared):
            raise StoryFormatError("duplicate-character", "character list contains duplicates", "$.characters")

    inferred: list[str] = []
    scenes: list[Scene] = []
    seen_ids: set[str] = set()
    for k, sraw in enumerate(raw["scenes"]):
        loc = f"$.scenes[{k}]"
        if not isinstance(sraw, dict) or "members" not in sraw:
            raise StoryFormatError("bad-shape", "scene must be an object with 'members'", loc)
        members_raw = sraw["members"]
        if not isinstance(members_raw, list) or not members_raw:
            raise StoryFormatError("empty-members", "scene members must be a non-empty list", loc)
        members: list[str] = []
        for m in members_raw:
            if not isinstance(m, str) or not m:
                raise StoryFormatError("bad-shape", "member must be a non-empty string", loc)
            if declared is not None and m not in declared:
                raise StoryFormatError("unknown-member", f"member {m!r} is not a declared character", loc)
            if m in members:
                raise StoryFormatError("duplicate-member", f"member {m!r} listed twice", loc)
            members.append(m)
            if m not in inferred:
                inferred.append(m)
        sid = sraw.get("id", f"s{k + 1}")
        if not isinstance(sid, str) or not sid:
            raise StoryFormatError("bad-shape", "scene id must be a non-empty string", loc)
        if sid in seen_ids:
            raise StoryFormatError("duplicate-scene", f"scene id {sid!r} declared twice", loc)
        seen_ids.add(sid)
        scenes.append(Scene(sid, frozenset(members), Fraction(k), Fraction(k)))

    characters = tuple(declared) if declared is not None else tuple(inferred)
    return Story(characters, tuple(scenes))


class CharacterHasNoScenes(ValueError):
    """Lifespan requested for a character that appears in no scene."""


def lifespan(story: Story, character: str) -> Lifespan:
    """Earliest scene begin to latest scene end over scenes containing the character."""
    begins = [s.begin for s in story.scenes if character in s.members]
    ends = [s.end for s in story.scenes if character in s.members]
    if not begins:
        raise CharacterHasNoScenes(f"character {character!r} appears in no scene")
    return Lifespan(character, min(begins), max(ends))


def all_lifespans(story: Story) -> dict[str, Lifespan]:
    """Lifespans for all characters, keyed by name (declaration order)."""
    return {c: lifespan(story, c) for c in story.characters}

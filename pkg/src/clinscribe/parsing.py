"""Extraction of structured lines from raw model responses.

Model output rarely matches the prompted format exactly: rationales go
missing, prose appears before or after the payload, brackets become
parentheses. Extraction therefore runs a per-line fallback ladder, from
the strict stage pattern down to bare "Speaker: text" lines, and records
which rung produced each parsed line. An empty result means the response
was unparseable; callers decide what to do about that.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .transcript import SpeakerRole


class Stage(enum.Enum):
    PUNCTUATION = "punctuation"
    DIARIZATION = "diarization"
    CORRECTION = "correction"
    ZERO_SHOT = "zero_shot"


COT_STAGE_ORDER = (Stage.PUNCTUATION, Stage.DIARIZATION, Stage.CORRECTION)


class PatternError(ValueError):
    """A pattern that does not compile or declares missing captures."""


_FIELDS = {"ordinal", "speaker", "text", "justification"}


@dataclass(frozen=True)
class ExtractionPattern:
    stage: Stage
    rung: int
    pattern: str
    captures: Mapping[str, str]

    def __post_init__(self):
        try:
            compiled = re.compile(self.pattern, re.IGNORECASE)
        except re.error as exc:
            raise PatternError(f"pattern does not compile: {exc}") from exc
        for group, target in self.captures.items():
            if group not in compiled.groupindex:
                raise PatternError(
                    f"capture group {group!r} missing from pattern {self.pattern!r}"
                )
            if target not in _FIELDS:
                raise PatternError(f"unknown field {target!r}")
        object.__setattr__(self, "captures", MappingProxyType(dict(self.captures)))
        object.__setattr__(self, "_compiled", compiled)

    def match(self, line: str) -> re.Match | None:
        return self._compiled.match(line)


@dataclass(frozen=True)
class ParsedLine:
    text: str
    speaker: SpeakerRole | None = None
    ordinal: int | None = None
    justification: str | None = None
    rung: int = 1

    def __post_init__(self):
        if not self.text:
            raise ValueError("parsed line has empty text")


_SPEAKER_WORD = re.compile(r"\b(doctor|patient)\b", re.IGNORECASE)


def extract_speaker(label_text: str) -> SpeakerRole:
    """Lenient role recognition inside a captured label.

    "(Doctor)", "[patient]" and bare "doctor" all resolve; anything else
    is Unknown.
    """
    match = _SPEAKER_WORD.search(label_text)
    if not match:
        return SpeakerRole.UNKNOWN
    return SpeakerRole(match.group(1).lower())


def _pattern(stage: Stage, rung: int, pattern: str, **captures: str) -> ExtractionPattern:
    return ExtractionPattern(stage, rung, pattern, captures)


_JUSTIFICATION = r"^\s*Justification\s*:\s*(?P<justification>.*)$"
_BARE_LINE = (
    r"^\s*(?:(?P<ordinal>\d+)[.)]\s*)?"
    r"(?P<speaker>doctor|patient|unknown)\s*:\s*(?P<text>.*)$"
)

DEFAULT_PATTERNS: dict[Stage, tuple[ExtractionPattern, ...]] = {
    Stage.DIARIZATION: (
        _pattern(
            Stage.DIARIZATION, 1,
            r"^\s*Sentence\s*#?\s*(?P<ordinal>\d+)?\s*:\s*(?P<text>.*)$",
            ordinal="ordinal", text="text",
        ),
        _pattern(Stage.DIARIZATION, 1, _JUSTIFICATION, justification="justification"),
        _pattern(
            Stage.DIARIZATION, 1,
            r"^\s*Label\s*:\s*Speaker\s*\(\s*(?P<speaker>[^)]*)\s*\)\s*\.?\s*$",
            speaker="speaker",
        ),
        _pattern(
            Stage.DIARIZATION, 3,
            r"^\s*Label\s*:\s*Speaker\s*[\[\(]?\s*(?P<speaker>[^\]\)]*?)\s*[\]\)]?\s*\.?\s*$",
            speaker="speaker",
        ),
        _pattern(
            Stage.DIARIZATION, 3,
            r"^\s*(?:(?P<ordinal>\d+)[.)]\s*)?Speaker\s*[\(\[]\s*(?P<speaker>[^\)\]]*)\s*[\)\]]\s*:?\s*(?P<text>.*)$",
            ordinal="ordinal", speaker="speaker", text="text",
        ),
        _pattern(Stage.DIARIZATION, 4, _BARE_LINE, ordinal="ordinal", speaker="speaker", text="text"),
    ),
    Stage.PUNCTUATION: (
        _pattern(
            Stage.PUNCTUATION, 1,
            r"^\s*Punctuated\s+Sentence\s*#?\s*(?P<ordinal>\d+)?\s*:\s*(?P<text>.*)$",
            ordinal="ordinal", text="text",
        ),
        _pattern(
            Stage.PUNCTUATION, 2,
            r"^\s*(?P<ordinal>\d+)[.)]\s*Punctuated\s+Sentence\s*:\s*(?P<text>.*)$",
            ordinal="ordinal", text="text",
        ),
        _pattern(Stage.PUNCTUATION, 2, _JUSTIFICATION, justification="justification"),
        _pattern(
            Stage.PUNCTUATION, 3,
            r"^\s*Sentence\s*#?\s*(?P<ordinal>\d+)?\s*:\s*(?P<text>.*)$",
            ordinal="ordinal", text="text",
        ),
        _pattern(Stage.PUNCTUATION, 4, _BARE_LINE, ordinal="ordinal", speaker="speaker", text="text"),
    ),
    Stage.CORRECTION: (
        _pattern(
            Stage.CORRECTION, 1,
            r"^\s*Corrected\s+Sentence\s*#?\s*(?P<ordinal>\d+)?\s*:\s*(?P<text>.*)$",
            ordinal="ordinal", text="text",
        ),
        _pattern(
            Stage.CORRECTION, 2,
            r"^\s*(?P<ordinal>\d+)[.)]\s*Corrected\s+Sentence\s*:\s*(?P<text>.*)$",
            ordinal="ordinal", text="text",
        ),
        _pattern(Stage.CORRECTION, 2, _JUSTIFICATION, justification="justification"),
        _pattern(
            Stage.CORRECTION, 3,
            r"^\s*Sentence\s*#?\s*(?P<ordinal>\d+)?\s*:\s*(?P<text>.*)$",
            ordinal="ordinal", text="text",
        ),
        _pattern(Stage.CORRECTION, 4, _BARE_LINE, ordinal="ordinal", speaker="speaker", text="text"),
    ),
    Stage.ZERO_SHOT: (
        _pattern(
            Stage.ZERO_SHOT, 1,
            r"^\s*(?P<ordinal>\d+)[.)]\s*Speaker\s*\(\s*(?P<speaker>[^)]*)\s*\)\s*:?\s*(?P<text>.*)$",
            ordinal="ordinal", speaker="speaker", text="text",
        ),
        _pattern(
            Stage.ZERO_SHOT, 2,
            r"^\s*Speaker\s*\(\s*(?P<speaker>[^)]*)\s*\)\s*:?\s*(?P<text>.*)$",
            speaker="speaker", text="text",
        ),
        _pattern(
            Stage.ZERO_SHOT, 3,
            r"^\s*(?:(?P<ordinal>\d+)[.)]\s*)?Speaker\s*[\(\[]?\s*(?P<speaker>[A-Za-z][A-Za-z ]*?)\s*[\)\]]?\s*:\s*(?P<text>.*)$",
            ordinal="ordinal", speaker="speaker", text="text",
        ),
        _pattern(Stage.ZERO_SHOT, 4, _BARE_LINE, ordinal="ordinal", speaker="speaker", text="text"),
    ),
}


def patterns_from_file(path) -> dict[Stage, tuple[ExtractionPattern, ...]]:
    """Load per-stage pattern overrides from JSON.

    Shape: ``{"diarization": [{"rung": 1, "pattern": "...", "captures":
    {"group": "field"}}], ...}``. Stages absent from the file keep their
    defaults.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise PatternError(f"cannot load patterns from {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise PatternError(f"pattern file {path} must be a JSON object")
    out = dict(DEFAULT_PATTERNS)
    for stage_name, entries in raw.items():
        stage = Stage(stage_name)
        patterns = []
        for entry in entries:
            patterns.append(
                ExtractionPattern(
                    stage,
                    int(entry.get("rung", 1)),
                    entry["pattern"],
                    entry.get("captures", {}),
                )
            )
        patterns.sort(key=lambda p: p.rung)
        out[stage] = tuple(patterns)
    return out


class _Pending:
    __slots__ = ("text", "speaker_text", "ordinal", "justification", "rung",
                 "accepting_text")

    def __init__(self, text: str, rung: int):
        self.text = text
        self.speaker_text: str | None = None
        self.ordinal: int | None = None
        self.justification: str | None = None
        self.rung = rung
        self.accepting_text = True


_WRAPPED = re.compile(r"^\[(.*)\]$", re.DOTALL)
_ROLE_PREFIX = re.compile(r"^(doctor|patient|unknown)\s*:\s*(.+)$", re.IGNORECASE | re.DOTALL)


def _unwrap(text: str) -> str:
    match = _WRAPPED.match(text.strip())
    return match.group(1).strip() if match else text.strip()


def _flush(pending: _Pending | None, out: list[ParsedLine], stage: Stage) -> None:
    if pending is None:
        return
    text = _unwrap(pending.text)
    speaker_text = pending.speaker_text
    if speaker_text is None:
        prefixed = _ROLE_PREFIX.match(text)
        if prefixed:
            speaker_text = prefixed.group(1)
            text = prefixed.group(2).strip()
    if not text:
        return
    rung = pending.rung
    if stage is Stage.DIARIZATION and rung == 1 and (
        pending.justification is None or pending.ordinal is None
    ):
        rung = 2
    out.append(
        ParsedLine(
            text=text,
            speaker=extract_speaker(speaker_text) if speaker_text is not None else None,
            ordinal=pending.ordinal,
            justification=(
                _unwrap(pending.justification) or None
                if pending.justification is not None
                else None
            ),
            rung=rung,
        )
    )


def extract(
    raw: str,
    stage: Stage,
    patterns: Sequence[ExtractionPattern] | None = None,
) -> list[ParsedLine]:
    """Pull structured lines out of a raw model response.

    Lines are matched against the stage's patterns, strictest first.
    Unmatched lines join an open sentence body (wrapping tolerance) until
    a blank line or an attaching marker closes it; unmatched lines with
    nothing open, such as lead-in prose, are skipped. Never raises on
    arbitrary input; an unparseable response yields an empty list.
    """
    if patterns is None:
        patterns = DEFAULT_PATTERNS[stage]
    out: list[ParsedLine] = []
    pending: _Pending | None = None
    for line in raw.splitlines():
        if not line.strip():
            if pending is not None:
                pending.accepting_text = False
            continue
        hit = None
        for pattern in patterns:
            match = pattern.match(line)
            if match:
                hit = (pattern, match)
                break
        if hit is None:
            if pending is not None and pending.accepting_text:
                pending.text += " " + line.strip()
            continue
        pattern, match = hit
        values: dict[str, str] = {}
        for group, target in pattern.captures.items():
            captured = match.group(group)
            if captured is not None:
                values[target] = captured
        if "text" in values:
            _flush(pending, out, stage)
            pending = _Pending(values["text"].strip(), pattern.rung)
            if "ordinal" in values:
                pending.ordinal = int(values["ordinal"])
            if "speaker" in values:
                pending.speaker_text = values["speaker"]
        elif pending is not None:
            if "justification" in values and pending.justification is None:
                pending.justification = values["justification"].strip()
                pending.rung = max(pending.rung, pattern.rung)
                pending.accepting_text = False
            if "speaker" in values and pending.speaker_text is None:
                pending.speaker_text = values["speaker"]
                pending.rung = max(pending.rung, pattern.rung)
                pending.accepting_text = False
    _flush(pending, out, stage)
    return out


def render_block(
    stage: Stage,
    lines: Iterable[tuple[SpeakerRole | None, str]],
    justifications: Sequence[str] | None = None,
) -> str:
    """Render lines in a stage's expected output format.

    The inverse of extract for well-formed content; used by the scripted
    echo backend and by round-trip tests.
    """
    rendered: list[str] = []
    for i, (speaker, text) in enumerate(lines, start=1):
        labeled = (
            f"{speaker.label}: {text}"
            if speaker is not None and speaker is not SpeakerRole.UNKNOWN
            else text
        )
        if stage is Stage.PUNCTUATION:
            rendered.append(f"Punctuated Sentence {i}: [{labeled}]")
        elif stage is Stage.CORRECTION:
            rendered.append(f"Corrected Sentence {i}: [{labeled}]")
        elif stage is Stage.DIARIZATION:
            label = speaker.label if speaker is not None else "Unknown"
            justification = (
                justifications[i - 1]
                if justifications is not None and i - 1 < len(justifications)
                else "speech content and tone"
            )
            rendered.append(
                f"Sentence {i}: [{text}]\n"
                f"Justification: [{justification}]\n"
                f"Label: Speaker ({label})"
            )
        else:
            label = speaker.label if speaker is not None else "Unknown"
            rendered.append(f"{i}. Speaker ({label}): [{text}]")
    return "\n\n".join(rendered)

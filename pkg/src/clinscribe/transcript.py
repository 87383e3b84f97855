"""Transcript domain model, the two on-disk formats, and a synthetic error injector.

A transcript is an ordered sequence of speaker-labeled turns. Two file formats
are supported:

* JSONL: one object per line, ``{"speaker": "doctor"|"patient"|"unknown",
  "text": "..."}``, UTF-8, LF line endings.
* Plain text: ``Doctor: ...`` / ``Patient: ...`` / ``Unknown: ...``, one turn
  per line. The speaker label ends at the first colon; the text may contain
  further colons.
"""

from __future__ import annotations

import enum
import json
import random
import re
from dataclasses import dataclass


class TranscriptError(ValueError):
    """Base class for transcript construction and parsing failures."""


class EmptyTranscriptError(TranscriptError):
    """Raised for empty input files and attempts to serialize zero turns."""


class TranscriptParseError(TranscriptError):
    def __init__(self, message: str, line_number: int | None = None, line: str = ""):
        detail = message
        if line_number is not None:
            detail = f"line {line_number}: {message}"
        if line:
            detail = f"{detail}: {line!r}"
        super().__init__(detail)
        self.line_number = line_number
        self.line = line


class UnknownSpeakerLabelError(TranscriptParseError):
    """A speaker label outside the closed Doctor/Patient/Unknown set."""


class SpeakerRole(enum.Enum):
    DOCTOR = "doctor"
    PATIENT = "patient"
    UNKNOWN = "unknown"

    @classmethod
    def from_label(cls, label: str, line_number: int | None = None) -> "SpeakerRole":
        """Parse a role label strictly; anything outside the enumeration fails."""
        try:
            return cls(label.strip().lower())
        except ValueError:
            raise UnknownSpeakerLabelError(
                f"unknown speaker label {label.strip()!r}", line_number
            ) from None

    def opposite(self) -> "SpeakerRole":
        if self is SpeakerRole.DOCTOR:
            return SpeakerRole.PATIENT
        if self is SpeakerRole.PATIENT:
            return SpeakerRole.DOCTOR
        return self

    @property
    def label(self) -> str:
        """Display form used in the plain-text format, e.g. ``"Doctor"``."""
        return self.value.capitalize()


class TranscriptKind(enum.Enum):
    REFERENCE = "reference"
    HYPOTHESIS = "hypothesis"


class TranscriptFormat(enum.Enum):
    JSONL = "jsonl"
    PLAIN_TEXT = "text"


@dataclass(frozen=True)
class Turn:
    speaker: SpeakerRole
    text: str
    index: int

    def __post_init__(self):
        stripped = self.text.strip()
        if not stripped:
            raise TranscriptError(f"turn {self.index}: text is empty")
        object.__setattr__(self, "text", stripped)
        if self.index < 0:
            raise TranscriptError(f"turn index {self.index} is negative")


@dataclass(frozen=True)
class Transcript:
    id: str
    turns: tuple[Turn, ...]
    kind: TranscriptKind = TranscriptKind.HYPOTHESIS

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        if not self.id:
            raise TranscriptError("transcript id is empty")
        for expected, turn in enumerate(self.turns):
            if turn.index != expected:
                raise TranscriptError(
                    f"transcript {self.id}: turn indices not contiguous "
                    f"(got {turn.index}, expected {expected})"
                )
            if (
                self.kind is TranscriptKind.REFERENCE
                and turn.speaker is SpeakerRole.UNKNOWN
            ):
                raise TranscriptError(
                    f"transcript {self.id}: reference turn {turn.index} "
                    "has an unknown speaker"
                )

    @classmethod
    def from_pairs(
        cls,
        transcript_id: str,
        pairs: list[tuple[SpeakerRole, str]],
        kind: TranscriptKind = TranscriptKind.HYPOTHESIS,
    ) -> "Transcript":
        turns = tuple(
            Turn(speaker, text, i) for i, (speaker, text) in enumerate(pairs)
        )
        return cls(transcript_id, turns, kind)

    def word_count(self) -> int:
        return sum(len(t.text.split()) for t in self.turns)


_PLAIN_LINE = re.compile(r"^(?P<speaker>[^:]+):(?P<text>.*)$")


def parse_transcript(
    raw: bytes | str,
    fmt: TranscriptFormat,
    *,
    transcript_id: str = "transcript",
    kind: TranscriptKind = TranscriptKind.HYPOTHESIS,
) -> Transcript:
    """Parse a transcript file body.

    Blank lines are skipped. Malformed lines raise TranscriptParseError with
    the 1-based line number and the offending content; an empty file raises
    EmptyTranscriptError.
    """
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TranscriptParseError(f"not valid UTF-8: {exc}") from exc
    else:
        text = raw

    pairs: list[tuple[SpeakerRole, str]] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if fmt is TranscriptFormat.JSONL:
            pairs.append(_parse_jsonl_line(line, line_number))
        else:
            pairs.append(_parse_plain_line(line, line_number))

    if not pairs:
        raise EmptyTranscriptError(f"transcript {transcript_id!r} has no turns")
    return Transcript.from_pairs(transcript_id, pairs, kind)


def _parse_jsonl_line(line: str, line_number: int) -> tuple[SpeakerRole, str]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TranscriptParseError(f"invalid JSON ({exc.msg})", line_number, line)
    if not isinstance(obj, dict) or "speaker" not in obj or "text" not in obj:
        raise TranscriptParseError(
            "expected an object with 'speaker' and 'text' fields", line_number, line
        )
    speaker = SpeakerRole.from_label(str(obj["speaker"]), line_number)
    text = str(obj["text"])
    if not text.strip():
        raise TranscriptParseError("turn text is empty", line_number, line)
    return speaker, text


def _parse_plain_line(line: str, line_number: int) -> tuple[SpeakerRole, str]:
    match = _PLAIN_LINE.match(line)
    if not match:
        raise TranscriptParseError(
            "expected 'Speaker: text'", line_number, line
        )
    speaker = SpeakerRole.from_label(match.group("speaker"), line_number)
    text = match.group("text").strip()
    if not text:
        raise TranscriptParseError("turn text is empty", line_number, line)
    return speaker, text


def serialize_transcript(t: Transcript, fmt: TranscriptFormat) -> bytes:
    """Serialize a transcript; round-trips through parse_transcript."""
    if not t.turns:
        raise EmptyTranscriptError(f"transcript {t.id!r} has no turns to write")
    lines = []
    for turn in t.turns:
        if fmt is TranscriptFormat.JSONL:
            lines.append(
                json.dumps(
                    {"speaker": turn.speaker.value, "text": turn.text},
                    ensure_ascii=False,
                )
            )
        else:
            lines.append(f"{turn.speaker.label}: {turn.text}")
    return ("\n".join(lines) + "\n").encode("utf-8")


@dataclass(frozen=True)
class ErrorInjectionSpec:
    """Rates for the synthetic corruption used to build test fixtures."""

    substitution_rate: float = 0.0
    deletion_rate: float = 0.0
    insertion_rate: float = 0.0
    strip_punctuation: bool = False
    scramble_speakers_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("substitution_rate", "deletion_rate", "insertion_rate",
                     "scramble_speakers_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        total = self.substitution_rate + self.deletion_rate + self.insertion_rate
        if total > 1.0:
            raise ValueError(
                f"substitution + deletion + insertion rates exceed 1 ({total})"
            )
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


_PUNCT_STRIP = re.compile(r"[!\"#$%&()*+,./:;<=>?@\[\]^_`{|}~-]+")


def inject_errors(
    t: Transcript,
    spec: ErrorInjectionSpec,
    vocabulary: list[str] | tuple[str, ...] = (),
) -> Transcript:
    """Corrupt a transcript deterministically.

    Each word is independently substituted or deleted at the configured
    rates (one uniform draw per word picks among substitute/delete/keep);
    a second draw inserts a vocabulary word after it. A fraction of turns
    gets the opposite speaker role. Turns whose text empties are dropped
    and the remaining indices are recompacted. Identical arguments always
    produce identical output.
    """
    if (spec.substitution_rate > 0 or spec.insertion_rate > 0) and not vocabulary:
        raise ValueError("vocabulary required when substituting or inserting")

    rng = random.Random(spec.seed)
    pairs: list[tuple[SpeakerRole, str]] = []
    for turn in t.turns:
        text = turn.text
        changed = False
        if spec.strip_punctuation:
            stripped = _PUNCT_STRIP.sub(" ", text)
            changed = stripped != text
            text = stripped
        words_out: list[str] = []
        for word in text.split():
            draw = rng.random()
            if draw < spec.substitution_rate:
                words_out.append(rng.choice(vocabulary))
                changed = True
            elif draw < spec.substitution_rate + spec.deletion_rate:
                changed = True
            else:
                words_out.append(word)
            if spec.insertion_rate > 0 and rng.random() < spec.insertion_rate:
                words_out.append(rng.choice(vocabulary))
                changed = True
        speaker = turn.speaker
        if spec.scramble_speakers_rate > 0 and rng.random() < spec.scramble_speakers_rate:
            speaker = speaker.opposite()
        new_text = " ".join(words_out) if changed else turn.text
        if new_text.strip():
            pairs.append((speaker, new_text))
    return Transcript.from_pairs(t.id, pairs, t.kind)

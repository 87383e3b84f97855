"""Word error rate metrics and their aggregation.

All scores share the same definition: (substitutions + deletions +
insertions) / reference length, computed over normalized tokens.

* ``wer`` counts every word; N is the reference word count.
* ``speaker_wer`` scores only the dialogue attributed to one speaker on
  each side, so misattributed words surface as insertions or deletions.
  Salutation phrases are stripped before scoring.
* ``mc_wer`` counts medical concepts; N is the number of reference
  concepts, a multi-word concept being one unit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .align import EditOp, EditOpKind, global_align
from .concepts import ConceptAnnotation, ConceptAnnotator, ConceptCategory
from .normalize import NormalizationConfig, normalize
from .transcript import SpeakerRole, Transcript


class EmptyReferenceError(ValueError):
    """The reference side has nothing scoreable."""


@dataclass(frozen=True)
class WerScore:
    substitutions: int
    deletions: int
    insertions: int
    ref_words: int

    def __post_init__(self):
        if self.ref_words <= 0:
            raise ValueError("reference length must be positive")
        for name in ("substitutions", "deletions", "insertions"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} is negative")

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return self.errors / self.ref_words


def wer(
    hyp_text: str,
    ref_text: str,
    config: NormalizationConfig | None = None,
) -> WerScore:
    """General word error rate between two raw texts.

    May exceed 1.0 when insertions dominate. An empty normalized reference
    raises EmptyReferenceError.
    """
    ref_tokens = normalize(ref_text, config)
    if not ref_tokens:
        raise EmptyReferenceError("reference text normalizes to nothing")
    hyp_tokens = normalize(hyp_text, config)
    alignment = global_align(hyp_tokens, ref_tokens)
    return WerScore(
        alignment.substitutions,
        alignment.deletions,
        alignment.insertions,
        len(ref_tokens),
    )


DEFAULT_SALUTATIONS = (
    "hello",
    "hi",
    "good morning",
    "good afternoon",
    "good evening",
    "goodbye",
    "bye bye",
    "bye",
    "take care",
)


@lru_cache(maxsize=16)
def _salutation_patterns(phrases: tuple[str, ...]) -> tuple[re.Pattern, re.Pattern]:
    ordered = sorted(phrases, key=len, reverse=True)
    alternation = "|".join(
        r"\s+".join(re.escape(word) for word in p.split()) for p in ordered
    )
    start = re.compile(rf"^\W*(?:{alternation})(?:\W+|$)", re.IGNORECASE)
    end = re.compile(rf"(?:^|\W+)(?:{alternation})\W*$", re.IGNORECASE)
    return start, end


def strip_salutations(
    text: str, phrases: Sequence[str] = DEFAULT_SALUTATIONS
) -> str:
    """Remove salutation phrases from the start and end of a turn.

    Whole-phrase, case-insensitive matching on the raw text; repeated until
    nothing more matches (handles "Hello, hi there").
    """
    if not phrases:
        return text
    start, end = _salutation_patterns(tuple(phrases))
    while True:
        trimmed = start.sub("", text, count=1).strip()
        trimmed = end.sub("", trimmed, count=1).strip()
        if trimmed == text:
            return trimmed
        text = trimmed


def speaker_wer(
    hyp: Transcript,
    ref: Transcript,
    role: SpeakerRole,
    salutations: Sequence[str] = DEFAULT_SALUTATIONS,
    config: NormalizationConfig | None = None,
) -> WerScore:
    """WER over the dialogue attributed to one speaker on each side.

    Turn texts for the role are salutation-stripped, concatenated in turn
    order, and scored as one pair. Words the hypothesis attributes to the
    wrong speaker therefore count as insertions on that speaker's score
    and deletions on the correct speaker's score.
    """
    hyp_part = " ".join(
        stripped
        for t in hyp.turns
        if t.speaker is role
        for stripped in (strip_salutations(t.text, salutations),)
        if stripped
    )
    ref_part = " ".join(
        stripped
        for t in ref.turns
        if t.speaker is role
        for stripped in (strip_salutations(t.text, salutations),)
        if stripped
    )
    try:
        return wer(hyp_part, ref_part, config)
    except EmptyReferenceError:
        raise EmptyReferenceError(
            f"reference has no scoreable {role.value} dialogue"
        ) from None


@dataclass(frozen=True)
class ConceptErrorRecord:
    """One concept-level error.

    Substitute carries both surfaces, Delete only the reference surface,
    Insert only the hypothesis surface. The category comes from the
    reference concept for Substitute/Delete and from the hypothesis
    concept for Insert.
    """

    kind: EditOpKind
    category: ConceptCategory
    ref_surface: tuple[str, ...] | None = None
    hyp_surface: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind is EditOpKind.SUBSTITUTE:
            ok = self.ref_surface is not None and self.hyp_surface is not None
        elif self.kind is EditOpKind.DELETE:
            ok = self.ref_surface is not None and self.hyp_surface is None
        elif self.kind is EditOpKind.INSERT:
            ok = self.ref_surface is None and self.hyp_surface is not None
        else:
            ok = False
        if not ok:
            raise ValueError(f"surfaces inconsistent with {self.kind}")


def mc_wer(
    hyp_text: str,
    ref_text: str,
    annotator: ConceptAnnotator,
    config: NormalizationConfig | None = None,
) -> tuple[WerScore, list[ConceptErrorRecord]]:
    """Medical concept WER.

    Both sides are normalized and annotated, the full token sequences are
    globally aligned, and the alignment is projected onto concept spans. A
    reference concept counts as one Match when every covered position is a
    token match, as one Substitute when any covered position was
    substituted, otherwise as one Delete. A hypothesis concept whose span
    is entirely inserted tokens counts as one Insert; a hypothesis concept
    sitting on a substitution is already counted from the reference side
    and is not counted again. N is the reference concept count.
    """
    hyp_tokens = normalize(hyp_text, config)
    ref_tokens = normalize(ref_text, config)
    ref_concepts = annotator.annotate(ref_tokens)
    if not ref_concepts:
        raise EmptyReferenceError("reference contains no annotated concepts")
    hyp_concepts = annotator.annotate(hyp_tokens)

    alignment = global_align(hyp_tokens, ref_tokens)
    op_at_ref: dict[int, EditOp] = {}
    op_at_hyp: dict[int, EditOp] = {}
    for op in alignment.ops:
        if op.ref_index is not None:
            op_at_ref[op.ref_index] = op
        if op.hyp_index is not None:
            op_at_hyp[op.hyp_index] = op

    records: list[ConceptErrorRecord] = []
    substitutions = deletions = 0
    for concept in ref_concepts:
        ops = [op_at_ref[j] for j in range(*concept.span)]
        if all(op.kind is EditOpKind.MATCH for op in ops):
            continue
        if any(op.kind is EditOpKind.SUBSTITUTE for op in ops):
            hyp_surface = tuple(
                hyp_tokens[op.hyp_index]
                for op in ops
                if op.hyp_index is not None
            )
            records.append(
                ConceptErrorRecord(
                    EditOpKind.SUBSTITUTE,
                    concept.category,
                    ref_surface=concept.surface,
                    hyp_surface=hyp_surface,
                )
            )
            substitutions += 1
        else:
            records.append(
                ConceptErrorRecord(
                    EditOpKind.DELETE,
                    concept.category,
                    ref_surface=concept.surface,
                )
            )
            deletions += 1

    insertions = 0
    for concept in hyp_concepts:
        ops = [op_at_hyp[i] for i in range(*concept.span)]
        if ops and all(op.kind is EditOpKind.INSERT for op in ops):
            records.append(
                ConceptErrorRecord(
                    EditOpKind.INSERT,
                    concept.category,
                    hyp_surface=concept.surface,
                )
            )
            insertions += 1

    score = WerScore(substitutions, deletions, insertions, len(ref_concepts))
    return score, records


@dataclass
class TaxonomyMatrix:
    """Concept error counts keyed by (category, error kind)."""

    counts: dict[tuple[ConceptCategory, EditOpKind], int] = field(
        default_factory=dict
    )

    def increment(self, category: ConceptCategory, kind: EditOpKind) -> None:
        key = (category, kind)
        self.counts[key] = self.counts.get(key, 0) + 1

    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict[str, dict[str, int]]:
        """Nested {category label: {error kind: count}} with sorted keys."""
        out: dict[str, dict[str, int]] = {}
        for (category, kind), count in self.counts.items():
            out.setdefault(category.label, {})[kind.value] = count
        return {
            label: dict(sorted(kinds.items()))
            for label, kinds in sorted(out.items())
        }


def taxonomy(
    records: Iterable[ConceptErrorRecord],
    ref_annotations: Iterable[ConceptAnnotation] = (),
) -> TaxonomyMatrix:
    """Tabulate concept errors by category and kind.

    Categories seen in the reference annotations are pre-seeded with zero
    rows so downstream heatmaps keep stable axes.
    """
    matrix = TaxonomyMatrix()
    for annotation in ref_annotations:
        for kind in (EditOpKind.SUBSTITUTE, EditOpKind.DELETE, EditOpKind.INSERT):
            matrix.counts.setdefault((annotation.category, kind), 0)
    for record in records:
        matrix.increment(record.category, record.kind)
    return matrix


@dataclass(frozen=True)
class AggregateStat:
    """Mean and population standard deviation over per-transcript scores."""

    mean: float
    std: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sample count must be at least 1")
        if self.std < 0:
            raise ValueError("standard deviation is negative")


def aggregate(values: Sequence[float]) -> AggregateStat:
    """Arithmetic mean and population standard deviation."""
    if not values:
        raise ValueError("cannot aggregate an empty sample")
    n = len(values)
    mean = math.fsum(values) / n
    variance = math.fsum((v - mean) ** 2 for v in values) / n
    return AggregateStat(mean=mean, std=math.sqrt(variance), n=n)

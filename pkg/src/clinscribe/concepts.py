"""Medical concept annotation over normalized token sequences.

Two annotators share one output shape: an offline gazetteer backed by a
term lexicon (greedy longest match, left to right), and a client for an
external annotation service. Both return non-overlapping annotations
sorted by span start.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Protocol

from .align import smith_waterman
from .normalize import NormalizationConfig, TokenSequence, normalize
from .service import SchemaMismatchError, ServiceEndpoint, post_json


@dataclass(frozen=True, eq=False)
class ConceptCategory:
    """A knowledge category; comparison is case-insensitive on the label.

    Labels outside the known set are carried verbatim (the service may
    report vendor-specific categories).
    """

    label: str

    def __post_init__(self):
        if not self.label or not self.label.strip():
            raise ValueError("category label is empty")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConceptCategory):
            return NotImplemented
        return self.label.casefold() == other.label.casefold()

    def __hash__(self) -> int:
        return hash(self.label.casefold())

    @property
    def is_known(self) -> bool:
        return self.label.casefold() in _KNOWN_LABELS


ANATOMICAL_STRUCTURE = ConceptCategory("anatomical_structure")
MEDICINE = ConceptCategory("medicine")
PROCEDURE = ConceptCategory("procedure")
LABORATORY_DATA = ConceptCategory("laboratory_data")
MEDICAL_CONDITION = ConceptCategory("medical_condition")
BODY_FUNCTION = ConceptCategory("body_function")
BODY_MEASUREMENT = ConceptCategory("body_measurement")
MEDICAL_DEVICE = ConceptCategory("medical_device")
SEVERITY = ConceptCategory("severity")

KNOWN_CATEGORIES = (
    ANATOMICAL_STRUCTURE,
    MEDICINE,
    PROCEDURE,
    LABORATORY_DATA,
    MEDICAL_CONDITION,
    BODY_FUNCTION,
    BODY_MEASUREMENT,
    MEDICAL_DEVICE,
    SEVERITY,
)
_KNOWN_LABELS = frozenset(c.label for c in KNOWN_CATEGORIES)


def category_from_name(name: str) -> ConceptCategory:
    """Map a category name onto the known set, or carry it verbatim."""
    canonical = name.strip().lower().replace(" ", "_").replace("-", "_")
    if canonical in _KNOWN_LABELS:
        return ConceptCategory(canonical)
    return ConceptCategory(name.strip())


@dataclass(frozen=True)
class ConceptAnnotation:
    span: tuple[int, int]
    surface: tuple[str, ...]
    category: ConceptCategory
    vocabulary_code: str | None = None

    def __post_init__(self):
        start, end = self.span
        if not 0 <= start < end:
            raise ValueError(f"empty or invalid span {self.span}")
        if len(self.surface) != end - start:
            raise ValueError("surface length does not match span")


class ConceptAnnotator(Protocol):
    def annotate(self, tokens: TokenSequence) -> list[ConceptAnnotation]: ...


class LexiconError(ValueError):
    """Unreadable or malformed lexicon file."""


class ConceptLexicon:
    """Term-to-category gazetteer keyed on normalized token tuples."""

    def __init__(
        self,
        entries: Mapping[str, str | ConceptCategory],
        config: NormalizationConfig | None = None,
    ):
        self._by_first: dict[str, list[tuple[tuple[str, ...], ConceptCategory]]] = {}
        self.max_term_len = 0
        count = 0
        for term, category in entries.items():
            tokens = tuple(normalize(term, config))
            if not tokens:
                continue
            if not isinstance(category, ConceptCategory):
                category = category_from_name(str(category))
            bucket = self._by_first.setdefault(tokens[0], [])
            if any(existing == tokens for existing, _ in bucket):
                continue
            bucket.append((tokens, category))
            self.max_term_len = max(self.max_term_len, len(tokens))
            count += 1
        for bucket in self._by_first.values():
            bucket.sort(key=lambda item: (-len(item[0]), item[0]))
        self._size = count

    def __len__(self) -> int:
        return self._size

    def lookup(self, term_tokens: tuple[str, ...]) -> ConceptCategory | None:
        for tokens, category in self._by_first.get(term_tokens[0], ()):
            if tokens == term_tokens:
                return category
        return None

    def annotate(self, tokens: TokenSequence) -> list[ConceptAnnotation]:
        """Greedy longest-match scan, left to right; deterministic."""
        out: list[ConceptAnnotation] = []
        i = 0
        n = len(tokens)
        while i < n:
            matched = False
            for term, category in self._by_first.get(tokens[i], ()):
                length = len(term)
                if i + length <= n and tuple(tokens[i : i + length]) == term:
                    out.append(
                        ConceptAnnotation((i, i + length), term, category)
                    )
                    i += length
                    matched = True
                    break
            if not matched:
                i += 1
        return out


def lexicon_from_file(path, config: NormalizationConfig | None = None) -> ConceptLexicon:
    """Load a JSON object mapping term to category name."""
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise LexiconError(f"cannot read lexicon {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise LexiconError(
            f"invalid JSON in lexicon {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise LexiconError(f"lexicon {path} must be a JSON object")
    return ConceptLexicon(raw, config)


def default_lexicon() -> ConceptLexicon:
    """The bundled starter lexicon of primary-care terms."""
    data = resources.files("clinscribe.data").joinpath("medical_lexicon.json")
    return ConceptLexicon(json.loads(data.read_text(encoding="utf-8")))


class ExternalAnnotator:
    """Client for the generic annotation service contract.

    Request: ``POST {"text": string}``. Response: ``{"entities": [{"text":
    string, "category": string, "code": string?}]}``. Reported mentions are
    mapped back onto the token sequence by local alignment of their
    normalized surface text; mentions that cannot be fully matched are
    dropped and counted on ``dropped_mentions``.
    """

    def __init__(
        self,
        endpoint: ServiceEndpoint,
        category_map: Mapping[str, str] | None = None,
        config: NormalizationConfig | None = None,
    ):
        self.endpoint = endpoint
        self.category_map = dict(category_map or {})
        self.config = config
        self.dropped_mentions = 0
        self._lock = threading.Lock()

    def annotate(self, tokens: TokenSequence) -> list[ConceptAnnotation]:
        body = post_json(self.endpoint, {"text": " ".join(tokens)})
        entities = body.get("entities")
        if not isinstance(entities, list):
            raise SchemaMismatchError(
                f"{self.endpoint.url}: response has no 'entities' list"
            )
        located: list[ConceptAnnotation] = []
        dropped = 0
        for entity in entities:
            if not isinstance(entity, dict) or "text" not in entity:
                raise SchemaMismatchError(
                    f"{self.endpoint.url}: entity without 'text': {entity!r}"
                )
            mention = normalize(str(entity["text"]), self.config)
            span = _locate(mention, tokens)
            if span is None:
                dropped += 1
                continue
            raw_category = str(entity.get("category", "") or "unknown")
            category = category_from_name(
                self.category_map.get(raw_category, raw_category)
            )
            code = entity.get("code")
            located.append(
                ConceptAnnotation(
                    span,
                    tuple(tokens[span[0] : span[1]]),
                    category,
                    vocabulary_code=str(code) if code is not None else None,
                )
            )
        located.sort(key=lambda a: (a.span, a.category.label))
        annotations: list[ConceptAnnotation] = []
        taken_until = 0
        for annotation in located:
            if annotation.span[0] < taken_until:
                dropped += 1
                continue
            annotations.append(annotation)
            taken_until = annotation.span[1]
        if dropped:
            with self._lock:
                self.dropped_mentions += dropped
        return annotations


def _locate(mention: TokenSequence, tokens: TokenSequence) -> tuple[int, int] | None:
    """Find a mention as a contiguous fully-matching span, or None."""
    if not mention:
        return None
    alignment = smith_waterman(mention, tokens)
    full = 2 * len(mention)
    if alignment.score != full:
        return None
    return alignment.ref_span

"""Text standardization applied to both sides before any word error metric.

The pipeline runs five steps in a fixed order:

1. numerals to written words ("89" becomes "eighty-nine")
2. hyphen splitting ("eighty-nine" becomes "eighty nine")
3. punctuation and case normalization (ASCII letters, digits and intra-word
   apostrophes survive; everything else becomes a space; lowercased)
4. spelling normalization (British forms mapped to American)
5. disfluency removal ("umm", "uhh", "ahh", ...)

Numerals run first so a reference that spelled a number out compares equal,
and disfluency removal runs last so it sees final lowercase tokens. The
output is a list of tokens drawn from [a-z0-9'] with no surrounding
apostrophes and nothing from the disfluency lexicon.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping

TokenSequence = list[str]

DEFAULT_DISFLUENCIES = frozenset(
    {"um", "umm", "uh", "uhh", "ah", "ahh", "er", "erm", "hmm", "mhm", "mm"}
)

_TOKEN_CHARS = re.compile(r"[a-z0-9']+")


class NormalizationWarning(UserWarning):
    """Lint warning for inputs the pipeline handles in a lossy way."""


class UnsupportedNumeralError(ValueError):
    def __init__(self, run: str, offset: int):
        super().__init__(
            f"digit run {run!r} at offset {offset} exceeds the supported "
            "range [0, 999999999]"
        )
        self.run = run
        self.offset = offset


class ConfigError(ValueError):
    """Invalid normalization configuration."""


@dataclass(frozen=True)
class NormalizationConfig:
    disfluency_lexicon: frozenset[str] = DEFAULT_DISFLUENCIES
    spelling_map: Mapping[str, str] = field(default_factory=dict)
    convert_numerals: bool = True
    split_hyphenated: bool = True
    strip_punctuation_and_case: bool = True
    normalize_spelling: bool = True
    remove_disfluencies: bool = True

    def __post_init__(self):
        object.__setattr__(self, "disfluency_lexicon", frozenset(self.disfluency_lexicon))
        object.__setattr__(self, "spelling_map", dict(self.spelling_map))
        for entry in self.disfluency_lexicon:
            if entry != entry.lower() or not _TOKEN_CHARS.fullmatch(entry):
                raise ConfigError(f"disfluency entry {entry!r} is not a lowercase token")
        for key, value in self.spelling_map.items():
            for word in (key, value):
                if not isinstance(word, str) or not word or word != word.lower() or " " in word:
                    raise ConfigError(f"spelling map entry {key!r} -> {value!r} is not a single lowercase word pair")
            if key == value:
                raise ConfigError(f"spelling map maps {key!r} to itself")


@lru_cache(maxsize=1)
def default_spelling_map() -> dict[str, str]:
    """The bundled British-to-American variant lexicon."""
    data = resources.files("clinscribe.data").joinpath("spelling_gb_us.json")
    return json.loads(data.read_text(encoding="utf-8"))


def default_config() -> NormalizationConfig:
    return NormalizationConfig(spelling_map=default_spelling_map())


def config_from_file(path) -> NormalizationConfig:
    """Load ``{"disfluencies": [...], "spelling_map": {...}}`` from JSON.

    Missing keys fall back to the bundled defaults.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load normalization config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"normalization config {path} must be a JSON object")
    disfluencies = raw.get("disfluencies")
    spelling = raw.get("spelling_map")
    return NormalizationConfig(
        disfluency_lexicon=(
            frozenset(disfluencies) if disfluencies is not None else DEFAULT_DISFLUENCIES
        ),
        spelling_map=spelling if spelling is not None else default_spelling_map(),
    )


_ONES = (
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
    "sixteen", "seventeen", "eighteen", "nineteen",
)
_TENS = (
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy",
    "eighty", "ninety",
)
_MAX_NUMERAL = 999_999_999


def number_to_words(n: int) -> str:
    """English written form of an integer in [0, 999999999].

    Tens-units compounds are hyphenated ("eighty-nine"); larger values use
    plain American phrasing without "and" ("one hundred one").
    """
    if not 0 <= n <= _MAX_NUMERAL:
        raise ValueError(f"{n} outside supported range [0, {_MAX_NUMERAL}]")
    if n < 20:
        return _ONES[n]
    if n < 100:
        tens, rem = divmod(n, 10)
        return _TENS[tens] + ("-" + _ONES[rem] if rem else "")
    if n < 1000:
        hundreds, rem = divmod(n, 100)
        head = _ONES[hundreds] + " hundred"
        return head + " " + number_to_words(rem) if rem else head
    for scale, name in ((1_000_000, "million"), (1_000, "thousand")):
        if n >= scale:
            head, rem = divmod(n, scale)
            out = number_to_words(head) + " " + name
            return out + " " + number_to_words(rem) if rem else out
    raise AssertionError("unreachable")


_DIGIT_RUN = re.compile(r"[0-9]+")
_DECIMAL_FORM = re.compile(r"[0-9]\.[0-9]")


def numerals_to_words(text: str) -> str:
    """Replace every maximal ASCII digit run with its written form.

    Runs whose value exceeds 999,999,999 raise UnsupportedNumeralError.
    Decimal forms like "1.5" convert digit run by digit run (the dot is
    punctuation and later becomes a space); they trigger a lint warning.
    """
    if _DECIMAL_FORM.search(text):
        warnings.warn(
            "decimal numeral converted digit-run by digit-run; the decimal "
            "point is treated as punctuation",
            NormalizationWarning,
            stacklevel=2,
        )

    def replace(match: re.Match) -> str:
        value = int(match.group())
        if value > _MAX_NUMERAL:
            raise UnsupportedNumeralError(match.group(), match.start())
        words = number_to_words(value)
        # pad only against abutting word characters ("B12" -> "B twelve")
        start, end = match.start(), match.end()
        if start > 0 and (text[start - 1].isalnum() or text[start - 1] == "_"):
            words = " " + words
        if end < len(text) and (text[end].isalnum() or text[end] == "_"):
            words = words + " "
        return words

    return _DIGIT_RUN.sub(replace, text)


_INTRA_WORD_HYPHEN = re.compile(r"(?<=\w)-+(?=\w)")


def split_hyphens(text: str) -> str:
    """Turn hyphens between word characters into single spaces.

    Consecutive hyphens collapse to one separator; dangling hyphens are
    left for the punctuation pass to sweep away.
    """
    return _INTRA_WORD_HYPHEN.sub(" ", text)


_CURLY_QUOTES = str.maketrans({"‘": "'", "’": "'"})
_NON_TOKEN = re.compile(r"[^A-Za-z0-9']+")


def _strip_punctuation_and_case(text: str) -> str:
    text = text.translate(_CURLY_QUOTES)
    return _NON_TOKEN.sub(" ", text).lower()


def _tokenize(text: str) -> TokenSequence:
    tokens = []
    for raw in text.split():
        token = raw.strip("'")
        if token:
            tokens.append(token)
    return tokens


def normalize_spelling(
    tokens: TokenSequence, spelling_map: Mapping[str, str]
) -> TokenSequence:
    return [spelling_map.get(token, token) for token in tokens]


def remove_disfluencies(
    tokens: TokenSequence,
    lexicon: frozenset[str] = DEFAULT_DISFLUENCIES,
) -> TokenSequence:
    return [token for token in tokens if token not in lexicon]


def normalize(text: str, config: NormalizationConfig | None = None) -> TokenSequence:
    """Run the full standardization pipeline and tokenize.

    Idempotent: normalizing the space-joined output reproduces it.
    """
    if config is None:
        config = default_config()
    if config.convert_numerals:
        text = numerals_to_words(text)
    if config.split_hyphenated:
        text = split_hyphens(text)
    if config.strip_punctuation_and_case:
        text = _strip_punctuation_and_case(text)
    tokens = _tokenize(text)
    if config.normalize_spelling:
        tokens = normalize_spelling(tokens, config.spelling_map)
    if config.remove_disfluencies:
        tokens = remove_disfluencies(tokens, config.disfluency_lexicon)
    return tokens

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinscribe import (
    NormalizationConfig,
    UnsupportedNumeralError,
    default_config,
    normalize,
    number_to_words,
    numerals_to_words,
)
from clinscribe.normalize import (
    DEFAULT_DISFLUENCIES,
    NormalizationWarning,
    config_from_file,
    default_spelling_map,
    normalize_spelling,
    remove_disfluencies,
    split_hyphens,
)

from oracles import words_for_number


class TestDisfluencies:
    def test_listed_fillers_removed(self):
        assert remove_disfluencies(["i", "have", "umm", "a", "headache"]) == [
            "i", "have", "a", "headache",
        ]

    def test_empty(self):
        assert remove_disfluencies([]) == []

    def test_all_fillers(self):
        assert remove_disfluencies(["umm", "uhh", "ahh"]) == []

    def test_order_preserved(self):
        assert remove_disfluencies(["a", "er", "b", "hmm", "c"]) == ["a", "b", "c"]


class TestNumerals:
    def test_single_digit(self):
        assert numerals_to_words("6") == "six"

    def test_two_digits_hyphenated(self):
        assert numerals_to_words("89") == "eighty-nine"

    def test_surrounding_text_untouched(self):
        assert numerals_to_words("took 6 pills") == "took six pills"
        assert numerals_to_words("B12 level") == "B twelve level"

    def test_spoken_decimal(self):
        assert normalize("temperature 101 point 5") == [
            "temperature", "one", "hundred", "one", "point", "five",
        ]

    def test_matches_independent_oracle(self):
        rng = random.Random(42)
        values = list(range(0, 1500)) + [rng.randint(0, 999_999_999) for _ in range(2000)]
        for n in values:
            assert number_to_words(n) == words_for_number(n)

    def test_out_of_range_fails_loudly(self):
        with pytest.raises(UnsupportedNumeralError) as excinfo:
            numerals_to_words("pay 1000000000 now")
        assert excinfo.value.run == "1000000000"
        assert excinfo.value.offset == 4

    def test_decimal_form_warns(self):
        with pytest.warns(NormalizationWarning):
            numerals_to_words("take 1.5 daily")


class TestSpelling:
    def test_british_to_american(self):
        mapping = default_spelling_map()
        assert normalize_spelling(["colour"], mapping) == ["color"]

    def test_american_is_fixed_point(self):
        mapping = default_spelling_map()
        assert normalize_spelling(["color"], mapping) == ["color"]

    def test_unmapped_word_unchanged(self):
        mapping = default_spelling_map()
        assert normalize_spelling(["paracetamol"], mapping) == ["paracetamol"]

    def test_bundled_map_is_idempotent_material(self):
        # no value may be a key, otherwise normalize would not be idempotent
        mapping = default_spelling_map()
        assert not set(mapping.values()) & set(mapping.keys())
        for key, value in mapping.items():
            assert key == key.lower() and value == value.lower()
            assert key != value


class TestHyphens:
    def test_tens_compound(self):
        assert split_hyphens("eighty-nine") == "eighty nine"

    def test_check_up(self):
        assert split_hyphens("check-up") == "check up"

    def test_consecutive_hyphens_collapse(self):
        assert split_hyphens("a--b") == "a b"

    def test_dangling_hyphen_untouched_here(self):
        # the punctuation pass removes it later
        assert split_hyphens("well -known") == "well -known"
        assert normalize("well -known") == ["well", "known"]


class TestPipeline:
    def test_composed_example(self):
        assert normalize("Umm, I took 6 pills — a check-up helped.") == [
            "i", "took", "six", "pills", "a", "check", "up", "helped",
        ]

    def test_empty(self):
        assert normalize("") == []

    def test_idempotent_on_normalized_join(self):
        tokens = normalize("Doctor prescribed 12 Colour-coded pills, umm, don't ask!")
        assert normalize(" ".join(tokens)) == tokens

    def test_apostrophes_kept_inside_words(self):
        assert normalize("I don't, 'quote'") == ["i", "don't", "quote"]

    def test_curly_apostrophe_normalized(self):
        assert normalize("I don’t") == ["i", "don't"]

    def test_equivalence_under_surface_variation(self):
        reference = normalize("the colour of eighty nine check ups")
        for variant in [
            "The Colour of 89 check-ups!!",
            "the color of eighty-nine check ups",
            "umm the colour of 89 check, ups",
        ]:
            assert normalize(variant) == reference

    def test_steps_can_be_disabled(self):
        config = NormalizationConfig(convert_numerals=False)
        assert normalize("take 6", config) == ["take", "6"]


TOKEN_OK = set("abcdefghijklmnopqrstuvwxyz0123456789'")


@given(st.text(max_size=200))
@settings(max_examples=300, deadline=None)
def test_token_character_invariant_holds(text):
    config = default_config()
    try:
        tokens = normalize(text, config)
    except UnsupportedNumeralError:
        return
    for token in tokens:
        assert token
        assert set(token) <= TOKEN_OK
        assert not token.startswith("'") and not token.endswith("'")
        assert token not in config.disfluency_lexicon


@given(st.text(max_size=200))
@settings(max_examples=300, deadline=None)
def test_idempotence_property(text):
    try:
        tokens = normalize(text)
    except UnsupportedNumeralError:
        return
    assert normalize(" ".join(tokens)) == tokens


class TestConfig:
    def test_from_file(self, tmp_path):
        path = tmp_path / "norm.json"
        path.write_text(
            json.dumps(
                {"disfluencies": ["umm"], "spelling_map": {"colour": "color"}}
            )
        )
        config = config_from_file(path)
        assert config.disfluency_lexicon == frozenset({"umm"})
        assert config.spelling_map == {"colour": "color"}

    def test_missing_keys_fall_back_to_defaults(self, tmp_path):
        path = tmp_path / "norm.json"
        path.write_text("{}")
        config = config_from_file(path)
        assert config.disfluency_lexicon == DEFAULT_DISFLUENCIES

    def test_invalid_file(self, tmp_path):
        path = tmp_path / "norm.json"
        path.write_text("not json")
        with pytest.raises(ValueError):
            config_from_file(path)

    def test_self_mapping_rejected(self):
        with pytest.raises(ValueError):
            NormalizationConfig(spelling_map={"color": "color"})

    def test_uppercase_disfluency_rejected(self):
        with pytest.raises(ValueError):
            NormalizationConfig(disfluency_lexicon=frozenset({"Umm"}))

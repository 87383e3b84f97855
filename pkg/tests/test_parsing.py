import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinscribe import SpeakerRole, Stage, extract, extract_speaker
from clinscribe.parsing import (
    DEFAULT_PATTERNS,
    ExtractionPattern,
    ParsedLine,
    PatternError,
    patterns_from_file,
    render_block,
)


class TestExtractSpeaker:
    def test_parenthesized(self):
        assert extract_speaker("(Doctor)") is SpeakerRole.DOCTOR

    def test_bracketed_lowercase(self):
        assert extract_speaker("[patient]") is SpeakerRole.PATIENT

    def test_unknown_role_word(self):
        assert extract_speaker("(Clinician)") is SpeakerRole.UNKNOWN

    def test_bare_word(self):
        assert extract_speaker("doctor") is SpeakerRole.DOCTOR

    def test_embedded_in_phrase(self):
        assert extract_speaker("most likely the Patient here") is SpeakerRole.PATIENT

    def test_no_partial_word_match(self):
        assert extract_speaker("doctoral") is SpeakerRole.UNKNOWN


class TestDiarizationExtract:
    def test_full_block(self):
        raw = "Sentence 1: [hi]\nJustification: greeting\nLabel: Speaker (Doctor)"
        [line] = extract(raw, Stage.DIARIZATION)
        assert line.text == "hi"
        assert line.speaker is SpeakerRole.DOCTOR
        assert line.justification == "greeting"
        assert line.ordinal == 1
        assert line.rung == 1

    def test_lowercase_label_no_justification(self):
        raw = "Sentence 2: [how are you]\nLabel: Speaker (doctor)"
        [line] = extract(raw, Stage.DIARIZATION)
        assert line.speaker is SpeakerRole.DOCTOR
        assert line.justification is None
        assert line.rung == 2

    def test_preamble_prose_skipped(self):
        raw = "I'm sorry, here is the transcript:\n1. Speaker (Patient): I feel unwell"
        [line] = extract(raw, Stage.DIARIZATION)
        assert line.speaker is SpeakerRole.PATIENT
        assert line.text == "I feel unwell"

    def test_bracket_variant_label(self):
        raw = "Sentence 1: [ok]\nLabel: Speaker [Patient]"
        [line] = extract(raw, Stage.DIARIZATION)
        assert line.speaker is SpeakerRole.PATIENT

    def test_multiline_sentence_joined(self):
        raw = (
            "Sentence 1: [the pain started two\nweeks ago at night]\n"
            "Label: Speaker (Patient)"
        )
        [line] = extract(raw, Stage.DIARIZATION)
        assert line.text == "the pain started two weeks ago at night"

    def test_trailing_prose_after_blank_line_skipped(self):
        raw = (
            "Sentence 1: [fine]\nJustification: [short]\nLabel: Speaker (Doctor)\n"
            "\nI hope this helps!"
        )
        [line] = extract(raw, Stage.DIARIZATION)
        assert line.text == "fine"

    def test_several_blocks_in_order(self):
        raw = "\n".join(
            f"Sentence {i}: [line {i}]\nJustification: [j]\nLabel: Speaker (Doctor)"
            for i in range(1, 6)
        )
        lines = extract(raw, Stage.DIARIZATION)
        assert [l.ordinal for l in lines] == [1, 2, 3, 4, 5]

    def test_lone_label_without_sentence_yields_nothing(self):
        assert extract("Label: Speaker (doctor)", Stage.DIARIZATION) == []

    def test_unparseable_gives_empty(self):
        assert extract("total nonsense with no structure", Stage.DIARIZATION) == []
        assert extract("", Stage.DIARIZATION) == []


class TestSingleLineStages:
    def test_punctuated_sentences(self):
        raw = "Punctuated Sentence 1: [Hello.]\nPunctuated Sentence 2: [I am fine.]"
        lines = extract(raw, Stage.PUNCTUATION)
        assert [l.text for l in lines] == ["Hello.", "I am fine."]
        assert all(l.rung == 1 for l in lines)

    def test_corrected_sentence_without_brackets(self):
        [line] = extract("Corrected Sentence: the elbow aches", Stage.CORRECTION)
        assert line.text == "the elbow aches"
        assert line.ordinal is None

    def test_role_prefix_lifted_from_body(self):
        [line] = extract(
            "Corrected Sentence 1: [Doctor: take the tablets]", Stage.CORRECTION
        )
        assert line.speaker is SpeakerRole.DOCTOR
        assert line.text == "take the tablets"

    def test_bare_speaker_lines_as_last_resort(self):
        lines = extract(
            "Doctor: any chest pain?\nPatient: no, none", Stage.CORRECTION
        )
        assert [l.speaker for l in lines] == [SpeakerRole.DOCTOR, SpeakerRole.PATIENT]
        assert all(l.rung == 4 for l in lines)


class TestZeroShotExtract:
    def test_enumerated_with_brackets(self):
        raw = "1. Speaker (Doctor): [How are you?]\n2. Speaker (Patient): [Fine.]"
        lines = extract(raw, Stage.ZERO_SHOT)
        assert [(l.ordinal, l.speaker) for l in lines] == [
            (1, SpeakerRole.DOCTOR),
            (2, SpeakerRole.PATIENT),
        ]

    def test_unnumbered_variant(self):
        [line] = extract("Speaker (Patient): I feel unwell", Stage.ZERO_SHOT)
        assert line.speaker is SpeakerRole.PATIENT
        assert line.rung == 2

    def test_bracket_agnostic_variant(self):
        [line] = extract("3) Speaker [Doctor]: rest the knee", Stage.ZERO_SHOT)
        assert line.speaker is SpeakerRole.DOCTOR
        assert line.text == "rest the knee"

    def test_unrecognized_role_becomes_unknown(self):
        [line] = extract("1. Speaker (Nurse): here you go", Stage.ZERO_SHOT)
        assert line.speaker is SpeakerRole.UNKNOWN


class TestRenderRoundTrip:
    WORDS = ["pain", "knee", "rest", "tablet", "sleep", "night", "week", "better"]

    def _random_lines(self, rng, n):
        lines = []
        for _ in range(n):
            speaker = rng.choice([SpeakerRole.DOCTOR, SpeakerRole.PATIENT])
            text = " ".join(rng.choices(self.WORDS, k=rng.randint(1, 8)))
            lines.append((speaker, text))
        return lines

    @pytest.mark.parametrize(
        "stage",
        [Stage.PUNCTUATION, Stage.DIARIZATION, Stage.CORRECTION, Stage.ZERO_SHOT],
    )
    def test_round_trip_recovers_every_line(self, stage):
        rng = random.Random(hash(stage.value) % 1000)
        for trial in range(40):
            lines = self._random_lines(rng, rng.randint(1, 12))
            rendered = render_block(stage, lines)
            parsed = extract(rendered, stage)
            assert [(l.speaker, l.text) for l in parsed] == lines

    def test_ordinals_non_decreasing(self):
        rendered = render_block(
            Stage.ZERO_SHOT,
            [(SpeakerRole.DOCTOR, "a"), (SpeakerRole.PATIENT, "b")],
        )
        parsed = extract(rendered, Stage.ZERO_SHOT)
        ordinals = [l.ordinal for l in parsed if l.ordinal is not None]
        assert ordinals == sorted(ordinals)


@given(st.text(max_size=400))
@settings(max_examples=400, deadline=None)
def test_extract_never_raises_on_arbitrary_text(raw):
    for stage in Stage:
        lines = extract(raw, stage)
        for line in lines:
            assert line.text


class TestPatternConfig:
    def test_invalid_pattern_rejected(self):
        with pytest.raises(PatternError):
            ExtractionPattern(Stage.CORRECTION, 1, "(unbalanced", {})

    def test_missing_capture_group_rejected(self):
        with pytest.raises(PatternError):
            ExtractionPattern(Stage.CORRECTION, 1, r"^x$", {"text": "text"})

    def test_patterns_from_file_override(self, tmp_path):
        path = tmp_path / "patterns.json"
        path.write_text(
            '{"correction": [{"rung": 1, '
            '"pattern": "^FIX\\\\s*(?P<num>\\\\d+)?:\\\\s*(?P<body>.*)$", '
            '"captures": {"num": "ordinal", "body": "text"}}]}'
        )
        patterns = patterns_from_file(path)
        [line] = extract("FIX 2: better now", Stage.CORRECTION, patterns[Stage.CORRECTION])
        assert line.text == "better now"
        assert line.ordinal == 2
        # untouched stages keep defaults
        assert patterns[Stage.DIARIZATION] == DEFAULT_PATTERNS[Stage.DIARIZATION]

    def test_parsed_line_requires_text(self):
        with pytest.raises(ValueError):
            ParsedLine(text="")

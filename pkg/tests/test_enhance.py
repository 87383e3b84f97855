import json

import pytest

from clinscribe import (
    BackendDescriptor,
    ChunkingPolicy,
    EchoBackend,
    HttpLlmBackend,
    LlmRequest,
    PromptTemplate,
    ScriptedBackend,
    SpeakerRole,
    Stage,
    Transcript,
    chunk,
    cot_enhance,
    default_examples,
    load_template,
    render_prompt,
    zero_shot_enhance,
)
from clinscribe.enhance import FewShotExample, UnboundPlaceholderError
from clinscribe.service import ServiceEndpoint, ServiceUnavailableError


def _transcript(n_turns=23, tid="t"):
    pairs = [
        (
            SpeakerRole.DOCTOR if i % 2 == 0 else SpeakerRole.PATIENT,
            f"utterance number {i} about the knee",
        )
        for i in range(n_turns)
    ]
    return Transcript.from_pairs(tid, pairs)


class TestChunking:
    def test_23_turns_in_tens(self):
        segments = chunk(_transcript(23), ChunkingPolicy.lines_of(10))
        assert len(segments) == 3
        assert [len(s.splitlines()) for s in segments] == [10, 10, 3]

    def test_whole_transcript_single_segment(self):
        segments = chunk(_transcript(23), ChunkingPolicy.whole_transcript())
        assert len(segments) == 1

    def test_exact_fit(self):
        segments = chunk(_transcript(5), ChunkingPolicy.lines_of(5))
        assert len(segments) == 1

    def test_segments_carry_labels(self):
        [segment] = chunk(_transcript(2), ChunkingPolicy.whole_transcript())
        assert segment.splitlines()[0].startswith("Doctor: ")

    def test_unlabeled_turns_render_bare(self):
        t = Transcript.from_pairs("u", [(SpeakerRole.UNKNOWN, "some words")])
        [segment] = chunk(t, ChunkingPolicy.whole_transcript())
        assert segment == "some words"

    def test_chunk_conservation(self):
        t = _transcript(34)
        segments = chunk(t, ChunkingPolicy.lines_of(10))
        rejoined = "\n".join(segments).splitlines()
        assert len(rejoined) == 34
        assert rejoined[0] == "Doctor: utterance number 0 about the knee"

    def test_standard_grid_flag(self):
        assert ChunkingPolicy.lines_of(5).is_standard
        assert ChunkingPolicy.lines_of(10).is_standard
        assert ChunkingPolicy.whole_transcript().is_standard
        assert not ChunkingPolicy.lines_of(7).is_standard

    def test_invalid_lines(self):
        with pytest.raises(ValueError):
            ChunkingPolicy.lines_of(0)


class TestRenderPrompt:
    def test_segment_inlined(self):
        template = PromptTemplate("x", "Prefix\n{transcript_segments}\nSuffix", Stage.ZERO_SHOT)
        assert render_prompt(template, "Doctor: hi") == "Prefix\nDoctor: hi\nSuffix"

    def test_cot_template_renders_five_example_blocks(self):
        template = load_template(Stage.DIARIZATION)
        examples = default_examples(Stage.DIARIZATION)
        assert len(examples) == 5
        prompt = render_prompt(template, "Doctor: hi", examples)
        for i in range(1, 6):
            assert f"Example #{i}:" in prompt
        assert "Examples #1-5" in prompt
        assert "{" not in prompt.replace("{transcript_segments}", "")

    def test_missing_examples_binding_fails(self):
        template = load_template(Stage.DIARIZATION)
        with pytest.raises(UnboundPlaceholderError) as excinfo:
            render_prompt(template, "Doctor: hi")
        assert excinfo.value.name == "examples"

    def test_unbound_segments_placeholder_fails(self):
        template = PromptTemplate("x", "{transcript_segments}", Stage.ZERO_SHOT)
        prompt = render_prompt(template, "text")
        assert prompt == "text"

    def test_determinism(self):
        template = load_template(Stage.CORRECTION)
        examples = default_examples(Stage.CORRECTION)
        assert render_prompt(template, "a", examples) == render_prompt(template, "a", examples)

    def test_few_shot_fields_required(self):
        with pytest.raises(ValueError):
            FewShotExample("input", " ", "output")


class TestZeroShot:
    def test_echo_round_trip(self):
        t = _transcript(8)
        result, record = zero_shot_enhance(t, EchoBackend(), ChunkingPolicy.lines_of(5))
        assert result == t
        assert record.stage_order == [Stage.ZERO_SHOT]
        assert record.fallback_count == 0
        assert record.truncation_count == 0
        assert len(record.stages[0].chunks) == 2

    def test_degenerate_tail_truncated(self):
        t = _transcript(3, tid="degen")
        junk = " ".join(["pain"] * 30)
        script = {
            "zero_shot": {
                "0": (
                    "1. Speaker (Doctor): [utterance number 0 about the knee]\n"
                    "2. Speaker (Patient): [utterance number 1 about the knee]\n"
                    f"3. Speaker (Doctor): [utterance number 2 about the knee {junk}]"
                )
            }
        }
        backend = ScriptedBackend(script, fallback="echo")
        result, record = zero_shot_enhance(
            t, backend, ChunkingPolicy.whole_transcript()
        )
        [chunk_record] = record.stages[0].chunks
        assert chunk_record.truncated is True
        assert "pain pain" not in result.turns[-1].text

    def test_unparseable_output_falls_back(self):
        t = _transcript(4, tid="fb")
        script = {"zero_shot": {"0": "I cannot help with that request."}}
        backend = ScriptedBackend(script, fallback="echo")
        result, record = zero_shot_enhance(
            t, backend, ChunkingPolicy.whole_transcript()
        )
        assert result == t
        [chunk_record] = record.stages[0].chunks
        assert chunk_record.fallback is True

    def test_mock_determinism(self):
        t = _transcript(12)
        first = zero_shot_enhance(t, EchoBackend(), ChunkingPolicy.lines_of(5))
        second = zero_shot_enhance(t, EchoBackend(), ChunkingPolicy.lines_of(5))
        assert first[0] == second[0]
        assert first[1].chunk_dicts() == second[1].chunk_dicts()

    def test_chunk_concurrency_matches_serial(self):
        t = _transcript(40)
        serial = zero_shot_enhance(t, EchoBackend(), ChunkingPolicy.lines_of(5), max_workers=1)
        parallel = zero_shot_enhance(t, EchoBackend(), ChunkingPolicy.lines_of(5), max_workers=8)
        assert serial[0] == parallel[0]
        assert serial[1].chunk_dicts() == parallel[1].chunk_dicts()


class TestCot:
    def test_correction_only_identity(self):
        t = _transcript(6)
        result, record = cot_enhance(
            t, EchoBackend(), ChunkingPolicy.whole_transcript(), stages=[Stage.CORRECTION]
        )
        assert result == t
        assert record.stage_order == [Stage.CORRECTION]

    def test_three_stages_in_order(self):
        t = _transcript(10, tid="full")
        result, record = cot_enhance(
            t, EchoBackend(), ChunkingPolicy.lines_of(5)
        )
        assert record.stage_order == [
            Stage.PUNCTUATION, Stage.DIARIZATION, Stage.CORRECTION,
        ]
        assert result == t

    def test_scripted_final_stage_wins(self):
        t = Transcript.from_pairs(
            "scripted",
            [(SpeakerRole.DOCTOR, "take the tablets"), (SpeakerRole.PATIENT, "ok")],
        )
        script = {
            "scripted": {
                "correction": {
                    "0": (
                        "Corrected Sentence 1: [Doctor: take the Dioralyte]\n"
                        "Corrected Sentence 2: [Patient: ok]"
                    )
                }
            }
        }
        backend = ScriptedBackend(script, fallback="echo")
        result, record = cot_enhance(
            t, backend, ChunkingPolicy.whole_transcript(),
            stages=[Stage.PUNCTUATION, Stage.DIARIZATION, Stage.CORRECTION],
        )
        assert result.turns[0].text == "take the Dioralyte"
        assert [s.stage for s in record.stages] == [
            Stage.PUNCTUATION, Stage.DIARIZATION, Stage.CORRECTION,
        ]

    def test_diarization_labels_unlabeled_transcript(self):
        t = Transcript.from_pairs(
            "plain",
            [(SpeakerRole.UNKNOWN, f"line {i} words") for i in range(6)],
        )
        result, record = cot_enhance(
            t, EchoBackend(), ChunkingPolicy.whole_transcript(),
            stages=[Stage.DIARIZATION],
        )
        assert all(t.speaker is not SpeakerRole.UNKNOWN for t in result.turns)
        assert record.fallback_count == 0

    def test_stage_order_enforced(self):
        t = _transcript(4)
        with pytest.raises(ValueError):
            cot_enhance(
                t, EchoBackend(), ChunkingPolicy.lines_of(5),
                stages=[Stage.CORRECTION, Stage.PUNCTUATION],
            )
        with pytest.raises(ValueError):
            cot_enhance(t, EchoBackend(), ChunkingPolicy.lines_of(5), stages=[])
        with pytest.raises(ValueError):
            cot_enhance(
                t, EchoBackend(), ChunkingPolicy.lines_of(5),
                stages=[Stage.ZERO_SHOT],
            )


class TestBackends:
    def test_http_backend_round_trip(self, mock_service):
        mock_service.set_json({"text": "Corrected Sentence 1: [fine]"})
        backend = HttpLlmBackend(
            BackendDescriptor(name="remote", max_output_tokens=64, temperature=0.1),
            ServiceEndpoint(mock_service.url),
        )
        request = LlmRequest(
            prompt="p", stage=Stage.CORRECTION, chunk_index=0,
            transcript_id="x", segment="s", max_output_tokens=64, temperature=0.1,
        )
        assert backend.generate(request) == "Corrected Sentence 1: [fine]"
        sent = mock_service.requests[0]["body"]
        assert sent == {"prompt": "p", "max_output_tokens": 64, "temperature": 0.1}

    def test_http_backend_retries_then_fails(self, mock_service):
        mock_service.set_json({"oops": True}, status=503)
        backend = HttpLlmBackend(
            BackendDescriptor(name="remote"),
            ServiceEndpoint(mock_service.url),
            retries=2,
        )
        request = LlmRequest(
            prompt="p", stage=Stage.CORRECTION, chunk_index=0,
            transcript_id="x", segment="s", max_output_tokens=8, temperature=0.1,
        )
        with pytest.raises(ServiceUnavailableError):
            backend.generate(request)
        assert len(mock_service.requests) == 3

    def test_scripted_backend_from_file(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(
            json.dumps(
                {
                    "name": "canned",
                    "fallback": "error",
                    "responses": {"correction": {"0": "Corrected Sentence: [hi]"}},
                }
            )
        )
        backend = ScriptedBackend.from_file(path)
        request = LlmRequest(
            prompt="p", stage=Stage.CORRECTION, chunk_index=0,
            transcript_id="x", segment="s", max_output_tokens=8, temperature=0.1,
        )
        assert backend.generate(request) == "Corrected Sentence: [hi]"
        missing = LlmRequest(
            prompt="p", stage=Stage.CORRECTION, chunk_index=1,
            transcript_id="x", segment="s", max_output_tokens=8, temperature=0.1,
        )
        with pytest.raises(KeyError):
            backend.generate(missing)

    def test_descriptor_validation(self):
        with pytest.raises(ValueError):
            BackendDescriptor(name="x", temperature=1.5)
        with pytest.raises(ValueError):
            BackendDescriptor(name="x", max_output_tokens=0)

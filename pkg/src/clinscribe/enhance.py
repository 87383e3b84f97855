"""LLM-backed transcript enhancement.

Two workflows run over a pluggable text-generation backend: a single-pass
operation that diarizes and corrects in one call, and a staged workflow
(punctuation, then diarization, then correction) where each stage feeds
the next and carries few-shot examples with rationales.

Every backend call, response, parse and truncation decision is kept in an
EnhancementRecord so a run can be audited or replayed.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Protocol, Sequence

from .align import truncate_degeneration
from .parsing import (
    COT_STAGE_ORDER,
    ExtractionPattern,
    ParsedLine,
    Stage,
    extract,
    render_block,
)
from .service import SchemaMismatchError, ServiceEndpoint, post_json
from .transcript import SpeakerRole, Transcript, TranscriptKind, Turn


class UnboundPlaceholderError(ValueError):
    def __init__(self, name: str):
        super().__init__(f"placeholder {{{name}}} is unbound")
        self.name = name


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    max_output_tokens: int = 4096
    temperature: float = 0.15

    def __post_init__(self):
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be at least 1")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")


@dataclass(frozen=True)
class LlmRequest:
    """One generation request plus the pipeline context that produced it.

    Real backends send only prompt, max_output_tokens and temperature over
    the wire; the stage, chunk index, transcript id and raw segment exist
    so scripted test backends can key their responses.
    """

    prompt: str
    stage: Stage
    chunk_index: int
    transcript_id: str
    segment: str
    max_output_tokens: int
    temperature: float


class LlmBackend(Protocol):
    descriptor: BackendDescriptor

    def generate(self, request: LlmRequest) -> str: ...


class HttpLlmBackend:
    """Client for the generation service contract.

    Request: ``POST {"prompt": string, "max_output_tokens": int,
    "temperature": number}``. Response: ``{"text": string}``. Transient
    failures are retried with exponential backoff up to ``retries`` times.
    """

    def __init__(
        self,
        descriptor: BackendDescriptor,
        endpoint: ServiceEndpoint,
        retries: int = 2,
    ):
        self.descriptor = descriptor
        self.endpoint = endpoint
        self.retries = retries

    def generate(self, request: LlmRequest) -> str:
        body = post_json(
            self.endpoint,
            {
                "prompt": request.prompt,
                "max_output_tokens": request.max_output_tokens,
                "temperature": request.temperature,
            },
            retries=self.retries,
        )
        text = body.get("text")
        if not isinstance(text, str):
            raise SchemaMismatchError(
                f"{self.endpoint.url}: response has no 'text' string"
            )
        return text


class ScriptedBackend:
    """Offline backend that replays canned responses from a JSON script.

    Script shape: ``{"responses": {stage: {chunk_index: text}}}``, with an
    optional extra nesting level keyed by transcript id for corpus runs.
    When no canned response matches, ``fallback`` decides: "echo" renders
    the chunk input as a well-formed expected-output block, "error" raises.
    """

    def __init__(
        self,
        responses: Mapping | None = None,
        fallback: str = "echo",
        name: str = "scripted",
    ):
        if fallback not in ("echo", "error"):
            raise ValueError(f"unknown fallback mode {fallback!r}")
        self.descriptor = BackendDescriptor(name=name)
        self.responses = dict(responses or {})
        self.fallback = fallback

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as handle:
            script = json.load(handle)
        if not isinstance(script, dict):
            raise ValueError(f"backend script {path} must be a JSON object")
        return cls(
            responses=script.get("responses", {}),
            fallback=script.get("fallback", "echo"),
            name=script.get("name", "scripted"),
        )

    def generate(self, request: LlmRequest) -> str:
        canned = self._lookup(request)
        if canned is not None:
            return canned
        if self.fallback == "error":
            raise KeyError(
                f"no scripted response for transcript={request.transcript_id!r} "
                f"stage={request.stage.value} chunk={request.chunk_index}"
            )
        return _echo_response(request.stage, request.segment)

    def _lookup(self, request: LlmRequest) -> str | None:
        scopes = []
        per_transcript = self.responses.get(request.transcript_id)
        if isinstance(per_transcript, dict):
            scopes.append(per_transcript)
        scopes.append(self.responses)
        for scope in scopes:
            stage_map = scope.get(request.stage.value)
            if isinstance(stage_map, dict):
                value = stage_map.get(str(request.chunk_index))
                if isinstance(value, str):
                    return value
            elif isinstance(stage_map, list):
                if 0 <= request.chunk_index < len(stage_map):
                    value = stage_map[request.chunk_index]
                    if isinstance(value, str):
                        return value
        return None


class EchoBackend(ScriptedBackend):
    """Identity mock: every chunk comes back as a well-formed block."""

    def __init__(self):
        super().__init__(responses={}, fallback="echo", name="echo")


def _echo_response(stage: Stage, segment: str) -> str:
    lines: list[tuple[SpeakerRole | None, str]] = []
    for i, line in enumerate(segment.splitlines()):
        if not line.strip():
            continue
        speaker, text = _split_label(line)
        if stage in (Stage.DIARIZATION, Stage.ZERO_SHOT) and (
            speaker is None or speaker is SpeakerRole.UNKNOWN
        ):
            speaker = SpeakerRole.DOCTOR if i % 2 == 0 else SpeakerRole.PATIENT
        lines.append((speaker, text))
    return render_block(stage, lines)


def _split_label(line: str) -> tuple[SpeakerRole | None, str]:
    head, sep, tail = line.partition(":")
    if sep and tail.strip():
        label = head.strip().lower()
        if label in ("doctor", "patient", "unknown"):
            return SpeakerRole(label), tail.strip()
    return None, line.strip()


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    stage: Stage


@dataclass(frozen=True)
class FewShotExample:
    input: str
    rationale: str
    output: str

    def __post_init__(self):
        for name in ("input", "rationale", "output"):
            if not getattr(self, name).strip():
                raise ValueError(f"few-shot example field {name!r} is empty")


def load_template(stage: Stage) -> PromptTemplate:
    """The bundled default template for a stage."""
    filename = {
        Stage.PUNCTUATION: "punctuation.txt",
        Stage.DIARIZATION: "diarization.txt",
        Stage.CORRECTION: "correction.txt",
        Stage.ZERO_SHOT: "zero_shot.txt",
    }[stage]
    body = (
        resources.files("clinscribe.data.templates")
        .joinpath(filename)
        .read_text(encoding="utf-8")
    )
    return PromptTemplate(id=f"{stage.value}-default", body=body, stage=stage)


def template_from_file(path, stage: Stage) -> PromptTemplate:
    with open(path, encoding="utf-8") as handle:
        return PromptTemplate(id=str(path), body=handle.read(), stage=stage)


def examples_from_file(path) -> list[FewShotExample]:
    """Load few-shot examples from a JSON list of input/rationale/output."""
    with open(path, encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, list):
        raise ValueError(f"few-shot file {path} must be a JSON list")
    return [
        FewShotExample(e["input"], e["rationale"], e["output"]) for e in raw
    ]


def default_examples(stage: Stage) -> list[FewShotExample]:
    """The bundled synthetic examples shipped for each staged prompt."""
    if stage is Stage.ZERO_SHOT:
        return []
    data = resources.files("clinscribe.data.fewshot").joinpath(f"{stage.value}.json")
    raw = json.loads(data.read_text(encoding="utf-8"))
    return [FewShotExample(e["input"], e["rationale"], e["output"]) for e in raw]


def render_prompt(
    template: PromptTemplate,
    segments: str,
    examples: Sequence[FewShotExample] = (),
) -> str:
    """Bind template placeholders; deterministic textual substitution."""
    text = template.body
    if "{transcript_segments}" in text:
        text = text.replace("{transcript_segments}", segments)
    if "{examples}" in text:
        if not examples:
            raise UnboundPlaceholderError("examples")
        text = text.replace("{examples}", _render_examples(examples))
    leftover = _find_placeholder(text)
    if leftover:
        raise UnboundPlaceholderError(leftover)
    return text


def _render_examples(examples: Sequence[FewShotExample]) -> str:
    blocks = []
    for i, example in enumerate(examples, start=1):
        blocks.append(
            f"Example #{i}:\n"
            f"Transcript:\n{example.input}\n"
            f"Rationale: {example.rationale}\n"
            f"Output:\n{example.output}"
        )
    return "\n\n".join(blocks)


def _find_placeholder(text: str) -> str | None:
    for name in ("transcript_segments", "examples"):
        if "{" + name + "}" in text:
            return name
    return None


@dataclass(frozen=True)
class ChunkingPolicy:
    """Lines(n) windows or the whole transcript in one segment."""

    lines: int | None = None

    def __post_init__(self):
        if self.lines is not None and self.lines < 1:
            raise ValueError("lines per chunk must be at least 1")

    @classmethod
    def lines_of(cls, n: int) -> "ChunkingPolicy":
        return cls(lines=n)

    @classmethod
    def whole_transcript(cls) -> "ChunkingPolicy":
        return cls(lines=None)

    @property
    def is_standard(self) -> bool:
        """The experimental grid used 5- and 10-line chunks or whole runs."""
        return self.lines is None or self.lines in (5, 10)

    def describe(self) -> str:
        return "whole_transcript" if self.lines is None else f"lines_{self.lines}"


def _windows(turns: Sequence[Turn], policy: ChunkingPolicy) -> list[tuple[Turn, ...]]:
    if policy.lines is None:
        return [tuple(turns)]
    return [
        tuple(turns[i : i + policy.lines])
        for i in range(0, len(turns), policy.lines)
    ]


def _render_segment(turns: Iterable[Turn]) -> str:
    lines = []
    for turn in turns:
        if turn.speaker is SpeakerRole.UNKNOWN:
            lines.append(turn.text)
        else:
            lines.append(f"{turn.speaker.label}: {turn.text}")
    return "\n".join(lines)


def chunk(t: Transcript, policy: ChunkingPolicy) -> list[str]:
    """Render a transcript into consecutive, non-overlapping segments.

    Turns carry their "Speaker: text" form when labeled, bare text when
    the speaker is unknown. The last window may be shorter.
    """
    if not t.turns:
        raise ValueError(f"transcript {t.id!r} is empty")
    return [_render_segment(window) for window in _windows(t.turns, policy)]


@dataclass(frozen=True)
class ChunkRecord:
    stage: Stage
    chunk_index: int
    prompt: str
    raw_response: str
    parsed_text: str
    truncated: bool
    fallback: bool

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "chunk_index": self.chunk_index,
            "prompt": self.prompt,
            "raw_response": self.raw_response,
            "parsed_text": self.parsed_text,
            "truncated": self.truncated,
            "fallback": self.fallback,
        }


@dataclass(frozen=True)
class StageRecord:
    stage: Stage
    chunks: tuple[ChunkRecord, ...]


@dataclass
class EnhancementRecord:
    """Full provenance of one transcript's enhancement run."""

    transcript_id: str
    stages: list[StageRecord] = field(default_factory=list)
    final: Transcript | None = None

    @property
    def stage_order(self) -> list[Stage]:
        return [s.stage for s in self.stages]

    @property
    def truncation_count(self) -> int:
        return sum(c.truncated for s in self.stages for c in s.chunks)

    @property
    def fallback_count(self) -> int:
        return sum(c.fallback for s in self.stages for c in s.chunks)

    def chunk_dicts(self) -> list[dict]:
        return [
            {"transcript_id": self.transcript_id, **chunk.to_dict()}
            for stage in self.stages
            for chunk in stage.chunks
        ]


def _parsed_to_turns(lines: Sequence[ParsedLine], start_index: int) -> list[Turn]:
    turns = []
    for offset, line in enumerate(lines):
        speaker = line.speaker if line.speaker is not None else SpeakerRole.UNKNOWN
        turns.append(Turn(speaker, line.text, start_index + offset))
    return turns


def _lines_to_text(lines: Sequence[ParsedLine]) -> str:
    rendered = []
    for line in lines:
        if line.speaker is None or line.speaker is SpeakerRole.UNKNOWN:
            rendered.append(line.text)
        else:
            rendered.append(f"{line.speaker.label}: {line.text}")
    return "\n".join(rendered)


def _process_chunk(
    stage: Stage,
    index: int,
    window: tuple[Turn, ...],
    segment: str,
    template: PromptTemplate,
    examples: Sequence[FewShotExample],
    backend: LlmBackend,
    transcript_id: str,
    truncation_threshold: int,
    patterns: Sequence[ExtractionPattern] | None,
) -> tuple[ChunkRecord, list[Turn]]:
    prompt = render_prompt(template, segment, examples)
    raw = backend.generate(
        LlmRequest(
            prompt=prompt,
            stage=stage,
            chunk_index=index,
            transcript_id=transcript_id,
            segment=segment,
            max_output_tokens=backend.descriptor.max_output_tokens,
            temperature=backend.descriptor.temperature,
        )
    )
    lines = extract(raw, stage, patterns)
    truncated = False
    if lines:
        parsed_text = _lines_to_text(lines)
        parsed_text, truncated = truncate_degeneration(
            parsed_text, segment, truncation_threshold
        )
        if truncated:
            lines = extract(parsed_text, stage, patterns)
    if not lines:
        record = ChunkRecord(
            stage, index, prompt, raw, segment, truncated, fallback=True
        )
        return record, list(window)
    record = ChunkRecord(
        stage, index, prompt, raw, _lines_to_text(lines), truncated, fallback=False
    )
    return record, _parsed_to_turns(lines, start_index=0)


def _run_stage(
    transcript: Transcript,
    stage: Stage,
    template: PromptTemplate,
    examples: Sequence[FewShotExample],
    backend: LlmBackend,
    policy: ChunkingPolicy,
    truncation_threshold: int,
    max_workers: int,
    patterns: Sequence[ExtractionPattern] | None = None,
) -> tuple[Transcript, StageRecord]:
    windows = _windows(transcript.turns, policy)
    segments = [_render_segment(w) for w in windows]

    def work(index: int) -> tuple[ChunkRecord, list[Turn]]:
        return _process_chunk(
            stage,
            index,
            windows[index],
            segments[index],
            template,
            examples,
            backend,
            transcript.id,
            truncation_threshold,
            patterns,
        )

    if max_workers > 1 and len(segments) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(work, range(len(segments))))
    else:
        results = [work(i) for i in range(len(segments))]

    turns: list[Turn] = []
    records: list[ChunkRecord] = []
    for record, chunk_turns in results:
        records.append(record)
        for turn in chunk_turns:
            turns.append(Turn(turn.speaker, turn.text, len(turns)))
    result = Transcript(transcript.id, tuple(turns), TranscriptKind.HYPOTHESIS)
    return result, StageRecord(stage, tuple(records))


def zero_shot_enhance(
    t: Transcript,
    backend: LlmBackend,
    policy: ChunkingPolicy,
    template: PromptTemplate | None = None,
    truncation_threshold: int = 20,
    max_workers: int = 1,
    patterns: Mapping[Stage, Sequence[ExtractionPattern]] | None = None,
) -> tuple[Transcript, EnhancementRecord]:
    """Single-call diarization and correction over each chunk.

    Chunks whose responses parse to nothing fall back to their input turns
    with the fallback flag set; runaway tails are cut before reassembly.
    """
    if not t.turns:
        raise ValueError(f"transcript {t.id!r} is empty")
    if template is None:
        template = load_template(Stage.ZERO_SHOT)
    record = EnhancementRecord(t.id)
    result, stage_record = _run_stage(
        t, Stage.ZERO_SHOT, template, (), backend, policy,
        truncation_threshold, max_workers,
        patterns.get(Stage.ZERO_SHOT) if patterns else None,
    )
    record.stages.append(stage_record)
    record.final = result
    return result, record


def cot_enhance(
    t: Transcript,
    backend: LlmBackend,
    policy: ChunkingPolicy,
    stages: Sequence[Stage] = COT_STAGE_ORDER,
    examples: Mapping[Stage, Sequence[FewShotExample]] | None = None,
    templates: Mapping[Stage, PromptTemplate] | None = None,
    truncation_threshold: int = 20,
    max_workers: int = 1,
    patterns: Mapping[Stage, Sequence[ExtractionPattern]] | None = None,
) -> tuple[Transcript, EnhancementRecord]:
    """Staged enhancement; each stage's output is the next stage's input.

    ``stages`` must be a non-empty subset of punctuation, diarization,
    correction, in that order. Each stage re-chunks its current input,
    renders its template with that stage's few-shot examples, and extracts
    with its own pattern set.
    """
    if not t.turns:
        raise ValueError(f"transcript {t.id!r} is empty")
    stages = tuple(stages)
    if not stages:
        raise ValueError("at least one stage is required")
    allowed = [s for s in COT_STAGE_ORDER if s in stages]
    if tuple(allowed) != stages or len(set(stages)) != len(stages):
        raise ValueError(
            f"stages must be a subset of {[s.value for s in COT_STAGE_ORDER]} in order"
        )

    record = EnhancementRecord(t.id)
    current = t
    for stage in stages:
        template = (
            templates[stage]
            if templates is not None and stage in templates
            else load_template(stage)
        )
        stage_examples = (
            examples[stage]
            if examples is not None and stage in examples
            else default_examples(stage)
        )
        current, stage_record = _run_stage(
            current, stage, template, stage_examples, backend, policy,
            truncation_threshold, max_workers,
            patterns.get(stage) if patterns else None,
        )
        record.stages.append(stage_record)
    record.final = current
    return current, record

"""Command-line surface: score, enhance, report, synth, plus debug dumps.

Configuration is a single JSON file with flag overrides; only credential
tokens come from the environment (the config names the variable, never
the secret).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .concepts import (
    ConceptAnnotator,
    ExternalAnnotator,
    default_lexicon,
    lexicon_from_file,
)
from .enhance import (
    ChunkingPolicy,
    EchoBackend,
    HttpLlmBackend,
    BackendDescriptor,
    LlmBackend,
    ScriptedBackend,
    cot_enhance,
    zero_shot_enhance,
)
from .metrics import (
    DEFAULT_SALUTATIONS,
    EmptyReferenceError,
    mc_wer,
    speaker_wer,
    taxonomy,
    wer,
)
from .normalize import NormalizationConfig, config_from_file, default_config, normalize
from .parsing import Stage, patterns_from_file
from .reporting import (
    MetricReport,
    ReportError,
    TranscriptRow,
    comparison_csv,
    comparison_rows,
    compute_aggregates,
    load_report,
    render_comparison_table,
)
from .semantics import (
    EmbedderDescriptor,
    ExternalEmbedder,
    HashEmbedder,
    transcript_similarity,
)
from .service import ServiceEndpoint, ServiceError
from .synth import generate_corpus
from .transcript import (
    ErrorInjectionSpec,
    SpeakerRole,
    Transcript,
    TranscriptFormat,
    TranscriptKind,
    parse_transcript,
    serialize_transcript,
)
from .align import global_align


class ConfigError(ValueError):
    pass


class CorpusError(ValueError):
    pass


@dataclass
class RunConfig:
    hypothesis_dir: str = ""
    reference_dir: str = ""
    output_dir: str = "out"
    format: str = "jsonl"
    normalization_config: str | None = None
    annotator: str = "lexicon"
    lexicon: str | None = None
    annotator_url: str | None = None
    annotator_token_env: str = "CLINSCRIBE_ANNOTATOR_TOKEN"
    embedder: str = "hash"
    embedder_url: str | None = None
    embedder_dim: int = 512
    embedder_max_tokens: int = 512
    embedder_token_env: str = "CLINSCRIBE_EMBEDDER_TOKEN"
    backend: str = "echo"
    backend_script: str | None = None
    backend_url: str | None = None
    backend_name: str = "llm"
    backend_token_env: str = "CLINSCRIBE_BACKEND_TOKEN"
    max_output_tokens: int = 4096
    temperature: float = 0.15
    retries: int = 2
    chunk_lines: int | None = 10
    patterns: str | None = None
    stages: list[str] = field(
        default_factory=lambda: ["punctuation", "diarization", "correction"]
    )
    salutations: list[str] = field(default_factory=lambda: list(DEFAULT_SALUTATIONS))
    concurrency: int = 1
    seed: int = 1
    count: int = 5
    injection: dict | None = None
    truncation_threshold: int = 20
    llm: str = "--"
    stt: str = "--"
    method: str = "--"
    metric: str = "wer"

    @classmethod
    def load(cls, path: str | None, overrides: dict | None = None) -> "RunConfig":
        data: dict = {}
        if path:
            try:
                with open(path, encoding="utf-8") as handle:
                    data = json.load(handle)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot load config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"config {path} must be a JSON object")
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**data)
        for key, value in (overrides or {}).items():
            if value is not None:
                setattr(config, key, value)
        if config.concurrency < 1:
            raise ConfigError("concurrency must be at least 1")
        return config

    def hash(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def transcript_format(self) -> TranscriptFormat:
        try:
            return TranscriptFormat(self.format)
        except ValueError:
            raise ConfigError(f"unknown transcript format {self.format!r}") from None

    def normalization(self) -> NormalizationConfig:
        if self.normalization_config:
            return config_from_file(self.normalization_config)
        return default_config()

    def chunking_policy(self) -> ChunkingPolicy:
        return ChunkingPolicy(lines=self.chunk_lines)

    def injection_spec(self) -> ErrorInjectionSpec | None:
        if self.injection is None:
            return None
        return ErrorInjectionSpec(**self.injection)


_EXTENSIONS = {TranscriptFormat.JSONL: ".jsonl", TranscriptFormat.PLAIN_TEXT: ".txt"}


def load_corpus(
    directory: str, fmt: TranscriptFormat, kind: TranscriptKind
) -> dict[str, Transcript]:
    root = Path(directory)
    if not root.is_dir():
        raise CorpusError(f"corpus directory {directory!r} does not exist")
    corpus: dict[str, Transcript] = {}
    for path in sorted(root.glob(f"*{_EXTENSIONS[fmt]}")):
        corpus[path.stem] = parse_transcript(
            path.read_bytes(), fmt, transcript_id=path.stem, kind=kind
        )
    if not corpus:
        raise CorpusError(f"no {_EXTENSIONS[fmt]} transcripts in {directory!r}")
    return corpus


def build_annotator(config: RunConfig) -> ConceptAnnotator:
    if config.annotator == "lexicon":
        if config.lexicon:
            return lexicon_from_file(config.lexicon, config.normalization())
        return default_lexicon()
    if config.annotator == "external":
        if not config.annotator_url:
            raise ConfigError("annotator_url required for the external annotator")
        return ExternalAnnotator(
            ServiceEndpoint(config.annotator_url, config.annotator_token_env),
            config=config.normalization(),
        )
    raise ConfigError(f"unknown annotator {config.annotator!r}")


def build_embedder(config: RunConfig):
    if config.embedder == "hash":
        return HashEmbedder(dim=config.embedder_dim)
    if config.embedder == "external":
        if not config.embedder_url:
            raise ConfigError("embedder_url required for the external embedder")
        return ExternalEmbedder(
            ServiceEndpoint(config.embedder_url, config.embedder_token_env),
            EmbedderDescriptor(
                name="external",
                max_input_tokens=config.embedder_max_tokens,
                dim=config.embedder_dim,
            ),
        )
    raise ConfigError(f"unknown embedder {config.embedder!r}")


def build_backend(config: RunConfig) -> LlmBackend:
    if config.backend == "echo":
        return EchoBackend()
    if config.backend == "scripted":
        if not config.backend_script:
            raise ConfigError("backend_script required for the scripted backend")
        return ScriptedBackend.from_file(config.backend_script)
    if config.backend == "http":
        if not config.backend_url:
            raise ConfigError("backend_url required for the http backend")
        return HttpLlmBackend(
            BackendDescriptor(
                name=config.backend_name,
                max_output_tokens=config.max_output_tokens,
                temperature=config.temperature,
            ),
            ServiceEndpoint(config.backend_url, config.backend_token_env),
            retries=config.retries,
        )
    raise ConfigError(f"unknown backend {config.backend!r}")


def _metadata(config: RunConfig, extra: dict | None = None) -> dict:
    meta = {
        "tool": f"clinscribe {__version__}",
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config_hash": config.hash(),
        "llm": config.llm,
        "stt": config.stt,
        "method": config.method,
    }
    if extra:
        meta.update(extra)
    return meta


def _transcript_text(t: Transcript) -> str:
    return " ".join(turn.text for turn in t.turns)


def cmd_score(config: RunConfig) -> tuple[MetricReport, int]:
    """Score a hypothesis corpus against its references."""
    fmt = config.transcript_format()
    hyps = load_corpus(config.hypothesis_dir, fmt, TranscriptKind.HYPOTHESIS)
    refs = load_corpus(config.reference_dir, fmt, TranscriptKind.REFERENCE)
    unmatched = sorted(set(hyps) - set(refs))
    if unmatched:
        raise CorpusError(
            "hypotheses without matching references: " + ", ".join(unmatched)
        )

    norm = config.normalization()
    annotator = build_annotator(config)
    embedder = build_embedder(config)
    salutations = tuple(config.salutations)
    ids = sorted(hyps)

    def score_one(tid: str):
        hyp, ref = hyps[tid], refs[tid]
        row = TranscriptRow(transcript_id=tid)
        records = []
        hyp_text = _transcript_text(hyp)
        ref_text = _transcript_text(ref)
        try:
            row.wer = wer(hyp_text, ref_text, norm).wer
        except EmptyReferenceError as exc:
            row.errors["wer"] = str(exc)
        try:
            score, records = mc_wer(hyp_text, ref_text, annotator, norm)
            row.mc_wer = score.wer
            row.concept_substitutions = score.substitutions
            row.concept_deletions = score.deletions
            row.concept_insertions = score.insertions
        except EmptyReferenceError as exc:
            row.errors["mc_wer"] = str(exc)
        except ServiceError as exc:
            row.errors["mc_wer"] = str(exc)
        for name, role in (("d_wer", SpeakerRole.DOCTOR), ("p_wer", SpeakerRole.PATIENT)):
            try:
                setattr(row, name, speaker_wer(hyp, ref, role, salutations, norm).wer)
            except EmptyReferenceError as exc:
                row.errors[name] = str(exc)
        try:
            row.similarity = transcript_similarity(hyp, ref, embedder).mean
        except (ValueError, ServiceError) as exc:
            row.errors["similarity"] = str(exc)
        return row, records

    if config.concurrency > 1:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            scored = list(pool.map(score_one, ids))
    else:
        scored = [score_one(tid) for tid in ids]

    rows = [row for row, _ in scored]
    all_records = [record for _, records in scored for record in records]
    report = MetricReport(
        rows=rows,
        aggregates=compute_aggregates(rows),
        taxonomy=taxonomy(all_records).to_dict(),
        metadata=_metadata(
            config,
            {
                "annotator": config.annotator,
                "embedder": config.embedder,
                "chunking": config.chunking_policy().describe(),
                "hypothesis_dir": str(config.hypothesis_dir),
                "reference_dir": str(config.reference_dir),
            },
        ),
    )
    report.write(Path(config.output_dir))
    return report, (0 if report.error_count == 0 else 1)


def cmd_enhance(config: RunConfig) -> tuple[dict, int]:
    """Run the enhancement pipeline over a corpus; failures isolate."""
    fmt = config.transcript_format()
    corpus = load_corpus(config.hypothesis_dir, fmt, TranscriptKind.HYPOTHESIS)
    backend = build_backend(config)
    policy = config.chunking_policy()
    patterns = patterns_from_file(config.patterns) if config.patterns else None

    out_root = Path(config.output_dir)
    enhanced_dir = out_root / "enhanced"
    records_dir = out_root / "records"
    enhanced_dir.mkdir(parents=True, exist_ok=True)
    records_dir.mkdir(parents=True, exist_ok=True)

    stage_names = list(config.stages)
    failures: dict[str, str] = {}
    truncations = fallbacks = 0
    for tid in sorted(corpus):
        transcript = corpus[tid]
        try:
            if stage_names == ["zero_shot"]:
                result, record = zero_shot_enhance(
                    transcript, backend, policy,
                    truncation_threshold=config.truncation_threshold,
                    max_workers=config.concurrency,
                    patterns=patterns,
                )
            else:
                result, record = cot_enhance(
                    transcript, backend, policy,
                    stages=[Stage(name) for name in stage_names],
                    truncation_threshold=config.truncation_threshold,
                    max_workers=config.concurrency,
                    patterns=patterns,
                )
        except Exception as exc:  # noqa: BLE001 - one bad transcript must not abort the corpus
            failures[tid] = f"{type(exc).__name__}: {exc}"
            continue
        truncations += record.truncation_count
        fallbacks += record.fallback_count
        (enhanced_dir / f"{tid}{_EXTENSIONS[fmt]}").write_bytes(
            serialize_transcript(result, fmt)
        )
        lines = [json.dumps(d, sort_keys=True) for d in record.chunk_dicts()]
        (records_dir / f"{tid}.records.jsonl").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )

    summary = {
        "metadata": _metadata(
            config,
            {
                "backend": backend.descriptor.name,
                "stages": stage_names,
                "chunking": policy.describe(),
                "nonstandard_chunking": not policy.is_standard,
            },
        ),
        "transcripts": len(corpus),
        "enhanced": len(corpus) - len(failures),
        "failures": dict(sorted(failures.items())),
        "truncations": truncations,
        "fallbacks": fallbacks,
    }
    (out_root / "enhance_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return summary, (0 if not failures else 1)


def cmd_report(paths: list[str], metric: str, output_dir: str | None) -> tuple[str, int]:
    """Merge scoring runs into one comparison table."""
    if not paths:
        raise ReportError("at least one report is required")
    reports = [load_report(path) for path in paths]
    rows = comparison_rows(reports, metric)
    table = render_comparison_table(rows, metric)
    if output_dir:
        out_root = Path(output_dir)
        out_root.mkdir(parents=True, exist_ok=True)
        (out_root / "table.md").write_text(table, encoding="utf-8")
        (out_root / "comparison.csv").write_text(comparison_csv(rows), encoding="utf-8")
        (out_root / "comparison.json").write_text(
            json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return table, 0


def cmd_synth(config: RunConfig) -> tuple[dict, int]:
    """Generate a deterministic fixture corpus (references + hypotheses)."""
    fmt = config.transcript_format()
    pairs = generate_corpus(config.count, config.seed, config.injection_spec())
    out_root = Path(config.output_dir)
    ref_dir = out_root / "references"
    hyp_dir = out_root / "hypotheses"
    ref_dir.mkdir(parents=True, exist_ok=True)
    hyp_dir.mkdir(parents=True, exist_ok=True)
    for reference, hypothesis in pairs:
        (ref_dir / f"{reference.id}{_EXTENSIONS[fmt]}").write_bytes(
            serialize_transcript(reference, fmt)
        )
        (hyp_dir / f"{hypothesis.id}{_EXTENSIONS[fmt]}").write_bytes(
            serialize_transcript(hypothesis, fmt)
        )
    summary = {
        "transcripts": len(pairs),
        "references": str(ref_dir),
        "hypotheses": str(hyp_dir),
        "seed": config.seed,
    }
    return summary, 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clinscribe",
        description="Score and enhance medical conversation transcripts.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--hypothesis-dir", dest="hypothesis_dir")
        p.add_argument("--reference-dir", dest="reference_dir")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--format", choices=["jsonl", "text"])
        p.add_argument("--concurrency", type=int)
        p.add_argument("--seed", type=int)

    score = sub.add_parser("score", help="score a corpus against references")
    add_common(score)

    enhance = sub.add_parser("enhance", help="run LLM enhancement over a corpus")
    add_common(enhance)
    enhance.add_argument("--chunk-lines", dest="chunk_lines", type=int)
    enhance.add_argument(
        "--whole-transcript", action="store_true",
        help="process each transcript in a single segment",
    )
    enhance.add_argument(
        "--stages", help="comma-separated stage list, or zero_shot"
    )

    report = sub.add_parser("report", help="merge score reports into a table")
    report.add_argument("reports", nargs="+", help="report.json paths")
    report.add_argument("--metric", default="wer",
                        choices=["wer", "mc_wer", "d_wer", "p_wer", "similarity"])
    report.add_argument("--output-dir", dest="output_dir")

    synth = sub.add_parser("synth", help="generate a synthetic fixture corpus")
    add_common(synth)
    synth.add_argument("--count", type=int)

    norm = sub.add_parser("normalize", help="dump the normalized token sequence")
    norm.add_argument("text", help="text to normalize")
    norm.add_argument("--config", help="JSON config file")

    align_cmd = sub.add_parser("align", help="dump the word-level edit alignment")
    align_cmd.add_argument("hyp", help="hypothesis text")
    align_cmd.add_argument("ref", help="reference text")
    align_cmd.add_argument("--config", help="JSON config file")

    return parser


_OVERRIDE_KEYS = (
    "hypothesis_dir", "reference_dir", "output_dir", "format",
    "concurrency", "seed", "count", "chunk_lines",
)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        key: getattr(args, key) for key in _OVERRIDE_KEYS if hasattr(args, key)
    }
    config = RunConfig.load(args.config, overrides)
    if getattr(args, "whole_transcript", False):
        config.chunk_lines = None
    stages = getattr(args, "stages", None)
    if stages:
        config.stages = [s.strip() for s in stages.split(",") if s.strip()]
    return config


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "score":
            config = _config_from_args(args)
            report, code = cmd_score(config)
            for row in report.rows:
                status = "ok" if not row.errors else "errors: " + ", ".join(row.errors)
                print(f"{row.transcript_id}: {status}")
            for name, stat in sorted(report.aggregates.items()):
                print(f"{name}: {stat.mean:.4f} ± {stat.std:.4f} (n={stat.n})")
            print(f"report written to {config.output_dir}")
            return code
        if args.command == "enhance":
            config = _config_from_args(args)
            summary, code = cmd_enhance(config)
            print(
                f"enhanced {summary['enhanced']}/{summary['transcripts']} transcripts "
                f"({summary['truncations']} truncations, {summary['fallbacks']} fallbacks)"
            )
            for tid, message in summary["failures"].items():
                print(f"failed {tid}: {message}", file=sys.stderr)
            return code
        if args.command == "report":
            table, code = cmd_report(args.reports, args.metric, args.output_dir)
            print(table, end="")
            return code
        if args.command == "synth":
            config = _config_from_args(args)
            summary, code = cmd_synth(config)
            print(
                f"wrote {summary['transcripts']} transcript pairs under "
                f"{config.output_dir} (seed {summary['seed']})"
            )
            return code
        if args.command == "normalize":
            config = RunConfig.load(args.config)
            print(json.dumps(normalize(args.text, config.normalization())))
            return 0
        if args.command == "align":
            config = RunConfig.load(args.config)
            norm = config.normalization()
            alignment = global_align(normalize(args.hyp, norm), normalize(args.ref, norm))
            print(
                json.dumps(
                    {
                        "substitutions": alignment.substitutions,
                        "deletions": alignment.deletions,
                        "insertions": alignment.insertions,
                        "matches": alignment.matches,
                        "ref_length": alignment.ref_length,
                        "ops": [
                            {
                                "kind": op.kind.value,
                                "hyp_index": op.hyp_index,
                                "ref_index": op.ref_index,
                            }
                            for op in alignment.ops
                        ],
                    },
                    indent=2,
                )
            )
            return 0
    except (ConfigError, CorpusError, ReportError, ServiceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable command")


if __name__ == "__main__":
    sys.exit(main())

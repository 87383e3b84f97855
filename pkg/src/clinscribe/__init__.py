"""Scoring and LLM post-processing toolkit for medical conversation transcripts."""

__version__ = "0.1.0"

from .align import (
    EditAlignment,
    EditOp,
    EditOpKind,
    LocalAlignment,
    global_align,
    smith_waterman,
    truncate_degeneration,
)
from .concepts import (
    ConceptAnnotation,
    ConceptCategory,
    ConceptLexicon,
    ExternalAnnotator,
    category_from_name,
    default_lexicon,
    lexicon_from_file,
)
from .enhance import (
    BackendDescriptor,
    ChunkingPolicy,
    EchoBackend,
    EnhancementRecord,
    FewShotExample,
    HttpLlmBackend,
    LlmRequest,
    PromptTemplate,
    ScriptedBackend,
    chunk,
    cot_enhance,
    default_examples,
    load_template,
    render_prompt,
    zero_shot_enhance,
)
from .metrics import (
    AggregateStat,
    ConceptErrorRecord,
    EmptyReferenceError,
    TaxonomyMatrix,
    WerScore,
    aggregate,
    mc_wer,
    speaker_wer,
    strip_salutations,
    taxonomy,
    wer,
)
from .normalize import (
    NormalizationConfig,
    UnsupportedNumeralError,
    default_config,
    normalize,
    number_to_words,
    numerals_to_words,
)
from .parsing import ExtractionPattern, ParsedLine, Stage, extract, extract_speaker
from .semantics import (
    EmbedderDescriptor,
    ExternalEmbedder,
    HashEmbedder,
    cosine,
    segment_lines,
    transcript_similarity,
)
from .transcript import (
    EmptyTranscriptError,
    ErrorInjectionSpec,
    SpeakerRole,
    Transcript,
    TranscriptFormat,
    TranscriptKind,
    TranscriptParseError,
    Turn,
    UnknownSpeakerLabelError,
    inject_errors,
    parse_transcript,
    serialize_transcript,
)

"""The staged enhancement workflow on an unlabeled transcript.

Uses the offline echo backend, so it runs without any service. Swap in
HttpLlmBackend with a ServiceEndpoint to drive a real generation service.

Run with: python demos/02_enhancement_pipeline.py
"""

from clinscribe import (
    ChunkingPolicy,
    EchoBackend,
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

# An ASR-style transcript with no speaker labels and flat punctuation.
lines = [
    "hello what brings you in today",
    "i have had this rash on my elbows for two weeks",
    "is it itchy or painful",
    "mostly itchy especially at night",
    "i will prescribe fexofenadine and an emollient",
    "thank you doctor",
]
transcript = Transcript.from_pairs(
    "demo", [(SpeakerRole.UNKNOWN, line) for line in lines]
)

# What the model actually sees: the stage template with few-shot examples
# and the chunk inlined.
print("== rendered diarization prompt (first chunk) ==")
policy = ChunkingPolicy.lines_of(5)
segment = chunk(transcript, policy)[0]
prompt = render_prompt(
    load_template(Stage.DIARIZATION), segment, default_examples(Stage.DIARIZATION)
)
print(prompt[:600] + "\n[...]\n")

# Three stages: punctuation, then diarization, then correction. Each
# stage re-chunks its own input and feeds the next.
result, record = cot_enhance(transcript, EchoBackend(), policy)
print("== staged enhancement ==")
print("stages:", [s.value for s in record.stage_order])
for turn in result.turns:
    print(f"  {turn.speaker.label}: {turn.text}")
print(f"truncations={record.truncation_count} fallbacks={record.fallback_count}")

# The single-call variant does diarization and correction in one pass.
result, record = zero_shot_enhance(transcript, EchoBackend(), policy)
print("\n== zero-shot enhancement ==")
print("chunks:", len(record.stages[0].chunks))
print("first turn:", result.turns[0].speaker.label, "/", result.turns[0].text)

# A scripted backend replays canned responses; unparseable ones trigger
# the pass-through fallback so no dialogue is ever lost.
script = {"zero_shot": {"0": "I'm sorry, I cannot process this."}}
result, record = zero_shot_enhance(
    transcript, ScriptedBackend(script, fallback="echo"), ChunkingPolicy.whole_transcript()
)
print("\n== fallback on unparseable output ==")
print("fallbacks:", record.fallback_count, "-> output equals input:", result == transcript)

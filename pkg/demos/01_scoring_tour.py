"""A tour of the scoring primitives on a tiny consultation.

Run with: python demos/01_scoring_tour.py
"""

from clinscribe import (
    SpeakerRole,
    Transcript,
    TranscriptKind,
    default_lexicon,
    global_align,
    mc_wer,
    normalize,
    speaker_wer,
    wer,
)

# Text normalization: both sides of every metric go through the same
# standardization, so surface differences stop counting as errors.
print("== normalization ==")
raw = "Umm, I took 6 Paracetamol tablets — the check-up helped."
print(raw)
print(normalize(raw))

# Word error rate over raw strings. The reference on the right is what a
# human transcriber produced; the hypothesis on the left came from ASR.
print("\n== general WER ==")
hypothesis = "i take 6 paracetamol tablets the checkup help"
reference = "Umm, I took six paracetamol tablets. The check-up helped."
score = wer(hypothesis, reference)
print(f"S={score.substitutions} D={score.deletions} I={score.insertions} "
      f"N={score.ref_words} -> WER {score.wer:.3f}")

# The alignment behind the number.
print("\n== alignment ops ==")
hyp_tokens = normalize(hypothesis)
ref_tokens = normalize(reference)
for op in global_align(hyp_tokens, ref_tokens).ops:
    hyp_word = hyp_tokens[op.hyp_index] if op.hyp_index is not None else "-"
    ref_word = ref_tokens[op.ref_index] if op.ref_index is not None else "-"
    print(f"  {op.kind.value:11} {hyp_word:12} {ref_word}")

# Medical-concept WER only counts the clinically meaningful units. Here
# the drug name is wrong and everything else is noise.
print("\n== MC-WER ==")
lexicon = default_lexicon()
mc_score, records = mc_wer(
    "the diuretics sachets calmed my stomach right down",
    "the dioralyte sachets calmed my stomach right down",
    lexicon,
)
print(f"concepts N={mc_score.ref_words}, MC-WER {mc_score.wer:.3f}")
for record in records:
    print(f"  {record.kind.value}: {record.ref_surface} -> {record.hyp_surface}")

# Speaker-attributed WER measures diarization: put a doctor line in the
# patient's mouth and it shows up on both speakers' scores.
print("\n== D-WER / P-WER ==")
reference_t = Transcript.from_pairs(
    "demo",
    [
        (SpeakerRole.DOCTOR, "hello, what brings you in"),
        (SpeakerRole.PATIENT, "my elbows itch at night"),
        (SpeakerRole.DOCTOR, "try an emollient cream every evening"),
    ],
    TranscriptKind.REFERENCE,
)
hypothesis_t = Transcript.from_pairs(
    "demo",
    [
        (SpeakerRole.DOCTOR, "hello, what brings you in"),
        (SpeakerRole.PATIENT, "my elbows itch at night"),
        (SpeakerRole.PATIENT, "try an emollient cream every evening"),  # mislabeled
    ],
)
for role, label in ((SpeakerRole.DOCTOR, "D-WER"), (SpeakerRole.PATIENT, "P-WER")):
    role_score = speaker_wer(hypothesis_t, reference_t, role)
    print(f"  {label}: {role_score.wer:.3f} "
          f"(S={role_score.substitutions} D={role_score.deletions} I={role_score.insertions})")

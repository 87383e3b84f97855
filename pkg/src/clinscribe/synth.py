"""Synthetic consultation generator for fixtures and offline runs.

References come from a small template grammar of primary-care dialogue
(openings, symptom reports, questions, advice, closings) seeded with
terms from the bundled concept lexicon; hypotheses are corrupted copies.
Everything is a pure function of the seed.
"""

from __future__ import annotations

import random
from dataclasses import replace

from .transcript import (
    ErrorInjectionSpec,
    SpeakerRole,
    Transcript,
    TranscriptKind,
    inject_errors,
)

# Turn counts are drawn from this band; its mean matches the typical
# consultation length of about 92 turns and its edges stay inside 10%.
TURNS_LOW = 84
TURNS_HIGH = 100

_CONDITIONS = [
    "eczema", "itching", "a rash", "a headache", "a migraine", "nausea",
    "dizziness", "a fever", "chest pain", "a sore throat", "palpitations",
]
_BODY_PARTS = ["elbows", "knee", "chest", "stomach", "throat", "skin", "shoulder", "ankle"]
_MEDICINES = [
    "fexofenadine", "paracetamol", "ibuprofen", "amoxicillin", "antibiotics",
    "emollients", "dioralyte", "antihistamines",
]
_DURATIONS = [
    "2 days", "3 days", "a week", "10 days", "2 weeks", "a month", "6 weeks",
]
_SEVERITIES = ["mild", "moderate", "severe"]

_OPENINGS = [
    (SpeakerRole.DOCTOR, "Hello, good morning. How can I help you today?"),
    (SpeakerRole.DOCTOR, "Hi there. What brings you in today?"),
    (SpeakerRole.DOCTOR, "Good afternoon. What can I do for you?"),
]
_OPENING_REPLIES = [
    (SpeakerRole.PATIENT, "Hello doctor. I've had {condition} for {duration} now."),
    (SpeakerRole.PATIENT, "Hi. It's my {part}, it has been bothering me for {duration}."),
    (SpeakerRole.PATIENT, "Good morning. I keep getting {condition} and it's not settling."),
]

_DOCTOR_LINES = [
    "How long has that been going on?",
    "Is the {part} painful to touch, or does it come and go?",
    "Have you tried any {medicine} for it so far?",
    "Any shortness of breath or chest pain alongside that?",
    "On a scale of one to 10, how bad is the {condition} right now?",
    "Let me check your blood pressure and heart rate first.",
    "I'd describe that as {severity} rather than anything alarming.",
    "We should run a blood test to rule out an infection.",
    "I'll prescribe {medicine}, take it twice a day with food.",
    "Keep the {part} rested and come back for a check-up in {duration}.",
    "Does anyone else at home have similar symptoms?",
    "Have you noticed whether it gets worse at night?",
    "Your temperature is 37 point 8, slightly above normal.",
    "Any allergies to medication that you know of?",
    "That sounds more like {condition} than anything serious.",
]
_PATIENT_LINES = [
    "It started about {duration} ago, umm, maybe a bit longer.",
    "The {part} aches mostly in the evening.",
    "I took some {medicine} but it didn't really help.",
    "No, nothing like that, just the {condition}.",
    "I'd say about 6 out of 10 when it flares up.",
    "My weight has stayed the same, around 70 kilos.",
    "It feels worse after I walk up the stairs.",
    "My partner had the same thing about {duration} ago.",
    "I've been using the cream on my {part} every night.",
    "Honestly the itching keeps me awake some nights.",
    "I haven't had a fever, at least I don't think so.",
    "Yes, I'm allergic to penicillin.",
    "It's a {severity} sort of pain, not sharp.",
    "Uhh, I think it started after the gardening.",
]
_CLOSINGS = [
    (SpeakerRole.DOCTOR, "Take care, and come back if it gets worse. Goodbye."),
    (SpeakerRole.PATIENT, "Thank you so much doctor. Goodbye."),
    (SpeakerRole.DOCTOR, "You're welcome. Bye bye, take care."),
]

# substitution/insertion vocabulary for corrupted hypotheses; none of
# these words are lexicon concepts
INJECTION_VOCABULARY = [
    "the", "and", "then", "well", "really", "quite", "just", "maybe",
    "something", "anything", "thing", "about", "around", "brunch",
    "teaching", "bowling", "garden", "window", "yesterday", "morning",
]


def _fill(rng: random.Random, template: str) -> str:
    return template.format(
        condition=rng.choice(_CONDITIONS),
        part=rng.choice(_BODY_PARTS),
        medicine=rng.choice(_MEDICINES),
        duration=rng.choice(_DURATIONS),
        severity=rng.choice(_SEVERITIES),
    )


def generate_reference(transcript_id: str, seed: int) -> Transcript:
    """One deterministic reference consultation."""
    rng = random.Random(seed)
    turn_count = rng.randint(TURNS_LOW, TURNS_HIGH)
    pairs: list[tuple[SpeakerRole, str]] = []

    opener = rng.choice(_OPENINGS)
    pairs.append(opener)
    pairs.append((SpeakerRole.PATIENT, _fill(rng, rng.choice(_OPENING_REPLIES)[1])))

    speaker = SpeakerRole.DOCTOR
    while len(pairs) < turn_count - len(_CLOSINGS):
        pool = _DOCTOR_LINES if speaker is SpeakerRole.DOCTOR else _PATIENT_LINES
        pairs.append((speaker, _fill(rng, rng.choice(pool))))
        # mostly alternate; same-speaker consecutive turns are allowed
        if rng.random() >= 0.1:
            speaker = speaker.opposite()
    pairs.extend(_CLOSINGS)
    return Transcript.from_pairs(transcript_id, pairs, TranscriptKind.REFERENCE)


def generate_corpus(
    count: int,
    seed: int,
    injection: ErrorInjectionSpec | None = None,
) -> list[tuple[Transcript, Transcript]]:
    """(reference, hypothesis) pairs; byte-stable for a fixed seed."""
    if count < 1:
        raise ValueError("count must be at least 1")
    master = random.Random(seed)
    out = []
    for i in range(count):
        ref_seed = master.getrandbits(32)
        hyp_seed = master.getrandbits(32)
        transcript_id = f"consult_{i:03d}"
        reference = generate_reference(transcript_id, ref_seed)
        if injection is None:
            spec = ErrorInjectionSpec(
                substitution_rate=0.05,
                deletion_rate=0.02,
                insertion_rate=0.02,
                scramble_speakers_rate=0.04,
                seed=hyp_seed,
            )
        else:
            # seed 0 means derive a fresh per-transcript corruption stream
            spec = replace(
                injection,
                seed=hyp_seed if injection.seed == 0 else injection.seed,
            )
        hypothesis = inject_errors(reference, spec, INJECTION_VOCABULARY)
        hypothesis = Transcript(
            hypothesis.id, hypothesis.turns, TranscriptKind.HYPOTHESIS
        )
        out.append((reference, hypothesis))
    return out

import numpy as np
import pytest

from clinscribe import (
    EmbedderDescriptor,
    ExternalEmbedder,
    HashEmbedder,
    SpeakerRole,
    Transcript,
    cosine,
    segment_lines,
    transcript_similarity,
)
from clinscribe.service import SchemaMismatchError, ServiceEndpoint


class TestCosine:
    def test_identical_vectors(self):
        v = np.array([0.3, 1.2, -0.5])
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_hand_value(self):
        assert cosine(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(
            0.7071, abs=1e-4
        )

    def test_scale_invariance(self):
        a = np.array([0.2, -0.7, 1.5])
        b = np.array([1.1, 0.4, -0.3])
        assert cosine(7.0 * a, b) == pytest.approx(cosine(a, b), abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine(np.array([1.0]), np.array([1.0, 2.0]))

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine(np.zeros(3), np.ones(3))


class TestHashEmbedder:
    def test_same_text_same_vector(self):
        embedder = HashEmbedder()
        a = embedder.embed("the quick brown fox")
        b = embedder.embed("the quick brown fox")
        assert np.array_equal(a, b)
        assert cosine(a, b) == 1.0

    def test_disjoint_texts_orthogonal(self):
        embedder = HashEmbedder()
        # fixture tokens verified collision-free at dim 512 ("echo" would
        # share a bucket with "alpha")
        a = embedder.embed("alpha bravo charlie")
        b = embedder.embed("delta golf foxtrot")
        assert cosine(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_one_shared_of_two(self):
        embedder = HashEmbedder()
        assert cosine(
            embedder.embed("the cat"), embedder.embed("the dog")
        ) == pytest.approx(0.5, abs=1e-9)

    def test_unit_norm(self):
        embedder = HashEmbedder(dim=64)
        v = embedder.embed("a b c a")
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        assert v.shape == (64,)

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            HashEmbedder().embed("   ")

    def test_truncation_at_token_limit(self):
        embedder = HashEmbedder(dim=32, max_input_tokens=3)
        short = embedder.embed("a b c")
        long = embedder.embed("a b c d e f")
        assert np.array_equal(short, long)


def _transcript(lines, tid="t"):
    pairs = [
        (SpeakerRole.DOCTOR if i % 2 == 0 else SpeakerRole.PATIENT, line)
        for i, line in enumerate(lines)
    ]
    return Transcript.from_pairs(tid, pairs)


class TestSegmentation:
    def test_two_turns(self, simple_transcript):
        assert segment_lines(simple_transcript) == ["How are you?", "Fine."]

    def test_empty(self):
        assert segment_lines(Transcript("e", ())) == []

    def test_92_turns_preserve_order(self):
        lines = [f"line number {i} here" for i in range(92)]
        assert segment_lines(_transcript(lines)) == lines


class TestTranscriptSimilarity:
    def test_identical_transcripts(self):
        t = _transcript(["how are you", "fine thanks", "any pain today"])
        stat = transcript_similarity(t, t, HashEmbedder())
        assert stat.mean == pytest.approx(1.0, abs=1e-9)
        assert stat.n == 3

    def test_one_extra_line_scores_n_over_n_plus_one(self):
        ref_lines = [f"stable line {w}" for w in ["alpha", "bravo", "charlie", "delta"]]
        hyp_lines = ref_lines + ["an extra hallucinated line"]
        stat = transcript_similarity(
            _transcript(hyp_lines), _transcript(ref_lines), HashEmbedder()
        )
        n = len(ref_lines)
        assert stat.mean == n / (n + 1)
        assert stat.n == n + 1

    def test_disjoint_texts_score_zero(self):
        hyp = _transcript(["alpha bravo", "charlie delta"])
        ref = _transcript(["india foxtrot", "golf hotel"])
        stat = transcript_similarity(hyp, ref, HashEmbedder())
        assert stat.mean == pytest.approx(0.0, abs=1e-9)

    def test_empty_transcript_rejected(self):
        t = _transcript(["hello there"])
        with pytest.raises(ValueError):
            transcript_similarity(t, Transcript("e", ()), HashEmbedder())

    def test_indexed_pairing_strategy(self):
        hyp = _transcript(["one two", "three four", "five six"])
        ref = _transcript(["one two", "three four"])
        stat = transcript_similarity(hyp, ref, HashEmbedder(), pairing="indexed")
        assert stat.n == 3
        assert stat.mean == pytest.approx(2 / 3, abs=1e-9)

    def test_unknown_pairing_rejected(self):
        t = _transcript(["a line"])
        with pytest.raises(ValueError):
            transcript_similarity(t, t, HashEmbedder(), pairing="best")


class TestExternalEmbedder:
    DESC = EmbedderDescriptor(name="mock", max_input_tokens=512, dim=3)

    def test_round_trip(self, mock_service):
        mock_service.set_json({"vector": [1.0, 2.0, 3.0]})
        embedder = ExternalEmbedder(ServiceEndpoint(mock_service.url), self.DESC)
        v = embedder.embed("some text")
        assert np.array_equal(v, np.array([1.0, 2.0, 3.0]))
        assert mock_service.requests[0]["body"] == {"text": "some text"}

    def test_wrong_dimension_rejected(self, mock_service):
        mock_service.set_json({"vector": [1.0, 2.0]})
        embedder = ExternalEmbedder(ServiceEndpoint(mock_service.url), self.DESC)
        with pytest.raises(SchemaMismatchError):
            embedder.embed("text")

    def test_non_finite_rejected(self, mock_service):
        mock_service.set_json({"vector": [1.0, float("nan"), 0.0]})
        embedder = ExternalEmbedder(ServiceEndpoint(mock_service.url), self.DESC)
        with pytest.raises(SchemaMismatchError):
            embedder.embed("text")

    def test_missing_vector_key(self, mock_service):
        mock_service.set_json({"embedding": [1.0, 2.0, 3.0]})
        embedder = ExternalEmbedder(ServiceEndpoint(mock_service.url), self.DESC)
        with pytest.raises(SchemaMismatchError):
            embedder.embed("text")

    def test_truncates_to_descriptor_limit(self, mock_service):
        mock_service.set_json({"vector": [1.0, 0.0, 0.0]})
        descriptor = EmbedderDescriptor(name="tiny", max_input_tokens=2, dim=3)
        embedder = ExternalEmbedder(ServiceEndpoint(mock_service.url), descriptor)
        embedder.embed("one two three four")
        assert mock_service.requests[0]["body"] == {"text": "one two"}

import numpy as np
import pytest

from instrec import EmbeddingVector, HashedBagEmbedder, cosine_similarity
from instrec.exceptions import (
    DegenerateEmbedding,
    DimensionMismatch,
    EmptyText,
    ZeroNorm,
)


@pytest.fixture
def embedder():
    return HashedBagEmbedder()


def test_deterministic(embedder):
    a = embedder.embed("hotel reservation for two guests")
    b = embedder.embed("hotel reservation for two guests")
    assert np.array_equal(a.values, b.values)


def test_repetition_scales_out(embedder):
    assert np.array_equal(
        embedder.embed("hotel hotel").values, embedder.embed("hotel").values
    )


def test_identical_text_cosine_one(embedder):
    a = embedder.embed("hotel reservation")
    b = embedder.embed("hotel reservation")
    assert cosine_similarity(a, b) == 1.0


def test_self_similarity(embedder):
    v = embedder.embed("navigate to the station")
    assert cosine_similarity(v, v) == 1.0


def test_distinct_buckets_are_orthogonal(embedder):
    # FNV-1a mod 256 sends "alpha" to bucket 43 and "beta" to bucket 167.
    assert embedder.bucket("alpha") == 43
    assert embedder.bucket("beta") == 167
    assert cosine_similarity(embedder.embed("alpha"), embedder.embed("beta")) == 0.0


def test_antipodal(embedder):
    v = embedder.embed("alpha beta gamma")
    neg = EmbeddingVector.of(-v.values)
    assert cosine_similarity(v, neg) == -1.0


def test_symmetry_exact(embedder):
    a = embedder.embed("save the phone number")
    b = embedder.embed("navigate to the station")
    assert cosine_similarity(a, b) == cosine_similarity(b, a)


def test_scale_invariance(embedder):
    a = embedder.embed("check-in date and room type")
    b = embedder.embed("check-in date")
    for c in (0.25, 3.0, 1e6):
        scaled = EmbeddingVector.of(c * b.values)
        assert cosine_similarity(a, scaled) == pytest.approx(
            cosine_similarity(a, b), abs=1e-9
        )


def test_bag_of_words_order_insensitive(embedder):
    assert np.array_equal(
        embedder.embed("alpha beta").values, embedder.embed("beta alpha").values
    )


def test_case_insensitive(embedder):
    assert np.array_equal(
        embedder.embed("Hotel Reservation").values,
        embedder.embed("hotel reservation").values,
    )


def test_unit_norm(embedder):
    v = embedder.embed("one two three four")
    assert v.norm == pytest.approx(1.0, abs=1e-12)


def test_empty_text(embedder):
    with pytest.raises(EmptyText):
        embedder.embed("")


def test_whitespace_only(embedder):
    with pytest.raises(DegenerateEmbedding):
        embedder.embed("   \t  ")


def test_dimension_mismatch():
    a = EmbeddingVector.of([1.0, 0.0])
    b = EmbeddingVector.of([1.0, 0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        cosine_similarity(a, b)


def test_zero_norm():
    a = EmbeddingVector.of([0.0, 0.0])
    b = EmbeddingVector.of([1.0, 0.0])
    with pytest.raises(ZeroNorm):
        cosine_similarity(a, b)


def test_clamped_to_unit_interval(embedder):
    # Many shared words: the raw dot product may overshoot 1 by rounding.
    text = " ".join(f"word{i}" for i in range(200))
    a = embedder.embed(text)
    b = embedder.embed(text)
    assert -1.0 <= cosine_similarity(a, b) <= 1.0


def test_cached_norm_validated():
    with pytest.raises(ValueError):
        EmbeddingVector(values=np.array([3.0, 4.0]), norm=1.0)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        EmbeddingVector.of([np.inf, 0.0])

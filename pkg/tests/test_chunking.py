import math

import pytest

from pheno_mine.chunking import (
    chunk_text,
    estimate_tokens,
    pack_chunks,
    segment_sentences,
)
from pheno_mine.errors import ParameterError


def test_estimate_tokens_is_ceiling_of_quarter_chars():
    assert estimate_tokens("") == 0
    assert estimate_tokens("abcd") == 1
    assert estimate_tokens("abcde") == 2
    assert estimate_tokens("x" * 41) == math.ceil(41 / 4)


def test_basic_sentence_split():
    text = "Patient stable. Denies pain! Follow up in two weeks? Labs pending."
    assert segment_sentences(text) == [
        "Patient stable.",
        "Denies pain!",
        "Follow up in two weeks?",
        "Labs pending.",
    ]


def test_boundary_requires_following_capital_or_digit():
    assert segment_sentences("Gave 0.5 mg. she tolerated it.") == [
        "Gave 0.5 mg. she tolerated it."
    ]
    assert segment_sentences("Gave 0.5 mg. She tolerated it.") == [
        "Gave 0.5 mg.",
        "She tolerated it.",
    ]
    assert segment_sentences("Checked at 8 am. 2 hours later repeat.") == [
        "Checked at 8 am.",
        "2 hours later repeat.",
    ]


def test_abbreviations_do_not_split():
    assert segment_sentences("Seen by Dr. Smith today. Stable overnight.") == [
        "Seen by Dr. Smith today.",
        "Stable overnight.",
    ]
    assert segment_sentences("Plan per Mrs. Jones. Continue meds.") == [
        "Plan per Mrs. Jones.",
        "Continue meds.",
    ]
    assert segment_sentences("Compare vs. Baseline values.") == [
        "Compare vs. Baseline values."
    ]


def test_abbreviation_guard_is_case_sensitive():
    # lowercase "pt." is not the guarded "Pt." token, so the boundary fires
    assert segment_sentences("Dr. Smith saw pt. Pt stable.") == [
        "Dr. Smith saw pt.",
        "Pt stable.",
    ]


def test_decimal_numbers_do_not_split():
    assert segment_sentences("CDR was 1.0 today. Gait steady.") == [
        "CDR was 1.0 today.",
        "Gait steady.",
    ]


def test_whitespace_normalized_within_sentences():
    assert segment_sentences("Patient   stable.\nDenies  pain.") == [
        "Patient stable.",
        "Denies pain.",
    ]


def test_empty_and_blank_text():
    assert segment_sentences("") == []
    assert segment_sentences("   \n\t ") == []
    assert chunk_text("", 100) == []


def test_packing_respects_budget_and_order():
    sentences = ["one two three.", "four five six.", "seven eight nine."]
    # each sentence estimates to 4 tokens; budget 8 fits two per chunk
    chunks = pack_chunks(sentences, 8, "N1")
    assert [c.chunk_index for c in chunks] == list(range(len(chunks)))
    assert all(c.estimated_tokens <= 8 for c in chunks)
    joined = " ".join(c.text for c in chunks)
    assert joined == " ".join(sentences)


def test_single_oversized_sentence_is_flagged_not_split():
    big = "word " * 200
    chunks = pack_chunks([big.strip()], 10, "N1")
    assert len(chunks) == 1
    assert chunks[0].oversized
    assert chunks[0].estimated_tokens > 10


def test_hard_limit_splits_oversized_sentences_on_whitespace():
    big = ("word " * 200).strip()
    chunks = pack_chunks([big], 10, "N1", hard_limit=10)
    assert len(chunks) > 1
    # pieces stay flagged: the sentence-boundary guarantee was broken
    assert all(c.oversized for c in chunks)
    assert all(c.estimated_tokens <= 10 for c in chunks)
    reassembled = " ".join(c.text for c in chunks)
    assert reassembled == big


def test_hard_limit_slices_single_giant_token():
    giant = "x" * 400
    chunks = pack_chunks([giant], 10, "N1", hard_limit=10)
    assert all(len(c.text) <= 40 for c in chunks)
    assert "".join(c.text for c in chunks) == giant


def test_budget_must_be_positive():
    with pytest.raises(ParameterError):
        pack_chunks(["abc."], 0, "N1")


def test_chunk_text_union_preserves_all_sentences(demo_notes):
    for record in demo_notes[:5]:
        sentences = segment_sentences(record.text)
        chunks = chunk_text(record.text, 50, record.note_id)
        rebuilt = " ".join(c.text for c in chunks)
        assert rebuilt == " ".join(sentences)
        assert all(c.note_id == record.note_id for c in chunks)

import json

import pytest

from pheno_mine.cohort import CohortManifest, ManifestEntry, NoteRecord
from pheno_mine.errors import MatrixError
from pheno_mine.extraction import (
    ExtractionProfile,
    aggregate_by_patient,
    build_feature_matrix,
    extract_note,
    extract_notes,
    normalize_token,
    parse_response,
    plan_requests,
    write_reject_log,
)
from pheno_mine.chunking import chunk_text
from pheno_mine.errors import TransientBackendError
from pheno_mine.gateway import LlmGateway


def test_normalize_token():
    assert normalize_token("  Hypertension ") == "hypertension"
    assert normalize_token("'misplacing'") == "misplacing"
    assert normalize_token("‘repeating’") == "repeating"
    assert normalize_token("atrophy.") == "atrophy"
    assert normalize_token("two   words") == "two words"


def test_parse_response_maps_display_names_and_aliases(list1):
    memory = list1.category("Memory Indicators")
    assert parse_response("repeating, misplacing", memory) == {"repeating", "misplacing"}
    assert parse_response("Repeats questions", memory) == {"repeating"}
    assert parse_response("none", memory) == set()
    assert parse_response("None.", memory) == set()
    assert parse_response("", memory) == set()
    assert parse_response("   ", memory) == set()


def test_parse_response_collects_rejects(list1):
    memory = list1.category("Memory Indicators")
    rejects: list[str] = []
    ids = parse_response("repeating, flying, none, misplacing", memory, rejects)
    assert ids == {"repeating", "misplacing"}
    assert rejects == ["flying"]


def test_parse_response_duplicate_tokens_collapse(list1):
    memory = list1.category("Memory Indicators")
    assert parse_response("repeating, repeating, repetition", memory) == {"repeating"}


def test_plan_requests_is_chunk_by_category(combined):
    chunks = chunk_text("First sentence here. Second sentence here.", 6, "N1")
    assert len(chunks) == 2
    plan = plan_requests(chunks, combined)
    assert len(plan) == 2 * len(combined.categories)
    # deterministic order: chunk-major, category-minor
    first_block = plan[: len(combined.categories)]
    assert all(chunk is chunks[0] for chunk, _, _ in first_block)
    assert [cat.name for _, cat, _ in first_block] == [
        c.name for c in combined.categories
    ]


def test_extract_note_unions_chunks(mock_gateway, combined):
    text = (
        "Past medical history includes hypertension managed with lisinopril. "
        "Imaging showed generalized cortical atrophy."
    )
    note = NoteRecord("N1", "P1", text)
    # budget of 15 tokens forces the two sentences into separate chunks
    profile = extract_note(note, combined, mock_gateway, chunk_budget=15)
    assert not profile.incomplete
    assert profile.present.get("list1:Comorbidities") == {"hypertension"}
    assert profile.present.get("list1:Neuroimaging findings") == {"atrophy"}


class SometimesDownBackend:
    """Fails every completion whose prompt mentions a chosen category."""

    backend_id = "flaky"

    def __init__(self, inner, broken_phrase):
        self.inner = inner
        self.broken_phrase = broken_phrase

    def complete_text(self, request):
        if self.broken_phrase in request.prompt:
            raise TransientBackendError("backend down for this category")
        return self.inner.complete_text(request)


def test_extract_note_marks_incomplete_but_continues(combined, mock_gateway):
    backend = SometimesDownBackend(mock_gateway.backend, "comorbidities of ADRD")
    gateway = LlmGateway(backend, max_attempts=2, sleep=lambda _: None)
    text = (
        "Past medical history includes hypertension managed with lisinopril. "
        "Imaging showed generalized cortical atrophy."
    )
    note = NoteRecord("N1", "P1", text)
    profile = extract_note(note, combined, gateway)
    assert profile.incomplete
    # the unaffected category still extracted
    assert profile.present.get("list1:Neuroimaging findings") == {"atrophy"}
    assert "list1:Comorbidities" not in profile.present


def test_extract_notes_counts_failures(combined, mock_gateway):
    backend = SometimesDownBackend(mock_gateway.backend, "comorbidities of ADRD")
    gateway = LlmGateway(backend, max_attempts=1, sleep=lambda _: None)
    notes = [
        NoteRecord("N1", "P1", "Note text one."),
        NoteRecord("N2", "P2", "Note text two."),
    ]
    profiles, failures = extract_notes(notes, combined, gateway)
    assert failures == 2  # one failed category per note
    assert all(p.incomplete for p in profiles)


def manifest_for(notes, cohorts):
    entries = tuple(
        ManifestEntry(n.note_id, n.patient_id, c) for n, c in zip(notes, cohorts)
    )
    return CohortManifest(entries=entries, seed=0)


def test_build_feature_matrix_rows_follow_manifest(combined, mock_gateway):
    notes = [
        NoteRecord("N1", "P1", "Past medical history includes hypertension managed with lisinopril."),
        NoteRecord("N2", "P2", "Imaging showed generalized cortical atrophy."),
    ]
    profiles, failures = extract_notes(notes, combined, mock_gateway)
    assert failures == 0
    manifest = manifest_for(notes, ["CN", "ADRD"])
    matrix = build_feature_matrix(profiles, combined, manifest)
    assert matrix.note_ids == ["N1", "N2"]
    assert matrix.cohorts == ["CN", "ADRD"]
    assert matrix.shape == (2, 37)
    by_key = {c.key: c.index for c in matrix.columns}
    assert matrix.data[0, by_key["list1:Comorbidities:hypertension"]] == 1
    assert matrix.data[1, by_key["list1:Neuroimaging findings:atrophy"]] == 1
    assert matrix.data.sum() == 2


def test_build_feature_matrix_missing_profile_is_zero_row(combined, mock_gateway, caplog):
    notes = [NoteRecord("N1", "P1", "Past medical history includes hypertension managed with lisinopril.")]
    profiles, _ = extract_notes(notes, combined, mock_gateway)
    manifest = manifest_for(
        [notes[0], NoteRecord("N2", "P2", "x")], ["CN", "ADRD"]
    )
    with caplog.at_level("WARNING"):
        matrix = build_feature_matrix(profiles, combined, manifest)
    assert matrix.shape == (2, 37)
    assert matrix.data[1].sum() == 0
    assert any("N2" in r.message for r in caplog.records)


def test_build_feature_matrix_unknown_note_rejected(combined, mock_gateway):
    notes = [NoteRecord("N1", "P1", "text")]
    profiles, _ = extract_notes(notes, combined, mock_gateway)
    manifest = manifest_for([NoteRecord("N9", "P9", "y")], ["CN"])
    with pytest.raises(MatrixError, match="N1"):
        build_feature_matrix(profiles, combined, manifest)


def test_aggregate_by_patient_ors_rows_and_keeps_severe_cohort(combined, mock_gateway):
    notes = [
        NoteRecord("N1", "P1", "Past medical history includes hypertension managed with lisinopril."),
        NoteRecord("N2", "P1", "Imaging showed generalized cortical atrophy."),
        NoteRecord("N3", "P2", "Nothing to report."),
    ]
    profiles, _ = extract_notes(notes, combined, mock_gateway)
    manifest = manifest_for(notes, ["CN", "ADRD", "MCI"])
    matrix = build_feature_matrix(profiles, combined, manifest)
    per_patient = aggregate_by_patient(matrix, manifest)
    assert per_patient.note_ids == ["P1", "P2"]
    assert per_patient.cohorts == ["ADRD", "MCI"]
    by_key = {c.key: c.index for c in per_patient.columns}
    assert per_patient.data[0, by_key["list1:Comorbidities:hypertension"]] == 1
    assert per_patient.data[0, by_key["list1:Neuroimaging findings:atrophy"]] == 1
    assert per_patient.data[1].sum() == 0


def test_reject_log_jsonl(tmp_path, combined):
    profile = ExtractionProfile(note_id="N1")
    rejects: list[str] = []
    parse_response("flying car", combined.category("Comorbidities"), rejects)
    from pheno_mine.extraction import RejectedToken

    profile.rejects.append(RejectedToken("N1", 0, "list1:Comorbidities", rejects[0]))
    path = tmp_path / "rejects.jsonl"
    write_reject_log([profile], path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    doc = json.loads(lines[0])
    assert doc == {
        "note_id": "N1",
        "chunk_index": 0,
        "category": "list1:Comorbidities",
        "token": "flying car",
    }


def test_demo_corpus_against_truth(demo_notes, demo_manifest, demo_truth, combined, mock_gateway):
    profiles, failures = extract_notes(demo_notes, combined, mock_gateway)
    assert failures == 0
    matrix = build_feature_matrix(profiles, combined, demo_manifest)
    for i, note_id in enumerate(matrix.note_ids):
        got = {c.key for c, v in zip(matrix.columns, matrix.data[i]) if v}
        assert got == demo_truth.get(note_id, set()), note_id

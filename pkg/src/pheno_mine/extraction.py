"""Parsing of constrained model outputs and assembly of the feature matrix.

Each (chunk, category) pair yields one completion. Tokens are matched against
the category's candidate display names and aliases; the per-note profile is
the union over chunks, so adding a chunk can only add phenotypes.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chunking import DEFAULT_CHUNK_BUDGET, Chunk, chunk_text
from .cohort import CohortManifest, NoteRecord
from .errors import MatrixError, PhenoMineError
from .features import FeatureMatrix
from .gateway import DEFAULT_MODEL, CompletionRequest, LlmGateway
from .prompts import render_prompt
from .schema import PhenotypeCategory, PhenotypeList, feature_index

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RejectedToken:
    note_id: str
    chunk_index: int
    category: str
    token: str


@dataclass
class ExtractionProfile:
    """Per-note extraction result: category key -> set of phenotype ids."""

    note_id: str
    present: dict = field(default_factory=dict)
    # (category key, phenotype id) -> number of chunks that contributed it
    provenance: Counter = field(default_factory=Counter)
    rejects: list = field(default_factory=list)
    # (chunk index, category key) pairs whose completion failed
    incomplete: list = field(default_factory=list)

    def merge_chunk(self, chunk_index: int, category: PhenotypeCategory, ids: set):
        bucket = self.present.setdefault(category.key(), set())
        bucket.update(ids)
        for pid in ids:
            self.provenance[(category.key(), pid)] += 1

    @property
    def is_empty(self) -> bool:
        return not any(self.present.values())


def normalize_token(raw: str) -> str:
    """Trim whitespace and surrounding quotes/periods, collapse spaces, lowercase."""
    token = raw.strip().strip("'\"`‘’“”. ")
    return " ".join(token.split()).lower()


def parse_response(
    text: str,
    category: PhenotypeCategory,
    rejects: "list[str] | None" = None,
) -> set:
    """Comma-separated display names / aliases -> set of phenotype ids.

    "none" contributes nothing; unknown tokens are dropped (and appended to
    `rejects` when given) so one odd completion never aborts a run.
    """
    ids: set[str] = set()
    if not text or not text.strip():
        return ids
    for raw in text.split(","):
        token = normalize_token(raw)
        if not token or token == "none":
            continue
        matched = None
        for candidate in category.candidates:
            if candidate.matches(token):
                matched = candidate.id
                break
        if matched is None:
            if rejects is not None:
                rejects.append(token)
            logger.debug("category %s: dropping unknown token %r", category.name, token)
        else:
            ids.add(matched)
    return ids


def plan_requests(
    chunks: "list[Chunk]",
    plist: PhenotypeList,
    mode: str = "zero_shot",
    model: str = DEFAULT_MODEL,
    temperature: float = 0.0,
    max_output_tokens: int = 64,
) -> "list[tuple[Chunk, PhenotypeCategory, CompletionRequest]]":
    """One request per chunk x category, in deterministic order."""
    plan = []
    for chunk in chunks:
        for category in plist.categories:
            request = CompletionRequest(
                prompt=render_prompt(category, chunk, mode),
                model=model,
                temperature=temperature,
                max_output_tokens=max_output_tokens,
            )
            plan.append((chunk, category, request))
    return plan


def _merge_result(
    profile: ExtractionProfile, chunk: Chunk, category: PhenotypeCategory, text: str
):
    unknown: list[str] = []
    ids = parse_response(text, category, rejects=unknown)
    profile.merge_chunk(chunk.chunk_index, category, ids)
    for token in unknown:
        profile.rejects.append(
            RejectedToken(profile.note_id, chunk.chunk_index, category.key(), token)
        )


def extract_note(
    note: NoteRecord,
    plist: PhenotypeList,
    gateway: LlmGateway,
    mode: str = "zero_shot",
    chunk_budget: int = DEFAULT_CHUNK_BUDGET,
    model: str = DEFAULT_MODEL,
    temperature: float = 0.0,
    max_output_tokens: int = 64,
) -> ExtractionProfile:
    """Extract one note serially; completion failures mark the (chunk, category)
    incomplete and the rest of the note still completes."""
    profile = ExtractionProfile(note_id=note.note_id)
    chunks = chunk_text(note.text, budget=chunk_budget, note_id=note.note_id)
    plan = plan_requests([c for c in chunks], plist, mode, model, temperature, max_output_tokens)
    for chunk, category, request in plan:
        try:
            response = gateway.complete(request)
        except PhenoMineError as exc:
            logger.warning(
                "note %s chunk %d category %s: completion failed: %s",
                note.note_id,
                chunk.chunk_index,
                category.name,
                exc,
            )
            profile.incomplete.append((chunk.chunk_index, category.key()))
            continue
        _merge_result(profile, chunk, category, response.text)
    return profile


def extract_notes(
    notes: "list[NoteRecord]",
    plist: PhenotypeList,
    gateway: LlmGateway,
    mode: str = "zero_shot",
    chunk_budget: int = DEFAULT_CHUNK_BUDGET,
    max_in_flight: int = 4,
    model: str = DEFAULT_MODEL,
    temperature: float = 0.0,
    max_output_tokens: int = 64,
) -> "tuple[list[ExtractionProfile], int]":
    """Extract a corpus through the bounded-concurrency batch interface.

    Returns the profiles (input order) and the number of failed completions.
    """
    profiles = [ExtractionProfile(note_id=n.note_id) for n in notes]
    plan: list[tuple[int, Chunk, PhenotypeCategory, CompletionRequest]] = []
    for i, note in enumerate(notes):
        chunks = chunk_text(note.text, budget=chunk_budget, note_id=note.note_id)
        for chunk, category, request in plan_requests(
            chunks, plist, mode, model, temperature, max_output_tokens
        ):
            plan.append((i, chunk, category, request))
    batch = gateway.complete_batch([p[3] for p in plan], max_in_flight=max_in_flight)
    failed_indices = {index for index, _ in batch.failures}
    for j, (i, chunk, category, _request) in enumerate(plan):
        if j in failed_indices:
            profiles[i].incomplete.append((chunk.chunk_index, category.key()))
            continue
        response = batch.responses[j]
        _merge_result(profiles[i], chunk, category, response.text)
    for index, message in batch.failures:
        note_index = plan[index][0]
        logger.warning("note %s: completion failed: %s", notes[note_index].note_id, message)
    return profiles, len(batch.failures)


def build_feature_matrix(
    profiles: "list[ExtractionProfile]",
    plist: PhenotypeList,
    manifest: CohortManifest,
) -> FeatureMatrix:
    """Profiles + manifest -> binary matrix with rows in manifest order."""
    columns = feature_index(plist)
    column_of = {c.key: c.index for c in columns}
    manifest_ids = {e.note_id for e in manifest.entries}
    by_note = {}
    for profile in profiles:
        if profile.note_id not in manifest_ids:
            raise MatrixError(
                f"profile for note {profile.note_id!r} does not appear in the manifest"
            )
        by_note[profile.note_id] = profile
    data = np.zeros((len(manifest.entries), len(columns)), dtype=np.int8)
    for row, entry in enumerate(manifest.entries):
        profile = by_note.get(entry.note_id)
        if profile is None:
            logger.warning("note %s has no extraction profile; row left all-zero", entry.note_id)
            continue
        for category_key, ids in profile.present.items():
            for pid in ids:
                key = f"{category_key}:{pid}"
                col = column_of.get(key)
                if col is None:
                    raise MatrixError(
                        f"profile for note {entry.note_id!r} references {key!r}, "
                        "which is not a column of the active list"
                    )
                data[row, col] = 1
    return FeatureMatrix(
        note_ids=[e.note_id for e in manifest.entries],
        cohorts=[e.cohort for e in manifest.entries],
        columns=columns,
        data=data,
    )


def aggregate_by_patient(matrix: FeatureMatrix, manifest: CohortManifest) -> FeatureMatrix:
    """Optional patient-level view: OR of each patient's note rows.

    Patients keep the most severe cohort label among their notes
    (ADRD over MCI over CN). Row order follows first appearance.
    """
    patient_of = manifest.patient_of()
    severity = {"CN": 0, "MCI": 1, "ADRD": 2}
    order: list[str] = []
    rows: dict[str, np.ndarray] = {}
    cohorts: dict[str, str] = {}
    for i, note_id in enumerate(matrix.note_ids):
        patient = patient_of.get(note_id, note_id)
        if patient not in rows:
            order.append(patient)
            rows[patient] = matrix.data[i].copy()
            cohorts[patient] = matrix.cohorts[i]
        else:
            rows[patient] = np.maximum(rows[patient], matrix.data[i])
            if severity.get(matrix.cohorts[i], -1) > severity.get(cohorts[patient], -1):
                cohorts[patient] = matrix.cohorts[i]
    data = np.vstack([rows[p] for p in order]) if order else np.zeros(
        (0, len(matrix.columns)), dtype=np.int8
    )
    return FeatureMatrix(
        note_ids=order,
        cohorts=[cohorts[p] for p in order],
        columns=matrix.columns,
        data=data,
    )


def write_reject_log(profiles: "list[ExtractionProfile]", path: str | Path):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for profile in profiles:
            for reject in profile.rejects:
                fh.write(
                    json.dumps(
                        {
                            "note_id": reject.note_id,
                            "chunk_index": reject.chunk_index,
                            "category": reject.category,
                            "token": reject.token,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

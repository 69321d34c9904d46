"""Baseline feature builders: dictionary concept matching and NER ingestion.

Both baselines produce one-hot concept matrices in the same FeatureMatrix
container the prompt pipeline uses, so statistics and clustering run on them
unchanged.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cohort import NoteRecord, UNLABELED
from .errors import BaselineError, ParameterError
from .features import FeatureMatrix
from .schema import FeatureColumn

logger = logging.getLogger(__name__)

DEFAULT_MIN_TERM_LENGTH = 4
DEFAULT_MIN_DOC_FREQ = 50
DEFAULT_MIN_NER_SCORE = 0.8
MAX_NGRAM = 5

_TOKEN_RE = re.compile(r"[a-z0-9']+")


def _tokenize(text: str) -> list:
    return _TOKEN_RE.findall(text.lower())


def normalize_term(term: str) -> str:
    """Lowercase, tokenize, and re-join with single spaces."""
    return " ".join(_tokenize(term))


def _column_safe(concept: str) -> str:
    """Concept ids become column-key segments, which cannot contain ':'."""
    if ":" in concept:
        safe = concept.replace(":", "_")
        logger.warning("concept id %r contains ':'; renamed to %r for matrix columns", concept, safe)
        return safe
    return concept


@dataclass
class ConceptDictionary:
    terms: dict  # normalized term -> concept id
    min_term_length: int
    # concept id -> note count from the most recent corpus scan
    document_frequency: dict = field(default_factory=dict)

    @property
    def max_term_tokens(self) -> int:
        if not self.terms:
            return 1
        return max(len(t.split()) for t in self.terms)


def build_dictionary(
    term_file: str | Path, min_term_length: int = DEFAULT_MIN_TERM_LENGTH
) -> ConceptDictionary:
    """Load a term,concept_id CSV, dropping terms of length <= min_term_length.

    Duplicate normalized terms keep the first concept id with a warning.
    """
    path = Path(term_file)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise BaselineError(f"cannot read term file {path}: {exc}") from exc
    terms: dict[str, str] = {}
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            logger.warning("term file %s is empty; dictionary has no terms", path)
            return ConceptDictionary(terms={}, min_term_length=min_term_length)
        if not {"term", "concept_id"}.issubset(reader.fieldnames):
            raise BaselineError(f"{path}: term file must have columns term,concept_id")
        for lineno, row in enumerate(reader, start=2):
            term = normalize_term(row["term"] or "")
            concept = (row["concept_id"] or "").strip()
            if not term or not concept:
                logger.warning("%s:%d: skipping row with empty term or concept", path, lineno)
                continue
            if len(term) <= min_term_length:
                logger.debug("dropping term %r: length %d <= %d", term, len(term), min_term_length)
                continue
            if term in terms:
                logger.warning(
                    "%s:%d: duplicate term %r; keeping first concept %r",
                    path,
                    lineno,
                    term,
                    terms[term],
                )
                continue
            terms[term] = _column_safe(concept)
    if not terms:
        logger.warning("term file %s produced an empty dictionary", path)
    return ConceptDictionary(terms=terms, min_term_length=min_term_length)


def _concept_columns(concepts: list) -> list:
    return [
        FeatureColumn(index=i, list_id="dict", category="concepts", phenotype_id=c)
        for i, c in enumerate(concepts)
    ]


def _note_concepts_exact(tokens: list, dictionary: ConceptDictionary, max_n: int) -> set:
    found: set[str] = set()
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            gram = " ".join(tokens[i : i + n])
            concept = dictionary.terms.get(gram)
            if concept is not None:
                found.add(concept)
    return found


def _note_concepts_jaccard(
    tokens: list, dictionary: ConceptDictionary, max_n: int, threshold: float
) -> set:
    term_sets = [(frozenset(term.split()), concept) for term, concept in dictionary.terms.items()]
    found: set[str] = set()
    seen_grams: set[frozenset] = set()
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            gram_set = frozenset(tokens[i : i + n])
            if gram_set in seen_grams:
                continue
            seen_grams.add(gram_set)
            for term_set, concept in term_sets:
                if concept in found:
                    continue
                union = len(gram_set | term_set)
                if union == 0:
                    continue
                if len(gram_set & term_set) / union >= threshold:
                    found.add(concept)
    return found


def extract_dictionary_features(
    notes: "list[NoteRecord]",
    dictionary: ConceptDictionary,
    min_doc_freq: int = DEFAULT_MIN_DOC_FREQ,
    similarity_threshold: float = 1.0,
) -> FeatureMatrix:
    """Scan token n-grams (n <= 5) per note and one-hot the matched concepts.

    At threshold 1.0 matching is exact on normalized n-grams; below 1.0 an
    n-gram matches a term when their token-set Jaccard similarity reaches the
    threshold. Concepts found in fewer than min_doc_freq notes are dropped.
    The dictionary's document_frequency field records this scan's counts.
    """
    if not notes:
        raise BaselineError("dictionary extraction needs a non-empty note collection")
    if not 0.0 < similarity_threshold <= 1.0:
        raise ParameterError(
            f"similarity threshold must be in (0, 1], got {similarity_threshold}"
        )
    if min_doc_freq < 0:
        raise ParameterError(f"min_doc_freq must be >= 0, got {min_doc_freq}")
    # Exact matching cannot match grams longer than the longest term, so the
    # window can shrink; Jaccard mode must scan the full n <= 5 range.
    exact_max_n = min(MAX_NGRAM, dictionary.max_term_tokens)
    hits_per_note: list[set] = []
    for note in notes:
        tokens = _tokenize(note.text)
        if similarity_threshold == 1.0:
            found = _note_concepts_exact(tokens, dictionary, exact_max_n)
        else:
            found = _note_concepts_jaccard(tokens, dictionary, MAX_NGRAM, similarity_threshold)
        hits_per_note.append(found)
    frequency: dict[str, int] = {}
    for found in hits_per_note:
        for concept in found:
            frequency[concept] = frequency.get(concept, 0) + 1
    dictionary.document_frequency = dict(sorted(frequency.items()))
    surviving = sorted(c for c, df in frequency.items() if df >= min_doc_freq)
    column_of = {c: i for i, c in enumerate(surviving)}
    data = np.zeros((len(notes), len(surviving)), dtype=np.int8)
    for row, found in enumerate(hits_per_note):
        for concept in found:
            col = column_of.get(concept)
            if col is not None:
                data[row, col] = 1
    return FeatureMatrix(
        note_ids=[n.note_id for n in notes],
        cohorts=[n.cohort for n in notes],
        columns=_concept_columns(surviving),
        data=data,
    )


def ingest_ner_annotations(
    file: str | Path, min_score: float = DEFAULT_MIN_NER_SCORE
) -> FeatureMatrix:
    """Read a {note_id, concept, score} JSONL file into a one-hot matrix.

    Annotations under min_score are discarded; malformed lines are skipped
    with a warning, and a file with only malformed lines is an error. Rows
    follow first appearance of each note; columns are sorted concept ids.
    """
    path = Path(file)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise BaselineError(f"cannot read annotation file {path}: {exc}") from exc
    note_order: list[str] = []
    note_concepts: dict[str, set] = {}
    concepts: set[str] = set()
    malformed = 0
    parsed = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            note_id = doc["note_id"]
            concept = doc["concept"]
            score = float(doc["score"])
            if not isinstance(note_id, str) or not isinstance(concept, str) or not concept:
                raise TypeError("note_id and concept must be non-empty strings")
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"score {score} outside [0, 1]")
        except (ValueError, KeyError, TypeError) as exc:
            logger.warning("%s:%d: skipping malformed annotation: %s", path, lineno, exc)
            malformed += 1
            continue
        parsed += 1
        if score < min_score:
            continue
        if note_id not in note_concepts:
            note_order.append(note_id)
            note_concepts[note_id] = set()
        safe = _column_safe(concept)
        note_concepts[note_id].add(safe)
        concepts.add(safe)
    if parsed == 0 and malformed > 0:
        raise BaselineError(f"{path}: all {malformed} annotation lines are malformed")
    ordered_concepts = sorted(concepts)
    column_of = {c: i for i, c in enumerate(ordered_concepts)}
    data = np.zeros((len(note_order), len(ordered_concepts)), dtype=np.int8)
    for row, note_id in enumerate(note_order):
        for concept in note_concepts[note_id]:
            data[row, column_of[concept]] = 1
    columns = [
        FeatureColumn(index=i, list_id="ner", category="concepts", phenotype_id=c)
        for i, c in enumerate(ordered_concepts)
    ]
    return FeatureMatrix(
        note_ids=note_order,
        cohorts=[UNLABELED] * len(note_order),
        columns=columns,
        data=data,
    )


def attach_cohorts(matrix: FeatureMatrix, cohort_of: dict) -> FeatureMatrix:
    """Fill cohort labels from a note_id -> cohort mapping (e.g. a manifest)."""
    cohorts = [cohort_of.get(note_id, UNLABELED) for note_id in matrix.note_ids]
    return FeatureMatrix(
        note_ids=list(matrix.note_ids),
        cohorts=cohorts,
        columns=list(matrix.columns),
        data=matrix.data.copy(),
    )

import pytest

from pheno_mine.chunking import Chunk
from pheno_mine.errors import ConfigError
from pheno_mine.prompts import (
    NOTE_MARKER,
    candidate_phrase,
    category_phrase_of,
    note_section_of,
    render_few_shot,
    render_prompt,
    render_zero_shot,
)

GOLDEN_COMORBIDITIES_BODY = (
    "You are analyzing a segment of a clinical nursing note. "
    "Extract the patient’s comorbidities of ADRD from the given discharge note. "
    "Please choose from ‘hypertension’ and ‘depression’. "
    "Return only the combination of the above outputs or ‘none’ "
    "if none are mentioned in the note."
)


def normalize_quotes(text: str) -> str:
    for fancy in "‘’‛`":
        text = text.replace(fancy, "'")
    for fancy in "“”":
        text = text.replace(fancy, '"')
    return text


def test_comorbidities_zero_shot_matches_golden_body(list1):
    category = list1.category("Comorbidities")
    prompt = render_zero_shot(category, "TEXT")
    body = prompt.split(f" {NOTE_MARKER}")[0]
    assert normalize_quotes(body) == normalize_quotes(GOLDEN_COMORBIDITIES_BODY)


def test_zero_shot_appends_note_marker_and_text(list1):
    category = list1.category("Comorbidities")
    prompt = render_zero_shot(category, "Patient has hypertension.")
    assert prompt.endswith(f"{NOTE_MARKER} Patient has hypertension.")


def test_candidate_phrase_cardinalities(list1, list2):
    single = list1.category("Family history")
    assert candidate_phrase(single) == "'family history'"
    pair = list1.category("Comorbidities")
    assert candidate_phrase(pair) == "'hypertension' and 'depression'"
    many = list2.category("Memory")
    assert candidate_phrase(many) == (
        "'recent events', 'remote events', 'misplacing', and 'missing appointments'"
    )


def test_prompt_accepts_chunk_objects(list1):
    category = list1.category("Comorbidities")
    chunk = Chunk("N1", 0, "Has hypertension.", 5)
    assert render_zero_shot(category, chunk).endswith("Has hypertension.")


def test_few_shot_appends_examples_before_note(list1):
    category = list1.category("Comorbidities")
    prompt = render_few_shot(category, "TEXT")
    assert "Examples:" in prompt
    assert prompt.count("Note: ") == 3
    assert prompt.count("Output: ") == 3
    assert prompt.index("Examples:") < prompt.index(NOTE_MARKER)
    assert prompt.endswith(f"{NOTE_MARKER} TEXT")


def test_few_shot_requires_examples(list1):
    category = list1.category("Comorbidities")
    bare = type(category)(
        name=category.name,
        candidates=category.candidates,
        few_shot_examples=(),
        prompt_phrase=category.prompt_phrase,
        namespace=category.namespace,
    )
    with pytest.raises(ConfigError, match="few-shot"):
        render_few_shot(bare, "TEXT")


def test_render_prompt_mode_dispatch(list1):
    category = list1.category("Comorbidities")
    assert render_prompt(category, "T", "zero_shot") == render_zero_shot(category, "T")
    assert render_prompt(category, "T", "few_shot") == render_few_shot(category, "T")
    with pytest.raises(ConfigError):
        render_prompt(category, "T", "one_shot")


def test_prompt_introspection_roundtrip(combined):
    for category in combined.categories:
        prompt = render_zero_shot(category, "SOME NOTE TEXT")
        assert note_section_of(prompt) == "SOME NOTE TEXT"
        assert category_phrase_of(prompt) == category.phrase()


def test_distinct_categories_render_distinct_phrases(combined):
    phrases = [c.phrase() for c in combined.categories]
    assert len(phrases) == len(set(phrases))
    # the look-alike pair stays distinguishable
    assert "memory indicators of ADRD" in phrases
    assert "memory" in phrases

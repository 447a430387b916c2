import pytest
from hypothesis import given
from hypothesis import strategies as st

from asa.errors import SplittingError, TransportError
from asa.splitting import (
    NO_ANSWER,
    CallableBackend,
    HeuristicSplitterBackend,
    Source,
    SplitAlignment,
    build_prompt,
    fallback_split,
    parse_prompt,
    split_response,
)
from asa.text import sentences

QUESTIONS = ["What is in the picture?", "What happens next?"]
ANSWER = "A dog runs. Then it rains."


# -- prompt wire format ----------------------------------------------------------


def test_prompt_round_trips_questions_and_answer():
    prompt = build_prompt(QUESTIONS, ANSWER)
    assert parse_prompt(prompt) == (QUESTIONS, ANSWER)


def test_prompt_escapes_embedded_markers():
    tricky_q = "Q1: is this confusing?"
    tricky_a = "A1: yes.\nA2: very."
    prompt = build_prompt([tricky_q], tricky_a)
    questions, answer = parse_prompt(prompt)
    assert questions == [tricky_q]
    # newlines fold to spaces; marker text survives
    assert answer == "A1: yes. A2: very."


def test_build_prompt_rejects_empty_input():
    with pytest.raises(ValueError):
        build_prompt([], ANSWER)
    with pytest.raises(ValueError):
        build_prompt(QUESTIONS, "")


# -- backend-driven splitting ------------------------------------------------------


def test_split_response_with_faithful_backend():
    alignment = split_response(
        CallableBackend(lambda p: "A1: A dog runs.\nA2: Then it rains."),
        QUESTIONS,
        ANSWER,
    )
    assert alignment.segments == ("A dog runs.", "Then it rains.")
    assert alignment.grounded == (True, True)
    assert alignment.source is Source.RESPONSE


def test_split_response_no_answer_marker_becomes_empty_segment():
    alignment = split_response(
        CallableBackend(lambda p: f"A1: A dog runs. Then it rains.\nA2: {NO_ANSWER}"),
        QUESTIONS,
        ANSWER,
    )
    assert alignment.segments[1] == ""
    assert alignment.grounded[1] is True  # empty segments count as grounded


def test_split_response_retries_once_on_bad_format():
    calls = []

    def flaky(prompt):
        calls.append(prompt)
        if len(calls) == 1:
            return "sorry, I cannot help with that"
        return "A1: A dog runs.\nA2: Then it rains."

    alignment = split_response(CallableBackend(flaky), QUESTIONS, ANSWER)
    assert len(calls) == 2
    assert "did not follow the required format" in calls[1]
    assert alignment.segments == ("A dog runs.", "Then it rains.")


def test_split_response_fails_after_second_bad_reply():
    backend = CallableBackend(lambda p: "still not the format")
    with pytest.raises(SplittingError):
        split_response(backend, QUESTIONS, ANSWER)


def test_split_response_rejects_duplicate_or_missing_segments():
    with pytest.raises(SplittingError, match="duplicate"):
        split_response(
            CallableBackend(lambda p: "A1: x\nA1: y\nA2: z"), QUESTIONS, ANSWER
        )
    with pytest.raises(SplittingError, match="A1..A2"):
        split_response(CallableBackend(lambda p: "A1: only one"), QUESTIONS, ANSWER)


def test_split_response_flags_ungrounded_segments():
    alignment = split_response(
        CallableBackend(lambda p: "A1: A cat sits.\nA2: Then it rains."),
        QUESTIONS,
        ANSWER,
    )
    assert alignment.grounded == (False, True)


def test_split_response_strict_blanks_ungrounded_segments():
    alignment = split_response(
        CallableBackend(lambda p: "A1: A cat sits.\nA2: Then it rains."),
        QUESTIONS,
        ANSWER,
        strict=True,
    )
    assert alignment.segments == ("", "Then it rains.")
    assert alignment.grounded == (True, True)


def test_transport_errors_propagate():
    def boom(prompt):
        raise TransportError("backend unreachable")

    class Raising:
        def generate(self, prompt, max_tokens=512, temperature=0.0):
            return boom(prompt)

    with pytest.raises(TransportError):
        split_response(Raising(), QUESTIONS, ANSWER)


def test_heuristic_backend_round_trips_through_prompt_path():
    alignment = split_response(HeuristicSplitterBackend(), QUESTIONS, ANSWER)
    assert alignment.segments == ("A dog runs.", "Then it rains.")
    assert alignment.grounded == (True, True)


# -- deterministic fallback --------------------------------------------------------


def test_fallback_split_routes_by_position_when_overlap_ties():
    alignment = fallback_split(QUESTIONS, ANSWER)
    assert alignment.segments == ("A dog runs.", "Then it rains.")
    assert alignment.grounded == (True, True)


def test_fallback_split_routes_by_lexical_overlap():
    questions = ["Where is the man?", "What does the dog do?"]
    answer = "The dog chases a ball. The man sits in the park."
    alignment = fallback_split(questions, answer)
    assert alignment.segments == (
        "The man sits in the park.",
        "The dog chases a ball.",
    )


def test_fallback_split_leaves_unrouted_questions_empty():
    questions = ["Where is the man?", "What is the weather?"]
    alignment = fallback_split(questions, "The man is here.")
    assert alignment.segments[0] == "The man is here."
    assert alignment.segments[1] == ""


def test_fallback_overlap_beats_position():
    # sentence order is reversed relative to question order
    questions = ["Tell me about the ball.", "Tell me about the tree."]
    answer = "The tree is tall. The ball is red."
    alignment = fallback_split(questions, answer)
    assert alignment.segments == ("The ball is red.", "The tree is tall.")


@given(
    st.lists(
        st.sampled_from(
            [
                "The man holds a ball.",
                "A dog runs by the tree!",
                "It rains today?",
                "Someone waits.",
            ]
        ),
        min_size=1,
        max_size=6,
    ),
    st.integers(min_value=1, max_value=4),
)
def test_fallback_conserves_sentences(sents, k):
    questions = [f"Question number {i} about the park?" for i in range(k)]
    answer = " ".join(sents)
    alignment = fallback_split(questions, answer)
    scattered = [s for seg in alignment.segments for s in sentences(seg)]
    assert sorted(scattered) == sorted(sentences(answer))
    assert all(alignment.grounded)
    assert len(alignment.segments) == k


def test_alignment_shape_is_validated():
    with pytest.raises(ValueError):
        SplitAlignment(source=Source.RESPONSE, segments=("a",), grounded=(True, False))

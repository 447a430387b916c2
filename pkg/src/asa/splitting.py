"""Response splitting: decompose a consolidated answer into per-question
segments.

Two routes exist. The primary route prompts an instruction-following text
generation backend (temperature 0) and parses its line-formatted reply; the
deterministic fallback route segments the answer into sentences and assigns
each to a question by lexical overlap. The fallback is also wrapped as a
local generation backend so the full prompt -> generate -> parse path can run
without any model.

Prompt wire format: questions are rendered as ``Q<j>: ...`` lines and the
expected reply is exactly one ``A<j>: ...`` line per question, with
``[NO ANSWER]`` marking questions the answer does not address. Text embedded
in the prompt is newline-folded and any line-initial ``Q<j>:``/``A<j>:``
marker it contains is escaped with a backslash, so a prompt can be parsed
back unambiguously.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol

import requests

from .errors import SplittingError, TransportError
from .text import fold, lexical_overlap, sentences

NO_ANSWER = "[NO ANSWER]"

PROMPT_HEADER = (
    "You are a helpful assistant. You are given several questions and a "
    "single consolidated answer. The answer contains the information needed "
    "to respond to each question. Your task: For each question below, please "
    "provide the relevant text from the answer. Only output what is found in "
    "the answer."
)

FORMAT_INSTRUCTIONS = (
    "Reply with exactly one line per question, in order, of the form "
    '"A<j>: <text>" where <j> is the question number. If the answer contains '
    f"nothing relevant to a question, output exactly {NO_ANSWER} as that "
    "question's text. Do not output anything else."
)

RETRY_REMINDER = (
    "Your previous reply did not follow the required format. "
    + FORMAT_INSTRUCTIONS
)

_MARKER_RE = re.compile(r"(?m)^(\s*)([QA]\d+:)")
_ESCAPED_MARKER_RE = re.compile(r"(?m)^(\s*)\\([QA]\d+:)")
_ANSWER_LINE_RE = re.compile(r"^\s*A(\d+)\s*:\s*(.*)$")


class Source(Enum):
    RESPONSE = "response"
    EXEMPLAR = "exemplar"


@dataclass(frozen=True)
class SplitAlignment:
    source: Source
    segments: tuple[str, ...]
    grounded: tuple[bool, ...]

    def __post_init__(self):
        if len(self.segments) != len(self.grounded):
            raise ValueError("segments and grounded flags differ in length")


class SplitterBackend(Protocol):
    """Text-generation service used to split answers.

    Implementations must decode deterministically: identical (prompt,
    max_tokens, temperature) calls return byte-identical text.
    """

    def generate(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        ...


def _escape(text: str) -> str:
    folded = " ".join(text.splitlines())
    return _MARKER_RE.sub(r"\1\\\2", folded)


def _unescape(text: str) -> str:
    return _ESCAPED_MARKER_RE.sub(r"\1\2", text)


def build_prompt(questions: list[str], answer_text: str) -> str:
    """Render the splitting prompt for a question list and an answer."""
    if not questions:
        raise ValueError("questions must be non-empty")
    if not answer_text:
        raise ValueError("answer_text must be non-empty")
    lines = [PROMPT_HEADER, FORMAT_INSTRUCTIONS, "Questions:"]
    for j, q in enumerate(questions, start=1):
        lines.append(f"Q{j}: {_escape(q)}")
    lines.append(f"Answer: {_escape(answer_text)}")
    return "\n".join(lines)


def parse_prompt(prompt: str) -> tuple[list[str], str]:
    """Recover (questions, answer_text) from a build_prompt rendering."""
    questions: list[str] = []
    answer = None
    for line in prompt.splitlines():
        m = re.match(r"^Q(\d+): (.*)$", line)
        if m and int(m.group(1)) == len(questions) + 1:
            questions.append(_unescape(m.group(2)))
            continue
        if line.startswith("Answer: "):
            answer = _unescape(line[len("Answer: ") :])
    if answer is None or not questions:
        raise SplittingError("prompt is not in the expected format", raw_output=prompt)
    return questions, answer


def _parse_generation(output: str, k: int) -> list[str]:
    """Extract exactly k answer segments from backend output.

    Raises SplittingError if any segment index is missing, duplicated, or out
    of range, or if extra segments appear.
    """
    found: dict[int, str] = {}
    for line in output.splitlines():
        m = _ANSWER_LINE_RE.match(line)
        if not m:
            continue
        j = int(m.group(1))
        if j in found:
            raise SplittingError(f"duplicate segment A{j}", raw_output=output)
        found[j] = m.group(2).strip()
    if set(found) != set(range(1, k + 1)):
        raise SplittingError(
            f"expected segments A1..A{k}, got {sorted(found) or 'none'}",
            raw_output=output,
        )
    segs = []
    for j in range(1, k + 1):
        text = found[j]
        segs.append("" if text == NO_ANSWER or not text else text)
    return segs


def _grounded_flags(segments: list[str], source_text: str) -> tuple[bool, ...]:
    folded_source = fold(source_text)
    return tuple(not seg or fold(seg) in folded_source for seg in segments)


def split_response(
    backend: SplitterBackend,
    questions: list[str],
    answer_text: str,
    source: Source = Source.RESPONSE,
    strict: bool = False,
) -> SplitAlignment:
    """Split an answer into one segment per question via the backend.

    Makes one automatic retry with a reinforced format instruction when the
    first reply is unparseable. ``strict`` blanks segments that are not
    grounded in the answer text instead of keeping them flagged.
    """
    prompt = build_prompt(questions, answer_text)
    k = len(questions)
    try:
        raw = backend.generate(prompt, temperature=0.0)
    except TransportError:
        raise
    try:
        segments = _parse_generation(raw, k)
    except SplittingError:
        retry_prompt = prompt + "\n" + RETRY_REMINDER
        raw = backend.generate(retry_prompt, temperature=0.0)
        segments = _parse_generation(raw, k)
    grounded = _grounded_flags(segments, answer_text)
    if strict:
        segments = [s if g else "" for s, g in zip(segments, grounded)]
        grounded = _grounded_flags(segments, answer_text)
    return SplitAlignment(source=source, segments=tuple(segments), grounded=grounded)


def _assignment_scores(sents: list[str], questions: list[str]) -> list[int]:
    """Question index for each sentence.

    Score = shared content-word types with the question, plus a positional
    prior of 0.5 * (1 - |relative positions difference|). The prior is below
    any integer overlap increment, so it only arbitrates between questions
    with equal overlap; exact ties still go to the earlier question.
    """
    k = len(questions)
    n = len(sents)
    out = []
    for i, sent in enumerate(sents):
        pos_i = i / max(1, n - 1)
        best_j, best_score = 0, float("-inf")
        for j, q in enumerate(questions):
            pos_j = j / max(1, k - 1)
            score = lexical_overlap(sent, q) + 0.5 * (1.0 - abs(pos_i - pos_j))
            if score > best_score + 1e-12:
                best_j, best_score = j, score
        out.append(best_j)
    return out


def fallback_split(questions: list[str], answer_text: str) -> SplitAlignment:
    """Deterministic splitter: route each answer sentence to a question.

    Sentences are assigned to the question with the highest lexical-overlap
    score (see _assignment_scores for the zero-overlap tie handling) and
    concatenated per question in their original order. Every segment is
    copied verbatim from the answer, so all grounded flags are True.
    """
    k = len(questions)
    sents = sentences(answer_text)
    buckets: list[list[str]] = [[] for _ in range(k)]
    for sent, j in zip(sents, _assignment_scores(sents, questions)):
        buckets[j].append(sent)
    segments = tuple(" ".join(b) for b in buckets)
    return SplitAlignment(
        source=Source.RESPONSE,
        segments=segments,
        grounded=tuple(True for _ in segments),
    )


class CallableBackend:
    """Process-local adapter wrapping any str -> str function."""

    def __init__(self, fn: Callable[[str], str]):
        self._fn = fn

    def generate(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        return self._fn(prompt)


class HeuristicSplitterBackend:
    """Local generation backend that answers splitting prompts with the
    fallback heuristic, exercising the full prompt/parse path offline."""

    def generate(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        questions, answer = parse_prompt(prompt)
        alignment = fallback_split(questions, answer)
        lines = []
        for j, seg in enumerate(alignment.segments, start=1):
            lines.append(f"A{j}: {seg if seg else NO_ANSWER}")
        return "\n".join(lines)


class HttpGenerationBackend:
    """HTTP JSON adapter: POST <endpoint>/generate with
    {"prompt", "max_tokens", "temperature"}, expecting {"text": ...}."""

    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def generate(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        payload = {"prompt": prompt, "max_tokens": max_tokens, "temperature": temperature}
        try:
            resp = requests.post(
                self.endpoint + "/generate", json=payload, timeout=self.timeout
            )
            resp.raise_for_status()
            body = resp.json()
        except (requests.RequestException, json.JSONDecodeError) as exc:
            raise TransportError(f"splitter backend {self.endpoint}: {exc}") from exc
        if "text" not in body:
            raise TransportError(f"splitter backend reply missing 'text': {body!r}")
        return str(body["text"])

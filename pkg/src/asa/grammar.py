"""Grammar error features.

The transcript is corrected by a pluggable GEC backend, the raw and
corrected token sequences are aligned with a minimal-cost edit alignment,
each edit span is classified into an operation x linguistic-category label
(with morphology refinement when lemmas match), and label counts normalized
by the raw word count form the feature vector.

Labels look like ``R:VERB:TENSE`` (replacement, verb, tense shift),
``M:DET`` (missing determiner), ``U:DET`` (unnecessary determiner). The
taxonomy is frozen from training data: labels ranked by frequency, truncated
to capacity - 1, with a reserved OTHER slot; the feature vector is padded to
the fixed capacity (265 by default).
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Protocol, Sequence

import numpy as np
import requests

from . import lexicon as lx
from .errors import CorrectionError, TaxonomyError, TransportError
from .syntax import RuleSyntaxBackend, SyntacticAnnotationBackend, TokenAnnotation
from .text import sentences, tokenize, words

OTHER = "OTHER"
DEFAULT_CAPACITY = 265


class Operation(Enum):
    INSERT = "insert"
    DELETE = "delete"
    SUBSTITUTE = "substitute"


@dataclass(frozen=True)
class EditSpan:
    raw_range: tuple[int, int]
    corr_range: tuple[int, int]
    operation: Operation
    error_type: str | None = None

    def __post_init__(self):
        if self.operation is Operation.INSERT and self.raw_range[0] != self.raw_range[1]:
            raise ValueError("insert span must have an empty raw range")
        if self.operation is Operation.DELETE and self.corr_range[0] != self.corr_range[1]:
            raise ValueError("delete span must have an empty corrected range")

    @property
    def cost(self) -> int:
        return max(
            self.raw_range[1] - self.raw_range[0],
            self.corr_range[1] - self.corr_range[0],
        )


class GecBackend(Protocol):
    few_shot_examples: list[tuple[str, str]]

    def correct_text(self, text: str) -> str: ...


def correct(backend: GecBackend, raw_text: str) -> str:
    """Run the GEC backend over a transcript.

    Deterministic for a deterministic backend; raises CorrectionError when
    the backend returns empty output for non-empty input.
    """
    if not raw_text.strip():
        raise CorrectionError("raw text is empty")
    corrected = backend.correct_text(raw_text)
    if not corrected.strip():
        raise CorrectionError("GEC backend returned empty output")
    return corrected


# -- alignment ----------------------------------------------------------------


def _fold_token(tok: str) -> str:
    return tok.lower()


def align_edits(raw_tokens: Sequence[str], corr_tokens: Sequence[str]) -> list[EditSpan]:
    """Minimal-cost token alignment converted to merged edit spans.

    Unit insert/delete/substitute costs, zero for case-folded equality.
    Adjacent token edits of the same operation merge into one span; mixed
    operations stay separate. Total span cost equals the Levenshtein
    distance between the folded sequences.
    """
    n, m = len(raw_tokens), len(corr_tokens)
    raw_f = [_fold_token(t) for t in raw_tokens]
    corr_f = [_fold_token(t) for t in corr_tokens]

    cost = np.zeros((n + 1, m + 1), dtype=np.int32)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = cost[i - 1, j - 1] + (0 if raw_f[i - 1] == corr_f[j - 1] else 1)
            cost[i, j] = min(sub, cost[i - 1, j] + 1, cost[i, j - 1] + 1)

    # backtrace, preferring diagonal then delete then insert
    ops: list[tuple[Operation | None, int, int]] = []  # (op, raw_idx, corr_idx)
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            diag = cost[i - 1, j - 1] + (0 if raw_f[i - 1] == corr_f[j - 1] else 1)
            if cost[i, j] == diag:
                op = None if raw_f[i - 1] == corr_f[j - 1] else Operation.SUBSTITUTE
                ops.append((op, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and cost[i, j] == cost[i - 1, j] + 1:
            ops.append((Operation.DELETE, i - 1, j))
            i -= 1
            continue
        ops.append((Operation.INSERT, i, j - 1))
        j -= 1
    ops.reverse()

    spans: list[EditSpan] = []
    for op, ri, ci in ops:
        if op is None:
            continue
        if op is Operation.SUBSTITUTE:
            new = EditSpan((ri, ri + 1), (ci, ci + 1), op)
        elif op is Operation.DELETE:
            new = EditSpan((ri, ri + 1), (ci, ci), op)
        else:
            new = EditSpan((ri, ri), (ci, ci + 1), op)
        if spans and spans[-1].operation is op:
            last = spans[-1]
            if (
                last.raw_range[1] == new.raw_range[0]
                and last.corr_range[1] == new.corr_range[0]
            ):
                spans[-1] = replace(
                    last,
                    raw_range=(last.raw_range[0], new.raw_range[1]),
                    corr_range=(last.corr_range[0], new.corr_range[1]),
                )
                continue
        spans.append(new)
    return spans


# -- classification -----------------------------------------------------------

_NO_CATEGORY = frozenset({"X", "SYM"})
_PREFIX = {Operation.INSERT: "M", Operation.DELETE: "U", Operation.SUBSTITUTE: "R"}


def _span_category(anns: Sequence[TokenAnnotation]) -> str | None:
    """Representative POS for a span: majority vote, first token on ties."""
    pool = [a.pos for a in anns if a.pos not in _NO_CATEGORY]
    if not pool:
        return None
    counts = Counter(pool)
    best = max(counts.values())
    for pos in pool:
        if counts[pos] == best:
            return pos
    return None


def _morph_map(ann: TokenAnnotation) -> dict[str, str]:
    return dict(pair.split("=", 1) for pair in ann.morph)


def classify_edit(
    edit: EditSpan,
    raw_tokens: Sequence[str],
    corr_tokens: Sequence[str],
    annotations: tuple[Sequence[TokenAnnotation], Sequence[TokenAnnotation]],
) -> str:
    """Taxonomy label for one edit span.

    ``annotations`` is the (raw side, corrected side) pair of per-token
    annotations; they must cover every token the edit references. Falls back
    to OTHER only when no categorization rule fires.
    """
    raw_anns, corr_anns = annotations
    r0, r1 = edit.raw_range
    c0, c1 = edit.corr_range
    span_raw = raw_anns[r0:r1]
    span_corr = corr_anns[c0:c1]

    if edit.operation is Operation.INSERT:
        cat = _span_category(span_corr)
        return f"M:{cat}" if cat else OTHER
    if edit.operation is Operation.DELETE:
        cat = _span_category(span_raw)
        return f"U:{cat}" if cat else OTHER

    cat = _span_category(span_corr) or _span_category(span_raw)
    if cat is None:
        return OTHER
    if len(span_raw) == 1 and len(span_corr) == 1:
        ra, ca = span_raw[0], span_corr[0]
        if ra.token != ca.token and ra.token.lower() == ca.token.lower():
            return "R:ORTH"
        if ra.lemma == ca.lemma and ra.pos == ca.pos:
            rm, cm = _morph_map(ra), _morph_map(ca)
            changed = {k for k in set(rm) | set(cm) if rm.get(k) != cm.get(k)}
            if ca.pos == "VERB":
                if "Tense" in changed:
                    return "R:VERB:TENSE"
                if changed & {"Person", "Number"}:
                    return "R:VERB:AGR"
                if "VerbForm" in changed:
                    return "R:VERB:FORM"
            if ca.pos == "NOUN" and "Number" in changed:
                return "R:NOUN:NUM"
            if ca.pos == "ADJ" and "Degree" in changed:
                return "R:ADJ:FORM"
    return f"R:{cat}"


def label_edits(
    raw_text: str,
    corr_text: str,
    syntax_backend: SyntacticAnnotationBackend | None = None,
) -> tuple[list[str], list[str], list[EditSpan]]:
    """Align a transcript with its correction and classify every edit."""
    backend = syntax_backend if syntax_backend is not None else RuleSyntaxBackend()
    raw_tokens = tokenize(raw_text)
    corr_tokens = tokenize(corr_text)
    raw_anns = backend.annotate(raw_text)
    corr_anns = backend.annotate(corr_text)
    edits = align_edits(raw_tokens, corr_tokens)
    labeled = [
        replace(e, error_type=classify_edit(e, raw_tokens, corr_tokens, (raw_anns, corr_anns)))
        for e in edits
    ]
    return raw_tokens, corr_tokens, labeled


# -- taxonomy and features ----------------------------------------------------


@dataclass(frozen=True)
class ErrorTaxonomy:
    labels: tuple[str, ...]  # OTHER always last
    capacity: int

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise TaxonomyError("taxonomy labels must be unique")
        if OTHER not in self.labels:
            raise TaxonomyError("taxonomy must contain the reserved OTHER label")
        if len(self.labels) > self.capacity:
            raise TaxonomyError(
                f"{len(self.labels)} labels exceed capacity {self.capacity}"
            )

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            return self.labels.index(OTHER)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "capacity": self.capacity}

    @classmethod
    def from_dict(cls, obj: dict) -> "ErrorTaxonomy":
        return cls(labels=tuple(obj["labels"]), capacity=int(obj["capacity"]))


def freeze_taxonomy(
    training_edit_labels: Sequence[str], capacity: int = DEFAULT_CAPACITY
) -> ErrorTaxonomy:
    """Freeze the label order from training frequencies.

    Top (capacity - 1) labels by count, ties broken lexicographically, with
    OTHER appended last. The feature vector stays ``capacity`` wide even when
    fewer labels exist.
    """
    if capacity < 1:
        raise TaxonomyError("capacity must be >= 1")
    counts = Counter(label for label in training_edit_labels if label != OTHER)
    ranked = sorted(counts, key=lambda lab: (-counts[lab], lab))[: capacity - 1]
    return ErrorTaxonomy(labels=tuple(ranked) + (OTHER,), capacity=capacity)


@dataclass(frozen=True)
class GrammarFeatureVector:
    freqs: np.ndarray  # capacity floats, c_k / N_w
    word_count: int


def grammar_features(
    taxonomy: ErrorTaxonomy,
    edits: Sequence[EditSpan],
    raw_words: Sequence[str],
    normalize: bool = True,
) -> GrammarFeatureVector:
    """Word-count-normalized error-type frequencies, ordered by taxonomy.

    ``raw_words`` are the whitespace-delimited words of the raw transcript
    (the normalization denominator), not alignment tokens. Labels outside the
    taxonomy fold into OTHER. ``normalize=False`` keeps raw counts c_k.
    """
    if not raw_words:
        raise ValueError("raw_words must be non-empty")
    n_w = len(raw_words)
    freqs = np.zeros(taxonomy.capacity, dtype=np.float64)
    for edit in edits:
        if edit.error_type is None:
            raise TaxonomyError(f"edit {edit} has no label")
        freqs[taxonomy.index_of(edit.error_type)] += 1.0
    if normalize:
        freqs /= n_w
    return GrammarFeatureVector(freqs=freqs, word_count=n_w)


def export_m2(raw_tokens: Sequence[str], edits: Sequence[EditSpan],
              corr_tokens: Sequence[str]) -> str:
    """Edits in M2-style annotation format: an S line then one A line per
    edit (span, type, correction)."""
    lines = ["S " + " ".join(raw_tokens)]
    for e in edits:
        correction = " ".join(corr_tokens[e.corr_range[0] : e.corr_range[1]])
        lines.append(
            f"A {e.raw_range[0]} {e.raw_range[1]}|||{e.error_type or OTHER}"
            f"|||{correction}|||REQUIRED|||-NONE-|||0"
        )
    return "\n".join(lines) + "\n"


# -- backends ------------------------------------------------------------------


class RuleGecBackend:
    """Deterministic rule corrector over the closed lexicon.

    Fixes five planted error families: subject-verb agreement after a
    third-singular subject, base verbs in past-marked sentences, singular
    nouns after plural quantifiers, missing determiners after prepositions
    or transitive verbs, and doubled determiners. Clean text passes through
    unchanged. Few-shot examples are carried for interface parity but the
    rules do not need them.
    """

    def __init__(self, few_shot_examples: list[tuple[str, str]] | None = None):
        self.few_shot_examples = list(few_shot_examples or [])

    @staticmethod
    def _split_word(word: str) -> tuple[str, str, str]:
        """(leading punct, core, trailing punct) of a whitespace word."""
        start, end = 0, len(word)
        while start < end and not word[start].isalnum():
            start += 1
        while end > start and not word[end - 1].isalnum():
            end -= 1
        return word[:start], word[start:end], word[end:]

    @staticmethod
    def _match_case(template: str, replacement: str) -> str:
        if template[:1].isupper():
            return replacement[:1].upper() + replacement[1:]
        return replacement

    def _correct_sentence(self, sent: str) -> str:
        ws = sent.split()
        cores = [self._split_word(w)[1].lower() for w in ws]
        past_context = any(c in lx.PAST_TIME_MARKERS for c in cores)
        out: list[str] = []
        prev_core = ""
        for idx, word in enumerate(ws):
            pre, core, post = self._split_word(word)
            folded = core.lower()

            # doubled determiner
            if folded in ("the", "a", "an") and prev_core == folded:
                prev_core = folded
                continue

            third_sing_subject = (
                prev_core in lx.THIRD_SING_PRONOUNS or prev_core in lx.SINGULAR_NOUNS
            )
            if folded in lx.BASE_VERBS and prev_core not in ("to",) and prev_core not in lx.AUXILIARIES:
                forms = lx.VERB_FORMS[folded]
                if past_context and (third_sing_subject or prev_core in lx.PRONOUNS or prev_core in lx.PLURAL_NOUNS):
                    out.append(pre + self._match_case(core, forms[1]) + post)
                    prev_core = folded
                    continue
                if third_sing_subject:
                    out.append(pre + self._match_case(core, forms[0]) + post)
                    prev_core = folded
                    continue

            if (
                folded in lx.SINGULAR_NOUNS
                and prev_core in lx.PLURAL_QUANTIFIERS
            ):
                out.append(pre + self._match_case(core, lx.NOUN_PLURALS[folded]) + post)
                prev_core = folded
                continue

            if (
                folded in lx.SINGULAR_NOUNS
                and (prev_core in lx.PREPOSITIONS or prev_core in lx.FORM_TO_BASE or prev_core in lx.BASE_VERBS)
                and prev_core not in ("of",)
            ):
                out.append(pre + "the " + core + post)
                prev_core = folded
                continue

            out.append(word)
            prev_core = folded
        return " ".join(out)

    def correct_text(self, text: str) -> str:
        return " ".join(self._correct_sentence(s) for s in sentences(text)) or text


class HttpGecBackend:
    """HTTP JSON adapter: POST <endpoint>/correct with
    {"text", "examples": [[raw, corrected], ...]} expecting {"text": ...}.

    The examples list carries the few-shot pairs the service should prepend
    to its prompt (three by default in the pipeline config).
    """

    def __init__(
        self,
        endpoint: str,
        few_shot_examples: list[tuple[str, str]] | None = None,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.few_shot_examples = list(few_shot_examples or [])
        self.timeout = timeout

    def correct_text(self, text: str) -> str:
        payload = {
            "text": text,
            "examples": [list(pair) for pair in self.few_shot_examples],
        }
        try:
            resp = requests.post(
                self.endpoint + "/correct", json=payload, timeout=self.timeout
            )
            resp.raise_for_status()
            body = resp.json()
        except (requests.RequestException, json.JSONDecodeError) as exc:
            raise TransportError(f"GEC backend {self.endpoint}: {exc}") from exc
        if "text" not in body:
            raise TransportError(f"GEC backend reply missing 'text': {body!r}")
        return str(body["text"])

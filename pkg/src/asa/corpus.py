"""Corpus data model and manifest ingestion.

A corpus is described by a UTF-8 line-delimited manifest: one JSON object per
line with a ``kind`` field of either ``question_set`` or ``response``. File
paths inside a manifest (images, audio) are relative to the manifest's
directory. All values are immutable after load and safe to share across
concurrent feature extractors.

Question-set schema::

    {"kind": "question_set", "id": str, "questions": [str, ...],
     "exemplar_text": str, "image_ref": str,
     "exemplar_segments": [str, ...]?}        # optional, pre-split exemplar

Response schema::

    {"kind": "response", "id": str, "question_set_id": str,
     "transcript": str, "audio_ref": str?,
     "word_timestamps": [[token, start_s, end_s], ...]?,
     "scores": {"holistic": int?, "relevance": int?, "language_use": int?}}
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    InsufficientDataError,
    ManifestError,
    ReferentialIntegrityError,
)

VALID_SCORES = (1, 2, 3, 4, 5)
SCORE_KINDS = ("holistic", "relevance", "language_use")
MAX_QUESTIONS = 4  # fixed-width exemplar/image relevance slots


@dataclass(frozen=True)
class ScoreLabel:
    holistic: int | None = None
    relevance: int | None = None
    language_use: int | None = None

    def __post_init__(self):
        for kind in SCORE_KINDS:
            v = getattr(self, kind)
            if v is not None and v not in VALID_SCORES:
                raise ManifestError(f"score {kind}={v!r} not in 1..5")

    def get(self, kind: str) -> int | None:
        if kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {kind!r}")
        return getattr(self, kind)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in SCORE_KINDS if getattr(self, k) is not None}


@dataclass(frozen=True)
class QuestionSet:
    id: str
    questions: tuple[str, ...]
    exemplar_text: str
    image_ref: str
    exemplar_segments: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.questions:
            raise ManifestError(f"question set {self.id!r}: questions is empty")
        if len(self.questions) > MAX_QUESTIONS:
            raise ManifestError(
                f"question set {self.id!r}: {len(self.questions)} questions, "
                f"at most {MAX_QUESTIONS} supported"
            )
        if self.exemplar_segments is not None and len(self.exemplar_segments) != len(self.questions):
            raise ManifestError(
                f"question set {self.id!r}: exemplar_segments length "
                f"{len(self.exemplar_segments)} != question count {len(self.questions)}"
            )

    @property
    def k(self) -> int:
        return len(self.questions)


@dataclass(frozen=True)
class ResponseRecord:
    id: str
    question_set_id: str
    transcript: str
    audio_ref: str | None = None
    word_timestamps: tuple[tuple[str, float, float], ...] | None = None
    scores: ScoreLabel = field(default_factory=ScoreLabel)

    def __post_init__(self):
        if not self.transcript:
            raise ManifestError(f"response {self.id!r}: transcript is required")
        ts = self.word_timestamps
        if ts is not None:
            prev_end = 0.0
            for tok, start, end in ts:
                if start < prev_end or end < start:
                    raise ManifestError(
                        f"response {self.id!r}: timestamps for {tok!r} overlap "
                        f"or run backwards ({start:.3f}, {end:.3f})"
                    )
                prev_end = end


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[str, ...]
    dev: tuple[str, ...]
    known_test: tuple[str, ...]
    unknown_test: tuple[str, ...]

    def as_dict(self) -> dict[str, tuple[str, ...]]:
        return {
            "train": self.train,
            "dev": self.dev,
            "known_test": self.known_test,
            "unknown_test": self.unknown_test,
        }

    def __post_init__(self):
        seen: set[str] = set()
        for name, ids in self.as_dict().items():
            dup = seen & set(ids)
            if dup:
                raise ValueError(f"split {name} overlaps another split: {sorted(dup)[:3]}")
            seen |= set(ids)


def _as_question_set(obj: dict, lineno: int) -> QuestionSet:
    try:
        segs = obj.get("exemplar_segments")
        return QuestionSet(
            id=str(obj["id"]),
            questions=tuple(str(q) for q in obj["questions"]),
            exemplar_text=str(obj["exemplar_text"]),
            image_ref=str(obj["image_ref"]),
            exemplar_segments=tuple(str(s) for s in segs) if segs is not None else None,
        )
    except KeyError as exc:
        raise ManifestError(f"line {lineno}: question_set missing field {exc}") from exc


def _as_response(obj: dict, lineno: int) -> ResponseRecord:
    try:
        raw_ts = obj.get("word_timestamps")
        ts = None
        if raw_ts is not None:
            ts = tuple((str(t), float(s), float(e)) for t, s, e in raw_ts)
        return ResponseRecord(
            id=str(obj["id"]),
            question_set_id=str(obj["question_set_id"]),
            transcript=str(obj["transcript"]),
            audio_ref=obj.get("audio_ref"),
            word_timestamps=ts,
            scores=ScoreLabel(**obj.get("scores", {})),
        )
    except KeyError as exc:
        raise ManifestError(f"line {lineno}: response missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"line {lineno}: bad response record: {exc}") from exc


def load_manifest(
    path: str | Path, check_files: bool = True
) -> tuple[list[QuestionSet], list[ResponseRecord]]:
    """Load and validate a line-delimited manifest.

    ``check_files`` verifies that referenced image/audio files exist
    (relative to the manifest). Raises ManifestError for malformed records
    and ReferentialIntegrityError for dangling question_set_id references.
    """
    path = Path(path)
    base = path.parent
    sets: list[QuestionSet] = []
    responses: list[ResponseRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: invalid JSON: {exc}") from exc
            kind = obj.get("kind")
            if kind == "question_set":
                sets.append(_as_question_set(obj, lineno))
            elif kind == "response":
                responses.append(_as_response(obj, lineno))
            else:
                raise ManifestError(f"line {lineno}: unknown kind {kind!r}")

    set_ids = {qs.id for qs in sets}
    if len(set_ids) != len(sets):
        raise ManifestError("duplicate question set ids")
    resp_ids = {r.id for r in responses}
    if len(resp_ids) != len(responses):
        raise ManifestError("duplicate response ids")
    for r in responses:
        if r.question_set_id not in set_ids:
            raise ReferentialIntegrityError(
                f"response {r.id!r} cites unknown question set {r.question_set_id!r}"
            )
    if check_files:
        for qs in sets:
            if not (base / qs.image_ref).is_file():
                raise ManifestError(
                    f"question set {qs.id!r}: image {qs.image_ref!r} not found"
                )
        for r in responses:
            if r.audio_ref is not None and not (base / r.audio_ref).is_file():
                raise ManifestError(f"response {r.id!r}: audio {r.audio_ref!r} not found")
    return sets, responses


def _set_line(qs: QuestionSet) -> dict:
    obj = {
        "kind": "question_set",
        "id": qs.id,
        "questions": list(qs.questions),
        "exemplar_text": qs.exemplar_text,
        "image_ref": qs.image_ref,
    }
    if qs.exemplar_segments is not None:
        obj["exemplar_segments"] = list(qs.exemplar_segments)
    return obj


def _response_line(r: ResponseRecord) -> dict:
    obj: dict = {
        "kind": "response",
        "id": r.id,
        "question_set_id": r.question_set_id,
        "transcript": r.transcript,
    }
    if r.audio_ref is not None:
        obj["audio_ref"] = r.audio_ref
    if r.word_timestamps is not None:
        obj["word_timestamps"] = [[t, s, e] for t, s, e in r.word_timestamps]
    obj["scores"] = r.scores.to_dict()
    return obj


def write_manifest(
    path: str | Path, sets: list[QuestionSet], responses: list[ResponseRecord]
) -> None:
    """Write a manifest that load_manifest reproduces field-for-field."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for qs in sets:
            fh.write(json.dumps(_set_line(qs), sort_keys=True) + "\n")
        for r in responses:
            fh.write(json.dumps(_response_line(r), sort_keys=True) + "\n")


def make_splits(
    records: list[ResponseRecord],
    unknown_set_id: str,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> CorpusSplit:
    """Partition responses into train/dev/known_test/unknown_test.

    All responses of ``unknown_set_id`` form the unknown test set. The rest
    are shuffled deterministically under ``seed`` and cut as
    |train| = floor(r0*n), |dev| = floor(r1*n), remainder to known_test.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InsufficientDataError(f"split ratios {ratios} do not sum to 1")
    set_ids = {r.question_set_id for r in records}
    if unknown_set_id not in set_ids:
        raise InsufficientDataError(f"unknown set {unknown_set_id!r} has no responses")

    unknown = [r.id for r in records if r.question_set_id == unknown_set_id]
    rest = [r.id for r in records if r.question_set_id != unknown_set_id]
    if len(rest) < 3:
        raise InsufficientDataError(
            f"{len(rest)} responses outside the unknown set; need at least 3"
        )
    rng = random.Random(seed)
    rest = sorted(rest)
    rng.shuffle(rest)
    n = len(rest)
    n_train = math.floor(ratios[0] * n)
    n_dev = math.floor(ratios[1] * n)
    return CorpusSplit(
        train=tuple(rest[:n_train]),
        dev=tuple(rest[n_train : n_train + n_dev]),
        known_test=tuple(rest[n_train + n_dev :]),
        unknown_test=tuple(sorted(unknown)),
    )

"""Feature extraction orchestration and the on-disk feature store.

``extract_corpus`` fits everything that depends on the training split
(similarity normalizers, the error taxonomy, the syntax schema), then turns
every response into a model-ready FeatureBundle. The store layout:

    <out_dir>/fits.json            fitted artifacts + splits + config
    <out_dir>/bundles/<id>.npz     one bundle per response
    <out_dir>/index.json           response id -> content hash
    <out_dir>/extraction_report.json

Extraction is idempotent: each response's bundle is keyed by a hash of the
record, the extraction config, and the fitted artifacts; an unchanged rerun
recomputes nothing. Per-response failures are collected into the report and
do not stop the batch.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import (
    MAX_QUESTIONS,
    CorpusSplit,
    QuestionSet,
    ResponseRecord,
    load_manifest,
    make_splits,
)
from .delivery import delivery_features, delivery_features_from_transcript, load_wav
from .errors import AsaError, CompatibilityError, ConfigError
from .grammar import (
    ErrorTaxonomy,
    GecBackend,
    RuleGecBackend,
    correct,
    freeze_taxonomy,
    grammar_features,
    label_edits,
)
from .model import FeatureBundle
from .relevance import (
    HashContextualBackend,
    HashImageTextBackend,
    HashTextEmbeddingBackend,
    SimilarityNormalizer,
    exemplar_response_similarity,
    image_response_similarity,
    question_response_features,
)
from .splitting import NO_ANSWER, SplitterBackend, fallback_split, split_response
from .syntax import (
    RuleSyntaxBackend,
    SyntacticAnnotationBackend,
    SyntaxSchema,
    freeze_syntax_schema,
    syntax_features,
)

GLOBAL_KEY = "__global__"
_MAX_WORKERS = 4  # bounded pool for the per-response bundle pass


@dataclass(frozen=True)
class ExtractionConfig:
    use_splitting: bool = True
    strict_splitting: bool = False
    normalize_grammar: bool = True
    grammar_capacity: int = 265
    unknown_set_id: str = ""  # empty: last question set id in sorted order
    split_seed: int = 0
    default_word_s: float = 0.3  # fabricated timing when a record has none

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Backends:
    """The pluggable heavy lifters; every slot has a deterministic double."""

    splitter: SplitterBackend | None  # None: lexical fallback splitter
    text: object  # exemplar-response embedding
    image_text: object  # image-response embedding
    contextual: object  # question-response token encoder
    gec: GecBackend
    syntax: SyntacticAnnotationBackend


def rule_backends() -> Backends:
    """Offline deterministic doubles for every backend slot."""
    return Backends(
        splitter=None,
        text=HashTextEmbeddingBackend(),
        image_text=HashImageTextBackend(),
        contextual=HashContextualBackend(),
        gec=RuleGecBackend(),
        syntax=RuleSyntaxBackend(),
    )


@dataclass
class ExtractionReport:
    n_responses: int = 0
    extracted: int = 0
    skipped: int = 0
    errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_responses": self.n_responses,
            "extracted": self.extracted,
            "skipped": self.skipped,
            "errors": dict(sorted(self.errors.items())),
        }


# -- segment plumbing -----------------------------------------------------------


def _clean_segment(seg: str) -> str:
    seg = seg.strip()
    return "" if seg == NO_ANSWER else seg


def _split_segments(
    backends: Backends,
    qset: QuestionSet,
    text: str,
    config: ExtractionConfig,
) -> list[str]:
    """One segment per question; empty string marks an unanswered question."""
    questions = list(qset.questions)
    if not config.use_splitting:
        return [text] * qset.k
    if backends.splitter is None:
        alignment = fallback_split(questions, text)
    else:
        alignment = split_response(
            backends.splitter, questions, text, strict=config.strict_splitting
        )
    return [_clean_segment(s) for s in alignment.segments]


def _exemplar_segments(
    backends: Backends, qset: QuestionSet, config: ExtractionConfig
) -> list[str]:
    if qset.exemplar_segments is not None:
        return [_clean_segment(s) for s in qset.exemplar_segments]
    return _split_segments(backends, qset, qset.exemplar_text, config)


def _raw_similarities(
    backends: Backends,
    qset: QuestionSet,
    exemplar_segs: list[str],
    image,
    response_segs: list[str],
) -> tuple[list, list]:
    """Per-question raw (er, ir) similarities; None marks no response."""
    er, ir = [], []
    for i in range(qset.k):
        seg = response_segs[i]
        if exemplar_segs[i]:
            er.append(exemplar_response_similarity(backends.text, exemplar_segs[i], seg))
        else:
            er.append(None)
        ir.append(image_response_similarity(backends.image_text, image, seg))
    return er, ir


def _fit_channel(raw: dict) -> SimilarityNormalizer:
    """Fit per-(set, question) stats plus a pooled global fallback.

    Keys whose training similarities are all no-response sentinels are left
    unfitted and resolve through the global key at lookup time.
    """
    norm = SimilarityNormalizer(fallback_key=GLOBAL_KEY)
    pooled = [s for sims in raw.values() for s in sims if s is not None]
    norm.fit_key(GLOBAL_KEY, pooled)
    for key, sims in sorted(raw.items()):
        if any(s is not None for s in sims):
            norm.fit_key(key, sims)
    return norm


# -- hashing ----------------------------------------------------------------------


def _record_digest(r: ResponseRecord, config: ExtractionConfig, fits_digest: str) -> str:
    payload = {
        "id": r.id,
        "question_set_id": r.question_set_id,
        "transcript": r.transcript,
        "audio_ref": r.audio_ref,
        "word_timestamps": r.word_timestamps,
        "scores": r.scores.to_dict(),
        "config": config.to_dict(),
        "fits": fits_digest,
    }
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode("utf-8")
    ).hexdigest()


# -- the store ---------------------------------------------------------------------


class FeatureStore:
    """Read access to an extracted feature directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        fits_path = self.root / "fits.json"
        if not fits_path.is_file():
            raise ConfigError(f"{fits_path} not found; run extraction first")
        fits = json.loads(fits_path.read_text(encoding="utf-8"))
        self.er_normalizer = SimilarityNormalizer.from_dict(fits["er_normalizer"])
        self.ir_normalizer = SimilarityNormalizer.from_dict(fits["ir_normalizer"])
        self.taxonomy = ErrorTaxonomy.from_dict(fits["taxonomy"])
        self.syntax_schema = SyntaxSchema.from_dict(fits["syntax_schema"])
        self.splits = CorpusSplit(
            **{k: tuple(v) for k, v in fits["splits"].items()}
        )
        self.extraction_config = ExtractionConfig(**fits["config"])
        self.fits_digest = fits["digest"]
        index_path = self.root / "index.json"
        self.index: dict = (
            json.loads(index_path.read_text(encoding="utf-8"))
            if index_path.is_file()
            else {}
        )

    def bundle_path(self, response_id: str) -> Path:
        return self.root / "bundles" / f"{response_id}.npz"

    def load_bundle(self, response_id: str) -> FeatureBundle:
        return FeatureBundle.load_npz(self.bundle_path(response_id))

    def load_bundles(self, ids) -> dict[str, FeatureBundle]:
        return {rid: self.load_bundle(rid) for rid in ids if self.bundle_path(rid).is_file()}

    def artifacts_dict(self) -> dict:
        """The fitted artifacts a checkpoint should embed."""
        return {
            "er_normalizer": self.er_normalizer.to_dict(),
            "ir_normalizer": self.ir_normalizer.to_dict(),
            "taxonomy": self.taxonomy.to_dict(),
            "syntax_schema": self.syntax_schema.to_dict(),
            "fits_digest": self.fits_digest,
        }


def check_compatibility(artifacts: Mapping, store: FeatureStore) -> None:
    """A checkpoint may only score features produced under the same fits."""
    pairs = (
        ("taxonomy", store.taxonomy.to_dict()),
        ("syntax_schema", store.syntax_schema.to_dict()),
        ("er_normalizer", store.er_normalizer.to_dict()),
        ("ir_normalizer", store.ir_normalizer.to_dict()),
    )
    for name, current in pairs:
        if name in artifacts and artifacts[name] != current:
            raise CompatibilityError(
                f"checkpoint {name} does not match the feature store"
            )


# -- extraction ---------------------------------------------------------------------


def _bundle_for(
    backends: Backends,
    config: ExtractionConfig,
    qset: QuestionSet,
    image,
    exemplar_segs: list[str],
    er_norm: SimilarityNormalizer,
    ir_norm: SimilarityNormalizer,
    taxonomy: ErrorTaxonomy,
    schema: SyntaxSchema,
    record: ResponseRecord,
    audio_path: Path | None = None,
) -> FeatureBundle:
    segs = _split_segments(backends, qset, record.transcript, config)
    raw_er, raw_ir = _raw_similarities(backends, qset, exemplar_segs, image, segs)

    s_er = np.zeros(MAX_QUESTIONS, dtype=np.float32)
    s_ir = np.zeros(MAX_QUESTIONS, dtype=np.float32)
    for i in range(qset.k):
        s_er[i] = er_norm.normalize((qset.id, i), raw_er[i])
        s_ir[i] = ir_norm.normalize((qset.id, i), raw_ir[i])

    qr_rows = [
        question_response_features(backends.contextual, q, segs[i])
        for i, q in enumerate(qset.questions)
    ]
    qr_seq = np.concatenate(qr_rows, axis=0)

    syntax_seq = syntax_features(backends.syntax, schema, record.transcript).vectors

    corrected = correct(backends.gec, record.transcript)
    _, _, edits = label_edits(record.transcript, corrected, backends.syntax)
    grammar = grammar_features(
        taxonomy,
        edits,
        record.transcript.split(),
        normalize=config.normalize_grammar,
    ).freqs.astype(np.float32)

    ts = record.word_timestamps
    if ts is None:
        words = record.transcript.split()
        step = config.default_word_s
        ts = tuple((w, i * step, (i + 1) * step) for i, w in enumerate(words))
    if audio_path is not None:
        samples, rate = load_wav(audio_path)
        delivery = delivery_features(samples, rate, ts)
    else:
        delivery = delivery_features_from_transcript(ts)

    return FeatureBundle(
        qr_seq=qr_seq.astype(np.float32),
        syntax_seq=syntax_seq,
        delivery_seq=delivery.vectors,
        s_er=s_er,
        s_ir=s_ir,
        grammar=grammar,
    )


def extract_corpus(
    manifest_path: str | Path,
    out_dir: str | Path,
    backends: Backends | None = None,
    config: ExtractionConfig | None = None,
) -> ExtractionReport:
    """Fit on the training split, then materialize one bundle per response.

    Rerunning over an unchanged corpus and config is a no-op (content-hash
    skip). Per-response failures land in the report's error map; the batch
    continues.
    """
    backends = backends if backends is not None else rule_backends()
    config = config if config is not None else ExtractionConfig()
    out_dir = Path(out_dir)
    manifest_path = Path(manifest_path)
    (out_dir / "bundles").mkdir(parents=True, exist_ok=True)

    # File existence is checked lazily so one missing image degrades only the
    # responses that need it (as a per-response error) instead of the batch.
    qsets, records = load_manifest(manifest_path, check_files=False)
    sets_by_id = {qs.id: qs for qs in qsets}
    unknown = config.unknown_set_id or sorted(sets_by_id)[-1]
    if unknown not in sets_by_id:
        raise ConfigError(f"unknown_set_id {unknown!r} not in manifest")
    splits = make_splits(records, unknown, seed=config.split_seed)
    records_by_id = {r.id: r for r in records}
    base = manifest_path.parent

    # resolve per-set shared inputs once
    images = {qs.id: str((base / qs.image_ref).resolve()) for qs in qsets}
    exemplars = {
        qs.id: _exemplar_segments(backends, qs, config) for qs in qsets
    }

    # Fit on training responses only. A response that cannot contribute
    # (missing image, backend failure) is skipped here; the same exception
    # recurs in the bundle pass below and lands in the error report there.
    raw_er: dict = {}
    raw_ir: dict = {}
    train_labels: list[str] = []
    train_texts: list[str] = []
    for rid in splits.train:
        r = records_by_id[rid]
        qs = sets_by_id[r.question_set_id]
        try:
            segs = _split_segments(backends, qs, r.transcript, config)
            er, ir = _raw_similarities(
                backends, qs, exemplars[qs.id], images[qs.id], segs
            )
        except AsaError:
            er = ir = None
        if er is not None and ir is not None:
            for i in range(qs.k):
                raw_er.setdefault((qs.id, i), []).append(er[i])
                raw_ir.setdefault((qs.id, i), []).append(ir[i])
        try:
            corrected = correct(backends.gec, r.transcript)
            _, _, edits = label_edits(r.transcript, corrected, backends.syntax)
        except AsaError:
            continue
        train_labels.extend(e.error_type for e in edits)
        train_texts.append(r.transcript)

    er_norm = _fit_channel(raw_er)
    ir_norm = _fit_channel(raw_ir)
    taxonomy = freeze_taxonomy(train_labels, capacity=config.grammar_capacity)
    schema = freeze_syntax_schema(backends.syntax, train_texts)

    fits = {
        "er_normalizer": er_norm.to_dict(),
        "ir_normalizer": ir_norm.to_dict(),
        "taxonomy": taxonomy.to_dict(),
        "syntax_schema": schema.to_dict(),
        "splits": {k: list(v) for k, v in splits.as_dict().items()},
        "config": config.to_dict(),
    }
    fits_digest = hashlib.sha256(
        json.dumps(fits, sort_keys=True).encode("utf-8")
    ).hexdigest()
    fits["digest"] = fits_digest
    (out_dir / "fits.json").write_text(
        json.dumps(fits, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )

    index_path = out_dir / "index.json"
    index: dict = (
        json.loads(index_path.read_text(encoding="utf-8"))
        if index_path.is_file()
        else {}
    )
    report = ExtractionReport(n_responses=len(records))

    def build_one(r: ResponseRecord) -> None:
        qs = sets_by_id[r.question_set_id]
        bundle = _bundle_for(
            backends,
            config,
            qs,
            images[qs.id],
            exemplars[qs.id],
            er_norm,
            ir_norm,
            taxonomy,
            schema,
            r,
            audio_path=(base / r.audio_ref) if r.audio_ref else None,
        )
        bundle.save_npz(out_dir / "bundles" / f"{r.id}.npz")

    pending: list[ResponseRecord] = []
    digests: dict[str, str] = {}
    for r in records:
        digests[r.id] = _record_digest(r, config, fits_digest)
        if index.get(r.id) == digests[r.id] and (
            out_dir / "bundles" / f"{r.id}.npz"
        ).is_file():
            report.skipped += 1
        else:
            pending.append(r)

    # responses are independent once fits exist; bounded pool, results
    # folded back on the driver thread
    with ThreadPoolExecutor(max_workers=_MAX_WORKERS) as pool:
        futures = {pool.submit(build_one, r): r for r in pending}
        for fut in futures:
            r = futures[fut]
            try:
                fut.result()
            except AsaError as exc:
                report.errors[r.id] = f"{type(exc).__name__}: {exc}"
                continue
            index[r.id] = digests[r.id]
            report.extracted += 1

    index_path.write_text(
        json.dumps(index, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    (out_dir / "extraction_report.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )
    return report

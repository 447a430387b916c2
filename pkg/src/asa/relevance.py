"""Relevance feature streams.

Three channels measure how well a response addresses its prompt:

* exemplar-response: cosine similarity between sentence embeddings of the
  exemplar segment and the response segment for each question;
* image-response: cosine similarity between a joint image embedding of the
  prompt picture and a text embedding of each response segment;
* question-response: a per-token sequence pairing a summary vector of the
  question text with each response token vector, projected to 256-D.

Raw similarities are normalized per question index to [0.01, 1] with fitted
min/max statistics; an empty response segment maps to exactly 0. Backends
are pluggable; the bundled hash backends are deterministic doubles that need
no model downloads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import EmbeddingError, FitError, MediaError, NormalizerLookupError
from .palette import N_BUCKETS, color_bucket
from .text import content_words, hash_vector, stable_bucket

QR_DIM = 256
NO_RESPONSE = None  # sentinel for an empty response segment
EPSILON_FLOOR = 0.01


class TextEmbeddingBackend(Protocol):
    embedding_dim: int

    def embed_text(self, text: str) -> np.ndarray: ...


class ImageTextEmbeddingBackend(Protocol):
    joint_dim: int

    def embed_image(self, image) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


class ContextualEncoderBackend(Protocol):
    token_dim: int

    def encode(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        """Return (summary_vector [token_dim], token_vectors [M, token_dim]).

        An empty input yields a length-1 token sequence over a padding token.
        """
        ...


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def exemplar_response_similarity(
    backend: TextEmbeddingBackend, e_i: str, r_i: str
) -> float | None:
    """Cosine similarity of exemplar and response segment embeddings.

    Returns the no-response sentinel (None) when the response segment is
    empty; the exemplar segment must be non-empty.
    """
    if not e_i.strip():
        raise EmbeddingError("exemplar segment is empty")
    if not r_i.strip():
        return NO_RESPONSE
    try:
        ve = backend.embed_text(e_i)
        vr = backend.embed_text(r_i)
    except Exception as exc:
        raise EmbeddingError(f"text embedding failed: {exc}") from exc
    return cosine(ve, vr)


def image_response_similarity(
    backend: ImageTextEmbeddingBackend, image, r_i: str
) -> float | None:
    """Cosine similarity between the prompt image and a response segment."""
    if not r_i.strip():
        return NO_RESPONSE
    try:
        vi = backend.embed_image(image)
    except MediaError:
        raise
    except Exception as exc:
        raise MediaError(f"image could not be embedded: {exc}") from exc
    try:
        vt = backend.embed_text(r_i)
    except Exception as exc:
        raise EmbeddingError(f"text embedding failed: {exc}") from exc
    return cosine(vi, vt)


@dataclass
class SimilarityNormalizer:
    """Per-question min/max normalization of raw similarities to [0.01, 1].

    Keys are arbitrary hashables (plain question indices at the operation
    level; (question_set_id, index, channel) tuples in the pipeline). A key
    whose fitted min equals its max is flagged constant and maps every
    non-sentinel input to 1.0. An optional fallback key serves lookups for
    unfitted keys (used for question sets absent from training).
    """

    stats: dict = field(default_factory=dict)
    fallback_key: object = None

    def fit_key(self, key, sims: list[float]) -> None:
        sims = [s for s in sims if s is not NO_RESPONSE]
        if not sims:
            raise FitError(f"question {key!r}: no non-sentinel similarities to fit")
        lo, hi = min(sims), max(sims)
        self.stats[key] = (float(lo), float(hi), bool(hi == lo))

    def is_constant(self, key) -> bool:
        return self.stats[key][2]

    def normalize(self, key, sim: float | None) -> float:
        if sim is NO_RESPONSE:
            return 0.0
        if key not in self.stats:
            if self.fallback_key is not None and self.fallback_key in self.stats:
                key = self.fallback_key
            else:
                raise NormalizerLookupError(f"question {key!r} was never fitted")
        lo, hi, constant = self.stats[key]
        if constant:
            return 1.0
        t = (float(sim) - lo) / (hi - lo)
        t = min(1.0, max(0.0, t))
        return EPSILON_FLOOR + (1.0 - EPSILON_FLOOR) * t

    def to_dict(self) -> dict:
        return {
            "fallback_key": list(self.fallback_key) if isinstance(self.fallback_key, tuple) else self.fallback_key,
            "stats": [[list(k) if isinstance(k, tuple) else k, lo, hi, c]
                      for k, (lo, hi, c) in sorted(self.stats.items(), key=lambda kv: json.dumps(kv[0] if not isinstance(kv[0], tuple) else list(kv[0])))],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SimilarityNormalizer":
        fb = obj.get("fallback_key")
        norm = cls(fallback_key=tuple(fb) if isinstance(fb, list) else fb)
        for k, lo, hi, c in obj["stats"]:
            norm.stats[tuple(k) if isinstance(k, list) else k] = (lo, hi, bool(c))
        return norm


def fit_normalizer(raw_sims: dict) -> SimilarityNormalizer:
    """Fit per-question (min, max) statistics from training similarities.

    ``raw_sims`` maps question key -> list of raw similarities; sentinels are
    excluded before fitting and an all-sentinel question raises FitError.
    """
    norm = SimilarityNormalizer()
    for key, sims in raw_sims.items():
        norm.fit_key(key, sims)
    return norm


def normalize(normalizer: SimilarityNormalizer, question_index, sim) -> float:
    return normalizer.normalize(question_index, sim)


@dataclass(frozen=True)
class RelevanceFeatures:
    s_er: np.ndarray  # k floats in {0} u [0.01, 1]
    s_ir: np.ndarray  # k floats in {0} u [0.01, 1]
    f_qr: np.ndarray  # M x QR_DIM


def qr_projection(in_dim: int, out_dim: int = QR_DIM) -> np.ndarray:
    """Fixed deterministic Gaussian projection used by the QR channel.

    Built from the stable token hash so it does not depend on any RNG
    library's stream stability; scaled by 1/sqrt(in_dim).
    """
    rows = [hash_vector(f"qr-proj-row-{i}", in_dim, salt="qr") for i in range(out_dim)]
    return (np.stack(rows) / np.sqrt(in_dim)).astype(np.float32)


def question_response_features(
    backend: ContextualEncoderBackend, question: str, response: str
) -> np.ndarray:
    """Per-token question-response sequence, one QR_DIM vector per token.

    Element i concatenates the question's summary vector with response token
    i's contextual vector, then applies the fixed projection to QR_DIM.
    """
    try:
        q_summary, _ = backend.encode(question)
        _, r_tokens = backend.encode(response)
    except Exception as exc:
        raise EmbeddingError(f"contextual encoder failed: {exc}") from exc
    m = r_tokens.shape[0]
    concat = np.concatenate(
        [np.tile(q_summary, (m, 1)), r_tokens], axis=1
    ).astype(np.float32)
    proj = qr_projection(concat.shape[1])
    return concat @ proj.T


# -- deterministic hash doubles ----------------------------------------------


class HashTextEmbeddingBackend:
    """Hashed bag-of-content-words sentence embedding (signed buckets)."""

    def __init__(self, embedding_dim: int = 64):
        self.embedding_dim = embedding_dim

    def embed_text(self, text: str) -> np.ndarray:
        v = np.zeros(self.embedding_dim, dtype=np.float32)
        for tok in content_words(text):
            b = stable_bucket(tok, self.embedding_dim, salt="text-emb")
            sign = 1.0 if stable_bucket(tok, 2, salt="text-emb-sign") else -1.0
            v[b] += sign
        n = np.linalg.norm(v)
        return v / n if n > 0 else v


class HashImageTextBackend:
    """Joint image/text embedding over the shared 64-color palette space.

    Text: content words hashed to palette buckets (non-negative counts).
    Image: non-background pixel counts per exact palette color. Both sides
    are L2-normalized, so two modalities talking about the same scene words
    land in the same buckets.
    """

    def __init__(self):
        self.joint_dim = N_BUCKETS

    def embed_text(self, text: str) -> np.ndarray:
        v = np.zeros(self.joint_dim, dtype=np.float32)
        for tok in content_words(text):
            v[stable_bucket(tok, self.joint_dim, salt="joint")] += 1.0
        n = np.linalg.norm(v)
        return v / n if n > 0 else v

    def embed_image(self, image) -> np.ndarray:
        arr = _image_to_array(image)
        v = np.zeros(self.joint_dim, dtype=np.float32)
        flat = arr.reshape(-1, arr.shape[-1])
        colors, counts = np.unique(flat, axis=0, return_counts=True)
        for rgb, count in zip(colors, counts):
            b = color_bucket(tuple(int(c) for c in rgb[:3]))
            if b is not None:
                v[b] += float(count)
        n = np.linalg.norm(v)
        return v / n if n > 0 else v


def _image_to_array(image) -> np.ndarray:
    """Accept a path, PIL image, or HxWx3 array; return an RGB array."""
    if isinstance(image, np.ndarray):
        if image.ndim != 3 or image.shape[-1] < 3:
            raise MediaError(f"image array has shape {image.shape}, expected HxWx3")
        return image
    try:
        from PIL import Image

        if isinstance(image, Image.Image):
            return np.asarray(image.convert("RGB"))
        with Image.open(image) as im:
            return np.asarray(im.convert("RGB"))
    except MediaError:
        raise
    except Exception as exc:
        raise MediaError(f"image {image!r} could not be decoded: {exc}") from exc


class HashContextualBackend:
    """Deterministic stand-in for a contextual token encoder.

    Token vectors are stable hash vectors blended with a fraction of the
    previous token's vector (a minimal notion of context); the summary vector
    is the mean of the token vectors. Empty input encodes a single [PAD]
    token, keeping the sequence length at least 1.
    """

    PAD = "[PAD]"

    def __init__(self, token_dim: int = 32):
        self.token_dim = token_dim

    def tokens(self, text: str) -> list[str]:
        toks = text.lower().split()
        return toks if toks else [self.PAD]

    def encode(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        toks = self.tokens(text)
        base = [hash_vector(t, self.token_dim, salt="ctx") for t in toks]
        out = []
        for i, v in enumerate(base):
            ctx = base[i - 1] if i > 0 else np.zeros(self.token_dim, dtype=np.float32)
            out.append(v + 0.25 * ctx)
        mat = np.stack(out).astype(np.float32)
        return mat.mean(axis=0), mat


# -- HTTP adapters -----------------------------------------------------------


class HttpTextEmbeddingBackend:
    """POST <endpoint>/embed with {"text": ...} expecting {"embedding": [...]}."""

    def __init__(self, endpoint: str, embedding_dim: int, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.embedding_dim = embedding_dim
        self.timeout = timeout

    def embed_text(self, text: str) -> np.ndarray:
        import requests

        try:
            resp = requests.post(
                self.endpoint + "/embed", json={"text": text}, timeout=self.timeout
            )
            resp.raise_for_status()
            vec = np.asarray(resp.json()["embedding"], dtype=np.float32)
        except Exception as exc:
            raise EmbeddingError(f"embedding endpoint {self.endpoint}: {exc}") from exc
        if vec.shape != (self.embedding_dim,):
            raise EmbeddingError(
                f"endpoint returned shape {vec.shape}, expected ({self.embedding_dim},)"
            )
        return vec


def make_text_backend(spec: str) -> TextEmbeddingBackend:
    """Resolve a config value: 'hash', an http(s) URL, or a model id for
    sentence-transformers."""
    if spec == "hash":
        return HashTextEmbeddingBackend()
    if spec.startswith("http://") or spec.startswith("https://"):
        return HttpTextEmbeddingBackend(spec, embedding_dim=384)
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise EmbeddingError(f"backend {spec!r} needs sentence-transformers") from exc

    class _Sbert:
        def __init__(self, model_id: str):
            self._model = SentenceTransformer(model_id)
            self.embedding_dim = self._model.get_sentence_embedding_dimension()

        def embed_text(self, text: str) -> np.ndarray:
            return np.asarray(self._model.encode([text])[0], dtype=np.float32)

    return _Sbert(spec)

"""Shared text utilities: tokenization, sentence segmentation, stable hashing.

ASR transcripts carry unreliable casing and punctuation, so equality checks
throughout the pipeline fold case and collapse whitespace. Hashing is done
with md5 (not Python's salted ``hash``) so that derived features are stable
across processes and runs.
"""

from __future__ import annotations

import hashlib
import re
import struct

import numpy as np

_TOKEN_RE = re.compile(r"\w+(?:'\w+)?|[^\w\s]")
_SENT_RE = re.compile(r"[^.!?]*[.!?]+|[^.!?]+$")
_VOWEL_RE = re.compile(r"[aeiouy]+")

# Small closed stopword list used for lexical-overlap scoring.
STOPWORDS = frozenset(
    "a an the is are was were be been am do does did to of in on at and or "
    "but if then so for with as by it its this that these those there "
    "what who whom when where why how".split()
)


def fold(text: str) -> str:
    """Lowercase and collapse all whitespace runs to single spaces."""
    return " ".join(text.lower().split())


def tokenize(text: str) -> list[str]:
    """Split into word and punctuation tokens, keeping original case.

    Apostrophe contractions stay attached ("don't" is one token).
    """
    return _TOKEN_RE.findall(text)


def words(text: str) -> list[str]:
    """Whitespace-delimited words, the unit used for word counts."""
    return text.split()


def sentences(text: str) -> list[str]:
    """Greedy sentence segmentation on ./!/? runs; keeps terminators."""
    return [m.group().strip() for m in _SENT_RE.finditer(text) if m.group().strip()]


def content_words(text: str) -> list[str]:
    """Folded word tokens with stopwords and punctuation removed."""
    out = []
    for tok in tokenize(text.lower()):
        if tok in STOPWORDS or not any(c.isalnum() for c in tok):
            continue
        out.append(tok)
    return out


def syllable_count(word: str) -> int:
    """Orthographic syllable estimate: vowel clusters, at least one."""
    return max(1, len(_VOWEL_RE.findall(word.lower())))


def stable_digest(*parts: str) -> bytes:
    h = hashlib.md5()
    for p in parts:
        h.update(p.encode("utf-8"))
        h.update(b"\x00")
    return h.digest()


def stable_bucket(token: str, n_buckets: int, salt: str = "") -> int:
    """Deterministic token -> bucket index in [0, n_buckets)."""
    d = stable_digest(salt, token)
    return int.from_bytes(d[:8], "big") % n_buckets


def hash_vector(token: str, dim: int, salt: str = "") -> np.ndarray:
    """Deterministic pseudo-random unit-variance vector for a token.

    Expands the md5 digest with counter blocks until ``dim`` float32 values
    are available, then maps bytes to approximately N(0,1) via a uniform ->
    normal transform on pairs (Box-Muller).
    """
    need = dim
    vals: list[float] = []
    counter = 0
    while len(vals) < need:
        d = stable_digest(salt, token, str(counter))
        # 4 uint32 per digest -> 4 uniforms -> 4 normals (2 Box-Muller pairs)
        us = [
            (struct.unpack(">I", d[i : i + 4])[0] + 0.5) / 2**32
            for i in range(0, 16, 4)
        ]
        for u1, u2 in ((us[0], us[1]), (us[2], us[3])):
            r = np.sqrt(-2.0 * np.log(u1))
            vals.append(r * np.cos(2 * np.pi * u2))
            vals.append(r * np.sin(2 * np.pi * u2))
        counter += 1
    return np.asarray(vals[:dim], dtype=np.float32)


def lexical_overlap(a: str, b: str) -> int:
    """Number of shared content-word types between two texts."""
    return len(set(content_words(a)) & set(content_words(b)))

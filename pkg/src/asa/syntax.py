"""Per-token syntactic features: POS, dependency relation, morphology.

A token's feature vector is the concatenation of a one-hot POS block, a
one-hot dependency block, and a multi-hot morphology block, 247 dimensions
total. The label -> index assignment lives in a SyntaxSchema that is frozen
once (optionally ranking morphology pairs by training frequency) and must be
supplied again at inference; unknown labels map to reserved UNK slots.

The bundled backend is a deterministic rule tagger over the closed lexicon
with suffix heuristics for unknown words. Any tagger/parser exposing
``annotate`` and the three label inventories can stand in for it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Protocol

import numpy as np

from . import lexicon as lx
from .errors import AnnotationError
from .text import tokenize

TOTAL_DIM = 247
UNK = "<unk>"

UPOS = (
    "ADJ ADP ADV AUX CCONJ DET INTJ NOUN NUM PART PRON PROPN PUNCT SCONJ "
    "SYM VERB X".split()
)

UDEPS = (
    "acl advcl advmod amod appos aux case cc ccomp clf compound conj cop "
    "csubj dep det discourse dislocated expl fixed flat goeswith iobj list "
    "mark nmod nsubj nummod obj obl orphan parataxis punct reparandum root "
    "vocative xcomp".split()
)

POS_BLOCK = len(UPOS) + 1          # 18
DEP_BLOCK = len(UDEPS) + 1         # 38
MORPH_BLOCK = TOTAL_DIM - POS_BLOCK - DEP_BLOCK  # 191 (190 pairs + UNK)


@dataclass(frozen=True)
class TokenAnnotation:
    token: str
    pos: str
    lemma: str
    dep: str
    morph: tuple[str, ...]  # "Feature=Value" pairs, sorted


class SyntacticAnnotationBackend(Protocol):
    pos_inventory: tuple[str, ...]
    dep_inventory: tuple[str, ...]
    morph_inventory: tuple[str, ...]

    def annotate(self, text: str) -> list[TokenAnnotation]: ...


@dataclass
class SyntaxSchema:
    """Label -> index assignment for the three feature blocks."""

    pos_index: dict[str, int]
    dep_index: dict[str, int]
    morph_index: dict[str, int]
    dim: int = TOTAL_DIM

    @property
    def pos_unk(self) -> int:
        return POS_BLOCK - 1

    @property
    def dep_unk(self) -> int:
        return POS_BLOCK + DEP_BLOCK - 1

    @property
    def morph_unk(self) -> int:
        return self.dim - 1

    @classmethod
    def _build(cls, morph_pairs: Iterable[str]) -> "SyntaxSchema":
        pos_index = {p: i for i, p in enumerate(UPOS)}
        dep_index = {d: POS_BLOCK + i for i, d in enumerate(UDEPS)}
        morph_index = {}
        for i, pair in enumerate(morph_pairs):
            if i >= MORPH_BLOCK - 1:
                break
            morph_index[pair] = POS_BLOCK + DEP_BLOCK + i
        return cls(pos_index=pos_index, dep_index=dep_index, morph_index=morph_index)

    @classmethod
    def from_backend(cls, backend: SyntacticAnnotationBackend) -> "SyntaxSchema":
        """Deterministic default: morphology pairs in declared inventory order."""
        return cls._build(backend.morph_inventory)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "blocks": {"pos": POS_BLOCK, "dep": DEP_BLOCK, "morph": MORPH_BLOCK},
            "pos": self.pos_index,
            "dep": self.dep_index,
            "morph": self.morph_index,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SyntaxSchema":
        return cls(
            pos_index=dict(obj["pos"]),
            dep_index=dict(obj["dep"]),
            morph_index=dict(obj["morph"]),
            dim=int(obj["dim"]),
        )


def freeze_syntax_schema(
    backend: SyntacticAnnotationBackend, texts: Iterable[str]
) -> SyntaxSchema:
    """Schema with morphology pairs ranked by frequency over ``texts``.

    Pairs never observed keep their declared-inventory order after the
    observed ones; ties break lexicographically for determinism.
    """
    counts: Counter[str] = Counter()
    for text in texts:
        for ann in backend.annotate(text):
            counts.update(ann.morph)
    observed = sorted(counts, key=lambda p: (-counts[p], p))
    rest = [p for p in backend.morph_inventory if p not in counts]
    return SyntaxSchema._build(observed + rest)


@dataclass(frozen=True)
class SyntaxSequence:
    vectors: np.ndarray  # L x TOTAL_DIM, float32
    tokens: tuple[str, ...]


def syntax_features(
    backend: SyntacticAnnotationBackend, schema: SyntaxSchema, transcript: str
) -> SyntaxSequence:
    """Vectorize a transcript: one 247-D vector per token."""
    if not transcript.strip():
        raise AnnotationError("transcript is empty")
    try:
        annotations = backend.annotate(transcript)
    except AnnotationError:
        raise
    except Exception as exc:
        raise AnnotationError(f"annotation backend failed: {exc}") from exc
    if not annotations:
        raise AnnotationError("backend produced no tokens")
    mat = np.zeros((len(annotations), schema.dim), dtype=np.float32)
    for i, ann in enumerate(annotations):
        mat[i, schema.pos_index.get(ann.pos, schema.pos_unk)] = 1.0
        mat[i, schema.dep_index.get(ann.dep, schema.dep_unk)] = 1.0
        for pair in ann.morph:
            mat[i, schema.morph_index.get(pair, schema.morph_unk)] = 1.0
    return SyntaxSequence(vectors=mat, tokens=tuple(a.token for a in annotations))


# -- rule-based annotation backend -------------------------------------------

_MORPH_INVENTORY = (
    "Definite=Def", "Definite=Ind", "Degree=Cmp", "Degree=Pos", "Degree=Sup",
    "Mood=Ind", "Number=Plur", "Number=Sing", "NumType=Card", "Person=1",
    "Person=2", "Person=3", "Poss=Yes", "PronType=Art", "PronType=Dem",
    "PronType=Prs", "Tense=Past", "Tense=Pres", "VerbForm=Fin",
    "VerbForm=Ger", "VerbForm=Inf", "VerbForm=Part",
)


def _pairs(d: dict[str, str]) -> tuple[str, ...]:
    return tuple(sorted(f"{k}={v}" for k, v in d.items()))


class RuleSyntaxBackend:
    """Deterministic lexicon + suffix tagger with a heuristic dependency pass.

    Not a real parser; it exists to make the feature pipeline runnable and
    testable without spaCy while emitting labels from the same closed
    inventories.
    """

    pos_inventory = tuple(UPOS)
    dep_inventory = tuple(UDEPS)
    morph_inventory = _MORPH_INVENTORY

    def _tag_word(self, tok: str, folded: str, prev_folded: str | None) -> tuple[str, str, dict]:
        """(pos, lemma, morph) for a single word token."""
        if folded in lx.PRONOUNS:
            num, person = lx.PRONOUNS[folded]
            return "PRON", folded, {"PronType": "Prs", "Number": num, "Person": person}
        if folded in lx.DETERMINERS:
            return "DET", folded, dict(lx.DETERMINERS[folded])
        if folded in lx.AUXILIARIES:
            morph = {"VerbForm": "Fin", "Mood": "Ind"}
            if folded in ("was", "were", "did"):
                morph["Tense"] = "Past"
            elif folded in ("is", "are", "am", "do", "does"):
                morph["Tense"] = "Pres"
            return "AUX", folded, morph
        if folded == "not":
            return "PART", folded, {}
        if folded == "to" and prev_folded != "the":
            # "to" defaults to particle/preposition; both map to PART/ADP by
            # the following context in the dependency pass, POS stays ADP
            # except before a base verb handled in annotate().
            return "ADP", folded, {}
        if folded in lx.CCONJ:
            return "CCONJ", folded, {}
        if folded in lx.SCONJ:
            return "SCONJ", folded, {}
        if folded in lx.INTERJECTIONS:
            return "INTJ", folded, {}
        if folded in lx.NUMBER_WORDS or folded.isdigit():
            return "NUM", folded, {"NumType": "Card"}
        if folded in lx.FORM_TO_BASE or folded in lx.BASE_VERBS:
            base, slot = lx.FORM_TO_BASE.get(folded, (folded, "base"))
            morph = {
                "base": {"VerbForm": "Fin", "Tense": "Pres"},
                "3sg": {"VerbForm": "Fin", "Tense": "Pres", "Person": "3", "Number": "Sing"},
                "past": {"VerbForm": "Fin", "Tense": "Past"},
                "ger": {"VerbForm": "Ger"},
                "part": {"VerbForm": "Part", "Tense": "Past"},
            }[slot]
            return "VERB", base, dict(morph)
        if folded in lx.ADVERBS:
            return "ADV", folded, {}
        if folded in lx.ADJECTIVES:
            return "ADJ", folded, {"Degree": "Pos"}
        if folded in lx.PREPOSITIONS:
            return "ADP", folded, {}
        if folded in lx.PLURAL_NOUNS:
            return "NOUN", lx.PLURAL_TO_SINGULAR[folded], {"Number": "Plur"}
        if folded in lx.SINGULAR_NOUNS:
            return "NOUN", folded, {"Number": "Sing"}
        # suffix heuristics for out-of-lexicon words
        if folded.endswith("ly") and len(folded) > 3:
            return "ADV", folded, {}
        if folded.endswith("ing") and len(folded) > 4:
            return "VERB", folded[:-3], {"VerbForm": "Ger"}
        if folded.endswith("ed") and len(folded) > 3:
            return "VERB", folded[:-2], {"VerbForm": "Fin", "Tense": "Past"}
        if folded.endswith("er") and len(folded) > 3 and folded[:-2] in lx.ADJECTIVES:
            return "ADJ", folded[:-2], {"Degree": "Cmp"}
        if folded.endswith("est") and len(folded) > 4 and folded[:-3] in lx.ADJECTIVES:
            return "ADJ", folded[:-3], {"Degree": "Sup"}
        if tok[:1].isupper() and prev_folded is not None:
            return "PROPN", folded, {"Number": "Sing"}
        if folded.endswith("s") and len(folded) > 3:
            return "NOUN", folded[:-1], {"Number": "Plur"}
        return "NOUN", folded, {"Number": "Sing"}

    def annotate(self, text: str) -> list[TokenAnnotation]:
        tokens = tokenize(text)
        tagged: list[tuple[str, str, str, dict]] = []
        prev_folded: str | None = None
        for i, tok in enumerate(tokens):
            folded = tok.lower()
            if not any(c.isalnum() for c in tok):
                pos = "PUNCT" if tok in ".,!?;:'\"()-" else "SYM"
                tagged.append((tok, pos, tok, {}))
                prev_folded = folded
                continue
            pos, lemma, morph = self._tag_word(tok, folded, prev_folded)
            # "to" before a base verb is the infinitive particle
            if folded == "to" and i + 1 < len(tokens) and tokens[i + 1].lower() in lx.BASE_VERBS:
                pos, morph = "PART", {}
            # base verb after "to" or a modal is an infinitive
            if pos == "VERB" and morph.get("Tense") == "Pres" and "Person" not in morph:
                if prev_folded == "to" or prev_folded in lx.AUXILIARIES:
                    morph = {"VerbForm": "Inf"}
            tagged.append((tok, pos, lemma, morph))
            prev_folded = folded
        deps = self._dependencies([t[1] for t in tagged])
        return [
            TokenAnnotation(token=tok, pos=pos, lemma=lemma, dep=dep, morph=_pairs(morph))
            for (tok, pos, lemma, morph), dep in zip(tagged, deps)
        ]

    def _dependencies(self, pos_tags: list[str]) -> list[str]:
        """Heuristic relation per token, anchored on the first main verb."""
        n = len(pos_tags)
        root = next((i for i, p in enumerate(pos_tags) if p == "VERB"), None)
        if root is None:
            root = next((i for i, p in enumerate(pos_tags) if p == "AUX"), None)
        if root is None:
            root = next(
                (i for i, p in enumerate(pos_tags) if p in ("NOUN", "PROPN", "PRON")), 0 if n else None
            )
        deps = []
        subj_seen = False
        obj_seen = False
        for i, pos in enumerate(pos_tags):
            if i == root:
                deps.append("root")
                continue
            if pos == "PUNCT":
                deps.append("punct")
            elif pos == "DET":
                deps.append("det")
            elif pos == "ADJ":
                deps.append("amod")
            elif pos == "ADV":
                deps.append("advmod")
            elif pos == "ADP":
                deps.append("case")
            elif pos == "NUM":
                deps.append("nummod")
            elif pos == "CCONJ":
                deps.append("cc")
            elif pos in ("SCONJ", "PART"):
                deps.append("mark")
            elif pos == "AUX":
                deps.append("aux" if i < (root if root is not None else n) else "cop")
            elif pos == "INTJ":
                deps.append("discourse")
            elif pos in ("NOUN", "PROPN", "PRON"):
                if root is not None and i < root and not subj_seen:
                    deps.append("nsubj")
                    subj_seen = True
                elif root is not None and i > root:
                    if i > 0 and pos_tags[i - 1] == "ADP":
                        deps.append("obl")
                    elif not obj_seen:
                        deps.append("obj")
                        obj_seen = True
                    else:
                        deps.append("nmod")
                else:
                    deps.append("nmod")
            elif pos == "VERB":
                deps.append("xcomp" if root is not None and i > root else "conj")
            else:
                deps.append("dep")
        return deps

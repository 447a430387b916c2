"""Synthetic corpus generator with planted, score-correlated signal.

Each question set describes a drawn scene: the image paints one palette
rectangle per scene entity, the questions ask about those entities, and the
exemplar answers them with the same content words. Responses plant three
kinds of defects, all tied to a 1..5 score:

* relevance: high scores answer every question on topic; low scores swap in
  sentences about a different scene or skip questions outright
* language use: 2 x (5 - score) grammar corruptions, each exactly invertible
  by the rule GEC backend (agreement, tense, number, dropped and doubled
  determiners)
* delivery: word timestamps slow down and sentence gaps stretch past the
  long-pause threshold as the score drops

The same arguments always produce byte-identical manifests and images: one
seeded generator drives every random choice in a fixed order.
"""

from __future__ import annotations

import random
from pathlib import Path

from PIL import Image, ImageDraw

from . import lexicon as lx
from .corpus import QuestionSet, ResponseRecord, ScoreLabel, write_manifest
from .palette import N_BUCKETS, bucket_color
from .text import sentences, stable_bucket, syllable_count

# scene vocabulary: agent, second figure, object, place, counted noun,
# present verb (3sg distinct), past verb (past distinct from base);
# content words are globally unique across topics so that off-topic
# sentences share nothing but function words with the right answers
_TOPICS = (
    ("man", "dog", "ball", "park", "tree", "hold", "walk"),
    ("girl", "boy", "book", "library", "shelf", "read", "wait"),
    ("woman", "vendor", "basket", "market", "apple", "sell", "buy"),
    ("child", "lady", "umbrella", "beach", "shell", "swim", "play"),
    ("teacher", "student", "window", "school", "chair", "point", "talk"),
    ("friend", "cat", "ticket", "station", "train", "stand", "arrive"),
    ("bird", "fish", "rose", "garden", "flower", "smile", "jump"),
    ("family", "engine", "pot", "kitchen", "meal", "cook", "open"),
)

_NUM_WORDS = ("two", "three", "four")

IMAGE_SIZE = 128


def _forms(base: str) -> tuple[str, str]:
    """(third singular, past) for a lexicon verb."""
    f = lx.VERB_FORMS[base]
    return f[0], f[1]


def _questions(topic) -> list[str]:
    agent, second, obj, place, count, _, _ = topic
    return [
        f"What is the {agent} doing in the {place}?",
        f"What is the {second} doing near the {agent}?",
        f"How many {lx.NOUN_PLURALS[count]} can you see in the picture?",
        f"What did the {agent} do yesterday?",
    ]


def _exemplar_segments(topic) -> list[str]:
    agent, second, obj, place, count, verb, past_verb = topic
    v3, _ = _forms(verb)
    pv3, vpast = _forms(past_verb)
    return [
        f"The {agent} {v3} a {obj} in the {place}.",
        f"The {second} {pv3} near the {agent}.",
        f"I can see three {lx.NOUN_PLURALS[count]} in the picture.",
        f"Yesterday the {agent} {vpast} to the {place} with a {obj}.",
    ]


def _answer_variants(topic, q_idx: int, rng: random.Random) -> str:
    agent, second, obj, place, count, verb, past_verb = topic
    v3, _ = _forms(verb)
    pv3, vpast = _forms(past_verb)
    num = rng.choice(_NUM_WORDS)
    variants = (
        (
            f"The {agent} {v3} the {obj} in the {place}.",
            f"I think the {agent} {v3} a {obj} near the {place}.",
        ),
        (
            f"The {second} {pv3} near the {agent}.",
            f"The {second} {pv3} beside the {agent}.",
        ),
        (
            f"I can see {num} {lx.NOUN_PLURALS[count]} in the picture.",
            f"There are {num} {lx.NOUN_PLURALS[count]} near the {place}.",
        ),
        (
            f"Yesterday the {agent} {vpast} to the {place}.",
            f"Yesterday the {agent} {vpast} there with a {obj}.",
        ),
    )
    return rng.choice(variants[q_idx])


# -- grammar corruption ---------------------------------------------------------

_CORE_PREPS = lx.PREPOSITIONS - {"of"}


def _split_word(word: str) -> tuple[str, str, str]:
    start, end = 0, len(word)
    while start < end and not word[start].isalnum():
        start += 1
    while end > start and not word[end - 1].isalnum():
        end -= 1
    return word[:start], word[start:end], word[end:]


def _corruption_sites(sent_words: list[str]) -> list[tuple[int, str]]:
    """(word index, kind) pairs where one invertible defect can be planted."""
    cores = [_split_word(w)[1].lower() for w in sent_words]
    past = any(c in lx.PAST_TIME_MARKERS for c in cores)
    sites: list[tuple[int, str]] = []
    for i in range(1, len(cores)):
        prev, core = cores[i - 1], cores[i]
        nxt = cores[i + 1] if i + 1 < len(cores) else ""
        third_sing = prev in lx.THIRD_SING_PRONOUNS or prev in lx.SINGULAR_NOUNS
        entry = lx.FORM_TO_BASE.get(core)
        if not past and entry and entry[1] == "3sg" and entry[0] != core and third_sing:
            sites.append((i, "agr"))
        if (
            past
            and entry
            and entry[1] == "past"
            and entry[0] != core
            and (third_sing or prev in lx.PRONOUNS or prev in lx.PLURAL_NOUNS)
        ):
            sites.append((i, "tense"))
        if (
            core in lx.PLURAL_TO_SINGULAR
            and core not in lx.SINGULAR_NOUNS
            and core != lx.PLURAL_TO_SINGULAR[core]
            and prev in lx.PLURAL_QUANTIFIERS
        ):
            sites.append((i, "num"))
        if (
            core == "the"
            and (prev in _CORE_PREPS or prev in lx.FORM_TO_BASE or prev in lx.BASE_VERBS)
            and nxt in lx.SINGULAR_NOUNS
        ):
            sites.append((i, "detdel"))
        if core == "the" and prev != "the":
            sites.append((i, "detdup"))
    return sites


def _apply_corruption(words: list[str], idx: int, kind: str) -> None:
    pre, core, post = _split_word(words[idx])
    folded = core.lower()
    if kind == "agr" or kind == "tense":
        words[idx] = pre + lx.FORM_TO_BASE[folded][0] + post
    elif kind == "num":
        words[idx] = pre + lx.PLURAL_TO_SINGULAR[folded] + post
    elif kind == "detdel":
        del words[idx]
    elif kind == "detdup":
        words.insert(idx, "the")


def _corrupt(text: str, n_errors: int, rng: random.Random) -> str:
    """Plant up to n_errors rule-invertible defects, one per site."""
    if n_errors <= 0:
        return text
    sents = [s.split() for s in sentences(text)]
    all_sites = [
        (si, wi, kind)
        for si, ws in enumerate(sents)
        for wi, kind in _corruption_sites(ws)
    ]
    rng.shuffle(all_sites)
    chosen: list[tuple[int, int, str]] = []
    used: set[tuple[int, int]] = set()
    for si, wi, kind in all_sites:
        if len(chosen) == n_errors:
            break
        if {(si, wi - 1), (si, wi), (si, wi + 1)} & used:
            continue
        chosen.append((si, wi, kind))
        used.add((si, wi))
    # right-to-left so earlier indices stay valid after insert/delete
    for si, wi, kind in sorted(chosen, key=lambda t: (t[0], -t[1])):
        _apply_corruption(sents[si], wi, kind)
    return " ".join(" ".join(ws) for ws in sents)


# -- timing ---------------------------------------------------------------------


def _timestamps(transcript: str, score: int, rng: random.Random):
    syl_dur = 0.10 + 0.025 * (5 - score)
    word_gap = 0.05 + 0.05 * (5 - score)
    sent_gap = 0.10 + 0.18 * (5 - score)
    t = 0.15
    out = []
    for word in transcript.split():
        dur = max(syllable_count(word) * syl_dur + rng.randrange(3) * 0.01, 0.05)
        start = round(t, 3)
        end = round(t + dur, 3)
        out.append((word, start, end))
        gap = sent_gap if word[-1:] in ".!?" else word_gap
        t = end + gap
    return tuple(out)


# -- images ---------------------------------------------------------------------


def _draw_scene(topic, rng: random.Random) -> Image.Image:
    img = Image.new("RGB", (IMAGE_SIZE, IMAGE_SIZE), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    nouns = topic[:5]
    cols = 3
    cell = IMAGE_SIZE // cols
    for i, noun in enumerate(nouns):
        cx = (i % cols) * cell + cell // 2
        cy = (i // cols) * cell + cell // 2 + 8
        half = rng.randrange(12, 19)
        color = bucket_color(stable_bucket(noun, N_BUCKETS))
        draw.rectangle(
            (cx - half, cy - half, cx + half, cy + half), fill=color
        )
    return img


# -- generator ------------------------------------------------------------------


def generate_synthetic_corpus(
    out_dir: str | Path,
    n_sets: int = 4,
    n_per_set: int = 10,
    seed: int = 0,
) -> Path:
    """Write a planted-signal corpus under out_dir; returns the manifest path.

    Scores cycle 1..5 within each set, so any n_per_set >= 5 covers the full
    scale. Relevance, grammar, and delivery defects all follow the planted
    score. Rerunning with the same arguments reproduces every byte.
    """
    if n_sets < 1 or n_per_set < 1:
        raise ValueError("n_sets and n_per_set must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    qsets: list[QuestionSet] = []
    responses: list[ResponseRecord] = []
    for si in range(n_sets):
        topic = _TOPICS[si % len(_TOPICS)]
        set_id = f"set-{si:02d}"
        k = 3 + (si % 2)
        questions = _questions(topic)[:k]
        exemplar = _exemplar_segments(topic)[:k]
        image_rel = f"images/{set_id}.png"
        _draw_scene(topic, rng).save(out_dir / image_rel)
        qsets.append(
            QuestionSet(
                id=set_id,
                questions=tuple(questions),
                exemplar_text=" ".join(exemplar),
                image_ref=image_rel,
                exemplar_segments=tuple(exemplar),
            )
        )

        for j in range(n_per_set):
            score = (j % 5) + 1
            n_on = int(k * (score - 1) / 4 + 0.5)
            on_topic = set(rng.sample(range(k), n_on))
            parts: list[str] = []
            for qi in range(k):
                if qi in on_topic:
                    parts.append(_answer_variants(topic, qi, rng))
                    continue
                other = _TOPICS[(si + 1 + rng.randrange(len(_TOPICS) - 1)) % len(_TOPICS)]
                if parts and rng.random() < 0.5:
                    continue  # question left unanswered
                parts.append(_answer_variants(other, rng.randrange(2), rng))
            transcript = _corrupt(" ".join(parts), 2 * (5 - score), rng)
            responses.append(
                ResponseRecord(
                    id=f"resp-{si:02d}-{j:02d}",
                    question_set_id=set_id,
                    transcript=transcript,
                    word_timestamps=_timestamps(transcript, score, rng),
                    scores=ScoreLabel(
                        holistic=score, relevance=score, language_use=score
                    ),
                )
            )

    manifest = out_dir / "manifest.jsonl"
    write_manifest(manifest, qsets, responses)
    return manifest

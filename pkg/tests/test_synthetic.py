"""Planted-signal checks for the synthetic corpus generator."""

import statistics
from collections import defaultdict

import pytest
from PIL import Image

from asa.corpus import load_manifest
from asa.grammar import RuleGecBackend, label_edits
from asa.palette import PALETTE
from asa.synthetic import IMAGE_SIZE, generate_synthetic_corpus
from asa.text import content_words


@pytest.fixture(scope="module")
def corpus(full_corpus):
    qsets, resps = load_manifest(full_corpus, check_files=True)
    return full_corpus, qsets, resps


class TestGeneration:
    def test_counts_and_ids(self, corpus):
        _, qsets, resps = corpus
        assert len(qsets) == 4
        assert len(resps) == 40
        assert qsets[0].id == "set-00"
        assert resps[0].id == "resp-00-00"
        per_set = defaultdict(int)
        for r in resps:
            per_set[r.question_set_id] += 1
        assert all(count == 10 for count in per_set.values())

    def test_scores_cycle_through_scale(self, corpus):
        _, _, resps = corpus
        for r in resps:
            j = int(r.id.rsplit("-", 1)[1])
            assert r.scores.holistic == (j % 5) + 1
            assert r.scores.relevance == r.scores.holistic
            assert r.scores.language_use == r.scores.holistic

    def test_byte_determinism(self, tmp_path):
        a = generate_synthetic_corpus(tmp_path / "a", n_sets=2, n_per_set=4, seed=21)
        b = generate_synthetic_corpus(tmp_path / "b", n_sets=2, n_per_set=4, seed=21)
        assert a.read_bytes() == b.read_bytes()
        for img in sorted((tmp_path / "a" / "images").iterdir()):
            twin = tmp_path / "b" / "images" / img.name
            assert img.read_bytes() == twin.read_bytes()

    def test_seed_changes_content(self, tmp_path):
        a = generate_synthetic_corpus(tmp_path / "a", n_sets=1, n_per_set=4, seed=1)
        b = generate_synthetic_corpus(tmp_path / "b", n_sets=1, n_per_set=4, seed=2)
        assert a.read_bytes() != b.read_bytes()

    def test_rejects_empty_layout(self, tmp_path):
        with pytest.raises(ValueError):
            generate_synthetic_corpus(tmp_path, n_sets=0, n_per_set=5)

    def test_images_use_palette_colors(self, corpus):
        manifest, qsets, _ = corpus
        for qset in qsets:
            img = Image.open(manifest.parent / qset.image_ref).convert("RGB")
            assert img.size == (IMAGE_SIZE, IMAGE_SIZE)
            colors = {rgb for _, rgb in img.getcolors(IMAGE_SIZE * IMAGE_SIZE)}
            colors.discard((255, 255, 255))
            assert colors  # something was drawn
            assert colors <= set(PALETTE)

    def test_timestamps_are_well_formed(self, corpus):
        _, _, resps = corpus
        for r in resps:
            assert len(r.word_timestamps) == len(r.transcript.split())
            prev_end = 0.0
            for word, start, end in r.word_timestamps:
                assert start >= prev_end
                assert end > start
                prev_end = end


class TestPlantedSignal:
    """The generator encodes the gold score in each aspect's raw material."""

    def test_grammar_error_budget(self, corpus):
        _, _, resps = corpus
        gec = RuleGecBackend()
        for r in resps:
            corrected = gec.correct_text(r.transcript)
            _, _, spans = label_edits(r.transcript, corrected)
            budget = 2 * (5 - r.scores.holistic)
            assert len(spans) <= budget
            if r.scores.holistic >= 3:
                # enough corruption sites exist at these scores to hit it
                assert len(spans) == budget

    def test_top_score_is_gec_fixpoint(self, corpus):
        _, _, resps = corpus
        gec = RuleGecBackend()
        for r in resps:
            if r.scores.holistic == 5:
                assert gec.correct_text(r.transcript) == r.transcript

    def test_pauses_shrink_as_score_rises(self, corpus):
        _, _, resps = corpus
        gaps = defaultdict(list)
        for r in resps:
            ts = r.word_timestamps
            gaps[r.scores.holistic].extend(
                ts[i][1] - ts[i - 1][2] for i in range(1, len(ts))
            )
        means = [statistics.mean(gaps[s]) for s in (1, 2, 3, 4, 5)]
        assert all(a > b for a, b in zip(means, means[1:]))

    def test_exemplar_overlap_grows_with_score(self, corpus):
        _, qsets, resps = corpus
        qmap = {q.id: q for q in qsets}
        share = defaultdict(list)
        for r in resps:
            exemplar = set(content_words(qmap[r.question_set_id].exemplar_text))
            answered = set(content_words(r.transcript))
            share[r.scores.holistic].append(len(exemplar & answered) / len(exemplar))
        means = [statistics.mean(share[s]) for s in (1, 2, 3, 4, 5)]
        assert all(a < b for a, b in zip(means, means[1:]))

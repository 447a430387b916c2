"""Metric, training loop, evaluation, and ablation harness tests."""

import json
import random

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from asa.corpus import CorpusSplit, ResponseRecord, ScoreLabel
from asa.errors import ConfigError, InputError, TrainingError
from asa.model import AsaModel
from asa.traineval import (
    AblationSpec,
    EvalReport,
    TrainConfig,
    accuracy,
    binary_accuracy,
    evaluate,
    format_ablation_table,
    run_ablation,
    standard_grid,
    train,
    word_error_rate,
)

from .oracles import wer
from .test_model import SMALL, make_bundle


def toy_data(n=10, seed=5):
    """Records and bundles with labels cycling 1..5."""
    rng = __import__("numpy").random.default_rng(seed)
    records, bundles = {}, {}
    for i in range(n):
        rid = f"r{i:02d}"
        score = (i % 5) + 1
        records[rid] = ResponseRecord(
            id=rid,
            question_set_id="set-00",
            transcript="two dogs play",
            scores=ScoreLabel(holistic=score, relevance=score, language_use=score),
        )
        bundles[rid] = make_bundle(rng)
    return records, bundles


class TestMetrics:
    def test_accuracy_hand_case(self):
        assert accuracy([1, 2, 3], [1, 2, 4]) == pytest.approx(2 / 3)
        assert accuracy([5], [5]) == 1.0

    def test_accuracy_validation(self):
        with pytest.raises(InputError):
            accuracy([1], [1, 2])
        with pytest.raises(InputError):
            accuracy([], [])

    def test_binary_accuracy_threshold_at_four(self):
        # 3 vs 4 crosses the boundary, 4 vs 5 does not
        assert binary_accuracy([3, 4], [4, 4]) == 0.5
        assert binary_accuracy([4, 5, 1], [5, 4, 3]) == 1.0

    def test_binary_accuracy_rejects_out_of_scale(self):
        with pytest.raises(InputError):
            binary_accuracy([0], [3])
        with pytest.raises(InputError):
            binary_accuracy([3], [6])

    def test_wer_hand_cases(self):
        assert word_error_rate("a b c".split(), "a x c".split()) == pytest.approx(1 / 3)
        assert word_error_rate("a b c".split(), "a c".split()) == pytest.approx(1 / 3)
        assert word_error_rate(["a"], ["a", "b", "c"]) == 2.0  # above 1 is legal
        assert word_error_rate(["a"], []) == 1.0
        assert word_error_rate("same text".split(), "same text".split()) == 0.0

    def test_wer_case_sensitive(self):
        assert word_error_rate(["The"], ["the"]) == 1.0

    def test_wer_empty_reference(self):
        with pytest.raises(InputError):
            word_error_rate([], ["a"])

    def test_wer_matches_oracle_seeded(self):
        vocab = ["a", "b", "c", "d"]
        rnd = random.Random(4)
        for _ in range(200):
            ref = [rnd.choice(vocab) for _ in range(rnd.randint(1, 8))]
            hyp = [rnd.choice(vocab) for _ in range(rnd.randint(0, 8))]
            assert word_error_rate(ref, hyp) == pytest.approx(wer(ref, hyp))

    @settings(max_examples=120, deadline=None)
    @given(
        st.lists(st.sampled_from("abc"), min_size=1, max_size=8),
        st.lists(st.sampled_from("abc"), max_size=8),
    )
    def test_wer_matches_oracle_property(self, ref, hyp):
        assert word_error_rate(ref, hyp) == pytest.approx(wer(ref, hyp))


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=-1)
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=0)
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(target="fluency")


class TestTrain:
    SPLITS = CorpusSplit(
        train=tuple(f"r{i:02d}" for i in range(8)),
        dev=("r08",),
        known_test=("r09",),
        unknown_test=(),
    )

    def test_zero_epochs_returns_initialization(self):
        records, bundles = toy_data()
        model = AsaModel(SMALL)
        before = {k: v.clone() for k, v in model.state_dict().items()}
        result = train(model, self.SPLITS, bundles, records, TrainConfig(epochs=0))
        assert result.history == []
        assert result.best_epoch == -1
        for key, tensor in model.state_dict().items():
            torch.testing.assert_close(tensor, before[key], atol=0, rtol=0)

    def test_history_and_log_file(self, tmp_path):
        records, bundles = toy_data()
        model = AsaModel(SMALL)
        log = tmp_path / "train_log.jsonl"
        result = train(
            model,
            self.SPLITS,
            bundles,
            records,
            TrainConfig(epochs=3, batch_size=4, learning_rate=1e-3),
            log_path=log,
        )
        assert len(result.history) == 3
        for i, row in enumerate(result.history):
            assert row["epoch"] == i
            assert set(row) == {"epoch", "loss", "train_accuracy", "dev_accuracy"}
        logged = [json.loads(line) for line in log.read_text().splitlines()]
        assert logged == result.history

    def test_model_keeps_best_dev_state(self):
        records, bundles = toy_data()
        model = AsaModel(SMALL)
        result = train(
            model,
            self.SPLITS,
            bundles,
            records,
            TrainConfig(epochs=4, batch_size=4, learning_rate=1e-3),
        )
        assert result.best_dev_accuracy == max(
            row["dev_accuracy"] for row in result.history
        )
        assert (
            result.history[result.best_epoch]["dev_accuracy"]
            == result.best_dev_accuracy
        )
        # the loaded weights really are the winning epoch's weights
        report = evaluate(
            model, self.SPLITS.dev, bundles, records, "holistic", "dev"
        )
        assert report.accuracy == result.best_dev_accuracy

    def test_deterministic_under_seed(self):
        records, bundles = toy_data()
        cfg = TrainConfig(epochs=2, batch_size=4, learning_rate=1e-3, seed=3)
        r1 = train(AsaModel(SMALL), self.SPLITS, bundles, records, cfg)
        r2 = train(AsaModel(SMALL), self.SPLITS, bundles, records, cfg)
        assert r1.history == r2.history

    def test_unlabeled_training_set_rejected(self):
        records, bundles = toy_data(4)
        unlabeled = {
            rid: ResponseRecord(
                id=rid,
                question_set_id="set-00",
                transcript=r.transcript,
                scores=ScoreLabel(),
            )
            for rid, r in records.items()
        }
        splits = CorpusSplit(
            train=tuple(unlabeled), dev=(), known_test=(), unknown_test=()
        )
        with pytest.raises(TrainingError, match="no labeled"):
            train(AsaModel(SMALL), splits, bundles, unlabeled, TrainConfig(epochs=1))

    def test_non_finite_loss_aborts_with_location(self, monkeypatch):
        records, bundles = toy_data()

        class ExplodingLoss:
            def __call__(self, out, target):
                return torch.tensor(float("inf"), requires_grad=True)

        monkeypatch.setattr(torch.nn, "CrossEntropyLoss", ExplodingLoss)
        with pytest.raises(TrainingError, match="epoch 0 batch 0"):
            train(
                AsaModel(SMALL),
                self.SPLITS,
                bundles,
                records,
                TrainConfig(epochs=1, batch_size=4),
            )


class TestEvaluate:
    def test_report_matches_per_bundle_predictions(self):
        records, bundles = toy_data(10)
        model = AsaModel(SMALL).eval()
        ids = sorted(records)
        report = evaluate(model, ids, bundles, records, "holistic", "known_test")
        preds = [model.predict(bundles[r]).score for r in ids]
        golds = [records[r].scores.holistic for r in ids]
        assert report.n == 10
        assert report.split == "known_test"
        assert report.target == "holistic"
        assert report.accuracy == pytest.approx(accuracy(preds, golds))
        assert report.binary_accuracy == pytest.approx(binary_accuracy(preds, golds))
        expected = [[0] * 5 for _ in range(5)]
        for g, p in zip(golds, preds):
            expected[g - 1][p - 1] += 1
        assert [list(row) for row in report.confusion] == expected

    def test_confusion_total_equals_n(self):
        records, bundles = toy_data(7)
        model = AsaModel(SMALL)
        report = evaluate(model, sorted(records), bundles, records, "holistic", "dev")
        assert sum(sum(row) for row in report.confusion) == report.n == 7

    def test_empty_split_rejected(self):
        records, bundles = toy_data(3)
        with pytest.raises(InputError, match="'dev'"):
            evaluate(AsaModel(SMALL), [], bundles, records, "holistic", "dev")

    def test_missing_target_labels_skipped(self):
        records, bundles = toy_data(4)
        records["r00"] = ResponseRecord(
            id="r00",
            question_set_id="set-00",
            transcript="x",
            scores=ScoreLabel(holistic=3),  # no relevance label
        )
        report = evaluate(
            AsaModel(SMALL), sorted(records), bundles, records, "relevance", "dev"
        )
        assert report.n == 3

    def test_report_dict_round_trip(self):
        records, bundles = toy_data(5)
        report = evaluate(
            AsaModel(SMALL), sorted(records), bundles, records, "holistic", "dev"
        )
        assert EvalReport.from_dict(report.to_dict()) == report


class TestAblationGrid:
    def test_cell_names(self):
        names = [s.name for s in standard_grid()]
        assert names == [
            "baseline",
            "w/o normalized",
            "only exemplar-response",
            "only image-response",
            "er+ir",
            "w/o Grammar",
            "w/o Multifaceted",
            "w/o splitting",
        ]

    def test_each_diff_is_exactly_one_toggle(self):
        grid = {s.name: s for s in standard_grid()}
        assert grid["baseline"].diff() == {}
        assert grid["w/o normalized"].diff() == {
            "extraction": {"normalize_grammar": False}
        }
        assert grid["only exemplar-response"].diff() == {
            "model": {"enabled_streams": ("er",)}
        }
        assert grid["only image-response"].diff() == {
            "model": {"enabled_streams": ("ir",)}
        }
        assert grid["er+ir"].diff() == {"model": {"enabled_streams": ("er", "ir")}}
        assert grid["w/o Grammar"].diff() == {"model": {"zero_streams": ("grammar",)}}
        assert grid["w/o Multifaceted"].diff() == {"model": {"cross_aspect": ()}}
        assert grid["w/o splitting"].diff() == {
            "extraction": {"use_splitting": False}
        }

    def test_stream_subset_cells_score_relevance(self):
        grid = {s.name: s for s in standard_grid(target="language_use")}
        assert grid["baseline"].target == "language_use"
        assert grid["w/o Grammar"].target == "language_use"
        for name in ("only exemplar-response", "only image-response", "er+ir"):
            assert grid[name].target == "relevance"


class TestRunAblation:
    REPORT = EvalReport(
        split="dev",
        target="holistic",
        n=2,
        accuracy=0.5,
        binary_accuracy=1.0,
        confusion=tuple(tuple([0] * 5) for _ in range(5)),
    )

    def test_failures_are_isolated(self):
        grid = standard_grid()

        def run_cell(spec):
            if spec.name == "er+ir":
                raise RuntimeError("no image features")
            return {"dev": self.REPORT}

        table = run_ablation(grid, run_cell)
        assert list(table) == [s.name for s in grid]
        assert table["er+ir"]["error"] == "RuntimeError: no image features"
        assert "reports" not in table["er+ir"]
        assert table["baseline"]["reports"]["dev"]["accuracy"] == 0.5
        assert table["baseline"]["diff"] == {}

    def test_formatted_table(self):
        table = run_ablation(
            standard_grid()[:2], lambda spec: {"dev": self.REPORT}
        )
        text = format_ablation_table(table)
        assert "cell" in text and "dev acc/bin" in text
        assert "baseline" in text and "w/o normalized" in text
        assert "0.500/1.000" in text

    def test_formatted_table_shows_failures(self):
        def run_cell(spec):
            raise ValueError("boom")

        text = format_ablation_table(run_ablation(standard_grid()[:1], run_cell))
        assert "FAILED: ValueError: boom" in text

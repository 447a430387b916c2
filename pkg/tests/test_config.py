"""Configuration loading, env overrides, and backend wiring tests."""

import json

import pytest

from asa.config import (
    DEFAULT_FEW_SHOT,
    BackendsSection,
    PipelineConfig,
    build_backends,
    load_config,
)
from asa.errors import ConfigError
from asa.grammar import HttpGecBackend, RuleGecBackend
from asa.relevance import HashTextEmbeddingBackend, HttpTextEmbeddingBackend
from asa.splitting import HeuristicSplitterBackend, HttpGenerationBackend


class TestLoadConfig:
    def test_all_defaults(self):
        cfg = load_config(None, environ={})
        assert isinstance(cfg, PipelineConfig)
        assert cfg.run.seed == 0
        assert cfg.model.qr_dim == 256
        assert cfg.train.target == "holistic"
        assert cfg.backends.gec == "rules"

    def test_yaml_file_applies(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(
            "run:\n  seed: 11\n"
            "corpus:\n  manifest: data/manifest.jsonl\n"
            "model:\n  hidden_dim: 64\n  n_heads: 4\n"
            "train:\n  epochs: 9\n"
        )
        cfg = load_config(path, environ={})
        assert cfg.run.seed == 11
        assert cfg.corpus.manifest == "data/manifest.jsonl"
        assert cfg.model.hidden_dim == 64
        assert cfg.train.epochs == 9

    def test_tuple_fields_coerced(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(
            "model:\n"
            "  enabled_streams: [er, ir]\n"
            "  cross_aspect: [[delivery, content]]\n"
        )
        cfg = load_config(path, environ={})
        assert cfg.model.enabled_streams == ("er", "ir")
        assert cfg.model.cross_aspect == (("delivery", "content"),)

    def test_unknown_section_named(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("prosody:\n  x: 1\n")
        with pytest.raises(ConfigError, match="'prosody'"):
            load_config(path, environ={})

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("model:\n  hidden: 64\n")
        with pytest.raises(ConfigError, match="model.hidden"):
            load_config(path, environ={})

    def test_section_must_be_mapping(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("model: 5\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(path, environ={})

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("- a\n- b\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config(path, environ={})

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("model: {hidden_dim: [\n")
        with pytest.raises(ConfigError, match="invalid YAML"):
            load_config(path, environ={})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.yaml", environ={})

    def test_empty_file_is_defaults(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("")
        assert load_config(path, environ={}) == load_config(None, environ={})

    def test_section_validation_still_runs(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("model:\n  hidden_dim: 30\n  n_heads: 4\n")
        with pytest.raises(ConfigError, match="divisible"):
            load_config(path, environ={})


class TestEnvOverrides:
    def test_typed_override(self):
        cfg = load_config(None, environ={"ASA__run__seed": "7"})
        assert cfg.run.seed == 7

    def test_boolean_and_list_values(self):
        cfg = load_config(
            None,
            environ={
                "ASA__extraction__use_splitting": "false",
                "ASA__model__enabled_streams": "[qr, er]",
            },
        )
        assert cfg.extraction.use_splitting is False
        assert cfg.model.enabled_streams == ("qr", "er")

    def test_env_beats_file(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("run:\n  seed: 1\n")
        cfg = load_config(path, environ={"ASA__run__seed": "42"})
        assert cfg.run.seed == 42

    def test_unrelated_variables_ignored(self):
        cfg = load_config(None, environ={"PATH": "/bin", "ASA_NOT_REAL": "x"})
        assert cfg.run.seed == 0

    def test_malformed_variable_rejected(self):
        with pytest.raises(ConfigError, match="ASA__section__key"):
            load_config(None, environ={"ASA__seed": "1"})

    def test_unknown_env_section_rejected(self):
        with pytest.raises(ConfigError, match="'prosody'"):
            load_config(None, environ={"ASA__prosody__x": "1"})

    def test_unknown_env_key_rejected(self):
        with pytest.raises(ConfigError, match="run.sed"):
            load_config(None, environ={"ASA__run__sed": "1"})


class TestSeedWiring:
    def test_single_seed_reaches_every_stage(self):
        cfg = load_config(None, environ={"ASA__run__seed": "13"})
        assert cfg.extraction_config().split_seed == 13
        assert cfg.model_config().seed == 13
        assert cfg.train_config().seed == 13

    def test_extraction_config_fields(self):
        cfg = load_config(
            None,
            environ={
                "ASA__extraction__normalize_grammar": "false",
                "ASA__corpus__unknown_set_id": "set-03",
            },
        )
        ex = cfg.extraction_config()
        assert ex.normalize_grammar is False
        assert ex.unknown_set_id == "set-03"
        assert ex.use_splitting is True


class TestBuildBackends:
    def test_default_rule_doubles(self):
        backends = build_backends(BackendsSection())
        assert backends.splitter is None
        assert isinstance(backends.gec, RuleGecBackend)
        assert isinstance(backends.text, HashTextEmbeddingBackend)
        assert backends.gec.few_shot_examples == [tuple(p) for p in DEFAULT_FEW_SHOT]

    def test_heuristic_splitter(self):
        backends = build_backends(BackendsSection(splitter="heuristic"))
        assert isinstance(backends.splitter, HeuristicSplitterBackend)

    def test_http_splitter_and_gec(self):
        backends = build_backends(
            BackendsSection(
                splitter="http://split.local", gec="https://gec.local/api"
            )
        )
        assert isinstance(backends.splitter, HttpGenerationBackend)
        assert isinstance(backends.gec, HttpGecBackend)
        assert backends.gec.endpoint == "https://gec.local/api"

    def test_http_embedding(self):
        backends = build_backends(BackendsSection(embedding="http://emb.local"))
        assert isinstance(backends.text, HttpTextEmbeddingBackend)

    def test_unrecognized_values_rejected(self):
        with pytest.raises(ConfigError, match="backends.splitter"):
            build_backends(BackendsSection(splitter="whisper"))
        with pytest.raises(ConfigError, match="backends.gec"):
            build_backends(BackendsSection(gec="t5"))
        with pytest.raises(ConfigError, match="image_embedding"):
            build_backends(BackendsSection(image_embedding="clip"))
        with pytest.raises(ConfigError, match="contextual"):
            build_backends(BackendsSection(contextual="bert"))
        with pytest.raises(ConfigError, match="syntax"):
            build_backends(BackendsSection(syntax="spacy"))
        with pytest.raises(ConfigError, match="asr"):
            build_backends(BackendsSection(asr="whisperx"))

    def test_few_shot_file(self, tmp_path):
        path = tmp_path / "pairs.json"
        path.write_text(json.dumps([["he go", "he goes"], ["a a dog", "a dog"]]))
        backends = build_backends(BackendsSection(gec_few_shot=str(path)))
        assert backends.gec.few_shot_examples == [
            ("he go", "he goes"),
            ("a a dog", "a dog"),
        ]

    def test_few_shot_file_missing(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            build_backends(
                BackendsSection(gec_few_shot=str(tmp_path / "absent.json"))
            )

    def test_few_shot_file_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"not": "pairs"}')
        with pytest.raises(ConfigError, match="expected"):
            build_backends(BackendsSection(gec_few_shot=str(path)))

    def test_default_few_shot_round_trips_through_rules(self):
        gec = RuleGecBackend()
        for raw, corrected in DEFAULT_FEW_SHOT:
            assert gec.correct_text(raw) == corrected

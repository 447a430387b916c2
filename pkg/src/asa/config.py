"""Pipeline configuration: one YAML file, env-var overrides, strict keys.

Sections: run (seed), corpus (manifest, output), backends (which
implementation fills each pluggable slot), extraction, model, train.
Unknown keys anywhere are rejected by name. Environment variables of the
form ``ASA__section__key=value`` override file values; values are parsed as
YAML scalars so numbers, booleans, and lists come through typed.

The CLI treats run.seed as the single seed source: it is copied into the
split seed, the model seed, and the train seed so a whole pipeline rerun is
reproducible from one number.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .features import Backends, ExtractionConfig
from .grammar import HttpGecBackend, RuleGecBackend
from .model import ModelConfig
from .relevance import (
    HashContextualBackend,
    HashImageTextBackend,
    make_text_backend,
)
from .splitting import HeuristicSplitterBackend, HttpGenerationBackend
from .syntax import RuleSyntaxBackend
from .traineval import TrainConfig

ENV_PREFIX = "ASA__"

# transcripts paired with their corrections, prepended to service prompts
DEFAULT_FEW_SHOT: tuple[tuple[str, str], ...] = (
    ("he hold a ball in the park", "he holds a ball in the park"),
    ("she sat on bench near the tree", "she sat on the bench near the tree"),
    ("there are three flower in the garden", "there are three flowers in the garden"),
)


@dataclass(frozen=True)
class RunSection:
    seed: int = 0


@dataclass(frozen=True)
class CorpusSection:
    manifest: str = ""
    out_dir: str = "asa_out"
    unknown_set_id: str = ""  # empty: last set id in sorted order
    n_sets: int = 4
    n_per_set: int = 10


@dataclass(frozen=True)
class BackendsSection:
    splitter: str = "fallback"  # fallback | heuristic | http(s) URL
    gec: str = "rules"  # rules | http(s) URL
    gec_few_shot: str = ""  # path to a JSON list of [raw, corrected] pairs
    embedding: str = "hash"  # hash | http(s) URL | sentence encoder id
    image_embedding: str = "hash"
    contextual: str = "hash"
    syntax: str = "rules"
    asr: str = "none"  # timestamps come from the manifest


@dataclass(frozen=True)
class ExtractionSection:
    use_splitting: bool = True
    strict_splitting: bool = False
    normalize_grammar: bool = True
    grammar_capacity: int = 265
    default_word_s: float = 0.3


@dataclass(frozen=True)
class PipelineConfig:
    run: RunSection = field(default_factory=RunSection)
    corpus: CorpusSection = field(default_factory=CorpusSection)
    backends: BackendsSection = field(default_factory=BackendsSection)
    extraction: ExtractionSection = field(default_factory=ExtractionSection)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def extraction_config(self) -> ExtractionConfig:
        return ExtractionConfig(
            use_splitting=self.extraction.use_splitting,
            strict_splitting=self.extraction.strict_splitting,
            normalize_grammar=self.extraction.normalize_grammar,
            grammar_capacity=self.extraction.grammar_capacity,
            unknown_set_id=self.corpus.unknown_set_id,
            split_seed=self.run.seed,
            default_word_s=self.extraction.default_word_s,
        )

    def model_config(self) -> ModelConfig:
        return dataclasses.replace(self.model, seed=self.run.seed)

    def train_config(self) -> TrainConfig:
        return dataclasses.replace(self.train, seed=self.run.seed)


_SECTIONS = {
    "run": RunSection,
    "corpus": CorpusSection,
    "backends": BackendsSection,
    "extraction": ExtractionSection,
    "model": ModelConfig,
    "train": TrainConfig,
}

_TUPLE_OF_TUPLES = ("cross_aspect",)
_TUPLE_FIELDS = ("enabled_streams", "zero_streams")


def _build_section(name: str, cls, data: dict):
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key {name}.{key}")
    data = dict(data)
    for key in _TUPLE_OF_TUPLES:
        if key in data:
            data[key] = tuple(tuple(p) for p in data[key])
    for key in _TUPLE_FIELDS:
        if key in data:
            data[key] = tuple(data[key])
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"section {name}: {exc}") from exc


def _apply_env(data: dict, environ) -> dict:
    for var, value in sorted(environ.items()):
        if not var.startswith(ENV_PREFIX):
            continue
        parts = var[len(ENV_PREFIX) :].split("__")
        if len(parts) != 2 or not all(parts):
            raise ConfigError(
                f"environment override {var} must look like ASA__section__key"
            )
        section, key = parts
        if section not in _SECTIONS:
            raise ConfigError(f"environment override {var}: unknown section {section!r}")
        try:
            parsed = yaml.safe_load(value)
        except yaml.YAMLError as exc:
            raise ConfigError(f"environment override {var}: bad value: {exc}") from exc
        data.setdefault(section, {})[key] = parsed
    return data


def load_config(
    path: str | Path | None = None,
    environ=None,
) -> PipelineConfig:
    """Load, override, and validate the pipeline configuration.

    ``path`` may be None for an all-defaults config (env overrides still
    apply). Unknown sections or keys fail naming the offender.
    """
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path}: invalid YAML: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path}: top level must be a mapping")
        data = loaded

    data = _apply_env(data, environ if environ is not None else os.environ)

    for section in data:
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(data[section], dict):
            raise ConfigError(f"config section {section!r} must be a mapping")

    built = {
        name: _build_section(name, cls, data.get(name, {}))
        for name, cls in _SECTIONS.items()
    }
    return PipelineConfig(**built)


def _load_few_shot(path_str: str) -> list[tuple[str, str]]:
    if not path_str:
        return [tuple(p) for p in DEFAULT_FEW_SHOT]
    path = Path(path_str)
    if not path.is_file():
        raise ConfigError(f"few-shot file {path} not found")
    try:
        pairs = json.loads(path.read_text(encoding="utf-8"))
        return [(str(a), str(b)) for a, b in pairs]
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ConfigError(f"few-shot file {path}: expected [[raw, corrected], ...]: {exc}") from exc


def build_backends(section: BackendsSection) -> Backends:
    """Instantiate the configured backend for every pluggable slot."""
    if section.splitter == "fallback":
        splitter = None
    elif section.splitter == "heuristic":
        splitter = HeuristicSplitterBackend()
    elif section.splitter.startswith(("http://", "https://")):
        splitter = HttpGenerationBackend(section.splitter)
    else:
        raise ConfigError(f"backends.splitter {section.splitter!r} not recognized")

    few_shot = _load_few_shot(section.gec_few_shot)
    if section.gec == "rules":
        gec = RuleGecBackend(few_shot)
    elif section.gec.startswith(("http://", "https://")):
        gec = HttpGecBackend(section.gec, few_shot)
    else:
        raise ConfigError(f"backends.gec {section.gec!r} not recognized")

    if section.image_embedding != "hash":
        raise ConfigError("backends.image_embedding: only 'hash' ships offline")
    if section.contextual != "hash":
        raise ConfigError("backends.contextual: only 'hash' ships offline")
    if section.syntax != "rules":
        raise ConfigError("backends.syntax: only 'rules' ships offline")
    if section.asr != "none":
        raise ConfigError("backends.asr: timestamps must come from the manifest")

    return Backends(
        splitter=splitter,
        text=make_text_backend(section.embedding),
        image_text=HashImageTextBackend(),
        contextual=HashContextualBackend(),
        gec=gec,
        syntax=RuleSyntaxBackend(),
    )

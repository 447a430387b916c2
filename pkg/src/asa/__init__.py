"""Multi-aspect automated speaking assessment.

Feature extraction for content relevance, language use, and delivery from
transcribed (optionally audio-backed) responses to image-based question
sets, plus a cross-aspect attention scorer that fuses the three aspects
into a 1..5 proficiency prediction.
"""

from .corpus import CorpusSplit, QuestionSet, ResponseRecord, load_manifest, make_splits
from .errors import AsaError, RuntimeFailure, ValidationFailure
from .features import ExtractionConfig, FeatureStore, extract_corpus, rule_backends
from .model import AsaModel, FeatureBundle, ModelConfig, load_checkpoint, save_checkpoint
from .traineval import EvalReport, TrainConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AsaError",
    "AsaModel",
    "CorpusSplit",
    "EvalReport",
    "ExtractionConfig",
    "FeatureBundle",
    "FeatureStore",
    "ModelConfig",
    "QuestionSet",
    "ResponseRecord",
    "RuntimeFailure",
    "TrainConfig",
    "ValidationFailure",
    "evaluate",
    "extract_corpus",
    "load_checkpoint",
    "load_manifest",
    "make_splits",
    "rule_backends",
    "save_checkpoint",
    "train",
    "__version__",
]

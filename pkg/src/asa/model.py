"""Cross-aspect fusion scoring network.

Three sequence streams (question-response, syntax, delivery) pass through a
1-D convolution and a small self-attention transformer encoder; three fixed
streams (exemplar-response, image-response, grammar) are projected straight
into the shared hidden space. Streams group into aspects:

  content      = qr sequence + exemplar/image relevance vectors
  language_use = syntax sequence + grammar error vector
  delivery     = delivery sequence

Configured cross-aspect pairs run attention with queries from the target
aspect and keys/values from the source aspect, adding the result back as a
residual. The fused concatenation passes one more self-attention layer, a
masked mean-pool, and a residual fully connected head. GELU is used
throughout so finite-difference gradient checks converge.

Padding contract: batch collation pads sequences with all-zero frames and
marks them in key-padding masks. Because the convolution itself zero-pads,
appending masked zero frames never changes a prediction.
"""

from __future__ import annotations

import io
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import CompatibilityError, ConfigError, NumericError, ShapeError

ASPECTS = ("content", "language_use", "delivery")

# stream name -> (config dim field, aspect, is_sequence)
STREAMS = {
    "qr": ("qr_dim", "content", True),
    "er": ("er_dim", "content", False),
    "ir": ("ir_dim", "content", False),
    "syntax": ("syntax_dim", "language_use", True),
    "grammar": ("grammar_dim", "language_use", False),
    "delivery": ("delivery_dim", "delivery", True),
}

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 256
    n_heads: int = 4
    n_encoder_layers: int = 3
    conv_kernel: int = 3
    dropout: float = 0.1
    head: str = "classification"  # or "regression"
    seed: int = 0
    cross_aspect: tuple[tuple[str, str], ...] = (
        ("delivery", "content"),
        ("language_use", "content"),
    )
    enabled_streams: tuple[str, ...] = ("qr", "er", "ir", "syntax", "grammar", "delivery")
    zero_streams: tuple[str, ...] = ()
    qr_dim: int = 256
    er_dim: int = 4
    ir_dim: int = 4
    syntax_dim: int = 247
    grammar_dim: int = 265
    delivery_dim: int = 14

    def __post_init__(self):
        if self.hidden_dim % self.n_heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by n_heads {self.n_heads}"
            )
        if self.conv_kernel < 1 or self.conv_kernel % 2 == 0:
            raise ConfigError("conv_kernel must be odd so time length is preserved")
        if self.head not in ("classification", "regression"):
            raise ConfigError(f"unknown head {self.head!r}")
        for name in self.enabled_streams + self.zero_streams:
            if name not in STREAMS:
                raise ConfigError(f"unknown stream {name!r}")
        if not self.enabled_streams:
            raise ConfigError("at least one stream must be enabled")
        for src, tgt in self.cross_aspect:
            if src not in ASPECTS or tgt not in ASPECTS:
                raise ConfigError(f"cross-aspect pair ({src!r}, {tgt!r}) names unknown aspect")

    def stream_dim(self, name: str) -> int:
        return getattr(self, STREAMS[name][0])

    @property
    def enabled_aspects(self) -> tuple[str, ...]:
        present = {STREAMS[s][1] for s in self.enabled_streams}
        return tuple(a for a in ASPECTS if a in present)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cross_aspect"] = [list(p) for p in self.cross_aspect]
        d["enabled_streams"] = list(self.enabled_streams)
        d["zero_streams"] = list(self.zero_streams)
        return d

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        obj = dict(obj)
        obj["cross_aspect"] = tuple(tuple(p) for p in obj.get("cross_aspect", ()))
        obj["enabled_streams"] = tuple(obj.get("enabled_streams", ()))
        obj["zero_streams"] = tuple(obj.get("zero_streams", ()))
        return cls(**obj)


@dataclass(frozen=True)
class FeatureBundle:
    """One response's model-ready features."""

    qr_seq: np.ndarray  # M x qr_dim
    syntax_seq: np.ndarray  # L x syntax_dim
    delivery_seq: np.ndarray  # W x delivery_dim
    s_er: np.ndarray  # er_dim
    s_ir: np.ndarray  # ir_dim
    grammar: np.ndarray  # grammar_dim

    def __post_init__(self):
        for name in ("qr_seq", "syntax_seq", "delivery_seq"):
            arr = getattr(self, name)
            if arr.ndim != 2 or arr.shape[0] < 1:
                raise ShapeError(f"{name} must be a non-empty 2-D sequence")
        for name in ("s_er", "s_ir", "grammar"):
            if getattr(self, name).ndim != 1:
                raise ShapeError(f"{name} must be a 1-D vector")

    def stream(self, name: str) -> np.ndarray:
        return {
            "qr": self.qr_seq,
            "er": self.s_er,
            "ir": self.s_ir,
            "syntax": self.syntax_seq,
            "grammar": self.grammar,
            "delivery": self.delivery_seq,
        }[name]

    def save_npz(self, path: str | Path) -> None:
        np.savez(
            path,
            qr_seq=self.qr_seq.astype(np.float32),
            syntax_seq=self.syntax_seq.astype(np.float32),
            delivery_seq=self.delivery_seq.astype(np.float32),
            s_er=self.s_er.astype(np.float32),
            s_ir=self.s_ir.astype(np.float32),
            grammar=self.grammar.astype(np.float32),
        )

    @classmethod
    def load_npz(cls, path: str | Path) -> "FeatureBundle":
        with np.load(path) as z:
            return cls(
                qr_seq=z["qr_seq"],
                syntax_seq=z["syntax_seq"],
                delivery_seq=z["delivery_seq"],
                s_er=z["s_er"],
                s_ir=z["s_ir"],
                grammar=z["grammar"],
            )


@dataclass(frozen=True)
class ScorePrediction:
    score: int  # 1..5
    logits: tuple[float, ...] | None = None  # classification head only
    value: float | None = None  # regression head only

    def __post_init__(self):
        if self.score not in (1, 2, 3, 4, 5):
            raise ShapeError(f"predicted score {self.score} outside 1..5")


def collate(bundles: list[FeatureBundle], config: ModelConfig) -> dict:
    """Pad a batch into tensors plus key-padding masks (True = pad).

    Padding frames are zeros, which keeps predictions identical whether a
    sequence arrives padded or not. Dimension mismatches raise ShapeError
    naming the stream.
    """
    if not bundles:
        raise ShapeError("empty batch")
    batch: dict = {"size": len(bundles)}
    for name in STREAMS:
        dim = config.stream_dim(name)
        is_seq = STREAMS[name][2]
        arrays = [np.asarray(b.stream(name), dtype=np.float32) for b in bundles]
        for arr in arrays:
            got = arr.shape[-1]
            if got != dim:
                raise ShapeError(f"stream {name!r}: expected dim {dim}, got {got}")
        if not is_seq:
            batch[name] = torch.from_numpy(np.stack(arrays))
            continue
        t_max = max(a.shape[0] for a in arrays)
        out = np.zeros((len(arrays), t_max, dim), dtype=np.float32)
        mask = np.ones((len(arrays), t_max), dtype=bool)
        for i, a in enumerate(arrays):
            out[i, : a.shape[0]] = a
            mask[i, : a.shape[0]] = False
        batch[name] = torch.from_numpy(out)
        batch[name + "_mask"] = torch.from_numpy(mask)
    return batch


class _SequenceEncoder(nn.Module):
    """Same-padded 1-D convolution followed by transformer encoder layers."""

    def __init__(self, in_dim: int, config: ModelConfig):
        super().__init__()
        self.conv = nn.Conv1d(
            in_dim,
            config.hidden_dim,
            kernel_size=config.conv_kernel,
            padding=config.conv_kernel // 2,
        )
        self.act = nn.GELU()
        layer = nn.TransformerEncoderLayer(
            d_model=config.hidden_dim,
            nhead=config.n_heads,
            dim_feedforward=config.hidden_dim * 2,
            dropout=config.dropout,
            activation="gelu",
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=config.n_encoder_layers, enable_nested_tensor=False
        )

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None) -> torch.Tensor:
        h = self.act(self.conv(x.transpose(1, 2)).transpose(1, 2))
        if mask is not None:
            h = h.masked_fill(mask.unsqueeze(-1), 0.0)
        return self.encoder(h, src_key_padding_mask=mask)


class _ResidualHead(nn.Module):
    """Two residual fully connected blocks, then the output projection."""

    def __init__(self, hidden: int, out_dim: int, dropout: float):
        super().__init__()
        self.fc1 = nn.Linear(hidden, hidden)
        self.fc2 = nn.Linear(hidden, hidden)
        self.act = nn.GELU()
        self.drop = nn.Dropout(dropout)
        self.out = nn.Linear(hidden, out_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.drop(self.act(self.fc1(x)))
        x = x + self.drop(self.act(self.fc2(x)))
        return self.out(x)


class AsaModel(nn.Module):
    """The full scorer. Build under the config seed for bit-stable init."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        torch.manual_seed(config.seed)
        self.encoders = nn.ModuleDict()
        self.projections = nn.ModuleDict()
        for name in config.enabled_streams:
            dim, _, is_seq = (
                config.stream_dim(name),
                STREAMS[name][1],
                STREAMS[name][2],
            )
            if is_seq:
                self.encoders[name] = _SequenceEncoder(dim, config)
            else:
                self.projections[name] = nn.Linear(dim, config.hidden_dim)
        self.cross = nn.ModuleDict()
        for src, tgt in config.cross_aspect:
            key = f"{src}->{tgt}"
            if key not in self.cross:
                self.cross[key] = nn.MultiheadAttention(
                    config.hidden_dim,
                    config.n_heads,
                    dropout=config.dropout,
                    batch_first=True,
                )
        self.fusion = nn.TransformerEncoderLayer(
            d_model=config.hidden_dim,
            nhead=config.n_heads,
            dim_feedforward=config.hidden_dim * 2,
            dropout=config.dropout,
            activation="gelu",
            batch_first=True,
        )
        out_dim = 5 if config.head == "classification" else 1
        self.head = _ResidualHead(config.hidden_dim, out_dim, config.dropout)

    # -- named operations ------------------------------------------------

    def encode_sequence_stream(
        self, name: str, x: torch.Tensor, mask: torch.Tensor | None = None
    ) -> torch.Tensor:
        """T x D sequence batch -> T x hidden, time length preserved."""
        expected = self.config.stream_dim(name)
        if x.shape[-1] != expected:
            raise ShapeError(f"stream {name!r}: expected dim {expected}, got {x.shape[-1]}")
        return self.encoders[name](x, mask)

    def project_fixed_stream(self, name: str, v: torch.Tensor) -> torch.Tensor:
        expected = self.config.stream_dim(name)
        if v.shape[-1] != expected:
            raise ShapeError(f"stream {name!r}: expected dim {expected}, got {v.shape[-1]}")
        return self.projections[name](v)

    def cross_aspect_attention(
        self,
        pair: tuple[str, str],
        target: torch.Tensor,
        source: torch.Tensor,
        source_mask: torch.Tensor | None = None,
        need_weights: bool = False,
    ):
        """Queries from target, keys/values from source, residual added."""
        attn = self.cross[f"{pair[0]}->{pair[1]}"]
        out, weights = attn(
            target,
            source,
            source,
            key_padding_mask=source_mask,
            need_weights=need_weights,
        )
        return target + out, weights

    # -- forward -----------------------------------------------------------

    @staticmethod
    def _check_finite(t: torch.Tensor, stage: str) -> None:
        if not torch.isfinite(t).all():
            raise NumericError(f"non-finite activations in {stage}")

    def _aspect_states(self, batch: dict):
        """Per-aspect (sequence, mask) after encoding and projection."""
        cfg = self.config
        states: dict[str, list[torch.Tensor]] = {a: [] for a in ASPECTS}
        masks: dict[str, list[torch.Tensor]] = {a: [] for a in ASPECTS}
        size = batch["size"]
        for name in cfg.enabled_streams:
            aspect, is_seq = STREAMS[name][1], STREAMS[name][2]
            x = batch[name]
            if name in cfg.zero_streams:
                x = torch.zeros_like(x)
            if is_seq:
                mask = batch.get(name + "_mask")
                h = self.encode_sequence_stream(name, x, mask)
                self._check_finite(h, f"encoder[{name}]")
                states[aspect].append(h)
                masks[aspect].append(
                    mask
                    if mask is not None
                    else torch.zeros(h.shape[:2], dtype=torch.bool, device=h.device)
                )
            else:
                h = self.project_fixed_stream(name, x).unsqueeze(1)
                self._check_finite(h, f"projection[{name}]")
                states[aspect].append(h)
                masks[aspect].append(
                    torch.zeros((size, 1), dtype=torch.bool, device=h.device)
                )
        out = {}
        for aspect in cfg.enabled_aspects:
            out[aspect] = (
                torch.cat(states[aspect], dim=1),
                torch.cat(masks[aspect], dim=1),
            )
        return out

    def forward(self, batch: dict) -> torch.Tensor:
        """Batch -> logits (B x 5) or regression values (B x 1)."""
        cfg = self.config
        aspects = self._aspect_states(batch)
        for src, tgt in cfg.cross_aspect:
            if src not in aspects or tgt not in aspects:
                continue  # ablated aspect: pair is inert
            tgt_seq, tgt_mask = aspects[tgt]
            src_seq, src_mask = aspects[src]
            fused, _ = self.cross_aspect_attention((src, tgt), tgt_seq, src_seq, src_mask)
            self._check_finite(fused, f"cross_aspect[{src}->{tgt}]")
            aspects[tgt] = (fused, tgt_mask)
        seq = torch.cat([aspects[a][0] for a in cfg.enabled_aspects], dim=1)
        mask = torch.cat([aspects[a][1] for a in cfg.enabled_aspects], dim=1)
        fused = self.fusion(seq, src_key_padding_mask=mask)
        self._check_finite(fused, "fusion")
        keep = (~mask).unsqueeze(-1).to(fused.dtype)
        pooled = (fused * keep).sum(dim=1) / keep.sum(dim=1).clamp(min=1.0)
        out = self.head(pooled)
        self._check_finite(out, "head")
        return out

    @torch.no_grad()
    def predict(self, bundle: FeatureBundle) -> ScorePrediction:
        was_training = self.training
        self.eval()
        try:
            out = self.forward(collate([bundle], self.config))[0]
        finally:
            self.train(was_training)
        if self.config.head == "classification":
            score = int(out.argmax().item()) + 1
            return ScorePrediction(score=score, logits=tuple(float(v) for v in out))
        value = float(out.item())
        return ScorePrediction(score=int(min(max(round(value), 1), 5)), value=value)


# -- checkpoints ----------------------------------------------------------------


def save_checkpoint(
    path: str | Path,
    model: AsaModel,
    artifacts: dict | None = None,
) -> None:
    """Self-describing checkpoint: parameters, config, and fitted artifacts
    (taxonomy, syntax schema, normalizer, target kind...)."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "model_config": model.config.to_dict(),
        "state_dict": model.state_dict(),
        "artifacts": artifacts or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    torch.save(payload, buf)
    path.write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[AsaModel, dict]:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CompatibilityError(f"cannot load checkpoint {path}: {exc}") from exc
    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise CompatibilityError(
            f"checkpoint version {version!r} unsupported (expected {CHECKPOINT_VERSION})"
        )
    config = ModelConfig.from_dict(payload["model_config"])
    model = AsaModel(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("artifacts", {})

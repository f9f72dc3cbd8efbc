"""Classifier architectures and checkpoint serialization.

Four architectures share one interface:

* ``attribute_specific_lstm`` (the proposed model): one independent L-layer
  LSTM stack per normalized channel (2M stacks for minmax+perseq, M for
  single-scheme inputs); the stacks' hidden states at the last valid
  timestep are concatenated and mapped to class scores by an FC layer.
* ``joint_lstm``: a single L-layer stack over the full channel vector.
* ``gru_discretized``: per-attribute embedding tables over discretized
  inputs feeding a stacked GRU (PRI+PW by default, RF optional).
* ``stats_mlp``: an MLP over per-channel sequence minima and maxima
  (order-invariant summary features).

Dropout is applied between stacked recurrent layers and before the final FC
layer during training. Checkpoints store named float64 tensors plus the
model config, the fitted domain stats, and optional optimizer state.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data_model import NUM_ATTRIBUTES, PulseSequence
from .nn_core import (
    Adam,
    dropout,
    embedding_backward,
    embedding_forward,
    fc_backward,
    fc_forward,
    gru_backward,
    gru_forward,
    init_embedding,
    init_fc,
    init_gru_params,
    init_lstm_params,
    lstm_backward,
    lstm_forward,
    relu_backward,
    relu_forward,
    softmax,
)
from .normalize import (
    DEFAULT_BINS,
    SCHEMES,
    DomainStats,
    NormalizedBatch,
    build_batch,
    normalize_scheme,
    scheme_channel_count,
)
from .seeding import derive_rng

__all__ = [
    "ARCHITECTURES",
    "ModelConfig",
    "SequenceClassifier",
    "build",
    "forward",
    "backward",
    "predict",
    "param_count",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointData",
]

ARCHITECTURES = (
    "attribute_specific_lstm",
    "joint_lstm",
    "gru_discretized",
    "stats_mlp",
)

_CKPT_MAGIC = "emitterclf-checkpoint v1"


@dataclass(frozen=True)
class ModelConfig:
    architecture: str
    scheme: str
    num_classes: int
    num_attributes: int = NUM_ATTRIBUTES
    layers: int = 2
    hidden: int = 64
    dropout: float = 0.5
    readout: str = "last"
    bins: int = DEFAULT_BINS
    embed_dim: int = 32
    mlp_hidden: tuple[int, ...] = (64, 64)
    gru_use_rf: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mlp_hidden", tuple(self.mlp_hidden))
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.layers < 1 or self.hidden < 1 or self.num_classes < 2:
            raise ValueError("need layers >= 1, hidden >= 1, num_classes >= 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.readout not in ("last", "mean"):
            raise ValueError(f"unknown readout {self.readout!r}")
        if (self.architecture == "gru_discretized") != (self.scheme == "discretize"):
            raise ValueError(
                "the discretize scheme and the gru_discretized architecture require each other"
            )

    @property
    def channels(self) -> int:
        return scheme_channel_count(self.scheme, self.num_attributes)

    @property
    def gru_attributes(self) -> tuple[int, ...]:
        return tuple(range(3 if self.gru_use_rf else 2))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mlp_hidden"] = list(self.mlp_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["mlp_hidden"] = tuple(d.get("mlp_hidden", (64, 64)))
        return cls(**d)


@dataclass
class SequenceClassifier:
    """A built model: config plus all trainable tensors by name."""

    config: ModelConfig
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def feature_width(self) -> int:
        cfg = self.config
        if cfg.architecture == "attribute_specific_lstm":
            return cfg.channels * cfg.hidden
        if cfg.architecture in ("joint_lstm", "gru_discretized"):
            return cfg.hidden
        return cfg.mlp_hidden[-1] if cfg.mlp_hidden else 2 * cfg.channels


def build(cfg: ModelConfig, seed: int) -> SequenceClassifier:
    """Create a classifier with deterministic initialization from `seed`."""
    rng = derive_rng(seed, "init")
    params: dict[str, np.ndarray] = {}
    if cfg.architecture in ("attribute_specific_lstm", "joint_lstm"):
        stacks = cfg.channels if cfg.architecture == "attribute_specific_lstm" else 1
        din = 1 if cfg.architecture == "attribute_specific_lstm" else cfg.channels
        for layer in range(cfg.layers):
            w, u, b = init_lstm_params(stacks, din if layer == 0 else cfg.hidden, cfg.hidden, rng)
            params[f"lstm{layer}.W"] = w
            params[f"lstm{layer}.U"] = u
            params[f"lstm{layer}.b"] = b
        fc_in = stacks * cfg.hidden
    elif cfg.architecture == "gru_discretized":
        for j in cfg.gru_attributes:
            params[f"emb{j}"] = init_embedding(cfg.bins, cfg.embed_dim, rng)
        din = len(cfg.gru_attributes) * cfg.embed_dim
        for layer in range(cfg.layers):
            w, u_ru, u_n, b = init_gru_params(1, din if layer == 0 else cfg.hidden, cfg.hidden, rng)
            params[f"gru{layer}.W"] = w
            params[f"gru{layer}.U_ru"] = u_ru
            params[f"gru{layer}.U_n"] = u_n
            params[f"gru{layer}.b"] = b
        fc_in = cfg.hidden
    elif cfg.architecture == "stats_mlp":
        sizes = (2 * cfg.channels,) + cfg.mlp_hidden
        for i in range(len(cfg.mlp_hidden)):
            w, b = init_fc(sizes[i], sizes[i + 1], rng)
            params[f"mlp{i}.W"] = w
            params[f"mlp{i}.b"] = b + 0.01  # keep rectifier units off the dead-zero corner
        fc_in = sizes[-1]
    else:  # pragma: no cover - guarded by ModelConfig
        raise ValueError(cfg.architecture)
    w, b = init_fc(fc_in, cfg.num_classes, rng)
    params["fc.W"] = w
    params["fc.b"] = b
    return SequenceClassifier(config=cfg, params=params)


def _grouped_input(cfg: ModelConfig, channels: np.ndarray) -> np.ndarray:
    x = channels.astype(np.float64, copy=False)
    if cfg.architecture == "attribute_specific_lstm":
        # (B, T, K) -> (T, K, B, 1): one single-channel stream per stack
        return np.ascontiguousarray(x.transpose(1, 2, 0))[..., None]
    # (B, T, K) -> (T, 1, B, K)
    return np.ascontiguousarray(x.transpose(1, 0, 2))[:, None]


def _sort_by_length(batch: NormalizedBatch):
    """Recurrent kernels want rows ordered by non-increasing valid length.

    Returns (channels, lengths, kernel_lengths, order, inverse); callers see
    original row order, the permutation stays internal.
    """
    order = np.argsort(-batch.lengths, kind="stable")
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    lengths = batch.lengths[order]
    kernel_lengths = None if lengths[-1] == batch.channels.shape[1] else lengths
    return batch.channels[order], lengths, kernel_lengths, order, inv


def _length_mask(lengths, t_max):
    return (np.arange(t_max)[:, None] < lengths[None, :]).astype(np.float64)


def _readout(cfg, h_seq, lengths):
    """(T, S, B, H) -> (B, S*H) features.

    With the carried state, h at the final index already equals h at each
    sequence's last valid step, so the `last` readout takes t = T-1.
    """
    if cfg.readout == "last":
        feats = h_seq[-1]
    else:
        t_max = h_seq.shape[0]
        mask = _length_mask(lengths, t_max)  # (T, B)
        feats = (h_seq * mask[:, None, :, None]).sum(axis=0) / lengths[None, :, None]
    s, b, h = feats.shape
    return np.ascontiguousarray(feats.transpose(1, 0, 2)).reshape(b, s * h)


def _readout_backward(cfg, dfeats, shape, lengths):
    b, f = dfeats.shape
    t, s, _, h = shape
    dgrouped = np.ascontiguousarray(dfeats.reshape(b, s, h).transpose(1, 0, 2))
    dh_seq = np.zeros(shape)
    if cfg.readout == "last":
        dh_seq[-1] = dgrouped
    else:
        mask = _length_mask(lengths, t)
        dh_seq += dgrouped[None] * (mask[:, None, :, None] / lengths[None, None, :, None])
    return dh_seq


def forward(
    model: SequenceClassifier,
    batch: NormalizedBatch,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, dict]:
    """Compute pre-softmax logits for a padded batch.

    Returns (logits, cache); the cache feeds `backward` during training and
    can be discarded at inference.
    """
    cfg = model.config
    p = model.params
    cache: dict = {}
    if cfg.architecture in ("attribute_specific_lstm", "joint_lstm"):
        if batch.channels.shape[2] != cfg.channels:
            raise ValueError(
                f"batch has {batch.channels.shape[2]} channels, model expects {cfg.channels}"
            )
        channels, lengths, kernel_lengths, order, inv = _sort_by_length(batch)
        x = _grouped_input(cfg, channels)
        layer_caches = []
        drop_masks = []
        h = x
        for layer in range(cfg.layers):
            h, lc = lstm_forward(
                p[f"lstm{layer}.W"], p[f"lstm{layer}.U"], p[f"lstm{layer}.b"], h, kernel_lengths
            )
            layer_caches.append(lc)
            if layer < cfg.layers - 1:
                h, dm = dropout(h, cfg.dropout, training, rng)
                drop_masks.append(dm)
        feats = _readout(cfg, h, lengths)[inv]
        cache.update(
            layer_caches=layer_caches,
            drop_masks=drop_masks,
            h_shape=h.shape,
            lengths=lengths,
            order=order,
        )
    elif cfg.architecture == "gru_discretized":
        if batch.channels.dtype.kind not in "iu":
            raise ValueError("gru_discretized expects integer (discretized) channels")
        channels, lengths, kernel_lengths, order, inv = _sort_by_length(batch)
        embedded = [embedding_forward(p[f"emb{j}"], channels[:, :, j]) for j in cfg.gru_attributes]
        # (B, T, A*E) -> (T, 1, B, A*E)
        x = np.ascontiguousarray(np.concatenate(embedded, axis=2).transpose(1, 0, 2))[:, None]
        layer_caches = []
        drop_masks = []
        h = x
        for layer in range(cfg.layers):
            h, lc = gru_forward(
                p[f"gru{layer}.W"],
                p[f"gru{layer}.U_ru"],
                p[f"gru{layer}.U_n"],
                p[f"gru{layer}.b"],
                h,
                kernel_lengths,
            )
            layer_caches.append(lc)
            if layer < cfg.layers - 1:
                h, dm = dropout(h, cfg.dropout, training, rng)
                drop_masks.append(dm)
        feats = _readout(cfg, h, lengths)[inv]
        cache.update(
            layer_caches=layer_caches,
            drop_masks=drop_masks,
            h_shape=h.shape,
            lengths=lengths,
            order=order,
            ids=channels,
        )
    elif cfg.architecture == "stats_mlp":
        x = batch.channels.astype(np.float64, copy=False)
        if np.all(batch.lengths == batch.channels.shape[1]):
            mins = x.min(axis=1)
            maxs = x.max(axis=1)
        else:
            m3 = batch.mask()[:, :, None].astype(bool)
            mins = np.where(m3, x, np.inf).min(axis=1)
            maxs = np.where(m3, x, -np.inf).max(axis=1)
        feats = np.concatenate([mins, maxs], axis=1)
        acts = []
        pre = []
        h = feats
        for i in range(len(cfg.mlp_hidden)):
            z = fc_forward(h, p[f"mlp{i}.W"], p[f"mlp{i}.b"])
            pre.append(z)
            acts.append(h)
            h = relu_forward(z)
        feats = h
        cache.update(mlp_pre=pre, mlp_acts=acts)
    else:  # pragma: no cover
        raise ValueError(cfg.architecture)

    feats_d, fc_drop = dropout(feats, cfg.dropout, training, rng)
    logits = fc_forward(feats_d, p["fc.W"], p["fc.b"])
    cache.update(feats_d=feats_d, fc_drop=fc_drop)
    return logits, cache


def backward(model: SequenceClassifier, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the loss w.r.t. every model parameter."""
    cfg = model.config
    p = model.params
    grads: dict[str, np.ndarray] = {}
    dW, db, dfeats = fc_backward(cache["feats_d"], p["fc.W"], dlogits)
    grads["fc.W"] = dW
    grads["fc.b"] = db
    if cache["fc_drop"] is not None:
        dfeats = dfeats * cache["fc_drop"]

    if cfg.architecture in ("attribute_specific_lstm", "joint_lstm"):
        dfeats = dfeats[cache["order"]]
        dh_seq = _readout_backward(cfg, dfeats, cache["h_shape"], cache["lengths"])
        for layer in range(cfg.layers - 1, -1, -1):
            dw, du, dbias, dx = lstm_backward(
                p[f"lstm{layer}.W"],
                p[f"lstm{layer}.U"],
                p[f"lstm{layer}.b"],
                cache["layer_caches"][layer],
                dh_seq,
            )
            grads[f"lstm{layer}.W"] = dw
            grads[f"lstm{layer}.U"] = du
            grads[f"lstm{layer}.b"] = dbias
            if layer > 0:
                dm = cache["drop_masks"][layer - 1]
                dh_seq = dx * dm if dm is not None else dx
    elif cfg.architecture == "gru_discretized":
        dfeats = dfeats[cache["order"]]
        dh_seq = _readout_backward(cfg, dfeats, cache["h_shape"], cache["lengths"])
        for layer in range(cfg.layers - 1, -1, -1):
            dw, du_ru, du_n, dbias, dx = gru_backward(
                p[f"gru{layer}.W"],
                p[f"gru{layer}.U_ru"],
                p[f"gru{layer}.U_n"],
                p[f"gru{layer}.b"],
                cache["layer_caches"][layer],
                dh_seq,
            )
            grads[f"gru{layer}.W"] = dw
            grads[f"gru{layer}.U_ru"] = du_ru
            grads[f"gru{layer}.U_n"] = du_n
            grads[f"gru{layer}.b"] = dbias
            if layer > 0:
                dm = cache["drop_masks"][layer - 1]
                dh_seq = dx * dm if dm is not None else dx
        dx0 = dx[:, 0].transpose(1, 0, 2)  # (T, 1, B, A*E) -> (B, T, A*E)
        e = cfg.embed_dim
        ids = cache["ids"]
        for slot, j in enumerate(cfg.gru_attributes):
            grads[f"emb{j}"] = embedding_backward(
                p[f"emb{j}"], ids[:, :, j], dx0[:, :, slot * e : (slot + 1) * e]
            )
    elif cfg.architecture == "stats_mlp":
        dh = dfeats
        for i in range(len(cfg.mlp_hidden) - 1, -1, -1):
            dz = relu_backward(cache["mlp_pre"][i], dh)
            dw, dbias, dh = fc_backward(cache["mlp_acts"][i], p[f"mlp{i}.W"], dz)
            grads[f"mlp{i}.W"] = dw
            grads[f"mlp{i}.b"] = dbias
    else:  # pragma: no cover
        raise ValueError(cfg.architecture)
    return grads


def predict(
    model: SequenceClassifier, seq: PulseSequence, stats: DomainStats | None
) -> tuple[int, np.ndarray]:
    """Normalize with the model's stored scheme, run inference, softmax.

    Argmax ties break toward the lowest class index.
    """
    ns = normalize_scheme(seq, stats, model.config.scheme, model.config.bins)
    logits, _ = forward(model, build_batch([ns]), training=False)
    probs = softmax(logits[0])
    return int(np.argmax(probs)), probs


def param_count(model: SequenceClassifier) -> int:
    return sum(v.size for v in model.params.values())


@dataclass
class CheckpointData:
    model: SequenceClassifier
    stats: DomainStats | None
    meta: dict
    adam_t: int | None
    opt_tensors: dict[str, np.ndarray] | None


def save_checkpoint(
    path,
    model: SequenceClassifier,
    stats: DomainStats | None,
    meta: dict | None = None,
    optimizer: Adam | None = None,
) -> None:
    """Versioned checkpoint: JSON header + named little-endian float64 tensors."""
    tensors = dict(model.params)
    if optimizer is not None:
        tensors.update(optimizer.state_tensors())
    names = sorted(tensors)
    header = {
        "config": model.config.to_dict(),
        "stats": stats.to_dict() if stats is not None else None,
        "meta": meta or {},
        "adam_t": optimizer.t if optimizer is not None else None,
        "tensors": [{"name": n, "shape": list(tensors[n].shape)} for n in names],
    }
    payload = b"".join(np.ascontiguousarray(tensors[n], dtype="<f8").tobytes() for n in names)
    with open(path, "wb") as fh:
        fh.write((_CKPT_MAGIC + "\n").encode("utf-8"))
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(f"data {len(payload)}\n".encode("utf-8"))
        fh.write(payload)


def load_checkpoint(path) -> CheckpointData:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("utf-8").rstrip("\n")
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path}: not an emitterclf checkpoint (header {magic!r})")
        header = json.loads(fh.readline().decode("utf-8"))
        data_line = fh.readline().decode("utf-8").split()
        if len(data_line) != 2 or data_line[0] != "data":
            raise ValueError(f"{path}: malformed data length line")
        payload = fh.read(int(data_line[1]))
    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f8", count=size, offset=offset)
        tensors[entry["name"]] = arr.reshape(shape).astype(np.float64)
        offset += size * 8
    cfg = ModelConfig.from_dict(header["config"])
    params = {n: t for n, t in tensors.items() if not n.startswith("adam.")}
    opt_tensors = {n: t for n, t in tensors.items() if n.startswith("adam.")}
    stats = DomainStats.from_dict(header["stats"]) if header["stats"] is not None else None
    return CheckpointData(
        model=SequenceClassifier(config=cfg, params=params),
        stats=stats,
        meta=header.get("meta", {}),
        adam_t=header.get("adam_t"),
        opt_tensors=opt_tensors or None,
    )

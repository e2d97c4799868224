"""Generator / discriminator definitions, padded batches and forward/backward."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import KindMismatch, ShapeMismatch
from . import layers as L


@dataclass(frozen=True)
class ConvLayerSpec:
    in_channels: int
    out_channels: int
    stride: tuple = (1, 1)
    activation: str = "relu"
    kernel: tuple = (5, 5)

    def __post_init__(self):
        if tuple(self.kernel) != (5, 5):
            raise ValueError("kernels are fixed at 5x5")
        if any(s not in (1, 2) for s in self.stride):
            raise ValueError("stride must be 1 or 2 per axis")
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")


G_LAYERS = (
    ConvLayerSpec(1, 8, (1, 1), "relu"),
    ConvLayerSpec(8, 8, (1, 1), "relu"),
    ConvLayerSpec(8, 1, (1, 1), "linear"),
)
D_LAYERS = (
    ConvLayerSpec(1, 8, (2, 2), "relu"),
    ConvLayerSpec(8, 16, (2, 2), "relu"),
    ConvLayerSpec(16, 32, (2, 2), "relu"),
    ConvLayerSpec(32, 64, (2, 2), "relu"),
)


@dataclass
class GanHyper:
    lr: float = 0.00006
    batch: int = 32
    epochs: int = 25
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_std: float = 0.02
    l1_weight: float = 0.0
    g_init: str = "identity"


def flat_dim(n_features: int, d_layers: Sequence[ConvLayerSpec] = D_LAYERS) -> int:
    h = n_features
    for spec in d_layers:
        h = L.out_size(h, spec.stride[0])
    return d_layers[-1].out_channels * h


@dataclass
class PaddedBatch:
    """Zero-padded stack of D x T items, ``tensors`` shaped (N, D, T_max)."""

    tensors: np.ndarray
    true_lengths: np.ndarray

    def __post_init__(self):
        self.tensors = np.asarray(self.tensors, dtype=np.float64)
        self.true_lengths = np.asarray(self.true_lengths, dtype=np.int64)
        if self.tensors.ndim != 3 or self.tensors.shape[0] != self.true_lengths.size:
            raise ShapeMismatch(f"bad batch shape {self.tensors.shape}")

    @property
    def mask(self) -> np.ndarray:
        return (np.arange(self.tensors.shape[2])[None, :] < self.true_lengths[:, None])

    @classmethod
    def from_sequences(cls, seqs: Sequence[np.ndarray], t_max: Optional[int] = None) -> "PaddedBatch":
        if not seqs:
            raise ShapeMismatch("empty batch")
        dims = {s.shape[0] for s in seqs}
        if len(dims) != 1:
            raise ShapeMismatch(f"items have different feature dims {sorted(dims)}")
        lengths = np.array([s.shape[1] for s in seqs])
        t_max = int(lengths.max()) if t_max is None else int(t_max)
        out = np.zeros((len(seqs), dims.pop(), t_max))
        for i, s in enumerate(seqs):
            out[i, :, :s.shape[1]] = s
        return cls(out, lengths)

    def items(self) -> List[np.ndarray]:
        return [self.tensors[i, :, :n].copy() for i, n in enumerate(self.true_lengths)]


@dataclass
class DcganModel:
    kind: str
    n_features: int
    g_params: Dict[str, np.ndarray]
    d_params: Dict[str, np.ndarray]
    hyper: GanHyper = field(default_factory=GanHyper)
    seed: int = 0
    norm: Optional[Dict[str, np.ndarray]] = None
    g_layers: tuple = G_LAYERS
    d_layers: tuple = D_LAYERS
    adam_state: Optional[dict] = None


def init_model(kind: str, n_features: int, hyper: GanHyper, rng: np.random.Generator) -> DcganModel:
    std = hyper.init_std
    g, d = {}, {}
    for i, spec in enumerate(G_LAYERS):
        g[f"w{i}"] = rng.normal(0.0, std, (spec.out_channels, spec.in_channels, 5, 5))
        g[f"b{i}"] = np.zeros(spec.out_channels)
    for i, spec in enumerate(D_LAYERS):
        d[f"w{i}"] = rng.normal(0.0, std, (spec.out_channels, spec.in_channels, 5, 5))
        d[f"b{i}"] = np.zeros(spec.out_channels)
    d["fc_w"] = rng.normal(0.0, std, flat_dim(n_features))
    d["fc_b"] = np.zeros(())
    if hyper.g_init == "identity":
        make_identity_generator(g)
    elif hyper.g_init != "normal":
        raise ValueError(f"unknown generator init {hyper.g_init!r}")
    return DcganModel(kind, n_features, g, d, hyper)


def make_identity_generator(g: Dict[str, np.ndarray]) -> None:
    """Route the input through channels 0/1 as relu(x) and relu(-x), recombined at the output.

    Weights that touch the passthrough channels are overwritten; the remaining
    channels keep whatever values they had.
    """
    c = 2
    w0, w1, w2 = g["w0"], g["w1"], g["w2"]
    w0[0:2] = 0.0
    w0[0, 0, c, c] = 1.0
    w0[1, 0, c, c] = -1.0
    g["b0"][0:2] = 0.0
    w1[0:2] = 0.0
    w1[:, 0:2] = 0.0
    w1[0, 0, c, c] = 1.0
    w1[1, 1, c, c] = 1.0
    g["b1"][0:2] = 0.0
    w2[:, 0:2] = 0.0
    w2[0, 0, c, c] = 1.0
    w2[0, 1, c, c] = -1.0
    g["b2"][:] = 0.0


def check_kind(model: DcganModel, kind: str) -> None:
    if kind != model.kind:
        raise KindMismatch(f"model was trained on {model.kind}, got {kind}")


# ---------------------------------------------------------------------------
# generator


def generator_forward(model: DcganModel, batch: PaddedBatch, keep_cache: bool = False):
    x = batch.tensors
    if x.shape[1] != model.n_features:
        raise ShapeMismatch(f"generator expects {model.n_features} features, got {x.shape[1]}")
    m = L.time_mask(batch.true_lengths, x.shape[2])
    h = x[:, None, :, :] * m
    caches = []
    for i, spec in enumerate(model.g_layers):
        z, cache = L.conv2d_forward(h, model.g_params[f"w{i}"], model.g_params[f"b{i}"], spec.stride)
        a = L.relu_forward(z) if spec.activation == "relu" else z
        a = a * m
        caches.append((cache, z))
        h = a
    out = PaddedBatch(h[:, 0], batch.true_lengths.copy())
    if keep_cache:
        return out, (caches, m)
    return out


def generator_backward(model: DcganModel, gout: np.ndarray, cache, need_input_grad: bool = True):
    """``gout`` is (N, D, T).  Returns (grad wrt input tensors or None, param grads)."""
    caches, m = cache
    grads = {}
    g = gout[:, None, :, :] * m
    for i in reversed(range(len(model.g_layers))):
        spec = model.g_layers[i]
        conv_cache, z = caches[i]
        if spec.activation == "relu":
            g = L.relu_backward(g, z)
        gx, gw, gb = L.conv2d_backward(g, conv_cache, need_input_grad=need_input_grad or i > 0)
        grads[f"w{i}"], grads[f"b{i}"] = gw, gb
        g = gx * m if gx is not None else None
    return (g[:, 0] if g is not None else None), grads


# ---------------------------------------------------------------------------
# discriminator


def discriminator_logits(model: DcganModel, batch: PaddedBatch, keep_cache: bool = False):
    x = batch.tensors
    if x.shape[1] != model.n_features:
        raise ShapeMismatch(f"discriminator expects {model.n_features} features, got {x.shape[1]}")
    lengths = batch.true_lengths
    m = L.time_mask(lengths, x.shape[2])
    h = x[:, None, :, :] * m
    caches = []
    for i, spec in enumerate(model.d_layers):
        z, cache = L.conv2d_forward(h, model.d_params[f"w{i}"], model.d_params[f"b{i}"], spec.stride)
        lengths = -(-lengths // spec.stride[1])
        mi = L.time_mask(lengths, z.shape[3])
        a = L.relu_forward(z) * mi
        caches.append((cache, z, mi))
        h = a
    pooled = L.masked_mean_forward(h, lengths)
    flat = pooled.reshape(pooled.shape[0], -1)
    logits = L.dense_forward(flat, model.d_params["fc_w"], model.d_params["fc_b"])
    if keep_cache:
        return logits, (caches, lengths, h.shape, flat, m)
    return logits


def discriminator_forward(model: DcganModel, batch: PaddedBatch) -> np.ndarray:
    """Per-item probability that the item is a real (target-group) sequence."""
    return L.sigmoid(discriminator_logits(model, batch))


def discriminator_backward(model: DcganModel, glogits: np.ndarray, cache, need_input_grad: bool = False):
    caches, lengths, hshape, flat, m = cache
    grads = {}
    gflat, grads["fc_w"], gb = L.dense_backward(glogits, flat, model.d_params["fc_w"])
    grads["fc_b"] = np.asarray(gb)
    g = L.masked_mean_backward(gflat.reshape(hshape[:3]), lengths, hshape[3])
    for i in reversed(range(len(model.d_layers))):
        conv_cache, z, mi = caches[i]
        g = L.relu_backward(g * mi, z)
        want = need_input_grad or i > 0
        gx, gw, gbias = L.conv2d_backward(g, conv_cache, need_input_grad=want)
        grads[f"w{i}"], grads[f"b{i}"] = gw, gbias
        g = gx
    gin = (g * m)[:, 0] if need_input_grad else None
    return gin, grads

"""Numpy layers with explicit backward passes.

Tensors are laid out ``(batch, channels, features, time)``.  Convolutions use
5x5 kernels with a fixed leading pad of 2 on both axes, so output index ``o``
always reads inputs ``o*s - 2 .. o*s + 2`` regardless of the padded length;
this is what keeps masked items independent of how much padding follows them.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch

KERNEL = 5
LEAD_PAD = (KERNEL - 1) // 2


def out_size(n: int, stride: int) -> int:
    return -(-n // stride)


def _pad(x: np.ndarray, stride: tuple) -> np.ndarray:
    _, _, h, w = x.shape
    pads = []
    for n, s in zip((h, w), stride):
        total = (out_size(n, s) - 1) * s + KERNEL
        pads.append((LEAD_PAD, total - n - LEAD_PAD))
    return np.pad(x, ((0, 0), (0, 0), pads[0], pads[1]))


def _tap(xp: np.ndarray, i: int, j: int, stride: tuple, oh: int, ow: int) -> np.ndarray:
    sh, sw = stride
    return xp[:, :, i:i + sh * (oh - 1) + 1:sh, j:j + sw * (ow - 1) + 1:sw]


def conv2d_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride=(1, 1)):
    """Cross-correlation plus bias.  Returns ``(out, cache)``."""
    if x.ndim != 4 or weight.ndim != 4 or weight.shape[1] != x.shape[1] \
            or weight.shape[2:] != (KERNEL, KERNEL) or bias.shape != (weight.shape[0],):
        raise ShapeMismatch(f"conv2d: input {x.shape}, weight {weight.shape}, bias {bias.shape}")
    n, _, h, w = x.shape
    oh, ow = out_size(h, stride[0]), out_size(w, stride[1])
    xp = _pad(x, stride)
    acc = np.zeros((weight.shape[0], n, oh, ow))
    for i in range(KERNEL):
        for j in range(KERNEL):
            acc += np.tensordot(weight[:, :, i, j], _tap(xp, i, j, stride, oh, ow), axes=(1, 1))
    out = acc.transpose(1, 0, 2, 3) + bias[None, :, None, None]
    return out, (xp, x.shape, weight, stride)


def conv2d_backward(gout: np.ndarray, cache, need_input_grad: bool = True):
    """Gradients ``(gx, gweight, gbias)`` for :func:`conv2d_forward`."""
    xp, xshape, weight, stride = cache
    n, c, h, w = xshape
    oh, ow = gout.shape[2:]
    gb = gout.sum(axis=(0, 2, 3))
    gw = np.empty_like(weight)
    gxp = np.zeros_like(xp) if need_input_grad else None
    sh, sw = stride
    for i in range(KERNEL):
        for j in range(KERNEL):
            gw[:, :, i, j] = np.tensordot(gout, _tap(xp, i, j, stride, oh, ow), axes=([0, 2, 3], [0, 2, 3]))
            if need_input_grad:
                contrib = np.tensordot(weight[:, :, i, j], gout, axes=(0, 1))
                gxp[:, :, i:i + sh * (oh - 1) + 1:sh, j:j + sw * (ow - 1) + 1:sw] += contrib.transpose(1, 0, 2, 3)
    gx = gxp[:, :, LEAD_PAD:LEAD_PAD + h, LEAD_PAD:LEAD_PAD + w] if need_input_grad else None
    return gx, gw, gb


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(gout, x):
    return gout * (x > 0)


def time_mask(lengths, t_max: int) -> np.ndarray:
    """``(batch, 1, 1, t_max)`` float mask, 1 on valid frames."""
    lengths = np.asarray(lengths)
    return (np.arange(t_max)[None, :] < lengths[:, None]).astype(np.float64)[:, None, None, :]


def masked_mean_forward(x: np.ndarray, lengths) -> np.ndarray:
    """Average over the time axis counting only valid frames: ``(N, C, H)``."""
    lengths = np.asarray(lengths, dtype=np.float64)
    m = time_mask(lengths, x.shape[3])
    return (x * m).sum(axis=3) / lengths[:, None, None]


def masked_mean_backward(gout: np.ndarray, lengths, t_max: int) -> np.ndarray:
    lengths = np.asarray(lengths, dtype=np.float64)
    m = time_mask(lengths, t_max)
    return gout[:, :, :, None] * m / lengths[:, None, None, None]


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or weight.ndim != 1 or x.shape[1] != weight.shape[0]:
        raise ShapeMismatch(f"dense: input {x.shape}, weight {weight.shape}")
    return x @ weight + bias


def dense_backward(gout: np.ndarray, x: np.ndarray, weight: np.ndarray):
    return np.outer(gout, weight), x.T @ gout, np.sum(gout)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(z: np.ndarray, target: float):
    """Mean binary cross-entropy of sigmoid(z) against a constant label, and dL/dz."""
    z = np.asarray(z, dtype=np.float64)
    # softplus(-z) for label 1, softplus(z) for label 0
    loss = np.logaddexp(0.0, -z) * target + np.logaddexp(0.0, z) * (1.0 - target)
    grad = (sigmoid(z) - target) / z.size
    return float(loss.mean()), grad

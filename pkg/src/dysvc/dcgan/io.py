"""Binary model container and loss-log CSV.

Layout: ``<4sHB`` (magic ``DGAN``, version, kind code), a u32 length, a
sorted-key JSON header describing every array, then the arrays as
little-endian float64 in header order.  Sorted keys and a fixed array order
make the bytes a pure function of the model.
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import ContainerFormatError, KindMismatch
from .model import ConvLayerSpec, DcganModel, GanHyper

MAGIC = b"DGAN"
VERSION = 1
KIND_CODES = {"raw": 0, "mcep": 1, "bap": 2}
_HEAD = struct.Struct("<4sHB")


def _arrays(model: DcganModel):
    out = [("g." + k, v) for k, v in sorted(model.g_params.items())]
    out += [("d." + k, v) for k, v in sorted(model.d_params.items())]
    if model.norm is not None:
        out += [("norm." + k, v) for k, v in sorted(model.norm.items())]
    return out


def to_bytes(model: DcganModel) -> bytes:
    if model.kind not in KIND_CODES:
        raise KindMismatch(f"unknown feature kind {model.kind!r}")
    arrays = _arrays(model)
    meta = {
        "kind": model.kind,
        "n_features": model.n_features,
        "seed": model.seed,
        "hyper": asdict(model.hyper),
        "g_layers": [asdict(s) for s in model.g_layers],
        "d_layers": [asdict(s) for s in model.d_layers],
        "arrays": [[name, list(np.shape(a))] for name, a in arrays],
    }
    header = json.dumps(meta, sort_keys=True).encode()
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return _HEAD.pack(MAGIC, VERSION, KIND_CODES[model.kind]) + struct.pack("<I", len(header)) + header + blob


def from_bytes(data: bytes) -> DcganModel:
    if len(data) < _HEAD.size + 4:
        raise ContainerFormatError("truncated model file")
    magic, version, code = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise ContainerFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerFormatError(f"unsupported model version {version}")
    (hlen,) = struct.unpack_from("<I", data, _HEAD.size)
    pos = _HEAD.size + 4
    try:
        meta = json.loads(data[pos:pos + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerFormatError(f"corrupt model header: {exc}") from None
    if KIND_CODES.get(meta["kind"]) != code:
        raise ContainerFormatError("kind code disagrees with header")
    pos += hlen
    groups = {"g": {}, "d": {}, "norm": {}}
    for name, shape in meta["arrays"]:
        n = int(np.prod(shape)) if shape else 1
        end = pos + 8 * n
        if end > len(data):
            raise ContainerFormatError("truncated model weights")
        arr = np.frombuffer(data[pos:end], dtype="<f8").astype(np.float64).reshape(shape)
        group, key = name.split(".", 1)
        groups[group][key] = arr
        pos = end
    if pos != len(data):
        raise ContainerFormatError("trailing bytes after model weights")
    hyper = GanHyper(**meta["hyper"])
    spec = lambda d: ConvLayerSpec(d["in_channels"], d["out_channels"], tuple(d["stride"]),
                                   d["activation"], tuple(d["kernel"]))
    return DcganModel(
        kind=meta["kind"], n_features=meta["n_features"],
        g_params=groups["g"], d_params=groups["d"], hyper=hyper, seed=meta["seed"],
        norm=groups["norm"] or None,
        g_layers=tuple(spec(s) for s in meta["g_layers"]),
        d_layers=tuple(spec(s) for s in meta["d_layers"]),
    )


def save_model(model: DcganModel, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load_model(path) -> DcganModel:
    return from_bytes(Path(path).read_bytes())


def write_loss_log(loss_log, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "d_loss", "g_loss"])
        for epoch, d, g in loss_log:
            w.writerow([epoch, repr(float(d)), repr(float(g))])


def read_loss_log(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [(int(e), float(d), float(g)) for e, d, g in rows[1:]]

"""Binary weight checkpoints.

Layout (all integers little-endian):

    magic          4 bytes  b"SPPI"
    version        u32      currently 1
    kind length    u16      + that many UTF-8 bytes ("fc" / "recurrent")
    epoch          u32      training epoch the weights belong to
    config length  u32      + that many UTF-8 bytes of JSON (training config
                            and model geometry)
    tensor count   u32
    per tensor:    name length u16 + UTF-8 name, ndim u8, ndim x u32 dims,
                   float64 little-endian row-major values
    checksum       u32      CRC-32 of every preceding byte

The config JSON carries the builder arguments, so loading a checkpoint can
rebuild an identical graph and then fill in the tensors by name.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptFile, IoFailure, ModelKindMismatch, VersionMismatch

MAGIC = b"SPPI"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """A named-tensor snapshot of a model plus enough context to rebuild it."""

    kind: str
    epoch: int
    config: dict
    tensors: dict[str, np.ndarray]
    version: int = FORMAT_VERSION

    def model_config(self) -> dict:
        return dict(self.config.get("model", {}))


def checkpoint_from_model(model, epoch: int, training_config: dict | None = None) -> Checkpoint:
    """Snapshot a model's parameters, batch-norm statistics and geometry."""
    tensors = {name: p.value.copy() for name, p in model.parameters().items()}
    tensors.update({name: np.asarray(v, dtype=np.float64).copy() for name, v in model.state_arrays().items()})
    config = {"model": dict(model.build_config)}
    if training_config:
        config["training"] = dict(training_config)
    return Checkpoint(kind=model.kind, epoch=epoch, config=config, tensors=tensors)


def restore_model(checkpoint: Checkpoint):
    """Rebuild the graph the checkpoint was taken from and load its tensors."""
    from .models import build_model  # deferred: models does not import this module

    model_config = checkpoint.model_config()
    model_config.pop("kind", None)
    model = build_model(checkpoint.kind, **model_config)
    load_into_model(model, checkpoint)
    return model


def load_into_model(model, checkpoint: Checkpoint) -> None:
    """Copy checkpoint tensors into an already-built model, by name."""
    if model.kind != checkpoint.kind:
        raise ModelKindMismatch(
            f"checkpoint holds a {checkpoint.kind!r} model, target is {model.kind!r}"
        )
    params = model.parameters()
    state_names = set(model.state_arrays().keys())
    expected = set(params.keys()) | state_names
    have = set(checkpoint.tensors.keys())
    if expected != have:
        missing = sorted(expected - have)
        extra = sorted(have - expected)
        raise CorruptFile(f"tensor names do not match the graph: missing={missing}, extra={extra}")
    state: dict[str, np.ndarray] = {}
    for name, value in checkpoint.tensors.items():
        if name in params:
            if params[name].value.shape != value.shape:
                raise CorruptFile(
                    f"tensor {name!r}: shape {value.shape} does not fit {params[name].value.shape}"
                )
            params[name].value = value.copy()
            params[name].grad = np.zeros_like(value)
        else:
            state[name] = value
    for layer in model._unique_layers():
        if layer.state():
            layer.load_state(state)


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def _pack_str(out: io.BytesIO, text: str, width: str) -> None:
    data = text.encode("utf-8")
    out.write(struct.pack(width, len(data)))
    out.write(data)


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    """Write the checkpoint; the trailing CRC covers every preceding byte."""
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", checkpoint.version))
    _pack_str(out, checkpoint.kind, "<H")
    out.write(struct.pack("<I", checkpoint.epoch))
    _pack_str(out, json.dumps(checkpoint.config, sort_keys=True), "<I")
    out.write(struct.pack("<I", len(checkpoint.tensors)))
    for name, value in checkpoint.tensors.items():
        arr = np.array(value, dtype=np.float64, order="C")  # keeps 0-d shapes
        _pack_str(out, name, "<H")
        out.write(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            out.write(struct.pack("<I", dim))
        out.write(arr.astype("<f8").tobytes())
    payload = out.getvalue()
    checksum = zlib.crc32(payload) & 0xFFFFFFFF
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
            fh.write(struct.pack("<I", checksum))
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptFile("truncated checkpoint")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]

    def take_str(self, width: str) -> str:
        n = self.unpack(width)
        return self.take(n).decode("utf-8")


def load_checkpoint(path, expected_kind: str | None = None) -> Checkpoint:
    """Read and validate a checkpoint file.

    Raises CorruptFile on truncation, bad magic or checksum failure,
    VersionMismatch on an unsupported format version, and ModelKindMismatch
    when ``expected_kind`` is given and differs.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    if len(data) < len(MAGIC) + 4:
        raise CorruptFile("file too small to be a checkpoint")
    payload, stored = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(payload) & 0xFFFFFFFF != stored:
        raise CorruptFile("checksum failure")

    reader = _Reader(payload)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CorruptFile("bad magic bytes")
    version = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format version {version}, this build reads {FORMAT_VERSION}")
    kind = reader.take_str("<H")
    if expected_kind is not None and kind != expected_kind:
        raise ModelKindMismatch(f"checkpoint holds a {kind!r} model, expected {expected_kind!r}")
    epoch = reader.unpack("<I")
    try:
        config = json.loads(reader.take_str("<I"))
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"config block is not valid JSON: {exc}") from exc
    count = reader.unpack("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = reader.take_str("<H")
        ndim = reader.unpack("<B")
        shape = tuple(reader.unpack("<I") for _ in range(ndim))
        size = int(np.prod(shape)) if shape else 1
        raw = reader.take(8 * size)
        tensors[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    if reader.pos != len(payload):
        raise CorruptFile(f"{len(payload) - reader.pos} trailing bytes after tensor block")
    return Checkpoint(kind=kind, epoch=epoch, config=config, tensors=tensors, version=version)

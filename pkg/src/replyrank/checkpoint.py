"""Binary model checkpoints.

Layout: magic ``DENC``, format version (little-endian u32), length-prefixed
JSON header (u64 length; hyperparameters, vocabulary, tensor name order),
then each tensor as rank/dims (u64) followed by little-endian float32 data.
Serialization is canonical, so equal models produce byte-identical files
and the file digest doubles as the model identity.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import asdict

import numpy as np

from .errors import CorruptCheckpoint
from .model import DualEncoderModel, LstmParams, ModelConfig, Vocabulary
from .tensor import Tensor, tensor_from_bytes, tensor_to_bytes

MAGIC = b"DENC"
VERSION = 1


def model_to_bytes(model: DualEncoderModel) -> bytes:
    named = model.named_parameters()
    header = {
        "config": asdict(model.config),
        "vocab": list(model.vocab.id_to_token),
        "tensors": [name for name, _ in named],
    }
    header_bytes = json.dumps(
        header, sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(header_bytes)),
             header_bytes]
    for _, param in named:
        parts.append(tensor_to_bytes(param.data))
    return b"".join(parts)


def model_from_bytes(buf: bytes) -> DualEncoderModel:
    if buf[:4] != MAGIC:
        raise CorruptCheckpoint(f"bad magic {buf[:4]!r}")
    if len(buf) < 16:
        raise CorruptCheckpoint("truncated before header")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise CorruptCheckpoint(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", buf, 8)
    offset = 16
    if len(buf) < offset + header_len:
        raise CorruptCheckpoint("truncated header")
    try:
        header = json.loads(buf[offset : offset + header_len].decode("utf-8"))
        config = ModelConfig(**header["config"])
        vocab = Vocabulary.from_tokens(header["vocab"])
        tensor_names = list(header["tensors"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"bad header: {exc}") from exc
    offset += header_len

    arrays: dict[str, np.ndarray] = {}
    for name in tensor_names:
        try:
            arr, offset = tensor_from_bytes(buf, offset)
        except ValueError as exc:
            raise CorruptCheckpoint(f"tensor {name}: {exc}") from exc
        arrays[name] = arr
    if offset != len(buf):
        raise CorruptCheckpoint(f"{len(buf) - offset} trailing bytes")

    model = DualEncoderModel(vocab, config, dtype=np.float32, _init=False)
    _install_tensors(model, arrays)
    expected = [name for name, _ in model.named_parameters()]
    if expected != tensor_names:
        raise CorruptCheckpoint("tensor list does not match model structure")
    return model


def _install_tensors(model: DualEncoderModel, arrays: dict[str, np.ndarray]) -> None:
    def take(name: str) -> Tensor:
        if name not in arrays:
            raise CorruptCheckpoint(f"missing tensor {name}")
        return Tensor(arrays[name])

    model.q_emb = take("q_emb")
    model.a_emb = model.q_emb if model.config.share_embeddings else take("a_emb")
    for prefix in ("q_lstm", "a_lstm"):
        fields = {
            fname: take(f"{prefix}.{fname}") for fname in LstmParams.FIELD_NAMES
        }
        setattr(model, prefix, LstmParams(
            **fields, hidden_dim=model.config.lstm_dim
        ))
    model.mlp = []
    for i in range(model.config.mlp_layers):
        model.mlp.append((take(f"mlp.{i}.w"), take(f"mlp.{i}.b")))


def model_digest(model: DualEncoderModel) -> str:
    return hashlib.sha256(model_to_bytes(model)).hexdigest()


def save_checkpoint(model: DualEncoderModel, path: str | os.PathLike) -> str:
    """Write atomically (temp file + rename); returns the content digest."""
    data = model_to_bytes(model)
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fp:
        fp.write(data)
        fp.flush()
        os.fsync(fp.fileno())
    os.replace(tmp, path)
    return hashlib.sha256(data).hexdigest()


def load_checkpoint(path: str | os.PathLike) -> DualEncoderModel:
    with open(path, "rb") as fp:
        buf = fp.read()
    return model_from_bytes(buf)

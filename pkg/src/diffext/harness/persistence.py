"""Model container: fitted extender plus optional evaluation cache.

Layout (all integers little-endian)::

    magic      8 bytes   b"DXMODEL\\0"
    version    uint32
    header_len uint64    length of the UTF-8 JSON header
    body_len   uint64    length of the raw array block
    header     JSON      scalars and an index of (name, dtype, shape, offset)
    body       bytes     array data, C order
    digest     32 bytes  SHA-256 of header + body
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..dimred import ProjectionBasis
from ..errors import (BadMagicError, ChecksumError, ModelFormatError, TruncatedFileError,
                      VersionMismatchError)
from ..extender import ExtenderModel
from ..online import CacheEntry, EvaluationCache

MAGIC = b"DXMODEL\0"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sIQQ")
_DIGEST_LEN = 32


def _pack(arrays: dict) -> tuple[list, bytes]:
    index, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        raw = a.tobytes()
        index.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    return index, b"".join(chunks)


def _unpack(index: list, body: bytes) -> dict:
    out = {}
    for item in index:
        dt = np.dtype(item["dtype"])
        count = int(np.prod(item["shape"], dtype=np.int64))
        a = np.frombuffer(body, dtype=dt, count=count, offset=item["offset"])
        out[item["name"]] = a.reshape(item["shape"]).astype(dt.newbyteorder("="))
    return out


def dumps_model(model: ExtenderModel, cache: EvaluationCache | None = None) -> bytes:
    meta = {
        "format_version": FORMAT_VERSION,
        "n": model.n,
        "n_bar": model.n_bar,
        "p": model.p,
        "k": model.k,
        "delta": model.delta,
        "M": model.M,
        "cache": None,
    }
    arrays = {
        "right_vectors": model.basis.right_vectors,
        "singular_values": model.basis.singular_values,
        "train_points": model.train_points,
        "train_coords": model.train_coords,
        "values": model.values,
    }
    if cache is not None:
        keys = list(cache.entries)
        for key in keys:
            if not isinstance(key, (str, int)):
                raise ModelFormatError(f"cache key {key!r} is not a str or int and cannot be saved")
        entries = [cache.entries[k] for k in keys]
        meta["cache"] = {"keys": keys, "kernel_evals": cache.kernel_evals}
        arrays.update({
            "cache_coords": np.array([e.query_coord for e in entries]).reshape(len(keys), model.n_bar),
            "cache_eps": np.array([e.epsilon for e in entries], dtype=np.float64),
            "cache_ref_sq": np.array([e.ref_sq for e in entries], dtype=np.float64),
            "cache_u_sum": np.array([e.u_sum for e in entries], dtype=np.float64),
            "cache_u_weighted": np.array([e.u_weighted for e in entries]).reshape(len(keys), model.p),
            "cache_k_seen": np.array([e.k_seen for e in entries], dtype=np.int64),
            "cache_exact": np.array([e.exact_index for e in entries], dtype=np.int64),
        })
    index, body = _pack(arrays)
    meta["arrays"] = index
    header = json.dumps(meta, sort_keys=True).encode("utf-8")
    digest = hashlib.sha256(header + body).digest()
    return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header), len(body)) + header + body + digest


def loads_model(raw: bytes, source: str = "<bytes>"):
    """Decode a container; returns ``(model, cache)`` with ``cache`` possibly None."""
    if len(raw) < _PREAMBLE.size:
        if raw[:len(MAGIC)] != MAGIC[:len(raw)]:
            raise BadMagicError(f"{source}: not a model file (bad magic)")
        raise TruncatedFileError(f"{source}: file ends inside the preamble")
    magic, version, hlen, blen = _PREAMBLE.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{source}: not a model file (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{source}: format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    expected = _PREAMBLE.size + hlen + blen + _DIGEST_LEN
    if len(raw) < expected:
        raise TruncatedFileError(f"{source}: expected {expected} bytes, found {len(raw)}")
    start = _PREAMBLE.size
    payload = raw[start:start + hlen + blen]
    digest = raw[start + hlen + blen:expected]
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumError(f"{source}: checksum mismatch, file is corrupted")
    try:
        meta = json.loads(payload[:hlen].decode("utf-8"))
        arrays = _unpack(meta["arrays"], payload[hlen:])
    except (ValueError, KeyError) as exc:
        raise ModelFormatError(f"{source}: malformed header: {exc}") from exc

    basis = ProjectionBasis(arrays["right_vectors"], arrays["singular_values"])
    model = ExtenderModel(
        train_points=arrays["train_points"],
        train_coords=arrays["train_coords"],
        values=np.asfortranarray(arrays["values"]),
        basis=basis,
        delta=meta["delta"],
        M=meta["M"],
    )
    cache = None
    if meta["cache"] is not None:
        cache = EvaluationCache(kernel_evals=meta["cache"]["kernel_evals"])
        for i, key in enumerate(meta["cache"]["keys"]):
            cache.entries[key] = CacheEntry(
                query_coord=arrays["cache_coords"][i].copy(),
                epsilon=float(arrays["cache_eps"][i]),
                ref_sq=float(arrays["cache_ref_sq"][i]),
                u_sum=float(arrays["cache_u_sum"][i]),
                u_weighted=arrays["cache_u_weighted"][i].copy(),
                k_seen=int(arrays["cache_k_seen"][i]),
                exact_index=int(arrays["cache_exact"][i]),
            )
    return model, cache


def save_model(model: ExtenderModel, cache: EvaluationCache | None, path) -> None:
    Path(path).write_bytes(dumps_model(model, cache))


def load_model(path):
    path = Path(path)
    return loads_model(path.read_bytes(), str(path))

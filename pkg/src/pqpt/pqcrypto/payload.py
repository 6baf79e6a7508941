"""Byte-string encryption on top of the n-bit RLWE block cipher.

Wire format::

    b"RLWE" | params id (1 B) | original length (8 B, BE) | block count (4 B, BE)
    | blocks, each u then v, every coefficient as 2 bytes BE

The plaintext stream is ``length (8 B, BE) || payload`` split into n-bit
blocks, most significant bit of each byte first, zero padded. An empty
payload encrypts to the bare header.
"""

from __future__ import annotations

import struct

import numpy as np

from ..core import Prng
from ..errors import MalformedBlob, ParamMismatch, UnregisteredParams
from .rlwe import (
    PARAM_IDS,
    PARAM_SETS,
    RlweParams,
    RlwePublicKey,
    RlweSecretKey,
    decrypt_batch,
    encrypt_rows,
)

MAGIC = b"RLWE"
_HEADER = struct.Struct(">4sBQI")


def _param_id(params: RlweParams) -> int:
    if params.name not in PARAM_IDS or PARAM_SETS[params.name] != params:
        raise UnregisteredParams(f"{params} has no wire identifier")
    if not params.is_correct:
        raise UnregisteredParams(f"{params} does not meet the decryption correctness margin")
    return PARAM_IDS[params.name]


def block_count(length: int, n: int) -> int:
    if length == 0:
        return 0
    return -(-(64 + 8 * length) // n)


def _plaintext_blocks(payload: bytes, n: int) -> np.ndarray:
    count = block_count(len(payload), n)
    if not count:
        return np.zeros((0, n), dtype=np.int64)
    stream = len(payload).to_bytes(8, "big") + payload
    bits = np.unpackbits(np.frombuffer(stream, dtype=np.uint8)).astype(np.int64)
    bits = np.concatenate([bits, np.zeros(count * n - bits.size, dtype=np.int64)])
    return bits.reshape(count, n)


def encrypt_payloads(public_key: RlwePublicKey, params: RlweParams, payloads: list[bytes], prng: Prng) -> list[bytes]:
    """Encrypt several payloads at once.

    Produces exactly what successive :func:`encrypt_payload` calls on the
    same stream would; the ring products are simply batched.
    """
    pid = _param_id(params)
    payloads = [bytes(p) for p in payloads]
    blocks = [_plaintext_blocks(p, params.n) for p in payloads]
    total = sum(b.shape[0] for b in blocks)
    if total:
        u, v = encrypt_rows(public_key, params, np.concatenate(blocks), prng)
        body = np.stack([u, v], axis=1).astype(">u2")
    out = []
    pos = 0
    for payload, blk in zip(payloads, blocks):
        count = blk.shape[0]
        head = _HEADER.pack(MAGIC, pid, len(payload), count)
        out.append(head + (body[pos:pos + count].tobytes() if count else b""))
        pos += count
    return out


def encrypt_payload(public_key: RlwePublicKey, params: RlweParams, payload: bytes, prng: Prng) -> bytes:
    return encrypt_payloads(public_key, params, [payload], prng)[0]


def parse_header(blob: bytes) -> tuple[int, int, int]:
    """Return ``(params_id, original_length, block_count)``."""
    if len(blob) < _HEADER.size:
        raise MalformedBlob("blob shorter than header")
    magic, pid, length, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise MalformedBlob("bad magic")
    return pid, length, count


def decrypt_payload(secret_key: RlweSecretKey, params: RlweParams, blob: bytes) -> bytes:
    blob = bytes(blob)
    pid, length, count = parse_header(blob)
    if pid not in PARAM_IDS.values():
        raise MalformedBlob(f"unknown params id {pid}")
    if pid != _param_id(params):
        raise ParamMismatch(f"blob was written for params id {pid}, not {params}")
    n, q = params.n, params.q
    if count != block_count(length, n):
        raise MalformedBlob("block count disagrees with payload length")
    body = blob[_HEADER.size:]
    if len(body) != count * 4 * n:
        raise MalformedBlob(f"expected {count * 4 * n} body bytes, found {len(body)}")
    if count == 0:
        return b""
    coeffs = np.frombuffer(body, dtype=">u2").astype(np.int64).reshape(count, 2, n)
    if np.any(coeffs >= q):
        raise MalformedBlob("coefficient out of range")
    bits = decrypt_batch(secret_key, params, coeffs[:, 0, :], coeffs[:, 1, :]).reshape(-1)
    stream = np.packbits(bits.astype(np.uint8)).tobytes()
    inner = int.from_bytes(stream[:8], "big")
    if inner != length:
        raise MalformedBlob("embedded length does not match header")
    return stream[8:8 + length]

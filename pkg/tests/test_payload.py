import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqpt.core import Prng
from pqpt.errors import MalformedBlob, ParamMismatch, UnregisteredParams
from pqpt.pqcrypto.payload import (
    MAGIC,
    block_count,
    decrypt_payload,
    encrypt_payload,
    encrypt_payloads,
    parse_header,
)
from pqpt.pqcrypto.rlwe import STD_256, STD_512, TOY_4, TOY_8, RlweParams, keygen

KEYS = {p.name: keygen(p, Prng(5, b"payload")) for p in (TOY_4, TOY_8, STD_256, STD_512)}


def _enc(params, data, seed=1):
    return encrypt_payload(KEYS[params.name].public, params, data, Prng(seed, b"e"))


def _dec(params, blob):
    return decrypt_payload(KEYS[params.name].secret, params, blob)


@pytest.mark.parametrize("params", [TOY_4, TOY_8, STD_256, STD_512])
@pytest.mark.parametrize("data", [b"", b"\x00", b"hello ledger", bytes(range(256)) * 3])
def test_round_trip(params, data):
    assert _dec(params, _enc(params, data)) == data


@given(st.binary(max_size=600), st.sampled_from([TOY_8, STD_256]))
@settings(max_examples=40, deadline=None)
def test_round_trip_property(data, params):
    assert _dec(params, _enc(params, data)) == data


def test_header_layout():
    blob = _enc(STD_256, b"abc")
    assert blob[:4] == MAGIC
    pid, length, count = struct.unpack(">BQI", blob[4:17])
    assert (pid, length, count) == (3, 3, 1)
    assert parse_header(blob) == (3, 3, 1)
    assert len(blob) == 17 + count * 4 * 256


def test_block_counts():
    assert block_count(0, 256) == 0
    assert block_count(1, 256) == 1
    assert block_count(24, 256) == 1
    assert block_count(25, 256) == 2
    assert block_count(1, 4) == 18


def test_empty_payload_is_bare_header():
    blob = _enc(STD_256, b"")
    assert len(blob) == 17 and parse_header(blob) == (3, 0, 0)


def test_batch_equals_sequential():
    kp = KEYS["STD-256"]
    items = [b"", b"x" * 40, b"y" * 500, b"z"]
    batch = encrypt_payloads(kp.public, STD_256, items, Prng(9, b"s"))
    s = Prng(9, b"s")
    assert batch == [encrypt_payload(kp.public, STD_256, p, s) for p in items]


def test_unregistered_params_refused():
    odd = RlweParams(256, 7681, 2)
    with pytest.raises(UnregisteredParams):
        encrypt_payload(KEYS["STD-256"].public, odd, b"x", Prng(1))


def test_param_mismatch():
    blob = _enc(STD_256, b"abc")
    with pytest.raises(ParamMismatch):
        _dec(STD_512, blob)


def test_malformed_blobs():
    blob = _enc(TOY_8, b"abcdef")
    cases = [
        b"",
        b"XXXX" + blob[4:],
        blob[:4] + b"\x09" + blob[5:],
        blob[:-1],
        blob + b"\x00\x00",
        blob[:5] + struct.pack(">Q", 7) + blob[13:],
        blob[:13] + struct.pack(">I", 99) + blob[17:],
        blob[:17] + b"\xff\xff" + blob[19:],
    ]
    for bad in cases:
        with pytest.raises(MalformedBlob):
            _dec(TOY_8, bad)


def test_random_payload_sizes():
    rng = np.random.default_rng(17)
    kp = KEYS["STD-256"]
    items = [rng.integers(0, 256, int(rng.integers(0, 4097)), dtype=np.uint8).tobytes() for _ in range(30)]
    blobs = encrypt_payloads(kp.public, STD_256, items, Prng(3, b"r"))
    assert [decrypt_payload(kp.secret, STD_256, b) for b in blobs] == items

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import negacyclic
from pqpt.pqcrypto import ring

SIZES = [(4, 257), (8, 257), (256, 7681), (512, 12289)]


@given(st.data())
@settings(max_examples=50, deadline=None)
def test_schoolbook_matches_textbook_definition(data):
    n = data.draw(st.sampled_from([1, 2, 4, 8, 16]))
    q = data.draw(st.sampled_from([17, 257, 7681]))
    a = data.draw(st.lists(st.integers(0, q - 1), min_size=n, max_size=n))
    b = data.draw(st.lists(st.integers(0, q - 1), min_size=n, max_size=n))
    assert ring.mul_schoolbook(a, b, q) == negacyclic(a, b, q)


def test_x_to_the_n_is_minus_one():
    n, q = 8, 257
    x = [0, 1] + [0] * (n - 2)
    p = [1] + [0] * (n - 1)
    for _ in range(n):
        p = ring.mul_schoolbook(p, x, q)
    assert p == [q - 1] + [0] * (n - 1)


@pytest.mark.parametrize("n, q", SIZES)
def test_ntt_agrees_with_schoolbook(n, q):
    rng = np.random.default_rng(n)
    for _ in range(10):
        a, b = rng.integers(0, q, n), rng.integers(0, q, n)
        expected = ring.mul_schoolbook(a, b, q)
        if ring.ntt_friendly(n, q):
            assert ring.mul_ntt(a, b, q).tolist() == expected
        assert ring.mul(a, b, q).tolist() == expected


@pytest.mark.parametrize("n, q", SIZES)
def test_row_multiplier_agrees_with_schoolbook(n, q):
    rng = np.random.default_rng(q + n)
    rows = rng.integers(0, q, (6, n))
    p1, p2 = rng.integers(0, q, n), rng.integers(0, q, n)
    r1, r2 = ring.mul_rows(rows, [p1, p2], q)
    for i in range(6):
        assert r1[i].tolist() == ring.mul_schoolbook(rows[i], p1, q)
        assert r2[i].tolist() == ring.mul_schoolbook(rows[i], p2, q)


def test_row_multiplier_extreme_values():
    n, q = 512, 12289
    worst = np.full((2, n), q // 2)
    p = np.full(n, q // 2 + 1)
    assert ring.mul_rows(worst, [p], q)[0][0].tolist() == ring.mul_schoolbook(worst[0], p, q)


def test_batched_ntt():
    n, q = 256, 7681
    rng = np.random.default_rng(3)
    a, b = rng.integers(0, q, (4, n)), rng.integers(0, q, n)
    out = ring.mul_ntt(a, b, q)
    assert all(out[i].tolist() == ring.mul_schoolbook(a[i], b, q) for i in range(4))


def test_ntt_round_trip():
    plan = ring.ntt_plan(256, 7681)
    a = np.random.default_rng(0).integers(0, 7681, 256)
    assert np.array_equal(plan.inverse(plan.forward(a)), a)


def test_ntt_friendliness():
    assert ring.ntt_friendly(256, 7681) and ring.ntt_friendly(512, 12289)
    assert not ring.ntt_friendly(6, 13)
    assert not ring.ntt_friendly(256, 12289 + 2)
    with pytest.raises(ValueError):
        ring.ntt_plan(256, 7687)


def test_primes_and_roots():
    assert [p for p in range(30) if ring.is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert ring.primitive_root(7681) == 17
    assert ring.primitive_root(12289) == 11


def test_centered_range():
    c = ring.centered(np.arange(0, 17), 17)
    assert c.min() == -8 and c.max() == 8
    assert ring.centered([16], 17).tolist() == [-1]


def test_length_mismatch():
    with pytest.raises(ValueError):
        ring.mul_schoolbook([1, 2], [1], 5)

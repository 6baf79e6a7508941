"""Arithmetic in the negacyclic ring Z_q[x]/(x^n + 1).

``mul_schoolbook`` is the reference product. ``mul_ntt`` is the fast path
for single products, available whenever q is a prime with q = 1 (mod 2n).
``mul_rows`` handles the batched case (many rows against a few fixed
polynomials) with one dense matrix product. Both must agree with the
reference coefficient for coefficient.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np


def is_prime(m: int) -> bool:
    if m < 2:
        return False
    if m % 2 == 0:
        return m == 2
    f = 3
    while f * f <= m:
        if m % f == 0:
            return False
        f += 2
    return True


def _prime_factors(m: int) -> list[int]:
    out = []
    f = 2
    while f * f <= m:
        if m % f == 0:
            out.append(f)
            while m % f == 0:
                m //= f
        f += 1
    if m > 1:
        out.append(m)
    return out


def primitive_root(q: int) -> int:
    factors = _prime_factors(q - 1)
    for g in range(2, q):
        if all(pow(g, (q - 1) // p, q) != 1 for p in factors):
            return g
    raise ValueError(f"no primitive root mod {q}")


@lru_cache(maxsize=None)
def ntt_friendly(n: int, q: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0 and is_prime(q) and (q - 1) % (2 * n) == 0


def mul_schoolbook(a: Sequence[int], b: Sequence[int], q: int) -> list[int]:
    """O(n^2) negacyclic product; x^n wraps to -1."""
    n = len(a)
    if len(b) != n:
        raise ValueError("operands must have equal length")
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    acc = [0] * (2 * n)
    for i, ai in enumerate(a):
        if ai:
            acc[i:i + n] = [c + ai * bj for c, bj in zip(acc[i:i + n], b)]
    return [(acc[k] - acc[k + n]) % q for k in range(n)]


class _NttPlan:
    def __init__(self, n: int, q: int):
        if not ntt_friendly(n, q):
            raise ValueError(f"q={q} does not support a length-{n} negacyclic NTT")
        self.n = n
        self.q = q
        g = primitive_root(q)
        psi = pow(g, (q - 1) // (2 * n), q)
        assert pow(psi, n, q) == q - 1
        psi_inv = pow(psi, q - 2, q)
        omega = psi * psi % q
        omega_inv = pow(omega, q - 2, q)
        self.psi_pows = np.array([pow(psi, i, q) for i in range(n)], dtype=np.int64)
        self.psi_inv_pows = np.array([pow(psi_inv, i, q) for i in range(n)], dtype=np.int64)
        self.n_inv = pow(n, q - 2, q)
        bits = n.bit_length() - 1
        self.bitrev = np.array([int(format(i, f"0{bits}b")[::-1], 2) if bits else 0 for i in range(n)],
                               dtype=np.int64)
        self.stages = self._twiddles(omega)
        self.inv_stages = self._twiddles(omega_inv)

    def _twiddles(self, root: int) -> list[np.ndarray]:
        stages = []
        m = 1
        while m < self.n:
            w = pow(root, self.n // (2 * m), self.q)
            stages.append(np.array([pow(w, j, self.q) for j in range(m)], dtype=np.int64))
            m *= 2
        return stages

    def _cyclic(self, a: np.ndarray, stages: list[np.ndarray]) -> np.ndarray:
        q = self.q
        lead = a.shape[:-1]
        a = a[..., self.bitrev]
        m = 1
        for tw in stages:
            blocks = a.reshape(lead + (-1, 2 * m))
            even = blocks[..., :m]
            # Only the twiddle product is reduced; the sums stay below
            # 2^log2(n) * q, far from int64 overflow.
            odd = blocks[..., m:] * tw % q
            a = np.concatenate((even + odd, even - odd), axis=-1).reshape(lead + (self.n,))
            m *= 2
        return a % q

    def forward(self, a: np.ndarray) -> np.ndarray:
        return self._cyclic(a * self.psi_pows % self.q, self.stages)

    def inverse(self, a: np.ndarray) -> np.ndarray:
        out = self._cyclic(a, self.inv_stages)
        return out * self.n_inv % self.q * self.psi_inv_pows % self.q


@lru_cache(maxsize=None)
def ntt_plan(n: int, q: int) -> _NttPlan:
    return _NttPlan(n, q)


def mul_ntt(a, b, q: int) -> np.ndarray:
    """Negacyclic product via the NTT. Operands may be batched on leading axes."""
    a = np.asarray(a, dtype=np.int64) % q
    b = np.asarray(b, dtype=np.int64) % q
    plan = ntt_plan(a.shape[-1], q)
    return plan.inverse(plan.forward(a) * plan.forward(b) % q)


def mul(a, b, q: int) -> np.ndarray:
    """Ring product using the fastest multiplier available for (n, q)."""
    n = len(a)
    if ntt_friendly(n, q):
        return mul_ntt(a, b, q)
    return np.array(mul_schoolbook(a, b, q), dtype=np.int64)


def centered(a, q: int) -> np.ndarray:
    """Map residues to (-q/2, q/2]."""
    a = np.asarray(a, dtype=np.int64) % q
    return np.where(a > q // 2, a - q, a)


def shifted_rows(a, q: int, positions) -> np.ndarray:
    """Rows ``a * x^i`` for each i in ``positions`` (negacyclic shifts)."""
    a = np.asarray(a, dtype=np.int64) % q
    n = a.shape[0]
    rows = []
    for i in positions:
        row = np.roll(a, i)
        row[:i] = (-row[:i]) % q
        rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(len(rows), n)


@lru_cache(maxsize=None)
def _negacyclic_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gather indices and signs so that ``p[idx] * sign`` has rows ``p * x^i``."""
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    return (j - i) % n, np.where(j < i, -1, 1)


def mul_rows(rows, polys: Sequence, q: int) -> list[np.ndarray]:
    """Products ``row * p`` for every row of ``rows`` and every ``p`` in ``polys``.

    Uses one dense product against the stacked negacyclic matrices of
    ``polys``. With centered residues each dot product is at most
    n * (q/2)^2 in magnitude, below 2^53 for every q < 2^16 and n <= 2^16,
    so float64 arithmetic is exact here.
    """
    rows = centered(rows, q).astype(np.float64)
    n = rows.shape[-1]
    if n * (q // 2 + 1) ** 2 >= 1 << 53:
        raise ValueError("modulus too large for the exact float path")
    idx, sign = _negacyclic_index(n)
    mats = [(centered(p, q)[idx] * sign).astype(np.float64) for p in polys]
    prod = rows @ np.concatenate(mats, axis=1)
    prod = np.rint(prod).astype(np.int64) % q
    return [prod[..., k * n:(k + 1) * n] for k in range(len(polys))]

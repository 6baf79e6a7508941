"""Exhaustive secret-key search against RLWE, standing in for a quantum adversary.

Candidates are the secrets with every coefficient in [-eta, eta], visited in
lexicographic order (coefficient 0 most significant, values ascending). A
candidate ``s'`` is accepted when ``b - a*s'`` is itself small (all centered
coefficients within eta) and decrypting the captured ciphertext with ``s'``
yields the known plaintext.

The search is classical and only finishes for toy ring degrees; for the
standard sets it runs out of budget, which is the point being demonstrated.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import ring
from .rlwe import Poly, RlweCiphertext, RlweParams, RlwePublicKey, decode

# Candidates evaluated per vectorised batch.
_BATCH = 16384
_PROBE = 8


class AttackOutcome(str, enum.Enum):
    RECOVERED = "Recovered"
    EXHAUSTED = "Exhausted"
    BUDGET_EXCEEDED = "BudgetExceeded"


@dataclass(frozen=True)
class AttackReport:
    keyspace_size: int
    keys_tried: int
    outcome: AttackOutcome
    secret: Optional[Poly] = None
    wall_notes: str = ""

    def to_dict(self) -> dict:
        return {
            "keyspace_size": str(self.keyspace_size),
            "keys_tried": str(self.keys_tried),
            "outcome": self.outcome.value,
            "secret": None if self.secret is None else [int(c) for c in self.secret.centered()],
            "wall_notes": self.wall_notes,
        }


def _digits(index: int, length: int, eta: int) -> np.ndarray:
    base = 2 * eta + 1
    digits = []
    for _ in range(length):
        index, d = divmod(index, base)
        digits.append(d - eta)
    return np.array(digits[::-1], dtype=np.int64)


def candidate(index: int, params: RlweParams) -> np.ndarray:
    """The ``index``-th candidate secret (centered coefficients)."""
    return _digits(index, params.n, params.eta)


def simulate_quantum_attack(
    params: RlweParams,
    public_key: RlwePublicKey,
    ciphertext: RlweCiphertext,
    known_plaintext: Sequence[int],
    budget: int,
) -> AttackReport:
    n, q, eta = params.n, params.q, params.eta
    base = 2 * eta + 1
    keyspace = base ** n
    limit = min(max(int(budget), 0), keyspace)
    target = np.asarray(known_plaintext, dtype=np.int64)
    a = public_key.a.coeffs
    b = public_key.b.coeffs
    u = ciphertext.u.coeffs
    v = ciphertext.v.coeffs

    # Split each candidate into a slowly varying prefix and a suffix of k
    # coefficients enumerated as one batch.
    k = 0
    while k < n and base ** (k + 1) <= _BATCH:
        k += 1
    suffixes = np.array(list(itertools.product(range(-eta, eta + 1), repeat=k)), dtype=np.int64).reshape(-1, k)
    a_rows = ring.shifted_rows(a, q, range(n - k, n))
    u_rows = ring.shifted_rows(u, q, range(n - k, n))
    per_prefix = suffixes.shape[0]

    tried = 0
    prefix_index = 0
    while tried < limit:
        prefix = _digits(prefix_index, n - k, eta)
        s_prefix = np.concatenate([prefix, np.zeros(k, dtype=np.int64)]) % q
        base_a = ring.mul(s_prefix, a, q) if n > k else np.zeros(n, dtype=np.int64)
        base_u = ring.mul(s_prefix, u, q) if n > k else np.zeros(n, dtype=np.int64)
        take = min(per_prefix, limit - tried)
        rows = suffixes[:take]
        # Cheap screen on the first few coefficients, full check on survivors.
        head = (base_a[:_PROBE] + rows @ a_rows[:, :_PROBE]) % q
        passed = np.all(np.abs(ring.centered(b[:_PROBE] - head, q)) <= eta, axis=1)
        for j in np.flatnonzero(passed):
            residual = ring.centered(b - (base_a + rows[j] @ a_rows), q)
            if np.any(np.abs(residual) > eta):
                continue
            d = Poly(v - (base_u + rows[j] @ u_rows), q)
            if np.array_equal(decode(d), target):
                secret = Poly(np.concatenate([prefix, rows[j]]), q)
                found = tried + int(j) + 1
                return AttackReport(keyspace, found, AttackOutcome.RECOVERED, secret,
                                    f"secret recovered after {found} of {keyspace} candidates")
        tried += take
        prefix_index += 1

    if tried >= keyspace:
        return AttackReport(keyspace, tried, AttackOutcome.EXHAUSTED, None,
                            "keyspace exhausted without a consistent secret")
    return AttackReport(keyspace, tried, AttackOutcome.BUDGET_EXCEEDED, None,
                        f"budget of {tried} candidates spent; keyspace is {keyspace}")

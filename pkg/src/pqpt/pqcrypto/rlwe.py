"""Ring-LWE public-key encryption of n-bit messages.

Key generation samples a uniform ``a`` and small ``s, e`` and publishes
``b = a*s + e``. A message bit m_i is encoded as ``floor(q/2) * m_i``:

    u = a*r + e1
    v = b*r + e2 + floor(q/2)*m

and recovered from ``d = v - u*s``, whose i-th coefficient sits near
``floor(q/2)`` for a one bit and near zero for a zero bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core import Prng
from ..errors import MessageLengthMismatch, ParamMismatch, UnregisteredParams
from . import ring

ALLOWED_DEGREES = (4, 8, 256, 512)
# Largest acceptable per-message decryption failure bound for a set whose
# worst-case noise exceeds q/4.
FAILURE_BOUND = 2.0 ** -128


@dataclass(frozen=True)
class RlweParams:
    n: int
    q: int
    eta: int
    name: Optional[str] = None

    @property
    def half_q(self) -> int:
        return self.q // 2

    @property
    def keyspace_size(self) -> int:
        return (2 * self.eta + 1) ** self.n

    @property
    def worst_case_noise(self) -> int:
        return 2 * self.n * self.eta ** 2 + self.eta

    @property
    def worst_case_correct(self) -> bool:
        return 4 * self.worst_case_noise < self.q

    @property
    def failure_probability_bound(self) -> float:
        """Hoeffding bound on P(any coefficient decodes wrongly) for one block.

        Each noise coefficient is a sum of 2n independent products bounded by
        eta^2 plus one term bounded by eta.
        """
        if self.worst_case_correct:
            return 0.0
        if self.eta == 0:
            return 0.0
        t = self.q / 4 - self.eta - 1
        if t <= 0:
            return 1.0
        spread = 2 * self.eta ** 2
        exponent = 2 * t * t / (2 * self.n * spread * spread)
        return min(1.0, self.n * 2.0 * math.exp(-exponent))

    @property
    def is_correct(self) -> bool:
        return self.worst_case_correct or self.failure_probability_bound <= FAILURE_BOUND

    @property
    def attackable(self) -> bool:
        return self.n <= 8

    @property
    def ntt(self) -> bool:
        return ring.ntt_friendly(self.n, self.q)

    def check_registered(self) -> None:
        if self.n not in ALLOWED_DEGREES:
            raise UnregisteredParams(f"ring degree {self.n} is not one of {ALLOWED_DEGREES}")
        if self.q % 2 == 0 or not ring.is_prime(self.q) or self.q >= 1 << 16:
            raise UnregisteredParams(f"modulus {self.q} must be an odd prime below 2^16")
        if self.eta < 0:
            raise UnregisteredParams("eta must be non-negative")
        if self.n >= 256 and (self.q - 1) % (2 * self.n):
            raise UnregisteredParams(f"q={self.q} is not 1 mod {2 * self.n}")

    def __str__(self) -> str:
        return self.name or f"RLWE(n={self.n}, q={self.q}, eta={self.eta})"


TOY_4 = RlweParams(4, 257, 1, "TOY-4")
TOY_8 = RlweParams(8, 257, 1, "TOY-8")
STD_256 = RlweParams(256, 7681, 2, "STD-256")
STD_512 = RlweParams(512, 12289, 2, "STD-512")

PARAM_SETS = {p.name: p for p in (TOY_4, TOY_8, STD_256, STD_512)}
PARAM_IDS = {"TOY-4": 1, "TOY-8": 2, "STD-256": 3, "STD-512": 4}


def get_params(name: str) -> RlweParams:
    try:
        return PARAM_SETS[name.upper()]
    except KeyError:
        raise UnregisteredParams(f"unknown parameter set {name!r}; choose from {sorted(PARAM_SETS)}") from None


class Poly:
    """Element of Z_q[x]/(x^n + 1) with coefficients in [0, q)."""

    __slots__ = ("coeffs", "q")

    def __init__(self, coeffs, q: int):
        arr = np.asarray(coeffs, dtype=np.int64) % q
        arr.setflags(write=False)
        self.coeffs = arr
        self.q = q

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.q == other.q and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self) -> int:
        return hash((self.q, self.coeffs.tobytes()))

    def __repr__(self) -> str:
        head = ", ".join(str(int(c)) for c in self.coeffs[:8])
        more = ", ..." if self.n > 8 else ""
        return f"Poly([{head}{more}], q={self.q})"

    def __add__(self, other: "Poly") -> "Poly":
        return Poly(self.coeffs + other.coeffs, self.q)

    def __sub__(self, other: "Poly") -> "Poly":
        return Poly(self.coeffs - other.coeffs, self.q)

    def __neg__(self) -> "Poly":
        return Poly(-self.coeffs, self.q)

    def __mul__(self, other: "Poly") -> "Poly":
        return Poly(ring.mul(self.coeffs, other.coeffs, self.q), self.q)

    def scale(self, k: int) -> "Poly":
        return Poly(self.coeffs * k, self.q)

    def centered(self) -> np.ndarray:
        return ring.centered(self.coeffs, self.q)

    def to_list(self) -> list[int]:
        return [int(c) for c in self.coeffs]


@dataclass(frozen=True, eq=True)
class RlwePublicKey:
    params: RlweParams
    a: Poly
    b: Poly


@dataclass(frozen=True, eq=True)
class RlweSecretKey:
    params: RlweParams
    s: Poly


@dataclass(frozen=True, eq=True)
class RlweKeyPair:
    public: RlwePublicKey
    secret: RlweSecretKey

    @property
    def params(self) -> RlweParams:
        return self.public.params


@dataclass(frozen=True, eq=True)
class RlweCiphertext:
    params: RlweParams
    u: Poly
    v: Poly


def _small(prng: Prng, params: RlweParams) -> Poly:
    return Poly(prng.centered_binomial(params.eta, params.n), params.q)


def keygen(params: RlweParams, prng: Prng) -> RlweKeyPair:
    """Draws, in order: ``a`` uniform, then ``s`` and ``e`` centered binomial."""
    params.check_registered()
    a = Poly(prng.below_array(params.q, params.n), params.q)
    s = _small(prng, params)
    e = _small(prng, params)
    b = a * s + e
    return RlweKeyPair(RlwePublicKey(params, a, b), RlweSecretKey(params, s))


def _check_same(params: RlweParams, *others: RlweParams) -> None:
    for other in others:
        if (other.n, other.q, other.eta) != (params.n, params.q, params.eta):
            raise ParamMismatch(f"{other} does not match {params}")


def _mul_rows(rows: np.ndarray, *polys: Poly, params: RlweParams) -> list[np.ndarray]:
    """Multiply each row of ``rows`` by each of ``polys`` in the ring."""
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, params.n)
    return ring.mul_rows(rows, [p.coeffs for p in polys], params.q)


def encrypt_rows(public_key: RlwePublicKey, params: RlweParams, messages, prng: Prng) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`encrypt_batch`: returns the stacked ``u`` and ``v`` rows."""
    _check_same(params, public_key.params)
    m = np.asarray(messages, dtype=np.int64)
    if m.ndim != 2 or m.shape[1] != params.n:
        raise MessageLengthMismatch(f"messages must be {params.n} bits long, got shape {m.shape}")
    if np.any((m != 0) & (m != 1)):
        raise ValueError("message must be a 0/1 vector")
    count = m.shape[0]
    noise = prng.centered_binomial(params.eta, params.n, rows=3 * count).reshape(count, 3, params.n)
    r, e1, e2 = noise[:, 0], noise[:, 1], noise[:, 2]
    ar, br = _mul_rows(r, public_key.a, public_key.b, params=params)
    u = (ar + e1) % params.q
    v = (br + e2 + m * params.half_q) % params.q
    return u, v


def encrypt_batch(public_key: RlwePublicKey, params: RlweParams, messages, prng: Prng) -> list[RlweCiphertext]:
    """Encrypt several n-bit messages; noise is drawn per message, in order.

    Equivalent to calling :func:`encrypt` on each message in turn with the
    same stream.
    """
    u, v = encrypt_rows(public_key, params, messages, prng)
    return [RlweCiphertext(params, Poly(u[i], params.q), Poly(v[i], params.q)) for i in range(u.shape[0])]


def encrypt(public_key: RlwePublicKey, params: RlweParams, message: Sequence[int], prng: Prng) -> RlweCiphertext:
    """Encrypt an n-bit message; draws ``r``, ``e1``, ``e2`` in that order."""
    m = np.asarray(message, dtype=np.int64)
    if m.shape != (params.n,):
        raise MessageLengthMismatch(f"message has {m.size} bits, expected {params.n}")
    return encrypt_batch(public_key, params, m[None, :], prng)[0]


def decode(d: Poly) -> np.ndarray:
    """Bit i is one iff |d_i - floor(q/2)| < q/4, distances taken mod q."""
    q = d.q
    dist = np.abs(ring.centered(d.coeffs - q // 2, q))
    return (4 * dist < q).astype(np.int64)


def decrypt(secret_key: RlweSecretKey, params: RlweParams, ciphertext: RlweCiphertext) -> np.ndarray:
    _check_same(params, secret_key.params, ciphertext.params)
    return decode(ciphertext.v - ciphertext.u * secret_key.s)


def decrypt_batch(secret_key: RlweSecretKey, params: RlweParams, u_rows: np.ndarray, v_rows: np.ndarray) -> np.ndarray:
    """Decrypt stacked ciphertext components; returns one bit row per block."""
    _check_same(params, secret_key.params)
    d = (np.asarray(v_rows, dtype=np.int64) - _mul_rows(np.asarray(u_rows, dtype=np.int64), secret_key.s, params=params)[0])
    dist = np.abs(ring.centered(d - params.half_q, params.q))
    return (4 * dist < params.q).astype(np.int64)


def keypair_to_dict(keypair: RlweKeyPair, *, include_secret: bool = True) -> dict:
    params = keypair.params
    out = {"params": params.name, "a": keypair.public.a.to_list(), "b": keypair.public.b.to_list()}
    if include_secret:
        out["s"] = keypair.secret.s.to_list()
    return out


def keys_from_dict(obj: dict) -> tuple[RlwePublicKey, Optional[RlweSecretKey]]:
    """Read keys written by :func:`keypair_to_dict`; the secret part is optional."""
    params = get_params(obj["params"])
    polys = {}
    for name in ("a", "b", "s"):
        if name in obj:
            coeffs = obj[name]
            if len(coeffs) != params.n or any(not 0 <= int(c) < params.q for c in coeffs):
                raise ValueError(f"key component {name!r} is not a valid ring element")
            polys[name] = Poly(coeffs, params.q)
    public = RlwePublicKey(params, polys["a"], polys["b"])
    secret = RlweSecretKey(params, polys["s"]) if "s" in polys else None
    return public, secret

"""Shared domain vocabulary: findings, severities, categories and the PRNG.

Every simulation in the package draws randomness from :class:`Prng` streams
obtained through :func:`derive_stream`, so a run is fully determined by its
64-bit master seed and the labels of the streams it opens.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import DuplicateId, SchemaError

HASH = hashlib.sha256
U64_MASK = (1 << 64) - 1


class Severity(str, enum.Enum):
    CRITICAL = "CRITICAL"
    HIGH = "HIGH"
    MEDIUM = "MEDIUM"
    LOW = "LOW"

    @property
    def rank(self) -> int:
        return _SEVERITY_RANK[self]

    def __lt__(self, other):
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank < other.rank

    def __le__(self, other):
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank <= other.rank

    def __gt__(self, other):
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank > other.rank

    def __ge__(self, other):
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank >= other.rank


_SEVERITY_RANK = {Severity.LOW: 0, Severity.MEDIUM: 1, Severity.HIGH: 2, Severity.CRITICAL: 3}


class Methodology(str, enum.Enum):
    DAST = "DAST"
    SAST = "SAST"
    IAST = "IAST"
    BLOCKCHAIN = "BLOCKCHAIN"
    QUANTUM = "QUANTUM"
    REDTEAM = "REDTEAM"

    @property
    def report_label(self) -> str:
        """Label used in aggregate tables (DAST and SAST share one row)."""
        return REPORT_LABELS[self]


REPORT_LABELS = {
    Methodology.DAST: "DAST & SAST",
    Methodology.SAST: "DAST & SAST",
    Methodology.IAST: "IAST",
    Methodology.BLOCKCHAIN: "Blockchain Logging",
    Methodology.QUANTUM: "Quantum Cryptography",
    Methodology.REDTEAM: "Red Team AI Simulations",
}

SCANNER_METHODOLOGIES = frozenset({Methodology.DAST, Methodology.SAST, Methodology.IAST})


class VulnCategory(str, enum.Enum):
    SQL_INJECTION = "SQL_INJECTION"
    XSS = "XSS"
    CSRF = "CSRF"
    CONFIG_OR_AUTH_OTHER = "CONFIG_OR_AUTH_OTHER"
    INSECURE_CODING = "INSECURE_CODING"
    LOGIC_ERROR = "LOGIC_ERROR"
    BACKDOOR = "BACKDOOR"
    INSECURE_DATA_HANDLING = "INSECURE_DATA_HANDLING"
    ACCESS_CONTROL_WEAKNESS = "ACCESS_CONTROL_WEAKNESS"
    ENCRYPTION_FLAW = "ENCRYPTION_FLAW"
    ADVERSARIAL_ML = "ADVERSARIAL_ML"
    PHISHING_SUSCEPTIBILITY = "PHISHING_SUSCEPTIBILITY"
    QUANTUM_DECRYPTION_RISK = "QUANTUM_DECRYPTION_RISK"
    OTHER = "OTHER"


class Status(str, enum.Enum):
    OPEN = "OPEN"
    RESOLVED = "RESOLVED"


# Scanner severity counts line up position-for-position with the category
# counts reported for each tool, which pins this table down.
_SEVERITY_BY_CATEGORY = {
    VulnCategory.SQL_INJECTION: Severity.CRITICAL,
    VulnCategory.XSS: Severity.HIGH,
    VulnCategory.CSRF: Severity.MEDIUM,
    VulnCategory.CONFIG_OR_AUTH_OTHER: Severity.LOW,
    VulnCategory.INSECURE_CODING: Severity.CRITICAL,
    VulnCategory.LOGIC_ERROR: Severity.HIGH,
    VulnCategory.BACKDOOR: Severity.MEDIUM,
    VulnCategory.INSECURE_DATA_HANDLING: Severity.CRITICAL,
    VulnCategory.ACCESS_CONTROL_WEAKNESS: Severity.HIGH,
    VulnCategory.ENCRYPTION_FLAW: Severity.MEDIUM,
    VulnCategory.ADVERSARIAL_ML: Severity.HIGH,
    VulnCategory.PHISHING_SUSCEPTIBILITY: Severity.HIGH,
    VulnCategory.QUANTUM_DECRYPTION_RISK: Severity.CRITICAL,
    VulnCategory.OTHER: Severity.LOW,
}


def severity_for(category: VulnCategory) -> Severity:
    return _SEVERITY_BY_CATEGORY[VulnCategory(category)]


# ---------------------------------------------------------------------------
# PRNG
# ---------------------------------------------------------------------------


class Prng:
    """A seeded PCG64 stream keyed by ``(master_seed, stream_label)``.

    The 256-bit SHA-256 digest of ``master_seed (8 bytes BE) || stream_label``
    becomes the 128-bit PCG64 state and 128-bit increment. Only the raw
    64-bit output of the bit generator is used; all derived variates are
    computed here so the sequences do not depend on numpy's distribution code.
    """

    def __init__(self, master_seed: int, stream_label: bytes = b""):
        if not 0 <= master_seed <= U64_MASK:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if isinstance(stream_label, str):
            stream_label = stream_label.encode("utf-8")
        self.master_seed = master_seed
        self.stream_label = bytes(stream_label)
        digest = HASH(master_seed.to_bytes(8, "big") + self.stream_label).digest()
        self._bitgen = np.random.PCG64()
        self._bitgen.state = {
            "bit_generator": "PCG64",
            "state": {
                "state": int.from_bytes(digest[:16], "big"),
                "inc": int.from_bytes(digest[16:], "big") | 1,
            },
            "has_uint32": 0,
            "uinteger": 0,
        }

    def __repr__(self) -> str:
        return f"Prng(master_seed={self.master_seed}, stream_label={self.stream_label!r})"

    def derive(self, label: str | bytes) -> "Prng":
        """Open an independent child stream named ``<this label>/<label>``."""
        if isinstance(label, str):
            label = label.encode("utf-8")
        child = self.stream_label + b"/" + label if self.stream_label else label
        return Prng(self.master_seed, child)

    def next_u64(self) -> int:
        return int(self._bitgen.random_raw())

    def u64_array(self, count: int) -> np.ndarray:
        return np.asarray(self._bitgen.random_raw(count), dtype=np.uint64)

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniforms(self, count: int) -> np.ndarray:
        raw = self.u64_array(count) >> np.uint64(11)
        return raw.astype(np.float64) * (1.0 / 9007199254740992.0)

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = ((1 << 64) // bound) * bound
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def below_array(self, bound: int, count: int) -> np.ndarray:
        return np.array([self.below(bound) for _ in range(count)], dtype=np.int64)

    def integer(self, low: int, high: int) -> int:
        """Integer in the closed range [low, high]."""
        return low + self.below(high - low + 1)

    def bits(self, count: int) -> np.ndarray:
        """``count`` unbiased bits, most significant bit of each word first."""
        words = self.u64_array((count + 63) // 64)
        as_bytes = words.astype(">u8").tobytes()
        return np.unpackbits(np.frombuffer(as_bytes, dtype=np.uint8))[:count].astype(np.int64)

    def centered_binomial(self, eta: int, count: int, rows: Optional[int] = None) -> np.ndarray:
        """Sum of ``eta`` bits minus sum of ``eta`` bits, per coefficient.

        With ``rows`` set, returns a ``(rows, count)`` array identical to
        ``rows`` consecutive single calls.
        """
        single = rows is None
        rows = 1 if single else rows
        if eta == 0:
            out = np.zeros((rows, count), dtype=np.int64)
        else:
            nbits = 2 * eta * count
            per_row = (nbits + 63) // 64
            words = self.u64_array(rows * per_row).astype(">u8").reshape(rows, per_row)
            raw = np.frombuffer(words.tobytes(), dtype=np.uint8).reshape(rows, per_row * 8)
            b = np.unpackbits(raw, axis=1)[:, :nbits].astype(np.int64).reshape(rows, count, 2 * eta)
            out = b[:, :, :eta].sum(axis=2) - b[:, :, eta:].sum(axis=2)
        return out[0] if single else out

    def exponential(self, mean: float) -> float:
        if mean == 0:
            return 0.0
        return -mean * math.log1p(-self.uniform())


def derive_stream(master_seed: int, stream_label: bytes | str) -> Prng:
    return Prng(master_seed, stream_label)


# ---------------------------------------------------------------------------
# Findings
# ---------------------------------------------------------------------------


def finding_id(methodology: Methodology, sequence: int, master_seed: int, stream_label: bytes = b"") -> str:
    """128-bit hex identifier, stable for a given (methodology, seq, seed, stream)."""
    h = HASH()
    h.update(Methodology(methodology).value.encode())
    h.update(sequence.to_bytes(8, "big"))
    h.update(master_seed.to_bytes(8, "big"))
    h.update(stream_label)
    return h.hexdigest()[:32]


@dataclass(frozen=True)
class Finding:
    id: str
    methodology: Methodology
    category: VulnCategory
    severity: Severity
    target: str
    detected_at: int
    resolved_at: Optional[int] = None
    status: Status = Status.OPEN

    def __post_init__(self):
        if (self.status is Status.RESOLVED) != (self.resolved_at is not None):
            raise ValueError("status RESOLVED iff resolved_at is set")
        if self.detected_at < 0:
            raise ValueError("detected_at must be non-negative")
        if self.resolved_at is not None and self.resolved_at < self.detected_at:
            raise ValueError("resolved_at precedes detected_at")

    @property
    def is_open(self) -> bool:
        return self.status is Status.OPEN

    def resolve(self, day: int) -> "Finding":
        return replace(self, resolved_at=day, status=Status.RESOLVED)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "methodology": self.methodology.value,
            "category": self.category.value,
            "severity": self.severity.value,
            "target": self.target,
            "detected_at": self.detected_at,
            "resolved_at": self.resolved_at,
            "status": self.status.value,
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_dict(cls, obj: dict, *, strict_category: bool = True) -> "Finding":
        """Parse one Finding object; raises :class:`SchemaError` on bad fields.

        With ``strict_category=False`` an unknown category string becomes
        ``OTHER`` instead of an error.
        """
        if not isinstance(obj, dict):
            raise SchemaError("<finding>", "finding is not an object")
        for name in ("id", "methodology", "category", "severity", "target", "detected_at", "status"):
            if name not in obj:
                raise SchemaError(name)
        fid = obj["id"]
        if not isinstance(fid, str) or not fid:
            raise SchemaError("id")
        try:
            int(fid, 16)
        except ValueError:
            raise SchemaError("id", "id is not a hex string") from None
        try:
            methodology = Methodology(obj["methodology"])
        except ValueError:
            raise SchemaError("methodology") from None
        try:
            category = VulnCategory(obj["category"])
        except ValueError:
            if strict_category:
                raise SchemaError("category") from None
            category = VulnCategory.OTHER
        try:
            severity = Severity(obj["severity"])
        except ValueError:
            raise SchemaError("severity") from None
        try:
            status = Status(obj["status"])
        except ValueError:
            raise SchemaError("status") from None
        if not isinstance(obj["target"], str):
            raise SchemaError("target")
        detected = obj["detected_at"]
        if not _is_int(detected) or detected < 0:
            raise SchemaError("detected_at")
        resolved = obj.get("resolved_at")
        if resolved is not None and (not _is_int(resolved) or resolved < detected):
            raise SchemaError("resolved_at")
        if (status is Status.RESOLVED) != (resolved is not None):
            raise SchemaError("status", "status disagrees with resolved_at")
        return cls(fid, methodology, category, severity, obj["target"], detected, resolved, status)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


@dataclass(frozen=True)
class FindingSet:
    """Ordered, id-unique collection of findings."""

    findings: tuple[Finding, ...] = ()
    provenance: str = ""
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        findings = tuple(self.findings)
        object.__setattr__(self, "findings", findings)
        index = {}
        for pos, f in enumerate(findings):
            if f.id in index:
                raise DuplicateId(f.id)
            index[f.id] = pos
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.findings)

    def __iter__(self) -> Iterator[Finding]:
        return iter(self.findings)

    def __contains__(self, finding_id: str) -> bool:
        return finding_id in self._index

    def get(self, finding_id: str) -> Finding:
        return self.findings[self._index[finding_id]]

    def filter(self, predicate) -> "FindingSet":
        return FindingSet(tuple(f for f in self.findings if predicate(f)), self.provenance)

    def of_methodology(self, *methodologies: Methodology) -> "FindingSet":
        wanted = set(methodologies)
        return self.filter(lambda f: f.methodology in wanted)

    def of_category(self, category: VulnCategory) -> "FindingSet":
        return self.filter(lambda f: f.category is category)

    def categories(self) -> list[VulnCategory]:
        """Distinct categories in order of first appearance."""
        return list(dict.fromkeys(f.category for f in self.findings))

    def with_updates(self, updated: Iterable[Finding]) -> "FindingSet":
        """Replace findings by id, keeping positions."""
        items = list(self.findings)
        for f in updated:
            items[self._index[f.id]] = f
        return FindingSet(tuple(items), self.provenance)

    def to_list(self) -> list[dict]:
        return [f.to_dict() for f in self.findings]

    def to_json(self) -> bytes:
        return json.dumps(self.to_list(), separators=(",", ":")).encode("utf-8")

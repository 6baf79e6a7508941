"""Append-only, hash-chained audit ledger.

Each entry's hash covers a fixed binary layout::

    index (8 B, BE) | timestamp (8 B, BE) | event_type (1 B) |
    payload_encrypted (1 B) | len(payload) (4 B, BE) | payload | prev_hash

hashed with SHA-256. Entry 0 links to 32 zero bytes.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .core import HASH
from .errors import NonMonotoneTimestamp, ParseError, SchemaError

GENESIS_HASH = bytes(32)


class EventType(enum.IntEnum):
    VULNERABILITY_DETECTION = 0
    REMEDIATION_ACTION = 1
    SYSTEM_CHANGE = 2


@dataclass(frozen=True)
class LedgerEntry:
    index: int
    timestamp: int
    event_type: EventType
    payload: bytes
    payload_encrypted: bool
    prev_hash: bytes
    entry_hash: bytes

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "timestamp": self.timestamp,
            "event_type": EventType(self.event_type).name,
            "payload_encrypted": bool(self.payload_encrypted),
            "payload_hex": self.payload.hex(),
            "prev_hash_hex": self.prev_hash.hex(),
            "entry_hash_hex": self.entry_hash.hex(),
        }


def canonical_bytes(index: int, timestamp: int, event_type: int, payload_encrypted: Union[bool, int],
                    payload: bytes, prev_hash: bytes) -> bytes:
    # Tampered entries may carry out-of-range values; mask so they still serialize.
    return (
        struct.pack(
            ">QQBBI",
            index & 0xFFFFFFFFFFFFFFFF,
            timestamp & 0xFFFFFFFFFFFFFFFF,
            int(event_type) & 0xFF,
            int(payload_encrypted) & 0xFF,
            len(payload),
        )
        + payload
        + prev_hash
    )


def entry_digest(entry: LedgerEntry) -> bytes:
    return HASH(
        canonical_bytes(entry.index, entry.timestamp, entry.event_type, entry.payload_encrypted,
                        entry.payload, entry.prev_hash)
    ).digest()


class ViolationKind(str, enum.Enum):
    HASH_MISMATCH = "HashMismatch"
    LINK_MISMATCH = "LinkMismatch"
    INDEX_GAP = "IndexGap"


@dataclass(frozen=True)
class Violation:
    index: int
    kind: ViolationKind

    def __str__(self) -> str:
        return f"Violation(index={self.index}, kind={self.kind.value})"


class _Valid:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "VALID"

    __str__ = __repr__


VALID = _Valid()
VerificationOutcome = Union[_Valid, Violation]


class Ledger:
    """Single-writer chain of :class:`LedgerEntry` records."""

    def __init__(self, entries: Iterable[LedgerEntry] = ()):
        self.entries: list[LedgerEntry] = list(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __eq__(self, other):
        return isinstance(other, Ledger) and self.entries == other.entries

    @property
    def head_hash(self) -> bytes:
        return self.entries[-1].entry_hash if self.entries else GENESIS_HASH

    def append(self, timestamp: int, event_type: EventType, payload: bytes,
               payload_encrypted: bool = False) -> LedgerEntry:
        if self.entries and timestamp < self.entries[-1].timestamp:
            raise NonMonotoneTimestamp(
                f"timestamp {timestamp} precedes previous entry's {self.entries[-1].timestamp}"
            )
        if timestamp < 0:
            raise NonMonotoneTimestamp("timestamp must be a non-negative day index")
        index = len(self.entries)
        prev = self.head_hash
        event_type = EventType(event_type)
        payload = bytes(payload)
        digest = HASH(canonical_bytes(index, timestamp, event_type, payload_encrypted, payload, prev)).digest()
        entry = LedgerEntry(index, timestamp, event_type, payload, bool(payload_encrypted), prev, digest)
        self.entries.append(entry)
        return entry


def append(ledger: Ledger, timestamp: int, event_type: EventType, payload: bytes,
           payload_encrypted: bool = False) -> LedgerEntry:
    return ledger.append(timestamp, event_type, payload, payload_encrypted)


def verify_chain(ledger: Ledger) -> VerificationOutcome:
    """Return ``VALID`` or the :class:`Violation` at the smallest bad index.

    Within one entry the checks run index, then link, then hash.
    """
    prev = GENESIS_HASH
    for i, entry in enumerate(ledger.entries):
        if entry.index != i:
            return Violation(i, ViolationKind.INDEX_GAP)
        if entry.prev_hash != prev:
            return Violation(i, ViolationKind.LINK_MISMATCH)
        if entry_digest(entry) != entry.entry_hash:
            return Violation(i, ViolationKind.HASH_MISMATCH)
        prev = entry.entry_hash
    return VALID


def summarize_events(ledger: Ledger) -> dict[EventType, int]:
    counts = {t: 0 for t in EventType}
    for entry in ledger.entries:
        counts[EventType(entry.event_type)] += 1
    return counts


def export_audit(ledger: Ledger) -> bytes:
    """JSON-lines export, one entry per line; empty ledger gives ``b""``."""
    lines = [json.dumps(e.to_dict(), separators=(",", ":")) for e in ledger.entries]
    return "".join(line + "\n" for line in lines).encode("utf-8")


_EXPORT_FIELDS = ("index", "timestamp", "event_type", "payload_encrypted",
                  "payload_hex", "prev_hash_hex", "entry_hash_hex")


def import_audit(document: bytes | str) -> Ledger:
    """Inverse of :func:`export_audit`. Does not verify the chain."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    entries = []
    offset = 0
    for line in document.splitlines(keepends=True):
        stripped = line.strip()
        if stripped:
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ParseError(offset + exc.pos, exc.msg) from None
            entries.append(_entry_from_dict(obj))
        offset += len(line)
    return Ledger(entries)


def _entry_from_dict(obj: dict) -> LedgerEntry:
    if not isinstance(obj, dict):
        raise SchemaError("<entry>", "ledger line is not an object")
    for name in _EXPORT_FIELDS:
        if name not in obj:
            raise SchemaError(name)
    try:
        event_type = EventType[obj["event_type"]]
    except KeyError:
        raise SchemaError("event_type") from None
    try:
        payload = bytes.fromhex(obj["payload_hex"])
        prev_hash = bytes.fromhex(obj["prev_hash_hex"])
        entry_hash = bytes.fromhex(obj["entry_hash_hex"])
    except (TypeError, ValueError) as exc:
        raise SchemaError("hex", str(exc)) from None
    if len(prev_hash) != 32 or len(entry_hash) != 32:
        raise SchemaError("hash", "hashes must be 32 bytes")
    return LedgerEntry(int(obj["index"]), int(obj["timestamp"]), event_type, payload,
                       bool(obj["payload_encrypted"]), prev_hash, entry_hash)


def load(path) -> Ledger:
    with open(path, "rb") as fh:
        return import_audit(fh.read())


def save(ledger: Ledger, path) -> None:
    with open(path, "wb") as fh:
        fh.write(export_audit(ledger))


# ---------------------------------------------------------------------------
# Six-month logging scenario: 200 detections, 150 remediations, 150 changes
# ---------------------------------------------------------------------------

SCENARIO_DAYS = 180
SCENARIO_BATCHES = 75


def paper_logging_scenario(detections: int = 200, remediations: int = 150,
                           system_changes: int = 150, days: int = SCENARIO_DAYS,
                           payload_encoder: Optional[callable] = None) -> Ledger:
    """Build the deterministic audit trail of the six-month logging run.

    Events are grouped in batches, one per pair of phase-boundary system
    changes (``system_changes`` must be even). Inside a batch the
    detection/remediation pairs come first, then any unpaired detections;
    each batch is opened and closed by a system-change entry. Detections and
    remediations are spread as evenly as possible over the batches, with the
    remainders given to the earliest ones.

    ``payload_encoder(event_type, payload) -> (bytes, encrypted)`` may wrap
    the plaintext JSON payloads, e.g. to encrypt them.
    """
    if system_changes % 2:
        raise ValueError("system_changes must be even (open + close per batch)")
    if remediations > detections:
        raise ValueError("cannot remediate more events than were detected")
    batches = system_changes // 2
    ledger = Ledger()

    def put(day, etype, body):
        raw = json.dumps(body, separators=(",", ":"), sort_keys=True).encode("utf-8")
        enc = False
        if payload_encoder is not None and etype is not EventType.SYSTEM_CHANGE:
            raw, enc = payload_encoder(etype, raw)
        ledger.append(day, etype, raw, enc)

    det_seq = 0
    for b in range(batches):
        n_det = detections // batches + (1 if b < detections % batches else 0)
        n_rem = remediations // batches + (1 if b < remediations % batches else 0)
        day = (b * days) // batches
        put(day, EventType.SYSTEM_CHANGE, {"batch": b, "change": "phase-open"})
        for k in range(n_det):
            vid = det_seq
            det_seq += 1
            put(day, EventType.VULNERABILITY_DETECTION, {"batch": b, "event": "detected", "vuln": vid})
            if k < n_rem:
                put(day, EventType.REMEDIATION_ACTION, {"batch": b, "event": "remediated", "vuln": vid})
        put(day, EventType.SYSTEM_CHANGE, {"batch": b, "change": "phase-close"})
    return ledger

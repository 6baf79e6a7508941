"""Deterministic DAST/SAST/IAST simulators and findings-report ingestion."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Mapping

from .core import (
    SCANNER_METHODOLOGIES,
    Finding,
    FindingSet,
    Methodology,
    Prng,
    VulnCategory,
    finding_id,
    severity_for,
)
from .errors import DuplicateId, ParseError, SchemaError, UnsupportedMethodology

log = logging.getLogger(__name__)

REPORT_SUFFIX = ".findings.json"


@dataclass(frozen=True)
class ScanProfile:
    methodology: Methodology
    category_counts: Mapping[VulnCategory, int]
    detection_window_days: int

    def __post_init__(self):
        if self.methodology not in SCANNER_METHODOLOGIES:
            raise UnsupportedMethodology(f"{self.methodology} is not a scanner methodology")
        counts = {VulnCategory(k): int(v) for k, v in dict(self.category_counts).items()}
        if any(v < 0 for v in counts.values()):
            raise ValueError("category counts must be non-negative")
        if sum(counts.values()) == 0:
            raise ValueError("profile must emit at least one finding")
        if self.detection_window_days <= 0:
            raise ValueError("detection_window_days must be positive")
        object.__setattr__(self, "category_counts", counts)

    @property
    def total(self) -> int:
        return sum(self.category_counts.values())

    def to_dict(self) -> dict:
        return {
            "methodology": self.methodology.value,
            "category_counts": {k.value: v for k, v in self.category_counts.items()},
            "detection_window_days": self.detection_window_days,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ScanProfile":
        return cls(
            Methodology(obj["methodology"]),
            {VulnCategory(k): v for k, v in obj["category_counts"].items()},
            int(obj["detection_window_days"]),
        )


_PAPER_PROFILES = {
    Methodology.DAST: (
        {
            VulnCategory.SQL_INJECTION: 10,
            VulnCategory.XSS: 15,
            VulnCategory.CSRF: 8,
            VulnCategory.CONFIG_OR_AUTH_OTHER: 20,
        },
        30,
    ),
    Methodology.SAST: (
        {
            VulnCategory.INSECURE_CODING: 30,
            VulnCategory.LOGIC_ERROR: 20,
            VulnCategory.BACKDOOR: 62,
        },
        30,
    ),
    Methodology.IAST: (
        {
            VulnCategory.INSECURE_DATA_HANDLING: 25,
            VulnCategory.ACCESS_CONTROL_WEAKNESS: 18,
            VulnCategory.ENCRYPTION_FLAW: 44,
        },
        180,
    ),
}

_TARGET_KIND = {
    Methodology.DAST: "endpoint",
    Methodology.SAST: "source",
    Methodology.IAST: "component",
}


def paper_profile(methodology: Methodology) -> ScanProfile:
    try:
        counts, window = _PAPER_PROFILES[Methodology(methodology)]
    except (KeyError, ValueError):
        raise UnsupportedMethodology(f"no scanner profile for {methodology}") from None
    return ScanProfile(Methodology(methodology), dict(counts), window)


def simulate_findings(
    methodology: Methodology,
    category_counts: Mapping[VulnCategory, int],
    window_days: int,
    prng: Prng,
    *,
    day_offset: int = 0,
) -> FindingSet:
    """Emit exactly ``category_counts`` findings with uniform detection days.

    Categories are emitted in mapping order. This is the shared engine behind
    :func:`simulate_scan`; it also accepts non-scanner methodologies so that
    seeded supplementary findings can reuse it.
    """
    kind = _TARGET_KIND.get(methodology, "asset")
    findings = []
    seq = 0
    for category, count in category_counts.items():
        category = VulnCategory(category)
        for _ in range(count):
            day = prng.below(window_days)
            findings.append(
                Finding(
                    id=finding_id(methodology, seq, prng.master_seed, prng.stream_label),
                    methodology=methodology,
                    category=category,
                    severity=severity_for(category),
                    target=f"app-{seq % 5 + 1}/{kind}/{seq:04d}",
                    detected_at=day_offset + day,
                )
            )
            seq += 1
    return FindingSet(tuple(findings), f"simulated:{methodology.value}")


def simulate_scan(profile: ScanProfile, prng: Prng, *, day_offset: int = 0) -> FindingSet:
    return simulate_findings(
        profile.methodology,
        profile.category_counts,
        profile.detection_window_days,
        prng,
        day_offset=day_offset,
    )


def ingest_report(document: bytes | str) -> FindingSet:
    """Parse a JSON array of Finding objects.

    Unknown category strings degrade to ``OTHER``; the number of such
    substitutions is recorded in the provenance label.
    """
    if isinstance(document, bytes):
        try:
            text = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(exc.start, "invalid UTF-8") from None
    else:
        text = document
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.pos, exc.msg) from None
    if not isinstance(data, list):
        raise SchemaError("<root>", "report must be a JSON array")

    findings = []
    seen = set()
    unknown = 0
    for obj in data:
        f = Finding.from_dict(obj, strict_category=False)
        if f.category is VulnCategory.OTHER and obj.get("category") != VulnCategory.OTHER.value:
            unknown += 1
        if f.id in seen:
            raise DuplicateId(f.id)
        seen.add(f.id)
        findings.append(f)
    if unknown:
        log.warning("%d findings had unknown categories and were mapped to OTHER", unknown)
    return FindingSet(tuple(findings), f"ingested (unknown_categories={unknown})")


def merge(sets: list[FindingSet]) -> FindingSet:
    findings = []
    for s in sets:
        findings.extend(s.findings)
    label = "+".join(s.provenance for s in sets if s.provenance)
    return FindingSet(tuple(findings), label)

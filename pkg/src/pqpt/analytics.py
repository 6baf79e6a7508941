"""Aggregate tables: severity summaries, resolution and SLA rates, cost model.

Money is held as :class:`~decimal.Decimal` rounded to cents; per-unit costs
and efficiencies are exact :class:`~fractions.Fraction` values and are only
rounded when rendered.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import warnings
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .core import REPORT_LABELS, FindingSet, Methodology, Severity, VulnCategory
from .errors import EmptySet, NoSuchCategoryInSet

CENT = Decimal("0.01")
COST_CSV_HEADER = ("methodology", "total_cost", "cost_per_detected", "cost_per_resolved", "efficiency")
SEVERITY_CSV_HEADER = ("methodology", "total", "critical", "high", "medium", "low")
UNDEFINED = "undefined"

# Deployment counts per protection surface; carried as constants only.
QUANTUM_IMPLEMENTATIONS = {"database_encryption": 120, "secure_channels": 80, "user_authentication": 60}


class ReportFormat(str, enum.Enum):
    CSV = "csv"
    JSON = "json"


def _money(value) -> Decimal:
    return Decimal(str(value)).quantize(CENT, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class CostRecord:
    methodology_label: str
    setup_cost: Decimal
    monthly_op_cost: Decimal
    months: int
    remediation_cost: Decimal
    detected: int
    resolved: int
    avg_days_to_resolve: Fraction

    def __post_init__(self):
        object.__setattr__(self, "setup_cost", _money(self.setup_cost))
        object.__setattr__(self, "monthly_op_cost", _money(self.monthly_op_cost))
        object.__setattr__(self, "remediation_cost", _money(self.remediation_cost))
        object.__setattr__(self, "avg_days_to_resolve", Fraction(str(self.avg_days_to_resolve)))
        if self.months < 1:
            raise ValueError("months must be a positive integer")
        if self.detected < 0 or self.resolved < 0:
            raise ValueError("counts must be non-negative")
        if self.avg_days_to_resolve <= 0:
            raise ValueError("avg_days_to_resolve must be positive")
        if self.resolved > self.detected:
            warnings.warn(
                f"{self.methodology_label}: resolved ({self.resolved}) exceeds detected ({self.detected})",
                stacklevel=3,
            )


@dataclass(frozen=True)
class CostDerived:
    methodology_label: str
    total_cost: Decimal
    cost_per_detected: Optional[Fraction]
    cost_per_resolved: Optional[Fraction]
    efficiency_resolutions_per_day: Fraction

    def to_dict(self) -> dict:
        return {
            "methodology": self.methodology_label,
            "total_cost": float(self.total_cost),
            "cost_per_detected": _opt_float(self.cost_per_detected),
            "cost_per_resolved": _opt_float(self.cost_per_resolved),
            "efficiency": float(self.efficiency_resolutions_per_day),
        }


def _opt_float(x: Optional[Fraction]) -> Optional[float]:
    return None if x is None else float(x)


def derive_costs(record: CostRecord) -> CostDerived:
    total = record.setup_cost + record.months * record.monthly_op_cost + record.remediation_cost
    exact_total = Fraction(total)
    cpd = exact_total / record.detected if record.detected else None
    cpr = exact_total / record.resolved if record.resolved else None
    efficiency = Fraction(record.resolved) / record.avg_days_to_resolve
    return CostDerived(record.methodology_label, total, cpd, cpr, efficiency)


_PAPER_COSTS = (
    ("DAST & SAST", 50000, 10000, 20000, 165, 130, 15),
    ("IAST", 40000, 8000, 15000, 87, 70, 10),
    ("Blockchain Logging", 100000, 15000, 25000, 500, 450, 5),
    ("Quantum Cryptography", 75000, 12000, 30000, 260, 220, 20),
    ("Red Team AI Simulations", 60000, 10000, 18000, 3, 3, 25),
)


def paper_cost_records() -> list[CostRecord]:
    return [
        CostRecord(label, Decimal(setup), Decimal(monthly), 6, Decimal(remediation), detected, resolved,
                   Fraction(days))
        for label, setup, monthly, remediation, detected, resolved, days in _PAPER_COSTS
    ]


# ---------------------------------------------------------------------------
# Severity and resolution statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeveritySummary:
    methodology: str
    total: int
    critical: int
    high: int
    medium: int
    low: int

    def __post_init__(self):
        if self.total != self.critical + self.high + self.medium + self.low:
            raise ValueError("severity counts must add up to the total")

    def to_dict(self) -> dict:
        return {
            "methodology": self.methodology,
            "total": self.total,
            "critical": self.critical,
            "high": self.high,
            "medium": self.medium,
            "low": self.low,
        }


_LABEL_ORDER = list(dict.fromkeys(REPORT_LABELS[m] for m in Methodology))


def severity_summary(sets: Iterable[FindingSet]) -> list[SeveritySummary]:
    counts: dict[str, dict[Severity, int]] = {}
    for s in sets:
        for f in s:
            bucket = counts.setdefault(f.methodology.report_label, {sev: 0 for sev in Severity})
            bucket[f.severity] += 1
    out = []
    for label in _LABEL_ORDER:
        if label in counts:
            c = counts[label]
            out.append(SeveritySummary(label, sum(c.values()), c[Severity.CRITICAL], c[Severity.HIGH],
                                       c[Severity.MEDIUM], c[Severity.LOW]))
    return out


def resolution_fraction(findings: FindingSet, category: VulnCategory) -> Fraction:
    of_cat = [f for f in findings if f.category is VulnCategory(category)]
    if not of_cat:
        raise NoSuchCategoryInSet(f"no {VulnCategory(category).value} findings in set")
    return Fraction(sum(1 for f in of_cat if not f.is_open), len(of_cat))


def resolution_rate(findings: FindingSet, category: VulnCategory) -> float:
    return float(resolution_fraction(findings, category))


def resolution_rates(findings: FindingSet) -> dict[VulnCategory, float]:
    return {c: resolution_rate(findings, c) for c in findings.categories()}


def remediation_sla(findings: FindingSet, window_days: int) -> float:
    """Share of all findings resolved within ``window_days`` of detection."""
    if len(findings) == 0:
        raise EmptySet("remediation SLA of an empty set is undefined")
    if window_days <= 0:
        raise ValueError("window_days must be positive")
    on_time = sum(1 for f in findings if f.resolved_at is not None and f.resolved_at - f.detected_at <= window_days)
    return on_time / len(findings)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def fixed6(value) -> str:
    if value is None:
        return UNDEFINED
    if isinstance(value, Fraction):
        value = Decimal(value.numerator) / Decimal(value.denominator)
    return str(Decimal(value).quantize(Decimal("0.000001"), rounding=ROUND_HALF_EVEN))


def format_usd(value) -> str:
    """Two-decimal display form, e.g. ``$787.88``; ``undefined`` for None."""
    if value is None:
        return UNDEFINED
    if isinstance(value, Fraction):
        value = Decimal(value.numerator) / Decimal(value.denominator)
    return f"${Decimal(value).quantize(CENT, rounding=ROUND_HALF_EVEN):,}"


def _csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def cost_csv(derived: Iterable[CostDerived]) -> bytes:
    return _csv(COST_CSV_HEADER, (
        (d.methodology_label, fixed6(d.total_cost), fixed6(d.cost_per_detected),
         fixed6(d.cost_per_resolved), fixed6(d.efficiency_resolutions_per_day))
        for d in derived
    ))


def severity_csv(summaries: Iterable[SeveritySummary]) -> bytes:
    return _csv(SEVERITY_CSV_HEADER, (
        (s.methodology, str(s.total), str(s.critical), str(s.high), str(s.medium), str(s.low))
        for s in summaries
    ))


def report_dict(summaries: Sequence[SeveritySummary], derived: Sequence[CostDerived],
                rates: Mapping[VulnCategory, float], sla: Optional[Mapping] = None) -> dict:
    return {
        "severity_summaries": [s.to_dict() for s in summaries],
        "cost_effectiveness": [d.to_dict() for d in derived],
        "resolution_rates": {VulnCategory(c).value: float(r) for c, r in rates.items()},
        "sla": dict(sla or {}),
    }


def emit_report(summaries: Sequence[SeveritySummary], derived: Sequence[CostDerived],
                rates: Mapping[VulnCategory, float], format: ReportFormat | str,
                sla: Optional[Mapping] = None) -> bytes:
    """Render a report.

    CSV carries the cost-effectiveness table (fixed 6 decimals, ``undefined``
    for per-unit costs over zero counts). JSON carries every section at full
    float precision with ``null`` for undefined values.
    """
    fmt = ReportFormat(format.lower() if isinstance(format, str) else format)
    if fmt is ReportFormat.CSV:
        return cost_csv(derived)
    doc = report_dict(summaries, derived, rates, sla)
    return (json.dumps(doc, indent=2, sort_keys=False) + "\n").encode("utf-8")


def parse_report(document: bytes) -> tuple[list[SeveritySummary], list[dict], dict[VulnCategory, float], dict]:
    """Read back a JSON report produced by :func:`emit_report`."""
    doc = json.loads(document)
    summaries = [SeveritySummary(**s) for s in doc["severity_summaries"]]
    rates = {VulnCategory(k): v for k, v in doc["resolution_rates"].items()}
    return summaries, list(doc["cost_effectiveness"]), rates, dict(doc["sla"])

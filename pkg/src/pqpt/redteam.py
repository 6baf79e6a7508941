"""Monte-Carlo red-team simulation.

Each scenario runs Bernoulli trials at a configured success probability;
every success also gets an exponentially distributed detection delay. Trials
are processed in fixed-size blocks, each with its own sub-stream, so blocks
can be evaluated on worker threads and merged without changing the result.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import Finding, FindingSet, Methodology, Prng, VulnCategory, finding_id, severity_for
from .errors import ParseError, SchemaError

BLOCK_TRIALS = 8192


class AttackType(str, enum.Enum):
    PHISHING = "PHISHING"
    ADVERSARIAL_ML = "ADVERSARIAL_ML"
    QUANTUM_DECRYPTION = "QUANTUM_DECRYPTION"

    @property
    def theoretical(self) -> bool:
        return self is AttackType.QUANTUM_DECRYPTION

    @property
    def category(self) -> VulnCategory:
        return _CATEGORY[self]


_CATEGORY = {
    AttackType.PHISHING: VulnCategory.PHISHING_SUSCEPTIBILITY,
    AttackType.ADVERSARIAL_ML: VulnCategory.ADVERSARIAL_ML,
    AttackType.QUANTUM_DECRYPTION: VulnCategory.QUANTUM_DECRYPTION_RISK,
}


@dataclass(frozen=True)
class ScenarioConfig:
    attack_type: AttackType
    success_prob: float
    trials: int
    mean_detection_delay_days: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "attack_type", AttackType(self.attack_type))
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError("success_prob must lie in [0, 1]")
        if isinstance(self.trials, bool) or int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if self.mean_detection_delay_days < 0:
            raise ValueError("mean_detection_delay_days must be non-negative")

    def to_dict(self) -> dict:
        return {
            "attack_type": self.attack_type.value,
            "success_prob": self.success_prob,
            "trials": self.trials,
            "mean_detection_delay_days": self.mean_detection_delay_days,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioConfig":
        for name in ("attack_type", "success_prob", "trials"):
            if name not in obj:
                raise SchemaError(name)
        try:
            return cls(
                AttackType(obj["attack_type"]),
                float(obj["success_prob"]),
                int(obj["trials"]),
                float(obj.get("mean_detection_delay_days", 1.0)),
            )
        except ValueError as exc:
            raise SchemaError("scenario", str(exc)) from None


def load_scenarios(document: bytes | str) -> list[ScenarioConfig]:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.pos, exc.msg) from None
    if not isinstance(data, list):
        raise SchemaError("<root>", "scenario file must be a JSON array")
    return [ScenarioConfig.from_dict(obj) for obj in data]


def paper_scenarios(trials: int = 10_000) -> list[ScenarioConfig]:
    return [
        ScenarioConfig(AttackType.PHISHING, 0.65, trials),
        ScenarioConfig(AttackType.ADVERSARIAL_ML, 0.40, trials),
        ScenarioConfig(AttackType.QUANTUM_DECRYPTION, 0.0, trials),
    ]


@dataclass(frozen=True)
class ScenarioResult:
    attack_type: AttackType
    trials: int
    successes: int
    mean_detection_delay: Optional[float]
    theoretical_flag: bool

    @property
    def observed_rate(self) -> Fraction:
        return Fraction(self.successes, self.trials)

    def to_dict(self) -> dict:
        return {
            "attack_type": self.attack_type.value,
            "trials": self.trials,
            "successes": self.successes,
            "observed_rate": float(self.observed_rate),
            "mean_detection_delay": self.mean_detection_delay,
            "theoretical_flag": self.theoretical_flag,
        }


@dataclass(frozen=True)
class SimulationReport:
    results: tuple[ScenarioResult, ...]
    master_seed: int = 0
    stream_label: bytes = b""

    def __iter__(self):
        return iter(self.results)

    def for_type(self, attack_type: AttackType) -> ScenarioResult:
        for r in self.results:
            if r.attack_type is AttackType(attack_type):
                return r
        raise KeyError(attack_type)

    def to_dict(self) -> dict:
        return {"scenarios": [r.to_dict() for r in self.results]}

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True).encode("utf-8")


def _run_block(stream: Prng, count: int, p: float, mean_delay: float) -> tuple[int, np.ndarray]:
    hits = stream.uniforms(count) < p
    delay_u = stream.uniforms(count)[hits]
    delays = -mean_delay * np.log1p(-delay_u) if mean_delay else np.zeros(delay_u.size)
    return int(hits.sum()), delays


def run_scenario(config: ScenarioConfig, stream: Prng, workers: int = 1) -> ScenarioResult:
    blocks = []
    start = 0
    b = 0
    while start < config.trials:
        count = min(BLOCK_TRIALS, config.trials - start)
        blocks.append((stream.derive(f"block/{b}"), count))
        start += count
        b += 1

    def job(item):
        sub, count = item
        return _run_block(sub, count, config.success_prob, config.mean_detection_delay_days)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, blocks))
    else:
        outcomes = [job(item) for item in blocks]

    successes = sum(s for s, _ in outcomes)
    # fsum is exactly rounded, so the mean does not depend on block order.
    total_delay = math.fsum(float(x) for _, d in outcomes for x in d)
    mean = total_delay / successes if successes else None
    return ScenarioResult(config.attack_type, config.trials, successes, mean, config.attack_type.theoretical)


def run_simulation(configs: list[ScenarioConfig], prng: Prng, workers: int = 1) -> SimulationReport:
    results = tuple(
        run_scenario(cfg, prng.derive(f"{i}/{cfg.attack_type.value}"), workers)
        for i, cfg in enumerate(configs)
    )
    return SimulationReport(results, prng.master_seed, prng.stream_label)


def attack_findings(report: SimulationReport, *, day: int = 0) -> FindingSet:
    """One finding per attack class that succeeded at least once.

    Theoretical classes (quantum decryption) are never turned into findings.
    """
    findings = []
    seen = set()
    for r in report.results:
        if r.successes == 0 or r.theoretical_flag or r.attack_type in seen:
            continue
        seen.add(r.attack_type)
        seq = list(AttackType).index(r.attack_type)
        category = r.attack_type.category
        findings.append(
            Finding(
                id=finding_id(Methodology.REDTEAM, seq, report.master_seed, report.stream_label),
                methodology=Methodology.REDTEAM,
                category=category,
                severity=severity_for(category),
                target=f"redteam/{r.attack_type.value.lower()}",
                detected_at=day,
            )
        )
    return FindingSet(tuple(findings), "redteam")

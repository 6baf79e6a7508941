import json
import math

import pytest

from pqpt.core import Methodology, Prng, VulnCategory
from pqpt.errors import ParseError, SchemaError
from pqpt.redteam import (
    BLOCK_TRIALS,
    AttackType,
    ScenarioConfig,
    attack_findings,
    load_scenarios,
    paper_scenarios,
    run_scenario,
    run_simulation,
)


def _paper(seed=42):
    return run_simulation(paper_scenarios(), Prng(seed, b"redteam"))


def test_published_rates_near_targets():
    rep = _paper()
    assert abs(float(rep.for_type(AttackType.PHISHING).observed_rate) - 0.65) <= 0.02
    assert abs(float(rep.for_type(AttackType.ADVERSARIAL_ML).observed_rate) - 0.40) <= 0.02
    q = rep.for_type(AttackType.QUANTUM_DECRYPTION)
    assert q.successes == 0 and q.theoretical_flag and q.mean_detection_delay is None


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_rates_within_tolerance_for_other_seeds(seed):
    # 0.02 is more than four standard errors at 10^4 trials
    rep = _paper(seed)
    assert abs(float(rep.for_type(AttackType.PHISHING).observed_rate) - 0.65) <= 0.02


def test_deterministic():
    assert _paper(7).to_json() == _paper(7).to_json()
    assert _paper(7).to_json() != _paper(8).to_json()


def test_parallel_equals_sequential():
    cfg = ScenarioConfig(AttackType.PHISHING, 0.3, 5 * BLOCK_TRIALS + 17, 2.5)
    seq = run_scenario(cfg, Prng(3, b"p"))
    par = run_scenario(cfg, Prng(3, b"p"), workers=4)
    assert seq == par


def test_blocks_use_their_own_streams():
    # a two-block run is the one-block run plus block 1 drawn from "<label>/block/1"
    short = run_scenario(ScenarioConfig(AttackType.PHISHING, 0.5, BLOCK_TRIALS), Prng(1, b"b"))
    long_ = run_scenario(ScenarioConfig(AttackType.PHISHING, 0.5, 2 * BLOCK_TRIALS), Prng(1, b"b"))
    second = Prng(1, b"b/block/1").uniforms(BLOCK_TRIALS) < 0.5
    assert long_.successes == short.successes + int(second.sum())


def test_extreme_probabilities():
    assert run_scenario(ScenarioConfig(AttackType.PHISHING, 1.0, 100), Prng(1)).successes == 100
    assert run_scenario(ScenarioConfig(AttackType.PHISHING, 0.0, 100), Prng(1)).successes == 0


def test_detection_delay_mean():
    r = run_scenario(ScenarioConfig(AttackType.ADVERSARIAL_ML, 1.0, 40_000, 3.0), Prng(2, b"d"))
    assert abs(r.mean_detection_delay - 3.0) < 0.1
    zero = run_scenario(ScenarioConfig(AttackType.ADVERSARIAL_ML, 1.0, 10, 0.0), Prng(2, b"d"))
    assert zero.mean_detection_delay == 0.0


def test_config_validation():
    for bad in (dict(success_prob=1.5), dict(success_prob=-0.1), dict(trials=0), dict(trials=True),
                dict(mean_detection_delay_days=-1)):
        kw = dict(attack_type=AttackType.PHISHING, success_prob=0.5, trials=10)
        kw.update(bad)
        with pytest.raises(ValueError):
            ScenarioConfig(**kw)


def test_load_scenarios():
    doc = json.dumps([c.to_dict() for c in paper_scenarios()])
    assert load_scenarios(doc) == paper_scenarios()
    with pytest.raises(SchemaError):
        load_scenarios('[{"attack_type": "PHISHING", "trials": 3}]')
    with pytest.raises(SchemaError):
        load_scenarios('[{"attack_type": "MALWARE", "success_prob": 0.1, "trials": 3}]')
    with pytest.raises(SchemaError):
        load_scenarios('{"attack_type": "PHISHING"}')
    with pytest.raises(ParseError):
        load_scenarios('[{')


def test_attack_findings():
    rep = _paper()
    fs = attack_findings(rep, day=5)
    assert [f.category for f in fs] == [VulnCategory.PHISHING_SUSCEPTIBILITY, VulnCategory.ADVERSARIAL_ML]
    assert all(f.methodology is Methodology.REDTEAM and f.detected_at == 5 for f in fs)
    assert attack_findings(rep) == attack_findings(rep)


def test_report_dict():
    d = _paper().to_dict()
    assert [s["attack_type"] for s in d["scenarios"]] == ["PHISHING", "ADVERSARIAL_ML", "QUANTUM_DECRYPTION"]
    assert d["scenarios"][2]["theoretical_flag"] is True
    assert math.isclose(d["scenarios"][0]["observed_rate"], d["scenarios"][0]["successes"] / 10_000)

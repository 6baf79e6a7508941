import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import Pcg64Oracle
from pqpt.core import (
    Finding,
    FindingSet,
    Methodology,
    Prng,
    Severity,
    Status,
    VulnCategory,
    derive_stream,
    finding_id,
    severity_for,
)
from pqpt.errors import DuplicateId, SchemaError

# Generated once with the pure-Python PCG64 oracle and frozen.
FROZEN_SEED0 = [13061566032222323095, 8418151934062110300, 11275618805705287189]


def test_raw_stream_matches_oracle():
    p = Prng(42, b"pipeline")
    o = Pcg64Oracle(42, b"pipeline")
    assert [p.next_u64() for _ in range(200)] == [o.next() for _ in range(200)]


def test_raw_stream_frozen_values():
    p = Prng(0, b"")
    assert [p.next_u64() for _ in range(3)] == FROZEN_SEED0


def test_frozen_values_still_agree_with_oracle():
    o = Pcg64Oracle(0, b"")
    assert [o.next() for _ in range(3)] == FROZEN_SEED0


def test_array_draws_equal_scalar_draws():
    a, b = Prng(7, b"s"), Prng(7, b"s")
    assert a.u64_array(50).tolist() == [b.next_u64() for _ in range(50)]
    a, b = Prng(7, b"s"), Prng(7, b"s")
    assert a.uniforms(20).tolist() == [b.uniform() for _ in range(20)]


def test_below_matches_oracle_rejection():
    p, o = Prng(3, b"r"), Pcg64Oracle(3, b"r")
    for bound in (1, 2, 3, 7, 180, 7681, (1 << 63) + 5):
        assert p.below(bound) == o.below(bound)


def test_derive_is_label_concatenation():
    root = Prng(9, b"pipeline")
    child = root.derive("cycle/0")
    assert child.stream_label == b"pipeline/cycle/0"
    assert child.next_u64() == derive_stream(9, "pipeline/cycle/0").next_u64()
    assert Prng(9).derive("x").stream_label == b"x"


def test_streams_with_different_labels_differ():
    assert Prng(1, b"a").next_u64() != Prng(1, b"b").next_u64()
    assert Prng(1, b"a").next_u64() != Prng(2, b"a").next_u64()


def test_seed_range():
    with pytest.raises(ValueError):
        Prng(-1)
    with pytest.raises(ValueError):
        Prng(1 << 64)
    Prng((1 << 64) - 1)


@given(st.integers(0, 3), st.integers(1, 300))
@settings(max_examples=40, deadline=None)
def test_centered_binomial_bounds(eta, n):
    x = Prng(5, b"cbd").centered_binomial(eta, n)
    assert x.shape == (n,)
    assert np.all(np.abs(x) <= eta)


def test_centered_binomial_rows_equal_single_calls():
    a, b = Prng(11, b"n"), Prng(11, b"n")
    rows = a.centered_binomial(2, 256, rows=5)
    assert all(np.array_equal(rows[i], b.centered_binomial(2, 256)) for i in range(5))


def test_centered_binomial_distribution():
    x = Prng(12, b"d").centered_binomial(2, 200_000)
    # eta=2: P(0) = 6/16, variance = eta/2 = 1
    assert abs(np.mean(x == 0) - 6 / 16) < 0.005
    assert abs(np.var(x) - 1.0) < 0.02


def test_bits_are_msb_first_words():
    p, o = Prng(4, b"b"), Pcg64Oracle(4, b"b")
    bits = p.bits(70)
    w0, w1 = o.next(), o.next()
    expected = [int(c) for c in format(w0, "064b") + format(w1, "064b")[:6]]
    assert bits.tolist() == expected


def test_integer_inclusive_range():
    p = Prng(8, b"i")
    draws = {p.integer(3, 5) for _ in range(200)}
    assert draws == {3, 4, 5}


def test_severity_map():
    assert severity_for(VulnCategory.SQL_INJECTION) is Severity.CRITICAL
    assert severity_for(VulnCategory.XSS) is Severity.HIGH
    assert severity_for(VulnCategory.CSRF) is Severity.MEDIUM
    assert severity_for(VulnCategory.CONFIG_OR_AUTH_OTHER) is Severity.LOW
    assert severity_for(VulnCategory.BACKDOOR) is Severity.MEDIUM
    assert severity_for(VulnCategory.ENCRYPTION_FLAW) is Severity.MEDIUM


def test_severity_ordering():
    assert Severity.CRITICAL > Severity.HIGH > Severity.MEDIUM > Severity.LOW
    assert sorted([Severity.LOW, Severity.CRITICAL, Severity.MEDIUM]) == [
        Severity.LOW, Severity.MEDIUM, Severity.CRITICAL]


def test_report_labels_merge_dast_and_sast():
    assert Methodology.DAST.report_label == Methodology.SAST.report_label == "DAST & SAST"
    assert Methodology.IAST.report_label == "IAST"


def test_finding_id_is_stable_hex():
    a = finding_id(Methodology.DAST, 0, 42, b"x")
    assert a == finding_id(Methodology.DAST, 0, 42, b"x")
    assert len(a) == 32 and int(a, 16) >= 0
    assert a != finding_id(Methodology.DAST, 1, 42, b"x")
    assert a != finding_id(Methodology.SAST, 0, 42, b"x")
    assert a != finding_id(Methodology.DAST, 0, 42, b"y")


def _finding(i=0, **kw):
    base = dict(id=f"{i:032x}", methodology=Methodology.DAST, category=VulnCategory.XSS,
                severity=Severity.HIGH, target="app-1/url/0000", detected_at=3)
    base.update(kw)
    return Finding(**base)


def test_finding_invariants():
    with pytest.raises(ValueError):
        _finding(status=Status.RESOLVED)
    with pytest.raises(ValueError):
        _finding(resolved_at=5)
    with pytest.raises(ValueError):
        _finding(resolved_at=2, status=Status.RESOLVED)
    with pytest.raises(ValueError):
        _finding(detected_at=-1)
    f = _finding().resolve(9)
    assert f.status is Status.RESOLVED and f.resolved_at == 9 and not f.is_open


def test_finding_json_round_trip():
    f = _finding().resolve(4)
    assert Finding.from_dict(json.loads(f.to_json())) == f


@pytest.mark.parametrize("field", ["id", "methodology", "category", "severity", "target", "detected_at", "status"])
def test_finding_missing_field(field):
    obj = _finding().to_dict()
    del obj[field]
    with pytest.raises(SchemaError) as exc:
        Finding.from_dict(obj)
    assert exc.value.field == field


def test_finding_bad_values():
    obj = _finding().to_dict()
    for field, bad in (("detected_at", -2), ("detected_at", True), ("severity", "SEVERE"), ("id", "zz"),
                       ("resolved_at", 1)):
        with pytest.raises(SchemaError) as exc:
            Finding.from_dict({**obj, field: bad})
        assert exc.value.field in (field, "status")


def test_unknown_category_lenient():
    obj = {**_finding().to_dict(), "category": "PROTOTYPE_POLLUTION"}
    with pytest.raises(SchemaError):
        Finding.from_dict(obj)
    assert Finding.from_dict(obj, strict_category=False).category is VulnCategory.OTHER


def test_finding_set_rejects_duplicates():
    with pytest.raises(DuplicateId):
        FindingSet((_finding(1), _finding(1)))


def test_finding_set_queries():
    fs = FindingSet((_finding(1), _finding(2, category=VulnCategory.CSRF, severity=Severity.MEDIUM),
                     _finding(3, methodology=Methodology.SAST)))
    assert len(fs) == 3
    assert fs.categories() == [VulnCategory.XSS, VulnCategory.CSRF]
    assert len(fs.of_methodology(Methodology.DAST)) == 2
    assert len(fs.of_category(VulnCategory.XSS)) == 2
    updated = fs.with_updates([fs.get(f"{2:032x}").resolve(10)])
    assert not updated.get(f"{2:032x}").is_open
    assert [f.id for f in updated] == [f.id for f in fs]
    assert fs.get(f"{2:032x}").is_open


@given(st.lists(st.sampled_from(list(VulnCategory)), max_size=30))
@settings(max_examples=30, deadline=None)
def test_finding_set_json_round_trip(cats):
    fs = FindingSet(tuple(_finding(i, category=c, severity=severity_for(c)) for i, c in enumerate(cats)))
    back = [Finding.from_dict(o) for o in json.loads(fs.to_json())]
    assert tuple(back) == fs.findings

import numpy as np
import pytest

from afx.phantom import compute_truth, sample_suite
from afx.phantom.suite import PCT_GUARD, solve_span
from afx.phantom.areas import section_areas
from conftest import SUITE_SEED, SUITE_SIZE


def test_suite_is_deterministic():
    a, b = sample_suite(6, 11), sample_suite(6, 11)
    assert [s.to_json() for s in a] == [s.to_json() for s in b]
    assert [s.name for s in a] == [f"suite-11-{i:03d}" for i in range(6)]
    assert [s.to_json() for s in sample_suite(6, 12)] != [s.to_json() for s in a]


def test_suite_cases_are_distinct_and_valid(suite_specs):
    assert len(suite_specs) == SUITE_SIZE
    assert len({s.to_json() for s in suite_specs}) == SUITE_SIZE
    for spec in suite_specs:
        spec.validate()


def test_suite_coverage(suite_specs):
    truths = [compute_truth(s) for s in suite_specs]
    tlc = [t.min_tlc_pct for t in truths]
    flar = [t.max_flar_pct for t in truths]
    assert min(tlc) < 10.0 and max(tlc) > 85.0
    assert max(flar) > 60.0 and min(flar) < 10.0
    assert any(t.tlc_warning for t in truths) and any(not t.tlc_warning for t in truths)
    assert any(t.flar_risk for t in truths) and any(not t.flar_risk for t in truths)
    assert {len(s.tears) for s in suite_specs} == {0, 1, 2, 3}
    n_branches = {len(s.branches) for s in suite_specs}
    assert min(n_branches) == 0 and max(n_branches) == 5
    assert {s.trajectory.kind for s in suite_specs} == {"straight", "candy-cane"}
    kinds = {b["involvement"] for t in truths for b in t.bvi.values()}
    assert kinds == {"none", "static", "dynamic", "mixed"}
    assert all(t.diameter >= 5.0 for s in suite_specs for t in s.tears)


def test_suite_truth_keeps_clear_of_the_cutoffs(suite_specs):
    for spec in suite_specs:
        t = compute_truth(spec)
        assert abs(t.min_tlc_pct - 10.0) >= PCT_GUARD
        assert abs(t.max_flar_pct - 60.0) >= PCT_GUARD


@pytest.mark.parametrize("target", [5.0, 30.0, 50.0, 90.0])
def test_solve_span_inverts_the_area_model(target):
    w = solve_span(12.0, 0.6, target)
    assert section_areas(12.0, 0.6, np.radians(w)).tlc_pct == pytest.approx(target, abs=1e-6)


def test_n_must_be_positive():
    with pytest.raises(ValueError):
        sample_suite(0)

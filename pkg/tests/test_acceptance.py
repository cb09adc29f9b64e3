"""Acceptance gate: every criterion must pass at its stated tolerance.

One test per criterion; each prints its pass/fail line with the measured
numbers (run with ``pytest -s`` to see them all).
"""

from dpsa import acceptance


def check(result):
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] {result.criterion}: {result.details}")
    assert result.passed, f"{result.criterion}: {result.details}"


def test_criterion_1_p2p_exact():
    check(acceptance.criterion_p2p_exact())


def test_criterion_2_p2p_stochastic():
    check(acceptance.criterion_p2p_stochastic())


def test_criterion_3_exact_consensus_equivalence():
    check(acceptance.criterion_exact_consensus_equivalence())


def test_criterion_4_linear_rate():
    check(acceptance.criterion_linear_rate())


def test_criterion_5_equal_top_eigenvalues():
    check(acceptance.criterion_equal_top_eigenvalues())


def test_criterion_6_consensus_accuracy_bound():
    check(acceptance.criterion_consensus_accuracy_bound())


def test_criterion_7_consensus_rate():
    check(acceptance.criterion_consensus_rate())


def test_criterion_8_straggler_delta():
    check(acceptance.criterion_straggler_delta())


def test_criterion_9_sequential_step_shape():
    check(acceptance.criterion_sequential_step_shape())


def test_criterion_10_property_suites():
    check(acceptance.criterion_property_suites(base_port=58500))


def test_injected_fault_is_reported_by_name(monkeypatch):
    # starving the consensus budget must fail its criterion, by name
    monkeypatch.setattr(acceptance, "CONSENSUS_ROUND_FACTOR", 0.01)
    result = acceptance.criterion_consensus_accuracy_bound()
    assert not result.passed
    assert result.criterion == "consensus-accuracy-bound"

from fractions import Fraction

import numpy as np
import pytest

from cmr.algebra import FieldSpec
from cmr.errors import ParameterError, VerificationError
from cmr.rlnc import rlnc_init, rlnc_repair_round, rlnc_stress


def test_init_sizes(rng):
    state = rlnc_init(8, 4, 5, 2, rng=rng)
    assert (state.alpha, state.M, state.beta) == (3, 12, 2)
    assert len(state.nodes) == 8
    assert state.nodes[0].shape == (3, 12)
    assert state.collection_failures() == []
    small = rlnc_init(4, 2, 2, 2, rng=rng)
    assert (small.alpha, small.M) == (2, 4)


@pytest.mark.parametrize("params", [(4, 4, 4, 1), (6, 4, 3, 1), (6, 2, 3, 0)])
def test_init_preconditions(params, rng):
    with pytest.raises(ParameterError):
        rlnc_init(*params, rng=rng)


def test_init_gives_up_on_tiny_field(rng):
    with pytest.raises(VerificationError, match="too small"):
        rlnc_init(8, 4, 5, 2, field=FieldSpec.prime(2), rng=rng, retries=2)


def test_repair_round_ledger(rng):
    state = rlnc_init(8, 4, 5, 2, rng=rng)
    before = [node.copy() for node in state.nodes]
    rlnc_repair_round(state, [0, 1], [2, 3, 4, 5, 6], rng)
    rlnc_repair_round(state, [6, 7], [0, 1, 2, 3, 4], rng)
    assert state.round == 2
    assert state.ledger == [10, 10]
    assert np.array_equal(state.nodes[5], before[5])
    assert not np.array_equal(state.nodes[0], before[0])


def test_repair_round_rejects_bad_sets(rng):
    state = rlnc_init(8, 4, 5, 2, rng=rng)
    with pytest.raises(ParameterError):
        rlnc_repair_round(state, [0], [2, 3, 4, 5, 6], rng)
    with pytest.raises(ParameterError):
        rlnc_repair_round(state, [0, 1], [1, 3, 4, 5, 6], rng)
    with pytest.raises(ParameterError):
        rlnc_repair_round(state, [0, 1], [2, 3, 4, 5], rng)
    with pytest.raises(ParameterError):
        rlnc_repair_round(state, [0, 8], [2, 3, 4, 5, 6], rng)


def test_stress_large_field():
    report = rlnc_stress(8, 4, 5, 2, rounds=20, seed=1)
    assert report.failures == []
    assert report.rounds_survived == 20
    assert report.bandwidth_per_round == 10
    assert report.ledger_total == 200
    assert report.bound_ratio == Fraction(1)
    assert report.passed


def test_stress_zero_rounds():
    report = rlnc_stress(8, 4, 5, 2, rounds=0)
    assert report.passed
    assert report.ledger_total == 0
    assert report.to_dict()["bound_ratio"] == "1"


def test_stress_binary_field_fails():
    report = rlnc_stress(8, 4, 5, 2, rounds=5, seed=2, field=FieldSpec.prime(2), redraws=0)
    assert report.failures
    assert report.rank_failures > 0
    assert not report.passed
    assert report.to_dict()["params"]["field"] == "prime:2"


def test_stress_check_interval():
    with pytest.raises(ParameterError):
        rlnc_stress(8, 4, 5, 2, rounds=3, check_every=0)
    report = rlnc_stress(8, 4, 5, 2, rounds=6, check_every=4)
    assert report.ledger_total == 60


@pytest.mark.slow
def test_stress_hundred_rounds():
    report = rlnc_stress(8, 4, 5, 2, rounds=100, seed=0)
    assert report.redraws == 0
    assert report.rank_failures == 0
    assert report.rounds_survived == 100


def test_stress_reports_failures_without_redraws():
    report = rlnc_stress(8, 4, 5, 2, rounds=5, seed=2, field=FieldSpec.prime(2))
    assert report.redraws == 0
    assert report.to_dict()["redraws"] == 0
    assert report.rank_failures > 0


def test_stress_logs_every_redraw(mocker):
    mock_logger = mocker.patch("cmr.rlnc.logger")
    report = rlnc_stress(8, 4, 5, 2, rounds=5, seed=2, field=FieldSpec.prime(2), redraws=2)
    assert report.redraws > 0
    remixes = [c for c in mock_logger.warning.call_args_list if "re-mixing" in c.args[0]]
    assert len(remixes) == report.redraws

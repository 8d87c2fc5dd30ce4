from itertools import combinations, product
from math import comb

import numpy as np
import pytest

from cmr.algebra import FieldSpec
from cmr.config import JobConfig
from cmr.errors import MissingDataError, ParameterError, VerificationError
from cmr.workflows import resolve_field
from cmr.zigzag import (
    Stage,
    ZigzagCode,
    ZigzagLayout,
    canonical_schedule,
    d_set,
    decode_any_k,
    default_zigzag_field,
    execute_repair,
    generator_rows,
    multi_repair_schedule,
    repair_nodes,
    repair_schedule,
    single_repair_schedule,
    u_set,
    u_set_size,
    verify_schedule_counts,
    verify_solvability,
    zigzag_build,
    zigzag_encode,
)


def _random_payloads(code, rng):
    data = code.field.random(code.k * code.alpha, rng)
    return data, zigzag_encode(code, data)


def _survivors(payloads, failed):
    return {i: payloads[i] for i in range(payloads.shape[0]) if i not in failed}


def test_layout_round_trip():
    layout = ZigzagLayout(3, 3)
    assert (layout.n, layout.alpha) == (6, 9)
    assert layout.vec(5) == (1, 2)
    assert all(layout.index(layout.vec(i)) == i for i in range(layout.alpha))


def test_layout_rejects_small_parameters():
    with pytest.raises(ParameterError):
        ZigzagLayout(1, 3)
    with pytest.raises(ParameterError):
        ZigzagLayout(3, 1)


def test_zigzag_set_permutation():
    layout = ZigzagLayout(3, 4)
    rows = np.arange(layout.alpha)
    for l in range(layout.r):
        for j in range(layout.k):
            assert sorted(layout.shift(rows, l, j).tolist()) == rows.tolist()


def test_single_repair_sets_63():
    layout = ZigzagLayout(3, 3)
    assert d_set(layout, 0, 0).tolist() == [0, 5, 7]
    for l in range(3):
        assert d_set(layout, 1, l).tolist() == [0, 1, 2]


def test_single_repair_sets_42():
    layout = ZigzagLayout(2, 2)
    assert d_set(layout, 0, 0).tolist() == [0]
    assert d_set(layout, 0, 1).tolist() == [1]


def test_d_set_sizes():
    layout = ZigzagLayout(3, 4)
    for j in range(layout.k):
        for l in range(layout.r):
            assert len(d_set(layout, j, l)) == layout.r ** (layout.k - 2)


@pytest.mark.parametrize("r, k, failed", [(3, 3, (0, 1)), (3, 4, (0, 1, 2)), (4, 4, (1, 3)), (2, 3, (0, 2))])
def test_u_set_sizes(r, k, failed):
    layout = ZigzagLayout(r, k)
    for size in range(len(failed) + 1):
        for subset in combinations(failed, size):
            for l in range(r):
                assert len(u_set(layout, failed, subset, l)) == u_set_size(r, k, len(failed), size)


def test_encode_zero(zigzag_63):
    payloads = zigzag_encode(zigzag_63, np.zeros(27, dtype=int))
    assert payloads.shape == (6, 9)
    assert not np.any(payloads)


def test_encode_systematic_and_zigzag_rows(zigzag_63):
    data = np.zeros(27, dtype=int)
    data[2 * 9 + 8] = 1
    payloads = zigzag_encode(zigzag_63, data)
    assert np.array_equal(payloads[:3].reshape(-1), zigzag_63.field.array(data))
    assert np.flatnonzero(payloads[4]).tolist() == [6]
    assert np.flatnonzero(payloads[3]).tolist() == [8]
    assert np.flatnonzero(payloads[5]).tolist() == [7]


def test_first_parity_combines_same_row(zigzag_63):
    assert np.array_equal(zigzag_63.sources[0], np.tile(np.arange(9), (3, 1)))


def test_encode_length_mismatch(zigzag_63):
    with pytest.raises(ParameterError):
        zigzag_encode(zigzag_63, np.zeros(26, dtype=int))


def test_build_is_deterministic():
    a = zigzag_build(2, 2, seed=11)
    b = zigzag_build(2, 2, seed=11)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert (a.n, a.alpha) == (4, 2)


def test_build_over_gf2_exhausts_retries():
    with pytest.raises(VerificationError, match="no verified"):
        zigzag_build(3, 3, FieldSpec.prime(2), retries=2)


def test_every_k_subset_decodes(zigzag_63, rng):
    data, payloads = _random_payloads(zigzag_63, rng)
    for subset in combinations(range(6), 3):
        decoded = decode_any_k(zigzag_63, {i: payloads[i] for i in subset})
        assert np.array_equal(decoded, data), subset


def test_decode_needs_k_nodes(zigzag_63, rng):
    _, payloads = _random_payloads(zigzag_63, rng)
    with pytest.raises(ParameterError):
        decode_any_k(zigzag_63, {0: payloads[0], 1: payloads[1]})


def test_single_repair(zigzag_63, rng):
    _, payloads = _random_payloads(zigzag_63, rng)
    for j in range(3):
        schedule = single_repair_schedule(zigzag_63, j)
        outcome = execute_repair(zigzag_63, _survivors(payloads, (j,)), schedule)
        assert np.array_equal(outcome.recovered[j], payloads[j])
        assert outcome.downloaded == 15
        assert set(outcome.per_helper.values()) == {3}


@pytest.mark.parametrize("failed", [(0, 1), (0, 2), (1, 2)])
def test_pair_repair(zigzag_63, rng, failed):
    _, payloads = _random_payloads(zigzag_63, rng)
    schedule = multi_repair_schedule(zigzag_63, failed)
    outcome = execute_repair(zigzag_63, _survivors(payloads, failed), schedule)
    for j in failed:
        assert np.array_equal(outcome.recovered[j], payloads[j])
    assert outcome.downloaded == 24
    assert set(outcome.per_helper.values()) == {6}


def test_repair_zero_data(zigzag_63):
    payloads = zigzag_encode(zigzag_63, np.zeros(27, dtype=int))
    outcome = execute_repair(zigzag_63, _survivors(payloads, (0, 1)), repair_schedule(zigzag_63, (0, 1)))
    assert not np.any(outcome.recovered[0]) and not np.any(outcome.recovered[1])


def test_canonical_pair_schedule_63(zigzag_63):
    schedule = canonical_schedule(zigzag_63, (0, 1))
    assert schedule.downloads[3] == (0, 1, 2, 5, 7, 8)
    assert schedule.downloads[4] == (0, 1, 2, 3, 6, 8)
    assert schedule.downloads[5] == (0, 1, 2, 4, 6, 7)
    assert schedule.downloads[2] == (0, 1, 2, 5, 7, 8)
    assert schedule.stages[2][8] is Stage.SECOND
    assert schedule.stages[3][8] is Stage.SECOND
    assert schedule.stages[3][5] is Stage.FIRST


def test_schedule_counts(zigzag_63):
    for failed, per_helper, total in [((0,), 3, 15), ((0, 1), 6, 24), ((0, 1, 2), 9, 27)]:
        report = verify_schedule_counts(repair_schedule(zigzag_63, failed), zigzag_63)
        assert report.passed
        assert set(report.per_helper.values()) == {per_helper}
        assert report.total == total


def test_solvability(zigzag_63):
    schedule = repair_schedule(zigzag_63, (0, 1))
    assert verify_solvability(zigzag_63, schedule).solvable
    row = schedule.downloads[3][0]
    deficient = verify_solvability(zigzag_63, schedule.without(3, row))
    assert not deficient.solvable
    assert deficient.reason == "matching"
    assert deficient.matching_size == 17


def test_all_ones_over_gf2_is_rank_deficient():
    code = ZigzagCode.from_coefficients(3, 3, FieldSpec.prime(2), np.ones((3, 9, 3), dtype=int))
    result = verify_solvability(code, canonical_schedule(code, (0, 1)))
    assert not result.solvable
    assert result.reason == "rank"


def test_schedule_preconditions(zigzag_63):
    with pytest.raises(ParameterError):
        repair_schedule(zigzag_63, (3,))
    with pytest.raises(ParameterError):
        single_repair_schedule(zigzag_63, 5)
    with pytest.raises(ParameterError):
        multi_repair_schedule(zigzag_63, (0,))
    code = zigzag_build(2, 3, seed=1, max_t=2)
    with pytest.raises(ParameterError, match="exceeds"):
        repair_schedule(code, (0, 1, 2))


def test_generator_rows_match_encoding(zigzag_63, rng):
    data, payloads = _random_payloads(zigzag_63, rng)
    assert np.array_equal(generator_rows(zigzag_63, [4, 1]) @ data, payloads[[4, 1]].reshape(-1))


def test_repair_parity_by_decode(zigzag_63, rng):
    _, payloads = _random_payloads(zigzag_63, rng)
    outcome = repair_nodes(zigzag_63, _survivors(payloads, (0, 4)), (0, 4))
    assert np.array_equal(outcome.recovered[4], payloads[4])
    assert np.array_equal(outcome.recovered[0], payloads[0])
    assert outcome.downloaded == 27


def test_repair_nodes_missing_helpers(zigzag_63, rng):
    _, payloads = _random_payloads(zigzag_63, rng)
    with pytest.raises(MissingDataError):
        repair_nodes(zigzag_63, {5: payloads[5]}, (0, 4))


def test_default_field_widens_for_large_codes():
    assert default_zigzag_field(3, 3) == FieldSpec.binary(8)
    assert default_zigzag_field(3, 4) == FieldSpec.binary(8)
    assert default_zigzag_field(3, 5) == FieldSpec.binary(16)
    assert default_zigzag_field(4, 5) == FieldSpec.binary(16)


def test_resolve_field_widens_only_the_default():
    gf256 = FieldSpec.binary(8)
    small = JobConfig(command="encode", n=6, k=3)
    large = JobConfig(command="encode", n=9, k=5)
    assert resolve_field(small, gf256) == gf256
    assert resolve_field(large, gf256) == FieldSpec.binary(16)
    assert resolve_field(large.merged({"field": "gf256"}), gf256) == gf256
    assert resolve_field(large, FieldSpec.prime(257)) == FieldSpec.prime(257)
    msmr = JobConfig(command="share", code="secret", kind="msmr", n=11, z=2, t=3)
    assert resolve_field(msmr, gf256) == FieldSpec.binary(16)


@pytest.mark.slow
@pytest.mark.parametrize("r, k", list(product(range(2, 5), range(2, 6))))
def test_every_supported_pattern_is_optimal(r, k):
    code = zigzag_build(r, k, seed=3)
    assert code.field == default_zigzag_field(r, k)
    top = min(3, r, k)
    assert len(code.schedules) == sum(comb(k, t) for t in range(1, top + 1))
    rng = np.random.default_rng(r * 10 + k)
    _, payloads = _random_payloads(code, rng)
    for failed in code.schedules:
        failed = tuple(sorted(failed))
        schedule = repair_schedule(code, failed)
        outcome = execute_repair(code, _survivors(payloads, failed), schedule)
        for j in failed:
            assert np.array_equal(outcome.recovered[j], payloads[j]), failed
        assert verify_schedule_counts(schedule, code).passed, failed
        assert verify_solvability(code, schedule).solvable, failed

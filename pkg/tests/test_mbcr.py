from itertools import combinations

import numpy as np
import pytest

from cmr.algebra import FieldSpec, evaluate
from cmr.errors import MissingDataError, ParameterError
from cmr.mbcr import (
    default_field,
    entropy_accumulation_rank,
    entropy_rank_table,
    file_size,
    mbcr_build,
    mbcr_centralized_repair,
    mbcr_encode,
    mbcr_reconstruct,
    node_polynomials,
)


@pytest.mark.parametrize(
    "n, k, d, t, p, M, alpha",
    [(6, 3, 4, 2, 257, 21, 9), (4, 2, 2, 1, 13, 6, 4), (5, 2, 3, 1, 17, 10, 6)],
)
def test_build_sizes(n, k, d, t, p, M, alpha):
    code = mbcr_build(n, k, d, t, FieldSpec.prime(p))
    assert (code.M, code.alpha) == (M, alpha)
    assert file_size(k, d, t) == M
    positions = code.positions(0)
    assert len(positions) == alpha
    assert sum(1 for a, _ in positions if a == 0) == d + t


def test_build_preconditions():
    with pytest.raises(ParameterError):
        mbcr_build(6, 5, 4, 2)
    with pytest.raises(ParameterError):
        mbcr_build(6, 3, 5, 2)
    with pytest.raises(ParameterError, match="too small"):
        mbcr_build(6, 3, 4, 2, FieldSpec.prime(5))


def test_default_field_is_large_enough():
    field = default_field(6, 4, 2)
    assert field.order >= 6 + 4 + 2 - 1
    assert mbcr_build(6, 3, 4, 2).field == field


def test_encode_zero(mbcr_6342):
    assert not np.any(mbcr_encode(mbcr_6342, np.zeros(21, dtype=int)))


def test_encode_is_systematic_and_consistent(mbcr_6342, rng):
    code = mbcr_6342
    f = code.field.random(code.M, rng)
    payloads = mbcr_encode(code, f)
    for p, point in enumerate(code.info_points):
        holders = [(i, code.positions(i).index(point)) for i in range(code.n) if point in code.positions(i)]
        assert holders
        assert all(payloads[i][position] == f[p] for i, position in holders)


def test_encode_length_mismatch(mbcr_6342):
    with pytest.raises(ParameterError):
        mbcr_encode(mbcr_6342, np.zeros(20, dtype=int))


def test_node_polynomials_agree_on_own_point(mbcr_6342, rng):
    code = mbcr_6342
    payloads = mbcr_encode(code, code.field.random(code.M, rng))
    for i in range(code.n):
        h, g = node_polynomials(code, payloads[i], i)
        assert len(h) == code.d + code.t and len(g) == code.d
        assert evaluate(h, code.y_points[[i]])[0] == evaluate(g, code.x_points[[i]])[0] == payloads[i][0]


def test_node_polynomials_zero(mbcr_6342):
    h, g = node_polynomials(mbcr_6342, np.zeros(9, dtype=int), 2)
    assert not np.any(h) and not np.any(g)


def test_centralized_repair(mbcr_6342, rng):
    code = mbcr_6342
    payloads = mbcr_encode(code, code.field.random(code.M, rng))
    for failed in combinations(range(code.n), code.t):
        helpers = [j for j in range(code.n) if j not in failed][: code.d]
        outcome = mbcr_centralized_repair(code, failed, helpers, {j: payloads[j] for j in helpers})
        for i in failed:
            assert np.array_equal(outcome.recovered[i], payloads[i]), failed
        assert outcome.downloaded == 2 * code.d * code.t == 16
        assert set(outcome.per_helper.values()) == {2 * code.t}


def test_centralized_repair_every_helper_set(rng):
    code = mbcr_build(7, 3, 4, 2)
    payloads = mbcr_encode(code, code.field.random(code.M, rng))
    for failed in combinations(range(code.n), code.t):
        survivors = [j for j in range(code.n) if j not in failed]
        for helpers in combinations(survivors, code.d):
            outcome = mbcr_centralized_repair(code, failed, helpers, {j: payloads[j] for j in helpers})
            for i in failed:
                assert np.array_equal(outcome.recovered[i], payloads[i]), (failed, helpers)
            assert outcome.downloaded == 16
            assert outcome.per_helper == {j: 2 * code.t for j in helpers}


def test_repair_then_decode(mbcr_6342, rng):
    code = mbcr_6342
    for _ in range(20):
        f = code.field.random(code.M, rng)
        payloads = mbcr_encode(code, f)
        order = rng.permutation(code.n).tolist()
        failed, helpers = order[: code.t], order[code.t : code.t + code.d]
        outcome = mbcr_centralized_repair(code, failed, helpers, {j: payloads[j] for j in helpers})
        restored = {**{j: payloads[j] for j in helpers}, **outcome.recovered}
        chosen = sorted(restored)[: code.k]
        assert np.array_equal(mbcr_reconstruct(code, {j: restored[j] for j in chosen}), f)


def test_repair_errors(mbcr_6342, rng):
    code = mbcr_6342
    payloads = mbcr_encode(code, code.field.random(code.M, rng))
    available = {j: payloads[j] for j in range(code.n)}
    with pytest.raises(ParameterError):
        mbcr_centralized_repair(code, [0], [2, 3, 4, 5], available)
    with pytest.raises(ParameterError):
        mbcr_centralized_repair(code, [0, 1], [1, 2, 3, 4], available)
    with pytest.raises(ParameterError):
        mbcr_centralized_repair(code, [0, 1], [2, 3, 4], available)
    with pytest.raises(MissingDataError):
        mbcr_centralized_repair(code, [0, 1], [2, 3, 4, 5], {2: payloads[2]})


def test_reconstruct_any_k(mbcr_6342, rng):
    code = mbcr_6342
    f = code.field.random(code.M, rng)
    payloads = mbcr_encode(code, f)
    for subset in combinations(range(code.n), code.k):
        assert np.array_equal(mbcr_reconstruct(code, {j: payloads[j] for j in subset}), f), subset


def test_reconstruct_zero_and_errors(mbcr_6342):
    zeros = {j: np.zeros(9, dtype=int) for j in (3, 4, 5)}
    assert not np.any(mbcr_reconstruct(mbcr_6342, zeros))
    with pytest.raises(ParameterError):
        mbcr_reconstruct(mbcr_6342, {3: zeros[3], 4: zeros[4]})


def test_entropy_accumulation(mbcr_6342):
    for b, expected in [(1, 9), (2, 16), (3, 21)]:
        assert set(entropy_rank_table(mbcr_6342, b).values()) == {expected}
        assert entropy_accumulation_rank(mbcr_6342, b) == b * (2 * 4 + 2 - b)


def test_entropy_single_node_small_code():
    code = mbcr_build(5, 2, 3, 1, FieldSpec.prime(17))
    assert entropy_accumulation_rank(code, 1) == 6
    assert entropy_accumulation_rank(code, 2) == code.M
    with pytest.raises(ParameterError):
        entropy_rank_table(code, 0)


@pytest.mark.parametrize("n, k, d, t, p", [(6, 3, 4, 2, 7), (5, 2, 3, 1, 5), (4, 2, 2, 1, 5)])
def test_entropy_accumulation_smallest_field(n, k, d, t, p):
    code = mbcr_build(n, k, d, t, FieldSpec.prime(p))
    beta = code.M // (k * (2 * d + t - k))
    for b in range(1, k + 1):
        assert set(entropy_rank_table(code, b).values()) == {b * (2 * d + t - b) * beta}, b

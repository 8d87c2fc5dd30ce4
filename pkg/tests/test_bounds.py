from fractions import Fraction

import numpy as np
import pytest

from cmr.errors import ParameterError
from cmr.bounds import (
    CmrParams,
    PartitionSpec,
    SecretParams,
    canonical_partition,
    compositions,
    file_size_bound,
    mbcr_entropy,
    mbcr_operating_params,
    mbmr_hb_condition,
    mbmr_operating_point,
    mbmr_point,
    min_file_size_bound,
    msmr_point,
    secret_bw_bound,
    unequal_download_check,
)


def test_file_size_bound_singletons():
    p = CmrParams(6, 3, 5, 1, 9, 3)
    assert file_size_bound(p, PartitionSpec((1, 1, 1))) == 27


def test_file_size_bound_mixed_blocks():
    p = CmrParams(None, 3, 4, 2, 9, 6)
    assert file_size_bound(p, PartitionSpec((1, 2))) == 27


def test_file_size_bound_single_block():
    p = CmrParams(None, 3, 5, 3, 4, 2)
    assert file_size_bound(p, PartitionSpec((3,))) == min(3 * 4, 5 * 2)


@pytest.mark.parametrize("sizes", [(1, 1), (3,), (0, 3), ()])
def test_invalid_partitions(sizes):
    p = CmrParams(None, 3, 4, 2, 9, 6)
    with pytest.raises(ParameterError):
        file_size_bound(p, PartitionSpec(sizes))


def test_params_validation():
    with pytest.raises(ParameterError):
        CmrParams(None, 3, 2, 1, 1, 1)
    with pytest.raises(ParameterError):
        CmrParams(5, 2, 4, 2, 1, 1)
    with pytest.raises(ParameterError):
        CmrParams(None, 2, 2, 0, 1, 1)


def test_compositions():
    assert list(compositions(3, 2)) == [(1, 1, 1), (1, 2), (2, 1)]
    assert list(compositions(4, 4))[-1] == (4,)
    assert canonical_partition(5, 2).sizes == (1, 2, 2)
    assert canonical_partition(4, 2).sizes == (2, 2)


def test_min_bound_msmr():
    alpha, gamma = msmr_point(27, 3, 4, 2)
    value, partition = min_file_size_bound(CmrParams(None, 3, 4, 2, alpha, gamma / 4))
    assert value == 27
    assert sum(partition.sizes) == 3


def test_min_bound_t_equals_k():
    p = CmrParams(None, 3, 4, 3, 5, 2)
    value, partition = min_file_size_bound(p)
    assert partition.sizes == (3,)
    assert value == min(15, 8)


def test_min_bound_t_one():
    p = CmrParams(None, 3, 5, 1, 4, 1)
    value, _ = min_file_size_bound(p)
    assert value == sum(min(4, (5 - i) * 1) for i in range(3))


def test_msmr_bound_is_tight():
    for k in range(1, 7):
        for d in range(k, 13):
            for t in range(1, k + 1):
                M = k * (d - k + t)
                alpha, gamma = msmr_point(M, k, d, t)
                value, _ = min_file_size_bound(CmrParams(None, k, d, t, alpha, gamma / d))
                assert value == M, (k, d, t)


def test_msmr_bound_is_tight_random_triples():
    rng = np.random.default_rng(17)
    for _ in range(50):
        k = int(rng.integers(1, 8))
        d = int(rng.integers(k, 16))
        t = int(rng.integers(1, k + 1))
        M = k * (d - k + t) * int(rng.integers(1, 6))
        alpha, gamma = msmr_point(M, k, d, t)
        value, _ = min_file_size_bound(CmrParams(None, k, d, t, alpha, gamma / d))
        assert value == M, (k, d, t, M)


def test_mbmr_all_t_partition_sums_to_file():
    for k, d, t in [(2, 2, 1), (4, 4, 2), (6, 7, 3), (4, 5, 4)]:
        M = 12
        gamma = mbmr_point(M, k, d, t)
        p = CmrParams(None, k, d, t, Fraction(10**6), gamma / d)
        assert file_size_bound(p, PartitionSpec((t,) * (k // t))) == M


def test_msmr_point_cases():
    assert msmr_point(27, 3, 4, 2) == (9, 24)
    assert msmr_point(8, 4, 5, 1) == (2, 5)
    assert msmr_point(12, 3, 3, 3)[1] == 12


def test_msmr_point_requires_divisibility():
    with pytest.raises(ParameterError):
        msmr_point(28, 3, 4, 2)


def test_msmr_gamma_monotone():
    M, k = 60, 3
    for t in range(1, 4):
        gammas = [msmr_point(M, k, d, t)[1] for d in range(k, 10)]
        assert gammas == sorted(gammas, reverse=True)
    for d in range(3, 10):
        gammas = [msmr_point(M, k, d, t)[1] for t in range(1, 4)]
        assert gammas == sorted(gammas)


def test_mbmr_point_cases():
    assert mbmr_point(6, 2, 2, 1) == 4
    assert mbmr_point(16, 4, 4, 2) == Fraction(32, 3)
    assert mbmr_point(20, 4, 6, 4) == 20


def test_mbmr_point_refuses_non_divisible():
    with pytest.raises(ParameterError, match="does not divide"):
        mbmr_point(21, 3, 4, 2)


def test_hb_condition():
    assert mbmr_hb_condition(0, 4, 2, 2) == 0
    assert mbmr_hb_condition(1, 4, 2, 2) == Fraction(9, 2)
    with pytest.raises(ParameterError):
        mbmr_hb_condition(2, 4, 2, 2)


def test_mbmr_operating_point_non_divisible():
    point = mbmr_operating_point(21, 3, 4, 2)
    assert not point.divisible
    assert len(point.hb_thresholds) == 2
    assert point.hb_thresholds[0] == 0
    assert mbmr_operating_point(6, 2, 2, 1).gamma == 4


def test_mbcr_operating_params():
    p = mbcr_operating_params(21, 3, 4, 2)
    assert (p.alpha, p.beta, p.beta_prime) == (9, 2, 1)
    assert p.entropy(2) == 16
    assert p.entropy(3) == 21
    assert p.entropy(1) == p.alpha


def test_mbcr_entropy_closed_form():
    for b in range(1, 4):
        assert mbcr_entropy(b, 4, 2, 2) == b * (2 * 4 + 2 - b)


def test_secret_bw_bound():
    assert secret_bw_bound(SecretParams(4, 1, 0, 18, 9), 4) == 24
    assert secret_bw_bound(SecretParams(4, 0, 0, 18, 9), 4) == 18
    assert secret_bw_bound(SecretParams(3, 1, 1, 2, 4), 2) == 4


def test_secret_bw_matches_msmr_scheme():
    # N = n - t shares, z = k - t, secret t·alpha, read every share
    n, k, t = 6, 3, 2
    alpha, gamma = msmr_point(k * (n - t - k + t), k, n - t, t)
    p = SecretParams(n - t, k - t, 0, int(t * alpha), int(alpha))
    assert secret_bw_bound(p, n - t) == gamma


def test_secret_params_validation():
    with pytest.raises(ParameterError):
        SecretParams(4, 4, 0, 1, 1)
    with pytest.raises(ParameterError):
        SecretParams(4, 1, 0, 0, 1)
    with pytest.raises(ParameterError):
        secret_bw_bound(SecretParams(4, 1, 2, 1, 1), 1)


def test_unequal_downloads_do_not_help():
    p = CmrParams(None, 3, 4, 2, 9, 6)
    assert unequal_download_check(p, [6, 6, 6, 6], PartitionSpec((1, 2)))
    assert unequal_download_check(p, [3, 9, 6, 6], PartitionSpec((2, 1)))
    with pytest.raises(ParameterError):
        unequal_download_check(p, [6, 6, 6], PartitionSpec((1, 2)))

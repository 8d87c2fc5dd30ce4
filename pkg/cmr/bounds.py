"""
Closed-form bounds and operating points of the centralized multi-node repair model

Every quantity is an exact `Fraction`; callers decide integrality.
"""

from math import comb
from fractions import Fraction
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Tuple, Union

from cmr.errors import ParameterError

Rational = Union[int, Fraction]

EXHAUSTIVE_K = 12


@dataclass(frozen=True)
class CmrParams:
    n: Optional[int]
    k: int
    d: int
    t: int
    alpha: Fraction
    beta: Fraction
    file_size: Optional[Fraction] = None

    def __post_init__(self):
        for name in ("k", "d", "t"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")
        if self.k > self.d:
            raise ParameterError(f"k={self.k} exceeds d={self.d}")
        if self.n is not None and self.d > self.n - self.t:
            raise ParameterError(f"d={self.d} exceeds n-t={self.n - self.t}")
        if self.alpha < 0 or self.beta < 0:
            raise ParameterError("alpha and beta must be non-negative")
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        object.__setattr__(self, "beta", Fraction(self.beta))

    @property
    def gamma(self) -> Fraction:
        return self.d * self.beta


@dataclass(frozen=True)
class PartitionSpec:
    sizes: Tuple[int, ...]

    def validate(self, k: int, t: int) -> None:
        if not self.sizes or any(size < 1 or size > t for size in self.sizes):
            raise ParameterError(f"partition {self.sizes} needs parts in [1, {t}]")
        if sum(self.sizes) != k:
            raise ParameterError(f"partition {self.sizes} does not sum to k={k}")


@dataclass(frozen=True)
class SecretParams:
    n_shares: int
    z: int
    r_tolerance: int
    secret_size: int
    share_size: int

    def __post_init__(self):
        if self.secret_size < 1:
            raise ParameterError("secret size must be positive")
        if not self.z + 1 <= self.n_shares - self.r_tolerance <= self.n_shares:
            raise ParameterError(
                f"need z+1 <= N-r <= N, got z={self.z}, N={self.n_shares}, r={self.r_tolerance}"
            )


def file_size_bound(p: CmrParams, part: PartitionSpec) -> Fraction:
    part.validate(p.k, p.t)
    total, seen = Fraction(0), 0
    for size in part.sizes:
        total += min(size * p.alpha, (p.d - seen) * p.beta)
        seen += size
    return total


def compositions(k: int, t: int) -> Iterator[Tuple[int, ...]]:
    """Ordered compositions of k with parts at most t, lexicographic"""
    if k == 0:
        yield ()
        return
    for first in range(1, min(k, t) + 1):
        for rest in compositions(k - first, t):
            yield (first,) + rest


def canonical_partition(k: int, t: int) -> PartitionSpec:
    a, b = divmod(k, t)
    return PartitionSpec(((b,) if b else ()) + (t,) * a)


def min_file_size_bound(p: CmrParams) -> Tuple[Fraction, PartitionSpec]:
    if p.k <= EXHAUSTIVE_K:
        candidates = (PartitionSpec(sizes) for sizes in compositions(p.k, p.t))
    else:
        candidates = iter([canonical_partition(p.k, p.t)])
    best: Optional[Tuple[Fraction, PartitionSpec]] = None
    for part in candidates:
        value = file_size_bound(p, part)
        if best is None or value < best[0]:
            best = (value, part)
    return best


def msmr_point(file_size: Rational, k: int, d: int, t: int) -> Tuple[Fraction, Fraction]:
    """(alpha, gamma) at minimum storage"""
    _check_kdt(k, d, t)
    file_size = Fraction(file_size)
    if file_size.denominator != 1 or file_size.numerator % k:
        raise ParameterError(f"file size {file_size} is not divisible by k={k}")
    alpha = file_size / k
    gamma = file_size * d * t / (k * (d - k + t))
    return alpha, gamma


def mbmr_point(file_size: Rational, k: int, d: int, t: int) -> Fraction:
    """gamma at minimum bandwidth; refuses t ∤ k"""
    _check_kdt(k, d, t)
    if k % t:
        raise ParameterError(f"t={t} does not divide k={k}; check mbmr_hb_condition instead")
    return Fraction(2 * Fraction(file_size) * d * t, k * (2 * d - k + t))


def mbmr_hb_condition(b: int, d: int, t: int, beta: Rational) -> Fraction:
    if not 0 <= b < t:
        raise ParameterError(f"b={b} outside [0, t)")
    return _hb_threshold(b, d, t, Fraction(beta))


def _hb_threshold(b: int, d: int, t: int, beta: Fraction) -> Fraction:
    return beta / t * (Fraction(b * (2 * d + t - 1), 2) - comb(b, 2))


@dataclass(frozen=True)
class MbcrParams:
    alpha: Fraction
    beta: Fraction
    beta_prime: Fraction
    entropy: Callable[[int], Fraction]


def mbcr_entropy(b: int, d: int, t: int, beta: Rational) -> Fraction:
    """H_b = (b(2d+t-1)/2 - C(b,2))·beta"""
    return (Fraction(b * (2 * d + t - 1), 2) - comb(b, 2)) * Fraction(beta)


def mbcr_operating_params(file_size: Rational, k: int, d: int, t: int) -> MbcrParams:
    _check_kdt(k, d, t)
    file_size = Fraction(file_size)
    denominator = k * (2 * d + t - k)
    beta = 2 * file_size / denominator
    return MbcrParams(
        alpha=file_size * (2 * d + t - 1) / denominator,
        beta=beta,
        beta_prime=file_size / denominator,
        entropy=lambda b: mbcr_entropy(b, d, t, beta),
    )


@dataclass(frozen=True)
class MbmrPoint:
    gamma: Optional[Fraction]
    hb_thresholds: Tuple[Fraction, ...]

    @property
    def divisible(self) -> bool:
        return self.gamma is not None


def mbmr_operating_point(file_size: Rational, k: int, d: int, t: int) -> MbmrPoint:
    """
    mbmr_point when t | k; otherwise the H_b thresholds for b < t at the
    bivariate code's beta, for the caller to compare against code entropies
    """
    if k % t == 0:
        return MbmrPoint(mbmr_point(file_size, k, d, t), ())
    beta = mbcr_operating_params(file_size, k, d, t).beta * t
    return MbmrPoint(None, tuple(mbmr_hb_condition(b, d, t, beta) for b in range(t)))


def secret_bw_bound(p: SecretParams, d: int) -> Fraction:
    if d <= p.z:
        raise ParameterError(f"d={d} must exceed z={p.z}")
    if not p.n_shares - p.r_tolerance <= d <= p.n_shares:
        raise ParameterError(f"d={d} outside [N-r, N] = [{p.n_shares - p.r_tolerance}, {p.n_shares}]")
    return Fraction(d * p.secret_size, d - p.z)


def unequal_download_check(p: CmrParams, betas: Sequence[Rational], part: PartitionSpec) -> bool:
    """
    True when splitting gamma unevenly across helpers does not raise the file-size
    bound above its equal-download value; helpers are consumed in the given order
    """
    if len(betas) != p.d:
        raise ParameterError(f"{len(betas)} per-helper downloads for d={p.d}")
    betas = [Fraction(b) for b in betas]
    if sum(betas) != p.gamma:
        raise ParameterError("per-helper downloads must sum to gamma")
    part.validate(p.k, p.t)
    total, seen = Fraction(0), 0
    for size in part.sizes:
        total += min(size * p.alpha, sum(sorted(betas)[: p.d - seen]))
        seen += size
    return total <= file_size_bound(p, part)


def _check_kdt(k: int, d: int, t: int) -> None:
    if k < 1 or t < 1:
        raise ParameterError("k and t must be positive")
    if k > d:
        raise ParameterError(f"k={k} exceeds d={d}")

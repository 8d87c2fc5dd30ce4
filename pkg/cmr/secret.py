"""
Secret sharing by puncturing repairable codes.

The file f = (m, r) holds the secret m and uniform randomness r. It is encoded
with a base code and the t punctured nodes are thrown away; the survivors are
the shares. Reconstruction is a centralized repair of the punctured nodes, so
its bandwidth is that of one t-node repair.

Secrecy against a share set E is exact linear algebra. With m and r uniform
and independent, the observation G_E·f reveals

    rank(G_E) - rank(G_E restricted to the randomness columns)

q-ary symbols about m, and zero means the observation is independent of m.
"""

from enum import Enum
from fractions import Fraction
from itertools import combinations
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import galois
import numpy as np

from cmr.log import Log
from cmr.repair import RepairOutcome
from cmr.algebra import FieldSpec, block_rank, evaluate, mat_rank, plain, vstack
from cmr.errors import MissingDataError, ParameterError
from cmr.mbcr import (
    MbcrCode,
    Point,
    default_field,
    greedy_information_set,
    mbcr_build,
    mbcr_centralized_repair,
    mbcr_encode,
    monomials,
    node_polynomials,
    node_positions,
    point_supply,
)
from cmr.zigzag import MAX_REPAIR_T, ZigzagCode, execute_repair, generator_rows, repair_nodes, repair_schedule
from cmr.zigzag import zigzag_build, zigzag_encode

logger = Log()

ENUMERATION_BUDGET = 10**6
MAX_SECRETS = 64


class SchemeKind(str, Enum):
    MSMR_ZIGZAG = "msmr-zigzag"
    MBMR_BIVARIATE = "mbmr-bivariate"


@dataclass(frozen=True)
class SecretScheme:
    kind: SchemeKind
    base: Union[ZigzagCode, MbcrCode]
    z: int
    t: int
    secret_size: int
    randomness_size: int
    punctured: Tuple[int, ...]
    share_map: Tuple[int, ...]
    secret_points: Tuple[Point, ...] = ()

    @property
    def N(self) -> int:
        return len(self.share_map)

    @property
    def alpha(self) -> int:
        return self.base.alpha

    @property
    def M(self) -> int:
        return self.secret_size + self.randomness_size

    @property
    def d(self) -> int:
        """Shares read by one reconstruction"""
        if self.kind is SchemeKind.MSMR_ZIGZAG:
            return self.N
        return self.base.d

    @property
    def field(self) -> FieldSpec:
        return self.base.field

    @property
    def gf(self):
        return self.base.field.gf

    def base_node(self, share: int) -> int:
        if not 0 <= share < self.N:
            raise ParameterError(f"share {share} outside [0, {self.N})")
        return self.share_map[share]

    def share_index(self, node: int) -> int:
        return self.share_map.index(node)


@dataclass(frozen=True)
class LeakageReport:
    subset: Tuple[int, ...]
    leaked_symbols: int

    @property
    def secure(self) -> bool:
        return self.leaked_symbols == 0


@dataclass(frozen=True)
class BruteForceResult:
    subset: Tuple[int, ...]
    perfect: bool
    max_distance: Fraction
    secrets_checked: int
    enumerations: int


def msmr_zigzag_scheme(
    r: int,
    z: int,
    t: int,
    field: Optional[FieldSpec] = None,
    seed: int = 0,
    verify_mds: bool = True,
) -> SecretScheme:
    """
    Punctures the first t systematic nodes of a (z+t+r, z+t) zigzag code

    The secret fills those t nodes and the randomness the next z; the other
    z + r nodes are the shares. t = 1 is the single-node MSR puncture.
    """
    if z < 0 or t < 1:
        raise ParameterError(f"need z >= 0 and t >= 1, got z={z}, t={t}")
    if t > min(MAX_REPAIR_T, r):
        raise ParameterError(f"t={t} exceeds min(3, r={r}) repairable systematic nodes")
    code = zigzag_build(r, z + t, field=field, seed=seed, verify_mds=verify_mds)
    return SecretScheme(
        kind=SchemeKind.MSMR_ZIGZAG,
        base=code,
        z=z,
        t=t,
        secret_size=t * code.alpha,
        randomness_size=z * code.alpha,
        punctured=tuple(range(t)),
        share_map=tuple(range(t, code.n)),
    )


def mbmr_secret_points(n: int, z: int, t: int, d: int) -> Tuple[Point, ...]:
    """
    The 2t(d-z) (x-index, y-index) points whose F values are the secret

    For each punctured node j: h_j at the punctured y points and at d-z extra
    y points beyond the node points, then g_j at d-z-t extra x points.
    No share stores any of them.
    """
    punctured = list(range(z, z + t))
    y_extra = list(range(n, n + d - z))
    x_extra = list(range(n, n + d - z - t))
    h_part = [(j, b) for j in punctured for b in punctured + y_extra]
    g_part = [(a, j) for j in punctured for a in x_extra]
    return tuple(h_part + g_part)


def mbmr_scheme(n: int, z: int, t: int, d: int, field: Optional[FieldSpec] = None) -> SecretScheme:
    """
    Punctures nodes z..z+t-1 of an (n, z+t, d, t) bivariate code

    The randomness is completed greedily from the values stored on nodes
    0..z-1, so z shares already pin down all of it.
    """
    if z < 0 or t < 1:
        raise ParameterError(f"need z >= 0 and t >= 1, got z={z}, t={t}")
    k = z + t
    if d < k:
        raise ParameterError(f"d={d} must be at least k=z+t={k}")
    if d > n - t:
        raise ParameterError(f"d={d} exceeds n-t={n - t}")
    field = field or default_field(n, d, t)
    x_count, y_count = point_supply(n, d, t, field.order)
    if y_count < n + d - z or x_count < n + d - z - t:
        raise ParameterError(
            f"{field.label} is too small for secret points: need {n + d - z} y points, have {y_count}"
        )
    secret_points = mbmr_secret_points(n, z, t, d)
    x_points = field.gf(np.arange(x_count))
    y_points = field.gf(np.arange(y_count))
    candidates = [p for node in range(z) for p in node_positions(node, d, t, x_count, y_count)]
    info = greedy_information_set(x_points, y_points, monomials(k, d, t), candidates, required=secret_points)
    code = mbcr_build(n, k, d, t, field=field, info_points=info)
    punctured = tuple(range(z, z + t))
    return SecretScheme(
        kind=SchemeKind.MBMR_BIVARIATE,
        base=code,
        z=z,
        t=t,
        secret_size=len(secret_points),
        randomness_size=code.M - len(secret_points),
        punctured=punctured,
        share_map=tuple(node for node in range(n) if node not in punctured),
        secret_points=secret_points,
    )


def secret_share(
    scheme: SecretScheme,
    secret,
    rng: Optional[np.random.Generator] = None,
    randomness=None,
) -> galois.FieldArray:
    """
    N × alpha share payloads

    Args:
        secret: M_s symbols
        rng (Generator): source of the R randomness symbols
        randomness: explicit randomness, overriding rng
    """
    secret = _as_field(scheme, secret).reshape(-1)
    if secret.size != scheme.secret_size:
        raise ParameterError(f"secret needs {scheme.secret_size} symbols, got {secret.size}")
    if randomness is None:
        rng = rng if rng is not None else np.random.default_rng()
        randomness = scheme.field.random(scheme.randomness_size, rng)
    randomness = _as_field(scheme, randomness).reshape(-1)
    if randomness.size != scheme.randomness_size:
        raise ParameterError(f"randomness needs {scheme.randomness_size} symbols, got {randomness.size}")
    f = scheme.gf(np.concatenate([plain(secret), plain(randomness)]))
    if scheme.kind is SchemeKind.MSMR_ZIGZAG:
        payloads = zigzag_encode(scheme.base, f)
    else:
        payloads = mbcr_encode(scheme.base, f)
    return payloads[list(scheme.share_map)]


def _base_payloads(scheme: SecretScheme, shares: Mapping[int, galois.FieldArray]) -> Dict[int, galois.FieldArray]:
    return {scheme.base_node(share): _as_field(scheme, payload) for share, payload in shares.items()}


def _per_share(scheme: SecretScheme, per_helper: Mapping[int, int]) -> Dict[int, int]:
    return {scheme.share_index(node): count for node, count in sorted(per_helper.items())}


def secret_reconstruct(
    scheme: SecretScheme, shares: Mapping[int, galois.FieldArray]
) -> Tuple[galois.FieldArray, RepairOutcome]:
    """
    Repairs the punctured nodes from d shares and reads the secret off them

    Returns:
        (secret, outcome): outcome.per_helper counts symbols per share index
    """
    indices = sorted(shares)
    if len(indices) <= scheme.z:
        raise ParameterError(f"{len(indices)} shares do not exceed z={scheme.z}")
    if len(indices) < scheme.d:
        raise MissingDataError(f"reconstruction reads d={scheme.d} shares, got {len(indices)}")
    helpers = indices[: scheme.d]
    payloads = _base_payloads(scheme, {share: shares[share] for share in helpers})
    if scheme.kind is SchemeKind.MSMR_ZIGZAG:
        outcome = execute_repair(scheme.base, payloads, repair_schedule(scheme.base, scheme.punctured))
        secret = scheme.gf(np.concatenate([plain(outcome.recovered[j]) for j in scheme.punctured]))
    else:
        code = scheme.base
        outcome = mbcr_centralized_repair(code, scheme.punctured, sorted(payloads), payloads)
        polys = {j: node_polynomials(code, outcome.recovered[j], j) for j in scheme.punctured}
        secret = code.gf.Zeros(scheme.secret_size)
        for position, (a, b) in enumerate(scheme.secret_points):
            if a in polys:
                secret[position] = evaluate(polys[a][0], code.y_points[[b]])[0]
            else:
                secret[position] = evaluate(polys[b][1], code.x_points[[a]])[0]
    logger.debug(f"reconstructed secret from shares {helpers} with {outcome.downloaded} symbols")
    return secret, RepairOutcome(outcome.recovered, _per_share(scheme, outcome.per_helper))


def secret_repair_shares(
    scheme: SecretScheme, failed: Sequence[int], helpers: Mapping[int, galois.FieldArray]
) -> RepairOutcome:
    """
    Restores up to t lost shares

    The bivariate kind pads the failed set with punctured nodes up to t and
    reads d helpers. The zigzag kind repairs the lost shares together with the
    punctured nodes: through a schedule when all are systematic and at most
    min(3, r) in number, otherwise by decoding k shares and re-encoding.
    Either way the punctured nodes count as failed too, so one lost share costs
    more than the alpha·d/r symbols of a plain single-node repair.
    """
    failed = sorted(set(failed))
    if not failed:
        raise ParameterError("no failed shares given")
    if len(failed) > scheme.t:
        raise ParameterError(f"at most t={scheme.t} shares are repaired at once, got {len(failed)}")
    overlap = set(failed) & set(helpers)
    if overlap:
        raise ParameterError(f"failed shares {sorted(overlap)} cannot help")
    failed_nodes = [scheme.base_node(share) for share in failed]
    payloads = _base_payloads(scheme, helpers)
    if scheme.kind is SchemeKind.MBMR_BIVARIATE:
        d = scheme.base.d
        if len(payloads) < d:
            raise MissingDataError(f"share repair reads d={d} helpers, got {len(payloads)}")
        padding = list(scheme.punctured[: scheme.t - len(failed_nodes)])
        outcome = mbcr_centralized_repair(scheme.base, failed_nodes + padding, sorted(payloads)[:d], payloads)
    else:
        outcome = repair_nodes(scheme.base, payloads, set(failed_nodes) | set(scheme.punctured))
    logger.debug(f"repaired shares {failed} with {outcome.downloaded} symbols")
    return RepairOutcome(
        {share: outcome.recovered[node] for share, node in zip(failed, failed_nodes)},
        _per_share(scheme, outcome.per_helper),
    )


def observation_matrix(scheme: SecretScheme, subset: Sequence[int]) -> galois.FieldArray:
    """|subset|·alpha × M map from (m, r) to the symbols the shares hold"""
    nodes = [scheme.base_node(share) for share in subset]
    if scheme.kind is SchemeKind.MSMR_ZIGZAG:
        return generator_rows(scheme.base, nodes)
    return scheme.base.generator(nodes)


def _rank(scheme: SecretScheme, m: galois.FieldArray) -> int:
    if m.size == 0:
        return 0
    if scheme.kind is SchemeKind.MSMR_ZIGZAG:
        return block_rank(m)
    return mat_rank(m)


def leakage(scheme: SecretScheme, subset: Sequence[int]) -> LeakageReport:
    subset = tuple(sorted(set(subset)))
    if not subset:
        return LeakageReport(subset, 0)
    g = observation_matrix(scheme, subset)
    leaked = _rank(scheme, g) - _rank(scheme, g[:, scheme.secret_size :])
    return LeakageReport(subset, leaked)


def secrecy_scan(scheme: SecretScheme, size: Optional[int] = None) -> List[LeakageReport]:
    """Leakage of every share subset of the given size, z by default"""
    size = scheme.z if size is None else size
    if not 0 <= size <= scheme.N:
        raise ParameterError(f"subset size {size} outside [0, N={scheme.N}]")
    return [leakage(scheme, subset) for subset in combinations(range(scheme.N), size)]


def _distribution(observed: galois.FieldArray) -> Dict[bytes, int]:
    rows, counts = np.unique(plain(observed), axis=0, return_counts=True)
    return {row.tobytes(): int(count) for row, count in zip(rows, counts)}


def _all_vectors(gf, q: int, length: int) -> galois.FieldArray:
    if length == 0:
        return gf.Zeros((1, 0))
    return gf(np.indices((q,) * length).reshape(length, -1).T)


def brute_force_secrecy(
    scheme: SecretScheme,
    subset: Sequence[int],
    budget: int = ENUMERATION_BUDGET,
    max_secrets: int = MAX_SECRETS,
    rng: Optional[np.random.Generator] = None,
) -> BruteForceResult:
    """
    Tabulates what the shares in subset see for every randomness value, per secret

    Every secret is tried when q^M_s <= max_secrets; otherwise the zero secret
    and max_secrets - 1 random ones. Perfect means identical distributions.
    """
    subset = tuple(sorted(set(subset)))
    q, R, Ms = scheme.field.order, scheme.randomness_size, scheme.secret_size
    enumerations = q**R
    if enumerations > budget:
        raise ParameterError(f"q^R = {q}^{R} exceeds the enumeration budget {budget}")
    if not subset:
        return BruteForceResult(subset, True, Fraction(0), 0, enumerations)
    gf = scheme.gf
    g = observation_matrix(scheme, subset)
    if R:
        base = _all_vectors(gf, q, R) @ g[:, Ms:].T
    else:
        base = gf.Zeros((1, g.shape[0]))
    if q**Ms <= max_secrets:
        secrets = _all_vectors(gf, q, Ms)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        secrets = vstack(gf, [gf.Zeros((1, Ms)), scheme.field.random((max_secrets - 1, Ms), rng)])
    reference = None
    worst = Fraction(0)
    for secret in secrets:
        observed = base + (g[:, :Ms] @ secret)[np.newaxis, :]
        distribution = _distribution(observed)
        if reference is None:
            reference = distribution
            continue
        keys = set(reference) | set(distribution)
        gap = sum(abs(reference.get(key, 0) - distribution.get(key, 0)) for key in keys)
        worst = max(worst, Fraction(gap, 2 * enumerations))
    logger.debug(f"brute force over {len(secrets)} secrets for {subset}: distance {worst}")
    return BruteForceResult(subset, worst == 0, worst, len(secrets), enumerations)


def _as_field(scheme: SecretScheme, values) -> galois.FieldArray:
    if isinstance(values, galois.FieldArray):
        if type(values) is not scheme.gf:
            return scheme.field.array(plain(values))
        return values
    return scheme.field.array(values)

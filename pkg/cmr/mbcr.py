"""
Bivariate-polynomial minimum-bandwidth code with centralized t-node repair.

The file is the coefficient vector of

    F(X, Y) = Σ_{i<k, j<k} a_ij X^i Y^j + Σ_{i<k, k<=j<d+t} b_ij X^i Y^j + Σ_{k<=i<d, j<k} c_ij X^i Y^j

after a systematic precode. Node i stores h_i(Y) = F(x_i, Y) at y_i..y_{i+d+t-1}
and g_i(X) = F(X, y_i) at x_{i+1}..x_{i+d-1}, point indices taken cyclically.
"""

from itertools import combinations
from functools import cached_property
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import galois
import numpy as np

from cmr.log import Log
from cmr.repair import RepairOutcome
from cmr.algebra import EliminationBasis, FieldSpec, evaluate, interpolate, mat_rank, mat_solve, plain, vstack
from cmr.errors import AlgebraError, MissingDataError, ParameterError, SingularSystemError

logger = Log()

Point = Tuple[int, int]


@dataclass(frozen=True)
class MbcrCode:
    n: int
    k: int
    d: int
    t: int
    field: FieldSpec
    x_points: galois.FieldArray
    y_points: galois.FieldArray
    info_points: Tuple[Point, ...]
    precode: galois.FieldArray

    @property
    def M(self) -> int:
        return file_size(self.k, self.d, self.t)

    @property
    def alpha(self) -> int:
        return 2 * self.d + self.t - 1

    @property
    def gf(self):
        return self.field.gf

    @cached_property
    def monomials(self) -> Tuple[Tuple[int, int], ...]:
        return monomials(self.k, self.d, self.t)

    def positions(self, node: int) -> List[Point]:
        return node_positions(node, self.d, self.t, len(self.x_points), len(self.y_points))

    def evaluation_rows(self, points: Sequence[Point]) -> galois.FieldArray:
        """Rows mapping coefficient vectors to F at (x-index, y-index) points"""
        return evaluation_rows(self.x_points, self.y_points, self.monomials, points)

    @cached_property
    def node_rows(self) -> Tuple[galois.FieldArray, ...]:
        return tuple(self.evaluation_rows(self.positions(i)) for i in range(self.n))

    def evaluation(self, nodes: Sequence[int]) -> galois.FieldArray:
        return vstack(self.gf, [self.node_rows[i] for i in nodes])

    def generator(self, nodes: Sequence[int]) -> galois.FieldArray:
        """|nodes|·alpha × M map from the file to the listed payloads"""
        return self.evaluation(nodes) @ self.precode


def file_size(k: int, d: int, t: int) -> int:
    return k * (2 * d + t - k)


def monomials(k: int, d: int, t: int) -> Tuple[Tuple[int, int], ...]:
    a_region = [(i, j) for i in range(k) for j in range(k)]
    b_region = [(i, j) for i in range(k) for j in range(k, d + t)]
    c_region = [(i, j) for i in range(k, d) for j in range(k)]
    return tuple(a_region + b_region + c_region)


def node_positions(node: int, d: int, t: int, x_count: int, y_count: int) -> List[Point]:
    h_part = [(node, (node + s) % y_count) for s in range(d + t)]
    g_part = [((node + s) % x_count, node) for s in range(1, d)]
    return h_part + g_part


def evaluation_rows(x_points, y_points, terms: Sequence[Tuple[int, int]], points: Sequence[Point]):
    gf = type(x_points)
    if not points:
        return gf.Zeros((0, len(terms)))
    xs = x_points[[a for a, _ in points]]
    ys = y_points[[b for _, b in points]]
    x_exp = np.array([i for i, _ in terms])
    y_exp = np.array([j for _, j in terms])
    return xs[:, None] ** x_exp[None, :] * ys[:, None] ** y_exp[None, :]


def point_supply(n: int, d: int, t: int, order: int) -> Tuple[int, int]:
    """
    (x count, y count): n+d-1 and n+d+t-1 when the field allows, otherwise every
    field element, as long as one node's windows and the node points stay distinct
    """
    x_count = min(order, n + d - 1)
    y_count = min(order, n + d + t - 1)
    if x_count < max(n, d) or y_count < max(n, d + t):
        raise ParameterError(
            f"GF({order}) is too small for n={n}, d={d}, t={t}: need at least {max(n, d + t)} elements"
        )
    return x_count, y_count


def default_field(n: int, d: int, t: int) -> FieldSpec:
    return FieldSpec.prime(int(galois.next_prime(n + d + t - 1)))


def greedy_information_set(
    x_points, y_points, terms, candidates: Iterable[Point], required: Sequence[Point] = ()
) -> Tuple[Point, ...]:
    """
    Required points first, then candidates in order whenever they raise the rank,
    until the set spans every coefficient
    """
    gf = type(x_points)
    basis = EliminationBasis(gf, len(terms))
    chosen: List[Point] = []
    for point in required:
        if basis.add(evaluation_rows(x_points, y_points, terms, [point])) != 1:
            raise ParameterError(f"required point {point} is dependent on earlier ones")
        chosen.append(point)
    seen = set(chosen)
    for point in candidates:
        if basis.rank == len(terms):
            break
        if point in seen:
            continue
        seen.add(point)
        if basis.add(evaluation_rows(x_points, y_points, terms, [point])):
            chosen.append(point)
    if basis.rank < len(terms):
        raise AlgebraError(f"candidate points span only {basis.rank} of {len(terms)} coefficients")
    return tuple(chosen)


def mbcr_build(
    n: int,
    k: int,
    d: int,
    t: int,
    field: Optional[FieldSpec] = None,
    info_points: Optional[Sequence[Point]] = None,
) -> MbcrCode:
    """
    Builds the code and its systematic precode

    Args:
        n, k, d, t (int): nodes, reconstruction degree, helpers, failures per repair
        field (FieldSpec): prime field by default, the smallest with n+d+t elements
        info_points (Sequence[Point]): M (x-index, y-index) pairs whose F values are
            the raw file symbols; defaults to the first independent stored values of
            nodes 0..k-1 in storage order
    """
    if min(n, k, d, t) < 1:
        raise ParameterError("n, k, d and t must be positive")
    if k > d:
        raise ParameterError(f"k={k} exceeds d={d}")
    if d > n - t:
        raise ParameterError(f"d={d} exceeds n-t={n - t}")
    field = field or default_field(n, d, t)
    x_count, y_count = point_supply(n, d, t, field.order)
    x_points = field.gf(np.arange(x_count))
    y_points = field.gf(np.arange(y_count))
    terms = monomials(k, d, t)
    if info_points is None:
        candidates = [p for node in range(k) for p in node_positions(node, d, t, x_count, y_count)]
        info_points = greedy_information_set(x_points, y_points, terms, candidates)
    info_points = tuple(tuple(p) for p in info_points)
    if len(info_points) != len(terms):
        raise ParameterError(f"{len(info_points)} information points for M={len(terms)}")
    try:
        precode = np.linalg.inv(evaluation_rows(x_points, y_points, terms, info_points))
    except np.linalg.LinAlgError as e:
        raise AlgebraError("information points do not form an information set") from e
    logger.debug(f"built ({n},{k},{d},{t}) bivariate code over {field.label}, M={len(terms)}")
    return MbcrCode(n, k, d, t, field, x_points, y_points, info_points, precode)


def mbcr_encode(code: MbcrCode, f) -> galois.FieldArray:
    """n × alpha payloads of the M-symbol file f"""
    f = _as_field(code, f)
    if f.size != code.M:
        raise ParameterError(f"expected {code.M} file symbols, got {f.size}")
    coefficients = code.precode @ f
    return vstack(code.gf, [(rows @ coefficients).reshape(1, -1) for rows in code.node_rows])


def node_polynomials(code: MbcrCode, payload, i: int) -> Tuple[galois.FieldArray, galois.FieldArray]:
    """(h_i, g_i) coefficient vectors, lowest degree first, from node i's payload"""
    if not 0 <= i < code.n:
        raise ParameterError(f"node {i} outside [0, {code.n})")
    payload = _as_field(code, payload)
    if payload.size != code.alpha:
        raise ParameterError(f"node payload needs {code.alpha} symbols, got {payload.size}")
    positions = code.positions(i)
    h_count = code.d + code.t
    ys = code.y_points[[b for _, b in positions[:h_count]]]
    h = interpolate(ys, payload[:h_count], h_count)
    xs = code.x_points[[i] + [a for a, _ in positions[h_count:]]]
    g_values = code.gf.Zeros(code.d)
    g_values[0] = payload[0]
    g_values[1:] = payload[h_count:]
    g = interpolate(xs, g_values, code.d)
    return h, g


def _payload_from_polynomials(code: MbcrCode, i: int, h, g) -> galois.FieldArray:
    positions = code.positions(i)
    h_count = code.d + code.t
    ys = code.y_points[[b for _, b in positions[:h_count]]]
    xs = code.x_points[[a for a, _ in positions[h_count:]]]
    payload = code.gf.Zeros(code.alpha)
    payload[:h_count] = evaluate(h, ys)
    if len(xs):
        payload[h_count:] = evaluate(g, xs)
    return payload


def mbcr_centralized_repair(
    code: MbcrCode, failed: Sequence[int], helpers: Sequence[int], payloads: Mapping[int, galois.FieldArray]
) -> RepairOutcome:
    """
    Rebuilds t nodes from d helpers, each sending g_j(x_i) and h_j(y_i) for
    every failed i: 2t symbols per helper, 2dt in total
    """
    failed, helpers = list(failed), list(helpers)
    if len(set(failed)) != code.t:
        raise ParameterError(f"repair needs exactly t={code.t} distinct failed nodes, got {failed}")
    if len(set(helpers)) != code.d:
        raise ParameterError(f"repair needs exactly d={code.d} distinct helpers, got {helpers}")
    if set(failed) & set(helpers):
        raise ParameterError(f"failed nodes {sorted(set(failed) & set(helpers))} cannot help")
    if any(not 0 <= node < code.n for node in failed + helpers):
        raise ParameterError(f"node indices must lie in [0, {code.n})")
    missing = [j for j in helpers if j not in payloads]
    if missing:
        raise MissingDataError(f"helper payloads missing for nodes {missing}")

    gf = code.gf
    x_failed = code.x_points[failed]
    y_failed = code.y_points[failed]
    # sent[j] = (g_j(x_i), h_j(y_i)) for i in failed
    sent = {}
    for j in helpers:
        h_j, g_j = node_polynomials(code, payloads[j], j)
        sent[j] = (evaluate(g_j, x_failed), evaluate(h_j, y_failed))

    x_helpers = code.x_points[helpers]
    g_polys = {}
    for position, i in enumerate(failed):
        values = gf([int(sent[j][1][position]) for j in helpers])
        g_polys[i] = interpolate(x_helpers, values, code.d)

    recovered = {}
    for position, i in enumerate(failed):
        ys = code.y_points[helpers + failed]
        from_helpers = [int(sent[j][0][position]) for j in helpers]
        from_failed = [int(evaluate(g_polys[other], code.x_points[[i]])[0]) for other in failed]
        h_i = interpolate(ys, gf(from_helpers + from_failed), code.d + code.t)
        recovered[i] = _payload_from_polynomials(code, i, h_i, g_polys[i])
    per_helper = {j: 2 * code.t for j in helpers}
    logger.debug(f"repaired {failed} from {helpers} with {sum(per_helper.values())} symbols")
    return RepairOutcome(recovered, per_helper)


def mbcr_reconstruct(code: MbcrCode, payloads: Mapping[int, galois.FieldArray]) -> galois.FieldArray:
    nodes = sorted(payloads)
    if len(nodes) != code.k or any(not 0 <= node < code.n for node in nodes):
        raise ParameterError(f"reconstruction needs exactly k={code.k} distinct nodes, got {nodes}")
    values = vstack(code.gf, [_as_field(code, payloads[node]).reshape(-1, 1) for node in nodes])
    try:
        coefficients = mat_solve(code.evaluation(nodes), values).reshape(-1)
    except SingularSystemError as e:
        raise AlgebraError(f"nodes {nodes} do not determine the file: {e}") from e
    return code.evaluation_rows(code.info_points) @ coefficients


def entropy_rank_table(code: MbcrCode, b: int) -> Dict[Tuple[int, ...], int]:
    if not 1 <= b <= code.k:
        raise ParameterError(f"b={b} outside [1, k={code.k}]")
    return {subset: mat_rank(code.evaluation(subset)) for subset in combinations(range(code.n), b)}


def entropy_accumulation_rank(code: MbcrCode, b: int) -> int:
    return max(entropy_rank_table(code, b).values())


def _as_field(code: MbcrCode, values) -> galois.FieldArray:
    if isinstance(values, galois.FieldArray) and type(values) is code.gf:
        return values
    if isinstance(values, galois.FieldArray):
        values = plain(values)
    return code.field.array(values)

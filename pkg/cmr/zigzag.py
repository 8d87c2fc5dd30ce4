"""
(n = k + r, k) zigzag MDS array code with centralized repair of up to three
systematic nodes.

Rows of every node are indexed by vectors of Z_r^m (m = k - 1), first
coordinate most significant. Systematic node j ≥ 1 owns coordinate j - 1 and
translates rows by the unit vector on it; node 0 translates by zero. Parity l
row s combines, for every systematic j, the symbol x_{i,j} with
i + l·v_j = s.
"""

from math import comb
from enum import IntEnum
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from dataclasses import dataclass, replace, field as dataclass_field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import galois
import numpy as np
import networkx as nx

from cmr.log import Log
from cmr.repair import RepairOutcome
from cmr.algebra import EliminationBasis, FieldSpec, block_rank, block_solve, plain, vstack
from cmr.errors import (
    AlgebraError,
    MissingDataError,
    ParameterError,
    ScheduleError,
    SingularSystemError,
    VerificationError,
)

logger = Log()

DEFAULT_RETRIES = 32
MAX_REPAIR_T = 3
GREEDY_ATTEMPTS = 8
# rank blocks over all k-subsets that GF(2^8) still clears within a few draws
GF256_BLOCK_LIMIT = 2048


@dataclass(frozen=True)
class ZigzagLayout:
    r: int
    k: int

    def __post_init__(self):
        if self.r < 2:
            raise ParameterError(f"zigzag codes need r >= 2 parities, got {self.r}")
        if self.k < 2:
            raise ParameterError(f"zigzag codes need k >= 2 systematic nodes, got {self.k}")

    @property
    def m(self) -> int:
        return self.k - 1

    @property
    def alpha(self) -> int:
        return self.r**self.m

    @property
    def n(self) -> int:
        return self.k + self.r

    def vec(self, i: int) -> Tuple[int, ...]:
        if not 0 <= i < self.alpha:
            raise ParameterError(f"row {i} outside [0, {self.alpha})")
        digits = []
        for _ in range(self.m):
            i, digit = divmod(i, self.r)
            digits.append(digit)
        return tuple(reversed(digits))

    def index(self, vec: Sequence[int]) -> int:
        if len(vec) != self.m:
            raise ParameterError(f"vector of length {len(vec)} for m={self.m}")
        i = 0
        for digit in vec:
            i = i * self.r + digit % self.r
        return i

    @cached_property
    def digits(self) -> np.ndarray:
        rows = np.arange(self.alpha)
        weights = self.r ** np.arange(self.m - 1, -1, -1)
        return (rows[:, None] // weights[None, :]) % self.r

    def unit(self, j: int) -> Tuple[int, ...]:
        """v_j: zero for node 0, the unit vector on coordinate j - 1 otherwise"""
        vec = [0] * self.m
        if j:
            vec[j - 1] = 1
        return tuple(vec)

    def shift(self, rows, l: int, j: int):
        """rows + l·v_j, elementwise for arrays"""
        if j == 0 or l % self.r == 0:
            return rows
        weight = self.r ** (self.m - j)
        digit = (rows // weight) % self.r
        return rows + ((digit + l) % self.r - digit) * weight

    def translate(self, i: int, offset: Sequence[int]) -> int:
        return self.index([a + b for a, b in zip(self.vec(i), offset)])


@dataclass(frozen=True)
class ZigzagCode:
    layout: ZigzagLayout
    field: FieldSpec
    coeffs: galois.FieldArray
    seed: int = 0
    attempts: int = 1
    schedules: Mapping[FrozenSet[int], "RepairSchedule"] = dataclass_field(
        default_factory=dict, compare=False, repr=False
    )

    @classmethod
    def from_coefficients(cls, r: int, k: int, field: FieldSpec, coeffs) -> "ZigzagCode":
        """Unverified code with explicit (r, alpha, k) coefficients"""
        layout = ZigzagLayout(r, k)
        coeffs = field.array(coeffs) if not isinstance(coeffs, galois.FieldArray) else coeffs
        if coeffs.shape != (r, layout.alpha, k):
            raise ParameterError(f"coefficients must have shape {(r, layout.alpha, k)}, got {coeffs.shape}")
        if np.any(plain(coeffs) == 0):
            raise ParameterError("zigzag coefficients must be nonzero")
        return cls(layout, field, coeffs)

    @property
    def r(self) -> int:
        return self.layout.r

    @property
    def k(self) -> int:
        return self.layout.k

    @property
    def n(self) -> int:
        return self.layout.n

    @property
    def alpha(self) -> int:
        return self.layout.alpha

    @property
    def gf(self):
        return self.field.gf

    @cached_property
    def sources(self) -> np.ndarray:
        """sources[l, j, s]: row of node j's symbol inside parity l row s"""
        rows = np.arange(self.alpha)
        return np.array(
            [[self.layout.shift(rows, -l, j) for j in range(self.k)] for l in range(self.r)], dtype=np.int64
        )


class Stage(IntEnum):
    FIRST = 1
    SECOND = 2


@dataclass(frozen=True)
class RepairSchedule:
    failed: Tuple[int, ...]
    downloads: Mapping[int, Tuple[int, ...]]
    stages: Mapping[int, Mapping[int, Stage]] = dataclass_field(compare=False)

    @property
    def t(self) -> int:
        return len(self.failed)

    @property
    def helpers(self) -> List[int]:
        return sorted(self.downloads)

    @property
    def total(self) -> int:
        return sum(len(rows) for rows in self.downloads.values())

    def parity_rows(self, k: int) -> Dict[int, Tuple[int, ...]]:
        return {node - k: rows for node, rows in self.downloads.items() if node >= k}

    def without(self, node: int, row: int) -> "RepairSchedule":
        """Copy with one downloaded row dropped"""
        downloads = dict(self.downloads)
        downloads[node] = tuple(s for s in downloads[node] if s != row)
        stages = {helper: dict(tags) for helper, tags in self.stages.items()}
        stages[node].pop(row, None)
        return RepairSchedule(self.failed, downloads, stages)


@dataclass(frozen=True)
class ScheduleCountReport:
    per_helper: Dict[int, int]
    expected_per_helper: Fraction
    total: int
    expected_total: Fraction

    @property
    def passed(self) -> bool:
        return self.total == self.expected_total and all(
            count == self.expected_per_helper for count in self.per_helper.values()
        )


@dataclass(frozen=True)
class SolvabilityResult:
    solvable: bool
    reason: str
    unknowns: int
    matching_size: int
    rank: Optional[int] = None
    unusable_rows: int = 0


def d_set(layout: ZigzagLayout, j: int, l: int) -> np.ndarray:
    """Parity-l rows downloaded when systematic node j fails alone"""
    if not 0 <= j < layout.k:
        raise ParameterError(f"node {j} is not systematic")
    rows = np.arange(layout.alpha)
    if j == 0:
        return rows[layout.digits.sum(axis=1) % layout.r == l % layout.r]
    return rows[layout.digits[:, j - 1] == 0]


def u_set(layout: ZigzagLayout, failed: Iterable[int], subset: Iterable[int], l: int) -> np.ndarray:
    """Parity-l rows lying in the single-repair sets of exactly the nodes in subset"""
    failed, subset = set(failed), set(subset)
    if not subset <= failed:
        raise ParameterError(f"{sorted(subset)} is not a subset of {sorted(failed)}")
    rows = np.arange(layout.alpha)
    mask = np.ones(layout.alpha, dtype=bool)
    for j in failed:
        member = np.isin(rows, d_set(layout, j, l))
        mask &= member if j in subset else ~member
    return rows[mask]


def u_set_size(r: int, k: int, t: int, s: int) -> int:
    size = Fraction(r) ** (k - 1 - s) * (1 - Fraction(1, r)) ** (t - s)
    if size.denominator != 1:
        raise ParameterError(f"no integral U-set size for r={r}, k={k}, t={t}, |S|={s}")
    return size.numerator


def zigzag_encode(code: ZigzagCode, data) -> galois.FieldArray:
    """
    Encodes k·alpha data symbols, node j holding data[j·alpha:(j+1)·alpha]

    Returns:
        FieldArray: n × alpha payload matrix, systematic nodes first
    """
    data = _as_field(code, data)
    if data.size != code.k * code.alpha:
        raise ParameterError(f"expected {code.k * code.alpha} data symbols, got {data.size}")
    columns = data.reshape(code.k, code.alpha)
    parities = []
    for l in range(code.r):
        parity = code.gf.Zeros(code.alpha)
        for j in range(code.k):
            parity += code.coeffs[l, :, j] * columns[j][code.sources[l, j]]
        parities.append(parity.reshape(1, -1))
    return vstack(code.gf, [columns] + parities)


def generator_rows(code: ZigzagCode, nodes: Sequence[int]) -> galois.FieldArray:
    """|nodes|·alpha × k·alpha map from data to the listed nodes' payloads"""
    alpha, k = code.alpha, code.k
    rows = np.arange(alpha)
    blocks = []
    for node in nodes:
        block = code.gf.Zeros((alpha, k * alpha))
        if node < k:
            block[rows, node * alpha + rows] = 1
        else:
            l = node - k
            for j in range(k):
                block[rows, j * alpha + code.sources[l, j]] = code.coeffs[l, :, j]
        blocks.append(block)
    return vstack(code.gf, blocks)


def default_zigzag_field(r: int, k: int) -> FieldSpec:
    """
    GF(2^8) for small codes, GF(2^16) once C(n, k)·r^(k-1) rank blocks make a
    singular one near certain in GF(2^8)
    """
    blocks = comb(r + k, k) * r ** (k - 1)
    return FieldSpec.binary(8) if blocks <= GF256_BLOCK_LIMIT else FieldSpec.binary(16)


def supported_patterns(layout: ZigzagLayout, max_t: int = MAX_REPAIR_T) -> List[Tuple[int, ...]]:
    top = min(max_t, MAX_REPAIR_T, layout.r, layout.k)
    return [pattern for t in range(1, top + 1) for pattern in combinations(range(layout.k), t)]


def zigzag_build(
    r: int,
    k: int,
    field: Optional[FieldSpec] = None,
    seed: int = 0,
    retries: int = DEFAULT_RETRIES,
    verify_mds: bool = True,
    max_t: int = MAX_REPAIR_T,
) -> ZigzagCode:
    """
    Draws nonzero coefficients until the code is MDS and every supported
    systematic failure pattern has a solvable balanced schedule

    Args:
        r (int): parity nodes
        k (int): systematic nodes
        field (FieldSpec): coefficient field, default_zigzag_field(r, k) by default
        seed (int): RNG seed; identical seeds give identical codes
        retries (int): coefficient draws before giving up
        verify_mds (bool): rank-check every k-subset of nodes
        max_t (int): largest failure pattern planned at build time
    """
    layout = ZigzagLayout(r, k)
    field = field or default_zigzag_field(r, k)
    rng = np.random.default_rng(seed)
    patterns = supported_patterns(layout, max_t)
    failure = None
    for attempt in range(1, retries + 1):
        coeffs = field.random((r, layout.alpha, k), rng, nonzero=True)
        code = ZigzagCode(layout, field, coeffs, seed, attempt)
        failure = _mds_failure(code) if verify_mds else None
        if failure is None:
            try:
                schedules = {frozenset(p): plan_schedule(code, p) for p in patterns}
                logger.debug(f"({code.n},{k}) zigzag verified on attempt {attempt}")
                return replace(code, schedules=schedules)
            except ScheduleError as e:
                failure = str(e)
        logger.debug(f"attempt {attempt} rejected: {failure}")
    raise VerificationError(f"no verified ({r + k},{k}) zigzag code in {retries} attempts", detail=failure)


def _mds_failure(code: ZigzagCode) -> Optional[str]:
    for subset in combinations(range(code.n), code.k):
        missing = [j for j in range(code.k) if j not in subset]
        if not missing:
            continue
        parities = [node for node in subset if node >= code.k]
        columns = np.concatenate([np.arange(j * code.alpha, (j + 1) * code.alpha) for j in missing])
        rank = block_rank(generator_rows(code, parities)[:, columns])
        if rank < len(missing) * code.alpha:
            return f"k-subset {subset} has rank deficiency {len(missing) * code.alpha - rank}"
    return None


def single_repair_schedule(code: ZigzagCode, j: int) -> RepairSchedule:
    if not 0 <= j < code.k:
        raise ParameterError(f"node {j} is not systematic in a ({code.n},{code.k}) code")
    return code.schedules.get(frozenset((j,))) or plan_schedule(code, (j,))


def multi_repair_schedule(code: ZigzagCode, failed: Iterable[int]) -> RepairSchedule:
    failed = _check_failed(code, failed)
    if len(failed) not in (2, 3):
        raise ParameterError(f"multi-node repair covers t in {{2, 3}}, got t={len(failed)}")
    return code.schedules.get(frozenset(failed)) or plan_schedule(code, failed)


def repair_schedule(code: ZigzagCode, failed: Iterable[int]) -> RepairSchedule:
    failed = _check_failed(code, failed)
    if len(failed) == 1:
        return single_repair_schedule(code, failed[0])
    return multi_repair_schedule(code, failed)


def _check_failed(code: ZigzagCode, failed: Iterable[int]) -> Tuple[int, ...]:
    failed = tuple(sorted(set(failed)))
    if not failed:
        raise ParameterError("no failed nodes given")
    if any(not 0 <= j < code.k for j in failed):
        raise ParameterError(f"failed set {failed} must contain systematic nodes only")
    if len(failed) > min(MAX_REPAIR_T, code.r):
        raise ParameterError(f"t={len(failed)} exceeds min(3, n-k={code.r}); fewer than k helpers remain")
    return failed


def canonical_schedule(code: ZigzagCode, failed: Iterable[int]) -> RepairSchedule:
    """Stage-one union plus the closed-form second stage, without any rank check"""
    failed = _check_failed(code, failed)
    stage_one = _stage_one(code.layout, failed)
    if len(failed) == 1:
        return _assemble(code, failed, stage_one, stage_one)
    anchor = _anchor(code.layout, failed)
    extra = _closed_form_rows(code.layout, failed)
    if anchor is None or extra is None:
        raise ScheduleError(f"no closed-form second stage for failed set {failed}")
    rows = {l: stage_one[l] | _shift_set(code.layout, extra, l, anchor) for l in range(code.r)}
    return _assemble(code, failed, rows, stage_one)


def plan_schedule(code: ZigzagCode, failed: Iterable[int]) -> RepairSchedule:
    """
    Balanced, verified schedule for a systematic failure pattern

    Closed forms are tried first (single failures, and patterns containing node 0
    relabelled onto the canonical one); anything they miss goes to a greedy
    orbit search. Every returned schedule has passed verify_solvability.
    """
    failed = _check_failed(code, failed)
    layout = code.layout
    target = len(failed) * code.alpha // code.r
    stage_one = _stage_one(layout, failed)
    try:
        schedule = canonical_schedule(code, failed)
        if _balanced(schedule, target) and verify_solvability(code, schedule).solvable:
            return schedule
        logger.debug(f"closed form for {failed} rejected, searching")
    except ScheduleError:
        pass
    if len(failed) == 1:
        raise ScheduleError(f"single-node repair of {failed[0]} is not solvable with these coefficients")
    rng = np.random.default_rng([code.seed, code.attempts, *failed])
    rows = _greedy_rows(code, failed, stage_one, target, rng)
    if rows is None:
        raise ScheduleError(f"no solvable balanced schedule found for failed set {failed}")
    schedule = _assemble(code, failed, rows, stage_one)
    result = verify_solvability(code, schedule)
    if not (_balanced(schedule, target) and result.solvable):
        raise ScheduleError(f"schedule search for {failed} produced an invalid schedule ({result.reason})")
    return schedule


def _balanced(schedule: RepairSchedule, target: int) -> bool:
    return all(len(rows) == target for rows in schedule.downloads.values())


def _stage_one(layout: ZigzagLayout, failed: Sequence[int]) -> Dict[int, Set[int]]:
    return {l: {int(s) for j in failed for s in d_set(layout, j, l)} for l in range(layout.r)}


def _anchor(layout: ZigzagLayout, failed: Sequence[int]) -> Optional[int]:
    helpers = [j for j in range(layout.k) if j not in failed]
    return helpers[0] if helpers else None


def _shift_set(layout: ZigzagLayout, rows: Iterable[int], l: int, j: int) -> Set[int]:
    return {int(layout.shift(s, l, j)) for s in rows}


def _orbits(layout: ZigzagLayout, failed: Sequence[int], anchor: int) -> List[FrozenSet[int]]:
    """
    Cosets of the translations v_j - v_anchor over surviving systematic j

    Parity-0 rows must be a union of these cosets for every surviving systematic
    helper to need the same rows from each parity.
    """
    r = layout.r
    base = np.array(layout.unit(anchor))
    generators = [
        tuple((np.array(layout.unit(j)) - base) % r)
        for j in range(layout.k)
        if j not in failed and j != anchor
    ]
    seen: Set[int] = set()
    orbits = []
    for start in range(layout.alpha):
        if start in seen:
            continue
        orbit, frontier = {start}, [start]
        while frontier:
            row = frontier.pop()
            for offset in generators:
                nxt = layout.translate(row, offset)
                if nxt not in orbit:
                    orbit.add(nxt)
                    frontier.append(nxt)
        seen |= orbit
        orbits.append(frozenset(orbit))
    return orbits


def _closed_form_rows(layout: ZigzagLayout, failed: Sequence[int]) -> Optional[Set[int]]:
    """
    Second-stage parity-0 rows for patterns containing node 0

    Coordinates are relabelled so the other failed nodes come first and the
    surviving systematic nodes follow; seeds are written in that order and
    expanded over the helper translation orbits. t=3 needs r >= 4 and a
    surviving systematic helper.
    """
    t, r = len(failed), layout.r
    if 0 not in failed or t not in (2, 3):
        return None
    others = [j for j in failed if j != 0]
    helpers = [j for j in range(1, layout.k) if j not in failed]
    if not helpers:
        return None
    order = others + helpers

    def place(canonical: Sequence[int]) -> int:
        vec = [0] * layout.m
        for c, value in enumerate(canonical):
            vec[order[c] - 1] = value % r
        return layout.index(vec)

    if t == 2:
        seeds = [place((r - 1, 1 - (r - 1)))]
    else:
        if r < 4:
            return None
        seeds = []
        seeds += [place((j, r - 1, 1 - j - (r - 1))) for j in range(1, r)]
        seeds += [place((r - 1, j, 2 - (r - 1) - j)) for j in range(1, r)]
        seeds.append(place((r - 1, r - 2, 1 - (r - 1) - (r - 2))))
        seeds += [place((r - 2, r - 2, j - 2 * (r - 2))) for j in range(1, r)]
        seeds.append(place((r - 3, r - 1, 3 - (r - 3) - (r - 1))))
    anchor = helpers[0]
    rows: Set[int] = set()
    for orbit in _orbits(layout, failed, anchor):
        if orbit & set(seeds):
            rows |= orbit
    return rows


def _equations(code: ZigzagCode, unknown_nodes: Sequence[int], pairs: Sequence[Tuple[int, int]]):
    """One row per (parity l, row s) over the unknown nodes' alpha-blocks"""
    eqs = code.gf.Zeros((len(pairs), len(unknown_nodes) * code.alpha))
    if not pairs:
        return eqs
    ls = np.array([l for l, _ in pairs])
    ss = np.array([s for _, s in pairs])
    index = np.arange(len(pairs))
    for position, j in enumerate(unknown_nodes):
        eqs[index, position * code.alpha + code.sources[ls, j, ss]] = code.coeffs[ls, ss, j]
    return eqs


def _greedy_rows(
    code: ZigzagCode,
    failed: Sequence[int],
    stage_one: Dict[int, Set[int]],
    target: int,
    rng: np.random.Generator,
) -> Optional[Dict[int, Set[int]]]:
    layout, r = code.layout, code.r
    anchor = _anchor(layout, failed)
    if anchor is None:
        units = [[(l, s)] for l in range(r) for s in range(code.alpha) if s not in stage_one[l]]
    else:
        orbits = _orbits(layout, failed, anchor)
        if any(orbit & stage_one[0] and not orbit <= stage_one[0] for orbit in orbits):
            return None
        units = [
            [(l, int(layout.shift(c, l, anchor))) for l in range(r) for c in sorted(orbit)]
            for orbit in orbits
            if not orbit <= stage_one[0]
        ]
    base = [(l, s) for l in range(r) for s in sorted(stage_one[l])]
    base_eqs = _equations(code, failed, base)
    for attempt in range(GREEDY_ATTEMPTS):
        basis = EliminationBasis(code.gf, len(failed) * code.alpha)
        if basis.add(base_eqs) < len(base):
            return None
        rows = {l: set(stage_one[l]) for l in range(r)}
        pending = list(units)
        if attempt:
            pending = [pending[i] for i in rng.permutation(len(pending))]
        while pending and any(len(rows[l]) < target for l in range(r)):
            pending.sort(key=lambda unit: len(rows[unit[0][0]]))
            unit = pending.pop(0)
            loads = {l: len(rows[l]) for l in range(r)}
            for l, _ in unit:
                loads[l] += 1
            if any(load > target for load in loads.values()):
                continue
            eqs = _equations(code, failed, unit)
            # gains never grow as the basis does, so a rejected unit stays rejected
            if basis.gain(eqs) == len(unit):
                basis.add(eqs)
                for l, s in unit:
                    rows[l].add(s)
        if all(len(rows[l]) == target for l in range(r)):
            return rows
    return None


def _assemble(
    code: ZigzagCode,
    failed: Sequence[int],
    parity_rows: Mapping[int, Set[int]],
    stage_one: Mapping[int, Set[int]],
) -> RepairSchedule:
    downloads: Dict[int, Tuple[int, ...]] = {}
    stages: Dict[int, Dict[int, Stage]] = {}
    for l in range(code.r):
        rows = sorted(parity_rows[l])
        downloads[code.k + l] = tuple(rows)
        stages[code.k + l] = {s: Stage.FIRST if s in stage_one[l] else Stage.SECOND for s in rows}
    for j in range(code.k):
        if j in failed:
            continue
        needed: Dict[int, Stage] = {}
        for l in range(code.r):
            for s in parity_rows[l]:
                i = int(code.sources[l, j, s])
                stage = Stage.FIRST if s in stage_one[l] else Stage.SECOND
                needed[i] = min(needed.get(i, stage), stage)
        downloads[j] = tuple(sorted(needed))
        stages[j] = needed
    return RepairSchedule(tuple(failed), downloads, stages)


def _usable_pairs(code: ZigzagCode, schedule: RepairSchedule) -> Tuple[List[Tuple[int, int]], int]:
    have = {node: set(rows) for node, rows in schedule.downloads.items()}
    helpers = [j for j in range(code.k) if j not in schedule.failed]
    usable, unusable = [], 0
    for l, rows in schedule.parity_rows(code.k).items():
        for s in rows:
            if all(int(code.sources[l, j, s]) in have.get(j, ()) for j in helpers):
                usable.append((l, s))
            else:
                unusable += 1
    return usable, unusable


def verify_solvability(code: ZigzagCode, schedule: RepairSchedule) -> SolvabilityResult:
    """
    Perfect matching between equations and unknowns first, exact rank second

    Parity rows that reference a surviving systematic symbol the schedule does
    not download are unusable and ignored.
    """
    unknowns = schedule.t * code.alpha
    pairs, unusable = _usable_pairs(code, schedule)
    eqs = _equations(code, schedule.failed, pairs)
    graph = nx.Graph()
    equation_nodes = [("eq", i) for i in range(len(pairs))]
    graph.add_nodes_from(equation_nodes)
    graph.add_nodes_from(("x", c) for c in range(unknowns))
    rows, cols = np.nonzero(plain(eqs))
    graph.add_edges_from((("eq", int(i)), ("x", int(c))) for i, c in zip(rows, cols))
    matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=equation_nodes)
    matching_size = len(matching) // 2
    if matching_size < unknowns:
        return SolvabilityResult(False, "matching", unknowns, matching_size, None, unusable)
    rank = block_rank(eqs)
    if rank < unknowns:
        return SolvabilityResult(False, "rank", unknowns, matching_size, rank, unusable)
    return SolvabilityResult(True, "solvable", unknowns, matching_size, rank, unusable)


def verify_schedule_counts(schedule: RepairSchedule, code: ZigzagCode) -> ScheduleCountReport:
    t = schedule.t
    d = code.n - t
    per_helper = {node: len(rows) for node, rows in sorted(schedule.downloads.items())}
    return ScheduleCountReport(
        per_helper=per_helper,
        expected_per_helper=Fraction(t * code.alpha, code.r),
        total=sum(per_helper.values()),
        expected_total=Fraction(d * t * code.alpha, code.r),
    )


def _known_columns(code: ZigzagCode, downloaded: Mapping[int, Tuple[Sequence[int], galois.FieldArray]]):
    columns, masks = {}, {}
    for node, (rows, values) in downloaded.items():
        column = code.gf.Zeros(code.alpha)
        mask = np.zeros(code.alpha, dtype=bool)
        column[list(rows)] = values
        mask[list(rows)] = True
        columns[node], masks[node] = column, mask
    return columns, masks


def _right_hand_side(code, pairs, parity_values, known_nodes, columns, masks):
    if not pairs:
        return parity_values
    ls = np.array([l for l, _ in pairs])
    ss = np.array([s for _, s in pairs])
    rhs = parity_values.copy()
    for j in known_nodes:
        rows = code.sources[ls, j, ss]
        if not masks[j][rows].all():
            raise MissingDataError(f"node {j} symbols needed by the schedule were not downloaded")
        rhs -= code.coeffs[ls, ss, j] * columns[j][rows]
    return rhs


def execute_repair(
    code: ZigzagCode, payloads: Mapping[int, galois.FieldArray], schedule: RepairSchedule
) -> RepairOutcome:
    """
    Recovers the failed systematic nodes from exactly the scheduled symbols

    Args:
        code (ZigzagCode): the code the payloads belong to
        payloads (Mapping[int, FieldArray]): surviving node payloads by node index
        schedule (RepairSchedule): which rows to read from which helper
    """
    downloaded = {}
    for node, rows in schedule.downloads.items():
        if node not in payloads:
            raise MissingDataError(f"helper node {node} is not available")
        downloaded[node] = (rows, _as_field(code, payloads[node])[list(rows)])
    columns, masks = _known_columns(code, downloaded)
    pairs = [(l, s) for l, rows in schedule.parity_rows(code.k).items() for s in rows]
    parity_values = code.gf.Zeros(len(pairs))
    for position, (l, s) in enumerate(pairs):
        parity_values[position] = columns[code.k + l][s]
    helpers = [j for j in range(code.k) if j not in schedule.failed]
    rhs = _right_hand_side(code, pairs, parity_values, helpers, columns, masks)
    try:
        x = block_solve(_equations(code, schedule.failed, pairs), rhs)
    except SingularSystemError as e:
        raise AlgebraError(f"verified schedule for {schedule.failed} became singular: {e}") from e
    recovered = {j: x[p * code.alpha : (p + 1) * code.alpha] for p, j in enumerate(schedule.failed)}
    per_helper = {node: len(rows) for node, rows in schedule.downloads.items()}
    logger.debug(f"repaired {schedule.failed} with {sum(per_helper.values())} symbols")
    return RepairOutcome(recovered, per_helper)


def decode_any_k(code: ZigzagCode, payloads: Mapping[int, galois.FieldArray]) -> galois.FieldArray:
    """Data vector from any k node payloads"""
    nodes = sorted(payloads)
    if len(nodes) != code.k or any(not 0 <= node < code.n for node in nodes):
        raise ParameterError(f"decoding needs exactly {code.k} distinct nodes out of {code.n}, got {nodes}")
    data = code.gf.Zeros((code.k, code.alpha))
    for node in nodes:
        if node < code.k:
            data[node] = _as_field(code, payloads[node])
    missing = [j for j in range(code.k) if j not in payloads]
    if missing:
        parities = [node - code.k for node in nodes if node >= code.k]
        pairs = [(l, s) for l in parities for s in range(code.alpha)]
        known = [j for j in range(code.k) if j in payloads]
        columns = {j: data[j] for j in known}
        masks = {j: np.ones(code.alpha, dtype=bool) for j in known}
        parity_values = vstack(code.gf, [_as_field(code, payloads[code.k + l]).reshape(1, -1) for l in parities])
        rhs = _right_hand_side(code, pairs, parity_values.reshape(-1), known, columns, masks)
        try:
            x = block_solve(_equations(code, missing, pairs), rhs)
        except SingularSystemError as e:
            raise AlgebraError(f"nodes {nodes} do not determine the data: {e}") from e
        for p, j in enumerate(missing):
            data[j] = x[p * code.alpha : (p + 1) * code.alpha]
    return data.reshape(-1)


def repair_nodes(
    code: ZigzagCode, payloads: Mapping[int, galois.FieldArray], failed: Iterable[int]
) -> RepairOutcome:
    """
    Restores any failed set: systematic patterns with t <= min(3, r) through
    their schedule, everything else by decoding k survivors and re-encoding
    """
    failed = tuple(sorted(set(failed)))
    survivors = [node for node in range(code.n) if node not in failed]
    if len(failed) <= min(MAX_REPAIR_T, code.r) and all(j < code.k for j in failed):
        return execute_repair(code, payloads, repair_schedule(code, failed))
    available = [node for node in survivors if node in payloads]
    if len(available) < code.k:
        raise MissingDataError(f"{len(available)} surviving nodes cannot rebuild a ({code.n},{code.k}) code")
    chosen = available[: code.k]
    data = decode_any_k(code, {node: payloads[node] for node in chosen})
    encoded = zigzag_encode(code, data)
    logger.info(f"rebuilt {failed} by full decode from {chosen}")
    return RepairOutcome({node: encoded[node] for node in failed}, {node: code.alpha for node in chosen})


def _as_field(code: ZigzagCode, values) -> galois.FieldArray:
    if isinstance(values, galois.FieldArray):
        if type(values) is not code.gf:
            return code.field.array(plain(values))
        return values
    return code.field.array(values)

"""
Functional-repair simulator at the minimum-storage multi-node point.

Each node keeps an alpha × M coefficient matrix over the file. A repair
reads t random combinations from each of d helpers and gives every newcomer
alpha random combinations of the d·t received rows.
"""

from fractions import Fraction
from itertools import combinations
from dataclasses import dataclass, field as dataclass_field
from typing import Dict, List, Optional, Sequence, Tuple

import galois
import numpy as np

from cmr.log import Log
from cmr.algebra import FieldSpec, mat_rank, vstack
from cmr.bounds import msmr_point
from cmr.errors import ParameterError, VerificationError

logger = Log()

INIT_RETRIES = 16


@dataclass
class DssState:
    n: int
    k: int
    d: int
    t: int
    field: FieldSpec
    nodes: List[galois.FieldArray]
    round: int = 0
    ledger: List[int] = dataclass_field(default_factory=list)
    redraws: int = 0

    @property
    def alpha(self) -> int:
        return self.d - self.k + self.t

    @property
    def M(self) -> int:
        return self.k * self.alpha

    @property
    def beta(self) -> int:
        return self.t

    def collection_failures(self) -> List[Tuple[int, ...]]:
        """k-subsets whose stacked coefficients no longer span the file"""
        return [
            subset
            for subset in combinations(range(self.n), self.k)
            if mat_rank(vstack(self.field.gf, [self.nodes[i] for i in subset])) < self.M
        ]


def _check_params(n: int, k: int, d: int, t: int) -> None:
    if min(n, k, d, t) < 1:
        raise ParameterError("n, k, d and t must be positive")
    if k > d:
        raise ParameterError(f"k={k} exceeds d={d}")
    if d > n - t:
        raise ParameterError(f"d={d} exceeds n-t={n - t}")


def rlnc_init(
    n: int,
    k: int,
    d: int,
    t: int,
    field: Optional[FieldSpec] = None,
    rng: Optional[np.random.Generator] = None,
    retries: int = INIT_RETRIES,
    require_full_rank: bool = True,
) -> DssState:
    _check_params(n, k, d, t)
    field = field or FieldSpec.binary(16)
    rng = rng if rng is not None else np.random.default_rng()
    alpha = d - k + t
    for attempt in range(1, retries + 1):
        state = DssState(n, k, d, t, field, [field.random((alpha, k * alpha), rng) for _ in range(n)])
        if not require_full_rank:
            return state
        failures = state.collection_failures()
        if not failures:
            return state
        logger.debug(f"initial draw {attempt} failed on {len(failures)} subsets")
    raise VerificationError(
        f"{field.label} too small: no full-rank initial state in {retries} draws", detail=str(failures[0])
    )


def rlnc_repair_round(
    state: DssState,
    failed: Sequence[int],
    helpers: Sequence[int],
    rng: np.random.Generator,
    redraws: int = 0,
) -> DssState:
    """
    One centralized repair; with redraws > 0 the newcomers re-mix the rows they
    already received until every k-subset spans the file again

    Re-mixing reads nothing new, so the ledger grows by d·t either way.
    """
    failed, helpers = list(failed), list(helpers)
    if len(set(failed)) != state.t:
        raise ParameterError(f"round needs t={state.t} distinct failed nodes, got {failed}")
    if len(set(helpers)) != state.d:
        raise ParameterError(f"round needs d={state.d} distinct helpers, got {helpers}")
    if set(failed) & set(helpers):
        raise ParameterError("failed nodes cannot act as helpers")
    if any(not 0 <= node < state.n for node in failed + helpers):
        raise ParameterError(f"node indices must lie in [0, {state.n})")
    gf = state.field.gf
    received = vstack(
        gf, [state.field.random((state.t, state.alpha), rng) @ state.nodes[j] for j in helpers]
    )
    for attempt in range(redraws + 1):
        for node in failed:
            state.nodes[node] = state.field.random((state.alpha, received.shape[0]), rng) @ received
        if not redraws or not state.collection_failures():
            break
        if attempt < redraws:
            state.redraws += 1
            logger.warning(f"round {state.round + 1}: re-mixing newcomers {failed} ({attempt + 1}/{redraws})")
    state.round += 1
    state.ledger.append(state.d * state.t)
    return state


@dataclass(frozen=True)
class StressReport:
    params: Dict[str, object]
    rounds: int
    rounds_survived: int
    failures: List[Dict[str, object]]
    bandwidth_per_round: int
    ledger_total: int
    bound_ratio: Fraction
    redraws: int

    @property
    def rank_failures(self) -> int:
        return sum(len(entry["subsets"]) for entry in self.failures)

    @property
    def passed(self) -> bool:
        return not self.failures and self.bound_ratio == 1

    def to_dict(self) -> Dict[str, object]:
        return {
            "params": self.params,
            "rounds": self.rounds,
            "rounds_survived": self.rounds_survived,
            "rank_failures": self.rank_failures,
            "failures": self.failures,
            "bandwidth_per_round": self.bandwidth_per_round,
            "ledger_total": self.ledger_total,
            "bound_ratio": str(self.bound_ratio),
            "redraws": self.redraws,
        }


def rlnc_stress(
    n: int,
    k: int,
    d: int,
    t: int,
    rounds: int,
    seed: int = 0,
    field: Optional[FieldSpec] = None,
    check_every: int = 1,
    redraws: int = 0,
) -> StressReport:
    """
    Runs rounds of random failure patterns and reports data-collection failures

    Args:
        check_every (int): rank-check every k-subset on these rounds (and the last)
        redraws (int): newcomer re-mixes allowed on checked rounds; 0 reports
            every lost k-subset as a failure, anything else is counted in
            StressReport.redraws and logged
    """
    _check_params(n, k, d, t)
    if check_every < 1:
        raise ParameterError("check_every must be positive")
    field = field or FieldSpec.binary(16)
    rng = np.random.default_rng(seed)
    state = rlnc_init(n, k, d, t, field, rng, require_full_rank=False)
    failures = []
    initial = state.collection_failures()
    if initial:
        failures.append({"round": 0, "subsets": [list(s) for s in initial]})
    for current in range(1, rounds + 1):
        failed = sorted(int(v) for v in rng.choice(n, size=t, replace=False))
        survivors = [node for node in range(n) if node not in failed]
        helpers = sorted(int(v) for v in rng.choice(survivors, size=d, replace=False))
        checked = current % check_every == 0 or current == rounds
        rlnc_repair_round(state, failed, helpers, rng, redraws=redraws if checked else 0)
        if checked:
            lost = state.collection_failures()
            if lost:
                logger.warning(f"round {current}: {len(lost)} k-subsets lost full rank")
                failures.append({"round": current, "subsets": [list(s) for s in lost]})
    _, gamma = msmr_point(state.M, k, d, t)
    per_round = d * t
    survived = failures[0]["round"] - 1 if failures else rounds
    return StressReport(
        params={"n": n, "k": k, "d": d, "t": t, "field": field.label, "seed": seed, "check_every": check_every},
        rounds=rounds,
        rounds_survived=max(survived, 0),
        failures=failures,
        bandwidth_per_round=per_round,
        ledger_total=sum(state.ledger),
        bound_ratio=Fraction(per_round) / gamma,
        redraws=state.redraws,
    )

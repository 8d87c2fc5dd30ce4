"""
The operations behind each command. Every function drives the coding modules
stripe by stripe and returns a report dict; the CLI only parses flags, renders
reports and maps errors to exit codes.
"""

from math import comb
from pathlib import Path
from fractions import Fraction
from collections import Counter
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from cmr.log import Log
from cmr.config import JobConfig
from cmr.algebra import FieldSpec, vstack
from cmr.rlnc import rlnc_stress
from cmr.utils import bandwidth_entry, check_entry, fraction_text
from cmr.errors import MissingDataError, ParameterError, PayloadFormatError, VerificationError
from cmr.bounds import (
    CmrParams,
    SecretParams,
    mbcr_entropy,
    mbcr_operating_params,
    mbmr_operating_point,
    min_file_size_bound,
    msmr_point,
    secret_bw_bound,
)
from cmr.files import (
    CodeKind,
    NodeFileManager,
    PayloadHeader,
    SecretHeader,
    bytes_to_symbols,
    symbols_to_bytes,
    write_atomic,
)
from cmr.mbcr import (
    MbcrCode,
    default_field,
    entropy_rank_table,
    mbcr_build,
    mbcr_centralized_repair,
    mbcr_encode,
    mbcr_reconstruct,
)
from cmr.zigzag import (
    DEFAULT_RETRIES,
    ZigzagCode,
    decode_any_k,
    default_zigzag_field,
    execute_repair,
    repair_nodes,
    repair_schedule,
    supported_patterns,
    verify_schedule_counts,
    verify_solvability,
    zigzag_build,
    zigzag_encode,
)
from cmr.secret import (
    SchemeKind,
    SecretScheme,
    mbmr_scheme,
    msmr_zigzag_scheme,
    secrecy_scan,
    leakage,
    secret_reconstruct,
    secret_repair_shares,
    secret_share,
)

logger = Log()

Code = Union[ZigzagCode, MbcrCode]

VERIFY_DEFAULTS = {
    "zigzag": {"n": 6, "k": 3},
    "mbcr": {"n": 6, "k": 3, "d": 4, "t": 2},
    "rlnc": {"n": 8, "k": 4, "d": 5, "t": 2},
    "msmr-zigzag": {"n": 6, "z": 1, "t": 2},
    "mbmr-bivariate": {"n": 4, "z": 1, "t": 1, "d": 2},
}


def resolve_field(job: JobConfig, fallback: FieldSpec) -> FieldSpec:
    """
    The job's field, else fallback for zigzag-based codes and the smallest
    workable prime otherwise

    A GF(2^8) fallback is widened to GF(2^16) for zigzag codes too large to
    verify over GF(2^8); an explicit --field is never changed.
    """
    if job.field is not None:
        return job.field
    if job.code == "zigzag" or job.scheme == SchemeKind.MSMR_ZIGZAG.value:
        r, k = (job.r, job.k) if job.code == "zigzag" else (job.n - job.z - job.t, job.z + job.t)
        wider = default_zigzag_field(r, k)
        if fallback == FieldSpec.binary(8) and wider.order > fallback.order:
            logger.info(f"({r + k},{k}) zigzag code needs {wider.label}; using it instead of {fallback.label}")
            return wider
        return fallback
    if job.code == "rlnc":
        return FieldSpec.binary(16)
    return default_field(job.n, job.d, job.t)


def build_scheme(
    kind: str, n: int, z: int, t: int, d: Optional[int], field: FieldSpec, seed: int
) -> SecretScheme:
    if kind == SchemeKind.MSMR_ZIGZAG.value:
        return msmr_zigzag_scheme(n - z - t, z, t, field=field, seed=seed)
    return mbmr_scheme(n, z, t, d, field=field)


def code_from_header(header: PayloadHeader, retries: int = DEFAULT_RETRIES) -> Union[Code, SecretScheme]:
    if header.code_kind is CodeKind.ZIGZAG:
        return zigzag_build(header.n - header.k, header.k, header.field, header.seed, retries)
    if header.code_kind is CodeKind.MBCR:
        return mbcr_build(header.n, header.k, header.d, header.t, header.field)
    if header.code_kind is CodeKind.SECRET:
        s = header.secret
        return build_scheme(s.kind, header.n, s.z, s.t, header.d, header.field, header.seed)
    raise PayloadFormatError(f"{header.code_kind.name.lower()} payloads are not file-backed")


def _params(**values: Any) -> Dict[str, Any]:
    return {key: (value.label if isinstance(value, FieldSpec) else value) for key, value in values.items()}


def _encode_stripe(code: Code, stripe):
    if isinstance(code, ZigzagCode):
        return zigzag_encode(code, stripe)
    return mbcr_encode(code, stripe)


def encode(job: JobConfig, data: bytes, retries: int = DEFAULT_RETRIES) -> Dict[str, Any]:
    """Writes one node file per node of the job's code under job.output"""
    field = job.field
    if job.code == "zigzag":
        code = zigzag_build(job.r, job.k, field, job.seed, retries)
        kind, size, d, t = CodeKind.ZIGZAG, code.k * code.alpha, 0, 0
    elif job.code == "mbcr":
        code = mbcr_build(job.n, job.k, job.d, job.t, field)
        kind, size, d, t = CodeKind.MBCR, code.M, job.d, job.t
    else:
        raise ParameterError(f"{job.code} payloads are not file-backed; use `cmr verify --rlnc`")
    symbols = bytes_to_symbols(data, field, size)
    encoded = [_encode_stripe(code, field.array(stripe)) for stripe in symbols]
    manager = NodeFileManager(job.output)
    files = []
    for node in range(code.n):
        payload = vstack(field.gf, [stripe[node].reshape(1, -1) for stripe in encoded])
        header = PayloadHeader(kind, field, code.n, code.k, d, t, node, job.seed, len(data), len(encoded), code.alpha)
        files.append(manager.write(header, payload).name)
    used = -(-8 * len(data) // field.data_bits)
    logger.info(f"encoded {len(data)} bytes into {len(encoded)} stripes of {size} symbols")
    return {
        "command": "encode",
        "params": _params(code=job.code, n=code.n, k=code.k, d=d, t=t, field=field, alpha=code.alpha),
        "seed": job.seed,
        "length": len(data),
        "stripes": len(encoded),
        "padding_symbols": len(encoded) * size - used,
        "files": files,
    }


def _zigzag_bound(code: ZigzagCode, t: int) -> Fraction:
    d = code.n - t
    if d < code.k:
        return Fraction(0)
    return msmr_point(code.k * code.alpha, code.k, d, t)[1]


def _mbcr_bound(code: MbcrCode) -> Fraction:
    return mbcr_operating_params(code.M, code.k, code.d, code.t).beta * code.d * code.t


def _secret_bound(scheme: SecretScheme, d: int) -> Fraction:
    p = SecretParams(scheme.N, scheme.z, scheme.N - d, scheme.secret_size, scheme.alpha)
    return secret_bw_bound(p, d)


def repair(
    directory: Path,
    failed: Sequence[int],
    helpers: Sequence[int] = (),
    retries: int = DEFAULT_RETRIES,
    output: Optional[Path] = None,
) -> Dict[str, Any]:
    """
    Rebuilds the failed node (or share) files from the surviving ones

    Files of failed indices are ignored even when present. Repaired files go
    to output, the source directory by default.
    """
    manager = NodeFileManager(directory)
    prefix = manager.discover()
    found = manager.read_all(prefix)
    header = next(iter(found.values()))[0]
    failed = sorted(set(failed))
    if not failed:
        raise ParameterError("name at least one failed index with --failed")
    available = {i: payload for i, (_, payload) in found.items() if i not in failed}
    code = code_from_header(header, retries)
    limit = code.N if isinstance(code, SecretScheme) else code.n
    if any(i >= limit for i in failed):
        raise ParameterError(f"failed indices {failed} outside [0, {limit})")
    chosen = sorted(helpers) if helpers else sorted(available)
    missing = [i for i in chosen if i not in available]
    if missing:
        raise MissingDataError(f"{prefix} files for helpers {missing} are not available")

    per_helper: Counter = Counter()
    recovered: Dict[int, List] = {i: [] for i in failed}
    for s in range(header.stripes):
        stripe = {i: available[i][s] for i in chosen}
        if isinstance(code, SecretScheme):
            outcome = secret_repair_shares(code, failed, stripe)
        elif isinstance(code, ZigzagCode):
            outcome = repair_nodes(code, stripe, failed)
        else:
            if len(chosen) < code.d:
                raise MissingDataError(f"repair reads d={code.d} helpers, {len(chosen)} available")
            outcome = mbcr_centralized_repair(code, failed, chosen[: code.d], stripe)
        per_helper.update(outcome.per_helper)
        for i in failed:
            recovered[i].append(outcome.recovered[i].reshape(1, -1))

    if isinstance(code, SecretScheme):
        if code.kind is SchemeKind.MBMR_BIVARIATE:
            bound = _secret_bound(code, code.base.d)
        else:
            base_failed = len({code.base_node(i) for i in failed} | set(code.punctured))
            bound = _zigzag_bound(code.base, base_failed)
    elif isinstance(code, ZigzagCode):
        bound = _zigzag_bound(code, len(failed))
    else:
        bound = _mbcr_bound(code)

    target = NodeFileManager(output or directory)
    files = [target.write(replace(header, index=i), vstack(header.field.gf, recovered[i])).name for i in failed]
    downloaded = sum(per_helper.values())
    return {
        "command": "repair",
        "params": _params(kind=prefix, n=header.n, k=header.k, d=header.d, t=header.t, field=header.field),
        "seed": header.seed,
        "failed": failed,
        "stripes": header.stripes,
        "bandwidth": bandwidth_entry(downloaded, bound * header.stripes, per_helper),
        "files": files,
    }


def reconstruct(
    directory: Path, output: Path, indices: Sequence[int] = (), retries: int = DEFAULT_RETRIES
) -> Dict[str, Any]:
    """
    Recovers the original bytes: decoding from k node files, or repairing the
    punctured nodes from d share files
    """
    manager = NodeFileManager(directory)
    prefix = manager.discover()
    found = manager.read_all(prefix)
    header = next(iter(found.values()))[0]
    chosen = sorted(set(indices)) if indices else sorted(found)
    missing = [i for i in chosen if i not in found]
    if missing:
        raise MissingDataError(f"{prefix} files {missing} are not available")
    code = code_from_header(header, retries)
    report: Dict[str, Any] = {
        "command": "reconstruct",
        "params": _params(kind=prefix, n=header.n, k=header.k, d=header.d, t=header.t, field=header.field),
        "seed": header.seed,
        "length": header.length,
        "output": Path(output).name,
    }
    stripes = []
    if isinstance(code, SecretScheme):
        per_helper: Counter = Counter()
        for s in range(header.stripes):
            secret, outcome = secret_reconstruct(code, {i: found[i][1][s] for i in chosen})
            per_helper.update(outcome.per_helper)
            stripes.append(secret.reshape(1, -1))
        used = sorted(per_helper)
        bound = _secret_bound(code, len(used))
        report["bandwidth"] = bandwidth_entry(sum(per_helper.values()), bound * header.stripes, per_helper)
    else:
        if len(chosen) < code.k:
            raise MissingDataError(f"decoding needs k={code.k} node files, {len(chosen)} available")
        used = chosen[: code.k]
        for s in range(header.stripes):
            payloads = {i: found[i][1][s] for i in used}
            if isinstance(code, ZigzagCode):
                stripes.append(decode_any_k(code, payloads).reshape(1, -1))
            else:
                stripes.append(mbcr_reconstruct(code, payloads).reshape(1, -1))
    report["used"] = used
    data = symbols_to_bytes(vstack(header.field.gf, stripes), header.field, header.length)
    write_atomic(Path(output), data)
    return report


def share(job: JobConfig, data: bytes) -> Dict[str, Any]:
    """Splits a secret file into N share files under job.output"""
    field = job.field
    scheme = build_scheme(job.scheme, job.n, job.z, job.t, job.d, field, job.seed)
    symbols = bytes_to_symbols(data, field, scheme.secret_size)
    rng = np.random.default_rng([job.seed, int(CodeKind.SECRET)])
    shares = [secret_share(scheme, field.array(stripe), rng) for stripe in symbols]
    extension = SecretHeader(scheme.kind.value, scheme.N, scheme.z, scheme.t, scheme.secret_size, scheme.punctured)
    manager = NodeFileManager(job.output)
    files = []
    for i in range(scheme.N):
        payload = vstack(field.gf, [stripe[i].reshape(1, -1) for stripe in shares])
        header = PayloadHeader(
            CodeKind.SECRET,
            field,
            scheme.base.n,
            scheme.base.k,
            scheme.d,
            scheme.t,
            i,
            job.seed,
            len(data),
            len(shares),
            scheme.alpha,
            secret=extension,
        )
        files.append(manager.write(header, payload).name)
    return {
        "command": "share",
        "params": _params(
            kind=scheme.kind.value,
            n=scheme.base.n,
            N=scheme.N,
            z=scheme.z,
            t=scheme.t,
            d=scheme.d,
            field=field,
            secret_size=scheme.secret_size,
            randomness_size=scheme.randomness_size,
        ),
        "seed": job.seed,
        "length": len(data),
        "stripes": len(shares),
        "files": files,
    }


def bounds_report(
    k: int,
    d: int,
    t: int,
    file_size: Optional[int] = None,
    n: Optional[int] = None,
    z: Optional[int] = None,
    secret_size: Optional[int] = None,
) -> Dict[str, Any]:
    """Every closed-form quantity for one parameter set; M defaults to k(d-k+t)"""
    M = Fraction(file_size if file_size is not None else k * (d - k + t))
    alpha, gamma = msmr_point(M, k, d, t)
    p = CmrParams(n, k, d, t, alpha, gamma / d)
    bound, partition = min_file_size_bound(p)
    mbcr = mbcr_operating_params(M, k, d, t)
    mbmr = mbmr_operating_point(M, k, d, t)
    report: Dict[str, Any] = {
        "command": "bounds",
        "params": _params(n=n, k=k, d=d, t=t, M=fraction_text(M)),
        "msmr": {"alpha": fraction_text(alpha), "beta": fraction_text(gamma / d), "gamma": fraction_text(gamma)},
        "file_size_bound": {"value": fraction_text(bound), "partition": list(partition.sizes)},
        "mbcr": {
            "alpha": fraction_text(mbcr.alpha),
            "beta": fraction_text(mbcr.beta),
            "beta_prime": fraction_text(mbcr.beta_prime),
        },
        "mbmr": {
            "gamma": fraction_text(mbmr.gamma),
            "divisible": mbmr.divisible,
            "hb_thresholds": [fraction_text(value) for value in mbmr.hb_thresholds],
        },
    }
    if z is not None:
        shares = n if n is not None else d
        size = secret_size if secret_size is not None else M
        secret = SecretParams(shares, z, shares - d, int(size), int(alpha))
        report["secret"] = {"N": shares, "z": z, "secret_size": fraction_text(size), "bandwidth": fraction_text(secret_bw_bound(secret, d))}
    return report


def _suite_params(name: str, job: JobConfig, r: Optional[int] = None) -> Dict[str, int]:
    params = dict(VERIFY_DEFAULTS[name])
    for key in list(params):
        value = getattr(job, key)
        if value is not None:
            params[key] = value
    if name == "zigzag" and r is not None:
        params["n"] = params["k"] + r
    return params


def _verify_zigzag(n: int, k: int, field: FieldSpec, seed: int, retries: int) -> List[Dict[str, Any]]:
    try:
        code = zigzag_build(n - k, k, field, seed, retries)
    except VerificationError as e:
        return [check_entry(f"zigzag ({n},{k}) build", False, str(e))]
    checks = [check_entry(f"zigzag ({n},{k}) mds", True, f"{comb(n, k)} k-subsets full rank")]
    payloads = zigzag_encode(code, field.random(code.k * code.alpha, np.random.default_rng(seed)))
    for pattern in supported_patterns(code.layout):
        schedule = repair_schedule(code, pattern)
        counts = verify_schedule_counts(schedule, code)
        solvable = verify_solvability(code, schedule)
        outcome = execute_repair(code, {i: payloads[i] for i in range(code.n) if i not in pattern}, schedule)
        exact = all(np.array_equal(outcome.recovered[j], payloads[j]) for j in pattern)
        checks.append(
            check_entry(
                f"zigzag repair {list(pattern)}",
                counts.passed and solvable.solvable and exact,
                f"{counts.total} symbols, bound {fraction_text(counts.expected_total)}",
            )
        )
    return checks


def _verify_mbcr(n: int, k: int, d: int, t: int, field: FieldSpec, seed: int) -> List[Dict[str, Any]]:
    code = mbcr_build(n, k, d, t, field)
    checks = []
    for b in range(1, k + 1):
        expected = int(mbcr_entropy(b, d, t, 2))
        ranks = set(entropy_rank_table(code, b).values())
        checks.append(check_entry(f"mbcr entropy b={b}", ranks == {expected}, f"ranks {sorted(ranks)}, H_b {expected}"))
    rng = np.random.default_rng(seed)
    f = field.random(code.M, rng)
    payloads = mbcr_encode(code, f)
    failed, helpers = list(range(t)), list(range(t, t + d))
    outcome = mbcr_centralized_repair(code, failed, helpers, {j: payloads[j] for j in helpers})
    exact = all(np.array_equal(outcome.recovered[i], payloads[i]) for i in failed)
    bound = _mbcr_bound(code)
    checks.append(
        check_entry(
            f"mbcr repair {failed}", exact and outcome.downloaded == bound, f"{outcome.downloaded} symbols, bound {fraction_text(bound)}"
        )
    )
    last = list(range(n - k, n))
    decoded = mbcr_reconstruct(code, {i: payloads[i] for i in last})
    checks.append(check_entry(f"mbcr reconstruct {last}", np.array_equal(decoded, f)))
    return checks


def _verify_secret(
    kind: str, params: Dict[str, int], field: FieldSpec, seed: int, all_subsets: bool
) -> List[Dict[str, Any]]:
    scheme = build_scheme(kind, params["n"], params["z"], params["t"], params.get("d"), field, seed)
    if all_subsets:
        reports = secrecy_scan(scheme)
    else:
        reports = [leakage(scheme, range(scheme.z))]
    checks = [
        check_entry(f"leakage {list(report.subset)}", report.secure, f"{report.leaked_symbols} symbols")
        for report in reports
    ]
    rng = np.random.default_rng(seed)
    secret = field.random(scheme.secret_size, rng)
    shares = secret_share(scheme, secret, rng)
    recovered, outcome = secret_reconstruct(scheme, {i: shares[i] for i in range(scheme.d)})
    bound = _secret_bound(scheme, scheme.d)
    checks.append(
        check_entry(
            f"{scheme.kind.value} reconstruct",
            np.array_equal(recovered, secret) and outcome.downloaded == bound,
            f"{outcome.downloaded} symbols, bound {fraction_text(bound)}",
        )
    )
    return checks


def verify(
    job: JobConfig,
    suites: Sequence[str],
    fallback_field: FieldSpec,
    r: Optional[int] = None,
    all_z_subsets: bool = False,
    rounds: int = 100,
    check_every: int = 1,
    retries: int = DEFAULT_RETRIES,
) -> Dict[str, Any]:
    """Runs the selected suites; the report's checks decide the exit code"""
    if not suites:
        raise ParameterError("select at least one of --zigzag, --mbcr, --secret, --rlnc")
    report: Dict[str, Any] = {"command": "verify", "params": {}, "seed": job.seed, "checks": []}
    for suite in suites:
        if suite == "secret":
            name = job.scheme or SchemeKind.MBMR_BIVARIATE.value
            params = _suite_params(name, job)
            field = resolve_field(replace(job, code="secret", kind=name, **params), fallback_field)
            report["checks"] += _verify_secret(name, params, field, job.seed, all_z_subsets)
        else:
            name = suite
            params = _suite_params(name, job, r)
            field = resolve_field(replace(job, code=name, **params), fallback_field)
            if name == "zigzag":
                report["checks"] += _verify_zigzag(params["n"], params["k"], field, job.seed, retries)
            elif name == "mbcr":
                report["checks"] += _verify_mbcr(field=field, seed=job.seed, **params)
            else:
                stress = rlnc_stress(rounds=rounds, seed=job.seed, field=field, check_every=check_every, **params)
                report["stress"] = stress.to_dict()
                report["checks"].append(
                    check_entry("rlnc data collection", not stress.failures, f"{stress.rank_failures} rank failures")
                )
                report["checks"].append(
                    check_entry("rlnc bandwidth", stress.bound_ratio == 1, f"ratio {fraction_text(stress.bound_ratio)}")
                )
        report["params"][name] = _params(field=field, **params)
    return report

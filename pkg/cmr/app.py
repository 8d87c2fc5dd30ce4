from pathlib import Path
from typing import Any, Dict, Optional

import toml
import typer
from typer import echo

from cmr import workflows
from cmr.log import Log
from cmr.algebra import FieldSpec
from cmr.errors import CmrError, MissingDataError, ParameterError
from cmr.config import Config, JobConfig
from cmr.utils import parse_node_list, render_report, report_passed

app = typer.Typer(add_completion=False)
logger = Log()


def get_version():
    pyproject = toml.load(Path(__file__).resolve().parent.parent / "pyproject.toml")
    return pyproject["tool"]["poetry"]["version"]


def version_callback(value: bool):
    if value:
        print(f"CMR CLI Version: {get_version()}")
        raise typer.Exit()


@app.callback()
def common(
    ctx: typer.Context,
    version: bool = typer.Option(
        None, "--version", callback=version_callback, help="Show the version and exit.", is_eager=True
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging on stderr."),
):
    settings = Config()
    logger.set_debug(verbose or settings.get_bool("CMR_DEBUG"))
    ctx.obj = settings


def fail(e: CmrError):
    echo(f"error: {e}", err=True)
    raise typer.Exit(code=e.exit_code)


def _settings(ctx: typer.Context) -> Config:
    return ctx.obj if isinstance(ctx.obj, Config) else Config()


def build_job(ctx: typer.Context, command: str, job_file: Optional[Path], **flags: Any) -> JobConfig:
    """Flags over the job file over the user's config over built-in defaults"""
    settings = _settings(ctx)
    base = JobConfig(command=command).merged(
        {
            "seed": settings.get_int("CMR_SEED"),
            "output": settings.get("CMR_OUTPUT_DIR"),
            "report_format": settings.get("CMR_REPORT_FORMAT"),
        }
    )
    if job_file:
        job = JobConfig.from_toml(job_file, flags, base=base)
    else:
        job = base.merged(flags)
    job = job.validate()
    return job.merged({"field": workflows.resolve_field(job, FieldSpec.parse(settings.get("CMR_FIELD")))})


def _format(ctx: typer.Context, fmt: Optional[str]) -> str:
    fmt = fmt or _settings(ctx).get("CMR_REPORT_FORMAT")
    if fmt not in ("table", "json"):
        raise typer.BadParameter(f"format must be table or json, got {fmt!r}")
    return fmt


@app.command()
def bounds(
    ctx: typer.Context,
    n: Optional[int] = typer.Option(None, "--n", help="Nodes; optional."),
    k: int = typer.Option(..., "--k", help="Nodes read by a data collector."),
    d: int = typer.Option(..., "--d", help="Helpers per repair."),
    t: int = typer.Option(1, "--t", help="Nodes repaired together."),
    file_size: Optional[int] = typer.Option(None, "--M", help="File size in symbols; k(d-k+t) by default."),
    z: Optional[int] = typer.Option(None, "--z", help="Eavesdropped shares, for the secret-sharing bound."),
    secret_size: Optional[int] = typer.Option(None, "--secret-size", help="Secret symbols; M by default."),
    fmt: Optional[str] = typer.Option(None, "--format", help="table or json."),
) -> None:
    """
    Prints the file-size bound, the MSMR/MBMR/MBCR operating points and the secret-sharing bound

    Args:
        k, d, t (int): reconstruction degree, helpers, failures per repair
        file_size (int): file size M in symbols
    """
    try:
        report = workflows.bounds_report(k, d, t, file_size=file_size, n=n, z=z, secret_size=secret_size)
    except CmrError as e:
        fail(e)
    render_report(report, _format(ctx, fmt))


@app.command()
def encode(
    ctx: typer.Context,
    input_file: Path = typer.Argument(..., help="File to encode."),
    code: Optional[str] = typer.Option(None, "--code", help="zigzag or mbcr."),
    n: Optional[int] = typer.Option(None, "--n"),
    k: Optional[int] = typer.Option(None, "--k"),
    d: Optional[int] = typer.Option(None, "--d"),
    t: Optional[int] = typer.Option(None, "--t"),
    field: Optional[str] = typer.Option(None, "--field", help="gf256, gf65536 or prime:P."),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out: Optional[Path] = typer.Option(None, "--out", help="Directory for node files."),
    fmt: Optional[str] = typer.Option(None, "--format"),
    job_file: Optional[Path] = typer.Option(None, "--job", help="TOML job file."),
) -> None:
    """
    Encodes a file into one node file per node

    Args:
        input_file (Path): bytes to encode, zero padded to whole stripes
    """
    try:
        job = build_job(ctx, "encode", job_file, code=code, n=n, k=k, d=d, t=t, field=field, seed=seed, output=out)
        if not input_file.is_file():
            raise MissingDataError(f"input file {input_file.name} not found")
        report = workflows.encode(job, input_file.read_bytes(), _settings(ctx).get_int("CMR_BUILD_RETRIES"))
    except CmrError as e:
        fail(e)
    render_report(report, _format(ctx, fmt or job.report_format))


@app.command()
def repair(
    ctx: typer.Context,
    failed: str = typer.Option(..., "--failed", help="Failed node or share indices, e.g. 0,1."),
    helpers: Optional[str] = typer.Option(None, "--helpers", help="Helper indices; every survivor by default."),
    source: Optional[Path] = typer.Option(None, "--in", help="Directory holding the node or share files."),
    out: Optional[Path] = typer.Option(None, "--out", help="Where repaired files go; --in by default."),
    fmt: Optional[str] = typer.Option(None, "--format"),
) -> None:
    """
    Rebuilds failed node or share files and reports the repair bandwidth
    """
    settings = _settings(ctx)
    try:
        report = workflows.repair(
            source or Path(settings.get("CMR_OUTPUT_DIR")),
            parse_node_list(failed),
            parse_node_list(helpers),
            settings.get_int("CMR_BUILD_RETRIES"),
            out,
        )
    except CmrError as e:
        fail(e)
    render_report(report, _format(ctx, fmt))


@app.command()
def reconstruct(
    ctx: typer.Context,
    output_file: Path = typer.Argument(..., help="Where the recovered bytes go."),
    source: Optional[Path] = typer.Option(None, "--in", help="Directory holding the node or share files."),
    nodes: Optional[str] = typer.Option(None, "--nodes", help="Node or share indices to read."),
    fmt: Optional[str] = typer.Option(None, "--format"),
) -> None:
    """
    Decodes the original file from k node files, or a secret from d share files
    """
    settings = _settings(ctx)
    try:
        report = workflows.reconstruct(
            source or Path(settings.get("CMR_OUTPUT_DIR")),
            output_file,
            parse_node_list(nodes),
            settings.get_int("CMR_BUILD_RETRIES"),
        )
    except CmrError as e:
        fail(e)
    render_report(report, _format(ctx, fmt))


@app.command()
def share(
    ctx: typer.Context,
    input_file: Path = typer.Argument(..., help="Secret to split."),
    kind: str = typer.Option("mbmr", "--kind", help="msmr (zigzag puncture) or mbmr (bivariate puncture)."),
    n: Optional[int] = typer.Option(None, "--n", help="Nodes of the base code; N = n - t shares."),
    z: Optional[int] = typer.Option(None, "--z", help="Shares an eavesdropper may hold."),
    t: Optional[int] = typer.Option(None, "--t", help="Punctured nodes."),
    d: Optional[int] = typer.Option(None, "--d", help="Helpers of the bivariate base code."),
    field: Optional[str] = typer.Option(None, "--field"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    out: Optional[Path] = typer.Option(None, "--out", help="Directory for share files."),
    fmt: Optional[str] = typer.Option(None, "--format"),
    job_file: Optional[Path] = typer.Option(None, "--job", help="TOML job file."),
) -> None:
    """
    Splits a secret into share files that z of them reveal nothing about
    """
    try:
        job = build_job(
            ctx, "share", job_file, code="secret", kind=kind, n=n, z=z, t=t, d=d, field=field, seed=seed, output=out
        )
        if not input_file.is_file():
            raise MissingDataError(f"input file {input_file.name} not found")
        report = workflows.share(job, input_file.read_bytes())
    except CmrError as e:
        fail(e)
    render_report(report, _format(ctx, fmt or job.report_format))


@app.command()
def verify(
    ctx: typer.Context,
    zigzag: bool = typer.Option(False, "--zigzag", help="MDS ranks and every repair schedule."),
    mbcr: bool = typer.Option(False, "--mbcr", help="Entropy accumulation, repair and reconstruction."),
    secret: bool = typer.Option(False, "--secret", help="z-subset leakage and reconstruction."),
    rlnc: bool = typer.Option(False, "--rlnc", help="Functional-repair stress run."),
    n: Optional[int] = typer.Option(None, "--n"),
    r: Optional[int] = typer.Option(None, "--r", help="Zigzag parities."),
    k: Optional[int] = typer.Option(None, "--k"),
    d: Optional[int] = typer.Option(None, "--d"),
    t: Optional[int] = typer.Option(None, "--t"),
    z: Optional[int] = typer.Option(None, "--z"),
    kind: Optional[str] = typer.Option(None, "--kind", help="Secret scheme: msmr or mbmr."),
    all_z_subsets: bool = typer.Option(False, "--all-z-subsets", help="Scan every z-subset of shares."),
    rounds: int = typer.Option(100, "--rounds", help="RLNC repair rounds."),
    check_every: int = typer.Option(1, "--check-every", help="RLNC rank check interval."),
    field: Optional[str] = typer.Option(None, "--field"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    fmt: Optional[str] = typer.Option(None, "--format"),
) -> None:
    """
    Runs the selected verification suites; exits 1 when any check fails
    """
    settings = _settings(ctx)
    suites = [name for name, on in (("zigzag", zigzag), ("mbcr", mbcr), ("secret", secret), ("rlnc", rlnc)) if on]
    try:
        job = JobConfig(command="verify", seed=settings.get_int("CMR_SEED")).merged(
            {"n": n, "k": k, "d": d, "t": t, "z": z, "kind": kind, "field": field, "seed": seed}
        )
        if kind and job.scheme is None:
            raise ParameterError(f"secret kind must be msmr or mbmr, got {kind!r}")
        report = workflows.verify(
            job,
            suites,
            FieldSpec.parse(settings.get("CMR_FIELD")),
            r=r,
            all_z_subsets=all_z_subsets,
            rounds=rounds,
            check_every=check_every,
            retries=settings.get_int("CMR_BUILD_RETRIES"),
        )
    except CmrError as e:
        fail(e)
    render_report(report, _format(ctx, fmt))
    if not report_passed(report):
        raise typer.Exit(code=1)


def write_config(config: Config):
    config.path.mkdir(parents=True, exist_ok=True)
    config.dotenv_path.unlink(missing_ok=True)
    config.dotenv_path.touch()
    echo()
    env_vars: Dict[str, str] = {}
    for _, val in config.keys_dict.items():
        key = val.get("name")
        res = typer.prompt(f"{key} ({val.get('note')})", type=str, default=config.configs.get(key))
        env_vars[key] = res
    config.write_env_vars(env_vars)
    config.print_current_config()


@app.command()
def config(show: bool = typer.Option(False, "--show", help="Print the current settings and exit.")) -> None:
    """
    Configures default field, seed, output directory and report format
    """
    config = Config()

    if config.check_exists():
        config.load_env()
        config.print_current_config()
        if show:
            return
        if typer.confirm("Would you like to overwrite these settings?", default=False):
            echo("Overwriting")
            write_config(config)
    elif show:
        echo("No config file; defaults in use:")
        for key, value in config.defaults.items():
            echo(f"{key}={value}")
        return
    else:
        write_config(config)

    echo("Configuration complete.")


def entry_point() -> None:
    app()


if __name__ == "__main__":
    entry_point()

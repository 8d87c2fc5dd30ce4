import json
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional

from rich import box
from typer import echo
from rich.table import Table
from rich.console import Console

from cmr.errors import ParameterError


def parse_node_list(text: Optional[str]) -> List[int]:
    """'0,1' -> [0, 1]; empty or None -> []"""
    if not text:
        return []
    try:
        nodes = [int(part) for part in text.replace(" ", "").split(",") if part]
    except ValueError as e:
        raise ParameterError(f"node list {text!r} must be comma-separated integers") from e
    if len(set(nodes)) != len(nodes):
        raise ParameterError(f"node list {text!r} repeats an index")
    if any(node < 0 for node in nodes):
        raise ParameterError(f"node list {text!r} has a negative index")
    return sorted(nodes)


def fraction_text(value) -> str:
    if value is None:
        return "-"
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def bandwidth_entry(downloaded: int, bound: Fraction, per_helper: Mapping[int, int]) -> Dict[str, Any]:
    bound = Fraction(bound)
    return {
        "downloaded": int(downloaded),
        "bound_numerator": bound.numerator,
        "bound_denominator": bound.denominator,
        "ratio": fraction_text(Fraction(downloaded) / bound) if bound else "-",
        "per_helper": {str(node): count for node, count in sorted(per_helper.items())},
    }


def check_entry(name: str, passed: bool, detail: str = "") -> Dict[str, Any]:
    return {"name": name, "pass": bool(passed), "detail": detail}


def report_passed(report: Mapping[str, Any]) -> bool:
    return all(check["pass"] for check in report.get("checks", []))


def _cell(value: Any) -> str:
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True, default=str)
    return str(value)


def render_report(report: Mapping[str, Any], fmt: str = "table") -> None:
    """
    Prints a report dict as sorted JSON or as rich tables

    Table mode prints a one-line bandwidth summary first, then the scalar
    fields, then one row per check.
    """
    if fmt == "json":
        echo(json.dumps(report, indent=4, sort_keys=True, default=str))
        return
    console = Console()
    bandwidth = report.get("bandwidth")
    if bandwidth:
        bound = fraction_text(Fraction(bandwidth["bound_numerator"], bandwidth["bound_denominator"]))
        echo(f"downloaded: {bandwidth['downloaded']}, bound: {bound}, ratio: {bandwidth['ratio']}")
    table = Table(title=f"cmr {report.get('command', '')}", box=box.SIMPLE)
    table.add_column("Field", style="cyan")
    table.add_column("Value", style="magenta")
    for key, value in sorted(report.items()):
        if key in ("checks", "command"):
            continue
        table.add_row(key, _cell(value))
    console.print(table)
    checks = report.get("checks")
    if checks:
        table = Table(title="checks", box=box.SIMPLE)
        table.add_column("#", style="cyan")
        table.add_column("Check")
        table.add_column("Pass", style="green")
        table.add_column("Detail")
        for i, check in enumerate(checks):
            table.add_row(str(i), check["name"], "yes" if check["pass"] else "NO", check.get("detail", ""))
        console.print(table)

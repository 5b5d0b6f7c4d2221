"""Output and error helpers shared by the CLI commands."""

import functools
import json
import math
import secrets
import sys
from pathlib import Path
from typing import Any, Callable

import click

from ..errors import ConvergenceFailure, NonUnitaryTarget, ProcmetricError
from ..models import MeasureReport
from ..telemetry import logfire

EXIT_INVALID = 2
EXIT_NONCONVERGED = 3
EXIT_NON_UNITARY = 4
EXIT_VERIFY_FAILED = 5

# Measures that live in [0, 1]; angle and Bures values keep their own ranges.
UNIT_INTERVAL = {
    "d_pro", "f_pro", "c_pro", "f_ave", "d_ave_mc", "f_ave_mc", "d_max", "f_min",
    "d_stab", "f_stab", "c_stab", "process_purity", "ideal_process_purity",
}


def resolve_seed(seed: int | None) -> int:
    """Use the given seed, or draw a fresh one so it can be reported."""
    return seed if seed is not None else secrets.randbits(31)


def clamp_measures(measures: dict[str, float]) -> dict[str, float]:
    return {name: min(1.0, max(0.0, value)) if name in UNIT_INTERVAL else value for name, value in measures.items()}


def report_payload(report: MeasureReport, seed: int, ideal_path: Path, real_path: Path) -> dict[str, Any]:
    raw = report.measures()
    return {
        "seed": seed,
        "ideal": str(ideal_path),
        "real": str(real_path),
        "dim": report.dim,
        "measures": clamp_measures(raw),
        "raw": raw,
        "optimizer": {name: diag.model_dump() for name, diag in report.optimizer.items()},
        "monte_carlo": {name: diag.model_dump() for name, diag in report.monte_carlo.items()},
        "consistency": report.consistency,
    }


def _check_finite(value: Any, where: str = "") -> None:
    if isinstance(value, float) and not math.isfinite(value):
        raise ProcmetricError(f"non-finite value in output at {where or '<root>'}")
    if isinstance(value, dict):
        for key, item in value.items():
            _check_finite(item, f"{where}.{key}" if where else str(key))
    elif isinstance(value, list):
        for index, item in enumerate(value):
            _check_finite(item, f"{where}[{index}]")


def _table(data: dict[str, Any], indent: int = 0) -> list[str]:
    lines = []
    width = max((len(str(k)) for k in data), default=0)
    for key, value in data.items():
        if isinstance(value, dict):
            lines.append(" " * indent + f"{key}:")
            lines.extend(_table(value, indent + 2))
        elif isinstance(value, float):
            lines.append(" " * indent + f"{key:<{width}}  {value:.10g}")
        elif isinstance(value, list):
            lines.append(" " * indent + f"{key:<{width}}  [{len(value)} entries]")
        else:
            lines.append(" " * indent + f"{key:<{width}}  {value}")
    return lines


def emit(data: dict[str, Any], output_format: str, output: Path | None = None) -> None:
    """Print ``data`` as JSON or a table; JSON also goes to ``output`` when given."""
    _check_finite(data)
    text = json.dumps(data, indent=2)
    if output is not None:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(text, encoding="utf-8")
    click.echo(text if output_format == "json" else "\n".join(_table(data)))


def handle_errors(command: Callable[..., None]) -> Callable[..., None]:
    """Map procmetric errors onto the CLI exit codes."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        try:
            command(*args, **kwargs)
        except NonUnitaryTarget as exc:
            click.echo(f"Error: target is not unitary: {exc}", err=True)
            sys.exit(EXIT_NON_UNITARY)
        except ConvergenceFailure as exc:
            gap = "" if exc.final_gap is None else f", largest gap {exc.final_gap:.3e}"
            click.echo(f"Error: {exc}{gap} (pass --allow-nonconverged to accept)", err=True)
            sys.exit(EXIT_NONCONVERGED)
        except (ProcmetricError, ValueError) as exc:
            logfire.warning("Command failed", error=str(exc), error_type=type(exc).__name__)
            click.echo(f"Error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(EXIT_INVALID)

    return wrapper

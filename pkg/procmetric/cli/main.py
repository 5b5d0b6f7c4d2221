"""Main CLI commands for procmetric."""

import sys
from pathlib import Path

import click
from dotenv import load_dotenv

from ..channels import qubit_count
from ..errors import ConvergenceFailure, DimensionMismatch
from ..estimation import ShotModel, build_plan_pauli_minimal, plan_export, run_plan, simulate_tomography
from ..models import EstimationReport, OptimizerConfig, ProcmetricConfig
from ..process_metrics import all_converged, full_report, j_distance, j_fidelity
from ..services import ChannelStore
from ..verification import SUITES, replay, run_suites
from .reporting import EXIT_VERIFY_FAILED, emit, handle_errors, report_payload, resolve_seed

# Load environment variables
load_dotenv()

channel_path = click.Path(exists=True, dir_okay=False, path_type=Path)


def _optimizer(config: ProcmetricConfig, seed: int, restarts: int | None, max_iter: int | None, gap_tol: float | None) -> OptimizerConfig:
    """Config-file optimizer settings with command-line overrides applied."""
    overrides = {"seed": seed, "restarts": restarts, "max_iterations": max_iter, "gap_tolerance": gap_tol}
    return OptimizerConfig.model_validate({**config.optimizer.model_dump(), **{k: v for k, v in overrides.items() if v is not None}})


def optimizer_options(command):
    command = click.option('--gap-tol', type=float, help='Duality-gap tolerance')(command)
    command = click.option('--max-iter', type=int, help='Iteration cap per optimizer start')(command)
    command = click.option('--restarts', type=int, help='Random optimizer starts')(command)
    return command


def common_options(command):
    command = click.option('--format', 'output_format', type=click.Choice(['json', 'table']), help='Output format')(command)
    command = click.option('--output', '-o', type=click.Path(dir_okay=False, path_type=Path), help='Also write JSON here')(command)
    command = click.option('--seed', type=int, help='Random seed (generated and reported when omitted)')(command)
    return command


@click.group()
@click.option('--workspace', default='.', help='Workspace directory path')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False, path_type=Path), help='YAML configuration file')
@click.pass_context
def cli(ctx: click.Context, workspace: str, config_path: Path | None) -> None:
    """procmetric - distance measures for quantum processes."""
    ctx.ensure_object(dict)
    workspace_path = Path(workspace).resolve()
    config = ProcmetricConfig.load(config_path)
    ctx.obj['workspace'] = workspace_path
    ctx.obj['config'] = config
    ctx.obj['store'] = ChannelStore(workspace_path, config.data_dir)


@cli.command()
@click.argument('ideal_path', type=channel_path)
@click.argument('real_path', type=channel_path)
@common_options
@optimizer_options
@click.option('--mc-samples', type=int, help='Haar samples for the average measures')
@click.option('--allow-nonconverged', is_flag=True, help='Exit 0 even if an optimizer missed its tolerance')
@click.option('--save', is_flag=True, help='Also store the report under data/reports')
@click.pass_context
@handle_errors
def compare(
    ctx: click.Context,
    ideal_path: Path,
    real_path: Path,
    seed: int | None,
    output: Path | None,
    output_format: str | None,
    restarts: int | None,
    max_iter: int | None,
    gap_tol: float | None,
    mc_samples: int | None,
    allow_nonconverged: bool,
    save: bool,
) -> None:
    """Report every process measure of REAL_PATH against IDEAL_PATH."""
    config: ProcmetricConfig = ctx.obj['config']
    store: ChannelStore = ctx.obj['store']
    seed = resolve_seed(seed if seed is not None else config.seed)

    ideal = store.load_channel(ideal_path)
    real = store.load_channel(real_path)
    optimizer = _optimizer(config, seed, restarts, max_iter, gap_tol)
    report = full_report(real, ideal, optimizer, mc_samples or config.mc_samples, seed)

    emit(report_payload(report, seed, ideal_path, real_path), output_format or config.output_format, output)
    if save:
        click.echo(f"✓ Report saved to {store.save_report(report, ideal_path, real_path)}", err=True)
    if not all_converged(report) and not allow_nonconverged:
        stalled = [name for name, diag in report.optimizer.items() if not diag.converged]
        worst_gap = max(report.optimizer[name].final_gap for name in stalled)
        raise ConvergenceFailure(f"optimizer did not converge for {', '.join(stalled)}", final_gap=worst_gap)


@cli.command()
@click.argument('ideal_path', type=channel_path)
@click.argument('real_path', type=channel_path)
@common_options
@click.option('--shots', type=int, help='Shots per setting (0 = exact expectation values)')
@click.option('--oracle', is_flag=True, help='Include the Choi-overlap F_pro for comparison')
@click.option('--export-plan', type=click.Path(dir_okay=False, path_type=Path), help='Write the measurement plan as JSON')
@click.pass_context
@handle_errors
def estimate(
    ctx: click.Context,
    ideal_path: Path,
    real_path: Path,
    seed: int | None,
    output: Path | None,
    output_format: str | None,
    shots: int | None,
    oracle: bool,
    export_plan: Path | None,
) -> None:
    """Estimate F_pro of REAL_PATH to the unitary in IDEAL_PATH with d² settings."""
    config: ProcmetricConfig = ctx.obj['config']
    store: ChannelStore = ctx.obj['store']
    seed = resolve_seed(seed if seed is not None else config.seed)
    shots = config.shots if shots is None else shots

    ideal = store.load_channel(ideal_path)
    real = store.load_channel(real_path)
    target = ideal.as_unitary()
    n = qubit_count(target.dim)
    if n is None:
        raise DimensionMismatch(f"estimation needs a qubit register, got dimension {target.dim}")

    plan = build_plan_pauli_minimal(target, n)
    if export_plan is not None:
        store.fs.write_text(export_plan, plan_export(plan).model_dump_json(indent=2))
    result = run_plan(plan, real, ShotModel(shots, seed))
    report = EstimationReport(
        dim=plan.dim,
        scheme=plan.scheme,
        settings=result.settings,
        shots_per_setting=shots,
        estimate=result.estimate,
        stderr=result.stderr,
        seed=seed,
        oracle=j_fidelity(real, ideal) if oracle else None,
    )
    emit(report.model_dump(exclude_none=True), output_format or config.output_format, output)


@cli.command()
@click.option('--sweep', type=int, default=20, show_default=True, help='Random instances per suite')
@click.option('--dim', type=int, default=2, show_default=True, help='System dimension')
@click.option('--suite', 'suites', multiple=True, type=click.Choice([s.name for s in SUITES]), help='Run only these suites')
@click.option('--replay', 'replay_path', type=channel_path, help='Re-run a dumped counterexample')
@common_options
@optimizer_options
@click.pass_context
@handle_errors
def verify(
    ctx: click.Context,
    sweep: int,
    dim: int,
    suites: tuple[str, ...],
    replay_path: Path | None,
    seed: int | None,
    output: Path | None,
    output_format: str | None,
    restarts: int | None,
    max_iter: int | None,
    gap_tol: float | None,
) -> None:
    """Run the invariant suites and dump counterexamples on failure."""
    config: ProcmetricConfig = ctx.obj['config']
    store: ChannelStore = ctx.obj['store']
    output_format = output_format or config.output_format

    if replay_path is not None:
        dump = store.load_counterexample(replay_path)
        optimizer = _optimizer(config, dump.seed, restarts, max_iter, gap_tol)
        result = replay(dump, optimizer)
        emit({"seed": dump.seed, "instance": dump.instance, **result.model_dump(exclude_none=True)}, output_format, output)
        if not result.passed:
            sys.exit(EXIT_VERIFY_FAILED)
        return

    seed = resolve_seed(seed if seed is not None else config.seed)
    optimizer = _optimizer(config, seed, restarts, max_iter, gap_tol)
    results = run_suites(sweep, dim, seed, optimizer, store, suites)
    emit(
        {
            "seed": seed,
            "dim": dim,
            "sweep": sweep,
            "passed": all(r.passed for r in results),
            "suites": {r.name: r.model_dump(exclude={"name"}, exclude_none=True) for r in results},
        },
        output_format,
        output,
    )
    if not all(r.passed for r in results):
        sys.exit(EXIT_VERIFY_FAILED)


@cli.command()
@click.argument('real_path', type=channel_path)
@common_options
@click.option('--shots', type=int, help='Shots per setting (0 = exact expectation values)')
@click.option('--channel-out', type=click.Path(dir_okay=False, path_type=Path), help='Where to write the reconstructed channel')
@click.pass_context
@handle_errors
def tomography(
    ctx: click.Context,
    real_path: Path,
    seed: int | None,
    output: Path | None,
    output_format: str | None,
    shots: int | None,
    channel_out: Path | None,
) -> None:
    """Simulate process tomography of REAL_PATH and report D_pro to the truth."""
    config: ProcmetricConfig = ctx.obj['config']
    store: ChannelStore = ctx.obj['store']
    seed = resolve_seed(seed if seed is not None else config.seed)
    shots = config.shots if shots is None else shots

    real = store.load_channel(real_path)
    reconstructed = simulate_tomography(real, ShotModel(shots, seed))
    channel_out = channel_out or store.reports_path / f"{real_path.stem}_tomography.json"
    store.save_channel(channel_out, reconstructed, description=f"tomography of {real_path.name}, {shots} shots per setting")
    emit(
        {"seed": seed, "shots_per_setting": shots, "d_pro": j_distance(reconstructed, real), "channel": str(channel_out)},
        output_format or config.output_format,
        output,
    )


def main() -> None:
    cli(obj={})


if __name__ == "__main__":
    main()

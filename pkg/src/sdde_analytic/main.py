from pathlib import Path
from typing import Any, Optional

import typer
from rich.table import Table

from sdde_analytic import __version__
from sdde_analytic import console as ui
from sdde_analytic.config import load_run_config
from sdde_analytic.settings import reload_settings, settings
from sdde_analytic.utils.errors import EXIT_USAGE, SddeError, exit_code_for, format_error

app = typer.Typer(add_completion=False, help="State-dependent delay equations: integrate, lift, extend.")
models_app = typer.Typer(add_completion=False, help="Built-in and user models.")
app.add_typer(models_app, name="models")

CONFIG_OPT = typer.Option(None, "--config", help="Flat key = value config file")
MODEL_OPT = typer.Option(None, "--model", "-m", help="Built-in model name or path to a .py file")
OUT_OPT = typer.Option(None, "--out", "-o", help="Output directory")
SEED_OPT = typer.Option(None, "--seed", help="Random seed for sampled checks")
WORKERS_OPT = typer.Option(None, "--workers", help="Worker threads for grid checks")
FORMAT_OPT = typer.Option(None, "--format", help="Comma separated subset of csv,json")
TOL_OPT = typer.Option(None, "--tol", help="Integration tolerance")
T_END_OPT = typer.Option(None, "--t-end", help="End of the integration interval")
J_OPT = typer.Option(None, "--J", help="Lift truncation depth")
ANCHOR_OPT = typer.Option(None, "--anchor", help="Time at which the lift is taken")


@app.callback()
def _global(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Logging level"),
    plain: bool = typer.Option(False, "--plain", help="Disable colours"),
) -> None:
    reload_settings()
    ui.configure_console(plain or settings.plain)
    ui.configure_logging(log_level or settings.log_level)


def _run(subcommand: str, config_path: Optional[Path], flags: dict[str, Any]) -> None:
    from sdde_analytic.runner import run

    try:
        config = load_run_config(config_path, {"subcommand": subcommand, **flags})
        result = run(config)
    except SddeError as e:
        ui.err_console.print(f"[error]{format_error(e)}[/error]")
        raise typer.Exit(exit_code_for(e))

    table = Table(title=f"{subcommand} · {config.model}", header_style="header")
    table.add_column("check")
    table.add_column("result")
    for name, value in result.summary.items():
        text = value if isinstance(value, str) else f"{value:.6g}"
        table.add_row(name, f"[{ui.status_style(text)}]{text}[/]" if isinstance(value, str) else text)
    ui.console.print(table)
    ui.console.print(f"[muted]stages:[/muted] {', '.join(result.stages) or '-'}")
    ui.console.print(f"[muted]artifacts:[/muted] {result.out_dir}")
    if result.error:
        stage = f" in {result.stages[-1]}" if result.stages else ""
        ui.err_console.print(f"[error]{result.error['type']}{stage}: {result.error['message']}[/error]")
    ui.console.print(f"[{ui.status_style(result.status)}]{result.status}[/] (exit {result.exit_code})")
    raise typer.Exit(result.exit_code)


def _common(
    model: Optional[str],
    out: Optional[Path],
    seed: Optional[int],
    workers: Optional[int],
    fmt: Optional[str],
) -> dict[str, Any]:
    return {"model": model, "out_dir": out, "seed": seed, "workers": workers, "formats": fmt}


@app.command()
def simulate(
    config: Optional[Path] = CONFIG_OPT,
    model: Optional[str] = MODEL_OPT,
    out: Optional[Path] = OUT_OPT,
    seed: Optional[int] = SEED_OPT,
    workers: Optional[int] = WORKERS_OPT,
    fmt: Optional[str] = FORMAT_OPT,
    tol: Optional[float] = TOL_OPT,
    t_end: Optional[float] = T_END_OPT,
) -> None:
    """Integrate the direct system and check that the delayed time is monotone."""
    _run("simulate", config, {**_common(model, out, seed, workers, fmt), "tol": tol, "t_end": t_end})


@app.command()
def lift(
    config: Optional[Path] = CONFIG_OPT,
    model: Optional[str] = MODEL_OPT,
    out: Optional[Path] = OUT_OPT,
    seed: Optional[int] = SEED_OPT,
    workers: Optional[int] = WORKERS_OPT,
    fmt: Optional[str] = FORMAT_OPT,
    tol: Optional[float] = TOL_OPT,
    t_end: Optional[float] = T_END_OPT,
    depth: Optional[int] = J_OPT,
    anchor: Optional[float] = ANCHOR_OPT,
    decay_m: Optional[int] = typer.Option(None, "--decay-m", help="Polynomial weight exponent"),
) -> None:
    """Build the sequence-space lift, its decay profile and consistency checks."""
    flags = {"tol": tol, "t_end": t_end, "lift_J": depth, "anchor_t": anchor, "decay_m": decay_m}
    _run("lift", config, {**_common(model, out, seed, workers, fmt), **flags})


@app.command("verify-assumptions")
def verify_assumptions(
    config: Optional[Path] = CONFIG_OPT,
    model: Optional[str] = MODEL_OPT,
    out: Optional[Path] = OUT_OPT,
    seed: Optional[int] = SEED_OPT,
    workers: Optional[int] = WORKERS_OPT,
    fmt: Optional[str] = FORMAT_OPT,
    grid_density: Optional[int] = typer.Option(None, "--grid-density", help="Grid points per axis"),
    strip: Optional[bool] = typer.Option(None, "--strip/--no-strip", help="Also test strip corners"),
    params: Optional[Path] = typer.Option(None, "--params", help="YAML parameter file (example41)"),
) -> None:
    """Check the disk condition, search (l, c) and, for example41, the parameter conditions."""
    flags = {"grid_density": grid_density, "include_strip": strip, "params_file": params}
    _run("verify-assumptions", config, {**_common(model, out, seed, workers, fmt), **flags})


@app.command("complex-extend")
def complex_extend(
    config: Optional[Path] = CONFIG_OPT,
    model: Optional[str] = MODEL_OPT,
    out: Optional[Path] = OUT_OPT,
    seed: Optional[int] = SEED_OPT,
    workers: Optional[int] = WORKERS_OPT,
    fmt: Optional[str] = FORMAT_OPT,
    tol: Optional[float] = TOL_OPT,
    depth: Optional[int] = J_OPT,
    anchor: Optional[float] = ANCHOR_OPT,
    lambda0: Optional[float] = typer.Option(None, "--lambda0", help="First lambda of the schedule"),
    stages: Optional[int] = typer.Option(None, "--stages", help="Number of lambda stages"),
    rays: Optional[int] = typer.Option(None, "--rays", help="Rays of the complex disk"),
) -> None:
    """Run the lambda continuation on a complex disk and fit Taylor coefficients."""
    flags = {
        "tol": tol,
        "lift_J": depth,
        "anchor_t": anchor,
        "lambda0": lambda0,
        "n_stages": stages,
        "n_rays": rays,
    }
    _run("complex-extend", config, {**_common(model, out, seed, workers, fmt), **flags})


@app.command()
def example41(
    config: Optional[Path] = CONFIG_OPT,
    out: Optional[Path] = OUT_OPT,
    seed: Optional[int] = SEED_OPT,
    workers: Optional[int] = WORKERS_OPT,
    fmt: Optional[str] = FORMAT_OPT,
    params: Optional[Path] = typer.Option(None, "--params", help="YAML parameter file"),
    t_end: Optional[float] = T_END_OPT,
) -> None:
    """Run the adaptive-delay example end to end."""
    flags = {"model": "example41", "params_file": params, "t_end": t_end}
    _run("example41", config, {**_common(None, out, seed, workers, fmt), **flags})


@app.command()
def report(run_dir: Path = typer.Argument(..., help="Directory of a finished run")) -> None:
    """Summarise a finished run directory."""
    from sdde_analytic.runner import summarize_run

    try:
        summary = summarize_run(run_dir)
    except SddeError as e:
        ui.err_console.print(f"[error]{format_error(e)}[/error]")
        raise typer.Exit(EXIT_USAGE)

    manifest = summary["manifest"]
    table = Table(title=str(run_dir), header_style="header")
    table.add_column("field")
    table.add_column("value")
    cfg = manifest.get("config", {})
    status = str(manifest.get("status"))
    table.add_row("status", f"[{ui.status_style(status)}]{status}[/] (exit {manifest.get('exit_code')})")
    table.add_row("subcommand", str(cfg.get("subcommand")))
    table.add_row("model", str(cfg.get("model")))
    table.add_row("seed", str(manifest.get("seed")))
    table.add_row("stages", ", ".join(manifest.get("stages", [])))
    table.add_row("wall time [s]", f"{manifest.get('wall_time_s', 0.0):.3f}")
    for name, info in sorted(summary["reports"].items()):
        table.add_row(name, f"{info['stage']}: {', '.join(info['keys'])}")
    if manifest.get("error"):
        table.add_row("error", str(manifest["error"].get("message")))
    ui.console.print(table)


@models_app.command("list")
def models_list() -> None:
    from sdde_analytic.models import list_models

    for entry in list_models():
        print(f"{entry.name}\t{entry.source}\t{entry.description}")


@app.command()
def version() -> None:
    print(f"sdde-analytic {__version__}")


def main() -> int:
    app()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""
Main entry point for AML IDS Lab.
"""
import sys
from pathlib import Path
from typing import Any, Dict, Optional

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

# Make the src package importable when run as a script
sys.path.insert(0, str(Path(__file__).parent))

from src.config.experiment import ExperimentConfig, load_experiment_config
from src.config.settings import get_settings, update_settings
from src.utils.errors import ConfigError
from src.utils.logging import setup_logging
from src.workflows.stages import STAGE_COMMANDS, STAGES
from src.workflows.study_workflow import run_study

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

console = Console()


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


def display_ingest(result: Dict[str, Any]):
    summary = result["summary"]
    table = Table(title="Class Distribution", show_header=True, header_style="bold magenta")
    table.add_column("Partition", style="cyan")
    table.add_column("Benign", justify="right")
    table.add_column("Malicious", justify="right")
    table.add_column("Total", justify="right")
    for partition in ("totals", "train", "test"):
        counts = summary[partition]
        table.add_row(partition, str(counts["benign"]), str(counts["malicious"]), str(sum(counts.values())))
    console.print(table)
    console.print(
        f"{summary['features']} features, {summary['dropped_rows']} rows dropped by sanitize, "
        f"{len(summary['degenerate_features'])} degenerate features"
    )


def display_train(result: Dict[str, Any]):
    summary, timings = result["summary"], result["timings"]
    table = Table(
        title=f"Weighted Average Results ({summary['cv_folds']}-fold CV, pooled confusion)",
        show_header=True,
        header_style="bold magenta",
    )
    table.add_column("Model", style="cyan")
    table.add_column("Precision", justify="right")
    table.add_column("Recall", justify="right")
    table.add_column("F1", justify="right")
    table.add_column("Test F1", justify="right")
    table.add_column("Seconds", justify="right")
    for row in summary["models"]:
        name = row["model"]
        seconds = timings.get(f"cv:{name}", 0.0) + timings.get(f"fit:{name}", 0.0)
        table.add_row(
            name,
            _fmt(row["cv_weighted_precision"]),
            _fmt(row["cv_weighted_recall"]),
            _fmt(row["cv_weighted_f1"]),
            _fmt(row["test_metrics"]["weighted_f1"]),
            f"{seconds:.2f}",
        )
    surrogate = summary["surrogate"]
    table.add_row(
        "mlp (surrogate)", "-", "-", "-", _fmt(surrogate["test_metrics"]["weighted_f1"]),
        f"{timings.get('fit:surrogate', 0.0):.2f}",
    )
    console.print(table)


def display_attack(result: Dict[str, Any]):
    summary = result["summary"]
    console.print(f"[dim]{summary['axis_semantics']}[/dim]")
    table = Table(title="JSMA Transfer", show_header=True, header_style="bold magenta")
    table.add_column("Victim", style="cyan")
    table.add_column("Clean F1", justify="right")
    table.add_column("Grid mean F1", justify="right")
    table.add_column("Worst cell", justify="right")
    table.add_column("Worst F1", justify="right")
    for name, v in summary["victims"].items():
        theta, gamma, f1 = v["worst_cell"]
        table.add_row(name, _fmt(v["baseline_f1"]), _fmt(v["mean_f1"]), f"θ={theta:g} γ={gamma:g}", _fmt(f1))
    console.print(table)

    for cell in summary["report_cells"]:
        cm_table = Table(title=f"Confusion at θ={cell['theta']:g}, γ={cell['gamma']:g}", header_style="bold")
        cm_table.add_column("Victim", style="cyan")
        cm_table.add_column("[[TN, FP], [FN, TP]]")
        cm_table.add_column("F1", justify="right")
        for name, v in cell["victims"].items():
            cm_table.add_row(name, str(v["confusion"]), _fmt(v["weighted_f1"]))
        console.print(cm_table)


def display_defend(result: Dict[str, Any]):
    table = Table(title="Adversarial Training", show_header=True, header_style="bold magenta")
    table.add_column("Victim", style="cyan")
    table.add_column("Source cells")
    table.add_column("Added rows", justify="right")
    table.add_column("Grid F1 before", justify="right")
    table.add_column("Grid F1 after", justify="right")
    table.add_column("Improved cells", justify="right")
    table.add_column("CV F1 before/after", justify="right")
    for name, v in result["summary"].items():
        table.add_row(
            name,
            ", ".join(f"({t:g}, {g:g})" for t, g in v["source_cells"]),
            str(v["augmented_rows"]),
            _fmt(v["pre_mean_f1"]),
            _fmt(v["post_mean_f1"]),
            f"{v['improved_fraction']:.0%}",
            f"{_fmt(v['cv_before_f1'])} / {_fmt(v['cv_after_f1'])}",
        )
    console.print(table)


def display_report(result: Dict[str, Any], config: ExperimentConfig):
    text = (config.resolved_output_dir() / result["summary"]["summary"]).read_text(encoding="utf-8")
    console.print(Panel(text.rstrip(), title="Study Report", border_style="green"))


DISPLAY = {
    "ingest": display_ingest,
    "train": display_train,
    "attack": display_attack,
    "defend": display_defend,
}


def _load_config(config_path, out, seed, threads) -> ExperimentConfig:
    return load_experiment_config(config_path, overrides={"output_dir": out, "seed": seed, "threads": threads})


def _exit_code(error: BaseException) -> int:
    return EXIT_CONFIG if isinstance(error, ConfigError) else EXIT_FAILURE


def _show(stage: str, result: Dict[str, Any], config: ExperimentConfig):
    if stage == "report":
        display_report(result, config)
    else:
        DISPLAY[stage](result)


def common_options(func):
    """--config/--out/--seed/--threads shared by every stage command."""
    func = click.option("--threads", type=click.IntRange(min=1), help="Worker thread cap")(func)
    func = click.option("--seed", type=click.IntRange(min=0), help="Global seed (overrides the config)")(func)
    func = click.option("--out", "out", type=click.Path(file_okay=False), help="Output directory")(func)
    func = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Experiment YAML file")(func)
    return func


def run_stage(stage: str, config_path, out, seed, threads):
    try:
        config = _load_config(config_path, out, seed, threads)
        console.print(Panel.fit(f"{stage} · {config.name} · config {config.config_hash()[:12]}", style="bold blue"))
        with console.status(f"[bold green]Running {stage}..."):
            result = STAGE_COMMANDS[stage](config)
        _show(stage, result, config)
    except Exception as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(_exit_code(e))


@click.group()
@click.option('--debug', is_flag=True, help='Enable debug mode')
@click.option('--log-file', help='Log file path')
def cli(debug, log_file):
    """AML IDS Lab - grey-box adversarial attacks and adversarial training against tabular IDS classifiers."""
    settings = get_settings()
    log_level = "DEBUG" if debug else settings.log_level
    if debug:
        update_settings(debug=True, log_level="DEBUG")
    setup_logging(log_level=log_level, log_file=log_file)


@cli.command()
@common_options
def ingest(config_path, out, seed, threads):
    """Sanitize, binarize, split and normalize the input data."""
    run_stage("ingest", config_path, out, seed, threads)


@cli.command()
@common_options
def train(config_path, out, seed, threads):
    """Cross-validate and train victims, baselines and the surrogate."""
    run_stage("train", config_path, out, seed, threads)


@cli.command()
@common_options
def attack(config_path, out, seed, threads):
    """Sweep the JSMA grid and FGSM axis against every victim.

    JSMA moves features in the direction set by attack.direction in the
    experiment file: both (default), increase or decrease.
    """
    run_stage("attack", config_path, out, seed, threads)


@cli.command()
@common_options
def defend(config_path, out, seed, threads):
    """Adversarially retrain the victims and re-run the grid."""
    run_stage("defend", config_path, out, seed, threads)


@cli.command()
@common_options
def report(config_path, out, seed, threads):
    """Index every artifact and write the study summary."""
    run_stage("report", config_path, out, seed, threads)


@cli.command()
@common_options
@click.option('--stop-after', type=click.Choice(STAGES), default=STAGES[-1], help='Last stage to run')
def run(config_path, out, seed, threads, stop_after):
    """Run the whole study as one workflow."""
    try:
        config = _load_config(config_path, out, seed, threads)
    except ConfigError as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(EXIT_CONFIG)

    console.print(Panel.fit(f"🔬 AML IDS Lab · {config.name} · config {config.config_hash()[:12]}", style="bold blue"))
    state = run_study(config, stop_after)
    for stage in state["completed"]:
        _show(stage, state["results"][stage], config)
    if state.get("error"):
        console.print(f"[bold red]Error in {state['failed_stage']}:[/bold red] {state['error']}")
        sys.exit(_exit_code(state["results"][state["failed_stage"]]["exception"]))


@cli.command()
@common_options
def info(config_path, out, seed, threads):
    """Show application settings and the resolved experiment configuration."""
    settings = get_settings()

    info_table = Table(title="AML IDS Lab Configuration", show_header=True, header_style="bold magenta")
    info_table.add_column("Setting", style="cyan", width=25)
    info_table.add_column("Value", style="white")

    info_table.add_row("App Name", settings.app_name)
    info_table.add_row("Version", settings.app_version)
    info_table.add_row("Debug Mode", str(settings.debug))
    info_table.add_row("Log Level", settings.log_level)
    info_table.add_row("Default Threads", str(settings.threads))
    info_table.add_row("Default Output", settings.output_dir)
    info_table.add_row(
        "Power-system Corpus",
        f"✓ {settings.power_system_dir}" if settings.power_system_dir else "✗ Not configured",
    )

    try:
        config = _load_config(config_path, out, seed, threads)
    except ConfigError as e:
        console.print(info_table)
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(EXIT_CONFIG)

    info_table.add_row("Experiment", config.name)
    info_table.add_row("Config Hash", config.config_hash())
    info_table.add_row("Data", config.data.kind.value)
    info_table.add_row("Train Fraction", f"{config.split.train_fraction:g}")
    info_table.add_row("CV Folds", str(config.models.cv_folds))
    info_table.add_row("Victims", ", ".join(k.value for k in config.models.victims))
    info_table.add_row(
        "Grid",
        f"{len(config.attack.theta_values)} θ × {len(config.attack.gamma_values)} γ",
    )
    info_table.add_row("Defense Sample", f"{config.defense.sample_fraction:.0%}")
    info_table.add_row("Output", str(config.resolved_output_dir()))
    console.print(info_table)


def main():
    """Main function for direct script execution."""
    cli()


if __name__ == "__main__":
    main()

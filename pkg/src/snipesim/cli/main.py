"""Main CLI interface for snipesim."""

import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from snipesim import __version__
from snipesim.core.settings import settings
from snipesim.harness import HarnessError
from snipesim.harness.builtin import BUILTIN_SCENARIOS, list_scenarios
from snipesim.harness.report import FORMATS, Report, emit_report, load_report
from snipesim.harness.runner import apply_overrides, run_scenario
from snipesim.harness.scenario import load_scenario
from snipesim.utils.store import DocumentStore, StoreError

console = Console()
err_console = Console(stderr=True)


def configure_logging(debug: bool) -> None:
    """Route package logs through rich; DEBUG when debugging, else WARNING."""
    logger = logging.getLogger("snipesim")
    logger.handlers.clear()
    handler = RichHandler(console=err_console, show_path=debug, rich_tracebacks=debug)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if debug else logging.WARNING)
    logger.propagate = False


def print_summary(report: Report) -> None:
    """Expectation results as a rich table."""
    table = Table(title=f"Scenario {report.scenario}")
    table.add_column("Expectation", style="bold")
    table.add_column("Result")
    for result in report.expectations:
        mark = "[green]✓ pass[/green]" if result.passed else f"[red]✗ fail[/red] [dim]{result.detail}[/dim]"
        table.add_row(result.description, mark)
    table.add_row("indexer replay consistent", "[green]✓[/green]" if report.replay_consistent else "[red]✗[/red]")
    table.add_row("token supply conserved", "[green]✓[/green]" if report.supply_conserved else "[red]✗[/red]")
    console.print(table)


@click.group()
@click.version_option(version=__version__)
@click.option("--debug/--no-debug", default=None, help="Enable debug mode")
@click.pass_context
def cli(ctx: click.Context, debug: Optional[bool]) -> None:
    """snipesim - BRC20 PSBT sniping simulator.

    Runs marketplace purchases, sniping attacks and their mitigations on a
    deterministic in-process chain and reports who won each block.
    """
    ctx.ensure_object(dict)
    debug = settings.debug if debug is None else debug
    ctx.obj["debug"] = debug
    configure_logging(debug)

    if debug:
        console.print("[dim]Debug mode enabled[/dim]")


@cli.command()
@click.option("--scenario", "scenario_ref", required=True, help="Built-in name or path to a JSON scenario")
@click.option("--seed", type=int, default=None, help="Override the scenario seed")
@click.option("--policy", type=click.Choice(["coexist", "rbf"]), default=None, help="Mempool policy override")
@click.option("--fee-lock", is_flag=True, default=False, help="Enforce fee locks at mempool admission")
@click.option("--format", "fmt", type=click.Choice(FORMATS), default="text", help="Report format")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Write the report to a file")
@click.option("--save", is_flag=True, default=False, help="Also keep a json copy in the report directory")
@click.pass_context
def run(
    ctx: click.Context,
    scenario_ref: str,
    seed: Optional[int],
    policy: Optional[str],
    fee_lock: bool,
    fmt: str,
    out_path: Optional[str],
    save: bool,
) -> None:
    """Run a scenario and emit its report.

    Exits 0 only when every expectation of the scenario passes.
    """
    debug = ctx.obj.get("debug", False)

    try:
        scenario = load_scenario(scenario_ref)
        if seed is None and settings.has_seed_override:
            seed = settings.seed
        scenario = apply_overrides(
            scenario,
            seed=seed,
            policy=policy or settings.policy,
            fee_lock=True if fee_lock else None,
        )
        report = run_scenario(scenario)
        data = emit_report(report, fmt)

        if out_path:
            target = Path(out_path)
            written = DocumentStore(str(target.parent)).save_bytes(target.name, data)
            console.print(f"[green]✓ Report written to {written}[/green]")
            print_summary(report)
        else:
            click.echo(data.decode("utf-8"), nl=False)

        if save:
            store = DocumentStore(settings.report_dir)
            saved = store.save_bytes(f"{report.scenario}-seed{report.seed}.json", emit_report(report, "json"))
            store.cleanup_backups()
            console.print(f"[green]✓ Report saved to {saved}[/green]")

        if not report.passed:
            sys.exit(1)

    except (HarnessError, StoreError) as e:
        console.print(f"[red]✗ {e}[/red]")
        if debug:
            console.print_exception()
        sys.exit(1)


@cli.command(name="list")
def list_command() -> None:
    """List built-in scenarios."""
    table = Table()
    table.add_column("Scenario", style="bold cyan")
    table.add_column("Description")
    for name in list_scenarios():
        table.add_row(name, BUILTIN_SCENARIOS[name].get("description", ""))
    console.print(f"[bold]Built-in scenarios ({len(BUILTIN_SCENARIOS)}):[/bold]\n")
    console.print(table)


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(dir_okay=False), help="Saved json report")
@click.option("--format", "fmt", type=click.Choice(FORMATS), default="text", help="Output format")
@click.pass_context
def report(ctx: click.Context, in_path: str, fmt: str) -> None:
    """Re-render a saved json report."""
    debug = ctx.obj.get("debug", False)

    try:
        source = Path(in_path)
        loaded = load_report(DocumentStore(str(source.parent)).load_bytes(source.name))
        click.echo(emit_report(loaded, fmt).decode("utf-8"), nl=False)
    except (HarnessError, StoreError) as e:
        console.print(f"[red]✗ Error reading report: {e}[/red]")
        if debug:
            console.print_exception()
        sys.exit(1)


@cli.command()
def reports() -> None:
    """List reports kept with run --save."""
    names = DocumentStore(settings.report_dir).list(".json")
    if not names:
        console.print(f"[yellow]No saved reports in {settings.report_dir}[/yellow]")
        return

    console.print(f"[bold]Saved reports ({len(names)}):[/bold]\n")
    for name in names:
        console.print(f"  {name}")


@cli.command()
@click.option("--scenario", "scenario_ref", required=True, help="Built-in name or path to a JSON scenario")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Export the document to a file")
@click.pass_context
def show(ctx: click.Context, scenario_ref: str, out_path: Optional[str]) -> None:
    """Show a scenario document, or export it for editing."""
    debug = ctx.obj.get("debug", False)

    try:
        scenario = load_scenario(scenario_ref)
        document = scenario.model_dump(mode="json", exclude_none=True)
        if out_path:
            target = Path(out_path)
            written = DocumentStore(str(target.parent)).save_json(target.name, document)
            console.print(f"[green]✓ Scenario written to {written}[/green]")
            return

        panel = Panel(
            json.dumps(document, indent=2), title=f"Scenario {scenario.name}", title_align="left", border_style="blue"
        )
        console.print(panel)
    except (HarnessError, StoreError) as e:
        console.print(f"[red]✗ {e}[/red]")
        if debug:
            console.print_exception()
        sys.exit(1)


def main() -> None:
    """Entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()

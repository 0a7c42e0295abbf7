"""Command-line front end.

Exit codes: 0 success, 1 invalid config / failed check / bad data,
2 usage error (unknown scenario or plot kind, bad flags).
"""

from __future__ import annotations

import datetime as _dt
import logging
import os
import sys
from pathlib import Path

import click

from . import plotting, scenarios
from .core.config import ConfigError, load_config
from .gem1d import UnstableStepError

OUT_ENV = "GEMSIM_OUT"
GOLDEN_ENV = "GEMSIM_GOLDEN"

# plots drawn after each scenario: csv name -> plot kind
PLOTS = {
    "two_image_movie": {"similarity.csv": "similarity", "echo.csv": "echo"},
    "delay_independence": {"contrast.csv": "contrast"},
    "mtf_study": {"contrast.csv": "contrast", "mtf.csv": "mtf"},
}


def _fail(lines) -> None:
    for line in lines:
        click.echo(line, err=True)
    sys.exit(1)


def _settings(config, overrides):
    try:
        return load_config(config, overrides)
    except ConfigError as exc:
        _fail(["invalid config:"] + [f"  {k}: {m}" for k, m in exc.problems])


def _results_dir(out: str | None, scenario: str) -> Path:
    if out:
        return Path(out)
    root = Path(os.environ.get(OUT_ENV, "results"))
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    return root / f"{stamp}_{scenario}"


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool):
    """Simulate image storage in a gradient echo memory."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(name)s: %(message)s")


@main.command()
@click.argument("scenario", type=click.Choice(scenarios.SCENARIOS))
@click.option("--config", "config", type=click.Path(dir_okay=False), help="INI file layered on the defaults.")
@click.option("--out", help=f"Results directory (default: a dated folder under ${OUT_ENV} or ./results).")
@click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE", help="Override one config value.")
@click.option("--threads", default=1, show_default=True, type=click.IntRange(min=1), help="Frame-rendering threads.")
@click.option("--dry-run", is_flag=True, help="Print the resolved config and exit without writing.")
@click.option("--golden", "golden_root", type=click.Path(file_okay=False),
              help=f"Compare CSVs against goldens in this folder (or ${GOLDEN_ENV}).")
@click.option("--regen-golden", is_flag=True, help="Overwrite the goldens with this run's CSVs.")
@click.option("--no-images", is_flag=True, help="Skip PGM frames.")
@click.option("--no-plots", is_flag=True, help="Skip SVG plots.")
def run(scenario, config, out, overrides, threads, dry_run, golden_root, regen_golden, no_images, no_plots):
    """Run SCENARIO and write CSVs, PGM frames, plots and the resolved config."""
    settings = _settings(config, overrides)
    failed = [c for c in scenarios.preflight(settings) if not c.ok]
    if failed:
        _fail(["config fails preflight checks:"] + [f"  {c.line()}" for c in failed])
    if dry_run:
        click.echo(settings.to_ini(), nl=False)
        return
    golden_root = golden_root or os.environ.get(GOLDEN_ENV)
    if regen_golden and not golden_root:
        raise click.UsageError(f"--regen-golden needs --golden or ${GOLDEN_ENV}")

    out_dir = _results_dir(out, scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.ini").write_text(settings.to_ini())
    try:
        _, written = scenarios.run(scenario, settings, out_dir, threads=threads, images=not no_images)
    except (UnstableStepError, ValueError) as exc:
        _fail([f"run failed: {exc}"])
    if not no_plots:
        for name, kind in PLOTS[scenario].items():
            written.append(plotting.render(out_dir / name, kind))
    click.echo(f"{len(written) + 1} outputs written to {out_dir}")

    if regen_golden:
        for p in scenarios.save_golden(scenario, out_dir, Path(golden_root)):
            click.echo(f"golden updated: {p}")
    elif golden_root:
        problems = scenarios.compare_golden(scenario, out_dir, Path(golden_root))
        if problems:
            _fail(["golden mismatch:"] + [f"  {p}" for p in problems])
        click.echo("golden: match")


@main.command()
@click.argument("csv_path", type=click.Path(dir_okay=False))
@click.argument("kind", type=click.Choice(plotting.KINDS))
@click.option("--out", type=click.Path(dir_okay=False), help="SVG path (default: next to the CSV).")
def plot(csv_path, kind, out):
    """Render CSV_PATH as a KIND plot."""
    try:
        path = plotting.render(csv_path, kind, out)
    except (plotting.PlotError, OSError) as exc:
        _fail([f"error: {exc}"])
    click.echo(str(path))


@main.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE")
def validate(config_path, overrides):
    """Check every constraint on CONFIG_PATH and report PASS/FAIL per rule."""
    try:
        settings = load_config(config_path, overrides)
    except ConfigError as exc:
        _fail([f"FAIL  {k}: {m}" for k, m in exc.problems])
    click.echo(f"PASS  config.ranges: {sum(len(v) for v in settings.values.values())} keys parsed and in range")
    checks = scenarios.preflight(settings)
    for c in checks:
        click.echo(c.line())
    if not all(c.ok for c in checks):
        sys.exit(1)


if __name__ == "__main__":
    main()

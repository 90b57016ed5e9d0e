"""Command line front end.

Exit codes: 0 success, 2 feasibility refusal, 3 barrier breach or step
underflow, 4 configuration error.
"""

from __future__ import annotations

import csv
import json
import sys

import click

from .errors import ScenarioError
from .harness.output import fmt, write_csv, write_pair_csv, write_svg
from .harness.scenario import PRESETS, load_scenario
from .harness.simulate import (
    InfeasibleScenario,
    PreconditionError,
    compare,
    feasibility,
    run_scenario,
    sweep,
)

EXIT_OK, EXIT_INFEASIBLE, EXIT_BREACH, EXIT_CONFIG = 0, 2, 3, 4


def _load(path):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _refuse(exc: InfeasibleScenario):
    click.echo("refused: scenario is infeasible", err=True)
    click.echo(exc.report.summary(), err=True)
    sys.exit(EXIT_INFEASIBLE)


def _print_metrics(r, prefix=""):
    click.echo(f"{prefix}status: {r.status}")
    for k, v in r.metrics.as_dict().items():
        if v is not None:
            click.echo(f"{prefix}{k}: {v!r}")


@click.group()
def main():
    """Funnel-control simulations for relative-degree-two plants."""


@main.command("presets")
def presets_cmd():
    """List shipped scenario presets."""
    for name in PRESETS:
        click.echo(name)


@main.command()
@click.argument("scenario")
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), help="CSV output path.")
@click.option("--svg", "svg_path", type=click.Path(dir_okay=False), help="SVG output path.")
@click.option("--allow-infeasible", is_flag=True, help="Run even if start conditions fail.")
def run(scenario, out_csv, svg_path, allow_infeasible):
    """Simulate SCENARIO (file path or preset name)."""
    s = _load(scenario)
    try:
        r = run_scenario(s, allow_infeasible=allow_infeasible)
    except InfeasibleScenario as exc:
        _refuse(exc)
    if out_csv:
        write_csv(r, out_csv)
    if svg_path:
        write_svg(r, svg_path)
    _print_metrics(r)
    sys.exit(EXIT_OK if r.completed else EXIT_BREACH)


@main.command()
@click.argument("scenario")
def check(scenario):
    """Check the filter controller's start conditions only."""
    s = _load(scenario)
    report = feasibility(s)
    if report is None:
        click.echo("no start conditions to check for this controller type")
        sys.exit(EXIT_OK)
    click.echo(report.summary())
    sys.exit(EXIT_OK if report.feasible else EXIT_INFEASIBLE)


def _parse_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


@main.command("sweep")
@click.argument("scenario")
@click.option("--param", help="Dotted path, e.g. controller.theta_hat.")
@click.option("--values", help="Comma-separated values.")
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), help="Write the table as CSV.")
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--allow-infeasible", is_flag=True)
def sweep_cmd(scenario, param, values, out_csv, workers, allow_infeasible):
    """Run SCENARIO once per value of --param."""
    s = _load(scenario)
    preset = s.data.get("sweep", {})
    param = param or preset.get("param")
    vals = _parse_values(values) if values is not None else preset.get("values")
    if param is None or vals is None:
        click.echo("config error: --param and --values are required", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        rows, _ = sweep(s, param, vals, allow_infeasible=allow_infeasible, workers=workers)
    except ScenarioError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    keys = ["max_funnel_occupancy", "max_theta_ratio", "sup_u", "tv_u", "final_abs_error"]
    header = ["value", "status", *keys, "sup_distance", "error"]
    table = []
    for row in rows:
        md = row.metrics.as_dict() if row.metrics else {}
        table.append(
            [repr(row.value), row.status]
            + ["" if md.get(k) is None else fmt(md[k]) for k in keys]
            + ["" if row.sup_distance is None else fmt(row.sup_distance), row.error or ""]
        )
    fh = open(out_csv, "w", newline="", encoding="utf-8") if out_csv else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(table)
    finally:
        if out_csv:
            fh.close()
    bad = any(r.status not in ("completed",) for r in rows)
    sys.exit(EXIT_BREACH if bad else EXIT_OK)


@main.command("compare")
@click.argument("scenario_a")
@click.argument("scenario_b")
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), help="Paired CSV path.")
@click.option("--svg", "svg_path", type=click.Path(dir_okay=False))
@click.option("--allow-infeasible", is_flag=True)
def compare_cmd(scenario_a, scenario_b, out_csv, svg_path, allow_infeasible):
    """Run two scenarios side by side against their common funnel."""
    a, b = _load(scenario_a), _load(scenario_b)
    try:
        c = compare(a, b, allow_infeasible=allow_infeasible)
    except PreconditionError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except InfeasibleScenario as exc:
        _refuse(exc)
    if out_csv:
        write_pair_csv(c, out_csv)
    if svg_path:
        write_svg(c, svg_path)
    _print_metrics(c.a, "a.")
    _print_metrics(c.b, "b.")
    click.echo(f"shared_funnel_ok: {json.dumps(c.shared_funnel_ok)}")
    ok = c.a.completed and c.b.completed
    sys.exit(EXIT_OK if ok else EXIT_BREACH)


if __name__ == "__main__":
    main()

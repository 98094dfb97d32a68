"""Command-line front-end: ingest, report, fetch-intensity, validate.

Exit codes: 0 success, 2 validation/parse failure, 3 network failure
after retries. Diagnostics go to stderr; stdout carries only command
payloads (and rendered reports when the output path is ``-``).
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

import click
import yaml

from . import __version__
from .config import DEFAULT_ENDPOINT, RunConfig, load_config
from .embodied import AmortizationPolicy, load_inventory
from .errors import CarbonSnapError, ConfigError, FetchError, ValidationError
from .intensity import (
    IntensitySeries,
    fetch_intensity,
    load_series,
    series_stats,
    series_to_csv,
    series_to_payload,
    time_weighted_carbon,
)
from .quantities import (
    EnergyQuantity,
    SnapshotPeriod,
    format_exact,
    parse_utc,
    to_decimal,
)
from .report import (
    DEFAULT_EQUIVALENTS,
    EquivalentFactor,
    ScenarioAxis,
    ScenarioReport,
    build_active_matrix,
    build_embodied_matrix,
    build_report,
    render_json,
    render_markdown,
)
from .telemetry import (
    MeasurementComponent,
    SnapshotSummary,
    integrate_site_samples,
    parse_measurements,
    parse_samples,
    summarize_measurements,
    summary_from_payload,
    summary_to_payload,
)

_DIRECT_COMPONENTS = (
    MeasurementComponent.COOLING,
    MeasurementComponent.POWER,
    MeasurementComponent.FACILITY,
)


@contextlib.contextmanager
def _error_boundary():
    try:
        yield
    except FetchError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    except CarbonSnapError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


def _read_text(path: Path, what: str) -> str:
    if not path.is_file():
        raise ConfigError(f"{what} file not found: {path}")
    return path.read_text()


def load_summary(
    measurements_path: Path, samples_path: Optional[Path] = None
) -> SnapshotSummary:
    """Load and reconcile measurements (CSV or normalized JSON) plus samples."""
    if measurements_path.suffix.lower() == ".json":
        if samples_path is not None:
            raise ConfigError(
                "samples cannot be combined with an already-normalized "
                "measurements JSON; pass the original CSV instead"
            )
        payload = json.loads(_read_text(measurements_path, "measurements"))
        return summary_from_payload(payload)
    measurements = parse_measurements(
        _read_text(measurements_path, "measurements"), path=str(measurements_path)
    )
    if samples_path is not None:
        series = parse_samples(
            _read_text(samples_path, "samples"), path=str(samples_path)
        )
        measurements = list(measurements) + integrate_site_samples(series)
    return summarize_measurements(measurements)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _effective_intensity_axis(series: IntensitySeries, period: SnapshotPeriod) -> ScenarioAxis:
    """Collapse a varying series to its time-weighted mean over the period."""
    one_kwh = EnergyQuantity(1)
    carbon = time_weighted_carbon([(period, one_kwh)], series)
    return ScenarioAxis.of("intensity", [("time-weighted", carbon.grams)])


def run_pipeline(config: RunConfig) -> tuple[ScenarioReport, SnapshotSummary]:
    """Ingest, resolve intensity, build matrices, assemble the report."""
    summary = load_summary(config.measurements_path, config.samples_path)
    period = summary.period
    energies = summary.component_energies()
    nodes_energy = energies.get(MeasurementComponent.NODES, EnergyQuantity.ZERO)
    network_energy = energies.get(MeasurementComponent.NETWORK, EnergyQuantity.ZERO)
    direct_energy = EnergyQuantity.ZERO
    for component in _DIRECT_COMPONENTS:
        direct_energy = direct_energy + energies.get(component, EnergyQuantity.ZERO)
    direct_sites = {
        r.site for r in summary.reconciliations if r.component in _DIRECT_COMPONENTS
    }
    exempt_energy = EnergyQuantity.ZERO
    for r in summary.reconciliations:
        it_row = r.component in (MeasurementComponent.NODES, MeasurementComponent.NETWORK)
        if it_row and r.site in direct_sites:
            exempt_energy = exempt_energy + r.canonical.energy

    if config.base_energy_kwh is not None:
        base_energy = EnergyQuantity(config.base_energy_kwh)
        base_source = "pinned"
    else:
        base_energy = nodes_energy
        base_source = "measured"

    inventory = load_inventory(config.inventory_path)
    node_count = config.node_count or inventory.total_node_count()
    if node_count < 1:
        raise ConfigError("inventory has no nodes and embodied.node_count is not set")

    series_provenance: dict[str, object] = {}
    if config.intensity_mode == "scenario":
        intensity_axis = config.intensity_axis
    elif config.intensity_mode == "series":
        series = load_series(config.series_path)
        intensity_axis = _effective_intensity_axis(series, period)
        series_provenance = {"series": {"path": str(config.series_path)}}
    else:
        if config.api_start and config.api_end:
            window = SnapshotPeriod(parse_utc(config.api_start), parse_utc(config.api_end))
        else:
            window = period
        series = fetch_intensity(
            window, config.api_endpoint, cache_dir=config.cache_dir
        )
        intensity_axis = _effective_intensity_axis(series, period)
        series_provenance = {
            "series": {"endpoint": config.api_endpoint, "window": str(window)}
        }

    active = build_active_matrix(
        base_energy,
        intensity_axis,
        config.pue_axis,
        network_energy=network_energy,
        pue_exempt_energy=exempt_energy,
        direct_facilities_energy=direct_energy,
    )
    policy = AmortizationPolicy(days_per_year=config.days_per_year)
    embodied = build_embodied_matrix(
        config.embodied_estimates, config.embodied_lifespans, period, node_count, policy
    )

    equivalents = list(DEFAULT_EQUIVALENTS)
    for entry in config.equivalents:
        try:
            equivalents.append(
                EquivalentFactor(
                    name=str(entry["name"]),
                    unit=str(entry["unit"]),
                    kg_per_unit=entry["kg_per_unit"],
                )
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad equivalents entry {entry!r}: {exc!r}") from None

    start, end = period.isoformat()
    inputs: dict[str, object] = {
        "inventory": {
            "path": str(config.inventory_path),
            "sha256": _sha256(config.inventory_path),
        },
        "measurements": {
            "path": str(config.measurements_path),
            "sha256": _sha256(config.measurements_path),
        },
    }
    if config.samples_path is not None:
        inputs["samples"] = {
            "path": str(config.samples_path),
            "sha256": _sha256(config.samples_path),
        }
    inputs.update(series_provenance)
    provenance = {
        "tool_version": __version__,
        "inputs": inputs,
        "scenario_axes": {
            "intensity": [
                {"label": label, "g_per_kwh": format_exact(v)}
                for label, v in intensity_axis.points
            ],
            "pue": [
                {"label": label, "value": format_exact(v)}
                for label, v in config.pue_axis.points
            ],
            "embodied_estimates": [
                {"label": label, "kg": format_exact(v)}
                for label, v in config.embodied_estimates.points
            ],
            "lifespans_years": [
                {"label": label, "years": format_exact(v)}
                for label, v in config.embodied_lifespans.points
            ],
        },
        "snapshot_period": {"start": start, "end": end},
        "node_count": node_count,
        "intensity_mode": config.intensity_mode,
        "base_energy_source": base_source,
        "measured_nodes_energy_kwh": format_exact(nodes_energy.kwh),
    }

    report = build_report(
        base_energy, active, embodied, equivalents=equivalents, provenance=provenance
    )
    return report, summary


def write_report(report: ScenarioReport, config: RunConfig) -> list[Path]:
    """Write the rendered report per the output config; '-' streams to stdout."""
    json_text = render_json(report)
    md_text = render_markdown(report, truncate_embodied=config.truncate_embodied)
    if config.output_path == "-":
        click.echo(json_text if config.output_format == "json" else md_text, nl=False)
        return []
    out = Path(config.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    written = []
    if config.output_format in ("json", "both"):
        out_json = out if config.output_format == "json" else out.with_suffix(".json")
        out_json.write_text(json_text)
        written.append(out_json)
    if config.output_format in ("markdown", "both"):
        out_md = out if config.output_format == "markdown" else out.with_suffix(".md")
        out_md.write_text(md_text)
        written.append(out_md)
    return written


def _collect_overrides(pairs: tuple[str, ...]) -> dict[str, object]:
    overrides: dict[str, object] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        overrides[key.strip()] = yaml.safe_load(value)
    return overrides


@click.group()
@click.version_option(__version__, prog_name="carbonsnap")
def main():
    """Carbon accounting for data-centre snapshot periods.

    Converts site energy telemetry, grid carbon intensity, and hardware
    inventories into active + embodied carbon-equivalent reports.
    """


@main.command("ingest")
@click.argument("measurements", type=click.Path(path_type=Path))
@click.option(
    "--samples", type=click.Path(path_type=Path), default=None,
    help="Per-node power samples CSV, integrated to energy.",
)
@click.option(
    "--out", "out_path", type=click.Path(path_type=Path), default=None,
    help="Write the normalized measurements JSON here for downstream steps.",
)
def cmd_ingest(measurements: Path, samples: Optional[Path], out_path: Optional[Path]):
    """Parse and reconcile energy measurements; print canonical energies."""
    with _error_boundary():
        summary = load_summary(measurements, samples)
        rows = []
        for r in summary.reconciliations:
            ratio_text = " ".join(
                f"{source.value}={to_decimal(value, 4)}"
                for source, value in r.ratios.items()
            )
            rows.append(
                (
                    r.site,
                    r.component.value,
                    r.canonical.source.value,
                    format_exact(r.canonical.energy.kwh),
                    ratio_text,
                )
            )
        widths = [
            max(len(str(row[i])) for row in rows + [("site", "component", "source", "kwh", "")])
            for i in range(4)
        ]
        header = ("site", "component", "source", "kwh")
        click.echo("  ".join(h.ljust(widths[i]) for i, h in enumerate(header)) + "  ratios")
        for row in rows:
            click.echo(
                "  ".join(str(row[i]).ljust(widths[i]) for i in range(4)) + "  " + row[4]
            )
        for component, energy in sorted(
            summary.component_energies().items(), key=lambda kv: kv[0].value
        ):
            click.echo(f"Total ({component.value}): {format_exact(energy.kwh)} kWh")
        if out_path is not None:
            out_path.parent.mkdir(parents=True, exist_ok=True)
            out_path.write_text(
                json.dumps(summary_to_payload(summary), sort_keys=True, indent=2) + "\n"
            )
            click.echo(f"wrote {out_path}", err=True)


@main.command("report")
@click.argument("config_path", type=click.Path(path_type=Path))
@click.option(
    "--reference-compat", is_flag=True,
    help="Pin the reference-scenario constants (base energy 19380 kWh, "
    "PUE high point 1.6, 2400-server fleet, truncating embodied rendering) "
    "so output reproduces the bundled reference tables.",
)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override any config key by dotted path (repeatable).")
@click.option("--output", "-o", "output_path", default=None,
              help="Override output.path ('-' for stdout).")
@click.option("--format", "output_format", default=None,
              type=click.Choice(["json", "markdown", "both"]),
              help="Override output.format.")
@click.option("--cache-dir", default=None, help="Intensity API cache directory.")
@click.option("--endpoint", envvar="CARBONSNAP_INTENSITY_ENDPOINT", default=None,
              help="Intensity API endpoint (env: CARBONSNAP_INTENSITY_ENDPOINT).")
def cmd_report(config_path, reference_compat, overrides, output_path, output_format,
               cache_dir, endpoint):
    """Run the full pipeline from a config file and write the report."""
    with _error_boundary():
        collected = _collect_overrides(overrides)
        if output_path is not None:
            collected["output.path"] = output_path
        if output_format is not None:
            collected["output.format"] = output_format
        if cache_dir is not None:
            collected["cache_dir"] = cache_dir
        if endpoint is not None:
            collected["intensity.api.endpoint"] = endpoint
        config = load_config(
            config_path, overrides=collected, reference_compat=reference_compat
        )
        report, _summary = run_pipeline(config)
        written = write_report(report, config)
        for path in written:
            click.echo(f"wrote {path}", err=True)


@main.command("fetch-intensity")
@click.argument("start")
@click.argument("end")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path),
              help="Series JSON destination ('-' for stdout).")
@click.option("--endpoint", envvar="CARBONSNAP_INTENSITY_ENDPOINT",
              default=DEFAULT_ENDPOINT, show_default=True,
              help="Intensity API endpoint (env: CARBONSNAP_INTENSITY_ENDPOINT).")
@click.option("--cache-dir", default=None, help="Cache directory for API responses.")
@click.option("--csv-out", type=click.Path(path_type=Path), default=None,
              help="Also export the series as CSV for external plotting.")
def cmd_fetch_intensity(start, end, out_path: Path, endpoint, cache_dir, csv_out):
    """Fetch the half-hourly intensity series for a UTC date range.

    START and END accept full ISO-8601 timestamps or plain dates
    (midnight UTC).
    """
    with _error_boundary():
        window = SnapshotPeriod(_parse_point(start), _parse_point(end))
        series = fetch_intensity(window, endpoint, cache_dir=cache_dir)
        payload = json.dumps(series_to_payload(series), sort_keys=True, indent=2) + "\n"
        if str(out_path) == "-":
            click.echo(payload, nl=False)
        else:
            out_path.parent.mkdir(parents=True, exist_ok=True)
            out_path.write_text(payload)
            click.echo(f"wrote {out_path}", err=True)
        if csv_out is not None:
            csv_out.parent.mkdir(parents=True, exist_ok=True)
            csv_out.write_text(series_to_csv(series))
            click.echo(f"wrote {csv_out}", err=True)
        if len(series):
            lo, mean, hi = series_stats(series)
            click.echo(
                f"{len(series)} periods; intensity g/kWh min {format_exact(lo)} "
                f"mean {to_decimal(mean, 1)} max {format_exact(hi)}",
                err=True,
            )
        else:
            click.echo("0 periods returned", err=True)


def _parse_point(text: str):
    try:
        return parse_utc(text)
    except ValidationError:
        pass
    try:
        return parse_utc(f"{text.strip()}T00:00:00Z")
    except ValidationError:
        raise ValidationError(
            f"{text!r} is neither an ISO-8601 UTC timestamp nor a date"
        ) from None


@main.command("validate")
@click.argument("config_path", type=click.Path(path_type=Path))
@click.option("--reference-compat", is_flag=True,
              help="Validate with the reference-scenario overlay applied.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override any config key by dotted path (repeatable).")
def cmd_validate(config_path, reference_compat, overrides):
    """Check a run config and its referenced files without running."""
    with _error_boundary():
        load_config(
            config_path,
            overrides=_collect_overrides(overrides),
            reference_compat=reference_compat,
        )
        click.echo("OK")


if __name__ == "__main__":
    main()

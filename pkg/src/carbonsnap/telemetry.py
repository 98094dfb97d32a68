"""Energy telemetry ingestion and reconciliation.

Three input shapes are supported: pre-aggregated per-site kWh figures,
rack/facility meter rows (same CSV), and per-node power sample series
that get integrated to energy. Disagreeing measurement channels for one
site are reconciled to a single canonical figure by source trust;
cross-channel ratios are reported as metadata, never auto-applied.
"""

from __future__ import annotations

import csv
import enum
import io
import statistics
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ParseError, ValidationError
from .model import ActiveComponent
from .quantities import (
    EnergyQuantity,
    SnapshotPeriod,
    format_exact,
    hours_between,
    parse_utc,
    to_fraction,
)

MEASUREMENTS_HEADER = ("site", "source", "period_start", "period_end", "kwh", "nodes")
SAMPLES_HEADER = ("site", "node_id", "timestamp", "watts")


class GapWarning(UserWarning):
    """A power sample series has a suspiciously long gap that was integrated across."""


class MeasurementSource(enum.Enum):
    """Where an energy figure came from, ordered by trust.

    Each step down the chain omits overheads the step above captures
    (PSU losses, non-CPU components), so when channels disagree the
    most upstream available source wins.
    """

    FACILITY = "facility"
    PDU = "pdu"
    IPMI = "ipmi"
    TURBOSTAT = "turbostat"

    @property
    def trust_rank(self) -> int:
        return _TRUST_ORDER.index(self)

    @classmethod
    def parse(cls, text: str) -> "MeasurementSource":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValidationError(
                f"unknown measurement source {text!r}; expected one of: {valid}"
            ) from None


_TRUST_ORDER = (
    MeasurementSource.FACILITY,
    MeasurementSource.PDU,
    MeasurementSource.IPMI,
    MeasurementSource.TURBOSTAT,
)


class MeasurementComponent(enum.Enum):
    """What the metered energy powered.

    Plain node rows are the default. Direct cooling/power/facility rows
    are accepted so sites that can meter their overheads feed them in
    instead of relying on a PUE estimate.
    """

    NODES = "nodes"
    NETWORK = "network"
    COOLING = "cooling"
    POWER = "power"
    FACILITY = "facility"

    @property
    def active_tag(self) -> ActiveComponent:
        if self is MeasurementComponent.NODES:
            return ActiveComponent.NODES
        if self is MeasurementComponent.NETWORK:
            return ActiveComponent.NETWORK
        return ActiveComponent.FACILITIES

    @classmethod
    def parse(cls, text: str) -> "MeasurementComponent":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise ValidationError(
                f"unknown measurement component {text!r}; expected one of: {valid}"
            ) from None


@dataclass(frozen=True)
class EnergyMeasurement:
    """One (site, source, component) energy figure for the snapshot period."""

    site: str
    source: MeasurementSource
    period: SnapshotPeriod
    energy: EnergyQuantity
    nodes_covered: int
    component: MeasurementComponent = MeasurementComponent.NODES

    def __post_init__(self):
        if not self.site:
            raise ValidationError("measurement site must be non-empty")
        minimum = 1 if self.component is MeasurementComponent.NODES else 0
        if not isinstance(self.nodes_covered, int) or self.nodes_covered < minimum:
            raise ValidationError(
                f"{self.site}: nodes_covered must be an integer >= {minimum}, "
                f"got {self.nodes_covered!r}"
            )


@dataclass(frozen=True)
class PowerSampleSeries:
    """Time-ordered node power samples (timestamp, watts)."""

    site: str
    node_id: str
    samples: tuple[tuple[datetime, Fraction], ...]

    def __post_init__(self):
        samples = tuple((ts, to_fraction(w)) for ts, w in self.samples)
        object.__setattr__(self, "samples", samples)
        previous: Optional[datetime] = None
        for ts, watts in samples:
            if ts.tzinfo is None:
                raise ValidationError(
                    f"{self.site}/{self.node_id}: sample timestamps must be UTC-aware"
                )
            if watts < 0:
                raise ValidationError(
                    f"{self.site}/{self.node_id}: negative power sample at {ts.isoformat()}"
                )
            if previous is not None and ts <= previous:
                raise ValidationError(
                    f"{self.site}/{self.node_id}: timestamps must be strictly "
                    f"increasing (at {ts.isoformat()})"
                )
            previous = ts


@dataclass(frozen=True)
class ReconciliationReport:
    """Canonical figure for one (site, component) plus per-source ratios.

    Ratios are source energy over canonical energy. They are metadata:
    nothing here rescales a measurement.
    """

    site: str
    component: MeasurementComponent
    canonical: EnergyMeasurement
    ratios: Mapping[MeasurementSource, Fraction]


def _row_error(msg: str, line: int, column: str | None, path: str | None) -> ParseError:
    return ParseError(msg, path=path, line=line, column=column)


def parse_measurements(text: str, *, path: str | None = None) -> list[EnergyMeasurement]:
    """Parse the measurements CSV into one EnergyMeasurement per row.

    Expected header: ``site,source,period_start,period_end,kwh,nodes``
    with an optional trailing ``component`` column (defaults to nodes).
    Timestamps are ISO-8601 with explicit UTC offset; kwh is a decimal.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: header row required", path=path, line=1) from None
    header = tuple(h.strip().lower() for h in header)
    if header not in (MEASUREMENTS_HEADER, MEASUREMENTS_HEADER + ("component",)):
        raise ParseError(
            f"unexpected header {','.join(header)!r}; "
            f"expected {','.join(MEASUREMENTS_HEADER)}[,component]",
            path=path,
            line=1,
        )
    has_component = len(header) == 7

    measurements: list[EnergyMeasurement] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise _row_error(
                f"expected {len(header)} columns, got {len(row)}", line, None, path
            )
        cells = [c.strip() for c in row]
        try:
            source = MeasurementSource.parse(cells[1])
        except ValidationError as exc:
            raise _row_error(str(exc), line, "source", path) from None
        try:
            start = parse_utc(cells[2])
        except ValidationError as exc:
            raise _row_error(str(exc), line, "period_start", path) from None
        try:
            end = parse_utc(cells[3])
        except ValidationError as exc:
            raise _row_error(str(exc), line, "period_end", path) from None
        try:
            period = SnapshotPeriod(start, end)
        except ValidationError as exc:
            raise _row_error(str(exc), line, "period_end", path) from None
        try:
            energy = EnergyQuantity(cells[4])
        except ValidationError as exc:
            raise _row_error(str(exc), line, "kwh", path) from None
        try:
            nodes = int(cells[5])
        except ValueError:
            raise _row_error(
                f"nodes must be an integer, got {cells[5]!r}", line, "nodes", path
            ) from None
        component = MeasurementComponent.NODES
        if has_component and cells[6]:
            try:
                component = MeasurementComponent.parse(cells[6])
            except ValidationError as exc:
                raise _row_error(str(exc), line, "component", path) from None
        try:
            measurements.append(
                EnergyMeasurement(
                    site=cells[0],
                    source=source,
                    period=period,
                    energy=energy,
                    nodes_covered=nodes,
                    component=component,
                )
            )
        except ValidationError as exc:
            raise _row_error(str(exc), line, None, path) from None
    return measurements


def parse_samples(text: str, *, path: str | None = None) -> list[PowerSampleSeries]:
    """Parse the per-node power samples CSV into one series per (site, node).

    Rows need not be grouped or ordered; exact-duplicate timestamps for
    one node are rejected.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: header row required", path=path, line=1) from None
    header = tuple(h.strip().lower() for h in header)
    if header != SAMPLES_HEADER:
        raise ParseError(
            f"unexpected header {','.join(header)!r}; expected {','.join(SAMPLES_HEADER)}",
            path=path,
            line=1,
        )

    grouped: dict[tuple[str, str], dict[datetime, Fraction]] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 4:
            raise _row_error(f"expected 4 columns, got {len(row)}", line, None, path)
        site, node_id, ts_text, watts_text = (c.strip() for c in row)
        if not site or not node_id:
            raise _row_error("site and node_id must be non-empty", line, "site", path)
        try:
            ts = parse_utc(ts_text)
        except ValidationError as exc:
            raise _row_error(str(exc), line, "timestamp", path) from None
        try:
            watts = to_fraction(watts_text)
        except ValidationError as exc:
            raise _row_error(str(exc), line, "watts", path) from None
        if watts < 0:
            raise _row_error(f"negative watts {watts_text}", line, "watts", path)
        node_samples = grouped.setdefault((site, node_id), {})
        if ts in node_samples:
            raise _row_error(
                f"duplicate timestamp {ts.isoformat()} for node {node_id!r}",
                line,
                "timestamp",
                path,
            )
        node_samples[ts] = watts

    series = []
    for (site, node_id), node_samples in sorted(grouped.items()):
        ordered = tuple(sorted(node_samples.items()))
        series.append(PowerSampleSeries(site=site, node_id=node_id, samples=ordered))
    return series


def integrate_power(
    series: PowerSampleSeries, *, gap_warn_ratio: int = 10
) -> EnergyQuantity:
    """Trapezoidal integral of a power series, in kWh.

    Gaps are integrated across (dropping data would bias energy low); a
    gap longer than ``gap_warn_ratio`` times the median sample interval
    raises a GapWarning.
    """
    samples = series.samples
    if len(samples) < 2:
        raise ValidationError(
            f"{series.site}/{series.node_id}: need at least 2 samples to "
            f"integrate, got {len(samples)}"
        )

    intervals = [
        hours_between(samples[i][0], samples[i + 1][0]) for i in range(len(samples) - 1)
    ]
    median_interval = statistics.median(sorted(intervals))
    energy_wh = Fraction(0)
    for (t0, w0), (t1, w1), dt in zip(samples, samples[1:], intervals):
        if median_interval > 0 and dt > gap_warn_ratio * median_interval:
            warnings.warn(
                f"{series.site}/{series.node_id}: {float(dt):.2f} h gap between "
                f"{t0.isoformat()} and {t1.isoformat()} integrated across "
                f"(median interval {float(median_interval):.4f} h)",
                GapWarning,
                stacklevel=2,
            )
        energy_wh += (w0 + w1) / 2 * dt
    return EnergyQuantity(energy_wh / 1000)


def reconcile(site_measurements: Sequence[EnergyMeasurement]) -> ReconciliationReport:
    """Pick the canonical figure for one (site, component) and report ratios."""
    if not site_measurements:
        raise ValidationError("cannot reconcile an empty set of measurements")
    sites = {m.site for m in site_measurements}
    if len(sites) != 1:
        raise ValidationError(f"measurements span multiple sites: {sorted(sites)}")
    components = {m.component for m in site_measurements}
    if len(components) != 1:
        raise ValidationError(
            f"measurements span multiple components: {sorted(c.value for c in components)}"
        )
    periods = {m.period for m in site_measurements}
    if len(periods) != 1:
        raise ValidationError(
            f"measurements for site {site_measurements[0].site!r} span multiple periods"
        )
    seen: set[MeasurementSource] = set()
    for m in site_measurements:
        if m.source in seen:
            raise ValidationError(
                f"duplicate source {m.source.value!r} for site {m.site!r}"
            )
        seen.add(m.source)

    canonical = min(site_measurements, key=lambda m: m.source.trust_rank)
    ratios: dict[MeasurementSource, Fraction] = {}
    for m in sorted(site_measurements, key=lambda m: m.source.trust_rank):
        if canonical.energy.kwh == 0:
            if m.energy.kwh != 0:
                raise ValidationError(
                    f"site {m.site!r}: cannot express {m.source.value} against a "
                    f"zero canonical energy"
                )
            ratios[m.source] = Fraction(1)
        else:
            ratios[m.source] = m.energy.kwh / canonical.energy.kwh
    return ReconciliationReport(
        site=canonical.site,
        component=canonical.component,
        canonical=canonical,
        ratios=ratios,
    )


def snapshot_energy(measurements: Iterable[EnergyMeasurement]) -> EnergyQuantity:
    """Exact sum of canonical energies, one per (site, component)."""
    seen: set[tuple[str, MeasurementComponent]] = set()
    total = EnergyQuantity.ZERO
    for m in measurements:
        key = (m.site, m.component)
        if key in seen:
            raise ValidationError(
                f"two canonical entries for site {m.site!r} component "
                f"{m.component.value!r}"
            )
        seen.add(key)
        total = total + m.energy
    return total


def integrate_site_samples(
    series_list: Sequence[PowerSampleSeries], *, gap_warn_ratio: int = 10
) -> list[EnergyMeasurement]:
    """Aggregate per-node integrals into one on-node measurement per site.

    The result is tagged with the IPMI source (the on-node measurement
    class) and a period spanning the site's earliest to latest sample.
    """
    by_site: dict[str, list[PowerSampleSeries]] = {}
    for series in series_list:
        by_site.setdefault(series.site, []).append(series)

    measurements = []
    for site in sorted(by_site):
        site_series = by_site[site]
        energy = EnergyQuantity.ZERO
        for series in site_series:
            energy = energy + integrate_power(series, gap_warn_ratio=gap_warn_ratio)
        start = min(s.samples[0][0] for s in site_series)
        end = max(s.samples[-1][0] for s in site_series)
        measurements.append(
            EnergyMeasurement(
                site=site,
                source=MeasurementSource.IPMI,
                period=SnapshotPeriod(start, end),
                energy=energy,
                nodes_covered=len(site_series),
            )
        )
    return measurements


@dataclass(frozen=True)
class SnapshotSummary:
    """Reconciled canonical energies for one snapshot period."""

    period: SnapshotPeriod
    reconciliations: tuple[ReconciliationReport, ...]

    def canonical_measurements(
        self, component: Optional[MeasurementComponent] = None
    ) -> list[EnergyMeasurement]:
        return [
            r.canonical
            for r in self.reconciliations
            if component is None or r.component is component
        ]

    def total(self, component: Optional[MeasurementComponent] = None) -> EnergyQuantity:
        return snapshot_energy(self.canonical_measurements(component))

    def component_energies(self) -> dict[MeasurementComponent, EnergyQuantity]:
        sums: dict[MeasurementComponent, EnergyQuantity] = {}
        for r in self.reconciliations:
            current = sums.get(r.component, EnergyQuantity.ZERO)
            sums[r.component] = current + r.canonical.energy
        return sums


def summarize_measurements(
    measurements: Sequence[EnergyMeasurement],
) -> SnapshotSummary:
    """Reconcile a mixed bag of measurements into per-(site, component) figures.

    All measurements must share one snapshot period.
    """
    if not measurements:
        raise ValidationError("no measurements to summarize")
    periods = {m.period for m in measurements}
    if len(periods) != 1:
        listing = ", ".join(sorted(str(p) for p in periods))
        raise ValidationError(f"measurements span multiple periods: {listing}")
    grouped: dict[tuple[str, MeasurementComponent], list[EnergyMeasurement]] = {}
    for m in measurements:
        grouped.setdefault((m.site, m.component), []).append(m)
    reconciliations = tuple(
        reconcile(grouped[key]) for key in sorted(grouped, key=lambda k: (k[0], k[1].value))
    )
    return SnapshotSummary(period=periods.pop(), reconciliations=reconciliations)


def summary_to_payload(summary: SnapshotSummary) -> dict:
    """JSON-ready dict for the normalized measurements file."""
    start, end = summary.period.isoformat()
    sites: dict[str, dict] = {}
    for r in summary.reconciliations:
        entry = {
            "canonical_kwh": format_exact(r.canonical.energy.kwh),
            "canonical_source": r.canonical.source.value,
            "nodes": r.canonical.nodes_covered,
            "ratios": {s.value: format_exact(v) for s, v in r.ratios.items()},
        }
        sites.setdefault(r.site, {})[r.component.value] = entry
    return {
        "period": {"start": start, "end": end},
        "sites": sites,
        "totals_kwh": {
            c.value: format_exact(e.kwh) for c, e in sorted(
                summary.component_energies().items(), key=lambda kv: kv[0].value
            )
        },
    }


def summary_from_payload(payload: dict) -> SnapshotSummary:
    """Rebuild a SnapshotSummary from the normalized measurements file."""
    try:
        period = SnapshotPeriod(
            parse_utc(payload["period"]["start"]), parse_utc(payload["period"]["end"])
        )
        reconciliations = []
        for site in sorted(payload["sites"]):
            for component_name in sorted(payload["sites"][site]):
                entry = payload["sites"][site][component_name]
                component = MeasurementComponent.parse(component_name)
                canonical = EnergyMeasurement(
                    site=site,
                    source=MeasurementSource.parse(entry["canonical_source"]),
                    period=period,
                    energy=EnergyQuantity(entry["canonical_kwh"]),
                    nodes_covered=int(entry["nodes"]),
                    component=component,
                )
                ratios = {
                    MeasurementSource.parse(name): to_fraction(value)
                    for name, value in entry.get("ratios", {}).items()
                }
                reconciliations.append(
                    ReconciliationReport(
                        site=site, component=component, canonical=canonical, ratios=ratios
                    )
                )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed normalized measurements payload: {exc!r}") from None
    return SnapshotSummary(period=period, reconciliations=tuple(reconciliations))

"""Scenario matrices, real-world equivalents, and report rendering.

A report is a pure value: build it once, render it as schema-stable JSON
(numbers as decimal strings, keys sorted) or as Markdown tables for
humans. JSON rendering is lossless and idempotent; Markdown is the lossy
view where integer-kg rounding happens.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .embodied import AmortizationPolicy, EmbodiedEstimate, amortize_per_day, period_embodied
from .errors import ParseError, ValidationError
from .model import active_carbon, apply_pue
from .quantities import (
    CarbonIntensity,
    CarbonQuantity,
    EnergyQuantity,
    Numberish,
    PueFactor,
    SnapshotPeriod,
    format_exact,
    format_kg,
    parse_utc,
    round_fraction,
    to_fraction,
)

#: Decimal places (in grams) kept when a value is frozen into a report.
#: Far below every reporting tolerance; makes JSON round-trips identities.
REPORT_RESOLUTION_PLACES = 9

#: Reference PUE scenario points. ``high-alt`` is the alternative high
#: estimate consistent with the bundled reference scenario tables, which
#: are not reproducible with the plain ``high`` value.
DEFAULT_PUE_SCENARIOS = {
    "low": Fraction(11, 10),
    "medium": Fraction(13, 10),
    "high": Fraction(15, 10),
    "high-alt": Fraction(16, 10),
}

KG_PER_PASSENGER_FLIGHT_HOUR = Fraction(92)


@dataclass(frozen=True)
class ScenarioAxis:
    """An ordered, labelled list of scenario points."""

    name: str
    points: tuple[tuple[str, Fraction], ...]

    def __post_init__(self):
        points = tuple((label, to_fraction(value)) for label, value in self.points)
        object.__setattr__(self, "points", points)
        if not points:
            raise ValidationError(f"axis {self.name!r} needs at least one point")
        labels = [label for label, _ in points]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"axis {self.name!r} has duplicate labels")

    @classmethod
    def of(cls, name: str, pairs: Sequence[tuple[str, Numberish]]) -> "ScenarioAxis":
        return cls(name=name, points=tuple((label, to_fraction(v)) for label, v in pairs))

    def labels(self) -> list[str]:
        return [label for label, _ in self.points]


@dataclass(frozen=True)
class ActiveMatrix:
    """Active carbon per (intensity, PUE) cell plus the PUE-free base row."""

    intensity_axis: tuple[tuple[str, Fraction], ...]
    pue_axis: tuple[tuple[str, Fraction], ...]
    base: Mapping[str, CarbonQuantity]
    cells: Mapping[tuple[str, str], CarbonQuantity]

    def cell_range(self) -> tuple[CarbonQuantity, CarbonQuantity]:
        values = sorted(self.cells.values(), key=lambda c: c.grams)
        if not values:
            return CarbonQuantity.ZERO, CarbonQuantity.ZERO
        return values[0], values[-1]


def build_active_matrix(
    energy: EnergyQuantity,
    intensities: ScenarioAxis,
    pues: ScenarioAxis,
    *,
    network_energy: EnergyQuantity = EnergyQuantity.ZERO,
    pue_exempt_energy: EnergyQuantity = EnergyQuantity.ZERO,
    direct_facilities_energy: EnergyQuantity = EnergyQuantity.ZERO,
) -> ActiveMatrix:
    """Active carbon for every intensity x PUE combination, unrounded.

    ``pue_exempt_energy`` is the slice of IT energy whose facility
    overhead was directly metered (supplied as
    ``direct_facilities_energy``); PUE gross-up applies only to the
    remainder. All three extras default to zero, which reduces each cell
    to pue x intensity x energy.
    """
    it_energy = energy + network_energy
    if pue_exempt_energy.kwh > it_energy.kwh:
        raise ValidationError(
            f"PUE-exempt energy ({pue_exempt_energy}) exceeds IT energy ({it_energy})"
        )
    base: dict[str, CarbonQuantity] = {}
    cells: dict[tuple[str, str], CarbonQuantity] = {}
    scaled = EnergyQuantity(it_energy.kwh - pue_exempt_energy.kwh)
    for ilabel, ivalue in intensities.points:
        intensity = CarbonIntensity(ivalue)
        base[ilabel] = active_carbon(it_energy, intensity)
        exempt_carbon = active_carbon(pue_exempt_energy, intensity)
        direct_carbon = active_carbon(direct_facilities_energy, intensity)
        scaled_carbon = active_carbon(scaled, intensity)
        for plabel, pvalue in pues.points:
            grossed = apply_pue(scaled_carbon, PueFactor(pvalue))
            cells[(ilabel, plabel)] = grossed + exempt_carbon + direct_carbon
    return ActiveMatrix(
        intensity_axis=intensities.points,
        pue_axis=pues.points,
        base=base,
        cells=cells,
    )


@dataclass(frozen=True)
class EmbodiedMatrix:
    """Snapshot embodied carbon per (estimate, lifespan) cell."""

    estimate_axis: tuple[tuple[str, Fraction], ...]
    lifespan_axis: tuple[tuple[str, Fraction], ...]
    period: SnapshotPeriod
    node_count: int
    days_per_year: Fraction
    cells: Mapping[tuple[str, str], CarbonQuantity]
    per_node_day: Mapping[tuple[str, str], CarbonQuantity]

    def cell_range(self) -> tuple[CarbonQuantity, CarbonQuantity]:
        values = sorted(self.cells.values(), key=lambda c: c.grams)
        if not values:
            return CarbonQuantity.ZERO, CarbonQuantity.ZERO
        return values[0], values[-1]


def build_embodied_matrix(
    estimates: ScenarioAxis,
    lifespans: ScenarioAxis,
    period: SnapshotPeriod,
    node_count: int,
    policy: AmortizationPolicy = AmortizationPolicy(),
) -> EmbodiedMatrix:
    """Snapshot embodied carbon for every estimate x lifespan combination."""
    cells: dict[tuple[str, str], CarbonQuantity] = {}
    per_day: dict[tuple[str, str], CarbonQuantity] = {}
    for elabel, kg in estimates.points:
        estimate = EmbodiedEstimate(kg, label=elabel)
        for llabel, years in lifespans.points:
            per_day[(elabel, llabel)] = amortize_per_day(estimate, years, policy)
            cells[(elabel, llabel)] = period_embodied(
                estimate, years, period, node_count, policy
            )
    return EmbodiedMatrix(
        estimate_axis=estimates.points,
        lifespan_axis=lifespans.points,
        period=period,
        node_count=node_count,
        days_per_year=to_fraction(policy.days_per_year),
        cells=cells,
        per_node_day=per_day,
    )


# --- real-world equivalents --------------------------------------------------

@dataclass(frozen=True)
class EquivalentFactor:
    """A named kg-per-unit comparison figure (e.g. flight passenger-hours)."""

    name: str
    unit: str
    kg_per_unit: Numberish

    def __post_init__(self):
        kg = to_fraction(self.kg_per_unit)
        if kg <= 0:
            raise ValidationError(f"equivalent {self.name!r}: kg_per_unit must be positive")
        object.__setattr__(self, "kg_per_unit", kg)


FLIGHT_FACTOR = EquivalentFactor(
    name="passenger-flight", unit="passenger-hours",
    kg_per_unit=KG_PER_PASSENGER_FLIGHT_HOUR,
)
DEFAULT_EQUIVALENTS = (FLIGHT_FACTOR,)


def equivalent_units(carbon: CarbonQuantity, factor: EquivalentFactor) -> Fraction:
    return carbon.kilograms / factor.kg_per_unit


def flight_equivalent(carbon: CarbonQuantity) -> Fraction:
    """Passenger-hours of jet flight with the same carbon footprint."""
    return equivalent_units(carbon, FLIGHT_FACTOR)


def passenger_journey_range(
    low: CarbonQuantity, high: CarbonQuantity, kg_per_journey: Numberish
) -> tuple[int, int]:
    """Whole-journey bracket for a carbon span: conservative on both ends.

    The lower bound rounds up (any nonzero carbon is at least a fraction
    of a journey), the upper rounds down.
    """
    per = to_fraction(kg_per_journey)
    if per <= 0:
        raise ValidationError("kg_per_journey must be positive")
    return math.ceil(low.kilograms / per), math.floor(high.kilograms / per)


@dataclass(frozen=True)
class EquivalentComparison:
    factor: EquivalentFactor
    min_units: Fraction
    max_units: Fraction


@dataclass(frozen=True)
class TotalsRange:
    min: CarbonQuantity
    max: CarbonQuantity


@dataclass(frozen=True)
class ScenarioReport:
    """The full scenario matrix product, ready to render."""

    base_energy: EnergyQuantity
    active: ActiveMatrix
    embodied: EmbodiedMatrix
    totals: TotalsRange
    equivalents: tuple[EquivalentComparison, ...]
    provenance: Mapping[str, object] = field(default_factory=dict)


def _quantize(carbon: CarbonQuantity) -> CarbonQuantity:
    return carbon.quantized(REPORT_RESOLUTION_PLACES)


def _quantize_fraction(value: Fraction) -> Fraction:
    return round_fraction(value, REPORT_RESOLUTION_PLACES)


def build_report(
    base_energy: EnergyQuantity,
    active: ActiveMatrix,
    embodied: EmbodiedMatrix,
    *,
    equivalents: Sequence[EquivalentFactor] = DEFAULT_EQUIVALENTS,
    provenance: Optional[Mapping[str, object]] = None,
) -> ScenarioReport:
    """Assemble a report, freezing every cell at the report resolution.

    Totals bracket the admissible combinations: the smallest active cell
    plus the smallest embodied cell up to the largest of each.
    """
    active_q = ActiveMatrix(
        intensity_axis=active.intensity_axis,
        pue_axis=active.pue_axis,
        base={k: _quantize(v) for k, v in active.base.items()},
        cells={k: _quantize(v) for k, v in active.cells.items()},
    )
    embodied_q = EmbodiedMatrix(
        estimate_axis=embodied.estimate_axis,
        lifespan_axis=embodied.lifespan_axis,
        period=embodied.period,
        node_count=embodied.node_count,
        days_per_year=embodied.days_per_year,
        cells={k: _quantize(v) for k, v in embodied.cells.items()},
        per_node_day={k: _quantize(v) for k, v in embodied.per_node_day.items()},
    )
    active_min, active_max = active_q.cell_range()
    embodied_min, embodied_max = embodied_q.cell_range()
    totals = TotalsRange(min=active_min + embodied_min, max=active_max + embodied_max)
    comparisons = tuple(
        EquivalentComparison(
            factor=factor,
            min_units=_quantize_fraction(equivalent_units(totals.min, factor)),
            max_units=_quantize_fraction(equivalent_units(totals.max, factor)),
        )
        for factor in equivalents
    )
    return ScenarioReport(
        base_energy=base_energy,
        active=active_q,
        embodied=embodied_q,
        totals=totals,
        equivalents=comparisons,
        provenance=dict(provenance or {}),
    )


# --- JSON rendering ----------------------------------------------------------

def _kg_string(carbon: CarbonQuantity) -> str:
    return format_exact(carbon.kilograms)


def report_to_payload(report: ScenarioReport) -> dict:
    active = report.active
    embodied = report.embodied
    start, end = embodied.period.isoformat()
    return {
        "base_energy_kwh": format_exact(report.base_energy.kwh),
        "active_matrix": {
            "intensity_axis": [
                {"label": label, "g_per_kwh": format_exact(v)}
                for label, v in active.intensity_axis
            ],
            "pue_axis": [
                {"label": label, "value": format_exact(v)} for label, v in active.pue_axis
            ],
            "base_kg": {label: _kg_string(c) for label, c in active.base.items()},
            "cells_kg": {
                ilabel: {
                    plabel: _kg_string(active.cells[(ilabel, plabel)])
                    for plabel, _ in active.pue_axis
                }
                for ilabel, _ in active.intensity_axis
            },
        },
        "embodied_matrix": {
            "estimate_axis": [
                {"label": label, "kg": format_exact(v)} for label, v in embodied.estimate_axis
            ],
            "lifespan_axis": [
                {"label": label, "years": format_exact(v)}
                for label, v in embodied.lifespan_axis
            ],
            "period": {"start": start, "end": end},
            "node_count": embodied.node_count,
            "days_per_year": format_exact(embodied.days_per_year),
            "cells_kg": {
                elabel: {
                    llabel: _kg_string(embodied.cells[(elabel, llabel)])
                    for llabel, _ in embodied.lifespan_axis
                }
                for elabel, _ in embodied.estimate_axis
            },
            "per_node_day_kg": {
                elabel: {
                    llabel: _kg_string(embodied.per_node_day[(elabel, llabel)])
                    for llabel, _ in embodied.lifespan_axis
                }
                for elabel, _ in embodied.estimate_axis
            },
        },
        "totals": {
            "min_kg": _kg_string(report.totals.min),
            "max_kg": _kg_string(report.totals.max),
        },
        "equivalents": [
            {
                "name": c.factor.name,
                "unit": c.factor.unit,
                "kg_per_unit": format_exact(c.factor.kg_per_unit),
                "min_units": format_exact(c.min_units),
                "max_units": format_exact(c.max_units),
            }
            for c in report.equivalents
        ],
        "provenance": report.provenance,
    }


def render_json(report: ScenarioReport) -> str:
    return json.dumps(report_to_payload(report), sort_keys=True, indent=2) + "\n"


def parse_report(text: str) -> ScenarioReport:
    """Inverse of render_json: parse(render(x)) == x."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"report is not valid JSON ({exc})") from None
    try:
        am = payload["active_matrix"]
        intensity_axis = tuple(
            (p["label"], to_fraction(p["g_per_kwh"])) for p in am["intensity_axis"]
        )
        pue_axis = tuple((p["label"], to_fraction(p["value"])) for p in am["pue_axis"])
        active = ActiveMatrix(
            intensity_axis=intensity_axis,
            pue_axis=pue_axis,
            base={label: CarbonQuantity.from_kg(v) for label, v in am["base_kg"].items()},
            cells={
                (ilabel, plabel): CarbonQuantity.from_kg(am["cells_kg"][ilabel][plabel])
                for ilabel, _ in intensity_axis
                for plabel, _ in pue_axis
            },
        )
        em = payload["embodied_matrix"]
        estimate_axis = tuple((p["label"], to_fraction(p["kg"])) for p in em["estimate_axis"])
        lifespan_axis = tuple(
            (p["label"], to_fraction(p["years"])) for p in em["lifespan_axis"]
        )
        embodied = EmbodiedMatrix(
            estimate_axis=estimate_axis,
            lifespan_axis=lifespan_axis,
            period=SnapshotPeriod(
                parse_utc(em["period"]["start"]), parse_utc(em["period"]["end"])
            ),
            node_count=int(em["node_count"]),
            days_per_year=to_fraction(em["days_per_year"]),
            cells={
                (elabel, llabel): CarbonQuantity.from_kg(em["cells_kg"][elabel][llabel])
                for elabel, _ in estimate_axis
                for llabel, _ in lifespan_axis
            },
            per_node_day={
                (elabel, llabel): CarbonQuantity.from_kg(
                    em["per_node_day_kg"][elabel][llabel]
                )
                for elabel, _ in estimate_axis
                for llabel, _ in lifespan_axis
            },
        )
        totals = TotalsRange(
            min=CarbonQuantity.from_kg(payload["totals"]["min_kg"]),
            max=CarbonQuantity.from_kg(payload["totals"]["max_kg"]),
        )
        equivalents = tuple(
            EquivalentComparison(
                factor=EquivalentFactor(
                    name=e["name"], unit=e["unit"], kg_per_unit=to_fraction(e["kg_per_unit"])
                ),
                min_units=to_fraction(e["min_units"]),
                max_units=to_fraction(e["max_units"]),
            )
            for e in payload["equivalents"]
        )
        return ScenarioReport(
            base_energy=EnergyQuantity(payload["base_energy_kwh"]),
            active=active,
            embodied=embodied,
            totals=totals,
            equivalents=equivalents,
            provenance=payload.get("provenance", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed report payload: {exc!r}") from None


# --- Markdown rendering ------------------------------------------------------

def _md_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return lines


def render_markdown(report: ScenarioReport, *, truncate_embodied: bool = False) -> str:
    """Human-readable tables; integer kg for matrix cells.

    ``truncate_embodied`` switches the embodied tables from half-up
    rounding to truncation, for comparison against sources that truncate.
    """
    active = report.active
    embodied = report.embodied
    hours = embodied.period.duration_hours
    lines: list[str] = ["# Carbon snapshot report", ""]
    lines.append(
        f"Base active energy: {format_exact(report.base_energy.kwh)} kWh over "
        f"{format_exact(hours)} h."
    )
    lines.append("")

    lines.append("## Active carbon estimates (kgCO2e)")
    lines.append("")
    ilabels = [label for label, _ in active.intensity_axis]
    header = ["Metric"] + ilabels
    rows = [
        ["Active energy carbon"]
        + [format_kg(active.base[ilabel]) for ilabel in ilabels]
    ]
    for plabel, pvalue in active.pue_axis:
        rows.append(
            [f"Including facilities at PUE {format_exact(pvalue)} ({plabel})"]
            + [format_kg(active.cells[(ilabel, plabel)]) for ilabel in ilabels]
        )
    lines.extend(_md_table(header, rows))
    lines.append("")

    lines.append("## Embodied carbon estimates (kgCO2e)")
    lines.append("")
    lines.append(
        f"Fleet of {embodied.node_count} servers; "
        f"{format_exact(embodied.days_per_year)} days/year amortization."
    )
    lines.append("")
    elabels = [label for label, _ in embodied.estimate_axis]
    header = (
        ["Lifespan (years)"]
        + [f"Per server-day, estimate {e}" for e in elabels]
        + [f"Snapshot, estimate {e}" for e in elabels]
    )
    rows = []
    for llabel, _ in embodied.lifespan_axis:
        row = [llabel]
        for elabel in elabels:
            row.append(
                format_kg(
                    embodied.per_node_day[(elabel, llabel)], 2, truncate=truncate_embodied
                )
            )
        for elabel in elabels:
            row.append(
                format_kg(embodied.cells[(elabel, llabel)], truncate=truncate_embodied)
            )
        rows.append(row)
    lines.extend(_md_table(header, rows))
    lines.append("")

    lines.append("## Totals")
    lines.append("")
    lines.append(
        f"Total carbon-equivalent impact for the snapshot: between "
        f"{format_kg(report.totals.min)} and {format_kg(report.totals.max)} kgCO2e."
    )
    for c in report.equivalents:
        lines.append(
            f"Equivalent {c.factor.name}: {format_exact(round_units(c.min_units))} to "
            f"{format_exact(round_units(c.max_units))} {c.factor.unit} "
            f"(at {format_exact(c.factor.kg_per_unit)} kg per unit)."
        )
    lines.append("")
    return "\n".join(lines)


def round_units(value: Fraction) -> Fraction:
    """One decimal place is plenty for prose equivalents."""
    return round_fraction(value, 1)

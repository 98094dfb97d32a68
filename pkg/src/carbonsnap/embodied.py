"""Embodied carbon amortization.

Manufacturing, delivery, installation and decommissioning emissions are
a fixed per-node cost; this module spreads them linearly over hardware
lifespan and attributes the slice belonging to a snapshot period.
Arithmetic is exact: amortizing over a full lifespan returns exactly the
fixed cost, never a rounding residue.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

from .errors import ParseError, ValidationError
from .model import Inventory, NodeGroup, NodeRole, Site
from .quantities import (
    CarbonQuantity,
    Numberish,
    SnapshotPeriod,
    to_fraction,
)

DEFAULT_DAYS_PER_YEAR = Fraction(36525, 100)


class AmortizationRule(enum.Enum):
    LINEAR_BY_TIME = "linear-by-time"


@dataclass(frozen=True)
class AmortizationPolicy:
    """How fixed embodied carbon maps onto a time period.

    365.25 days/year keeps multi-year lifespans leap-consistent and is
    configurable for callers that account in 365-day years.
    """

    rule: AmortizationRule = AmortizationRule.LINEAR_BY_TIME
    days_per_year: Numberish = DEFAULT_DAYS_PER_YEAR

    def __post_init__(self):
        days = to_fraction(self.days_per_year)
        if days <= 0:
            raise ValidationError(f"days_per_year must be positive, got {days}")
        object.__setattr__(self, "days_per_year", days)


@dataclass(frozen=True)
class EmbodiedEstimate:
    """A labelled per-node embodied carbon figure in kgCO2e."""

    per_node_kg: Numberish
    label: str = ""

    def __post_init__(self):
        kg = to_fraction(self.per_node_kg)
        if kg < 0:
            raise ValidationError(f"embodied estimate must be non-negative, got {kg}")
        object.__setattr__(self, "per_node_kg", kg)


def amortize_per_day(
    estimate: EmbodiedEstimate,
    lifespan_years: Numberish,
    policy: AmortizationPolicy = AmortizationPolicy(),
) -> CarbonQuantity:
    """Embodied carbon attributable to one node for one day, unrounded."""
    lifespan = to_fraction(lifespan_years)
    if lifespan <= 0:
        raise ValidationError(f"lifespan must be positive, got {lifespan} years")
    grams = estimate.per_node_kg * 1000 / (lifespan * policy.days_per_year)
    return CarbonQuantity(grams)


def period_embodied(
    estimate: EmbodiedEstimate,
    lifespan_years: Numberish,
    period: SnapshotPeriod,
    node_count: int,
    policy: AmortizationPolicy = AmortizationPolicy(),
) -> CarbonQuantity:
    """Embodied carbon attributed to ``node_count`` nodes for the period."""
    if not isinstance(node_count, int) or node_count < 1:
        raise ValidationError(f"node_count must be a positive integer, got {node_count!r}")
    lifespan = to_fraction(lifespan_years)
    per_day = amortize_per_day(estimate, lifespan, policy)
    period_days = period.duration_days
    if period_days > lifespan * policy.days_per_year:
        raise ValidationError(
            f"period of {float(period_days):.2f} days exceeds the {lifespan}-year "
            f"lifespan; cannot attribute more than the total embodied cost"
        )
    return CarbonQuantity(per_day.grams * period_days * node_count)


def fleet_embodied(
    inventory: Inventory,
    period: SnapshotPeriod,
    policy: AmortizationPolicy = AmortizationPolicy(),
) -> CarbonQuantity:
    """Sum of period_embodied over every node group in the inventory."""
    total = CarbonQuantity.ZERO
    for site, group in inventory.node_groups():
        if group.embodied_kg_per_node is None or group.lifespan_years is None:
            raise ValidationError(
                f"node group {site.name}/{group.name} lacks embodied_kg_per_node "
                f"or lifespan_years; cannot amortize"
            )
        contribution = period_embodied(
            EmbodiedEstimate(group.embodied_kg_per_node, label=group.name),
            group.lifespan_years,
            period,
            group.count,
            policy,
        )
        total = total + contribution
    return total


# --- inventory file ----------------------------------------------------------

def parse_inventory(payload: dict, *, path: str | None = None) -> Inventory:
    """Build an Inventory from the JSON shape
    ``{"sites": [{"name", "node_groups": [...]}]}``."""

    def fail(msg: str):
        raise ParseError(msg, path=path)

    if not isinstance(payload, dict) or not isinstance(payload.get("sites"), list):
        fail("inventory must be an object with a 'sites' list")
    sites = []
    for site_entry in payload["sites"]:
        if not isinstance(site_entry, dict) or "name" not in site_entry:
            fail(f"site entry lacks a name: {site_entry!r}")
        groups = []
        for group_entry in site_entry.get("node_groups", []):
            try:
                groups.append(
                    NodeGroup(
                        name=group_entry["name"],
                        role=NodeRole.parse(group_entry["role"]),
                        count=group_entry["count"],
                        embodied_kg_per_node=group_entry.get("embodied_kg_per_node"),
                        lifespan_years=group_entry.get("lifespan_years"),
                    )
                )
            except (KeyError, TypeError) as exc:
                fail(f"site {site_entry['name']!r}: malformed node group ({exc!r})")
            except ValidationError as exc:
                fail(f"site {site_entry['name']!r}: {exc}")
        try:
            sites.append(
                Site(
                    name=site_entry["name"],
                    node_groups=tuple(groups),
                    facility_embodied_kg=site_entry.get("facility_embodied_kg"),
                )
            )
        except ValidationError as exc:
            fail(str(exc))
    try:
        return Inventory(sites=tuple(sites))
    except ValidationError as exc:
        fail(str(exc))


def load_inventory(path: str | Path) -> Inventory:
    text = Path(path).read_text()
    try:
        payload = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON ({exc})", path=str(path)) from None
    return parse_inventory(payload, path=str(path))

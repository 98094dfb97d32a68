"""Core carbon model: inventory types and the accounting equations.

Every operation here is a pure function over immutable values; results
are exact (see :mod:`carbonsnap.quantities`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Optional, Union

from .errors import ValidationError
from .quantities import (
    CarbonIntensity,
    CarbonQuantity,
    EnergyQuantity,
    Numberish,
    PueFactor,
    to_fraction,
)


class NodeRole(enum.Enum):
    COMPUTE = "compute"
    STORAGE = "storage"
    LOGIN = "login"
    SERVICE = "service"
    NETWORK = "network"

    @classmethod
    def parse(cls, text: str) -> "NodeRole":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(r.value for r in cls)
            raise ValidationError(f"unknown node role {text!r}; expected one of: {valid}") from None


@dataclass(frozen=True)
class NodeGroup:
    """A homogeneous set of nodes at one site.

    ``embodied_kg_per_node`` is the all-in manufacturing, delivery,
    installation and decommissioning mass; it may be omitted for groups
    that only participate in active-energy accounting.
    ``in_service_date`` is metadata only: linear amortization does not
    depend on elapsed life.
    """

    name: str
    role: NodeRole
    count: int
    embodied_kg_per_node: Optional[Numberish] = None
    lifespan_years: Optional[Numberish] = None
    in_service_date: Optional[date] = None

    def __post_init__(self):
        if not self.name:
            raise ValidationError("node group name must be non-empty")
        if not isinstance(self.count, int) or self.count < 1:
            raise ValidationError(
                f"node group {self.name!r}: count must be a positive integer, got {self.count!r}"
            )
        if self.embodied_kg_per_node is not None:
            embodied = to_fraction(self.embodied_kg_per_node)
            if embodied < 0:
                raise ValidationError(
                    f"node group {self.name!r}: embodied_kg_per_node must be non-negative"
                )
            object.__setattr__(self, "embodied_kg_per_node", embodied)
        if self.lifespan_years is not None:
            lifespan = to_fraction(self.lifespan_years)
            if lifespan <= 0:
                raise ValidationError(
                    f"node group {self.name!r}: lifespan_years must be positive"
                )
            object.__setattr__(self, "lifespan_years", lifespan)


@dataclass(frozen=True)
class Site:
    """One facility contributing node groups to the snapshot.

    ``facility_embodied_kg`` (buildings, cooling plant, power train) is
    accepted for forward compatibility but no computation consumes it.
    """

    name: str
    node_groups: tuple[NodeGroup, ...] = ()
    facility_embodied_kg: Optional[Numberish] = None

    def __post_init__(self):
        if not self.name:
            raise ValidationError("site name must be non-empty")
        object.__setattr__(self, "node_groups", tuple(self.node_groups))
        names = [g.name for g in self.node_groups]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"site {self.name!r}: duplicate node group names {dupes}")
        if self.facility_embodied_kg is not None:
            object.__setattr__(
                self, "facility_embodied_kg", to_fraction(self.facility_embodied_kg)
            )


@dataclass(frozen=True)
class Inventory:
    sites: tuple[Site, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        names = [s.name for s in self.sites]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValidationError(f"duplicate site names {dupes}")

    def total_node_count(self) -> int:
        return sum(g.count for s in self.sites for g in s.node_groups)

    def node_groups(self) -> Iterable[tuple[Site, NodeGroup]]:
        for site in self.sites:
            for group in site.node_groups:
                yield site, group


class ActiveComponent(enum.Enum):
    """The three buckets active carbon decomposes into."""

    NODES = "nodes"
    NETWORK = "network"
    FACILITIES = "facilities"

    @classmethod
    def parse(cls, tag: Union[str, "ActiveComponent"]) -> "ActiveComponent":
        if isinstance(tag, ActiveComponent):
            return tag
        try:
            return cls(str(tag).strip().lower())
        except ValueError:
            valid = ", ".join(c.value for c in cls)
            raise ValidationError(
                f"unknown active component {tag!r}; expected one of: {valid}"
            ) from None


@dataclass(frozen=True)
class ActiveBreakdown:
    """Active carbon split by component; total() is the exact field sum."""

    nodes: CarbonQuantity = field(default_factory=lambda: CarbonQuantity.ZERO)
    network: CarbonQuantity = field(default_factory=lambda: CarbonQuantity.ZERO)
    facilities: CarbonQuantity = field(default_factory=lambda: CarbonQuantity.ZERO)

    def total(self) -> CarbonQuantity:
        return self.nodes + self.network + self.facilities


def active_carbon(energy: EnergyQuantity, intensity: CarbonIntensity) -> CarbonQuantity:
    """Convert energy to carbon through the intensity factor, exactly."""
    return CarbonQuantity(energy.kwh * intensity.grams_per_kwh)


def apply_pue(it_carbon: CarbonQuantity, pue: PueFactor) -> CarbonQuantity:
    """Gross up IT carbon by the facility overhead factor."""
    return CarbonQuantity(it_carbon.grams * pue.value)


def facilities_overhead(it_carbon: CarbonQuantity, pue: PueFactor) -> CarbonQuantity:
    """The facilities share implied by a PUE: it_carbon x (pue - 1)."""
    return CarbonQuantity(it_carbon.grams * (pue.value - 1))


def aggregate_active(
    parts: Iterable[tuple[Union[str, ActiveComponent], CarbonQuantity]],
) -> ActiveBreakdown:
    """Sum tagged carbon contributions; absent tags contribute zero."""
    sums = {component: CarbonQuantity.ZERO for component in ActiveComponent}
    for tag, carbon in parts:
        component = ActiveComponent.parse(tag)
        sums[component] = sums[component] + carbon
    return ActiveBreakdown(
        nodes=sums[ActiveComponent.NODES],
        network=sums[ActiveComponent.NETWORK],
        facilities=sums[ActiveComponent.FACILITIES],
    )


def total_carbon(active: CarbonQuantity, embodied: CarbonQuantity) -> CarbonQuantity:
    """Total impact for the period: active plus amortized embodied."""
    return active + embodied

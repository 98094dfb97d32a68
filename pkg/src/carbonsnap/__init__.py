"""carbonsnap: carbon accounting for data-centre snapshot periods."""

__version__ = "0.1.0"

from .embodied import (
    AmortizationPolicy,
    AmortizationRule,
    EmbodiedEstimate,
    amortize_per_day,
    fleet_embodied,
    load_inventory,
    period_embodied,
)
from .errors import (
    CarbonSnapError,
    ConfigError,
    CoverageGapError,
    FetchError,
    ParseError,
    ValidationError,
)
from .intensity import (
    IntensityPeriod,
    IntensitySeries,
    ScenarioRegistry,
    fetch_intensity,
    load_series,
    scenario,
    time_weighted_carbon,
)
from .model import (
    ActiveBreakdown,
    ActiveComponent,
    Inventory,
    NodeGroup,
    NodeRole,
    Site,
    active_carbon,
    aggregate_active,
    apply_pue,
    facilities_overhead,
    total_carbon,
)
from .quantities import (
    CarbonIntensity,
    CarbonQuantity,
    EnergyQuantity,
    PueFactor,
    SnapshotPeriod,
    parse_utc,
)
from .report import (
    ScenarioAxis,
    ScenarioReport,
    build_active_matrix,
    build_embodied_matrix,
    build_report,
    flight_equivalent,
    parse_report,
    passenger_journey_range,
    render_json,
    render_markdown,
)
from .telemetry import (
    EnergyMeasurement,
    MeasurementComponent,
    MeasurementSource,
    PowerSampleSeries,
    ReconciliationReport,
    integrate_power,
    parse_measurements,
    parse_samples,
    reconcile,
    snapshot_energy,
    summarize_measurements,
)

"""Exact scalar quantities and the snapshot time window.

All quantities hold an exact rational value (`fractions.Fraction`) built
from decimal inputs, so sums and products carry no binary-float drift and
order of aggregation never changes a result. Division (amortization,
ratios) stays exact too, which fixed-precision decimals cannot guarantee.
Rounding happens only in the presentation helpers at the bottom of this
module.

Floats are accepted for convenience and are interpreted through their
shortest decimal repr (``str(x)``), i.e. ``1.1`` means exactly 11/10.
Pass strings or Decimals when the input leaves your hands (files, APIs).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from fractions import Fraction
from typing import Union

from .errors import ValidationError

Numberish = Union[Fraction, Decimal, int, str, float]

GRAMS_PER_KG = Fraction(1000)
HOURS_PER_DAY = Fraction(24)


def to_fraction(value: Numberish) -> Fraction:
    """Convert a decimal-flavoured value to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        value = str(value)
    if isinstance(value, str):
        try:
            value = Decimal(value)
        except InvalidOperation:
            raise ValidationError(f"not a decimal number: {value!r}") from None
    if isinstance(value, Decimal):
        if not value.is_finite():
            raise ValidationError(f"not a finite number: {value}")
        return Fraction(value)
    raise ValidationError(f"cannot interpret {type(value).__name__} as a number")


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 timestamp that carries an explicit UTC offset.

    Naive timestamps are rejected rather than guessed; anything with an
    offset is normalised to UTC.
    """
    raw = text.strip()
    candidate = raw[:-1] + "+00:00" if raw.endswith(("Z", "z")) else raw
    try:
        stamp = datetime.fromisoformat(candidate)
    except ValueError:
        raise ValidationError(f"not an ISO-8601 timestamp: {text!r}") from None
    if stamp.tzinfo is None:
        raise ValidationError(
            f"timestamp {text!r} has no UTC offset; local times are not accepted"
        )
    return stamp.astimezone(timezone.utc)


def _ensure_utc(stamp: datetime, what: str) -> datetime:
    if stamp.tzinfo is None:
        raise ValidationError(f"{what} must be timezone-aware (UTC)")
    return stamp.astimezone(timezone.utc)


def hours_between(start: datetime, end: datetime) -> Fraction:
    """Exact elapsed hours between two instants (microsecond-resolution)."""
    delta = end - start
    seconds = Fraction(delta.days * 86400 + delta.seconds) + Fraction(
        delta.microseconds, 1_000_000
    )
    return seconds / 3600


@dataclass(frozen=True)
class SnapshotPeriod:
    """A half-open evaluation window [start, end) in UTC."""

    start: datetime
    end: datetime

    def __post_init__(self):
        object.__setattr__(self, "start", _ensure_utc(self.start, "period start"))
        object.__setattr__(self, "end", _ensure_utc(self.end, "period end"))
        if self.end <= self.start:
            raise ValidationError(
                f"period end {self.end.isoformat()} must be after start "
                f"{self.start.isoformat()}"
            )

    @property
    def duration_hours(self) -> Fraction:
        return hours_between(self.start, self.end)

    @property
    def duration_days(self) -> Fraction:
        return self.duration_hours / HOURS_PER_DAY

    def isoformat(self) -> tuple[str, str]:
        return self.start.isoformat(), self.end.isoformat()

    def __str__(self) -> str:
        return f"{self.start.isoformat()}/{self.end.isoformat()}"


@dataclass(frozen=True)
class EnergyQuantity:
    """An amount of electrical energy in kWh."""

    kwh: Fraction

    def __post_init__(self):
        object.__setattr__(self, "kwh", to_fraction(self.kwh))
        if self.kwh < 0:
            raise ValidationError(f"energy must be non-negative, got {self.kwh} kWh")

    def __add__(self, other: "EnergyQuantity") -> "EnergyQuantity":
        if not isinstance(other, EnergyQuantity):
            return NotImplemented
        return EnergyQuantity(self.kwh + other.kwh)

    def __str__(self) -> str:
        return f"{format_exact(self.kwh)} kWh"


EnergyQuantity.ZERO = EnergyQuantity(Fraction(0))


@dataclass(frozen=True)
class CarbonQuantity:
    """A mass of CO2-equivalent, held unrounded in grams."""

    grams: Fraction

    def __post_init__(self):
        object.__setattr__(self, "grams", to_fraction(self.grams))
        if self.grams < 0:
            raise ValidationError(f"carbon must be non-negative, got {self.grams} g")

    @classmethod
    def from_kg(cls, kg: Numberish) -> "CarbonQuantity":
        return cls(to_fraction(kg) * GRAMS_PER_KG)

    @property
    def kilograms(self) -> Fraction:
        return self.grams / GRAMS_PER_KG

    def __add__(self, other: "CarbonQuantity") -> "CarbonQuantity":
        if not isinstance(other, CarbonQuantity):
            return NotImplemented
        return CarbonQuantity(self.grams + other.grams)

    def quantized(self, places: int = 9) -> "CarbonQuantity":
        """Round to a fixed decimal resolution in grams (half-up)."""
        return CarbonQuantity(round_fraction(self.grams, places))

    def __str__(self) -> str:
        return f"{format_exact(self.kilograms)} kg"


CarbonQuantity.ZERO = CarbonQuantity(Fraction(0))


@dataclass(frozen=True)
class CarbonIntensity:
    """Grid carbon intensity in gCO2e per kWh."""

    grams_per_kwh: Fraction

    def __post_init__(self):
        object.__setattr__(self, "grams_per_kwh", to_fraction(self.grams_per_kwh))
        if self.grams_per_kwh < 0:
            raise ValidationError(
                f"carbon intensity must be non-negative, got {self.grams_per_kwh}"
            )

    def __str__(self) -> str:
        return f"{format_exact(self.grams_per_kwh)} g/kWh"


@dataclass(frozen=True)
class PueFactor:
    """Power usage effectiveness; facilities cannot return energy, so >= 1."""

    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", to_fraction(self.value))
        if self.value < 1:
            raise ValidationError(f"PUE must be >= 1.0, got {self.value}")

    def __str__(self) -> str:
        return format_exact(self.value)


# --- presentation helpers ---------------------------------------------------

def round_fraction(value: Fraction, places: int = 0) -> Fraction:
    """Round-half-up (away from zero) at the given decimal place, exactly."""
    scale = 10**places
    sign = -1 if value < 0 else 1
    n, d = (abs(value) * scale).numerator, (abs(value) * scale).denominator
    q, r = divmod(n, d)
    if 2 * r >= d:
        q += 1
    return Fraction(sign * q, scale)


def to_decimal(value: Fraction, places: int) -> Decimal:
    """Decimal rendering of a Fraction at fixed places, round-half-up."""
    rounded = round_fraction(value, places)
    return (Decimal(rounded.numerator) / Decimal(rounded.denominator)).quantize(
        Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP
    )


def format_exact(value: Fraction, max_places: int = 12) -> str:
    """Deterministic decimal string, exact up to ``max_places`` places.

    Values with a terminating expansion shorter than ``max_places`` render
    with no trailing zeros ("969000", "1065.9"); anything longer is rounded
    half-up at ``max_places``. Never uses exponent notation.
    """
    dec = to_decimal(value, max_places).normalize()
    return format(dec, "f")


def format_kg(carbon: CarbonQuantity, places: int = 0, *, truncate: bool = False) -> str:
    """Render a carbon mass in kg at the given precision.

    Default is round-half-up; ``truncate`` switches to round-toward-zero
    for compatibility with sources that truncate their printed tables.
    """
    kg = carbon.kilograms
    scale = 10**places
    if truncate:
        q = (kg * scale).numerator // (kg * scale).denominator
        value = Fraction(q, scale)
    else:
        value = round_fraction(kg, places)
    dec = (Decimal(value.numerator) / Decimal(value.denominator)).quantize(
        Decimal(1).scaleb(-places)
    )
    return format(dec, "f")

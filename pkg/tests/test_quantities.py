from datetime import timedelta, timezone, datetime
from decimal import Decimal
from fractions import Fraction

import pytest

from carbonsnap.errors import ValidationError
from carbonsnap.quantities import (
    CarbonIntensity,
    CarbonQuantity,
    EnergyQuantity,
    PueFactor,
    SnapshotPeriod,
    format_exact,
    format_kg,
    hours_between,
    parse_utc,
    round_fraction,
    to_fraction,
)

from .conftest import utc


class TestToFraction:
    def test_string_is_exact(self):
        assert to_fraction("0.1") == Fraction(1, 10)
        assert to_fraction("1065.9") == Fraction(10659, 10)

    def test_decimal_and_int(self):
        assert to_fraction(Decimal("365.25")) == Fraction(1461, 4)
        assert to_fraction(19380) == Fraction(19380)

    def test_float_uses_shortest_repr(self):
        assert to_fraction(1.1) == Fraction(11, 10)
        assert to_fraction(0.175) == Fraction(175, 1000)

    @pytest.mark.parametrize("bad", ["abc", "1e", "nan", "inf", None, object()])
    def test_rejects_garbage(self, bad):
        with pytest.raises(ValidationError):
            to_fraction(bad)


class TestParseUtc:
    def test_zulu_suffix(self):
        stamp = parse_utc("2022-11-01T00:00Z")
        assert stamp == utc(2022, 11, 1)

    def test_offset_normalised_to_utc(self):
        stamp = parse_utc("2022-11-01T01:30:00+01:00")
        assert stamp == utc(2022, 11, 1, 0, 30)
        assert stamp.tzinfo == timezone.utc

    def test_naive_rejected(self):
        with pytest.raises(ValidationError, match="no UTC offset"):
            parse_utc("2022-11-01T00:00:00")

    def test_garbage_rejected(self):
        with pytest.raises(ValidationError):
            parse_utc("yesterday")


class TestSnapshotPeriod:
    def test_duration_is_exact(self):
        period = SnapshotPeriod(utc(2022, 11, 2), utc(2022, 11, 3))
        assert period.duration_hours == Fraction(24)
        assert period.duration_days == Fraction(1)

    def test_sub_second_resolution(self):
        start = utc(2022, 1, 1)
        period = SnapshotPeriod(start, start + timedelta(seconds=90, microseconds=500_000))
        assert period.duration_hours == Fraction("90.5") / 3600

    def test_end_must_follow_start(self):
        with pytest.raises(ValidationError):
            SnapshotPeriod(utc(2022, 1, 2), utc(2022, 1, 1))
        with pytest.raises(ValidationError):
            SnapshotPeriod(utc(2022, 1, 1), utc(2022, 1, 1))

    def test_naive_endpoints_rejected(self):
        with pytest.raises(ValidationError):
            SnapshotPeriod(datetime(2022, 1, 1), utc(2022, 1, 2))


class TestEnergyQuantity:
    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            EnergyQuantity("-1")

    def test_milli_kwh_addition_is_exact(self):
        total = EnergyQuantity("0.001")
        for _ in range(999):
            total = total + EnergyQuantity("0.001")
        assert total.kwh == Fraction(1)

    def test_addition_order_independent(self):
        values = ["1299", "261", "8154", "3831", "4271", "944"]
        forward = sum((EnergyQuantity(v) for v in values), EnergyQuantity.ZERO)
        backward = sum((EnergyQuantity(v) for v in reversed(values)), EnergyQuantity.ZERO)
        assert forward == backward
        assert forward.kwh == Fraction(18760)


class TestCarbonQuantity:
    def test_kg_round_trip(self):
        carbon = CarbonQuantity.from_kg("1065.9")
        assert carbon.grams == Fraction(1_065_900)
        assert carbon.kilograms == Fraction("1065.9")

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            CarbonQuantity(-1)

    def test_quantized(self):
        carbon = CarbonQuantity(Fraction(1, 3))
        assert carbon.quantized(9).grams == Fraction(333333333, 10**9)


class TestScalars:
    def test_intensity_non_negative(self):
        assert CarbonIntensity("50").grams_per_kwh == 50
        with pytest.raises(ValidationError):
            CarbonIntensity("-5")

    def test_pue_floor(self):
        assert PueFactor("1.0").value == 1
        with pytest.raises(ValidationError):
            PueFactor("0.99")


class TestRounding:
    def test_half_up_at_integer(self):
        assert round_fraction(Fraction("0.5")) == 1
        assert round_fraction(Fraction("1.5")) == 2
        assert round_fraction(Fraction("2.5")) == 3
        assert round_fraction(Fraction("2.4999")) == 2

    def test_half_up_away_from_zero(self):
        assert round_fraction(Fraction("-0.5")) == -1

    def test_places(self):
        assert round_fraction(Fraction("0.365"), 2) == Fraction("0.37")
        assert round_fraction(Fraction("0.364"), 2) == Fraction("0.36")

    def test_format_exact_no_exponent(self):
        assert format_exact(Fraction(969000)) == "969000"
        assert format_exact(Fraction("1065.9")) == "1065.9"
        assert format_exact(Fraction(1, 3)) == "0.333333333333"

    def test_format_kg_modes(self):
        snapshot = CarbonQuantity.from_kg("1806.9815")
        assert format_kg(snapshot) == "1807"
        assert format_kg(snapshot, truncate=True) == "1806"
        per_day = CarbonQuantity.from_kg("0.602327")
        assert format_kg(per_day, 2) == "0.60"


def test_hours_between_microseconds():
    start = utc(2022, 1, 1)
    assert hours_between(start, start + timedelta(microseconds=1)) == Fraction(
        1, 3_600_000_000
    )

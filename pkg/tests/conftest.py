from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def utc(year, month, day, hour=0, minute=0, second=0, microsecond=0):
    return datetime(year, month, day, hour, minute, second, microsecond, tzinfo=timezone.utc)


SNAP_START = utc(2022, 11, 2)
SNAP_END = utc(2022, 11, 3)


@pytest.fixture
def snapshot_period():
    from carbonsnap.quantities import SnapshotPeriod

    return SnapshotPeriod(SNAP_START, SNAP_END)


@pytest.fixture
def measurements_text():
    return (FIXTURES / "measurements_snapshot.csv").read_text()


@pytest.fixture
def inventory_path():
    return FIXTURES / "inventory.json"


def period_of(start, *, hours=0, seconds=0, microseconds=0):
    from carbonsnap.quantities import SnapshotPeriod

    return SnapshotPeriod(
        start, start + timedelta(hours=hours, seconds=seconds, microseconds=microseconds)
    )

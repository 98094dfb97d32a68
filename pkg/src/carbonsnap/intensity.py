"""Carbon intensity sources: named scenarios, settlement-period series,
and a client for the national half-hourly intensity API.

The API client is deliberately boring: chunked idempotent GETs with
bounded retries, and every successful chunk cached on disk keyed by
(endpoint, date range) so a snapshot can be recomputed offline and
byte-identically later.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import timedelta
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence

import requests

from .errors import CoverageGapError, FetchError, ParseError, ValidationError
from .quantities import (
    CarbonIntensity,
    CarbonQuantity,
    EnergyQuantity,
    SnapshotPeriod,
    format_exact,
    hours_between,
    parse_utc,
)

RETRY_DELAYS_SECONDS = (1, 2, 4)
MAX_DAYS_PER_REQUEST = 31
DEFAULT_MAX_IN_FLIGHT = 4
DEFAULT_TIMEOUT_SECONDS = 30


# --- named scalar scenarios --------------------------------------------------

_BUILTIN_SCENARIOS = {
    "Low": CarbonIntensity(50),
    "Medium": CarbonIntensity(175),
    "High": CarbonIntensity(300),
}


class ScenarioRegistry:
    """Named intensity scenarios; lookups are case-insensitive.

    The built-in Low/Medium/High grid-mix reference points cannot be
    shadowed; anything else may be registered or re-registered.
    """

    def __init__(self):
        self._builtin = {name.lower(): (name, value) for name, value in _BUILTIN_SCENARIOS.items()}
        self._user: dict[str, tuple[str, CarbonIntensity]] = {}

    def register(self, name: str, intensity: CarbonIntensity) -> None:
        key = name.strip().lower()
        if not key:
            raise ValidationError("scenario name must be non-empty")
        if key in self._builtin:
            raise ValidationError(f"cannot shadow built-in scenario {self._builtin[key][0]!r}")
        self._user[key] = (name.strip(), intensity)

    def names(self) -> list[str]:
        return [name for name, _ in self._builtin.values()] + sorted(
            name for name, _ in self._user.values()
        )

    def scenario(self, name: str) -> CarbonIntensity:
        key = name.strip().lower()
        entry = self._builtin.get(key) or self._user.get(key)
        if entry is None:
            raise ValidationError(
                f"unknown intensity scenario {name!r}; registered: {', '.join(self.names())}"
            )
        return entry[1]


default_registry = ScenarioRegistry()


def scenario(name: str, registry: Optional[ScenarioRegistry] = None) -> CarbonIntensity:
    return (registry or default_registry).scenario(name)


# --- settlement-period series ------------------------------------------------

@dataclass(frozen=True)
class IntensityPeriod:
    """One settlement period; the effective value prefers actual over forecast."""

    period: SnapshotPeriod
    actual: Optional[CarbonIntensity] = None
    forecast: Optional[CarbonIntensity] = None

    def __post_init__(self):
        if self.actual is None and self.forecast is None:
            raise ValidationError(
                f"period {self.period} has neither an actual nor a forecast intensity"
            )

    @property
    def effective(self) -> CarbonIntensity:
        return self.actual if self.actual is not None else self.forecast

    @property
    def source_field(self) -> str:
        return "actual" if self.actual is not None else "forecast"


@dataclass(frozen=True)
class IntensitySeries:
    """Time-ordered, non-overlapping intensity periods; gaps are allowed."""

    periods: tuple[IntensityPeriod, ...] = ()

    def __post_init__(self):
        periods = tuple(self.periods)
        object.__setattr__(self, "periods", periods)
        for previous, current in zip(periods, periods[1:]):
            if current.period.start < previous.period.end:
                raise ValidationError(
                    f"intensity periods overlap: {previous.period} and {current.period}"
                )

    def __len__(self) -> int:
        return len(self.periods)


def time_weighted_carbon(
    profile: Sequence[tuple[SnapshotPeriod, EnergyQuantity]],
    series: IntensitySeries,
) -> CarbonQuantity:
    """Carbon for an energy profile against a varying intensity series.

    Energy within each profile entry is assumed uniform in time, so an
    entry spanning several settlement periods is split pro-rata by
    hours. Every profile instant must be covered by the series.
    """
    total = Fraction(0)
    for period, energy in profile:
        duration = period.duration_hours
        cursor = period.start
        for entry in series.periods:
            if entry.period.end <= cursor:
                continue
            if entry.period.start >= period.end:
                break
            if entry.period.start > cursor:
                raise CoverageGapError(
                    f"no intensity data between {cursor.isoformat()} and "
                    f"{min(entry.period.start, period.end).isoformat()}"
                )
            slice_end = min(entry.period.end, period.end)
            share = hours_between(cursor, slice_end) / duration
            total += energy.kwh * share * entry.effective.grams_per_kwh
            cursor = slice_end
            if cursor >= period.end:
                break
        if cursor < period.end:
            raise CoverageGapError(
                f"no intensity data between {cursor.isoformat()} and "
                f"{period.end.isoformat()}"
            )
    return CarbonQuantity(total)


def series_stats(series: IntensitySeries) -> tuple[Fraction, Fraction, Fraction]:
    """(min, duration-weighted mean, max) of the effective intensities."""
    if not series.periods:
        raise ValidationError("cannot compute stats of an empty series")
    values = [p.effective.grams_per_kwh for p in series.periods]
    weighted = sum(
        p.effective.grams_per_kwh * p.period.duration_hours for p in series.periods
    )
    hours = sum(p.period.duration_hours for p in series.periods)
    return min(values), weighted / hours, max(values)


# --- payload parsing and the on-disk format ----------------------------------

def _excerpt(payload) -> str:
    text = payload if isinstance(payload, str) else json.dumps(payload, default=str)
    return text[:200]


def parse_series_payload(payload: dict) -> IntensitySeries:
    """Parse the national API JSON shape into a series.

    Shape: ``{"data": [{"from", "to", "intensity": {"forecast", "actual"}}]}``.
    The actual value is used when present, otherwise forecast.
    """
    if not isinstance(payload, dict) or not isinstance(payload.get("data"), list):
        raise ParseError(
            f"intensity payload must be an object with a 'data' list; got: {_excerpt(payload)}"
        )
    periods = []
    for entry in payload["data"]:
        try:
            window = SnapshotPeriod(parse_utc(entry["from"]), parse_utc(entry["to"]))
            block = entry["intensity"]
            actual = block.get("actual")
            forecast = block.get("forecast")
        except (KeyError, TypeError, ValidationError) as exc:
            raise ParseError(
                f"malformed intensity entry ({exc}): {_excerpt(entry)}"
            ) from None
        if actual is None and forecast is None:
            raise ParseError(f"intensity entry has neither actual nor forecast: {_excerpt(entry)}")
        try:
            periods.append(
                IntensityPeriod(
                    period=window,
                    actual=None if actual is None else CarbonIntensity(actual),
                    forecast=None if forecast is None else CarbonIntensity(forecast),
                )
            )
        except ValidationError as exc:
            raise ParseError(f"bad intensity value ({exc}): {_excerpt(entry)}") from None
    periods.sort(key=lambda p: p.period.start)
    return IntensitySeries(tuple(periods))


def _compact_utc(stamp) -> str:
    return stamp.isoformat().replace("+00:00", "Z")


def series_to_payload(series: IntensitySeries) -> dict:
    """Serialize back to the exact API/on-disk shape."""
    data = []
    for p in series.periods:
        data.append(
            {
                "from": _compact_utc(p.period.start),
                "to": _compact_utc(p.period.end),
                "intensity": {
                    "actual": None if p.actual is None else format_exact(p.actual.grams_per_kwh),
                    "forecast": None
                    if p.forecast is None
                    else format_exact(p.forecast.grams_per_kwh),
                },
            }
        )
    return {"data": data}


def series_to_csv(series: IntensitySeries) -> str:
    """Flat CSV of effective intensities, handy for external plotting."""
    lines = ["from,to,intensity_g_per_kwh,source"]
    for p in series.periods:
        lines.append(
            f"{_compact_utc(p.period.start)},{_compact_utc(p.period.end)},"
            f"{format_exact(p.effective.grams_per_kwh)},{p.source_field}"
        )
    return "\n".join(lines) + "\n"


def load_series(path: str | Path) -> IntensitySeries:
    text = Path(path).read_text()
    try:
        payload = json.loads(text, parse_float=lambda s: s)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from None
    return parse_series_payload(payload)


# --- remote fetch ------------------------------------------------------------

def _chunk_ranges(window: SnapshotPeriod, max_days: int) -> list[SnapshotPeriod]:
    chunks = []
    cursor = window.start
    step = timedelta(days=max_days)
    while cursor < window.end:
        chunk_end = min(cursor + step, window.end)
        chunks.append(SnapshotPeriod(cursor, chunk_end))
        cursor = chunk_end
    return chunks


def _cache_path(cache_dir: Path, endpoint: str, chunk: SnapshotPeriod) -> Path:
    key = f"{endpoint}|{chunk.start.isoformat()}|{chunk.end.isoformat()}"
    return cache_dir / (hashlib.sha256(key.encode()).hexdigest() + ".json")


def _get_with_retries(
    url: str,
    session,
    timeout: float,
    sleep: Callable[[float], None],
) -> str:
    last_error: Exception | None = None
    delays = (None,) + RETRY_DELAYS_SECONDS
    for delay in delays:
        if delay is not None:
            sleep(delay)
        try:
            response = session.get(url, timeout=timeout, headers={"Accept": "application/json"})
        except requests.RequestException as exc:
            last_error = exc
            continue
        if response.status_code >= 500:
            last_error = FetchError(f"GET {url} -> HTTP {response.status_code}")
            continue
        if response.status_code != 200:
            raise FetchError(f"GET {url} -> HTTP {response.status_code}")
        return response.text
    raise FetchError(f"GET {url} failed after {len(delays)} attempts: {last_error}")


def fetch_intensity(
    window: SnapshotPeriod,
    endpoint: str,
    *,
    cache_dir: str | Path | None = None,
    session=None,
    max_days_per_request: int = MAX_DAYS_PER_REQUEST,
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    timeout: float = DEFAULT_TIMEOUT_SECONDS,
    sleep: Callable[[float], None] = time.sleep,
) -> IntensitySeries:
    """Fetch the intensity series covering ``window`` from the API.

    Long ranges are split into chunks of at most ``max_days_per_request``
    days, fetched with at most ``max_in_flight`` concurrent requests.
    Each request is retried up to three times (1s, 2s, 4s backoff).
    Parsed chunks are cached under ``cache_dir`` so later runs are
    offline-reproducible.
    """
    if session is None:
        session = requests.Session()
    cache = Path(cache_dir) if cache_dir is not None else None
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
    base = endpoint.rstrip("/")
    chunks = _chunk_ranges(window, max_days_per_request)

    def fetch_chunk(chunk: SnapshotPeriod) -> IntensitySeries:
        cache_file = _cache_path(cache, base, chunk) if cache is not None else None
        if cache_file is not None and cache_file.exists():
            text = cache_file.read_text()
        else:
            url = f"{base}/intensity/{_compact_utc(chunk.start)}/{_compact_utc(chunk.end)}"
            text = _get_with_retries(url, session, timeout, sleep)
        try:
            payload = json.loads(text, parse_float=lambda s: s)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON from intensity API ({exc}): {text[:200]}") from None
        series = parse_series_payload(payload)
        if cache_file is not None and not cache_file.exists():
            cache_file.write_text(text)
        return series

    if len(chunks) == 1:
        parts = [fetch_chunk(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            parts = list(pool.map(fetch_chunk, chunks))

    merged: dict[tuple, IntensityPeriod] = {}
    for part in parts:
        for p in part.periods:
            merged.setdefault((p.period.start, p.period.end), p)
    ordered = sorted(merged.values(), key=lambda p: p.period.start)
    return IntensitySeries(tuple(ordered))

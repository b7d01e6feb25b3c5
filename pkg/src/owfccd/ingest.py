"""Load local price and wind CSV files and cut them into market days.

CSV dialect: comma separated, mandatory header, ISO-8601 timestamps read as
UTC. Price files have columns ``timestamp,value`` ($/MWh); wind files have
``timestamp,speed`` (m/s at hub height).
"""

import json
import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PRICE_KINDS = ("DA", "RT", "ReserveUp", "ReserveDown")
CADENCE = {"DA": "1h", "RT": "15min", "ReserveUp": "15min", "ReserveDown": "15min",
           "wind": "1h"}
MAX_FILLED_GAP = 2


class IngestError(ValueError):
    pass


class CoverageGapError(IngestError):
    def __init__(self, message, missing):
        super().__init__(message)
        self.missing = list(missing)


@dataclass(frozen=True)
class PriceSeries:
    kind: str
    timestamps: pd.DatetimeIndex
    values: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class WindSeries:
    timestamps: pd.DatetimeIndex
    speeds: np.ndarray

    def __len__(self):
        return len(self.speeds)


@dataclass(frozen=True)
class DayData:
    date: pd.Timestamp
    da: np.ndarray          # (24,) $/MWh
    rt: np.ndarray          # (96,) $/MWh
    reserve_up: np.ndarray  # (96,) $/MW per hour
    reserve_down: np.ndarray
    wind: np.ndarray        # (24,) m/s

    @property
    def shapes(self):
        return tuple(len(a) for a in (self.da, self.rt, self.reserve_up,
                                      self.reserve_down, self.wind))


def _to_float(text):
    try:
        return float(text)
    except ValueError:
        return np.nan


def _read_table(path, value_col):
    if not os.path.exists(path):
        raise IngestError(f"{path}: file not found")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise IngestError(f"{path}: empty file, header row required") from None
    if list(df.columns) != ["timestamp", value_col]:
        raise IngestError(f"{path}: header must be 'timestamp,{value_col}', got {','.join(df.columns)}")

    # data rows start at file line 2
    stamps = pd.to_datetime(df["timestamp"], utc=True, errors="coerce", format="ISO8601")
    # Python's float() rounds correctly, so written values read back bit for bit
    values = np.array([_to_float(v) for v in df[value_col]], dtype=float)
    bad = np.flatnonzero(stamps.isna().to_numpy() | ~np.isfinite(values))
    if len(bad):
        raise IngestError(f"{path}: unparseable rows at lines {[int(i) + 2 for i in bad]}")

    idx = pd.DatetimeIndex(stamps)
    dup = idx[idx.duplicated()]
    if len(dup):
        raise IngestError(f"{path}: duplicated timestamp {dup[0].isoformat()}")
    if not idx.is_monotonic_increasing:
        pos = int(np.flatnonzero(np.diff(idx.asi8) < 0)[0]) + 1
        raise IngestError(f"{path}: timestamps not increasing at line {pos + 2} ({idx[pos].isoformat()})")
    return idx, values


def load_price_csv(path, kind):
    if kind not in PRICE_KINDS:
        raise IngestError(f"unknown price kind {kind!r}; expected one of {PRICE_KINDS}")
    idx, values = _read_table(path, "value")
    return PriceSeries(kind, idx, values)


def load_wind_csv(path):
    idx, speeds = _read_table(path, "speed")
    neg = np.flatnonzero(speeds < 0)
    if len(neg):
        raise IngestError(f"{path}: negative wind speed at lines {[int(i) + 2 for i in neg]}")
    return WindSeries(idx, speeds)


def _write_table(path, idx, values, value_col):
    with open(path, "w") as fh:
        fh.write(f"timestamp,{value_col}\n")
        for ts, v in zip(idx, values):
            fh.write(f"{ts.isoformat()},{float(v)!r}\n")


def write_price_csv(series, path):
    _write_table(path, series.timestamps, series.values, "value")


def write_wind_csv(series, path):
    _write_table(path, series.timestamps, series.speeds, "speed")


def resample(timestamps, values, cadence, start, end):
    """Mean-aggregate onto a fixed cadence over ``[start, end)``.

    Intervals without any sample come back as NaN.
    """
    s = pd.Series(values, index=timestamps)
    s = s[(s.index >= start) & (s.index < end)]
    grid = pd.date_range(start, end, freq=cadence, inclusive="left")
    out = s.resample(cadence, origin=start).mean() if len(s) else pd.Series(dtype=float)
    return out.reindex(grid)


def _fill_gaps(series, label):
    """Forward-fill runs of at most MAX_FILLED_GAP missing intervals."""
    missing = series.isna().to_numpy()
    if not missing.any():
        return series.to_numpy()
    runs, start = [], None
    for i, m in enumerate(np.append(missing, False)):
        if m and start is None:
            start = i
        elif not m and start is not None:
            runs.append((start, i))
            start = None
    if missing.all():
        raise CoverageGapError(f"{label}: no data in the day", list(series.index))
    long_runs = [(a, b) for a, b in runs if b - a > MAX_FILLED_GAP]
    if long_runs:
        gaps = [series.index[i] for a, b in long_runs for i in range(a, b)]
        raise CoverageGapError(
            f"{label}: {len(gaps)} missing intervals: {', '.join(t.isoformat() for t in gaps)}", gaps)
    logger.warning("%s: forward-filled %d missing intervals", label, int(missing.sum()))
    # a gap at the very start of the day takes the first observed value
    return series.ffill().bfill().to_numpy()


def align_day(prices, wind, date, utc_offset_hours=0.0):
    """Cut one market day out of full series.

    Parameters
    ----------
    prices : dict
        ``kind -> PriceSeries`` for all four price kinds.
    wind : WindSeries
    date : str or Timestamp
        Market day; its boundaries are midnight shifted by
        ``utc_offset_hours``.

    Returns
    -------
    DayData
        Hourly DA and wind (24), quarter-hourly RT and reserves (96).
    """
    missing_kinds = [k for k in PRICE_KINDS if k not in prices]
    if missing_kinds:
        raise IngestError(f"missing price series: {missing_kinds}")
    day = pd.Timestamp(date)
    day = day.tz_localize("UTC") if day.tzinfo is None else day.tz_convert("UTC")
    start = day.normalize() - pd.Timedelta(hours=utc_offset_hours)
    end = start + pd.Timedelta(days=1)

    cols = {}
    for kind in PRICE_KINDS:
        ser = prices[kind]
        raw = resample(ser.timestamps, ser.values, CADENCE[kind], start, end)
        cols[kind] = _fill_gaps(raw, f"{kind} {day.date()}")
    raw = resample(wind.timestamps, wind.speeds, CADENCE["wind"], start, end)
    speeds = _fill_gaps(raw, f"wind {day.date()}")
    return DayData(day.normalize(), cols["DA"], cols["RT"], cols["ReserveUp"],
                   cols["ReserveDown"], speeds)


def complete_days(prices, wind, utc_offset_hours=0.0):
    """All days covered by every series, skipping days with hard gaps."""
    first = max([s.timestamps[0] for s in prices.values()] + [wind.timestamps[0]])
    last = min([s.timestamps[-1] for s in prices.values()] + [wind.timestamps[-1]])
    out = []
    for day in pd.date_range(first.normalize(), last.normalize(), freq="D"):
        try:
            out.append(align_day(prices, wind, day, utc_offset_hours))
        except CoverageGapError as exc:
            logger.info("skipping %s: %s", day.date(), exc)
    return out


def history_array(days):
    """Stack days into an (N, 24, 14) array of hourly feature blocks.

    Channel layout per hour: DA, RT x4, reserve up x4, reserve down x4, wind.
    """
    blocks = []
    for d in days:
        blocks.append(np.column_stack([
            d.da, d.rt.reshape(-1, 4), d.reserve_up.reshape(-1, 4),
            d.reserve_down.reshape(-1, 4), d.wind]))
    return np.stack(blocks)


def load_manifest(path):
    """Read a data manifest mapping poi/kind/year to CSV paths.

    Format: ``{"entries": [{"poi": ..., "kind": ..., "year": ..., "path": ...}]}``
    with ``kind`` one of the price kinds or ``"wind"``. Relative paths are
    resolved against the manifest's directory.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if set(doc) - {"schema", "entries"}:
        raise IngestError(f"unknown manifest keys: {sorted(set(doc) - {'schema', 'entries'})}")
    base = os.path.dirname(os.path.abspath(path))
    table = {}
    for entry in doc.get("entries", []):
        if set(entry) != {"poi", "kind", "year", "path"}:
            raise IngestError(f"manifest entry needs exactly poi, kind, year, path: {entry}")
        if entry["kind"] not in PRICE_KINDS + ("wind",):
            raise IngestError(f"manifest entry has unknown kind {entry['kind']!r}")
        table[(entry["poi"], entry["kind"], int(entry["year"]))] = os.path.join(base, entry["path"])
    return table


def load_poi_year(manifest, poi, year):
    prices = {k: load_price_csv(manifest[(poi, k, year)], k) for k in PRICE_KINDS}
    wind = load_wind_csv(manifest[(poi, "wind", year)])
    return prices, wind

"""CSV parsing, river-level interpolation, and range validation.

All CSVs are UTF-8, comma-delimited, with a header row.  Timestamps are
ISO-8601 (stored internally as UTC, second precision).  Missing cells are
empty or "NA"; any other unparseable numeric cell also becomes missing but
is counted in the dataset's parse report.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DuplicateTimestampError, InputError, SchemaError

RESERVED_COLUMNS = ("timestamp", "site")


def timestamps_ns(values):
    """Timestamps as naive-UTC datetime64[ns] (tz-aware input is converted)."""
    idx = pd.DatetimeIndex(pd.to_datetime(values, utc=True))
    return idx.tz_localize(None).to_numpy()

#: Default plausibility bounds (lower exclusive, upper inclusive).
DEFAULT_BOUNDS = {
    "tss": (0.0, float("inf")),
    "nox": (0.0, float("inf")),
    "turbidity": (0.0, float("inf")),
    "conductivity": (0.0, float("inf")),
    "level": (0.0, float("inf")),
}


@dataclass(frozen=True)
class Dataset:
    """Grouped time series: one row per (site, timestamp), sorted within site.

    ``frame`` has columns ``site`` (str), ``timestamp`` (UTC datetime) and one
    float column per variable.  ``parse_report`` counts unparseable numeric
    cells per variable.
    """

    frame: pd.DataFrame
    kind: str
    parse_report: dict = field(default_factory=dict)

    @property
    def variables(self):
        return tuple(c for c in self.frame.columns if c not in RESERVED_COLUMNS)

    @property
    def sites(self):
        return tuple(sorted(self.frame["site"].unique()))

    @property
    def n_rows(self):
        return len(self.frame)

    @property
    def time_origin(self):
        return self.frame["timestamp"].min()

    def for_site(self, site):
        sub = self.frame[self.frame["site"] == site].reset_index(drop=True)
        if sub.empty:
            raise InputError(f"site '{site}' has no observations")
        return Dataset(sub, self.kind, dict(self.parse_report))

    def non_missing_count(self, variable, site=None):
        frame = self.frame if site is None else self.frame[self.frame["site"] == site]
        return int(frame[variable].notna().sum())


def make_dataset(frame, kind, parse_report=None):
    """Normalize a raw frame into a Dataset: sort, enforce key uniqueness."""
    if "timestamp" not in frame.columns or "site" not in frame.columns:
        raise SchemaError("dataset frame needs 'timestamp' and 'site' columns")
    frame = frame.copy()
    frame["timestamp"] = pd.to_datetime(frame["timestamp"], utc=True).dt.floor("s")
    frame["site"] = frame["site"].astype(str)
    order = np.lexsort(
        (timestamps_ns(frame["timestamp"]), frame["site"].to_numpy(dtype=object))
    )
    frame = frame.iloc[order].reset_index(drop=True)
    dup = frame.duplicated(subset=["site", "timestamp"])
    if dup.any():
        row = frame.loc[dup.idxmax()]
        raise DuplicateTimestampError(
            f"duplicate (site, timestamp) pair: ({row['site']}, {row['timestamp'].isoformat()})"
        )
    for col in frame.columns:
        if col not in RESERVED_COLUMNS:
            frame[col] = frame[col].astype(np.float64)
    return Dataset(frame, kind, dict(parse_report or {}))


def _to_float(cell):
    s = cell.strip() if isinstance(cell, str) else cell
    if s is None or s == "" or s == "NA":
        return np.nan, False
    try:
        return float(s), False
    except (TypeError, ValueError):
        return np.nan, True


def parse_csv(source, schema=None, kind="laboratory", default_site=None):
    """Parse a laboratory or sensor CSV into a Dataset.

    ``schema`` maps canonical names (``timestamp``, ``site``, variable names)
    to the CSV's column headers; identity mapping by default.  A file without
    a site column parses only when ``default_site`` is given.
    """
    try:
        raw = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise SchemaError(f"cannot read CSV: {exc}") from exc
    if raw.columns.size == 0:
        raise SchemaError("CSV has no header row")

    schema = dict(schema or {})
    ts_col = schema.get("timestamp", "timestamp")
    if ts_col not in raw.columns:
        raise SchemaError(f"timestamp column '{ts_col}' not found in header {list(raw.columns)}")

    site_col = schema.get("site", "site")
    if site_col in raw.columns:
        sites = raw[site_col].str.strip()
    elif default_site is not None:
        sites = pd.Series([default_site] * len(raw))
    else:
        raise SchemaError(f"site column '{site_col}' not found and no default site given")

    stamps = pd.to_datetime(raw[ts_col].str.strip(), utc=True, format="ISO8601", errors="coerce")
    if stamps.isna().any():
        bad = int(np.argmax(stamps.isna().to_numpy()))
        raise SchemaError(
            f"unparseable timestamp '{raw[ts_col].iloc[bad]}' at data row {bad + 2}"
        )

    if any(k not in ("timestamp", "site") for k in schema):
        var_cols = {k: v for k, v in schema.items() if k not in ("timestamp", "site")}
        missing = [v for v in var_cols.values() if v not in raw.columns]
        if missing:
            raise SchemaError(f"mapped column(s) not in header: {', '.join(missing)}")
    else:
        var_cols = {c: c for c in raw.columns if c not in (ts_col, site_col)}

    data = {"timestamp": stamps, "site": sites}
    report = {}
    for var, col in var_cols.items():
        parsed = np.empty(len(raw))
        bad_count = 0
        for i, cell in enumerate(raw[col].to_numpy()):
            parsed[i], bad = _to_float(cell)
            bad_count += bad
        data[var] = parsed
        if bad_count:
            report[var] = bad_count
    return make_dataset(pd.DataFrame(data), kind, report)


def write_csv(dataset, path):
    """Serialize in canonical form; re-parsing yields an identical Dataset."""
    frame = dataset.frame.copy()
    frame["timestamp"] = frame["timestamp"].dt.strftime("%Y-%m-%dT%H:%M:%SZ")
    frame.to_csv(path, index=False, na_rep="")


@dataclass(frozen=True)
class LevelSeries:
    """River level at one site, strictly increasing in time, levels > 0."""

    site: str
    times: np.ndarray  # datetime64[ns], UTC
    levels: np.ndarray

    def __post_init__(self):
        if len(self.times) == 0:
            raise InputError(f"empty level series for site '{self.site}'")
        if np.any(np.diff(self.times.astype("int64")) <= 0):
            raise InputError(f"level series for '{self.site}' is not strictly increasing in time")
        if np.any(~np.isfinite(self.levels)) or np.any(self.levels <= 0):
            raise InputError(f"level series for '{self.site}' has non-positive or missing levels")


def level_series(dataset, site, variable="level"):
    """Extract a LevelSeries for one site, dropping missing readings."""
    sub = dataset.for_site(site).frame
    if variable not in sub.columns:
        raise SchemaError(f"variable '{variable}' not in dataset")
    keep = sub[variable].notna().to_numpy()
    return LevelSeries(
        site,
        timestamps_ns(sub["timestamp"])[keep],
        sub[variable].to_numpy()[keep],
    )


def interpolate_level(series, targets):
    """Linearly interpolate the series at target instants.

    Exact timestamp matches return the stored level; targets outside the
    recorded span return NaN (no extrapolation).
    """
    targets = pd.to_datetime(pd.Series(targets), utc=True).to_numpy()
    xp = series.times.astype("int64").astype(np.float64)
    x = targets.astype("datetime64[ns]").astype("int64").astype(np.float64)
    out = np.interp(x, xp, series.levels)
    out[(x < xp[0]) | (x > xp[-1])] = np.nan
    return out


def with_interpolated_level(dataset, series_by_site, variable="level", overwrite=False):
    """Attach interpolated level readings to a dataset's timestamps.

    Fills only missing cells unless ``overwrite``; sites without a series are
    left untouched.
    """
    frame = dataset.frame.copy()
    if variable not in frame.columns:
        frame[variable] = np.nan
    for site, series in series_by_site.items():
        rows = frame["site"] == site
        if not rows.any():
            continue
        interp = interpolate_level(series, frame.loc[rows, "timestamp"])
        current = frame.loc[rows, variable].to_numpy()
        take = np.ones(len(interp), dtype=bool) if overwrite else np.isnan(current)
        current[take & ~np.isnan(interp)] = interp[take & ~np.isnan(interp)]
        frame.loc[rows, variable] = current
    return Dataset(frame, dataset.kind, dict(dataset.parse_report))


@dataclass(frozen=True)
class RangeRecord:
    variable: str
    site: str
    vmin: float
    vmax: float
    count: int
    violations: tuple  # (timestamp, value) pairs outside the expected bounds


@dataclass(frozen=True)
class RangeReport:
    records: tuple

    @property
    def ok(self):
        return all(not r.violations for r in self.records)

    def record(self, variable, site):
        for r in self.records:
            if r.variable == variable and r.site == site:
                return r
        raise KeyError((variable, site))


def validate_ranges(dataset, expected=None):
    """Observed min/max/count per (variable, site), flagging out-of-bound values.

    ``expected`` maps variable name to (lo, hi); lo is exclusive, hi inclusive.
    Variables without bounds are reported but never flagged.
    """
    expected = DEFAULT_BOUNDS if expected is None else expected
    records = []
    for var in dataset.variables:
        for site in dataset.sites:
            sub = dataset.frame[dataset.frame["site"] == site]
            vals = sub[var].to_numpy()
            present = ~np.isnan(vals)
            count = int(present.sum())
            vmin = float(np.min(vals[present])) if count else float("nan")
            vmax = float(np.max(vals[present])) if count else float("nan")
            violations = ()
            if var in expected and count:
                lo, hi = expected[var]
                bad = present & ((vals <= lo) | (vals > hi))
                violations = tuple(
                    (sub["timestamp"].iloc[i], float(vals[i])) for i in np.flatnonzero(bad)
                )
            records.append(RangeRecord(var, site, vmin, vmax, count, violations))
    return RangeReport(tuple(records))

"""Design matrices from formulas: transforms, dummy coding, interactions.

Continuous terms may be log10-transformed; categoricals are dummy-coded
against a reference level (levels sorted lexicographically, reference is the
first); interactions are element-wise products of the expanded columns.
Rows with any required value missing, or non-positive where a log10 or
threshold transform needs positivity, are dropped listwise and counted.

A built design freezes its coding (categorical levels, thresholds, time
origin, training ranges) in a ``DesignInfo`` so that prediction and
cross-validation apply the identical expansion to new rows.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, EmptyDesignError, FormulaError, InputError
from .formula import T15_THRESHOLD, Cat, Interaction, ModelFormula, T15, Var

SECONDS_PER_DAY = 86400.0
QUANTILE_BY_RULE = {"q1": 0.25, "median": 0.5, "q3": 0.75}


def timestamps_ns(series):
    """A tz-aware pandas timestamp column as naive-UTC datetime64[ns]."""
    return series.dt.tz_localize(None).to_numpy()


def derive_t15(turbidity):
    """Low/high category of a raw turbidity value at the 15 NTU threshold."""
    if not np.isfinite(turbidity) or turbidity <= 0:
        raise DomainError(f"turbidity must be positive, got {turbidity}")
    return "low" if turbidity < T15_THRESHOLD else "high"


def level_threshold(levels, rule):
    """Sample quantile (type-7, linear interpolation) named by the rule."""
    levels = np.asarray(levels, dtype=np.float64)
    if levels.size == 0:
        raise InputError("no levels to compute a quantile from")
    if np.any(~np.isfinite(levels)) or np.any(levels <= 0):
        raise DomainError("levels must be present and positive")
    if rule not in QUANTILE_BY_RULE:
        raise DomainError(f"unknown quantile rule '{rule}' (expected q1, median or q3)")
    return float(np.quantile(levels, QUANTILE_BY_RULE[rule]))


def derive_level_group(levels, rule):
    """Low/high categories: "low" iff strictly below the named sample quantile."""
    levels = np.asarray(levels, dtype=np.float64)
    threshold = level_threshold(levels, rule)
    return np.where(levels < threshold, "low", "high")


@dataclass(frozen=True)
class DesignInfo:
    """Frozen coding recipe of a built design."""

    formula: ModelFormula
    col_labels: tuple
    term_spans: tuple  # ((term_label, start, stop), ...) with intercept first
    cat_levels: dict  # var name -> level tuple; reference level is index 0
    time_origin: object  # pandas UTC Timestamp of the dataset's earliest row
    time_unit: str  # "days"
    ranges: dict  # var name -> (raw min, raw max) over the fitted rows

    @property
    def formula_text(self):
        return self.formula.text

    def term_labels(self):
        return tuple(label for label, _, _ in self.term_spans)


@dataclass(frozen=True)
class DesignMatrix:
    """Realized numeric design: X, response on both scales, row keys, coding."""

    X: np.ndarray
    y: np.ndarray  # model scale (log10 when the response is transformed)
    y_raw: np.ndarray
    row_site: np.ndarray
    row_time: np.ndarray  # datetime64[ns], naive UTC
    time_days: np.ndarray
    raw: dict  # var name -> raw values on the kept rows
    info: DesignInfo
    n_dropped_missing: int = 0
    n_dropped_nonpositive: int = 0

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def col_labels(self):
        return self.info.col_labels

    @property
    def formula(self):
        return self.info.formula

    def take(self, idx):
        """Row subset in the given order; coding metadata is unchanged."""
        idx = np.asarray(idx)
        return replace(
            self,
            X=self.X[idx],
            y=self.y[idx],
            y_raw=self.y_raw[idx],
            row_site=self.row_site[idx],
            row_time=self.row_time[idx],
            time_days=self.time_days[idx],
            raw={k: v[idx] for k, v in self.raw.items()},
        )

    def drop_term(self, term):
        """Column subset realizing ``formula.drop(term)`` on the same rows."""
        new_formula = self.formula.drop(term)
        keep = []
        spans = []
        offset = 0
        for label, start, stop in self.info.term_spans:
            if label == term.label:
                continue
            keep.extend(range(start, stop))
            spans.append((label, offset, offset + (stop - start)))
            offset += stop - start
        keep = np.asarray(keep, dtype=np.intp)
        info = replace(
            self.info,
            formula=new_formula,
            col_labels=tuple(self.info.col_labels[i] for i in keep),
            term_spans=tuple(spans),
        )
        return replace(self, X=np.ascontiguousarray(self.X[:, keep]), info=info)


def _factor_columns(factor, values, cat_levels):
    """Expanded (label, column) pairs for one base factor on kept rows."""
    if isinstance(factor, Var):
        col = np.log10(values[factor.name]) if factor.log10 else values[factor.name]
        return [(factor.label, np.asarray(col, dtype=np.float64))]
    if isinstance(factor, T15):
        low = (values[factor.name] < T15_THRESHOLD).astype(np.float64)
        return [(f"{factor.label}[low]", low)]
    if isinstance(factor, Cat):
        levels = cat_levels[factor.name]
        labels = values[factor.name]
        return [
            (f"{factor.name}[{lvl}]", (labels == lvl).astype(np.float64))
            for lvl in levels[1:]
        ]
    raise FormulaError(f"unknown factor type {type(factor).__name__}")


def _term_columns(term, n, values, cat_levels):
    if not isinstance(term, Interaction):
        return _factor_columns(term, values, cat_levels)
    expanded = [_factor_columns(p, values, cat_levels) for p in term.parts]
    out = []

    def rec(i, label_parts, col):
        if i == len(expanded):
            out.append((":".join(label_parts), col))
            return
        for label, c in expanded[i]:
            rec(i + 1, label_parts + [label], col * c)

    rec(0, [], np.ones(n))
    return out


def _positivity_required(formula):
    """Vars that must be strictly positive: log10-transformed or thresholded."""
    need = set()
    if formula.response.log10:
        need.add(formula.response.name)
    for f in formula.base_factors():
        if isinstance(f, Var) and f.log10:
            need.add(f.name)
        elif isinstance(f, T15):
            need.add(f.name)
    return need


def build_design(dataset, formula, require=(), apply_info=None):
    """Realize a formula against a dataset.

    ``require`` lists extra variables that must be present per row (they are
    carried raw, e.g. the level variable backing a correlation grouping).
    With ``apply_info`` the coding (categorical levels, time origin, training
    ranges) of an existing design is reused instead of derived from the data;
    rows showing an unseen categorical level are then dropped as incomplete.
    """
    frame = dataset.frame
    needed = formula.variable_names() | set(require)
    missing_vars = sorted(v for v in needed if v != "site" and v not in frame.columns)
    if missing_vars:
        raise FormulaError(f"variable(s) not in dataset: {', '.join(missing_vars)}")

    n_all = len(frame)
    ok = np.ones(n_all, dtype=bool)
    for v in needed:
        if v != "site":
            ok &= frame[v].notna().to_numpy()
    n_missing = int(n_all - ok.sum())

    keep = ok.copy()
    for v in _positivity_required(formula):
        vals = frame[v].to_numpy()
        keep &= ~((vals <= 0) & ~np.isnan(vals))
    n_nonpos = int(ok.sum() - keep.sum())

    cat_vars = [f.name for f in formula.base_factors() if isinstance(f, Cat)]

    def extract(v):
        if v == "site":
            return frame["site"].to_numpy(dtype=object)[keep]
        return frame[v].to_numpy()[keep]

    if apply_info is not None:
        cat_levels = dict(apply_info.cat_levels)
        unseen = np.zeros(int(keep.sum()), dtype=bool)
        for v in cat_vars:
            unseen |= ~np.isin(extract(v), list(cat_levels[v]))
        if unseen.any():
            kept_idx = np.flatnonzero(keep)
            keep[kept_idx[unseen]] = False
            n_missing += int(unseen.sum())
        time_origin = apply_info.time_origin
    else:
        cat_levels = {v: tuple(sorted(set(extract(v).tolist()))) for v in cat_vars}
        for v, levels in cat_levels.items():
            if len(levels) < 2:
                raise FormulaError(
                    f"categorical '{v}' has a single level {levels} on the fitting rows"
                )
        time_origin = dataset.time_origin

    n = int(keep.sum())
    if n == 0:
        raise EmptyDesignError("no complete rows remain after listwise deletion")

    values = {v: extract(v) for v in sorted(needed)}

    columns = [("Intercept", np.ones(n))]
    spans = [("Intercept", 0, 1)]
    for term in formula.terms:
        cols = _term_columns(term, n, values, cat_levels)
        start = len(columns)
        columns.extend(cols)
        spans.append((term.label, start, start + len(cols)))

    X = np.ascontiguousarray(np.column_stack([c for _, c in columns]))
    labels = tuple(lab for lab, _ in columns)

    y_raw = frame[formula.response.name].to_numpy()[keep]
    y = np.log10(y_raw) if formula.response.log10 else y_raw.copy()

    stamps = timestamps_ns(frame["timestamp"])[keep]
    origin_ns = np.datetime64(time_origin.tz_localize(None), "ns")
    time_days = (stamps - origin_ns).astype(np.float64) / (SECONDS_PER_DAY * 1e9)

    raw = {v: values[v] for v in values if v != "site"}
    if apply_info is not None:
        info = apply_info
    else:
        ranges = {v: (float(np.min(raw[v])), float(np.max(raw[v]))) for v in raw}
        info = DesignInfo(
            formula=formula,
            col_labels=labels,
            term_spans=tuple(spans),
            cat_levels=cat_levels,
            time_origin=time_origin,
            time_unit="days",
            ranges=ranges,
        )

    return DesignMatrix(
        X=X,
        y=y,
        y_raw=y_raw,
        row_site=frame["site"].to_numpy(dtype=object)[keep],
        row_time=stamps,
        time_days=time_days,
        raw=raw,
        info=info,
        n_dropped_missing=n_missing,
        n_dropped_nonpositive=n_nonpos,
    )

"""Competency-question analytics over a materialized store.

Each question pairs a generated SPARQL query with post-processing of
per-country time series: adoption thresholds, activity runs and lagged
correlation between a response indicator and an outcome.
"""

from __future__ import annotations

import datetime as dt
import math
import statistics
from dataclasses import dataclass
from typing import Optional, Sequence

from .ontology import COUNTRY_WISE_STATISTICS_PROP, DATE, NEW_CASES, RESPONSE_STATISTICS, builtin_roc_schema
from .sparql import evaluate
from .terms import DATA, IRI, Literal, NotNumeric, date_value, numeric_value


class CQError(ValueError):
    pass


class UnknownIndicator(CQError):
    pass


class NoData(CQError):
    pass


class DuplicateDate(CQError):
    def __init__(self, dates):
        self.dates = sorted(dates)
        super().__init__("duplicate dates in series: " + ", ".join(d.isoformat() for d in self.dates))


class InsufficientOverlap(CQError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    country: IRI
    indicator: IRI
    points: tuple  # ((date, value), ...)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        for (a, _), (b, _) in zip(self.points, self.points[1:]):
            if not a < b:
                raise CQError(f"series dates must be strictly increasing ({a} then {b})")
        for d, v in self.points:
            if not math.isfinite(v):
                raise CQError(f"non-finite value {v!r} on {d}")

    def __len__(self):
        return len(self.points)

    def as_dict(self) -> dict:
        return dict(self.points)

    @classmethod
    def from_values(cls, values: Sequence[float], start: dt.date = dt.date(2020, 1, 1),
                    country: IRI = IRI(DATA + "country/XXX"), indicator: IRI = IRI(DATA + "series")):
        """Daily series starting at ``start``; ``None`` entries become gaps."""
        pts = [(start + dt.timedelta(days=i), v) for i, v in enumerate(values) if v is not None]
        return cls(country, indicator, pts)


@dataclass(frozen=True)
class Episode:
    start: dt.date
    end: dt.date
    level: float

    def __post_init__(self):
        if self.start > self.end:
            raise CQError("episode start is after its end")

    @property
    def days(self) -> int:
        return (self.end - self.start).days + 1


@dataclass(frozen=True)
class LagCorrelation:
    lag: int
    r: Optional[float]  # None when undefined
    overlap: int
    best: bool = False


def country_iri(key) -> IRI:
    """Accept an IRI or an ISO alpha-3 code such as ``SWE``."""
    if isinstance(key, IRI):
        return key
    if ":" in key:
        return IRI(key)
    return IRI(f"{DATA}country/{key.upper()}")


def resolve_indicator(key, schema=None) -> IRI:
    schema = schema or builtin_roc_schema()
    if isinstance(key, str) and ":" in key:
        key = IRI(key)
    elif isinstance(key, str):
        key = key.lower()
    try:
        return schema.indicator(key).property_iri
    except KeyError:
        raise UnknownIndicator(f"unknown indicator {key!s}") from None


def _number(value) -> str:
    if isinstance(value, bool):
        raise CQError("threshold must be a number")
    if isinstance(value, int) or float(value).is_integer():
        return str(int(value))
    return repr(float(value))


# which countries adopted a response

def cq1_query(indicator: IRI, min_level) -> str:
    return (
        f"SELECT DISTINCT ?country WHERE {{\n"
        f"  ?country <{COUNTRY_WISE_STATISTICS_PROP.value}> ?stats .\n"
        f"  ?stats a <{RESPONSE_STATISTICS.value}> ;\n"
        f"         <{indicator.value}> ?value .\n"
        f"  FILTER(?value >= {_number(min_level)})\n"
        f"}}\n"
    )


def cq1_countries_with_response(store, indicator, min_level, schema=None) -> set:
    """Countries with at least one response statistic at or above ``min_level``."""
    prop = resolve_indicator(indicator, schema)
    table = evaluate(cq1_query(prop, min_level), store)
    return {row["country"] for row in table.rows}


# series extraction

def series_query(country: IRI, prop: IRI) -> str:
    return (
        f"SELECT ?date ?value WHERE {{\n"
        f"  <{country.value}> <{COUNTRY_WISE_STATISTICS_PROP.value}> ?stats .\n"
        f"  ?stats <{DATE.value}> ?date ;\n"
        f"         <{prop.value}> ?value .\n"
        f"}}\n"
    )


def extract_series(store, country, prop) -> TimeSeries:
    country = country_iri(country)
    prop = IRI(prop) if isinstance(prop, str) else prop
    table = evaluate(series_query(country, prop), store)
    points = {}
    duplicates = set()
    for row in table.rows:
        date, value = row["date"], row["value"]
        if not isinstance(date, Literal):
            continue
        try:
            day = date_value(date)
            number = float(numeric_value(value))
        except (NotNumeric, ValueError, TypeError):
            continue
        except Exception as exc:  # malformed date literal
            raise CQError(str(exc)) from None
        if day in points and points[day] != number:
            duplicates.add(day)
        points[day] = number
    if duplicates:
        raise DuplicateDate(duplicates)
    if not points:
        raise NoData(f"no dated values of {prop.value} for {country.value}")
    return TimeSeries(country, prop, sorted(points.items()))


# incidence on the day of adoption

def cq2_incidence_at_adoption(response: TimeSeries, cases: TimeSeries, level, population=None):
    """(first date response ≥ level, case value at that date or the nearest earlier one).

    Returns ``None`` when the level is never reached; the incidence is ``None``
    when no case point exists on or before the adoption date. With
    ``population`` the incidence is expressed per 100 000 inhabitants.
    """
    adoption = next((d for d, v in response.points if v >= level), None)
    if adoption is None:
        return None
    incidence = None
    for d, v in cases.points:
        if d > adoption:
            break
        incidence = v
    if incidence is not None and population:
        incidence = incidence * 100000 / population
    return adoption, incidence


# how long responses lasted

def cq3_run_lengths(series: TimeSeries, level) -> list:
    """Maximal runs of consecutive days with value ≥ level; a missing day ends a run."""
    episodes = []
    start = prev = None
    one_day = dt.timedelta(days=1)
    for d, v in series.points:
        if v >= level:
            if start is not None and d == prev + one_day:
                prev = d
                continue
            if start is not None:
                episodes.append(Episode(start, prev, level))
            start = prev = d
        elif start is not None:
            episodes.append(Episode(start, prev, level))
            start = prev = None
    if start is not None:
        episodes.append(Episode(start, prev, level))
    return episodes


# adoption timing against the outcome

@dataclass(frozen=True)
class AdoptionRow:
    country: IRI
    adoption: Optional[dt.date]
    incidence: Optional[float]
    peak_after: Optional[float]
    peak_date: Optional[dt.date]


def cq4_adoption_report(store, indicator, level, countries=None, outcome: IRI = NEW_CASES,
                        population=None, schema=None) -> list:
    """Per country: adoption date and incidence, plus the outcome peak from adoption on.

    Descriptive only; it makes no causal claim.
    """
    prop = resolve_indicator(indicator, schema)
    if countries is None:
        countries = sorted(cq1_countries_with_response(store, prop, 0), key=lambda c: c.value)
    rows = []
    for country in map(country_iri, countries):
        try:
            response = extract_series(store, country, prop)
            cases = extract_series(store, country, outcome)
        except NoData:
            rows.append(AdoptionRow(country, None, None, None, None))
            continue
        pop = population.get(country) if isinstance(population, dict) else population
        found = cq2_incidence_at_adoption(response, cases, level, pop)
        if found is None:
            rows.append(AdoptionRow(country, None, None, None, None))
            continue
        adoption, incidence = found
        later = [(v, d) for d, v in cases.points if d >= adoption]
        peak = max(later, key=lambda p: (p[0], -p[1].toordinal())) if later else None
        if peak is not None and pop:
            peak = (peak[0] * 100000 / pop, peak[1])
        rows.append(AdoptionRow(country, adoption, incidence,
                                peak[0] if peak else None, peak[1] if peak else None))
    return rows


# lagged association between response and outcome

def growth_rate(series: TimeSeries) -> TimeSeries:
    """Day-over-day relative change; days after a gap or a zero are dropped."""
    pts = []
    one_day = dt.timedelta(days=1)
    for (d0, v0), (d1, v1) in zip(series.points, series.points[1:]):
        if d1 - d0 == one_day and v0 != 0:
            pts.append((d1, (v1 - v0) / v0))
    return TimeSeries(series.country, series.indicator, pts)


def _pearson(xs, ys) -> Optional[float]:
    try:
        r = statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        return None
    if math.isnan(r):
        return None
    return max(-1.0, min(1.0, r))


def cq5_lagged_correlation(response: TimeSeries, outcome: TimeSeries, max_lag: int) -> list:
    """Pearson r between response(t) and outcome(t + lag) for lag in 0..max_lag.

    Lags with fewer than 3 overlapping dates or zero variance get ``r=None``.
    The lag with the largest |r| is flagged ``best`` (ties go to the shorter lag).
    """
    if max_lag < 0:
        raise CQError("max_lag must be >= 0")
    target = outcome.as_dict()
    results = []
    for lag in range(max_lag + 1):
        shift = dt.timedelta(days=lag)
        pairs = [(v, target[d + shift]) for d, v in response.points if d + shift in target]
        r = _pearson([p[0] for p in pairs], [p[1] for p in pairs]) if len(pairs) >= 3 else None
        results.append(LagCorrelation(lag, r, len(pairs)))
    defined = [c for c in results if c.r is not None]
    if not defined:
        raise InsufficientOverlap("no lag has at least 3 overlapping points with nonzero variance")
    best = max(defined, key=lambda c: (abs(c.r), -c.lag))
    return [LagCorrelation(c.lag, c.r, c.overlap, c.lag == best.lag) for c in results]


def estimated_delay(correlations: list) -> int:
    return next(c.lag for c in correlations if c.best)

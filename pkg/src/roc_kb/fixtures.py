"""Deterministic synthetic source tables shaped like OxCGRT, ECDC and ILO exports.

Values are constructed, not real. The OxCGRT table guarantees:

* Sweden never records a facial-coverings level above 0;
* Germany and Jordan both record nonzero facial-coverings levels;
* Germany has the largest emergency-healthcare and vaccine investment sums;
* every H column is complete, while some C/E cells are ``NA``.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import random
from importlib import resources

from .ontology import OXCGRT_CODEBOOK

COUNTRIES = (("Germany", "DEU"), ("Jordan", "JOR"), ("Sweden", "SWE"))
START = dt.date(2020, 4, 1)
SEED = 20200401

INDEX_COLUMNS = ("StringencyIndex", "GovernmentResponseIndex", "ContainmentHealthIndex", "EconomicSupportIndex")

# (country code, indicator) → level used from day `onset` on; missing means random steps
_PINNED = {
    ("SWE", "h6"): (0, 0),
    ("DEU", "h6"): (2, 21),
    ("JOR", "h6"): (3, 7),
}
# per-country scale for monetary indicators, Germany largest
_MONEY_SCALE = {"DEU": 5_000_000_000, "JOR": 20_000_000, "SWE": 50_000_000}
_POPULATION = {"DEU": 83019213, "JOR": 10101697, "SWE": 10230185}


def oxcgrt_header() -> list:
    cols = ["CountryName", "CountryCode", "Date"]
    for code, label, _kind, _max, flag in OXCGRT_CODEBOOK:
        cols.append(f"{code.upper()}_{label}")
        if flag:
            cols.append(f"{code.upper()}_Flag")
    cols.extend(INDEX_COLUMNS)
    return cols


def _steps(rng: random.Random, days: int, top: int) -> list:
    """A non-decreasing-then-relaxing ordinal trajectory with a few level changes."""
    level = rng.randint(0, max(0, top - 1))
    out = []
    for _ in range(days):
        if rng.random() < 0.12:
            level = min(top, max(0, level + rng.choice((-1, 1, 1))))
        out.append(level)
    return out


def _oxcgrt_rows(days: int) -> list:
    rng = random.Random(SEED)
    rows = []
    for name, cc in COUNTRIES:
        series = {}
        for code, _label, kind, top, _flag in OXCGRT_CODEBOOK:
            if kind == "ordinal":
                pinned = _PINNED.get((cc, code))
                if pinned:
                    level, onset = pinned
                    series[code] = [level if d >= min(onset, days // 3) else 0 for d in range(days)]
                else:
                    series[code] = _steps(rng, days, top)
            elif kind == "monetary":
                scale = _MONEY_SCALE[cc]
                series[code] = [
                    rng.randrange(1, 10) * scale if rng.random() < 0.2 else 0 for _ in range(days)
                ]
                if cc == "DEU":
                    # one large package on day one keeps Germany's sums on top
                    series[code][0] = 9 * scale
        for d in range(days):
            date = START + dt.timedelta(days=d)
            row = [name, cc, date.strftime("%Y%m%d")]
            ordinals = []
            for code, _label, kind, top, flag in OXCGRT_CODEBOOK:
                missing = code[0] in "ce" and rng.random() < 0.04
                if kind == "text":
                    row.append("Phased reopening, stage 1" if d % 11 == 5 else "")
                elif missing:
                    row.append("NA")
                elif kind == "ordinal":
                    row.append(f"{series[code][d]}.00")
                    ordinals.append(series[code][d] / top)
                else:
                    row.append(f"{series[code][d]}.00")
                if flag:
                    on = not missing and kind == "ordinal" and series[code][d] > 0
                    row.append(("1" if rng.random() < 0.7 else "0") if on else "")
            mean = sum(ordinals) / len(ordinals) if ordinals else 0.0
            for k in range(len(INDEX_COLUMNS)):
                row.append(f"{min(100.0, 100 * mean * (1 - 0.05 * k)):.2f}")
            rows.append(row)
    return rows


def _to_csv(header: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def oxcgrt_csv(days: int = 30) -> str:
    return _to_csv(oxcgrt_header(), _oxcgrt_rows(days))


ECDC_HEADER = [
    "dateRep", "day", "month", "year", "cases", "deaths", "countriesAndTerritories",
    "geoId", "countryterritoryCode", "popData2019", "continentExp",
    "Cumulative_number_for_14_days_of_COVID-19_cases_per_100000",
]


def ecdc_csv(days: int = 30) -> str:
    rng = random.Random(SEED + 1)
    geo = {"DEU": ("DE", "Europe"), "JOR": ("JO", "Asia"), "SWE": ("SE", "Europe")}
    rows = []
    for name, cc in COUNTRIES:
        level = {"DEU": 5000.0, "JOR": 20.0, "SWE": 500.0}[cc]
        history = []
        for d in range(days):
            growth = 1.08 if d < 10 else 0.96
            level *= growth * rng.uniform(0.9, 1.1)
            cases = int(level)
            history.append(cases)
            deaths = int(cases * rng.uniform(0.01, 0.05))
            date = START + dt.timedelta(days=d)
            per100k = sum(history[-14:]) * 100000 / _POPULATION[cc]
            rows.append([
                date.strftime("%d/%m/%Y"), str(date.day), str(date.month), str(date.year),
                str(cases), str(deaths), name, geo[cc][0], cc, str(_POPULATION[cc]), geo[cc][1],
                f"{per100k:.8f}",
            ])
    return _to_csv(ECDC_HEADER, rows)


ILO_HEADER = ["ref_area", "ref_area_label", "time", "unemployment_rate", "labour_force_participation_rate"]


def ilo_csv() -> str:
    rng = random.Random(SEED + 2)
    rows = []
    for name, cc in COUNTRIES:
        for quarter in ("2020Q1", "2020Q2"):
            rows.append([cc, name, quarter, f"{rng.uniform(3, 20):.1f}", f"{rng.uniform(40, 75):.1f}"])
    return _to_csv(ILO_HEADER, rows)


BUNDLED = {
    "oxcgrt_3x30.csv": lambda: oxcgrt_csv(30),
    "oxcgrt_3x10.csv": lambda: oxcgrt_csv(10),
    "ecdc_3x30.csv": lambda: ecdc_csv(30),
    "ilo_3.csv": ilo_csv,
}


def fixture_path(name: str):
    """Filesystem path of a bundled fixture file."""
    if name not in BUNDLED:
        raise KeyError(f"unknown fixture {name!r}; expected one of {sorted(BUNDLED)}")
    return resources.files("roc_kb").joinpath("data").joinpath("fixtures").joinpath(name)


def write_fixtures(directory) -> list:
    import pathlib

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, make in BUNDLED.items():
        path = directory / name
        path.write_text(make(), encoding="utf-8", newline="")
        written.append(path)
    return written


def synthetic_kb(min_triples: int = 100_000) -> str:
    """N-Triples for a response-data KB with at least ``min_triples`` asserted triples.

    Built by running the OxCGRT preset over a long synthetic series, so its shape
    matches the bundled fixtures; used for load and query timing.
    """
    from .ingest import apply_mapping, parse_csv, preset_mapping
    from .turtle import serialize_ntriples

    days = max(1, min_triples // 95)
    while True:
        graph, _ = apply_mapping(parse_csv(oxcgrt_csv(days).encode("utf-8")), preset_mapping("oxcgrt"))
        if len(graph) >= min_triples:
            return serialize_ntriples(graph)
        days = days * 11 // 10 + 1

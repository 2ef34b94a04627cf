"""CSV panel format: one row per reading.

Header ``level_id,temperature_c,humidity_pct,unit_id,time_h,sar``. Stress is
given in degrees Celsius and percent relative humidity at this boundary and
converted to kelvin and fractions internally. Floats are written with
``repr`` so a write/read round trip is lossless.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .model import DegradationDataset, StressLevel, StressVector, UnitSeries, kelvin_to_celsius

COLUMNS = ("level_id", "temperature_c", "humidity_pct", "unit_id", "time_h", "sar")


class DataFormatError(ValueError):
    """Malformed or inconsistent panel file."""


def _float(text, col, line):
    try:
        v = float(text)
    except ValueError:
        raise DataFormatError(f"line {line}: column {col!r} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DataFormatError(f"line {line}: column {col!r} is not finite")
    return v


def read_csv(path) -> DegradationDataset:
    """Parse and validate a panel file.

    Levels and units keep their order of first appearance. Readings of a unit
    must appear in strictly increasing time order.
    """
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"data file not found: {path}")
    levels: dict = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != COLUMNS:
            raise DataFormatError(f"line 1: header must be {','.join(COLUMNS)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(COLUMNS):
                raise DataFormatError(f"line {line}: expected {len(COLUMNS)} fields, got {len(row)}")
            level_id, unit_id = row[0].strip(), row[3].strip()
            if not level_id or not unit_id:
                raise DataFormatError(f"line {line}: level_id and unit_id must be non-empty")
            temp_c = _float(row[1], "temperature_c", line)
            hum = _float(row[2], "humidity_pct", line)
            t = _float(row[4], "time_h", line)
            y = _float(row[5], "sar", line)
            if t <= 0:
                raise DataFormatError(f"line {line}: time_h must be > 0")
            try:
                stress = StressVector.from_celsius(temp_c, hum)
            except ValueError as exc:
                raise DataFormatError(f"line {line}: {exc}") from None
            lv = levels.setdefault(level_id, {"stress": stress, "units": {}, "line": line})
            if lv["stress"] != stress:
                raise DataFormatError(
                    f"line {line}: level {level_id!r} stress differs from line {lv['line']}"
                )
            unit = lv["units"].setdefault(unit_id, {"t": [], "y": [], "seen": set()})
            if t in unit["seen"]:
                raise DataFormatError(
                    f"line {line}: duplicate reading (level={level_id}, unit={unit_id}, time_h={t!r})"
                )
            if unit["t"] and t < unit["t"][-1]:
                raise DataFormatError(
                    f"line {line}: times of unit {unit_id!r} in level {level_id!r} are not increasing"
                )
            unit["seen"].add(t)
            unit["t"].append(t)
            unit["y"].append(y)
    if not levels:
        raise DataFormatError("no data rows")
    out = []
    for level_id, lv in levels.items():
        units = [UnitSeries(np.array(u["t"]), np.array(u["y"]), unit_id=uid) for uid, u in lv["units"].items()]
        out.append(StressLevel(lv["stress"], units, level_id=level_id))
    return DegradationDataset(out)


def write_csv(dataset: DegradationDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for li, lv in enumerate(dataset.levels):
            lid = lv.level_id or str(li + 1)
            tc = repr(float(kelvin_to_celsius(lv.stress.temperature)))
            hp = repr(float(lv.stress.humidity * 100.0))
            for ui, u in enumerate(lv.units):
                uid = u.unit_id or str(ui + 1)
                for t, y in zip(u.times, u.values):
                    w.writerow((lid, tc, hp, uid, repr(float(t)), repr(float(y))))


def write_series(path, rows, with_bands: bool) -> None:
    """Curve export with columns ``t_h,value[,lower,upper]``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t_h", "value", "lower", "upper") if with_bands else ("t_h", "value"))
        for r in rows:
            w.writerow([repr(float(x)) for x in r])

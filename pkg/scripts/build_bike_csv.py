"""Rebuild a UCI ``hour.csv``-schema file from the ISLP ``Bikeshare.csv`` table.

ISLP ships the 2011 half of the UCI Bike Sharing hourly data with recoded
columns (month names, weather labels, ``day`` as day-of-year, ``bikers`` for
``cnt``). This script restores the original 17-column layout so that the
standard preprocessing (drop instant/casual/registered, index dteday, scale
cnt) applies unchanged.

Usage::

    pip download --no-deps ISLP -d /tmp/islp
    python scripts/build_bike_csv.py /tmp/islp/islp-*.whl data/bike_hour_2011.csv
"""

import datetime
import io
import sys
import zipfile

import pandas as pd

MONTHS = {
    "Jan": 1, "Feb": 2, "March": 3, "April": 4, "May": 5, "June": 6,
    "July": 7, "Aug": 8, "Sept": 9, "Oct": 10, "Nov": 11, "Dec": 12,
}
WEATHER = {"clear": 1, "cloudy/misty": 2, "light rain/snow": 3, "heavy rain/snow": 4}
COLUMNS = [
    "instant", "dteday", "season", "yr", "mnth", "hr", "holiday", "weekday",
    "workingday", "weathersit", "temp", "atemp", "hum", "windspeed",
    "casual", "registered", "cnt",
]


def read_source(path):
    if path.endswith(".whl"):
        with zipfile.ZipFile(path) as zf:
            return pd.read_csv(io.BytesIO(zf.read("ISLP/data/Bikeshare.csv")))
    return pd.read_csv(path)


def convert(src: pd.DataFrame) -> pd.DataFrame:
    start = datetime.date(2011, 1, 1)
    out = pd.DataFrame()
    out["instant"] = range(1, len(src) + 1)
    out["dteday"] = [(start + datetime.timedelta(days=int(d) - 1)).isoformat() for d in src["day"]]
    out["season"] = src["season"]
    out["yr"] = 0
    out["mnth"] = src["mnth"].map(MONTHS)
    for col in ("hr", "holiday", "weekday", "workingday"):
        out[col] = src[col]
    out["weathersit"] = src["weathersit"].map(WEATHER)
    for col in ("temp", "atemp", "hum", "windspeed", "casual", "registered"):
        out[col] = src[col]
    out["cnt"] = src["bikers"]
    if out.isna().any().any():
        raise ValueError("unmapped categorical value in source table")
    if not (out["casual"] + out["registered"] == out["cnt"]).all():
        raise ValueError("casual + registered != cnt")
    return out[COLUMNS]


if __name__ == "__main__":
    src_path, dst_path = sys.argv[1], sys.argv[2]
    convert(read_source(src_path)).to_csv(dst_path, index=False)

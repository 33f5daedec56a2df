"""Datasets: CSV ingestion, seeded splits and synthetic data."""

import csv
import datetime
from dataclasses import dataclass

import numpy as np

from rmtspacings.errors import DimensionError, ParseError, SchemaError, ValidationError

BIKE_COLUMNS = (
    "instant", "dteday", "season", "yr", "mnth", "hr", "holiday", "weekday",
    "workingday", "weathersit", "temp", "atemp", "hum", "windspeed",
    "casual", "registered", "cnt",
)
BIKE_DROPPED = ("instant", "casual", "registered")
BIKE_TARGET = "cnt"


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    name: str = ""

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        if x.ndim != 2 or y.ndim != 2:
            raise DimensionError("features and targets must be 2-D")
        if x.shape[0] != y.shape[0]:
            raise DimensionError(f"row counts differ: {x.shape[0]} features vs {y.shape[0]} targets")
        if x.shape[0] < 1:
            raise ValidationError("dataset has no rows")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.features.shape[0]

    def subset(self, idx, name=None) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.targets[idx], name or self.name)

    def batches(self, batch_size: int, seed: int, n_batches=None):
        """Seeded batches of exactly ``batch_size`` rows.

        Batches come from successive random partitions of the rows; within one
        partition they are disjoint and the incomplete tail is dropped. By
        default one partition is used; ``n_batches`` draws as many further
        partitions as needed. ``batch_size == 0`` yields the whole dataset.
        """
        if batch_size == 0:
            return [self]
        n_per = len(self) // batch_size
        if n_per == 0:
            raise ValidationError(f"batch_size {batch_size} exceeds the {len(self)} available rows")
        wanted = n_per if n_batches is None else int(n_batches)
        rng = np.random.default_rng(seed)
        out = []
        while len(out) < wanted:
            perm = rng.permutation(len(self))
            for i in range(min(n_per, wanted - len(out))):
                out.append(self.subset(np.sort(perm[i * batch_size : (i + 1) * batch_size])))
        return out


def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    return header, rows


def _floats(rows, col, name):
    out = np.empty(len(rows))
    for i, r in enumerate(rows):
        try:
            out[i] = float(r[col])
        except (ValueError, IndexError):
            raise ParseError(f"row {i}: cannot parse column {name!r} value {r[col:col + 1]}", row=i) from None
    return out


def _day_index(rows, col):
    days = np.empty(len(rows), dtype=np.int64)
    for i, r in enumerate(rows):
        try:
            days[i] = datetime.date.fromisoformat(r[col].strip()).toordinal()
        except (ValueError, IndexError):
            raise ParseError(f"row {i}: cannot parse date {r[col:col + 1]}", row=i) from None
    return (days - days.min()).astype(np.float64)


def load_csv_dataset(path, schema="bike", target=BIKE_TARGET, fit_rows=None, n_classes=None,
                     name=None, standardize_features=True) -> Dataset:
    """Read a CSV with a header row.

    ``schema="bike"``: UCI bike-sharing layout. ``instant``, ``casual`` and
    ``registered`` are dropped, ``dteday`` becomes days since the earliest
    date, and ``cnt`` is divided by its mean over ``fit_rows`` (all rows by
    default). The 13 remaining columns are the features, in file order; they
    are standardized over ``fit_rows`` unless ``standardize_features`` is
    false (raw day indices make the default training recipe diverge).

    ``schema="standardize"``: every non-target column is standardized to
    zero mean and unit variance over ``fit_rows``. With ``n_classes`` the
    target holds integer labels and is one-hot encoded; otherwise it is kept
    raw.
    """
    header, rows = _read_rows(path)
    idx = {h: i for i, h in enumerate(header)}
    fit = slice(None) if fit_rows is None else np.asarray(fit_rows)
    if schema == "bike":
        missing = [c for c in BIKE_COLUMNS if c not in idx]
        if missing:
            raise SchemaError(f"{path}: missing bike columns {missing}")
        cols = []
        for c in header:
            if c in BIKE_DROPPED or c == BIKE_TARGET or c not in BIKE_COLUMNS:
                continue
            cols.append(_day_index(rows, idx[c]) if c == "dteday" else _floats(rows, idx[c], c))
        x = np.column_stack(cols)
        if standardize_features:
            x = _standardize(x, fit)
        cnt = _floats(rows, idx[BIKE_TARGET], BIKE_TARGET)
        y = cnt / cnt[fit].mean()
        return Dataset(x, y[:, None], name or "bike")
    if schema == "standardize":
        if target not in idx:
            raise SchemaError(f"{path}: missing target column {target!r}")
        names = [c for c in header if c != target]
        x = _standardize(np.column_stack([_floats(rows, idx[c], c) for c in names]), fit)
        t = _floats(rows, idx[target], target)
        if n_classes is not None:
            y = one_hot(t, n_classes)
        else:
            y = t[:, None]
        return Dataset(x, y, name or str(path))
    raise ValidationError(f"unknown schema {schema!r}")


def _standardize(x, fit):
    mu = x[fit].mean(axis=0)
    sd = x[fit].std(axis=0)
    # Constant columns (e.g. ``yr`` within one year) are centred only.
    return (x - mu) / np.where(sd > 0, sd, 1.0)


def one_hot(labels, n_classes: int) -> np.ndarray:
    lab = np.asarray(labels)
    if np.any(lab != np.round(lab)) or np.any(lab < 0) or np.any(lab >= n_classes):
        raise ValidationError(f"labels must be integers in [0, {n_classes})")
    out = np.zeros((lab.size, n_classes))
    out[np.arange(lab.size), lab.astype(np.int64)] = 1.0
    return out


def split_indices(n_rows: int, test_fraction: float, seed: int):
    """Seeded ``(train_idx, test_idx)``, each sorted."""
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError("test_fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n_rows)
    n_test = int(round(test_fraction * n_rows))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def count_rows(path) -> int:
    return len(_read_rows(path)[1])


def load_splits(path, schema="bike", test_fraction=0.2, seed=0, **kwargs):
    """Load ``(train, test)`` with all scaling statistics taken from the train rows."""
    train_idx, test_idx = split_indices(count_rows(path), test_fraction, seed)
    full = load_csv_dataset(path, schema, fit_rows=train_idx, **kwargs)
    return (full.subset(train_idx, full.name + ":train"),
            full.subset(test_idx, full.name + ":test"))


def make_gaussian_classification(n: int, d: int, c: int, seed: int, separation: float = 1.0) -> Dataset:
    """Isotropic Gaussian clusters with random centers; one-hot targets."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, separation, size=(c, d))
    labels = rng.integers(0, c, size=n)
    x = centers[labels] + rng.standard_normal((n, d))
    return Dataset(x, one_hot(labels, c), f"gaussian-{d}x{c}")

"""Multi-label datasets: MULAN ARFF+XML loading, summaries, folds and column selection."""

from __future__ import annotations

import csv
import io
import os
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed or inconsistent dataset files."""


@dataclass(frozen=True)
class MultiLabelDataset:
    X: np.ndarray
    Y: np.ndarray
    feature_names: tuple[str, ...]
    label_names: tuple[str, ...]
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y)
        if X.ndim != 2 or Y.ndim != 2:
            raise DatasetError("X and Y must be 2-D")
        n, m = X.shape
        if Y.shape[0] != n:
            raise DatasetError(f"X has {n} rows but Y has {Y.shape[0]}")
        if n < 1 or m < 1 or Y.shape[1] < 1:
            raise DatasetError("need at least one instance, feature and label")
        if not np.all((Y == 0) | (Y == 1)):
            raise DatasetError("label matrix must be binary")
        feature_names = tuple(self.feature_names)
        label_names = tuple(self.label_names)
        if len(feature_names) != m or len(label_names) != Y.shape[1]:
            raise DatasetError("name sequences do not match matrix shapes")
        if len(set(feature_names)) != m or len(set(label_names)) != len(label_names):
            raise DatasetError("feature and label names must be unique")
        X.setflags(write=False)
        Y = Y.astype(np.int8)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "feature_names", feature_names)
        object.__setattr__(self, "label_names", label_names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    def subset(self, rows) -> "MultiLabelDataset":
        """Restrict to the given instance indices (e.g. one CV split)."""
        rows = np.asarray(rows, dtype=int)
        return MultiLabelDataset(self.X[rows], self.Y[rows], self.feature_names,
                                 self.label_names, self.name)


@dataclass(frozen=True)
class DatasetSummary:
    name: str
    num_instances: int
    num_features: int
    num_labels: int
    label_cardinality: float
    label_density: float

    def csv_row(self) -> str:
        return (f"{self.name},{self.num_instances},{self.num_features},{self.num_labels},"
                f"{self.label_cardinality:.3f},{self.label_density:.3f}")

    CSV_HEADER = "name,n,m,q,lcard,lden"


@dataclass(frozen=True)
class FoldAssignment:
    fold_of_instance: np.ndarray
    k: int
    seed: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.fold_of_instance == fold
        return np.flatnonzero(~mask), np.flatnonzero(mask)

    def sizes(self) -> list[int]:
        return np.bincount(self.fold_of_instance, minlength=self.k).tolist()


@dataclass
class Standardizer:
    """Per-column affine transform fitted on one split and reusable on others."""

    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        self.constant = self.std <= 1e-12 * np.maximum(1.0, np.abs(self.mean))

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        scale = np.where(self.constant, 1.0, self.std)
        Z = (X - self.mean) / scale
        Z[:, self.constant] = 0.0
        return Z

    def apply(self, d: MultiLabelDataset) -> MultiLabelDataset:
        return MultiLabelDataset(self.transform(d.X), d.Y, d.feature_names,
                                 d.label_names, d.name)


# ---------------------------------------------------------------------------
# ARFF / XML parsing

_ATTR_RE = re.compile(r"@attribute\s+", re.IGNORECASE)


def _split_name(rest: str) -> tuple[str, str]:
    rest = rest.strip()
    if not rest:
        raise DatasetError("empty @attribute declaration")
    if rest[0] in "'\"":
        quote = rest[0]
        end = rest.find(quote, 1)
        while end != -1 and rest[end - 1] == "\\":
            end = rest.find(quote, end + 1)
        if end == -1:
            raise DatasetError(f"unterminated quoted attribute name: {rest!r}")
        return rest[1:end].replace("\\" + quote, quote), rest[end + 1:].strip()
    parts = rest.split(None, 1)
    if len(parts) != 2:
        raise DatasetError(f"attribute declaration lacks a type: {rest!r}")
    return parts[0], parts[1].strip()


def _split_values(text: str) -> list[str]:
    reader = csv.reader(io.StringIO(text), quotechar="'", skipinitialspace=True)
    row = next(reader, [])
    if any('"' in v for v in row):
        row = next(csv.reader(io.StringIO(text), quotechar='"', skipinitialspace=True), [])
    return [v.strip() for v in row]


def _parse_attribute(line: str) -> tuple[str, str, list[str] | None]:
    name, type_text = _split_name(_ATTR_RE.sub("", line, count=1))
    if type_text.startswith("{"):
        if not type_text.endswith("}"):
            raise DatasetError(f"unterminated nominal specification for {name!r}")
        values = _split_values(type_text[1:-1])
        if not values or any(v == "" for v in values):
            raise DatasetError(f"empty nominal value in {name!r}")
        return name, "nominal", values
    kind = type_text.split()[0].lower()
    if kind in ("numeric", "real", "integer"):
        return name, "numeric", None
    raise DatasetError(f"unsupported attribute type {type_text!r} for {name!r}")


def _read_arff(path) -> tuple[list[tuple[str, str, list[str] | None]], list[list[str]]]:
    attributes = []
    rows: list[list[str]] = []
    in_data = False
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            if not in_data:
                low = line.lower()
                if low.startswith("@relation"):
                    continue
                if low.startswith("@attribute"):
                    try:
                        attributes.append(_parse_attribute(line))
                    except DatasetError as exc:
                        raise DatasetError(f"{path}:{lineno}: {exc}") from None
                elif low.startswith("@data"):
                    in_data = True
                else:
                    raise DatasetError(f"{path}:{lineno}: unexpected header line {line[:40]!r}")
                continue
            rows.append(_parse_row(line, len(attributes), attributes, path, lineno))
    if not attributes:
        raise DatasetError(f"{path}: no @attribute declarations")
    if not in_data:
        raise DatasetError(f"{path}: missing @data section")
    return attributes, rows


def _parse_row(line, n_attr, attributes, path, lineno) -> list[str]:
    if line.startswith("{"):
        if not line.endswith("}"):
            raise DatasetError(f"{path}:{lineno}: unterminated sparse row")
        # implicit entries take value index 0 (numeric zero or first nominal value)
        values = ["0" if kind == "numeric" else nominal[0] for _, kind, nominal in attributes]
        body = line[1:-1].strip()
        if body:
            for item in _split_values(body):
                idx, _, val = item.partition(" ")
                try:
                    j = int(idx)
                except ValueError:
                    raise DatasetError(f"{path}:{lineno}: bad sparse index {idx!r}") from None
                if not 0 <= j < n_attr:
                    raise DatasetError(f"{path}:{lineno}: sparse index {j} out of range")
                values[j] = val.strip().strip("'\"")
        return values
    values = _split_values(line)
    if len(values) != n_attr:
        raise DatasetError(f"{path}:{lineno}: expected {n_attr} values, got {len(values)}")
    return values


def read_label_names(xml_path) -> list[str]:
    """Label attribute names from a MULAN labels XML file."""
    try:
        root = ET.parse(xml_path).getroot()
    except ET.ParseError as exc:
        raise DatasetError(f"{xml_path}: {exc}") from None
    names = [el.attrib["name"] for el in root.iter()
             if el.tag.rsplit("}", 1)[-1] == "label" and "name" in el.attrib]
    if not names:
        raise DatasetError(f"{xml_path}: no <label name=...> elements")
    return names


_TRUE = {"1", "1.0", "true", "yes"}
_FALSE = {"0", "0.0", "false", "no"}


def _label_value(v: str, name: str) -> int:
    low = v.strip().lower()
    if low in _TRUE:
        return 1
    if low in _FALSE:
        return 0
    raise DatasetError(f"non-binary value {v!r} in label column {name!r}")


def load_dataset(arff_path, labels_xml_path, name: str | None = None) -> MultiLabelDataset:
    """Load a MULAN dataset.

    Columns named in the XML become the label matrix; every other numeric
    attribute becomes a feature, and nominal non-label attributes are one-hot
    encoded (``attr=value`` columns). Missing values are rejected.
    """
    for p in (arff_path, labels_xml_path):
        if not os.path.isfile(p):
            raise FileNotFoundError(f"no such file: {p}")
    label_names = read_label_names(labels_xml_path)
    attributes, rows = _read_arff(arff_path)
    index = {a[0]: j for j, a in enumerate(attributes)}
    missing = [lbl for lbl in label_names if lbl not in index]
    if missing:
        raise DatasetError(f"labels absent from ARFF: {missing[:5]}")
    if not rows:
        raise DatasetError(f"{arff_path}: no data rows")
    label_cols = [index[lbl] for lbl in label_names]
    label_set = set(label_cols)

    for r, row in enumerate(rows):
        if any(v == "?" for v in row):
            raise DatasetError(f"{arff_path}: missing value in data row {r + 1}")

    Y = np.array([[_label_value(row[j], attributes[j][0]) for j in label_cols] for row in rows],
                 dtype=np.int8)

    columns: list[np.ndarray] = []
    feature_names: list[str] = []
    for j, (attr, kind, nominal) in enumerate(attributes):
        if j in label_set:
            continue
        raw = [row[j] for row in rows]
        if kind == "numeric":
            try:
                columns.append(np.array(raw, dtype=float))
            except ValueError:
                raise DatasetError(f"non-numeric value in numeric attribute {attr!r}") from None
            feature_names.append(attr)
        else:
            unknown = set(raw) - set(nominal)
            if unknown:
                raise DatasetError(f"undeclared values {sorted(unknown)[:3]} in {attr!r}")
            for value in nominal:
                columns.append(np.array([v == value for v in raw], dtype=float))
                feature_names.append(f"{attr}={value}")
    if not columns:
        raise DatasetError("dataset has no feature columns")
    X = np.column_stack(columns)
    if name is None:
        name = os.path.splitext(os.path.basename(str(arff_path)))[0]
    return MultiLabelDataset(X, Y, tuple(feature_names), tuple(label_names), name)


def load_csv(path, num_labels: int, name: str | None = None) -> MultiLabelDataset:
    """Convenience loader: header row, features first, the last ``num_labels`` columns are labels."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float)
    X, Y = data[:, :-num_labels], data[:, -num_labels:]
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    return MultiLabelDataset(X, Y, tuple(header[:-num_labels]), tuple(header[-num_labels:]), name)


# ---------------------------------------------------------------------------

def summarize(d: MultiLabelDataset) -> DatasetSummary:
    lcard = float(d.Y.sum()) / d.n
    return DatasetSummary(d.name, d.n, d.m, d.q, lcard, lcard / d.q)


def kfold_split(n: int, k: int, seed: int = 0) -> FoldAssignment:
    """Seeded shuffle followed by round-robin assignment to ``k`` folds."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"cannot split {n} instances into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=int)
    folds[perm] = np.arange(n) % k
    return FoldAssignment(folds, k, seed)


def select_features(d: MultiLabelDataset, indices: Sequence[int]) -> MultiLabelDataset:
    idx = [int(i) for i in indices]
    if not idx:
        raise ValueError("empty feature selection")
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate feature index")
    bad = [i for i in idx if not 0 <= i < d.m]
    if bad:
        raise IndexError(f"feature indices out of range: {bad[:5]}")
    return MultiLabelDataset(d.X[:, idx], d.Y, tuple(d.feature_names[i] for i in idx),
                             d.label_names, d.name)


def standardize(d: MultiLabelDataset) -> tuple[MultiLabelDataset, Standardizer]:
    """Zero-mean, unit (population) variance columns; constant columns become zeros."""
    t = Standardizer(d.X.mean(axis=0), d.X.std(axis=0))
    return t.apply(d), t

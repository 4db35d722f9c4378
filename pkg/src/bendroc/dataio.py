"""Labeled score datasets: parsing, serialization and stratified splitting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, TextIO

import numpy as np


class DataError(ValueError):
    """Base class for dataset problems."""


class EmptyInputError(DataError):
    pass


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class LabeledSample:
    label: int
    score: float
    aux: tuple[float, ...]

    def __post_init__(self):
        if self.label not in (1, -1):
            raise DataError(f"label must be +1 or -1, got {self.label!r}")
        if not math.isfinite(self.score) or not all(math.isfinite(a) for a in self.aux):
            raise DataError("score and aux values must be finite")
        if len(self.aux) < 1:
            raise DataError("at least one auxiliary feature is required")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScoredDataset:
    """Column-oriented collection of labeled samples.

    ``labels`` holds +1/-1, ``scores`` the base-classifier outputs and
    ``aux`` an ``(n, m)`` matrix of auxiliary features. Arrays are made
    read-only on construction.
    """

    labels: np.ndarray
    scores: np.ndarray
    aux: np.ndarray
    aux_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int8).reshape(-1)
        scores = np.array(self.scores, dtype=float).reshape(-1)
        aux = np.array(self.aux, dtype=float)
        if aux.ndim == 1:
            aux = aux.reshape(-1, 1)
        n = labels.shape[0]
        if scores.shape[0] != n or aux.shape[0] != n:
            raise DataError("labels, scores and aux must have the same length")
        if aux.ndim != 2 or aux.shape[1] < 1:
            raise DataError("aux must be an (n, m) matrix with m >= 1")
        if not np.isin(labels, (-1, 1)).all():
            raise DataError("labels must be +1 or -1")
        if not (np.isfinite(scores).all() and np.isfinite(aux).all()):
            raise DataError("scores and aux values must be finite")
        names = tuple(self.aux_names) or tuple(f"x{j}" for j in range(aux.shape[1]))
        if len(names) != aux.shape[1]:
            raise DataError(f"{len(names)} aux names for {aux.shape[1]} aux columns")
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "scores", _readonly(scores))
        object.__setattr__(self, "aux", _readonly(aux))
        object.__setattr__(self, "aux_names", names)

    @classmethod
    def from_samples(cls, samples: Iterable[LabeledSample], aux_names=()) -> "ScoredDataset":
        samples = list(samples)
        if not samples:
            raise EmptyInputError("no samples")
        m = len(samples[0].aux)
        if any(len(s.aux) != m for s in samples):
            raise DataError("samples do not share an aux dimension")
        return cls(
            labels=[s.label for s in samples],
            scores=[s.score for s in samples],
            aux=[s.aux for s in samples],
            aux_names=tuple(aux_names),
        )

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __iter__(self) -> Iterator[LabeledSample]:
        return iter(self.samples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScoredDataset):
            return NotImplemented
        return (
            self.aux_names == other.aux_names
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.scores, other.scores)
            and np.array_equal(self.aux, other.aux)
        )

    @property
    def samples(self) -> list[LabeledSample]:
        return [
            LabeledSample(int(y), float(s), tuple(float(v) for v in a))
            for y, s, a in zip(self.labels, self.scores, self.aux)
        ]

    @property
    def n_features(self) -> int:
        return self.aux.shape[1]

    @property
    def positives(self) -> np.ndarray:
        return self.labels == 1

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_neg(self) -> int:
        return int(np.count_nonzero(self.labels == -1))

    def has_both_classes(self) -> bool:
        return self.n_pos > 0 and self.n_neg > 0

    def subset(self, index) -> "ScoredDataset":
        return ScoredDataset(self.labels[index], self.scores[index], self.aux[index], self.aux_names)

    def with_scores(self, scores) -> "ScoredDataset":
        return ScoredDataset(self.labels, scores, self.aux, self.aux_names)


@dataclass(frozen=True)
class Schema:
    """Column mapping for a delimited score file.

    ``positive`` and ``negative`` list the raw label strings mapped to +1
    and -1. Any other label value is a schema error.
    """

    label: str = "label"
    score: str = "score"
    aux: tuple[str, ...] = ()
    positive: tuple[str, ...] = ("1", "+1")
    negative: tuple[str, ...] = ("-1", "0")
    delimiter: str = ","

    def __post_init__(self):
        object.__setattr__(self, "aux", tuple(self.aux))
        object.__setattr__(self, "positive", tuple(str(v) for v in self.positive))
        object.__setattr__(self, "negative", tuple(str(v) for v in self.negative))
        if set(self.positive) & set(self.negative):
            raise SchemaError("a label value cannot map to both classes")

    @classmethod
    def from_mapping(cls, cfg: Mapping) -> "Schema":
        known = {"label", "score", "aux", "positive", "negative", "delimiter"}
        unknown = set(cfg) - known
        if unknown:
            raise SchemaError(f"unknown schema keys: {sorted(unknown)}")
        return cls(**cfg)

    def label_map(self) -> dict[str, int]:
        out = {v: 1 for v in self.positive}
        out.update({v: -1 for v in self.negative})
        return out


def parse_dataset(source: TextIO | str, schema: Schema | None = None) -> ScoredDataset:
    """Parse a delimited text stream with a header row into a dataset.

    ``source`` is an open text stream or a string holding the file contents.
    If ``schema.aux`` is empty, every column other than the label and score
    columns is used as an auxiliary feature. Rows are numbered from 1 for the
    first data row (the header is row 0).
    """
    schema = schema or Schema()
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source, delimiter=schema.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("input is empty") from None
    header = [h.strip() for h in header]
    if not any(header):
        raise EmptyInputError("input has no header")

    def col(name):
        try:
            return header.index(name)
        except ValueError:
            raise SchemaError(f"column {name!r} not found in header {header}") from None

    i_label, i_score = col(schema.label), col(schema.score)
    aux_names = schema.aux or tuple(h for h in header if h not in (schema.label, schema.score))
    if not aux_names:
        raise SchemaError("schema names no auxiliary columns")
    i_aux = [col(a) for a in aux_names]
    mapping = schema.label_map()

    labels, scores, aux = [], [], []
    for row_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise ParseError(row_no, f"expected {len(header)} fields, got {len(row)}")
        raw_label = row[i_label].strip()
        if raw_label not in mapping:
            raise SchemaError(f"row {row_no}: label {raw_label!r} is not in the declared mapping")
        labels.append(mapping[raw_label])
        try:
            values = [float(row[i_score])] + [float(row[j]) for j in i_aux]
        except ValueError as exc:
            raise ParseError(row_no, str(exc)) from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(row_no, "non-finite value")
        scores.append(values[0])
        aux.append(values[1:])
    if not labels:
        raise EmptyInputError("input has a header but no data rows")
    return ScoredDataset(labels, scores, np.array(aux, dtype=float), tuple(aux_names))


def read_dataset(path, schema: Schema | None = None) -> ScoredDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_dataset(fh, schema)


def write_dataset(data: ScoredDataset, sink: TextIO, delimiter: str = ",") -> None:
    """Write ``data`` with columns ``label, score, <aux names>``.

    Floats are written with ``repr`` so that re-parsing is exact.
    """
    writer = csv.writer(sink, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["label", "score", *data.aux_names])
    for y, s, a in zip(data.labels, data.scores, data.aux):
        writer.writerow([int(y), repr(float(s)), *(repr(float(v)) for v in a)])


def dumps_dataset(data: ScoredDataset, delimiter: str = ",") -> str:
    buf = io.StringIO()
    write_dataset(data, buf, delimiter)
    return buf.getvalue()


def split_dataset(data: ScoredDataset, folds: int, seed: int) -> list[tuple[ScoredDataset, ScoredDataset]]:
    """Stratified k-fold split.

    Each class is shuffled with a generator seeded by ``seed`` and dealt
    round-robin over the folds; the negatives continue the deal where the
    positives stopped so fold sizes differ by at most one.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > len(data):
        raise ValueError(f"folds ({folds}) exceeds dataset size ({len(data)})")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(data), dtype=np.int64)
    start = 0
    for cls in (1, -1):
        idx = np.flatnonzero(data.labels == cls)
        idx = idx[rng.permutation(idx.size)]
        assignment[idx] = (start + np.arange(idx.size)) % folds
        start = (start + idx.size) % folds
    out = []
    for f in range(folds):
        test = assignment == f
        out.append((data.subset(~test), data.subset(test)))
    return out

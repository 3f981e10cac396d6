"""Two-sample data handling: container, centering, covariances, CSV ingestion."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "TwoSampleDataset",
    "CsvFormatError",
    "DegenerateDataError",
    "center_by_group",
    "residualize",
    "sample_covariance",
    "pooled_covariance",
    "load_two_files",
    "load_grouped_file",
]


class CsvFormatError(ValueError):
    """Malformed input CSV. Carries a 1-based line and column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class DegenerateDataError(ValueError):
    """Data that is syntactically fine but statistically unusable."""


@dataclass(frozen=True)
class TwoSampleDataset:
    """Two groups of observations over the same features, rows = observations."""

    group1: np.ndarray
    group2: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        g1 = np.asarray(self.group1, dtype=float)
        g2 = np.asarray(self.group2, dtype=float)
        if g1.ndim != 2 or g2.ndim != 2:
            raise ValueError("each group must be a 2-D array (rows = observations)")
        if g1.shape[1] != g2.shape[1]:
            raise ValueError(
                f"groups disagree on feature count: {g1.shape[1]} vs {g2.shape[1]}"
            )
        if g1.shape[0] < 2 or g2.shape[0] < 2:
            raise DegenerateDataError("each group needs at least 2 observations")
        if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
            raise ValueError("observations must be finite")
        if self.feature_names is not None and len(self.feature_names) != g1.shape[1]:
            raise ValueError("feature_names length does not match feature count")
        object.__setattr__(self, "group1", g1)
        object.__setattr__(self, "group2", g2)

    @property
    def n1(self) -> int:
        return self.group1.shape[0]

    @property
    def n2(self) -> int:
        return self.group2.shape[0]

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def p(self) -> int:
        return self.group1.shape[1]

    def stacked(self) -> np.ndarray:
        """Group-1 rows followed by group-2 rows, (n, p)."""
        return np.vstack([self.group1, self.group2])


def center_by_group(d: TwoSampleDataset) -> TwoSampleDataset:
    """Subtract each group's own column means."""
    return TwoSampleDataset(
        group1=d.group1 - d.group1.mean(axis=0),
        group2=d.group2 - d.group2.mean(axis=0),
        feature_names=d.feature_names,
    )


def residualize(
    d: TwoSampleDataset, covariates: tuple[np.ndarray, np.ndarray]
) -> TwoSampleDataset:
    """Project out per-group covariates from each group's observations.

    ``covariates`` is a pair (C1, C2) of full-column-rank design matrices with
    as many rows as the matching group. Each group becomes
    X - C (C^T C)^{-1} C^T X, computed through an orthonormal basis of
    range(C) so the output is orthogonal to every covariate column to
    machine precision.
    """
    groups = []
    for X, C, label in ((d.group1, covariates[0], 1), (d.group2, covariates[1], 2)):
        C = np.asarray(C, dtype=float)
        if C.ndim != 2 or C.shape[0] != X.shape[0]:
            raise ValueError(
                f"covariates for group {label} must be 2-D with {X.shape[0]} rows"
            )
        if not np.all(np.isfinite(C)):
            raise ValueError(f"covariates for group {label} contain non-finite values")
        if np.linalg.matrix_rank(C) < C.shape[1]:
            raise ValueError(f"covariate matrix for group {label} is rank-deficient")
        q, _ = np.linalg.qr(C)
        groups.append(X - q @ (q.T @ X))
    return TwoSampleDataset(group1=groups[0], group2=groups[1], feature_names=d.feature_names)


def sample_covariance(x: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance (divisor n-1) of rows of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-D array with at least 2 rows")
    z = x - x.mean(axis=0)
    return z.T @ z / (x.shape[0] - 1)


def pooled_covariance(d: TwoSampleDataset, centering: str = "group") -> np.ndarray:
    """Covariance of the stacked observations after centering, divisor n-1.

    ``centering="group"`` (default) removes each group's own mean before
    stacking; ``"global"`` removes the grand mean instead, so group mean
    differences contribute to the pooled structure.
    """
    if centering == "group":
        z = center_by_group(d).stacked()
    elif centering == "global":
        z = d.stacked()
        z = z - z.mean(axis=0)
    else:
        raise ValueError(f"centering must be 'group' or 'global', got {centering!r}")
    return z.T @ z / (d.n - 1)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass
class _ParsedTable:
    header: list[str]
    rows: list[list[float]] = field(default_factory=list)


def _parse_cell(text: str, line: int, column: int) -> float:
    stripped = text.strip()
    if stripped == "":
        raise CsvFormatError("missing value", line=line, column=column)
    try:
        value = float(stripped)
    except ValueError:
        raise CsvFormatError(f"non-numeric value {text!r}", line=line, column=column) from None
    if not np.isfinite(value):
        raise CsvFormatError(f"non-finite value {text!r}", line=line, column=column)
    return value


def _read_table(path: str, keep_text: Sequence[str] = ()) -> tuple[list[str], list[list]]:
    """Read a CSV with a mandatory header. Cells are parsed to float except in
    columns named by ``keep_text``, which stay strings. Errors carry 1-based
    line/column positions."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise CsvFormatError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            try:
                header = next(reader)
            except StopIteration:
                raise CsvFormatError("empty file: a header row is required", line=1) from None
            header = [h.strip() for h in header]
            if any(h == "" for h in header):
                raise CsvFormatError(
                    "blank column name in header", line=1, column=header.index("") + 1
                )
            if len(set(header)) != len(header):
                dup = next(h for h in header if header.count(h) > 1)
                raise CsvFormatError(f"duplicate column name {dup!r}", line=1)
            text_cols = {header.index(c) for c in keep_text if c in header}
            rows: list[list] = []
            for raw in reader:
                line = reader.line_num
                if len(raw) != len(header):
                    raise CsvFormatError(
                        f"expected {len(header)} fields, found {len(raw)}", line=line
                    )
                row: list = []
                for j, cell in enumerate(raw):
                    if j in text_cols:
                        row.append(cell.strip())
                    else:
                        row.append(_parse_cell(cell, line=line, column=j + 1))
                rows.append(row)
        except UnicodeDecodeError as exc:
            raise CsvFormatError(f"file is not valid UTF-8: {exc.reason}") from exc
    if not rows:
        raise CsvFormatError("no data rows after the header", line=1)
    return header, rows


def _split_columns(
    header: list[str], rows: list[list], covariate_cols: Sequence[str], drop: Sequence[str] = ()
) -> tuple[list[str], np.ndarray, np.ndarray | None]:
    for c in covariate_cols:
        if c not in header:
            raise CsvFormatError(f"covariate column {c!r} not found in header", line=1)
    cov_idx = [header.index(c) for c in covariate_cols]
    drop_idx = {header.index(c) for c in drop}
    feat_idx = [
        j for j in range(len(header)) if j not in cov_idx and j not in drop_idx
    ]
    if not feat_idx:
        raise CsvFormatError("no feature columns left after group/covariate columns", line=1)
    data = np.array([[row[j] for j in feat_idx] for row in rows], dtype=float)
    cov = None
    if cov_idx:
        cov = np.array([[row[j] for j in cov_idx] for row in rows], dtype=float)
    names = [header[j] for j in feat_idx]
    return names, data, cov


def load_two_files(
    path1: str, path2: str, covariate_cols: Sequence[str] = ()
) -> tuple[TwoSampleDataset, tuple[np.ndarray, np.ndarray] | None]:
    """One CSV per group. Headers must name identical feature columns."""
    header1, rows1 = _read_table(path1)
    header2, rows2 = _read_table(path2)
    if header1 != header2:
        raise CsvFormatError(
            f"group files disagree on columns: {header1} vs {header2}", line=1
        )
    names, x1, c1 = _split_columns(header1, rows1, covariate_cols)
    _, x2, c2 = _split_columns(header2, rows2, covariate_cols)
    d = TwoSampleDataset(group1=x1, group2=x2, feature_names=tuple(names))
    cov = (c1, c2) if covariate_cols else None
    return d, cov


def load_grouped_file(
    path: str, group_col: str, covariate_cols: Sequence[str] = ()
) -> tuple[TwoSampleDataset, tuple[np.ndarray, np.ndarray] | None]:
    """Single CSV with a group-label column holding exactly two distinct labels.

    Groups are ordered by sorted label so the mapping is reproducible.
    """
    header, rows = _read_table(path, keep_text=[group_col])
    if group_col not in header:
        raise CsvFormatError(f"group column {group_col!r} not found in header", line=1)
    gi = header.index(group_col)
    labels = sorted({row[gi] for row in rows})
    if len(labels) != 2:
        raise DegenerateDataError(
            f"group column {group_col!r} must hold exactly 2 distinct labels, "
            f"found {len(labels)}: {labels}"
        )
    parts = []
    covs = []
    for lab in labels:
        sub = [row for row in rows if row[gi] == lab]
        names, x, c = _split_columns(header, sub, covariate_cols, drop=[group_col])
        parts.append(x)
        covs.append(c)
    d = TwoSampleDataset(group1=parts[0], group2=parts[1], feature_names=tuple(names))
    cov = (covs[0], covs[1]) if covariate_cols else None
    return d, cov

"""Shared data model, whitening, and recovery metrics.

Everything downstream (generators, estimators, the demo lab, the CLI) works in
terms of the `Dataset` container defined here.  The two recovery metrics,
`amari_index` and `mcc`, quantify how close an estimate is to the truth up to
the indeterminacies a mixing model cannot resolve: component order, sign, and
scale (and, for the nonlinear case, pointwise monotone transforms).
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

__all__ = [
    "IdentikitError",
    "DataError",
    "ShapeError",
    "DegenerateDataError",
    "ZeroVarianceError",
    "UndefinedCorrelationError",
    "InsufficientDataError",
    "Dataset",
    "LinearMixingModel",
    "WhiteningResult",
    "RecoveryScore",
    "whiten",
    "amari_index",
    "mcc",
    "read_dataset_csv",
    "write_dataset_csv",
]


class IdentikitError(Exception):
    """Base class for library errors."""


class DataError(IdentikitError):
    """Bad input data or violated precondition."""


class ShapeError(DataError):
    """Array has the wrong shape for the requested operation."""


class DegenerateDataError(DataError):
    """Sample covariance is rank deficient (or numerically so)."""


class ZeroVarianceError(DataError):
    """An input sequence is constant where variation is required."""


class UndefinedCorrelationError(DataError):
    """Correlation requested against a constant column."""


class InsufficientDataError(DataError):
    """Too few observations for the requested estimate."""


def _as_matrix(values) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


@dataclass(frozen=True)
class Dataset:
    """Observations as a (rows = samples) x (columns = variables) matrix.

    Optional per-row segment labels (contiguous integers 0..T) and a strictly
    increasing time index.  Arrays are frozen after construction so values are
    safe to share across threads.
    """

    values: np.ndarray
    segment_labels: Optional[np.ndarray] = None
    time_index: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _as_matrix(self.values)
        if values.shape[0] < 2:
            raise DataError(f"need at least 2 rows, got {values.shape[0]}")
        if values.shape[1] < 1:
            raise DataError("need at least 1 column")
        if not np.all(np.isfinite(values)):
            raise DataError("non-finite entries in data")
        object.__setattr__(self, "values", values)

        if self.segment_labels is not None:
            labels = np.asarray(self.segment_labels, dtype=int)
            if labels.shape != (values.shape[0],):
                raise DataError(
                    f"segment_labels length {labels.shape} does not match row count {values.shape[0]}"
                )
            uniq = np.unique(labels)
            if uniq[0] != 0 or not np.array_equal(uniq, np.arange(uniq.size)):
                raise DataError("segment labels must form a contiguous set {0,...,T}")
            labels.flags.writeable = False
            object.__setattr__(self, "segment_labels", labels)

        if self.time_index is not None:
            t = np.asarray(self.time_index, dtype=float)
            if t.shape != (values.shape[0],):
                raise DataError("time_index length does not match row count")
            if not np.all(np.diff(t) > 0):
                raise DataError("time_index must be strictly increasing")
            t.flags.writeable = False
            object.__setattr__(self, "time_index", t)

        values.flags.writeable = False

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    @property
    def n_segments(self) -> int:
        """Number of segments T+1, or 1 when unlabeled."""
        if self.segment_labels is None:
            return 1
        return int(self.segment_labels.max()) + 1


@dataclass(frozen=True)
class LinearMixingModel:
    """Square invertible mixing matrix plus (optionally) the true sources."""

    mixing: np.ndarray
    sources: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        a = _as_matrix(self.mixing)
        if a.shape[0] != a.shape[1]:
            raise ShapeError(f"mixing matrix must be square, got {a.shape}")
        cond = np.linalg.cond(a)
        bound = self.metadata.get("cond_bound", 1e8)
        if not np.isfinite(cond) or cond > bound:
            raise DataError(f"mixing matrix condition number {cond:.3g} exceeds bound {bound:.3g}")
        a.flags.writeable = False
        object.__setattr__(self, "mixing", a)
        if self.sources is not None:
            s = _as_matrix(self.sources)
            s.flags.writeable = False
            object.__setattr__(self, "sources", s)


@dataclass(frozen=True)
class WhiteningResult:
    whitened: Dataset
    transform: np.ndarray  # acts on centered rows: z = V (x - mean)
    mean: np.ndarray


@dataclass(frozen=True)
class RecoveryScore:
    """Component-recovery quality up to permutation, sign, and scale.

    `matching[j] = (i, sign)` pairs estimated column j with truth column i.
    `amari_index` is populated only when a matrix comparison was made.
    """

    mcc: float
    matching: tuple
    amari_index: Optional[float] = None


def whiten(data: Dataset) -> WhiteningResult:
    """Whiten via symmetric eigendecomposition of the sample covariance.

    The transform is C^{-1/2} for sample covariance C (ddof=1), so the whitened
    sample covariance is the identity to rounding error.  Eigenvalues at or
    below the 1e-12 floor raise `DegenerateDataError` naming the offender.
    """
    x = data.values
    n, d = x.shape
    if n <= d:
        raise DataError(f"whitening needs more rows than columns, got {n} x {d}")
    mean = x.mean(axis=0)
    c = np.cov(x, rowvar=False, ddof=1).reshape(d, d)
    eigval, eigvec = np.linalg.eigh(c)
    floor = 1e-12
    if eigval[0] <= floor * max(1.0, eigval[-1]):
        raise DegenerateDataError(
            f"rank-deficient sample covariance: eigenvalue {eigval[0]:.6g} at or below floor"
        )
    v = (eigvec / np.sqrt(eigval)) @ eigvec.T
    whitened = Dataset(
        (x - mean) @ v.T,
        segment_labels=data.segment_labels,
        time_index=data.time_index,
    )
    return WhiteningResult(whitened=whitened, transform=v, mean=mean)


def amari_index(p) -> float:
    """Distance of a square matrix from the set of scaled signed permutations.

    Rows are first normalized by their max-abs entry, making the index exactly
    invariant to left diagonal rescaling and right signed permutations; the
    result is 0 iff the matrix is a scaled signed permutation, and is
    normalized to [0, 1] with 0 at a permutation.
    """
    q = np.abs(_as_matrix(p))
    if q.shape[0] != q.shape[1]:
        raise ShapeError(f"amari_index needs a square matrix, got {q.shape}")
    row_max = q.max(axis=1)
    col_max_raw = q.max(axis=0)
    if np.any(row_max == 0) or np.any(col_max_raw == 0):
        raise DataError("amari_index undefined for all-zero rows or columns")
    q = q / row_max[:, None]
    n = q.shape[0]
    if n == 1:
        return 0.0
    row_term = (q.sum(axis=1) / q.max(axis=1) - 1.0).sum()
    col_term = (q.sum(axis=0) / q.max(axis=0) - 1.0).sum()
    return float((row_term + col_term) / (2.0 * n * (n - 1)))


def _column_correlations(est: np.ndarray, truth: np.ndarray, mode: str) -> np.ndarray:
    """|corr| matrix between estimated (rows) and truth (cols) columns."""
    n = est.shape[1]
    r = np.zeros((n, n))
    signs = np.zeros((n, n))
    for j in range(n):
        ej = est[:, j]
        if np.std(ej) == 0:
            raise UndefinedCorrelationError(f"estimated column {j} is constant")
        for i in range(n):
            ti = truth[:, i]
            if np.std(ti) == 0:
                raise UndefinedCorrelationError(f"truth column {i} is constant")
            if mode == "signed-linear":
                c = np.corrcoef(ej, ti)[0, 1]
            else:  # abs-rank
                c = stats.spearmanr(np.abs(ej), np.abs(ti)).statistic
            r[j, i] = abs(c)
            signs[j, i] = 1.0 if c >= 0 else -1.0
    return r, signs


def _best_assignment(score: np.ndarray) -> tuple:
    """Assignment of rows to columns maximizing the mean score.

    Exhaustive for n <= 8, greedy best-first above.
    """
    n = score.shape[0]
    if n <= 8:
        best, best_perm = -np.inf, None
        for perm in itertools.permutations(range(n)):
            s = score[np.arange(n), perm].sum()
            if s > best:
                best, best_perm = s, perm
        return tuple(best_perm)
    assign = [-1] * n
    used_rows, used_cols = set(), set()
    order = np.dstack(np.unravel_index(np.argsort(score, axis=None)[::-1], score.shape))[0]
    for j, i in order:
        if j not in used_rows and i not in used_cols:
            assign[j] = i
            used_rows.add(j)
            used_cols.add(i)
            if len(used_rows) == n:
                break
    return tuple(assign)


def mcc(estimated, truth, mode: str = "signed-linear") -> RecoveryScore:
    """Mean correlation of best-matched components.

    mode "signed-linear" uses Pearson correlation; "abs-rank" uses Spearman
    rank correlation of absolute values, appropriate when components are only
    recoverable up to a pointwise (possibly non-monotonic, e.g. squaring)
    transform.
    """
    if mode not in ("signed-linear", "abs-rank"):
        raise ValueError(f"unknown mcc mode {mode!r}")
    e = _as_matrix(estimated)
    t = _as_matrix(truth)
    if e.shape != t.shape:
        raise ShapeError(f"shape mismatch: estimated {e.shape} vs truth {t.shape}")
    if e.shape[0] < 3:
        raise DataError("mcc needs at least 3 rows")
    r, signs = _column_correlations(e, t, mode)
    perm = _best_assignment(r)
    n = e.shape[1]
    matched = r[np.arange(n), perm]
    matching = tuple((int(perm[j]), int(signs[j, perm[j]])) for j in range(n))
    return RecoveryScore(mcc=float(matched.mean()), matching=matching)


# ---------------------------------------------------------------------------
# CSV interchange: header row x1..xn, optional integer `segment`, optional `t`.

def write_dataset_csv(data: Dataset, path) -> None:
    cols = [f"x{i + 1}" for i in range(data.n_vars)]
    if data.segment_labels is not None:
        cols.append("segment")
    if data.time_index is not None:
        cols.append("t")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(data.n_obs):
            row = [format(v, ".12g") for v in data.values[i]]
            if data.segment_labels is not None:
                row.append(str(int(data.segment_labels[i])))
            if data.time_index is not None:
                row.append(format(data.time_index[i], ".12g"))
            writer.writerow(row)


def read_dataset_csv(path) -> Dataset:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty CSV file: {path}")
        rows = list(reader)
    header = [h.strip() for h in header]
    var_cols = [i for i, h in enumerate(header) if h not in ("segment", "t")]
    expected = [f"x{k + 1}" for k in range(len(var_cols))]
    if [header[i] for i in var_cols] != expected:
        raise DataError(f"variable columns must be named x1..xn, got {header}")
    seg_col = header.index("segment") if "segment" in header else None
    t_col = header.index("t") if "t" in header else None
    try:
        values = np.array([[float(row[i]) for i in var_cols] for row in rows])
        segments = (
            np.array([int(row[seg_col]) for row in rows]) if seg_col is not None else None
        )
        times = np.array([float(row[t_col]) for row in rows]) if t_col is not None else None
    except (ValueError, IndexError) as exc:
        raise DataError(f"malformed CSV {path}: {exc}")
    return Dataset(values, segment_labels=segments, time_index=times)

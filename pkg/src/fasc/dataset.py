"""Data model, synthetic factor-mixture generator and CSV ingestion.

Labels are stored 0-based everywhere inside the package.  The only places
that translate to and from the 1-based ids used in files are
:func:`labels_to_external` and :func:`labels_from_external`.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IngestError, ValidationError

logger = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "NA", "NaN"})
_WEIGHT_TOL = 1e-12
_CENTER_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n x d`` observation matrix with optional ground-truth labels.

    ``labels`` are 0-based integers.  ``label_names`` (optional) maps each
    internal id to the class name it came from when read from a file.
    """

    X: np.ndarray
    labels: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None
    label_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValidationError(f"X must be two-dimensional, got shape {X.shape}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"X must have n >= 1 and d >= 1, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            bad = np.argwhere(~np.isfinite(X))[0]
            raise ValidationError(f"X has a non-finite entry at row {bad[0]}, column {bad[1]}")
        object.__setattr__(self, "X", _frozen(X.view()))
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (X.shape[0],):
                raise ValidationError(f"labels must have length n={X.shape[0]}, got shape {y.shape}")
            if y.size and (not np.issubdtype(y.dtype, np.integer) or y.min() < 0):
                raise ValidationError("labels must be nonnegative integers (0-based)")
            object.__setattr__(self, "labels", y.astype(np.int64, copy=False))
        if self.feature_names is not None:
            names = tuple(self.feature_names)
            if len(names) != X.shape[1]:
                raise ValidationError(f"expected {X.shape[1]} feature names, got {len(names)}")
            object.__setattr__(self, "feature_names", names)
        if self.label_names is not None:
            object.__setattr__(self, "label_names", tuple(self.label_names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def n_classes(self) -> int:
        """Number of classes implied by the labels (``max + 1``), 0 if unlabeled."""
        if self.labels is None or self.labels.size == 0:
            return 0
        if self.label_names is not None:
            return len(self.label_names)
        return int(self.labels.max()) + 1

    def with_X(self, X: np.ndarray) -> "Dataset":
        """Same labels and metadata, new matrix (feature names dropped if d changes)."""
        names = self.feature_names if X.shape[1] == self.d else None
        return Dataset(X, self.labels, names, self.label_names)


def labels_to_external(labels: np.ndarray) -> np.ndarray:
    """0-based internal ids -> 1-based ids for files and reports."""
    return np.asarray(labels, dtype=np.int64) + 1


def labels_from_external(labels: Iterable[int]) -> np.ndarray:
    """1-based ids read from files -> 0-based internal ids."""
    y = np.asarray(list(labels), dtype=np.int64)
    if y.size and y.min() < 1:
        raise ValidationError("external labels must be 1-based")
    return y - 1


@dataclass(frozen=True, eq=False)
class FactorMixtureSpec:
    """Parameters of ``x = mu_y + B f + eps`` with ``f ~ N(0, I_r)``, ``eps ~ N(0, sigma^2 I_d)``."""

    centroids: np.ndarray
    loading: np.ndarray
    sigma: float
    weights: np.ndarray
    centered: bool = True

    def __post_init__(self):
        mu = np.atleast_2d(np.asarray(self.centroids, dtype=float))
        d = mu.shape[1]
        B = np.asarray(self.loading, dtype=float)
        if B.size == 0:
            B = np.zeros((d, 0))
        if B.ndim == 1:
            B = B[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "centroids", _frozen(mu.copy()))
        object.__setattr__(self, "loading", _frozen(B.copy()))
        object.__setattr__(self, "weights", _frozen(w.copy()))
        object.__setattr__(self, "sigma", float(self.sigma))
        self.validate()

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    @property
    def r(self) -> int:
        return self.loading.shape[1]

    def validate(self) -> None:
        mu, B, w = self.centroids, self.loading, self.weights
        if self.K < 1:
            raise ValidationError("K >= 1 required: centroids has no rows")
        if B.shape[0] != self.d:
            raise ValidationError(f"loading must have d={self.d} rows, got {B.shape[0]}")
        if w.shape != (self.K,):
            raise ValidationError(f"weights must have length K={self.K}, got {w.shape[0]}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(B)) and math.isfinite(self.sigma)):
            raise ValidationError("spec contains non-finite values")
        if self.sigma < 0:
            raise ValidationError(f"sigma must be nonnegative, got {self.sigma}")
        if np.any(w <= 0):
            raise ValidationError("every weight must be > 0")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ValidationError(f"weights must sum to 1 within {_WEIGHT_TOL}, sum is {w.sum()!r}")
        if self.centered:
            m = np.linalg.norm(w @ mu)
            if m > _CENTER_TOL:
                raise ValidationError(f"model declared centered but |sum_j p_j mu_j| = {m:.3e}")

    def covariance(self) -> np.ndarray:
        """Model noise covariance ``B B^T + sigma^2 I``."""
        return self.loading @ self.loading.T + self.sigma**2 * np.eye(self.d)


@dataclass(frozen=True)
class Sample:
    """Every random piece drawn by :func:`sample_components`."""

    labels: np.ndarray
    factors: np.ndarray  # n x r
    noise: np.ndarray  # n x d, already scaled by sigma

    def idiosyncratic(self, spec: FactorMixtureSpec) -> np.ndarray:
        """``u_i = mu_{y_i} + eps_i``: the data with the factor part removed exactly."""
        return spec.centroids[self.labels] + self.noise


def sample_components(spec: FactorMixtureSpec, n: int, seed: int) -> Sample:
    """Draw labels, factor scores and noise for ``n`` rows.

    Draw order from a single PCG64 stream: labels, factors, noise.  Normal
    variates come from numpy's ziggurat transform of that stream.
    """
    if n < 1:
        raise ValidationError(f"n >= 1 required, got {n}")
    spec.validate()
    rng = np.random.default_rng(seed)
    y = rng.choice(spec.K, size=n, p=spec.weights)
    F = rng.standard_normal((n, spec.r))
    E = rng.standard_normal((n, spec.d)) * spec.sigma
    return Sample(y.astype(np.int64), F, E)


def generate(spec: FactorMixtureSpec, n: int, seed: int) -> Dataset:
    """Sample ``n`` labeled rows ``x_i = mu_{y_i} + B f_i + eps_i``."""
    s = sample_components(spec, n, seed)
    X = spec.centroids[s.labels] + s.factors @ spec.loading.T + s.noise
    return Dataset(X, s.labels)


def split_seed(seed: int) -> tuple[int, int]:
    """Two independent 63-bit seeds (spec parameters, data) derived from ``seed``."""
    a, b = np.random.SeedSequence(seed).spawn(2)
    return int(a.generate_state(1, np.uint64)[0] >> 1), int(b.generate_state(1, np.uint64)[0] >> 1)


SCENARIO_KINDS = ("strong", "weak")


def recipe_spec(name: str, sigma: float, d: int, K: int, r: int, seed: int) -> FactorMixtureSpec:
    """Loadings and centroids for the simulation recipes.

    ``strong``: rows of ``B`` iid ``N(0, I_r)``.  ``weak``: the same scaled by
    ``1/sqrt(d)``.  Centroids are ``theta_j - mean(theta)`` with
    ``theta_j ~ N(0, I_d / d)``; cluster weights are uniform.
    """
    if name not in SCENARIO_KINDS:
        raise ValidationError(f"unknown scenario {name!r}; expected one of {SCENARIO_KINDS}")
    if min(d, K) < 1 or r < 0:
        raise ValidationError(f"dims must be positive, got d={d}, K={K}, r={r}")
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((d, r))
    if name == "weak":
        B /= math.sqrt(d)
    theta = rng.standard_normal((K, d)) / math.sqrt(d)
    mu = theta - theta.mean(axis=0)
    return FactorMixtureSpec(mu, B, sigma, np.full(K, 1.0 / K))


def toy_spec(t: float, d: int = 100, r: int = 3, signal: float = 10.0, seed: int = 0) -> FactorMixtureSpec:
    """Two symmetric clusters ``+-signal*e_1`` with covariance ``t B B^T + I``.

    ``B`` has iid standard normal entries drawn from ``seed``.
    """
    if t < 0:
        raise ValidationError(f"correlation strength t must be >= 0, got {t}")
    B = np.random.default_rng(seed).standard_normal((d, r)) * math.sqrt(t)
    mu = np.zeros((2, d))
    mu[0, 0], mu[1, 0] = signal, -signal
    return FactorMixtureSpec(mu, B, 1.0, np.array([0.5, 0.5]))


def draw_scenario(
    kind: str, value: float, dims: tuple[int, int, int, int], seed: int
) -> tuple[Dataset, FactorMixtureSpec, Sample]:
    """Spec and sample for a named recipe.

    ``kind`` is ``strong``/``weak`` (``value`` is the noise level sigma) or
    ``toy`` (``value`` is the correlation strength t, ``K`` must be 2).
    ``dims`` is ``(n, d, K, r)``.
    """
    n, d, K, r = dims
    if n < 1:
        raise ValidationError(f"n >= 1 required, got {n}")
    pseed, dseed = split_seed(seed)
    if kind == "toy":
        if K != 2:
            raise ValidationError(f"the toy model has exactly K=2 clusters, got K={K}")
        spec = toy_spec(value, d=d, r=r, seed=pseed)
    else:
        spec = recipe_spec(kind, value, d, K, r, pseed)
    s = sample_components(spec, n, dseed)
    X = spec.centroids[s.labels] + s.factors @ spec.loading.T + s.noise
    return Dataset(X, s.labels), spec, s


def generate_paper_scenario(
    name: str, sigma: float, dims: tuple[int, int, int, int], seed: int
) -> tuple[Dataset, FactorMixtureSpec]:
    """Build the named recipe's spec and sample from it (``dims = (n, d, K, r)``)."""
    if name not in SCENARIO_KINDS:
        raise ValidationError(f"unknown scenario {name!r}; expected one of {SCENARIO_KINDS}")
    data, spec, _ = draw_scenario(name, sigma, dims, seed)
    return data, spec


def generate_toy(t: float, dims: tuple[int, int, int, int], seed: int) -> tuple[Dataset, FactorMixtureSpec]:
    """Sample the two-cluster correlated toy model; ``dims`` is ``(n, d, 2, r)``."""
    data, spec, _ = draw_scenario("toy", t, dims, seed)
    return data, spec


def save_spec(spec: FactorMixtureSpec, path: str | Path) -> None:
    try:
        with open(path, "wb") as fh:
            np.savez(fh, centroids=spec.centroids, loading=spec.loading, sigma=spec.sigma,
                     weights=spec.weights, centered=spec.centered)
    except OSError as exc:
        raise IngestError(f"cannot write {path}: {exc}") from exc


def load_spec(path: str | Path) -> FactorMixtureSpec:
    try:
        with np.load(path) as z:
            return FactorMixtureSpec(z["centroids"], z["loading"], float(z["sigma"]), z["weights"],
                                     bool(z["centered"]))
    except (OSError, KeyError, ValueError) as exc:
        raise IngestError(f"cannot read spec file {path}: {exc}") from exc


def split_halves(data: Dataset) -> tuple[Dataset, Dataset]:
    """First ``floor(n/2)`` rows and the rest, as views of ``data.X``."""
    if data.n < 2:
        raise ValidationError(f"cannot split fewer than 2 rows (n={data.n})")
    h = data.n // 2
    y = data.labels
    first = Dataset(data.X[:h], None if y is None else y[:h], data.feature_names, data.label_names)
    second = Dataset(data.X[h:], None if y is None else y[h:], data.feature_names, data.label_names)
    return first, second


# --------------------------------------------------------------------------
# CSV ingestion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CleaningRule:
    """How a raw table is cleaned before clustering.

    ``row_filters`` keeps only rows whose column value lies in the given
    set; it runs before anything else so that filter columns can also be
    listed in ``drop_columns``.  ``drop_label_values`` removes whole
    classes (e.g. classes too small to cluster).
    """

    drop_columns: tuple[str, ...] = ()
    drop_rows_with_missing: bool = False
    centralize: bool = False
    drop_label_values: tuple[str, ...] = ()
    row_filters: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    drop_rows_with_nonnumeric: bool = False


@dataclass(frozen=True)
class CleaningReport:
    rows_kept: int
    rows_dropped: int
    cols_dropped: int

    def line(self) -> str:
        return f"cleaning rows_kept={self.rows_kept} rows_dropped={self.rows_dropped} cols_dropped={self.cols_dropped}"


@dataclass(frozen=True)
class Table:
    """Raw string cells with a header row, as read from disk."""

    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def column(self, name: str) -> int:
        try:
            return self.header.index(name)
        except ValueError:
            raise ValidationError(f"column {name!r} not found in header") from None


def _detect_delimiter(header_line: str) -> str:
    has_comma, has_semi = "," in header_line, ";" in header_line
    if has_semi and not has_comma:
        return ";"
    if has_comma:
        return ","
    raise IngestError("could not detect a comma or semicolon delimiter; pass one explicitly")


def parse_table(text: str, delimiter: str | None = None) -> Table:
    """Parse delimiter-separated text with a header row.

    Lines starting with ``#`` are comments.  Auto-detection only considers
    comma and semicolon.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise IngestError("file has no header row")
    delim = delimiter or _detect_delimiter(lines[0])
    reader = csv.reader(io.StringIO("\n".join(lines)), delimiter=delim)
    header, *body = list(reader)
    header = tuple(h.strip() for h in header)
    rows = []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise IngestError(f"row {i} has {len(row)} cells, header has {len(header)}", row=i)
        rows.append(tuple(c.strip() for c in row))
    return Table(header, tuple(rows))


def read_table(path: str | Path, delimiter: str | None = None) -> Table:
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    return parse_table(text, delimiter)


def _is_number(cell: str) -> bool:
    if cell in MISSING_TOKENS:
        return False
    try:
        return math.isfinite(float(cell))
    except ValueError:
        return False


def clean_table(
    table: Table, label_column: str | None, rules: CleaningRule
) -> tuple[Dataset, CleaningReport]:
    """Apply ``rules`` to ``table`` and convert the remaining cells to floats.

    Order: row filters, drop listed classes, drop columns, drop rows with a
    missing (or, if asked, non-numeric) cell, extract labels, parse numbers,
    subtract column means.  Row numbers in errors count data rows from 1.
    """
    n_raw = len(table.rows)
    rows = list(enumerate(table.rows, start=1))
    for col, allowed in rules.row_filters.items():
        j = table.column(col)
        keep = set(allowed)
        rows = [(i, r) for i, r in rows if r[j] in keep]
    if rules.drop_label_values:
        if label_column is None:
            raise ValidationError("drop_label_values needs a label_column")
        j = table.column(label_column)
        drop = set(rules.drop_label_values)
        rows = [(i, r) for i, r in rows if r[j] not in drop]

    for name in rules.drop_columns:
        table.column(name)  # raises with the column name
    dropped = set(rules.drop_columns)
    kept_cols = [j for j, h in enumerate(table.header) if h not in dropped]
    header = [table.header[j] for j in kept_cols]
    rows = [(i, tuple(r[j] for j in kept_cols)) for i, r in rows]

    feat_idx = list(range(len(header)))
    lj = None
    if label_column is not None:
        if label_column not in header:
            raise ValidationError(f"label column {label_column!r} not found in header")
        lj = header.index(label_column)
        feat_idx.remove(lj)

    if rules.drop_rows_with_missing:
        rows = [(i, r) for i, r in rows if not any(c in MISSING_TOKENS for c in r)]
    if rules.drop_rows_with_nonnumeric:
        rows = [(i, r) for i, r in rows if all(_is_number(r[j]) for j in feat_idx)]
    if not rows:
        raise ValidationError("no rows left after cleaning")
    if not feat_idx:
        raise ValidationError("no feature columns left after cleaning")

    labels = names = None
    if lj is not None:
        raw = [r[lj] for _, r in rows]
        names = tuple(sorted(set(raw)))
        lookup = {v: k for k, v in enumerate(names)}
        labels = np.array([lookup[v] for v in raw], dtype=np.int64)

    X = np.empty((len(rows), len(feat_idx)))
    for a, (i, r) in enumerate(rows):
        for b, j in enumerate(feat_idx):
            cell = r[j]
            if not _is_number(cell):
                kind = "missing" if cell in MISSING_TOKENS else "non-numeric"
                raise IngestError(
                    f"{kind} cell {cell!r} at row {i}, column {header[j]!r}", row=i, column=header[j]
                )
            X[a, b] = float(cell)
    if rules.centralize:
        X -= X.mean(axis=0)
    report = CleaningReport(len(rows), n_raw - len(rows), len(table.header) - len(header))
    data = Dataset(X, labels, tuple(header[j] for j in feat_idx), names)
    return data, report


def load_csv(
    path: str | Path,
    label_column: str | None = None,
    rules: CleaningRule = CleaningRule(),
    delimiter: str | None = None,
) -> Dataset:
    """Read, clean and convert a CSV file; logs a one-line cleaning report."""
    data, report = clean_table(read_table(path, delimiter), label_column, rules)
    logger.info(report.line())
    return data


def table_from_dataset(data: Dataset, label_column: str = "label") -> Table:
    """Inverse of :func:`clean_table` for numeric data, used for round trips."""
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.d))
    header = tuple(names) + ((label_column,) if data.labels is not None else ())
    rows = []
    for i in range(data.n):
        cells = [repr(float(v)) for v in data.X[i]]
        if data.labels is not None:
            y = int(data.labels[i])
            cells.append(data.label_names[y] if data.label_names else str(y + 1))
        rows.append(tuple(cells))
    return Table(header, tuple(rows))


def write_csv(data: Dataset, path: str | Path, label_column: str = "label", comment: str | None = None) -> None:
    """Write features (and 1-based labels) as comma-separated text."""
    table = table_from_dataset(data, label_column)
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    w.writerows(table.rows)
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise IngestError(f"cannot write {path}: {exc}") from exc


def concat(parts: Sequence[Dataset]) -> Dataset:
    """Stack datasets vertically (labels kept only if every part has them)."""
    X = np.vstack([p.X for p in parts])
    ys = [p.labels for p in parts]
    y = None if any(v is None for v in ys) else np.concatenate(ys)
    return Dataset(X, y, parts[0].feature_names, parts[0].label_names)

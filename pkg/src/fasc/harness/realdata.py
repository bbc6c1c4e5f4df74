"""Real-data studies: fetching, cleaning presets and the method comparison table."""

from __future__ import annotations

import io
import logging
import os
import urllib.request
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..analysis import mislabeling, random_guess_baseline, scree
from ..clustering import FascConfig, fasc, kmeans_raw, spectral_cluster
from ..dataset import CleaningRule, Dataset, clean_table, read_table
from ..errors import IngestError, ValidationError
from ..kmeans import KMeansConfig

logger = logging.getLogger(__name__)

MICE_RULES = CleaningRule(
    drop_columns=("MouseID", "Genotype", "Treatment", "Behavior",
                  "BAD_N", "BCL2_N", "pCFOS_N", "H3AcK18_N", "EGR1_N", "H3MeK4_N"),
    drop_rows_with_missing=True,
    centralize=True,
)
CODON_RULES = CleaningRule(
    drop_columns=("DNAtype", "SpeciesID", "Ncodons", "SpeciesName"),
    drop_rows_with_missing=True,
    centralize=True,
    drop_label_values=("arc", "phg", "plm"),
    drop_rows_with_nonnumeric=True,
)


@dataclass(frozen=True)
class RealDataset:
    name: str
    url: str
    raw_name: str  # file name of the table inside the download
    label_column: str
    rules: CleaningRule
    shape: tuple[int, int]  # expected (n, d) after cleaning


DATASETS = {
    "mice": RealDataset(
        "mice",
        "https://archive.ics.uci.edu/ml/machine-learning-databases/00342/Data_Cortex_Nuclear.xls",
        "Data_Cortex_Nuclear.xls", "class", MICE_RULES, (1047, 71),
    ),
    "codon": RealDataset(
        "codon",
        "https://archive.ics.uci.edu/static/public/577/codon+usage.zip",
        "codon_usage.csv", "Kingdom", CODON_RULES, (12135, 64),
    ),
}


def data_dir() -> Path:
    return Path(os.environ.get("FASC_DATA_DIR", Path.home() / ".cache" / "fasc"))


def dataset_info(name: str) -> RealDataset:
    try:
        return DATASETS[name]
    except KeyError:
        raise ValidationError(f"unknown dataset {name!r}; expected one of {sorted(DATASETS)}") from None


def local_path(name: str, root: Path | None = None) -> Path:
    """Where the raw table of ``name`` lives once fetched (always a CSV)."""
    return (root or data_dir()) / f"{name}.csv"


def _download(url: str) -> bytes:
    try:
        with urllib.request.urlopen(url, timeout=60) as resp:
            return resp.read()
    except OSError as exc:
        raise IngestError(f"download of {url} failed: {exc}") from exc


def _xls_to_csv(payload: bytes) -> str:
    try:
        import pandas as pd
    except ImportError as exc:  # optional dependency
        raise IngestError("reading .xls needs the optional 'fetch' extras (pandas, xlrd)") from exc
    try:
        frame = pd.read_excel(io.BytesIO(payload))
    except ImportError as exc:
        raise IngestError("reading .xls needs the optional 'fetch' extras (pandas, xlrd)") from exc
    return frame.to_csv(index=False)


def _raw_csv(info: RealDataset, payload: bytes) -> str:
    if info.url.endswith(".zip"):
        with zipfile.ZipFile(io.BytesIO(payload)) as zf:
            member = next((m for m in zf.namelist() if m.endswith(info.raw_name)), None)
            if member is None:
                raise IngestError(f"{info.raw_name} not found in {info.url}")
            payload = zf.read(member)
            if not info.raw_name.endswith((".xls", ".xlsx")):
                return payload.decode("utf-8-sig")
    if info.raw_name.endswith((".xls", ".xlsx")):
        return _xls_to_csv(payload)
    return payload.decode("utf-8-sig")


def load_real(name: str, path: str | Path | None = None) -> tuple[Dataset, object]:
    """Clean a fetched dataset with its preset rules; returns data and cleaning report."""
    info = dataset_info(name)
    return clean_table(read_table(path or local_path(name)), info.label_column, info.rules)


def verify_shape(name: str, data: Dataset) -> None:
    want = dataset_info(name).shape
    if (data.n, data.d) != want:
        raise IngestError(f"{name}: cleaned shape {(data.n, data.d)} differs from the expected {want}")


def fetch(name: str, root: Path | None = None, verify: bool = True) -> Path:
    """Download ``name``, store its raw table as CSV and check the cleaned shape."""
    info = dataset_info(name)
    target = local_path(name, root)
    target.parent.mkdir(parents=True, exist_ok=True)
    text = _raw_csv(info, _download(info.url))
    try:
        target.write_text(text)
    except OSError as exc:
        raise IngestError(f"cannot write {target}: {exc}") from exc
    data, report = load_real(name, target)
    logger.info("%s: %s", name, report.line())
    if verify:
        verify_shape(name, data)
    return target


# --------------------------------------------------------------------------
# method comparison
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RealDataReport:
    rows: tuple[tuple[str, int | None, float], ...]  # (method, r, mislabeling)
    baseline: float
    scree: np.ndarray
    n: int
    d: int
    K: int
    seed: int

    def table_csv(self) -> str:
        lines = ["method,r_alg,mislabeling,seed"]
        for method, r, mis in self.rows:
            lines.append(f"{method},{'' if r is None else r},{float(mis)!r},{self.seed}")
        lines.append(f"baseline,,{float(self.baseline)!r},{self.seed}")
        return "\n".join(lines) + "\n"

    def scree_csv(self) -> str:
        return "index,eigenvalue\n" + "".join(f"{i + 1},{float(v)!r}\n" for i, v in enumerate(self.scree))

    def mislabeling_of(self, method: str, r: int | None = None) -> float:
        for m, rr, mis in self.rows:
            if m == method and rr == r:
                return mis
        raise KeyError((method, r))


def compare_methods(
    data: Dataset,
    K: int,
    methods: Sequence[str] = ("kmeans_raw", "spectral", "fasc"),
    r_grid: Sequence[int] = (1, 2, 3, 4),
    seed: int = 0,
    restarts: int = 10,
) -> RealDataReport:
    """Mislabeling of each method against ``data.labels``, plus baseline and scree."""
    if data.labels is None:
        raise ValidationError("real-data comparison needs a label column")
    km = KMeansConfig(K, restarts=restarts, seed=seed)
    rows = []
    for m in methods:
        if m == "kmeans_raw":
            rows.append((m, None, mislabeling(kmeans_raw(data, K, km).labels, data.labels, K)))
        elif m == "spectral":
            rows.append((m, None, mislabeling(spectral_cluster(data, K, K, km).labels, data.labels, K)))
        elif m == "fasc":
            for r in r_grid:
                res = fasc(data, FascConfig(r=r, K=K, kmeans=km))
                rows.append((m, int(r), mislabeling(res.labels, data.labels, K)))
        else:
            raise ValidationError(f"unknown real-data method {m!r}")
    base = random_guess_baseline(data.labels, K, seed)
    return RealDataReport(tuple(rows), base, scree(data), data.n, data.d, K, seed)


def run_realdata(
    path: str | Path,
    label_column: str,
    rules: CleaningRule,
    K: int,
    methods: Sequence[str] = ("kmeans_raw", "spectral", "fasc"),
    r_grid: Sequence[int] = (1, 2, 3, 4),
    seed: int = 0,
    restarts: int = 10,
) -> RealDataReport:
    """Ingest ``path`` with ``rules`` and compare the methods on it."""
    data, report = clean_table(read_table(path), label_column, rules)
    logger.info(report.line())
    return compare_methods(data, K, methods, r_grid, seed, restarts)


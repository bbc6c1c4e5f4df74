"""Seeded Monte Carlo sweeps and their CSV outputs."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..analysis import mislabeling, optimal_bayes_labels, snr_report
from ..clustering import FascConfig, fasc, kmeans_raw, spectral_cluster, spectral_cluster_crossfit
from ..dataset import Dataset, draw_scenario
from ..errors import IngestError, ValidationError
from ..kmeans import KMeansConfig
from .scenario import Scenario, parse_method

logger = logging.getLogger(__name__)

CSV_HEADER = ("scenario", "method", "r_alg", "sigma", "replicate", "seed", "mislabeling",
              "objective", "wall_ms", "snr_bar", "s_quantity")
PLOT_HEADER = ("scenario", "method", "r_alg", "sigma", "count", "mislabeling_mean", "mislabeling_se")


@dataclass(frozen=True)
class ExperimentRecord:
    """One (scenario, method, grid value, replicate) outcome.

    ``sigma`` holds the grid value: the noise level, or ``t`` for toy
    scenarios.  Failed runs carry NaN in ``mislabeling`` and ``objective``.
    """

    scenario: str
    method: str
    r_alg: int | None
    sigma: float
    replicate: int
    seed: int
    mislabeling: float
    objective: float
    wall_ms: float
    snr_bar: float
    s_quantity: float

    @property
    def failed(self) -> bool:
        return math.isnan(self.mislabeling)


def derive_seed(base_seed: int, scenario: str, value: float, replicate: int) -> int:
    """Replicate-local seed: ``base_seed XOR sha256(scenario|value|replicate)``, 63 bits."""
    key = f"{scenario}|{float(value)!r}|{int(replicate)}".encode()
    h = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
    return (int(base_seed) ^ h) & ((1 << 63) - 1)


def _run_method(method: str, r_alg: int | None, data: Dataset, ideal: Dataset, sc: Scenario, seed: int):
    K = sc.dims[2]
    km = KMeansConfig(K, restarts=sc.restarts, seed=seed)
    k = sc.embed_dim
    if method == "spectral":
        return spectral_cluster(data, K, k, km)
    if method == "crossfit":
        return spectral_cluster_crossfit(data, K, k, km)
    if method == "kmeans_raw":
        return kmeans_raw(data, K, km)
    if method == "ideal":
        return spectral_cluster(ideal, K, k, km)
    return fasc(data, FascConfig(r=r_alg, K=K, k=k, split=sc.mode, kmeans=km))


def _replicate(args) -> list[ExperimentRecord]:
    sc, value, rep, timing = args
    seed = derive_seed(sc.base_seed, sc.name, value, rep)
    kind = "toy" if sc.loading == "toy" else sc.loading
    data, spec, sample = draw_scenario(kind, value, sc.dims, seed)
    ideal = data.with_X(sample.idiosyncratic(spec))
    snr = snr_report(spec)
    out = []
    for m in sc.methods:
        method, r_alg = parse_method(m)
        t0 = time.perf_counter()
        try:
            res = _run_method(method, r_alg, data, ideal, sc, seed)
            mis, obj = mislabeling(res.labels, data.labels, sc.dims[2]), res.objective
        except Exception as exc:  # per-replicate failures become error rows
            logger.warning("scenario=%s method=%s value=%r replicate=%d failed: %s", sc.name, m, value, rep, exc)
            mis = obj = math.nan
        ms = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
        out.append(ExperimentRecord(sc.name, method, r_alg, value, rep, seed, mis, obj, ms,
                                    snr.snr_bar, snr.s_quantity))
    return out


def run_scenario(sc: Scenario, jobs: int = 1, timing: bool = False) -> list[ExperimentRecord]:
    """Every (grid value, replicate, method) record, in that nesting order.

    Seeds depend only on (base seed, scenario name, grid value, replicate),
    so ``jobs > 1`` yields exactly the serial records.  ``timing=False``
    writes ``wall_ms = 0`` to keep outputs byte-reproducible.
    """
    tasks = [(sc, v, rep, timing) for v in sc.sigma_grid for rep in range(sc.replicates)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_replicate, tasks))
    else:
        chunks = [_replicate(t) for t in tasks]
    return [rec for chunk in chunks for rec in chunk]


@dataclass(frozen=True)
class OraclePoint:
    t: float
    optimal_rate: float  # mean closed-form Phi(-sqrt(SNR)) over replicates
    empirical_optimal: float  # mean mislabeling of the Bayes rule
    snr: float  # mean SNR
    n_total: int


def run_oracle_curve(sc: Scenario) -> list[OraclePoint]:
    """Closed-form optimal rate next to the Bayes rule's empirical mislabeling."""
    if sc.loading != "toy":
        raise ValidationError("the oracle curve needs a two-cluster symmetric (toy) scenario")
    out = []
    for t in sc.sigma_grid:
        rates, emp, snrs = [], [], []
        for rep in range(sc.replicates):
            seed = derive_seed(sc.base_seed, sc.name, t, rep)
            data, spec, _ = draw_scenario("toy", t, sc.dims, seed)
            rep_snr = snr_report(spec)
            rates.append(rep_snr.optimal_rate)
            snrs.append(rep_snr.snr)
            emp.append(mislabeling(optimal_bayes_labels(data, spec), data.labels, 2))
        out.append(OraclePoint(t, float(np.mean(rates)), float(np.mean(emp)), float(np.mean(snrs)),
                               sc.dims[0] * sc.replicates))
    return out


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def records_csv(records: Iterable[ExperimentRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        w.writerow([_fmt(v) for v in astuple(rec)])
    return buf.getvalue()


def _write(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IngestError(f"cannot write {path}: {exc}") from exc


def emit_csv(records: Sequence[ExperimentRecord], path: str | Path) -> None:
    """Write records under the fixed header, in the given order."""
    _write(path, records_csv(records))


def read_records(path: str | Path) -> list[ExperimentRecord]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise IngestError(f"{path} does not carry the records header")
    out = []
    for row in rows[1:]:
        vals = dict(zip(CSV_HEADER, row))
        out.append(ExperimentRecord(
            vals["scenario"], vals["method"], int(vals["r_alg"]) if vals["r_alg"] else None,
            float(vals["sigma"]), int(vals["replicate"]), int(vals["seed"]), float(vals["mislabeling"]),
            float(vals["objective"]), float(vals["wall_ms"]), float(vals["snr_bar"]), float(vals["s_quantity"]),
        ))
    return out


def plotdata(records: Sequence[ExperimentRecord]) -> list[tuple]:
    """Mean and standard error of mislabeling per (scenario, method, r_alg, sigma).

    Failed runs are left out of the statistics.  Rows follow the first
    appearance of each group in ``records``.
    """
    groups: dict[tuple, list[float]] = {}
    for rec in records:
        key = (rec.scenario, rec.method, rec.r_alg, rec.sigma)
        groups.setdefault(key, [])
        if not rec.failed:
            groups[key].append(rec.mislabeling)
    rows = []
    for key, vals in groups.items():
        a = np.asarray(vals, dtype=float)
        mean = float(a.mean()) if a.size else math.nan
        se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
        rows.append((*key, a.size, mean, se))
    return rows


def emit_plotdata(records: Sequence[ExperimentRecord], path: str | Path, comment: str | None = None) -> None:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_HEADER)
    for row in plotdata(records):
        w.writerow([_fmt(v) for v in row])
    _write(path, buf.getvalue())


def oracle_csv(points: Sequence[OraclePoint], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f.name for f in fields(OraclePoint)])
    for p in points:
        w.writerow([_fmt(v) for v in astuple(p)])
    return buf.getvalue()

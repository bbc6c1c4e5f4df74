"""Command line entry point (``fasc <subcommand> ...``).

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O or
parse failure.  Every output carries the seed that produced it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..analysis import assumption_report, mislabeling, scree, snr_report, spectral_conditions
from ..clustering import FascConfig, fasc, kmeans_raw, spectral_cluster, spectral_cluster_crossfit
from ..dataset import CleaningRule, draw_scenario, generate, labels_to_external, load_csv, load_spec, save_spec, write_csv
from ..errors import FascError, IngestError, ValidationError
from ..kmeans import KMeansConfig
from . import realdata
from .runner import emit_csv, emit_plotdata, oracle_csv, records_csv, run_oracle_curve, run_scenario
from .scenario import REAL_METHODS, RealDataScenario, Scenario, bundled_names, expand_grid, load_scenario

logger = logging.getLogger("fasc")


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IngestError(f"cannot write {path}: {exc}") from exc


def _grid(text: str) -> tuple[float, ...]:
    try:
        return expand_grid([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ValidationError(f"bad grid {text!r}: {exc}") from exc


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_generate(a) -> int:
    if a.spec:
        spec = load_spec(a.spec)
        data = generate(spec, a.n, a.seed)
        desc = f"seed={a.seed} spec={a.spec} n={a.n}"
    else:
        data, spec, _ = draw_scenario(a.kind, a.value, (a.n, a.d, a.K, a.r), a.seed)
        desc = f"seed={a.seed} kind={a.kind} value={a.value!r} n={a.n} d={a.d} K={a.K} r={a.r}"
    write_csv(data, a.out, comment=desc)
    if a.spec_out:
        save_spec(spec, a.spec_out)
    logger.info("wrote %s (%s)", a.out, desc)
    return 0


def cmd_cluster(a) -> int:
    rules = CleaningRule(centralize=a.centralize)
    data = load_csv(a.input, a.label_column, rules)
    km = KMeansConfig(a.K, restarts=a.restarts, seed=a.seed)
    if a.method == "kmeans_raw":
        res = kmeans_raw(data, a.K, km)
    elif a.method == "spectral":
        res = spectral_cluster(data, a.K, a.k, km)
    elif a.method == "crossfit":
        res = spectral_cluster_crossfit(data, a.K, a.k, km)
    else:
        res = fasc(data, FascConfig(r=a.r, K=a.K, k=a.k, split=a.split, kmeans=km))
    lines = [f"# seed={a.seed} method={a.method} K={a.K}", "index,label"]
    lines += [f"{i + 1},{y}" for i, y in enumerate(labels_to_external(res.labels))]
    _write_text(a.out, "\n".join(lines) + "\n")
    if data.labels is not None:
        logger.info("mislabeling=%.6f seed=%d", mislabeling(res.labels, data.labels, max(a.K, data.n_classes())), a.seed)
    return 0


def _scenario(ref: str, want=Scenario):
    sc = load_scenario(ref)
    if not isinstance(sc, want):
        raise ValidationError(f"scenario {ref!r} is not a {want.__name__}")
    return sc


def _override(sc: Scenario, a) -> Scenario:
    raw = sc.to_dict()
    if a.grid:
        raw["sigma_grid"] = list(_grid(a.grid))
    if a.replicates is not None:
        raw["replicates"] = a.replicates
    if a.seed is not None:
        raw["base_seed"] = a.seed
    return Scenario.from_dict(raw)


def cmd_simulate(a) -> int:
    sc = _override(_scenario(a.scenario), a)
    if a.methods:
        sc = Scenario.from_dict({**sc.to_dict(), "methods": [m.strip() for m in a.methods.split(";") if m.strip()]})
    records = run_scenario(sc, jobs=a.jobs, timing=a.timing)
    if a.out:
        emit_csv(records, a.out)
    else:
        sys.stdout.write(records_csv(records))
    if a.plotdata:
        emit_plotdata(records, a.plotdata, comment=f"base_seed={sc.base_seed} scenario={sc.name}")
    failed = sum(r.failed for r in records)
    logger.info("scenario=%s records=%d failed=%d base_seed=%d", sc.name, len(records), failed, sc.base_seed)
    return 0


def cmd_oracle(a) -> int:
    sc = _override(_scenario(a.scenario), a)
    pts = run_oracle_curve(sc)
    _write_text(a.out, oracle_csv(pts, comment=f"base_seed={sc.base_seed} scenario={sc.name}"))
    return 0


def cmd_realdata(a) -> int:
    if a.scenario:
        sc = _scenario(a.scenario, RealDataScenario)
        name, K, methods, r_grid, seed, restarts = sc.dataset, sc.K, sc.methods, sc.r_grid, sc.seed, sc.restarts
    else:
        name, K, methods, r_grid, seed, restarts = a.dataset, 8, REAL_METHODS, (1, 2, 3, 4), 0, 10
    if a.seed is not None:
        seed = a.seed
    if a.r_grid:
        r_grid = tuple(int(v) for v in a.r_grid.split(","))
    info = realdata.dataset_info(name)
    path = Path(a.path) if a.path else realdata.local_path(name)
    if not path.exists():
        raise IngestError(f"{path} not found; run `fasc fetch {name}` first")
    rep = realdata.run_realdata(path, info.label_column, info.rules, K, methods, r_grid, seed, restarts)
    _write_text(a.out, rep.table_csv())
    if a.scree_out:
        _write_text(a.scree_out, f"# seed={seed} dataset={name}\n" + rep.scree_csv())
    return 0


def cmd_scree(a) -> int:
    if a.dataset:
        data, _ = realdata.load_real(a.dataset, a.input)
    else:
        if not a.input:
            raise ValidationError("scree needs --input or --dataset")
        data = load_csv(a.input, a.label_column, CleaningRule(centralize=True))
    vals = scree(data)[: a.top] if a.top else scree(data)
    _write_text(a.out, "index,eigenvalue\n" + "".join(f"{i + 1},{float(v)!r}\n" for i, v in enumerate(vals)))
    return 0


def cmd_diagnose(a) -> int:
    spec = load_spec(a.spec)
    k = a.k or spec.K
    rng = np.random.default_rng(a.seed)
    labels = rng.choice(spec.K, size=a.n, p=spec.weights)
    sigma_eff = a.sigma_eff if a.sigma_eff is not None else spec.sigma
    out = {
        "seed": a.seed,
        "snr": snr_report(spec).as_dict(),
        "assumptions": assumption_report(spec, k, n=a.n).as_dict(),
        "spectral_conditions": spectral_conditions(spec, labels, sigma_eff, a.n, spec.d, k).as_dict(),
    }
    _write_text(a.out, json.dumps(out, indent=2, default=float) + "\n")
    return 0


def cmd_fetch(a) -> int:
    root = Path(a.dir) if a.dir else None
    for name in a.names:
        path = realdata.fetch(name, root, verify=not a.no_verify)
        print(path)
    return 0


def cmd_list(a) -> int:
    for name in bundled_names():
        sc = load_scenario(name)
        kind = "realdata" if isinstance(sc, RealDataScenario) else sc.loading
        print(f"{name}\t{kind}")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fasc", description="Factor-adjusted spectral clustering experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a synthetic data set to CSV")
    g.add_argument("--kind", choices=("strong", "weak", "toy"), default="strong")
    g.add_argument("--value", type=float, default=0.05, help="sigma, or t for --kind toy")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--d", type=int, default=100)
    g.add_argument("--K", type=int, default=5)
    g.add_argument("--r", type=int, default=3)
    g.add_argument("--spec", help="sample from a saved spec (.npz) instead of a recipe")
    g.add_argument("--spec-out", help="also save the generating spec (.npz)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", help="cluster the rows of a CSV file")
    c.add_argument("--input", required=True)
    c.add_argument("--label-column", help="column holding true labels (reported, not used)")
    c.add_argument("--method", choices=("kmeans_raw", "spectral", "crossfit", "fasc"), default="fasc")
    c.add_argument("--K", type=int, required=True)
    c.add_argument("--k", type=int)
    c.add_argument("--r", type=int, default=1)
    c.add_argument("--split", choices=("full_sample", "half_split"), default="full_sample")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--restarts", type=int, default=10)
    c.add_argument("--centralize", action="store_true", help="subtract column means first")
    c.add_argument("--out", help="labels CSV (default stdout)")
    c.set_defaults(func=cmd_cluster)

    s = sub.add_parser("simulate", help="run a scenario sweep to a records CSV")
    s.add_argument("scenario", help="scenario file or bundled name")
    s.add_argument("--out", help="records CSV (default stdout)")
    s.add_argument("--plotdata", help="also write per-grid-point means and standard errors")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--timing", action="store_true", help="record wall-clock times (breaks byte reproducibility)")
    s.add_argument("--grid", help="comma-separated grid values overriding the scenario's")
    s.add_argument("--replicates", type=int)
    s.add_argument("--methods", help="semicolon-separated methods overriding the scenario's")
    s.add_argument("--seed", type=int, help="base seed overriding the scenario's")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", help="optimal-rate reference curve for a two-cluster scenario")
    o.add_argument("scenario", nargs="?", default="fig1_toy")
    o.add_argument("--grid")
    o.add_argument("--replicates", type=int)
    o.add_argument("--seed", type=int)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("realdata", help="compare methods on a fetched real data set")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="real-data scenario file or bundled name")
    src.add_argument("--dataset", choices=sorted(realdata.DATASETS))
    r.add_argument("--path", help="raw CSV (default: the fetched copy)")
    r.add_argument("--r-grid", help="comma-separated factor counts for FASC")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--scree-out")
    r.set_defaults(func=cmd_realdata)

    q = sub.add_parser("scree", help="eigenvalues of the centered sample covariance")
    q.add_argument("--input")
    q.add_argument("--dataset", choices=sorted(realdata.DATASETS), help="apply that data set's cleaning preset")
    q.add_argument("--label-column")
    q.add_argument("--top", type=int)
    q.add_argument("--out")
    q.set_defaults(func=cmd_scree)

    dg = sub.add_parser("diagnose", help="assumption and spectral-condition report for a spec")
    dg.add_argument("--spec", required=True)
    dg.add_argument("--k", type=int)
    dg.add_argument("--n", type=int, default=1000)
    dg.add_argument("--sigma-eff", type=float)
    dg.add_argument("--seed", type=int, default=0)
    dg.add_argument("--out")
    dg.set_defaults(func=cmd_diagnose)

    f = sub.add_parser("fetch", help="download and verify the real data sets")
    f.add_argument("names", nargs="+", choices=sorted(realdata.DATASETS))
    f.add_argument("--dir", help="target directory (default $FASC_DATA_DIR or ~/.cache/fasc)")
    f.add_argument("--no-verify", action="store_true", help="skip the cleaned-shape check")
    f.set_defaults(func=cmd_fetch)

    ls = sub.add_parser("list-scenarios", help="bundled scenario names")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return a.func(a)
    except FascError as exc:
        detail = ""
        if isinstance(exc, IngestError) and exc.row is not None:
            detail = f" (row {exc.row}" + (f", column {exc.column}" if exc.column else "") + ")"
        print(f"error: {exc}{detail}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
